//! Lyapunov evaluation, performance costs, convergence coefficients, and
//! packaged theorem checks over completed trajectories.
//!
//! The Lyapunov function for the adaptive protocol is
//!
//! ```text
//! V = |mu|^2 + sum over ordered edge pairs of (w_kj - w_kj(0))^2 / 2
//!            + (1/2M) * sum over all ordered pairs of (w_kj_hat - w_kj)
//! ```
//!
//! where `w_kj_hat` is an upper-bound estimate for the weight limits. The
//! middle sum runs over edges only (those weights drive the dynamics); the
//! last sum runs over every pair, matching the simulator's all-pairs weight
//! state. With that split the analytic derivative collapses exactly to
//!
//! ```text
//! V' = -alpha * sum_k (2 lambda_k + 1) mu_k^2
//! ```
//!
//! with the `lambda_k` taken from the initial Laplacian, which is what
//! [`lyapunov_rate_analytic`] evaluates and the central-difference
//! cross-check in [`check_theorems`] verifies.
//!
//! The convergence coefficient `rho(t) = -V'/|mu|^2` is evaluated per
//! sample; near consensus it degenerates to 0/0, so samples with
//! `|mu|^2 <= EPSILON_FLOOR` are skipped and counted instead of reported.

use serde::Serialize;
use thiserror::Error;

use crate::decomposition::{centered_energy, disagreement, DecompositionError, SpectralFrame};
use crate::dynamics::{Mode, ProtocolConfig, SystemState, Trajectory};
use crate::graph::Topology;

/// Disagreement-energy floor below which `rho(t)` is not evaluated.
pub const EPSILON_FLOOR: f64 = 1e-12;

/// Accepted last-decile relative growth for a plateaued accumulator.
pub const PLATEAU_REL_TOL: f64 = 1e-8;

/// Absolute tolerance on convergence-rate bounds.
pub const RATE_BOUND_TOL: f64 = 1e-6;

/// Relative tolerance on cost comparisons.
pub const COST_REL_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),

    #[error("weight bound estimate at pair index {index} is {bound}, below the weight {weight}")]
    InvalidBoundEstimate {
        index: usize,
        bound: f64,
        weight: f64,
    },

    #[error("vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("requested horizon {requested} exceeds the trajectory horizon {available}")]
    HorizonExceeded { requested: f64, available: f64 },

    #[error(
        "disagreement accumulator has not plateaued: last-decile increase is {increase:e} \
         of the final value (tolerance {tol:e}); rerun with a longer horizon"
    )]
    NotPlateaued { increase: f64, tol: f64 },

    #[error("telescoping check applies to adaptive runs only")]
    AdaptiveOnly,
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Consensus detection result: the first settle time, or a marker that the
/// trajectory never settled below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConsensusTime {
    Reached(f64),
    NotReached,
}

impl ConsensusTime {
    pub fn as_option(&self) -> Option<f64> {
        match self {
            ConsensusTime::Reached(t) => Some(*t),
            ConsensusTime::NotReached => None,
        }
    }
}

impl std::fmt::Display for ConsensusTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsensusTime::Reached(t) => write!(f, "{t}"),
            ConsensusTime::NotReached => write!(f, "not reached"),
        }
    }
}

impl Serialize for ConsensusTime {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ConsensusTime::Reached(t) => serializer.serialize_f64(*t),
            ConsensusTime::NotReached => serializer.serialize_str("not reached"),
        }
    }
}

/// Sampled convergence coefficient, aligned with the trajectory samples.
///
/// `None` entries mark samples under the [`EPSILON_FLOOR`]; their count is
/// in `skipped`.
#[derive(Debug, Clone)]
pub struct RhoSeries {
    values: Vec<Option<f64>>,
    skipped: usize,
}

impl RhoSeries {
    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Smallest evaluated coefficient, if any sample was evaluated.
    pub fn min(&self) -> Option<f64> {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(None, |acc, v| match acc {
                None => Some(v),
                Some(a) => Some(a.min(v)),
            })
    }
}

/// Everything the theorem checks produce for one run.
///
/// Serializes to JSON with exactly this field order.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub lambda2: f64,
    pub rho_min_standard: f64,
    pub rho_min_adaptive: f64,
    pub jr_h_final: f64,
    pub jr_star: f64,
    pub consensus_time: ConsensusTime,
    pub theorem1_holds: bool,
    pub theorem2_holds: bool,
    pub gain_condition_holds: bool,
    pub jr_star_plateaued: bool,
    pub rho_skipped_samples: usize,
    pub v_dot_max_rel_err: Option<f64>,
    pub v_series: Vec<f64>,
    pub v_dot_series: Vec<f64>,
    pub rho_series: Vec<Option<f64>>,
}

fn validate_bound(w: &[f64], w_hat_m: &[f64]) -> Result<()> {
    if w.len() != w_hat_m.len() {
        return Err(AnalysisError::LengthMismatch {
            expected: w.len(),
            got: w_hat_m.len(),
        });
    }
    for (index, (&weight, &bound)) in w.iter().zip(w_hat_m.iter()).enumerate() {
        if bound < weight {
            return Err(AnalysisError::InvalidBoundEstimate {
                index,
                bound,
                weight,
            });
        }
    }
    Ok(())
}

/// Evaluates the Lyapunov function at one state.
///
/// `w0` holds the initial per-pair weights (all ones for a protocol run) and
/// `w_hat_m` the per-pair upper-bound estimates, usually the final weights
/// of a plateaued run. Ordered-pair sums are computed as twice the stored
/// unordered sums.
///
/// # Errors
///
/// [`AnalysisError::InvalidBoundEstimate`] if any bound estimate falls below
/// the current weight; length mismatches.
pub fn lyapunov(
    frame: &SpectralFrame,
    topology: &Topology,
    state: &SystemState,
    w0: &[f64],
    w_hat_m: &[f64],
) -> Result<f64> {
    let pairs = topology.pair_count();
    if w0.len() != pairs {
        return Err(AnalysisError::LengthMismatch {
            expected: pairs,
            got: w0.len(),
        });
    }
    if state.w.len() != pairs {
        return Err(AnalysisError::LengthMismatch {
            expected: pairs,
            got: state.w.len(),
        });
    }
    validate_bound(&state.w, w_hat_m)?;

    let mu = disagreement(frame, &state.x)?;
    let mut edge_drift = 0.0;
    let mut headroom = 0.0;
    for idx in 0..pairs {
        if topology.edge_flags()[idx] {
            let d = state.w[idx] - w0[idx];
            edge_drift += d * d;
        }
        headroom += w_hat_m[idx] - state.w[idx];
    }
    let m = topology.node_count() as f64;
    Ok(mu.norm_squared() + edge_drift + headroom / m)
}

/// Analytic Lyapunov derivative for the adaptive protocol:
/// `-alpha * sum_k (2 lambda_k + 1) mu_k^2` over the initial eigenvalues.
pub fn lyapunov_rate_analytic(
    frame: &SpectralFrame,
    mu: &crate::decomposition::DisagreementVector,
    alpha: f64,
) -> f64 {
    let omega = frame.omega0();
    let mut total = 0.0;
    for (k, value) in mu.mu().iter().enumerate() {
        total += (2.0 * omega[k] + 1.0) * value * value;
    }
    -alpha * total
}

fn rate_analytic(
    frame: &SpectralFrame,
    mu: &crate::decomposition::DisagreementVector,
    cfg: &ProtocolConfig,
) -> f64 {
    match cfg.mode() {
        Mode::Adaptive => lyapunov_rate_analytic(frame, mu, cfg.alpha()),
        Mode::Standard => {
            let omega = frame.omega0();
            let mut total = 0.0;
            for (k, value) in mu.mu().iter().enumerate() {
                total += omega[k] * value * value;
            }
            -2.0 * cfg.alpha() * total
        }
    }
}

fn nearest_sample_index(traj: &Trajectory, t: f64) -> usize {
    let samples = traj.samples();
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (idx, sample) in samples.iter().enumerate() {
        let dist = (sample.time - t).abs();
        if dist < best_dist {
            best = idx;
            best_dist = dist;
        }
    }
    best
}

/// Running performance cost `J_r^H` at horizon `up_to`, read from the cost
/// accumulator at the nearest sample.
///
/// # Errors
///
/// [`AnalysisError::HorizonExceeded`] if `up_to` lies beyond the trajectory.
pub fn performance_cost(traj: &Trajectory, up_to: f64) -> Result<f64> {
    let available = traj.final_state().time;
    if up_to > available * (1.0 + 1e-12) + 1e-12 || up_to < 0.0 {
        return Err(AnalysisError::HorizonExceeded {
            requested: up_to,
            available,
        });
    }
    Ok(traj.samples()[nearest_sample_index(traj, up_to)].cost_acc)
}

fn plateau_increase(traj: &Trajectory, read: impl Fn(&SystemState) -> f64) -> f64 {
    let last = read(traj.final_state());
    if last == 0.0 {
        return 0.0;
    }
    let t_decile = 0.9 * traj.final_state().time;
    let at_decile = read(&traj.samples()[nearest_sample_index(traj, t_decile)]);
    (last - at_decile) / last
}

/// Whether the disagreement accumulator has stopped growing (last-decile
/// relative increase below [`PLATEAU_REL_TOL`]).
pub fn disagreement_plateaued(traj: &Trajectory) -> bool {
    plateau_increase(traj, |s| s.disagreement_acc) < PLATEAU_REL_TOL
}

/// Guaranteed cost `J_r* = |mu(0)|^2 + alpha * integral of |mu|^2`,
/// evaluated at the trajectory's horizon as the stand-in for the infinite
/// integral.
///
/// # Errors
///
/// [`AnalysisError::NotPlateaued`] if the disagreement accumulator is still
/// growing at the horizon.
pub fn guaranteed_cost(x0: &[f64], traj: &Trajectory, alpha: f64) -> Result<f64> {
    let increase = plateau_increase(traj, |s| s.disagreement_acc);
    if increase >= PLATEAU_REL_TOL {
        return Err(AnalysisError::NotPlateaued {
            increase,
            tol: PLATEAU_REL_TOL,
        });
    }
    Ok(centered_energy(x0) + alpha * traj.final_state().disagreement_acc)
}

/// Convergence coefficient `rho(t) = -V'/|mu|^2` at every sample, with the
/// mode-appropriate analytic derivative.
///
/// # Errors
///
/// [`AnalysisError::InvalidBoundEstimate`] if `w_hat_m` falls below the
/// final weights; dimension mismatches.
pub fn convergence_coefficient(
    traj: &Trajectory,
    frame: &SpectralFrame,
    cfg: &ProtocolConfig,
    w_hat_m: &[f64],
) -> Result<RhoSeries> {
    validate_bound(&traj.final_state().w, w_hat_m)?;
    let mut values = Vec::with_capacity(traj.samples().len());
    let mut skipped = 0;
    for sample in traj.samples() {
        let mu = disagreement(frame, &sample.x)?;
        let energy = mu.norm_squared();
        if energy <= EPSILON_FLOOR {
            values.push(None);
            skipped += 1;
            continue;
        }
        values.push(Some(-rate_analytic(frame, &mu, cfg) / energy));
    }
    Ok(RhoSeries { values, skipped })
}

/// First sampled time after which the largest pairwise gap stays below
/// `eps` through the horizon.
pub fn convergence_time(traj: &Trajectory, eps: f64) -> ConsensusTime {
    let mut settle: Option<f64> = None;
    for sample in traj.samples() {
        if sample.max_gap() < eps {
            settle.get_or_insert(sample.time);
        } else {
            settle = None;
        }
    }
    match settle {
        Some(t) => ConsensusTime::Reached(t),
        None => ConsensusTime::NotReached,
    }
}

/// Instantaneous decay rate of the disagreement energy,
/// `2 alpha x' L_w x / |mu|^2`, with the live weights in adaptive mode and
/// unit weights in standard mode. `None` below the [`EPSILON_FLOOR`].
pub fn disagreement_decay_rate(
    topology: &Topology,
    state: &SystemState,
    cfg: &ProtocolConfig,
) -> Option<f64> {
    let energy = centered_energy(&state.x);
    if energy <= EPSILON_FLOOR {
        return None;
    }
    let mut quad = 0.0;
    for &(k, j) in topology.edges() {
        let weight = match cfg.mode() {
            Mode::Adaptive => state.w[topology.pair_index(k, j)],
            Mode::Standard => 1.0,
        };
        let diff = state.x[j] - state.x[k];
        quad += weight * diff * diff;
    }
    Some(2.0 * cfg.alpha() * quad / energy)
}

/// Closed-form standard-protocol solution at time `t` from the spectral
/// frame: the mean plus eigenmode amplitudes decayed by `exp(-alpha
/// lambda_k t)`.
///
/// # Errors
///
/// Dimension mismatch between `x0` and the frame.
pub fn standard_solution(
    frame: &SpectralFrame,
    x0: &[f64],
    alpha: f64,
    t: f64,
) -> Result<Vec<f64>> {
    let m = frame.node_count();
    let mu0 = disagreement(frame, x0)?;
    let mean = x0.iter().sum::<f64>() / m as f64;
    let mut x = vec![mean; m];
    let q = frame.q();
    for k in 0..m - 1 {
        let amplitude = mu0.mu()[k] * (-alpha * frame.omega0()[k] * t).exp();
        for row in 0..m {
            x[row] += amplitude * q[[row, k + 1]];
        }
    }
    Ok(x)
}

/// Residual of the integrated Lyapunov balance over an adaptive run:
/// `V(H) - V(0)` minus the analytically accumulated integral of `V'`, the
/// latter read off the final weights and the disagreement accumulator.
///
/// # Errors
///
/// [`AnalysisError::AdaptiveOnly`] for standard-mode trajectories.
pub fn telescoping_residual(traj: &Trajectory, frame: &SpectralFrame) -> Result<f64> {
    if traj.protocol().mode() != Mode::Adaptive {
        return Err(AnalysisError::AdaptiveOnly);
    }
    let topology = traj.topology();
    let w0 = &traj.initial_state().w;
    let w_hat = &traj.final_state().w;
    let v_start = lyapunov(frame, topology, traj.initial_state(), w0, w_hat)?;
    let v_end = lyapunov(frame, topology, traj.final_state(), w0, w_hat)?;

    let mut edge_growth = 0.0;
    for &(k, j) in topology.edges() {
        let idx = topology.pair_index(k, j);
        edge_growth += w_hat[idx] - w0[idx];
    }
    let integral_v_dot =
        -(2.0 * edge_growth + traj.protocol().alpha() * traj.final_state().disagreement_acc);
    Ok((v_end - v_start) - integral_v_dot)
}

/// Runs every theorem check over a finished trajectory and packages the
/// result.
///
/// The weight upper-bound estimate is taken from the final sample (the
/// plateau estimate); `eps` is the consensus threshold for
/// [`convergence_time`]. Failed checks land in the report flags, not in
/// `Err`.
pub fn check_theorems(
    traj: &Trajectory,
    frame: &SpectralFrame,
    eps: f64,
) -> Result<AnalysisReport> {
    let topology = traj.topology();
    let cfg = traj.protocol();
    let lambda2 = frame.lambda2();
    let rho_min_standard = 2.0 * cfg.alpha() * lambda2;
    let rho_min_adaptive = cfg.alpha() * (2.0 * lambda2 + 1.0);

    let w0 = &traj.initial_state().w;
    let w_hat = traj.final_state().w.clone();

    let mut v_series = Vec::with_capacity(traj.samples().len());
    let mut v_dot_series = Vec::with_capacity(traj.samples().len());
    for sample in traj.samples() {
        v_series.push(lyapunov(frame, topology, sample, w0, &w_hat)?);
        let mu = disagreement(frame, &sample.x)?;
        v_dot_series.push(rate_analytic(frame, &mu, cfg));
    }
    let rho = convergence_coefficient(traj, frame, cfg, &w_hat)?;

    let jr_h_final = traj.final_state().cost_acc;
    let x0 = &traj.initial_state().x;
    let jr_star = centered_energy(x0) + cfg.alpha() * traj.final_state().disagreement_acc;
    let jr_star_plateaued = disagreement_plateaued(traj);

    let theorem1_holds =
        cfg.gain_condition_holds() && jr_h_final <= jr_star * (1.0 + COST_REL_TOL) + f64::EPSILON;
    let rho_bound = match cfg.mode() {
        Mode::Adaptive => rho_min_adaptive,
        Mode::Standard => rho_min_standard,
    };
    let theorem2_holds = match rho.min() {
        Some(observed) => observed >= rho_bound - RATE_BOUND_TOL,
        None => false,
    };

    let v_dot_max_rel_err = central_difference_error(traj, &v_series, &v_dot_series);

    Ok(AnalysisReport {
        lambda2,
        rho_min_standard,
        rho_min_adaptive,
        jr_h_final,
        jr_star,
        consensus_time: convergence_time(traj, eps),
        theorem1_holds,
        theorem2_holds,
        gain_condition_holds: cfg.gain_condition_holds(),
        jr_star_plateaued,
        rho_skipped_samples: rho.skipped(),
        v_dot_max_rel_err,
        v_series,
        v_dot_series,
        rho_series: rho.values().to_vec(),
    })
}

/// Largest relative deviation between the central difference of the sampled
/// `V` series and the analytic derivative, over samples whose derivative
/// magnitude is at least `1e-6` of the series maximum. `None` when fewer
/// than three samples or no sample clears the floor.
pub fn central_difference_error(
    traj: &Trajectory,
    v_series: &[f64],
    v_dot_series: &[f64],
) -> Option<f64> {
    let times: Vec<f64> = traj.samples().iter().map(|s| s.time).collect();
    let n = times.len();
    if n < 3 {
        return None;
    }
    let scale = v_dot_series.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut worst: Option<f64> = None;
    for i in 1..n - 1 {
        let analytic = v_dot_series[i];
        if analytic.abs() < 1e-6 * scale {
            continue;
        }
        let cd = (v_series[i + 1] - v_series[i - 1]) / (times[i + 1] - times[i - 1]);
        let rel = (cd - analytic).abs() / analytic.abs();
        worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
    }
    worst
}
