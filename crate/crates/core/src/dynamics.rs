//! Protocol vector fields and the fixed-step integrator.
//!
//! Two protocols share one state layout. The adaptive protocol couples the
//! agent states to growing edge weights:
//!
//! ```text
//! x_k' = alpha * sum over neighbors j of w_kj (x_j - x_k)
//! w_kj' = alpha * (x_j - x_k)^2
//! ```
//!
//! while the standard protocol keeps every weight at its initial value 1.
//! Weights evolve for every unordered pair, not only edges: non-edge weights
//! never enter the control law, but the analysis module's Lyapunov
//! bookkeeping sums over all pairs, so the simulator carries them.
//!
//! Two integral accumulators ride along as augmented ODE states and are
//! deliberately computed through different formulas: `cost_acc` integrates
//! the per-pair cost integrand `(zeta/M) * sum over ordered pairs of
//! (x_j - x_k)^2`, and `disagreement_acc` integrates the mean-centered
//! energy `x' (I - (1/M) 1 1') x`. The two routes agree analytically
//! (`cost_acc = 2 zeta * disagreement_acc`), which the test suite uses as an
//! integrator cross-check.
//!
//! Integration is classical fixed-step RK4 over the full augmented vector,
//! so the accumulators carry the same fourth-order accuracy as the states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomposition::centered_energy;
use crate::graph::Topology;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("zeta must be positive and finite, got {0}")]
    InvalidZeta(f64),

    #[error("state has length {got}, topology has {expected} nodes")]
    StateLength { expected: usize, got: usize },

    #[error("weight vector has length {got}, expected {expected} (all unordered pairs)")]
    WeightLength { expected: usize, got: usize },

    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),

    #[error("output stride must be at least 1")]
    InvalidStride,

    #[error("integration diverged: non-finite state component at t = {time}")]
    NonFinite { time: f64 },
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Which control law drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Time-varying weights per the adaptive law.
    Adaptive,
    /// Weights frozen at their initial value 1.
    Standard,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Adaptive => write!(f, "adaptive"),
            Mode::Standard => write!(f, "standard"),
        }
    }
}

/// Validated protocol parameters: control gain `alpha`, performance
/// coefficient `zeta`, and the protocol [`Mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    alpha: f64,
    zeta: f64,
    mode: Mode,
}

impl ProtocolConfig {
    /// Builds a config, requiring positive finite `alpha` and `zeta`.
    ///
    /// The gain condition `alpha >= 2 zeta` is recorded, not enforced, so
    /// its sharpness can be probed; see [`ProtocolConfig::gain_condition_holds`].
    ///
    /// # Errors
    ///
    /// [`DynamicsError::InvalidAlpha`] or [`DynamicsError::InvalidZeta`].
    pub fn new(alpha: f64, zeta: f64, mode: Mode) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(DynamicsError::InvalidAlpha(alpha));
        }
        if !zeta.is_finite() || zeta <= 0.0 {
            return Err(DynamicsError::InvalidZeta(zeta));
        }
        Ok(ProtocolConfig { alpha, zeta, mode })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Whether the guaranteed-cost gain condition `alpha >= 2 zeta` holds.
    pub fn gain_condition_holds(&self) -> bool {
        self.alpha >= 2.0 * self.zeta
    }
}

/// Full augmented state at one time instant.
///
/// `w` covers every unordered pair in the canonical order of
/// [`Topology::pairs`]; `cost_acc` and `disagreement_acc` are the running
/// integrals described in the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub time: f64,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub cost_acc: f64,
    pub disagreement_acc: f64,
}

impl SystemState {
    /// Initial state at `t = 0`: unit weights, zero accumulators.
    pub fn initial(topology: &Topology, x0: &[f64]) -> Result<Self> {
        if x0.len() != topology.node_count() {
            return Err(DynamicsError::StateLength {
                expected: topology.node_count(),
                got: x0.len(),
            });
        }
        Ok(SystemState {
            time: 0.0,
            x: x0.to_vec(),
            w: topology.unit_weights(),
            cost_acc: 0.0,
            disagreement_acc: 0.0,
        })
    }

    /// Largest pairwise state gap `max |x_k - x_j|`.
    pub fn max_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        for k in 0..self.x.len() {
            for j in (k + 1)..self.x.len() {
                gap = gap.max((self.x[k] - self.x[j]).abs());
            }
        }
        gap
    }

    /// Mean of the agent states; conserved by both protocols.
    pub fn mean(&self) -> f64 {
        self.x.iter().sum::<f64>() / self.x.len() as f64
    }
}

/// Time-ordered samples of one run plus the settings that produced them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<SystemState>,
    topology: Topology,
    protocol: ProtocolConfig,
    step: f64,
    stride: usize,
}

impl Trajectory {
    /// Sampled states, strictly increasing in time; the first sample is the
    /// initial state, the last is the final state.
    pub fn samples(&self) -> &[SystemState] {
        &self.samples
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn protocol(&self) -> &ProtocolConfig {
        &self.protocol
    }

    /// Internal integrator step `h`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Output stride in internal steps.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Spacing between consecutive samples, `stride * h`.
    pub fn sample_spacing(&self) -> f64 {
        self.stride as f64 * self.step
    }

    pub fn initial_state(&self) -> &SystemState {
        &self.samples[0]
    }

    pub fn final_state(&self) -> &SystemState {
        self.samples
            .last()
            .expect("trajectory holds at least the initial sample")
    }
}

/// Control input of the configured protocol: `u = -alpha L_w x` with the
/// current weights in adaptive mode and the initial (unit) weights in
/// standard mode.
///
/// # Errors
///
/// [`DynamicsError::StateLength`] / [`DynamicsError::WeightLength`] on
/// dimension mismatch.
pub fn control_input(
    topology: &Topology,
    x: &[f64],
    w: &[f64],
    cfg: &ProtocolConfig,
) -> Result<Vec<f64>> {
    if x.len() != topology.node_count() {
        return Err(DynamicsError::StateLength {
            expected: topology.node_count(),
            got: x.len(),
        });
    }
    if w.len() != topology.pair_count() {
        return Err(DynamicsError::WeightLength {
            expected: topology.pair_count(),
            got: w.len(),
        });
    }
    let mut u = vec![0.0; x.len()];
    for &(k, j) in topology.edges() {
        let weight = match cfg.mode() {
            Mode::Adaptive => w[topology.pair_index(k, j)],
            Mode::Standard => 1.0,
        };
        let force = cfg.alpha() * weight * (x[j] - x[k]);
        u[k] += force;
        u[j] -= force;
    }
    Ok(u)
}

/// Weight growth rates for every unordered pair: `alpha (x_j - x_k)^2` in
/// adaptive mode, identically zero in standard mode.
///
/// # Panics
///
/// Panics if `x` does not match the topology's node count.
pub fn weight_rate(topology: &Topology, x: &[f64], cfg: &ProtocolConfig) -> Vec<f64> {
    assert_eq!(
        x.len(),
        topology.node_count(),
        "state length must match topology"
    );
    let mut rates = vec![0.0; topology.pair_count()];
    if cfg.mode() == Mode::Standard {
        return rates;
    }
    for (idx, (k, j)) in topology.pairs().enumerate() {
        let diff = x[j] - x[k];
        rates[idx] = cfg.alpha() * diff * diff;
    }
    rates
}

/// Layout of the flat integration vector: `[x | w | cost_acc | dis_acc]`.
fn pack(state: &SystemState) -> Vec<f64> {
    let mut y = Vec::with_capacity(state.x.len() + state.w.len() + 2);
    y.extend_from_slice(&state.x);
    y.extend_from_slice(&state.w);
    y.push(state.cost_acc);
    y.push(state.disagreement_acc);
    y
}

fn unpack(topology: &Topology, time: f64, y: &[f64]) -> SystemState {
    let m = topology.node_count();
    let p = topology.pair_count();
    SystemState {
        time,
        x: y[..m].to_vec(),
        w: y[m..m + p].to_vec(),
        cost_acc: y[m + p],
        disagreement_acc: y[m + p + 1],
    }
}

fn derivative(topology: &Topology, cfg: &ProtocolConfig, y: &[f64], out: &mut [f64]) {
    let m = topology.node_count();
    let p = topology.pair_count();
    let x = &y[..m];
    let w = &y[m..m + p];
    out.fill(0.0);

    let adaptive = cfg.mode() == Mode::Adaptive;
    let mut gap_sq_all_pairs = 0.0;
    for (idx, (k, j)) in topology.pairs().enumerate() {
        let diff = x[j] - x[k];
        if topology.edge_flags()[idx] {
            let weight = if adaptive { w[idx] } else { 1.0 };
            let force = cfg.alpha() * weight * diff;
            out[k] += force;
            out[j] -= force;
        }
        if adaptive {
            out[m + idx] = cfg.alpha() * diff * diff;
        }
        gap_sq_all_pairs += diff * diff;
    }
    out[m + p] = 2.0 * cfg.zeta() / m as f64 * gap_sq_all_pairs;
    out[m + p + 1] = centered_energy(x);
}

/// One classical RK4 step of the full augmented system.
///
/// # Errors
///
/// [`DynamicsError::NonFinite`] if the advanced state contains a non-finite
/// component (divergence guard; nothing is clamped), plus the validation
/// errors of [`control_input`].
pub fn rk4_step(
    state: &SystemState,
    h: f64,
    topology: &Topology,
    cfg: &ProtocolConfig,
) -> Result<SystemState> {
    if !h.is_finite() || h <= 0.0 {
        return Err(DynamicsError::InvalidStep(h));
    }
    if state.x.len() != topology.node_count() {
        return Err(DynamicsError::StateLength {
            expected: topology.node_count(),
            got: state.x.len(),
        });
    }
    if state.w.len() != topology.pair_count() {
        return Err(DynamicsError::WeightLength {
            expected: topology.pair_count(),
            got: state.w.len(),
        });
    }

    let y = pack(state);
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    derivative(topology, cfg, &y, &mut k1);
    for i in 0..n {
        stage[i] = y[i] + 0.5 * h * k1[i];
    }
    derivative(topology, cfg, &stage, &mut k2);
    for i in 0..n {
        stage[i] = y[i] + 0.5 * h * k2[i];
    }
    derivative(topology, cfg, &stage, &mut k3);
    for i in 0..n {
        stage[i] = y[i] + h * k3[i];
    }
    derivative(topology, cfg, &stage, &mut k4);

    let mut advanced = vec![0.0; n];
    for i in 0..n {
        advanced[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let time = state.time + h;
    if advanced.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFinite { time });
    }
    Ok(unpack(topology, time, &advanced))
}

/// Integrates the configured protocol from `x0` over `horizon` seconds with
/// fixed step `h`, sampling every `stride` internal steps plus the final
/// state.
///
/// Initial weights are 1 for every pair and both accumulators start at 0.
/// The run is deterministic: identical arguments produce identical samples.
///
/// # Errors
///
/// Validation errors for non-positive `h`/`horizon`, zero `stride`, or a
/// state/topology size mismatch; [`DynamicsError::NonFinite`] if the
/// integration diverges.
pub fn simulate(
    topology: &Topology,
    x0: &[f64],
    cfg: &ProtocolConfig,
    horizon: f64,
    h: f64,
    stride: usize,
) -> Result<Trajectory> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(DynamicsError::InvalidHorizon(horizon));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(DynamicsError::InvalidStep(h));
    }
    if stride == 0 {
        return Err(DynamicsError::InvalidStride);
    }

    let steps = ((horizon / h) - 1e-9).ceil().max(1.0) as usize;
    let mut state = SystemState::initial(topology, x0)?;
    let mut samples = Vec::with_capacity(steps / stride + 2);
    samples.push(state.clone());
    for i in 1..=steps {
        state = rk4_step(&state, h, topology, cfg)?;
        state.time = i as f64 * h;
        if i % stride == 0 || i == steps {
            samples.push(state.clone());
        }
    }
    Ok(Trajectory {
        samples,
        topology: topology.clone(),
        protocol: *cfg,
        step: h,
        stride,
    })
}

/// Default run horizon for a topology with algebraic connectivity `lambda2`:
/// ten disagreement time-constants of the adaptive rate bound, extended when
/// needed so a consensus threshold of `eps` on the pairwise gap is reachable
/// by the slower standard protocol.
pub fn default_horizon(lambda2: f64, x0: &[f64], alpha: f64, eps: f64) -> f64 {
    let m = x0.len() as f64;
    let rate_constants = 10.0 / (alpha * (2.0 * lambda2 + 1.0));
    let mu0 = centered_energy(x0).max(0.0).sqrt();
    let target = (2.0 * m).sqrt() * mu0 / eps;
    let reach = if target > 1.0 {
        1.25 * target.ln() / (alpha * lambda2)
    } else {
        0.0
    };
    rate_constants.max(reach)
}
