//! Subcommand implementations. Each command resolves its experiment,
//! simulates, analyzes, writes CSV/JSON artifacts into the output
//! directory, and prints a one-line summary.

use std::path::Path;

use conlab::analysis::{
    check_theorems, convergence_coefficient, convergence_time, guaranteed_cost, performance_cost,
    AnalysisReport, ConsensusTime, COST_REL_TOL,
};
use conlab::decomposition::{build_frame, SpectralFrame};
use conlab::dynamics::{default_horizon, simulate, Mode, ProtocolConfig, Trajectory};
use conlab::graph::{laplacian, symmetric_eigendecomposition, Topology};
use serde::Serialize;

use crate::config::{load_topology_source, Experiment, DEFAULT_ZETA_RATIO};
use crate::error::{CliError, Result};
use crate::output;

/// Resolved settings echoed into every JSON report; `defaults_used` names
/// the fields that fell back to documented defaults.
#[derive(Debug, Serialize)]
struct ConfigEcho {
    topology: String,
    x0: Vec<f64>,
    alpha: f64,
    zeta: f64,
    mode: String,
    step: f64,
    horizon: f64,
    stride: usize,
    eps: f64,
    defaults_used: Vec<String>,
}

impl ConfigEcho {
    fn new(exp: &Experiment, mode: String, horizon: f64) -> Self {
        ConfigEcho {
            topology: exp.topology_source.clone(),
            x0: exp.x0.clone(),
            alpha: exp.alpha,
            zeta: exp.zeta,
            mode,
            step: exp.step,
            horizon,
            stride: exp.stride,
            eps: exp.eps,
            defaults_used: exp.defaults_used.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn frame_for(topology: &Topology) -> Result<SpectralFrame> {
    let l0 = laplacian(topology, &topology.unit_weights())?;
    Ok(build_frame(&l0)?)
}

fn resolved_horizon(exp: &Experiment, frame: &SpectralFrame, alpha: f64) -> f64 {
    exp.horizon
        .unwrap_or_else(|| default_horizon(frame.lambda2(), &exp.x0, alpha, exp.eps))
}

fn run_once(exp: &Experiment, mode: Mode, horizon: f64) -> Result<Trajectory> {
    let cfg = ProtocolConfig::new(exp.alpha, exp.zeta, mode)?;
    Ok(simulate(
        &exp.topology,
        &exp.x0,
        &cfg,
        horizon,
        exp.step,
        exp.stride,
    )?)
}

fn validate_all(paths: &[&Path]) -> Result<()> {
    for path in paths {
        output::validate_csv(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    #[serde(flatten)]
    analysis: &'a AnalysisReport,
    config: ConfigEcho,
}

pub fn cmd_simulate(exp: &Experiment, all_pairs: bool, validate: bool) -> Result<()> {
    let frame = frame_for(&exp.topology)?;
    let horizon = resolved_horizon(exp, &frame, exp.alpha);
    let traj = run_once(exp, exp.mode, horizon)?;
    let report = check_theorems(&traj, &frame, exp.eps)?;

    output::ensure_dir(&exp.out)?;
    let trajectory_csv = exp.out.join("trajectory.csv");
    let analysis_csv = exp.out.join("analysis.csv");
    let report_json = exp.out.join("report.json");

    output::write_trajectory_csv(&trajectory_csv, &traj, all_pairs)?;
    let times: Vec<f64> = traj.samples().iter().map(|s| s.time).collect();
    output::write_analysis_csv(
        &analysis_csv,
        &times,
        &report.v_series,
        &report.v_dot_series,
        &report.rho_series,
    )?;
    output::write_json(
        &report_json,
        &SimulateReport {
            analysis: &report,
            config: ConfigEcho::new(exp, exp.mode.to_string(), horizon),
        },
    )?;
    if validate {
        validate_all(&[&trajectory_csv, &analysis_csv])?;
    }
    println!(
        "simulate: mode = {}, consensus_time = {}, theorem1 = {}, theorem2 = {} -> {}",
        exp.mode,
        report.consensus_time,
        report.theorem1_holds,
        report.theorem2_holds,
        report_json.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    lambda2: f64,
    rho_min_standard: f64,
    rho_min_adaptive: f64,
    rho_bound_ratio: f64,
    consensus_value: f64,
    adaptive_consensus_time: ConsensusTime,
    standard_consensus_time: ConsensusTime,
    adaptive_rho_min_observed: Option<f64>,
    standard_rho_min_observed: Option<f64>,
    config: ConfigEcho,
}

pub fn cmd_compare(exp: &Experiment, all_pairs: bool, validate: bool) -> Result<()> {
    let frame = frame_for(&exp.topology)?;
    let horizon = resolved_horizon(exp, &frame, exp.alpha);

    let adaptive = run_once(exp, Mode::Adaptive, horizon)?;
    let standard = run_once(exp, Mode::Standard, horizon)?;

    let rho_min_observed = |traj: &Trajectory| -> Result<Option<f64>> {
        let series = convergence_coefficient(traj, &frame, traj.protocol(), &traj.final_state().w)?;
        Ok(series.min())
    };
    let lambda2 = frame.lambda2();
    let report = CompareReport {
        lambda2,
        rho_min_standard: 2.0 * exp.alpha * lambda2,
        rho_min_adaptive: exp.alpha * (2.0 * lambda2 + 1.0),
        rho_bound_ratio: (2.0 * lambda2 + 1.0) / (2.0 * lambda2),
        consensus_value: exp.x0.iter().sum::<f64>() / exp.x0.len() as f64,
        adaptive_consensus_time: convergence_time(&adaptive, exp.eps),
        standard_consensus_time: convergence_time(&standard, exp.eps),
        adaptive_rho_min_observed: rho_min_observed(&adaptive)?,
        standard_rho_min_observed: rho_min_observed(&standard)?,
        config: ConfigEcho::new(exp, "adaptive and standard".to_string(), horizon),
    };

    output::ensure_dir(&exp.out)?;
    let adaptive_csv = exp.out.join("adaptive_trajectory.csv");
    let standard_csv = exp.out.join("standard_trajectory.csv");
    let compare_json = exp.out.join("compare.json");
    output::write_trajectory_csv(&adaptive_csv, &adaptive, all_pairs)?;
    output::write_trajectory_csv(&standard_csv, &standard, all_pairs)?;
    output::write_json(&compare_json, &report)?;
    if validate {
        validate_all(&[&adaptive_csv, &standard_csv])?;
    }
    println!(
        "compare: adaptive consensus_time = {}, standard consensus_time = {} -> {}",
        report.adaptive_consensus_time,
        report.standard_consensus_time,
        compare_json.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    topology: String,
    mode: String,
    zeta_rule: String,
    alphas: Vec<f64>,
    eps: f64,
    step: f64,
    stride: usize,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    defaults_used: Vec<String>,
}

fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_u = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_t = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (u, t) in points {
        sxx += (u - mean_u) * (u - mean_u);
        sxy += (u - mean_u) * (t - mean_t);
    }
    let slope = sxy / sxx;
    let intercept = mean_t - slope * mean_u;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (u, t) in points {
        let fitted = slope * u + intercept;
        ss_res += (t - fitted) * (t - fitted);
        ss_tot += (t - mean_t) * (t - mean_t);
    }
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    (slope, intercept, r_squared)
}

pub fn cmd_sweep(exp: &Experiment, validate: bool) -> Result<()> {
    let mut alphas = exp.alphas.clone().ok_or_else(|| {
        CliError::Validation("sweep requires --alphas or an 'alphas' config entry".to_string())
    })?;
    if alphas.len() < 4 {
        return Err(CliError::Validation(format!(
            "sweep needs at least 4 alpha values for a meaningful fit, got {}",
            alphas.len()
        )));
    }
    for &alpha in &alphas {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(CliError::Validation(format!(
                "alphas must be positive and finite, got {alpha}"
            )));
        }
    }
    alphas.sort_by(f64::total_cmp);
    if alphas.windows(2).any(|pair| pair[0] == pair[1]) {
        return Err(CliError::Validation("alphas must be distinct".to_string()));
    }

    let zeta_for: Box<dyn Fn(f64) -> f64> = if let Some(ratio) = exp.zeta_ratio {
        Box::new(move |alpha| ratio * alpha)
    } else if exp.zeta_explicit {
        let zeta = exp.zeta;
        Box::new(move |_| zeta)
    } else {
        Box::new(|alpha| DEFAULT_ZETA_RATIO * alpha)
    };
    let zeta_rule = if let Some(ratio) = exp.zeta_ratio {
        format!("zeta = {ratio} * alpha")
    } else if exp.zeta_explicit {
        format!("zeta = {}", exp.zeta)
    } else {
        format!("zeta = {DEFAULT_ZETA_RATIO} * alpha")
    };

    let frame = frame_for(&exp.topology)?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in &alphas {
        let cfg = ProtocolConfig::new(alpha, zeta_for(alpha), exp.mode)?;
        let horizon = exp
            .horizon
            .unwrap_or_else(|| default_horizon(frame.lambda2(), &exp.x0, alpha, exp.eps));
        let traj = simulate(&exp.topology, &exp.x0, &cfg, horizon, exp.step, exp.stride)?;
        match convergence_time(&traj, exp.eps) {
            ConsensusTime::Reached(time) => rows.push((alpha, 1.0 / alpha, time)),
            ConsensusTime::NotReached => {
                return Err(CliError::Numerical(format!(
                    "alpha = {alpha}: consensus threshold {} not reached by t = {horizon}; \
                     rerun with a longer --horizon",
                    exp.eps
                )));
            }
        }
    }

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.1, r.2)).collect();
    let (slope, intercept, r_squared) = linear_fit(&points);
    let report = FitReport {
        topology: exp.topology_source.clone(),
        mode: exp.mode.to_string(),
        zeta_rule,
        alphas: alphas.clone(),
        eps: exp.eps,
        step: exp.step,
        stride: exp.stride,
        slope,
        intercept,
        r_squared,
        defaults_used: exp.defaults_used.iter().map(|s| s.to_string()).collect(),
    };

    output::ensure_dir(&exp.out)?;
    let sweep_csv = exp.out.join("sweep.csv");
    let fit_json = exp.out.join("fit.json");
    output::write_sweep_csv(&sweep_csv, &rows)?;
    output::write_json(&fit_json, &report)?;
    if validate {
        validate_all(&[&sweep_csv])?;
    }
    println!(
        "sweep: {} gains, slope = {slope:.4}, r_squared = {r_squared:.6} -> {}",
        alphas.len(),
        fit_json.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CostReport {
    cost_horizon: f64,
    jr_h: f64,
    jr_star: f64,
    margin: f64,
    margin_positive: bool,
    config: ConfigEcho,
}

pub fn cmd_cost(exp: &Experiment, validate: bool) -> Result<()> {
    let frame = frame_for(&exp.topology)?;
    let cost_horizon = exp.cost_horizon;
    let horizon = match exp.horizon {
        Some(horizon) if horizon < cost_horizon => {
            return Err(CliError::Validation(format!(
                "cost-horizon {cost_horizon} exceeds --horizon {horizon}"
            )));
        }
        Some(horizon) => horizon,
        None => resolved_horizon(exp, &frame, exp.alpha).max(cost_horizon),
    };
    let traj = run_once(exp, exp.mode, horizon)?;

    let jr_star = guaranteed_cost(&exp.x0, &traj, exp.alpha)?;
    let jr_h = performance_cost(&traj, cost_horizon)?;
    let margin = jr_star - jr_h;
    if jr_h > jr_star * (1.0 + COST_REL_TOL) + f64::EPSILON {
        return Err(CliError::Numerical(format!(
            "running cost {jr_h} is not below the guaranteed bound {jr_star}"
        )));
    }

    let rows: Vec<(f64, f64)> = traj
        .samples()
        .iter()
        .take_while(|s| s.time <= cost_horizon * (1.0 + 1e-12) + 1e-12)
        .map(|s| (s.time, s.cost_acc))
        .collect();

    output::ensure_dir(&exp.out)?;
    let cost_csv = exp.out.join("cost.csv");
    let cost_json = exp.out.join("cost.json");
    output::write_cost_csv(&cost_csv, &rows)?;
    output::write_json(
        &cost_json,
        &CostReport {
            cost_horizon,
            jr_h,
            jr_star,
            margin,
            margin_positive: margin > 0.0,
            config: ConfigEcho::new(exp, exp.mode.to_string(), horizon),
        },
    )?;
    if validate {
        validate_all(&[&cost_csv])?;
    }
    println!(
        "cost: jr_h({cost_horizon}) = {jr_h:.6} vs jr_star = {jr_star:.6} (margin {margin:.6}) -> {}",
        cost_json.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TopologyInfo {
    source: String,
    node_count: usize,
    edge_count: usize,
    pair_count: usize,
    edges: Vec<[usize; 2]>,
    lambda2: f64,
    eigenvalues: Vec<f64>,
}

pub fn cmd_topology_info(source: &str) -> Result<()> {
    let topology = load_topology_source(source)?;
    let l0 = laplacian(&topology, &topology.unit_weights())?;
    let frame = build_frame(&l0)?;
    let spectrum = symmetric_eigendecomposition(l0.as_matrix())?;

    let info = TopologyInfo {
        source: source.to_string(),
        node_count: topology.node_count(),
        edge_count: topology.edge_count(),
        pair_count: topology.pair_count(),
        edges: topology
            .edges()
            .iter()
            .map(|&(k, j)| [k + 1, j + 1])
            .collect(),
        lambda2: frame.lambda2(),
        eigenvalues: spectrum.eigenvalues().to_vec(),
    };
    let text = serde_json::to_string_pretty(&info)
        .map_err(|err| CliError::Numerical(format!("cannot serialize topology info: {err}")))?;
    println!("{text}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn linear_fit_recovers_exact_lines() {
        let points: Vec<(f64, f64)> = [0.125, 0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&u| (u, 4.5 * u + 0.25))
            .collect();
        let (slope, intercept, r_squared) = linear_fit(&points);
        assert_abs_diff_eq!(slope, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(intercept, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_fit_detects_scatter() {
        let points = vec![(1.0, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, 5.0)];
        let (_, _, r_squared) = linear_fit(&points);
        assert!(r_squared < 1.0);
        assert!(r_squared > 0.0);
    }
}
