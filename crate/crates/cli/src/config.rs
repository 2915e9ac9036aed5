//! Experiment configuration: a JSON file merged with command-line flags,
//! flags winning, and documented defaults filling whatever remains. Every
//! field that fell back to a default is recorded so reports can label it.

use std::path::{Path, PathBuf};

use conlab::dynamics::Mode;
use conlab::graph::{load_topology, parse_edge_list, Topology};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_TOPOLOGY: &str = "paper6";
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_ZETA: f64 = 1.0;
pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_COST_HORIZON: f64 = 3.0;
pub const DEFAULT_ZETA_RATIO: f64 = 0.5;

/// Default initial state; topologies with more than six nodes cycle through
/// it, smaller ones truncate it.
const X0_TEMPLATE: [f64; 6] = [1.0, 6.0, 8.0, 13.0, 15.0, 19.0];

pub const BUILTIN_NAMES: [&str; 6] = ["p2", "path6", "cycle6", "star6", "complete6", "paper6"];

/// Optional settings as read from a JSON config file. Unknown keys are
/// rejected so typos surface as validation errors instead of silently
/// falling back to defaults.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub topology: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub mode: Option<Mode>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub stride: Option<usize>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub alphas: Option<Vec<f64>>,
    pub zeta_ratio: Option<f64>,
    pub cost_horizon: Option<f64>,
}

/// Settings given as command-line flags; each one overrides the config
/// file's value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub topology: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub zeta: Option<f64>,
    pub mode: Option<Mode>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub stride: Option<usize>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub alphas: Option<Vec<f64>>,
    pub zeta_ratio: Option<f64>,
    pub cost_horizon: Option<f64>,
}

/// Fully resolved experiment settings.
///
/// `horizon` stays `None` when defaulted: the heuristic needs the algebraic
/// connectivity, so commands derive it after building the spectral frame.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub topology_source: String,
    pub topology: Topology,
    pub x0: Vec<f64>,
    pub alpha: f64,
    pub zeta: f64,
    pub zeta_explicit: bool,
    pub mode: Mode,
    pub step: f64,
    pub horizon: Option<f64>,
    pub stride: usize,
    pub eps: f64,
    pub out: PathBuf,
    pub alphas: Option<Vec<f64>>,
    pub zeta_ratio: Option<f64>,
    pub cost_horizon: f64,
    pub defaults_used: Vec<&'static str>,
}

pub fn read_config_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|err| {
        CliError::Validation(format!("cannot read config file {}: {err}", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|err| {
        CliError::Validation(format!("invalid config file {}: {err}", path.display()))
    })
}

/// Parses a comma-separated list of reals, naming the offending flag on
/// failure.
pub fn parse_number_list(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|token| {
            let token = token.trim();
            token.parse::<f64>().map_err(|_| {
                CliError::Validation(format!("{field}: cannot parse '{token}' as a number"))
            })
        })
        .collect()
}

pub fn parse_mode(text: &str) -> Result<Mode> {
    match text {
        "adaptive" => Ok(Mode::Adaptive),
        "standard" => Ok(Mode::Standard),
        other => Err(CliError::Validation(format!(
            "mode must be 'adaptive' or 'standard', got '{other}'"
        ))),
    }
}

pub fn builtin_topology(name: &str) -> Option<Topology> {
    let edges: Vec<(usize, usize)> = match name {
        "p2" => vec![(1, 2)],
        "path6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)],
        "cycle6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)],
        "star6" => vec![(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)],
        "complete6" => {
            let mut edges = Vec::new();
            for k in 1..=6usize {
                for j in (k + 1)..=6 {
                    edges.push((k, j));
                }
            }
            edges
        }
        "paper6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1), (2, 5)],
        _ => return None,
    };
    let m = if name == "p2" { 2 } else { 6 };
    Some(load_topology(m, &edges).expect("builtin topologies are valid"))
}

/// Resolves a `--topology` value: builtin name first, then edge-list file.
pub fn load_topology_source(source: &str) -> Result<Topology> {
    if let Some(topology) = builtin_topology(source) {
        return Ok(topology);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "topology '{source}' is not a builtin ({}) and not a readable file",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|err| {
        CliError::Validation(format!("cannot read topology file {source}: {err}"))
    })?;
    Ok(parse_edge_list(&text)?)
}

pub fn default_x0(m: usize) -> Vec<f64> {
    (0..m).map(|i| X0_TEMPLATE[i % X0_TEMPLATE.len()]).collect()
}

fn require_positive(field: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CliError::Validation(format!(
            "{field} must be positive and finite, got {value}"
        )));
    }
    Ok(value)
}

/// Merges flags over the config file over the defaults and validates the
/// result.
pub fn resolve(file: FileConfig, flags: Overrides) -> Result<Experiment> {
    let mut defaults_used = Vec::new();

    let topology_source = flags.topology.or(file.topology).unwrap_or_else(|| {
        defaults_used.push("topology");
        DEFAULT_TOPOLOGY.to_string()
    });
    let topology = load_topology_source(&topology_source)?;

    let x0 = match flags.x0.or(file.x0) {
        Some(x0) => x0,
        None => {
            defaults_used.push("x0");
            default_x0(topology.node_count())
        }
    };
    if x0.len() != topology.node_count() {
        return Err(CliError::Validation(format!(
            "x0 has {} entries, topology has {} nodes",
            x0.len(),
            topology.node_count()
        )));
    }
    if let Some(bad) = x0.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Validation(format!(
            "x0 contains a non-finite entry {bad}"
        )));
    }

    let alpha = match flags.alpha.or(file.alpha) {
        Some(alpha) => require_positive("alpha", alpha)?,
        None => {
            defaults_used.push("alpha");
            DEFAULT_ALPHA
        }
    };
    let explicit_zeta = flags.zeta.or(file.zeta);
    let zeta_explicit = explicit_zeta.is_some();
    let zeta = match explicit_zeta {
        Some(zeta) => require_positive("zeta", zeta)?,
        None => {
            defaults_used.push("zeta");
            DEFAULT_ZETA
        }
    };
    let mode = flags.mode.or(file.mode).unwrap_or_else(|| {
        defaults_used.push("mode");
        Mode::Adaptive
    });
    let step = match flags.step.or(file.step) {
        Some(step) => require_positive("step", step)?,
        None => {
            defaults_used.push("step");
            DEFAULT_STEP
        }
    };
    let horizon = match flags.horizon.or(file.horizon) {
        Some(horizon) => Some(require_positive("horizon", horizon)?),
        None => {
            defaults_used.push("horizon");
            None
        }
    };
    let stride = match flags.stride.or(file.stride) {
        Some(0) => {
            return Err(CliError::Validation(
                "stride must be at least 1".to_string(),
            ))
        }
        Some(stride) => stride,
        None => {
            defaults_used.push("stride");
            DEFAULT_STRIDE
        }
    };
    let eps = match flags.eps.or(file.eps) {
        Some(eps) => require_positive("eps", eps)?,
        None => {
            defaults_used.push("eps");
            DEFAULT_EPS
        }
    };
    let out = flags.out.or(file.out).unwrap_or_else(|| {
        defaults_used.push("out");
        PathBuf::from(DEFAULT_OUT)
    });
    let cost_horizon = match flags.cost_horizon.or(file.cost_horizon) {
        Some(h) => require_positive("cost-horizon", h)?,
        None => DEFAULT_COST_HORIZON,
    };
    let zeta_ratio = match flags.zeta_ratio.or(file.zeta_ratio) {
        Some(ratio) => Some(require_positive("zeta-ratio", ratio)?),
        None => None,
    };
    let alphas = flags.alphas.or(file.alphas);

    Ok(Experiment {
        topology_source,
        topology,
        x0,
        alpha,
        zeta,
        zeta_explicit,
        mode,
        step,
        horizon,
        stride,
        eps,
        out,
        alphas,
        zeta_ratio,
        cost_horizon,
        defaults_used,
    })
}
