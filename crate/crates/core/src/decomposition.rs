//! Orthogonal decomposition of agent states into consensus and disagreement
//! parts.
//!
//! A [`SpectralFrame`] holds the orthogonal matrix `Q = [1/sqrt(M) | Q~]`
//! that block-diagonalizes the initial Laplacian: `Q' L_w(0) Q =
//! diag(0, Omega(0))` with `Omega(0) = diag(lambda_2, ..., lambda_M)`. The
//! frame is built once from `L_w(0)` and held fixed for a whole run; the
//! disagreement vector is always `mu(t) = Q~' x(t)`, even while the protocol
//! drifts the weights.
//!
//! Consensus means `mu = 0`: the projector onto the disagreement subspace is
//! `Q~ Q~' = I - (1/M) 1 1'`, so `|mu|^2` equals the mean-centered energy of
//! the state, and the consensus/disagreement split reduces to a mean
//! projection.

use ndarray::{s, Array1, Array2, ArrayView2};
use thiserror::Error;

use crate::graph::{symmetric_eigendecomposition, GraphError, WeightedLaplacian, CONNECTIVITY_TOL};

/// Maximum tolerated row-sum magnitude for a matrix accepted as a Laplacian.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DecompositionError {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("matrix is not a Laplacian: row {row} sums to {sum:e}")]
    NotLaplacian { row: usize, sum: f64 },

    #[error(
        "zero eigenvalue is not simple (second eigenvalue {lambda2:e}); graph is disconnected"
    )]
    RepeatedZeroEigenvalue { lambda2: f64 },

    #[error("state has length {got}, frame expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, DecompositionError>;

/// Fixed orthogonal frame `Q = [1/sqrt(M) | Q~]` built from the initial
/// Laplacian, together with the nonzero initial eigenvalues
/// `omega0 = (lambda_2, ..., lambda_M)` in ascending order.
#[derive(Debug, Clone)]
pub struct SpectralFrame {
    q: Array2<f64>,
    omega0: Array1<f64>,
}

impl SpectralFrame {
    /// Number of agents `M`.
    pub fn node_count(&self) -> usize {
        self.q.nrows()
    }

    /// The full orthogonal matrix `Q`; column 0 is exactly `1/sqrt(M)`.
    pub fn q(&self) -> &Array2<f64> {
        &self.q
    }

    /// The disagreement block `Q~`: columns `1..M` of `Q`.
    pub fn q_tilde(&self) -> ArrayView2<'_, f64> {
        self.q.slice(s![.., 1..])
    }

    /// Initial nonzero eigenvalues `lambda_2..lambda_M`, ascending.
    pub fn omega0(&self) -> &Array1<f64> {
        &self.omega0
    }

    /// Algebraic connectivity `lambda_2` of the initial Laplacian.
    pub fn lambda2(&self) -> f64 {
        self.omega0[0]
    }
}

/// Disagreement coordinates of one state: `mu = Q~' x`, plus the conserved
/// consensus coordinate `x1~ = (1' x) / sqrt(M)`.
#[derive(Debug, Clone)]
pub struct DisagreementVector {
    mu: Array1<f64>,
    consensus_scalar: f64,
}

impl DisagreementVector {
    /// The `M - 1` disagreement coordinates.
    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    /// Disagreement energy `|mu|^2`.
    pub fn norm_squared(&self) -> f64 {
        self.mu.iter().map(|v| v * v).sum()
    }

    /// The consensus coordinate `x1~ = (1' x) / sqrt(M)`.
    pub fn consensus_scalar(&self) -> f64 {
        self.consensus_scalar
    }
}

/// Builds the spectral frame from the Laplacian at `t = 0` (unit initial
/// weights).
///
/// The kernel column is constructed as exactly `1/sqrt(M)`; the remaining
/// columns come from the symmetric eigensolver, ascending by eigenvalue.
///
/// # Errors
///
/// [`DecompositionError::NotLaplacian`] if a row sum exceeds
/// [`ROW_SUM_TOL`]; [`DecompositionError::RepeatedZeroEigenvalue`] if the
/// second eigenvalue sits at the zero cluster; eigensolver failures are
/// passed through.
pub fn build_frame(l0: &WeightedLaplacian) -> Result<SpectralFrame> {
    let matrix = l0.as_matrix();
    let m = l0.dim();
    for row in 0..m {
        let sum: f64 = (0..m).map(|col| matrix[[row, col]]).sum();
        if sum.abs() > ROW_SUM_TOL {
            return Err(DecompositionError::NotLaplacian { row, sum });
        }
    }
    let spectrum = symmetric_eigendecomposition(matrix)?;
    let lambda2 = spectrum.eigenvalues()[1];
    if lambda2 <= CONNECTIVITY_TOL {
        return Err(DecompositionError::RepeatedZeroEigenvalue { lambda2 });
    }

    let mut q = Array2::zeros((m, m));
    let inv_sqrt_m = 1.0 / (m as f64).sqrt();
    for row in 0..m {
        q[[row, 0]] = inv_sqrt_m;
    }
    for col in 1..m {
        for row in 0..m {
            q[[row, col]] = spectrum.eigenvectors()[[row, col]];
        }
    }
    let omega0 = Array1::from_iter(spectrum.eigenvalues().iter().skip(1).copied());
    Ok(SpectralFrame { q, omega0 })
}

/// Projects a state onto the disagreement coordinates: `mu = Q~' x`.
///
/// # Errors
///
/// [`DecompositionError::DimensionMismatch`] if `x` does not have length `M`.
pub fn disagreement(frame: &SpectralFrame, x: &[f64]) -> Result<DisagreementVector> {
    let m = frame.node_count();
    if x.len() != m {
        return Err(DecompositionError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let mut mu = Array1::zeros(m - 1);
    for col in 1..m {
        let mut dot = 0.0;
        for (row, value) in x.iter().enumerate() {
            dot += frame.q[[row, col]] * value;
        }
        mu[col - 1] = dot;
    }
    let consensus_scalar = x.iter().sum::<f64>() / (m as f64).sqrt();
    Ok(DisagreementVector {
        mu,
        consensus_scalar,
    })
}

/// Splits a state into its consensus and disagreement components,
/// `x = x_c + x_d` with `x_c = mean(x) * 1`.
///
/// The two parts are orthogonal and reconstruct `x` exactly; the split is
/// computed by mean projection, which is what the frame's projector
/// `Q~ Q~' = I - (1/M) 1 1'` reduces to.
///
/// # Errors
///
/// [`DecompositionError::DimensionMismatch`] if `x` does not have length `M`.
pub fn split_components(frame: &SpectralFrame, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = frame.node_count();
    if x.len() != m {
        return Err(DecompositionError::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    let mean = x.iter().sum::<f64>() / m as f64;
    let consensus: Vec<f64> = vec![mean; m];
    let disagreement_part: Vec<f64> = x.iter().map(|v| v - mean).collect();
    Ok((consensus, disagreement_part))
}

/// Mean-centered energy `x' (I - (1/M) 1 1') x`, the projector route to
/// `|mu|^2`.
pub fn centered_energy(x: &[f64]) -> f64 {
    let m = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    sum_sq - sum * sum / m
}
