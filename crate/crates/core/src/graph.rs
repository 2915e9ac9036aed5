//! Undirected graphs, weighted Laplacians, and a dense symmetric eigensolver.
//!
//! A [`Topology`] is a connected undirected graph on nodes `1..=M` (stored
//! zero-based internally). Per-pair weight vectors are indexed over all
//! unordered pairs `(k, j)` with `k < j` in lexicographic order, so one
//! layout serves the unit-weight Laplacian, the time-varying weighted
//! Laplacian, and the analysis bookkeeping that also tracks non-edge pairs.
//!
//! The eigensolver is a cyclic Jacobi iteration for real symmetric matrices.
//! It produces an orthogonal eigenvector matrix by construction, which is
//! what the downstream spectral decomposition relies on. Eigenvalues are
//! returned ascending; eigenvector columns are sign-fixed so the entry of
//! largest magnitude is positive.

use ndarray::{Array1, Array2};
use thiserror::Error;

/// Maximum tolerated asymmetry `|a[k,j] - a[j,k]|` for eigensolver input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Jacobi convergence threshold on the largest off-diagonal magnitude.
pub const JACOBI_OFF_TOL: f64 = 1e-13;

/// Sweep cap before the Jacobi iteration reports failure.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Smallest second eigenvalue accepted as "connected" by
/// [`algebraic_connectivity`].
pub const CONNECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node count must be at least 2, got {0}")]
    NodeCount(usize),

    #[error("edge ({k}, {j}) is out of range for {m} nodes (indices are 1-based)")]
    EdgeOutOfRange { k: usize, j: usize, m: usize },

    #[error("self-loop at node {0} is not allowed")]
    SelfLoop(usize),

    #[error("graph is disconnected: node {0} is unreachable from node 1")]
    Disconnected(usize),

    #[error("weight for pair ({k}, {j}) is negative: {value}")]
    NegativeWeight { k: usize, j: usize, value: f64 },

    #[error("weight for pair ({k}, {j}) is not finite")]
    NonFiniteWeight { k: usize, j: usize },

    #[error("expected {expected} per-pair weights, got {got}")]
    WeightCount { expected: usize, got: usize },

    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("matrix is not symmetric: |a[{k},{j}] - a[{j},{k}]| = {delta:e}")]
    NotSymmetric { k: usize, j: usize, delta: f64 },

    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),

    #[error("edge-list line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Connected undirected graph: node count plus a normalized unordered edge set.
///
/// Construction goes through [`load_topology`] (or [`parse_edge_list`]),
/// which validates indices, rejects self-loops, deduplicates, and requires
/// connectivity. Instances are immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    edge_flags: Vec<bool>,
}

impl Topology {
    /// Number of nodes `M`.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Normalized edge list: zero-based `(k, j)` with `k < j`, sorted, unique.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of unordered node pairs `M(M-1)/2`; the length of every
    /// per-pair weight vector.
    pub fn pair_count(&self) -> usize {
        self.node_count * (self.node_count - 1) / 2
    }

    /// Canonical index of the unordered pair `{k, j}` (zero-based nodes)
    /// into per-pair vectors.
    ///
    /// # Panics
    ///
    /// Panics if `k == j` or either index is out of range.
    pub fn pair_index(&self, k: usize, j: usize) -> usize {
        pair_index(self.node_count, k, j)
    }

    /// Iterator over all unordered pairs `(k, j)`, `k < j`, in the canonical
    /// per-pair order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let m = self.node_count;
        (0..m).flat_map(move |k| (k + 1..m).map(move |j| (k, j)))
    }

    /// Whether `{k, j}` (zero-based) is an edge.
    pub fn has_edge(&self, k: usize, j: usize) -> bool {
        self.edge_flags[self.pair_index(k, j)]
    }

    /// Edge membership flags aligned with the canonical per-pair order.
    pub fn edge_flags(&self) -> &[bool] {
        &self.edge_flags
    }

    /// Unit per-pair weight vector; the protocol's initial condition.
    pub fn unit_weights(&self) -> Vec<f64> {
        vec![1.0; self.pair_count()]
    }
}

/// Canonical index of the unordered pair `{k, j}` among all pairs of `m`
/// nodes listed lexicographically with `k < j`.
///
/// # Panics
///
/// Panics if `k == j` or either index is `>= m`.
pub fn pair_index(m: usize, k: usize, j: usize) -> usize {
    assert!(k != j, "pair index requires two distinct nodes");
    assert!(k < m && j < m, "node index out of range");
    let (k, j) = if k < j { (k, j) } else { (j, k) };
    k * (2 * m - k - 1) / 2 + (j - k - 1)
}

/// Builds a validated [`Topology`] from a 1-based edge list.
///
/// Edges are normalized to `(min, max)` and deduplicated. The graph must be
/// connected; validation failures carry the offending edge or node.
///
/// # Errors
///
/// [`GraphError::NodeCount`] for `node_count < 2`,
/// [`GraphError::EdgeOutOfRange`] or [`GraphError::SelfLoop`] for bad edges,
/// [`GraphError::Disconnected`] naming an unreachable node.
pub fn load_topology(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Topology> {
    if node_count < 2 {
        return Err(GraphError::NodeCount(node_count));
    }
    let mut edges = Vec::with_capacity(edge_list.len());
    for &(k, j) in edge_list {
        if k == j {
            return Err(GraphError::SelfLoop(k));
        }
        if k == 0 || j == 0 || k > node_count || j > node_count {
            return Err(GraphError::EdgeOutOfRange {
                k,
                j,
                m: node_count,
            });
        }
        let (a, b) = (k.min(j) - 1, k.max(j) - 1);
        edges.push((a, b));
    }
    edges.sort_unstable();
    edges.dedup();

    let mut edge_flags = vec![false; node_count * (node_count - 1) / 2];
    for &(k, j) in &edges {
        edge_flags[pair_index(node_count, k, j)] = true;
    }
    let topology = Topology {
        node_count,
        edges,
        edge_flags,
    };
    if let Some(unreached) = first_unreachable(&topology) {
        return Err(GraphError::Disconnected(unreached + 1));
    }
    Ok(topology)
}

/// Parses the edge-list text format: first data line holds `M`, every
/// following data line holds one edge `k j` (1-based). Blank lines and lines
/// starting with `#` are ignored.
///
/// # Errors
///
/// [`GraphError::Parse`] with the 1-based line number for malformed input,
/// plus everything [`load_topology`] rejects.
pub fn parse_edge_list(text: &str) -> Result<Topology> {
    let mut node_count: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match node_count {
            None => {
                if fields.len() != 1 {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        message: format!("expected node count, got {:?}", line),
                    });
                }
                let m = fields[0].parse::<usize>().map_err(|e| GraphError::Parse {
                    line: idx + 1,
                    message: format!("invalid node count {:?}: {e}", fields[0]),
                })?;
                node_count = Some(m);
            }
            Some(_) => {
                if fields.len() != 2 {
                    return Err(GraphError::Parse {
                        line: idx + 1,
                        message: format!("expected edge `k j`, got {:?}", line),
                    });
                }
                let parse = |s: &str| {
                    s.parse::<usize>().map_err(|e| GraphError::Parse {
                        line: idx + 1,
                        message: format!("invalid node index {s:?}: {e}"),
                    })
                };
                edges.push((parse(fields[0])?, parse(fields[1])?));
            }
        }
    }
    let m = node_count.ok_or(GraphError::Parse {
        line: 0,
        message: "empty edge-list input".to_string(),
    })?;
    load_topology(m, &edges)
}

/// Whether a traversal from node 1 reaches every node.
pub fn is_connected(topology: &Topology) -> bool {
    first_unreachable(topology).is_none()
}

fn first_unreachable(topology: &Topology) -> Option<usize> {
    let m = topology.node_count;
    let mut adjacency = vec![Vec::new(); m];
    for &(k, j) in &topology.edges {
        adjacency[k].push(j);
        adjacency[j].push(k);
    }
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &next in &adjacency[node] {
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen.iter().position(|&visited| !visited)
}

/// Symmetric weighted Laplacian of a topology.
///
/// Row sums are zero and off-diagonal entries are non-positive by
/// construction; for a connected topology with positive weights the matrix
/// is positive semi-definite with a single zero eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLaplacian {
    matrix: Array2<f64>,
}

impl WeightedLaplacian {
    /// The assembled `M x M` matrix.
    pub fn as_matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Matrix dimension `M`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Quadratic form `x' L x`.
    ///
    /// # Panics
    ///
    /// Panics if `x` does not have length `M`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.dim(),
            "state length must match Laplacian dimension"
        );
        let mut total = 0.0;
        for k in 0..self.dim() {
            let mut row = 0.0;
            for (j, value) in x.iter().enumerate() {
                row += self.matrix[[k, j]] * value;
            }
            total += x[k] * row;
        }
        total
    }
}

/// Assembles the weighted Laplacian `L_w` from per-pair weights.
///
/// The effective weight of pair `{k, j}` is `weights[pair_index(k, j)]` when
/// the pair is an edge and zero otherwise, so the same pair vector drives
/// both the dynamics and the Laplacian.
///
/// # Errors
///
/// [`GraphError::WeightCount`] if `weights` is not a full per-pair vector,
/// [`GraphError::NegativeWeight`] for any negative entry.
pub fn laplacian(topology: &Topology, weights: &[f64]) -> Result<WeightedLaplacian> {
    if weights.len() != topology.pair_count() {
        return Err(GraphError::WeightCount {
            expected: topology.pair_count(),
            got: weights.len(),
        });
    }
    for (idx, (k, j)) in topology.pairs().enumerate() {
        if !weights[idx].is_finite() {
            return Err(GraphError::NonFiniteWeight { k: k + 1, j: j + 1 });
        }
        if weights[idx] < 0.0 {
            return Err(GraphError::NegativeWeight {
                k: k + 1,
                j: j + 1,
                value: weights[idx],
            });
        }
    }
    let m = topology.node_count();
    let mut matrix = Array2::zeros((m, m));
    for &(k, j) in topology.edges() {
        let w = weights[topology.pair_index(k, j)];
        matrix[[k, k]] += w;
        matrix[[j, j]] += w;
        matrix[[k, j]] -= w;
        matrix[[j, k]] -= w;
    }
    Ok(WeightedLaplacian { matrix })
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues ascend; `eigenvectors` column `i` pairs with eigenvalue `i`
/// and the columns form an orthogonal matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl Spectrum {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    /// Orthogonal matrix of eigenvector columns, ordered like the eigenvalues.
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }
}

/// Cyclic Jacobi eigendecomposition for real symmetric matrices.
///
/// Runs full sweeps of plane rotations until the largest off-diagonal
/// magnitude falls below [`JACOBI_OFF_TOL`], then sorts eigenvalues
/// ascending (stable for ties) and fixes each eigenvector's sign so its
/// largest-magnitude entry is positive.
///
/// # Errors
///
/// [`GraphError::NotSquare`] and [`GraphError::NotSymmetric`] for invalid
/// input; [`GraphError::NoConvergence`] if [`JACOBI_MAX_SWEEPS`] sweeps do
/// not reach the threshold.
pub fn symmetric_eigendecomposition(a: &Array2<f64>) -> Result<Spectrum> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(GraphError::NotSquare(rows, cols));
    }
    let n = rows;
    for k in 0..n {
        for j in (k + 1)..n {
            let delta = (a[[k, j]] - a[[j, k]]).abs();
            if delta > SYMMETRY_TOL {
                return Err(GraphError::NotSymmetric { k, j, delta });
            }
        }
    }

    let mut work = a.clone();
    let mut vectors = Array2::eye(n);
    if n > 1 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if max_off_diagonal(&work) <= JACOBI_OFF_TOL {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut work, &mut vectors, p, q);
                }
            }
        }
        converged = converged || max_off_diagonal(&work) <= JACOBI_OFF_TOL;
        if !converged {
            return Err(GraphError::NoConvergence(JACOBI_MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[[i, i]].total_cmp(&work[[j, j]]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| work[[i, i]]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (target, &source) in order.iter().enumerate() {
        let column = vectors.column(source);
        let mut lead = 0;
        for row in 1..n {
            if column[row].abs() > column[lead].abs() {
                lead = row;
            }
        }
        let sign = if column[lead] < 0.0 { -1.0 } else { 1.0 };
        for row in 0..n {
            eigenvectors[[row, target]] = sign * column[row];
        }
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn max_off_diagonal(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut largest = 0.0f64;
    for k in 0..n {
        for j in (k + 1)..n {
            largest = largest.max(a[[k, j]].abs());
        }
    }
    largest
}

fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let n = a.nrows();
    let apq = a[[p, q]];
    if apq.abs() <= f64::MIN_POSITIVE {
        return;
    }
    let h = a[[q, q]] - a[[p, p]];
    let t = if apq.abs() * 1e15 < h.abs() {
        apq / h
    } else {
        let theta = 0.5 * h / apq;
        let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
        if theta < 0.0 {
            t = -t;
        }
        t
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    a[[p, p]] -= t * apq;
    a[[q, q]] += t * apq;
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for j in 0..n {
        if j == p || j == q {
            continue;
        }
        let ajp = a[[j, p]];
        let ajq = a[[j, q]];
        a[[j, p]] = ajp - s * (ajq + tau * ajp);
        a[[p, j]] = a[[j, p]];
        a[[j, q]] = ajq + s * (ajp - tau * ajq);
        a[[q, j]] = a[[j, q]];
    }
    for j in 0..n {
        let vjp = v[[j, p]];
        let vjq = v[[j, q]];
        v[[j, p]] = vjp - s * (vjq + tau * vjp);
        v[[j, q]] = vjq + s * (vjp - tau * vjq);
    }
}

/// Second-smallest eigenvalue of the weighted Laplacian, the algebraic
/// connectivity.
///
/// # Errors
///
/// Everything [`laplacian`] and [`symmetric_eigendecomposition`] reject,
/// plus [`GraphError::Disconnected`] when the computed second eigenvalue
/// sits at the zero cluster (below [`CONNECTIVITY_TOL`]).
pub fn algebraic_connectivity(topology: &Topology, weights: &[f64]) -> Result<f64> {
    let lap = laplacian(topology, weights)?;
    let spectrum = symmetric_eigendecomposition(lap.as_matrix())?;
    let lambda2 = spectrum.eigenvalues()[1];
    if lambda2 <= CONNECTIVITY_TOL {
        return Err(GraphError::Disconnected(0));
    }
    Ok(lambda2)
}
