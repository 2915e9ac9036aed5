//! Deterministic simulation and verification laboratory for adaptive
//! guaranteed-performance consensus protocols.
//!
//! A network of single-integrator agents runs a diffusive coupling protocol
//! over an undirected connected graph. In the adaptive variant each edge
//! weight grows with the squared disagreement across that edge, which buys a
//! provable margin in both the convergence rate and an integral performance
//! cost; the standard variant keeps the weights fixed and serves as the
//! baseline. This crate simulates both variants with a deterministic
//! fixed-step integrator and verifies the supporting theory numerically:
//! Lyapunov decay, guaranteed-cost bounds, and convergence-rate floors.
//!
//! # Modules
//!
//! | Module | Role |
//! |--------|------|
//! | [`graph`] | Topologies, weighted Laplacians, symmetric eigensolver |
//! | [`decomposition`] | Orthogonal consensus/disagreement split |
//! | [`dynamics`] | Protocol vector fields and the RK4 integrator |
//! | [`analysis`] | Lyapunov evaluation, costs, rates, theorem checks |
//!
//! # Quick start
//!
//! ```
//! use conlab::analysis::check_theorems;
//! use conlab::decomposition::build_frame;
//! use conlab::dynamics::{simulate, Mode, ProtocolConfig};
//! use conlab::graph::{laplacian, load_topology};
//!
//! let topology = load_topology(2, &[(1, 2)]).unwrap();
//! let l0 = laplacian(&topology, &topology.unit_weights()).unwrap();
//! let frame = build_frame(&l0).unwrap();
//!
//! let cfg = ProtocolConfig::new(2.0, 1.0, Mode::Adaptive).unwrap();
//! let trajectory = simulate(&topology, &[0.0, 2.0], &cfg, 10.0, 1e-3, 10).unwrap();
//!
//! let report = check_theorems(&trajectory, &frame, 1e-3).unwrap();
//! assert!(report.theorem1_holds && report.theorem2_holds);
//! ```
//!
//! # Conventions
//!
//! Nodes are 1-based in file formats and error messages, 0-based in the API.
//! Weight vectors are indexed by unordered pair in lexicographic order (see
//! [`graph::pair_index`]); every pair carries a weight even though only edge
//! weights enter the control law. All series produced from the same inputs
//! are bitwise reproducible across runs.

pub mod analysis;
pub mod decomposition;
pub mod dynamics;
pub mod graph;
