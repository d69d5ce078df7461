//! Symmetric Nash equilibrium computation for symmetric bimatrix games.
//!
//! The central object is a replicator-style dynamic whose velocity at a
//! state x is driven not by x itself but by a state-dependent multiplier
//! strategy, obtained by solving a pair of convex programs: a scalar dual
//! solve producing the advantage scale θ and its optimizer, and a
//! constrained entropy minimization producing the multiplier fed into the
//! field. Along orbits x·CCᵀx never decreases, and the multiplier's
//! equilibrium gap certifies convergence.
//!
//! The crate also ships an independent support-enumeration oracle for
//! desk-scale verification, a seeded game generator, and text file formats
//! for games, strategies, and run traces.

mod error;
pub mod linalg;
pub mod game;
pub mod kernels;
pub mod theta;
pub mod multiplier;
pub mod dynamics;
pub mod oracle;
pub mod gamegen;
pub mod io;

pub use error::{Error, Result};
pub use game::{Game, Provenance, Strategy, CARRIER_TOL};
pub use kernels::{
    advantage_vector, equilibrium_gap, is_fixed_point, jensen_gap, lyapunov_value,
    relative_entropy, weighted_logsumexp,
};
pub use linalg::Matrix;
pub use multiplier::{
    constraint_slacks, feasible_init, solve_multiplier, solve_multiplier_warm, MultiplierSolution,
    SolverConfig, WarmStart,
};
pub use theta::{dual_gap_function, softmax_reweight, solve_theta, ThetaSolution};
pub use dynamics::{
    integrate, integrate_with, step, vector_field, Method, RunConfig, RunResult, TraceRecord,
};
pub use oracle::{
    enumerate_fixed_points, enumerate_ss_fixed_points, enumerate_symmetric_equilibria,
    verify_equilibrium, CertificateSource, EquilibriumCertificate,
};
pub use gamegen::{generate, normalize, Distribution, GenSpec};
