//! Numerical toolkit for the separation of unistochastic matrices from
//! doubly stochastic ones.
//!
//! A doubly stochastic matrix has nonnegative entries with unit row and
//! column sums; it is *unistochastic* when its entries are the squared
//! moduli of a unitary matrix. This crate decides membership, reconstructs
//! the underlying unitary matrix (in closed form for n = 3, numerically
//! for n = 4), computes unitarity-triangle geometry, and recovers unitary
//! matrices from error-affected measurements through constrained chi-square
//! fits.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion
//! `unisto-cli` crate carries IO, file formats, and the command-line
//! front end.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod fit;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod matrix;
pub mod n4;
pub mod parametrize;
pub mod simplex;
pub mod stats;
pub mod tagged;
pub mod triangles;
pub mod unitarity;

pub use fit::{
    chi2_data, chi2_data_params, chi2_triangles, chi2_unitarity_condition, fit,
    fit_constrained_params, FitConfig, FitMode, FitResult, Measurement, MeasurementKind,
    MeasurementTarget,
};
pub use matrix::{
    canonical_gauge_form, check_doubly_stochastic, hadamard_square, unitarity_defect,
    ComplexMatrix, GaugeTransform, SquaredModuliMatrix, StochasticityReport,
};
pub use n4::{first_line_params4, residuals4, solve4, Params4Free, Solve4Config, Solve4Outcome};
pub use parametrize::{build_ckm3, build_unitary_n, GeneratingVectorsN, MixingParameters3};
pub use stats::{convex_combine, mean_moduli, sigma_moduli, ModuliEnsemble};
pub use tagged::Tagged;
pub use triangles::{
    cos_delta_candidates_from_tangents, omega_tangents, recover_cij_from_tangents, sides_on,
    triangle_geometry, OrthogonalityId, TriangleGeometry,
};
pub use unitarity::{
    cos_delta_from_quadruple, count_distinct_cos_delta_expressions,
    enumerate_independent_quadruples, reconstruct_unitary, solve_first_line, test_unistochastic,
    QuadrupleSelection, SeparationVerdict, UnitarityError,
};

/// Default tolerance on line sums when a matrix is treated as exact.
pub const DEFAULT_TOL: f64 = 1e-9;
