//! Backward orbits of `sigma`, the path measures `P_x` (total mass `h(x)`)
//! and `P = integral P_x d lambda(x)`, with exact cylinder enumeration and an
//! `h`-transform sampler.

mod checks;
mod measure;
mod path;
mod sample;

pub use checks::{
    harmonic_from_measure, markov_deviation, multires_check, quasi_invariance_defect,
    random_cylinder, u_apply, unitarity_check, HarmonicFromMeasure, MarkovDeviation,
    MultiresReport,
};
pub use measure::{CylinderFn, Estimate, Mode, PathMeasure};
pub use path::{CylinderSpec, SolPath};
pub use sample::{empirical_frequency, CylinderComparison};

/// Largest enumeration depth (`n^m` words).
pub const DEPTH_MAX: usize = 16;
/// `h` residual above which cylinder masses are not trusted to be consistent.
pub const RESIDUAL_MAX: f64 = 1e-6;
