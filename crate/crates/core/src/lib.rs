//! Transfer operators for iterated function systems on the circle `[0, 1) = R/Z`.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: node-sampled functions, cell/atom measures, interval sets,
//!   weights and the [`IfsSystem`] itself.
//! * [`transfer`]: the weighted transfer operator `R`, its adjoint
//!   `S f = W (f o sigma)`, conditional kernels, Radon-Nikodym weights and a
//!   residual suite for the operator identities.
//! * [`harmonic`]: Perron power iteration for `R h = h`, weight normalisation
//!   and the Fourier cascade check for doubling-map systems.
//! * [`sigspace`]: Lebesgue decomposition, square densities, the defect
//!   functional and Hutchinson iteration for IFS measures.
//! * [`solenoid`]: backward-orbit paths, the path measures `P_x` and `P`,
//!   exact cylinder enumeration, Monte Carlo sampling and the shift checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
mod error;
pub mod grid;
pub mod harmonic;
mod par;
pub mod sigspace;
pub mod solenoid;
pub mod transfer;

pub use check::{Check, CheckStatus};
pub use error::{Error, Result};
pub use grid::{
    circle, integrate, Atom, Branch, GridFunction, IfsSystem, IntervalSet, Measure, PointFn,
    Sigma, TrigPoly, WeightExpr,
};
pub use harmonic::{HarmonicOptions, HarmonicSolution};
pub use sigspace::{Decomposition, DefectForm, SigElement};
pub use solenoid::{CylinderFn, CylinderSpec, PathMeasure, SolPath};
pub use transfer::{ConditionalKernel, TransferOperator};

/// Merge tolerance for atom positions (circle distance).
pub const EPS_ATOM: f64 = 1e-12;
/// Below this value a weight is treated as zero wherever `1/W` is needed.
pub const EPS_W: f64 = 1e-10;
/// Smallest harmonic value the path sampler will condition on.
pub const EPS_H: f64 = 1e-10;
