//! The state space `[0, 1) = R/Z` and everything that lives on it.
//!
//! Functions are node samples at `x_j = j / N` with periodic linear
//! interpolation. Measures are a piecewise-constant density over the `N`
//! uniform cells plus a finite list of atoms, so the Lebesgue decomposition of
//! one representable measure against another is exact.

mod function;
mod interval;
mod measure;
mod system;
mod weight;

pub use function::{circle, circle_distance, GridFunction, PointFn, TrigPoly};
pub use interval::IntervalSet;
pub use measure::{integrate, Atom, Measure};
pub use system::{Branch, IfsSystem, Sigma, SigmaPiece};
pub use weight::WeightExpr;
