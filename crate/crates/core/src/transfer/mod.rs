//! The weighted transfer operator
//! `(R f)(x) = sum_i p_i W(tau_i x) f(tau_i x)` and the objects built from it.

mod identities;

pub use identities::{identity_suite, IdentityReport, SuiteOptions};

use crate::grid::{GridFunction, IfsSystem, Measure, PointFn, WeightExpr};
use crate::sigspace::{lebesgue_decompose, Decomposition};
use crate::{Error, Result, EPS_W};

/// `R` for a validated system on an `N`-node grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    system: IfsSystem,
    n: usize,
}

/// The atomic measure `P(. | x)`: mass `p_i W(tau_i x)` at each branch image.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalKernel {
    pub base: f64,
    pub atoms: Vec<(f64, f64)>,
}

impl ConditionalKernel {
    /// `integral of f dP(. | x)`, summed in branch order.
    pub fn integrate(&self, f: &(impl PointFn + ?Sized)) -> f64 {
        let mut acc = 0.0;
        for &(y, m) in &self.atoms {
            acc += m * f.eval(y);
        }
        acc
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// `P(. | x)`-essential sup of `|f|` (support points with positive mass).
    pub fn sup_abs(&self, f: &(impl PointFn + ?Sized)) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .fold(0.0, |m, &(y, _)| m.max(f.eval(y).abs()))
    }
}

impl TransferOperator {
    /// Also checks the weight's positivity on the `n`-grid.
    pub fn new(system: IfsSystem, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooSmall(n));
        }
        system.validate_weight(n)?;
        Ok(Self { system, n })
    }

    /// No weight validation; used for negative controls.
    pub fn new_unchecked(system: IfsSystem, n: usize) -> Self {
        Self { system, n }
    }

    pub fn system(&self) -> &IfsSystem {
        &self.system
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> &WeightExpr {
        self.system.weight()
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.system.sigma().apply(x)
    }

    /// Support points and masses of `P(. | x)` in branch order.
    pub fn kernel_atoms(&self, x: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let w = self.system.weight();
        self.system
            .branches()
            .iter()
            .zip(self.system.probabilities())
            .map(move |(b, &p)| {
                let y = b.apply(x);
                (y, p * w.value(y))
            })
    }

    pub fn conditional_kernel(&self, x: f64) -> ConditionalKernel {
        ConditionalKernel {
            base: x,
            atoms: self.kernel_atoms(x).collect(),
        }
    }

    /// `(R f)(x)` with `f` evaluated exactly at the branch images.
    #[inline]
    pub fn apply_at(&self, f: &(impl PointFn + ?Sized), x: f64) -> f64 {
        let mut acc = 0.0;
        for (y, m) in self.kernel_atoms(x) {
            acc += m * f.eval(y);
        }
        acc
    }

    /// `R f` sampled at the grid nodes.
    pub fn apply_r(&self, f: &(impl PointFn + ?Sized)) -> Result<GridFunction> {
        GridFunction::new((0..self.n).map(|j| self.apply_at(f, self.node(j))).collect())
    }

    /// `(S f)(x) = W(x) f(sigma(x))`, the adjoint of `R`.
    #[inline]
    pub fn s_at(&self, f: &(impl PointFn + ?Sized), x: f64) -> f64 {
        self.system.weight().value(x) * f.eval(self.sigma(x))
    }

    pub fn apply_s(&self, f: &(impl PointFn + ?Sized)) -> Result<GridFunction> {
        GridFunction::new((0..self.n).map(|j| self.s_at(f, self.node(j))).collect())
    }

    /// `R(W)`; `R S f = R(W) f`.
    pub fn rw_multiplier(&self) -> Result<GridFunction> {
        self.apply_r(self.system.weight())
    }

    /// `S` is an isometry iff `R(W) = 1`.
    pub fn is_isometric(&self, tol: f64) -> Result<bool> {
        let rw = self.rw_multiplier()?;
        Ok(rw.values().iter().all(|v| (v - 1.0).abs() < tol))
    }

    /// `R(1/W)(x)`, or `None` where some branch image has `W < EPS_W`.
    pub fn r_inverse_weight_at(&self, x: f64) -> Option<f64> {
        let mut acc = 0.0;
        for (y, m) in self.kernel_atoms(x) {
            let w = self.system.weight().value(y);
            if w < EPS_W {
                return None;
            }
            acc += m * (1.0 / w);
        }
        Some(acc)
    }

    /// The measure `lambda R : f -> lambda(R f)`, i.e.
    /// `sum_i p_i W . (lambda o tau_i^{-1})`.
    pub fn lambda_r(&self, lambda: &Measure) -> Result<Measure> {
        let (c, w): (f64, Option<&dyn PointFn>) = match self.system.weight().is_constant() {
            Some(c) => (c, None),
            None => (1.0, Some(self.system.weight())),
        };
        let mut density = vec![0.0; lambda.n()];
        let mut atoms = Vec::with_capacity(lambda.atoms().len() * self.system.branch_count());
        for (b, &p) in self.system.branches().iter().zip(self.system.probabilities()) {
            lambda.pushforward_into(b, p * c, w, &mut density);
        }
        for a in lambda.atoms() {
            for (y, m) in self.kernel_atoms(a.position) {
                atoms.push((y, m * a.mass));
            }
        }
        Measure::from_density(density)?.with_atoms(atoms)
    }

    /// `d(lambda R) / d lambda` and the singular remainder of `lambda R`.
    pub fn rn_derivative(&self, lambda: &Measure) -> Result<Decomposition> {
        if !(lambda.total() > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        lebesgue_decompose(&self.lambda_r(lambda)?, lambda)
    }
}
