use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{CylinderSpec, DEPTH_MAX, RESIDUAL_MAX};
use crate::grid::{integrate, GridFunction, IntervalSet, Measure, PointFn};
use crate::transfer::TransferOperator;
use crate::{par, Error, Result, EPS_H};

/// `P_x` for every `x` together with the base measure `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMeasure {
    op: TransferOperator,
    h: GridFunction,
    lambda: Measure,
    residual: f64,
}

/// Product `(f_0 o Z_0)(f_1 o Z_1) ... (f_m o Z_m)`.
#[derive(Clone)]
pub struct CylinderFn {
    factors: Vec<Arc<dyn PointFn>>,
}

impl fmt::Debug for CylinderFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylinderFn")
            .field("depth", &self.depth())
            .finish_non_exhaustive()
    }
}

impl CylinderFn {
    pub fn new(factors: Vec<Arc<dyn PointFn>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("a cylinder function needs f_0".into()));
        }
        Ok(Self { factors })
    }

    pub fn from_fns<F: PointFn + 'static>(factors: impl IntoIterator<Item = F>) -> Result<Self> {
        Self::new(
            factors
                .into_iter()
                .map(|f| Arc::new(f) as Arc<dyn PointFn>)
                .collect(),
        )
    }

    /// `f o Z_n`.
    pub fn coordinate(n: usize, f: impl PointFn + 'static) -> Self {
        let one: Arc<dyn PointFn> = Arc::new(|_x: f64| 1.0);
        let mut factors = vec![one; n];
        factors.push(Arc::new(f));
        Self { factors }
    }

    /// Indicator of `{Z_1 in A_1, ..., Z_m in A_m}`.
    pub fn indicator(spec: &CylinderSpec) -> Self {
        let mut factors: Vec<Arc<dyn PointFn>> = vec![Arc::new(|_x: f64| 1.0)];
        factors.extend(spec.sets.iter().map(|s| Arc::new(s.clone()) as Arc<dyn PointFn>));
        Self { factors }
    }

    pub fn depth(&self) -> usize {
        self.factors.len() - 1
    }

    pub fn factors(&self) -> &[Arc<dyn PointFn>] {
        &self.factors
    }

    /// `|psi|^2`, factor by factor.
    pub fn squared(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .map(|f| {
                    let f = Arc::clone(f);
                    Arc::new(move |x: f64| f.eval(x).powi(2)) as Arc<dyn PointFn>
                })
                .collect(),
        }
    }

    /// Value on a path of depth at least `m`.
    pub fn eval_path(&self, coords: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(coords)
            .map(|(f, &x)| f.eval(x))
            .product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    MonteCarlo { paths: usize, seed: u64 },
}

/// A value with its Monte Carlo standard error (zero for exact results).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }

    pub(crate) fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no sample paths".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(Self {
            value: mean,
            std_error: (var / n).sqrt(),
        })
    }
}

impl PathMeasure {
    /// Requires `lambda` to be a probability measure and `integral h d lambda = 1`.
    pub fn new(op: TransferOperator, h: GridFunction, lambda: Measure) -> Result<Self> {
        if !lambda.is_probability(1e-9) {
            return Err(Error::NotProbability(lambda.total()));
        }
        let pm = Self::new_unchecked(op, h, lambda)?;
        let mass = integrate(&pm.h, &pm.lambda)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::HarmonicNormalisation(mass));
        }
        if pm.h.min() < 0.0 {
            return Err(Error::NegativeIterate(pm.h.min()));
        }
        Ok(pm)
    }

    /// Only grid compatibility is checked; used for negative controls.
    pub fn new_unchecked(op: TransferOperator, h: GridFunction, lambda: Measure) -> Result<Self> {
        if h.n() != op.n() || lambda.n() != op.n() {
            return Err(Error::GridMismatch {
                left: op.n(),
                right: if h.n() != op.n() { h.n() } else { lambda.n() },
            });
        }
        let residual = op.apply_r(&h)?.max_diff(&h)?;
        Ok(Self {
            op,
            h,
            lambda,
            residual,
        })
    }

    pub fn op(&self) -> &TransferOperator {
        &self.op
    }

    pub fn h(&self) -> &GridFunction {
        &self.h
    }

    pub fn lambda(&self) -> &Measure {
        &self.lambda
    }

    /// `max |R h - h|` at the nodes.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Same data over a different system (e.g. a perturbed `sigma`).
    pub fn with_operator_unchecked(&self, op: TransferOperator) -> Self {
        Self {
            op,
            ..self.clone()
        }
    }

    pub(crate) fn check_depth(depth: usize) -> Result<()> {
        if depth > DEPTH_MAX {
            return Err(Error::DepthExceeded {
                depth,
                max: DEPTH_MAX,
            });
        }
        Ok(())
    }

    /// `R(f_1 R(f_2 ... R(f_m h)...))(x)` by enumerating all branch words,
    /// pruning words whose weight vanishes.
    pub fn nested(&self, x: f64, factors: &[&dyn PointFn]) -> Result<f64> {
        Self::check_depth(factors.len())?;
        Ok(self.nested_rec(x, factors))
    }

    fn nested_rec(&self, y: f64, factors: &[&dyn PointFn]) -> f64 {
        let Some((f, rest)) = factors.split_first() else {
            return self.h.interpolate(y);
        };
        let mut acc = 0.0;
        for (z, m) in self.op.kernel_atoms(y) {
            if m == 0.0 {
                continue;
            }
            let fz = f.eval(z);
            if fz == 0.0 {
                continue;
            }
            acc += m * fz * self.nested_rec(z, rest);
        }
        acc
    }

    /// `P_x(Z_1 in A_1, ..., Z_m in A_m)`.
    pub fn cylinder_mass(&self, x: f64, spec: &CylinderSpec) -> Result<f64> {
        if self.residual > RESIDUAL_MAX {
            return Err(Error::HarmonicResidual {
                residual: self.residual,
                limit: RESIDUAL_MAX,
            });
        }
        let sets: Vec<&dyn PointFn> = spec.sets.iter().map(|s| s as &dyn PointFn).collect();
        self.nested(x, &sets)
    }

    /// `P_x` of the whole path space at depth `m`, i.e. `R^m(h)(x)`; no
    /// harmonicity is assumed.
    pub fn total_mass(&self, x: f64, depth: usize) -> Result<f64> {
        let all = IntervalSet::all();
        let sets: Vec<&dyn PointFn> = vec![&all; depth];
        self.nested(x, &sets)
    }

    fn conditional_raw(&self, psi: &CylinderFn, x: f64) -> Result<f64> {
        let (f0, rest) = psi.factors.split_first().expect("non-empty");
        let rest: Vec<&dyn PointFn> = rest.iter().map(|f| f.as_ref()).collect();
        let v = f0.eval(x);
        if v == 0.0 {
            return Ok(0.0);
        }
        Ok(v * self.nested(x, &rest)?)
    }

    /// `E(psi | x) = integral psi dP_x`.
    pub fn conditional_expectation(&self, psi: &CylinderFn, x: f64) -> Result<f64> {
        Self::check_depth(psi.depth())?;
        self.conditional_raw(psi, x)
    }

    /// `integral psi dP`, exactly (nested `R` under quadrature on `lambda`) or
    /// by sampling bases from `lambda` and paths from the `h`-transform.
    pub fn expectation(&self, psi: &CylinderFn, mode: Mode) -> Result<Estimate> {
        match mode {
            Mode::Exact => {
                Self::check_depth(psi.depth())?;
                let f = |x: f64| self.conditional_raw(psi, x).unwrap_or(f64::NAN);
                Ok(Estimate::exact(integrate(&f, &self.lambda)?))
            }
            Mode::MonteCarlo { paths, seed } => {
                let samples = self.sample_weighted(psi.depth(), paths, seed)?;
                let values: Vec<f64> = samples
                    .iter()
                    .map(|(p, w)| w * psi.eval_path(p.coordinates()))
                    .collect();
                Estimate::from_samples(&values)
            }
        }
    }

    /// `(V_0^* psi)(x_j) = E(psi | x_j) / h(x_j)` at the nodes.
    pub fn v0_adjoint(&self, psi: &CylinderFn) -> Result<GridFunction> {
        Self::check_depth(psi.depth())?;
        let values = par::map_indexed(self.op.n(), |j| {
            let x = self.op.node(j);
            let hx = self.h.values()[j];
            if hx <= EPS_H {
                return Err(Error::DegenerateConditioning { x, h: hx });
            }
            Ok(self.conditional_raw(psi, x)? / hx)
        });
        GridFunction::new(values.into_iter().collect::<Result<_>>()?)
    }

    /// `||g o Z_0||^2` in `L^2(P)`.
    pub fn v0_norm_squared(&self, g: impl PointFn + 'static, mode: Mode) -> Result<Estimate> {
        self.expectation(&CylinderFn::coordinate(0, g).squared(), mode)
    }
}
