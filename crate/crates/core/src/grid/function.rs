use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduce `x` to the circle `[0, 1)`.
#[inline]
pub fn circle(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance between two points on the circle.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = circle(a - b);
    d.min(1.0 - d)
}

/// Anything that can be evaluated pointwise on the circle.
pub trait PointFn: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F> PointFn for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Real function on the circle stored as samples at `x_j = j / N`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("n", &self.values.len())
            .finish_non_exhaustive()
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::GridTooSmall(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid function samples"));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the nodes.
    pub fn from_fn(n: usize, f: impl PointFn) -> Result<Self> {
        Self::new((0..n).map(|j| f.eval(j as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n() as f64
    }

    /// Periodic piecewise-linear interpolation.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.n();
        let t = circle(x) * n as f64;
        let j = (t.floor() as usize).min(n - 1);
        let frac = t - j as f64;
        let left = self.values[j];
        if frac == 0.0 {
            return left;
        }
        let right = self.values[(j + 1) % n];
        left + frac * (right - left)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Largest nodewise difference; grids must agree.
    pub fn max_diff(&self, other: &Self) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::GridMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Linear-interpolation resample onto an `n`-node grid.
    pub fn resample(&self, n: usize) -> Result<Self> {
        Self::from_fn(n, |x| self.interpolate(x))
    }
}

impl PointFn for GridFunction {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.interpolate(x)
    }
}

/// `c + sum_k (a_k cos 2 pi k x + b_k sin 2 pi k x)`, `k = 1..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn new(constant: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { constant, cos, sin }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, Vec::new(), Vec::new())
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    /// Degree-`degree` polynomial with every coefficient uniform in `[-1, 1]`.
    pub fn random(degree: usize, rng: &mut impl Rng) -> Self {
        let constant = rng.random_range(-1.0..=1.0);
        let cos = (0..degree).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let sin = (0..degree).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { constant, cos, sin }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            constant: c * self.constant,
            cos: self.cos.iter().map(|a| c * a).collect(),
            sin: self.sin.iter().map(|b| c * b).collect(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let mut acc = self.constant;
        for (k, a) in self.cos.iter().enumerate() {
            acc += a * (TAU * (k + 1) as f64 * x).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            acc += b * (TAU * (k + 1) as f64 * x).sin();
        }
        acc
    }

    /// Sup norm bounded by the sum of absolute coefficients.
    pub fn coefficient_bound(&self) -> f64 {
        self.constant.abs()
            + self.cos.iter().map(|a| a.abs()).sum::<f64>()
            + self.sin.iter().map(|b| b.abs()).sum::<f64>()
    }
}

impl PointFn for TrigPoly {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.value(x)
    }
}
