use serde::{Deserialize, Serialize};

use super::function::{circle, circle_distance};
use super::interval::IntervalSet;
use super::weight::WeightExpr;
use crate::{Error, Result};

/// Nodes used for the `sigma o tau_i = id` check.
const SIGMA_CHECK_NODES: usize = 256;
const SIGMA_TOL: f64 = 1e-10;
const PROBABILITY_TOL: f64 = 1e-12;

/// Affine branch `tau(x) = slope * x + offset (mod 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub slope: f64,
    pub offset: f64,
}

impl Branch {
    pub fn new(slope: f64, offset: f64) -> Result<Self> {
        if !(slope.is_finite() && offset.is_finite()) {
            return Err(Error::NonFinite("branch coefficients"));
        }
        if slope == 0.0 {
            return Err(Error::DegenerateBranch);
        }
        Ok(Self { slope, offset })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        circle(self.slope * x + self.offset)
    }

    /// `tau([0, 1))` as a subset of the circle.
    pub fn image(&self) -> IntervalSet {
        let len = self.slope.abs();
        if len >= 1.0 {
            return IntervalSet::all();
        }
        let start = if self.slope > 0.0 {
            circle(self.offset)
        } else {
            circle(self.offset + self.slope)
        };
        let end = start + len;
        if end <= 1.0 {
            IntervalSet::interval(start, end)
        } else {
            IntervalSet::new([(start, 1.0), (0.0, end - 1.0)])
        }
        .expect("arc endpoints lie in [0, 1]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPiece {
    pub start: f64,
    pub slope: f64,
    pub offset: f64,
}

/// The endomorphism `sigma`: either one affine map mod 1 or a piecewise
/// affine map given by pieces sorted by their left end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sigma {
    Affine { slope: f64, offset: f64 },
    Pieces { pieces: Vec<SigmaPiece> },
}

impl Sigma {
    pub fn affine(slope: f64, offset: f64) -> Self {
        Self::Affine { slope, offset }
    }

    /// Piecewise inverse of the branches: on `tau_i([0,1))` it undoes
    /// `tau_i`; a gap between images continues the piece to its left.
    pub fn inferred(branches: &[Branch]) -> Result<Self> {
        let mut pieces = Vec::new();
        for b in branches {
            let slope = 1.0 / b.slope;
            for &(start, _) in b.image().intervals() {
                // y + lift lies in the unwrapped image, so x = (y + lift - b) / a
                let low = if b.slope > 0.0 { b.offset } else { b.offset + b.slope };
                let lift = (low - start - 1e-12).ceil();
                pieces.push(SigmaPiece {
                    start,
                    slope,
                    offset: (lift - b.offset) * slope,
                });
            }
        }
        if pieces.is_empty() {
            return Err(Error::InvalidSystem("cannot infer sigma without branches".into()));
        }
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self::Pieces { pieces })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Affine { slope, offset } => circle(slope * x + offset),
            Self::Pieces { pieces } => {
                let p = pieces
                    .iter()
                    .rev()
                    .find(|p| p.start <= x)
                    .unwrap_or(&pieces[0]);
                circle(p.slope * x + p.offset)
            }
        }
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            Self::Affine { slope, .. } => *slope,
            Self::Pieces { pieces } => {
                pieces
                    .iter()
                    .rev()
                    .find(|p| p.start <= x)
                    .unwrap_or(&pieces[0])
                    .slope
            }
        }
    }
}

/// Branches `tau_i`, probabilities `p_i`, weight `W` and the endomorphism
/// `sigma` with `sigma o tau_i = id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfsSystem {
    branches: Vec<Branch>,
    probabilities: Vec<f64>,
    weight: WeightExpr,
    sigma: Sigma,
}

impl IfsSystem {
    /// Validated construction: probabilities positive and summing to one,
    /// branch images with disjoint interiors, and `sigma` undoing every
    /// branch on a check grid.
    pub fn new(
        branches: Vec<Branch>,
        probabilities: Vec<f64>,
        weight: WeightExpr,
        sigma: Sigma,
    ) -> Result<Self> {
        let sys = Self::new_unchecked(branches, probabilities, weight, sigma);
        sys.validate()?;
        Ok(sys)
    }

    /// Skips validation; used for negative controls.
    pub fn new_unchecked(
        branches: Vec<Branch>,
        probabilities: Vec<f64>,
        weight: WeightExpr,
        sigma: Sigma,
    ) -> Self {
        Self {
            branches,
            probabilities,
            weight,
            sigma,
        }
    }

    /// Doubling map with `tau_0 = x/2`, `tau_1 = (x+1)/2`, `p = (1/2, 1/2)`.
    pub fn doubling(weight: WeightExpr) -> Result<Self> {
        Self::new(
            vec![Branch::new(0.5, 0.0)?, Branch::new(0.5, 0.5)?],
            vec![0.5, 0.5],
            weight,
            Sigma::affine(2.0, 0.0),
        )
    }

    /// Middle-thirds system: `tau_0 = x/3`, `tau_1 = (x+2)/3`, `sigma = 3x mod 1`.
    pub fn cantor(weight: WeightExpr) -> Result<Self> {
        Self::new(
            vec![Branch::new(1.0 / 3.0, 0.0)?, Branch::new(1.0 / 3.0, 2.0 / 3.0)?],
            vec![0.5, 0.5],
            weight,
            Sigma::affine(3.0, 0.0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.branches.len();
        if n == 0 {
            return Err(Error::InvalidSystem("at least one branch is required".into()));
        }
        if self.probabilities.len() != n {
            return Err(Error::InvalidSystem(format!(
                "{} probabilities for {} branches",
                self.probabilities.len(),
                n
            )));
        }
        if self.probabilities.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidSystem("probabilities must be positive".into()));
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::InvalidSystem(format!(
                "probabilities must sum to 1 (sum = {sum})"
            )));
        }
        for (i, a) in self.branches.iter().enumerate() {
            Branch::new(a.slope, a.offset)?;
            for b in &self.branches[i + 1..] {
                if overlap(&a.image(), &b.image()) > 1e-12 {
                    return Err(Error::InvalidSystem("branch images overlap".into()));
                }
            }
        }
        let residual = self.sigma_residual();
        if !(residual < SIGMA_TOL) {
            return Err(Error::InvalidSystem(format!(
                "sigma is not a left inverse of branches (residual {residual:e})"
            )));
        }
        Ok(())
    }

    /// `max |sigma(tau_i(x)) - x|` over nodes and cell midpoints of a fixed
    /// check grid, measured on the circle.
    pub fn sigma_residual(&self) -> f64 {
        let m = SIGMA_CHECK_NODES;
        let mut worst: f64 = 0.0;
        for k in 0..2 * m {
            let x = k as f64 / (2 * m) as f64;
            for b in &self.branches {
                worst = worst.max(circle_distance(self.sigma.apply(b.apply(x)), x));
            }
        }
        worst
    }

    pub fn validate_weight(&self, n: usize) -> Result<()> {
        self.weight.validate_positive(n)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn weight(&self) -> &WeightExpr {
        &self.weight
    }

    pub fn sigma(&self) -> &Sigma {
        &self.sigma
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn with_weight(&self, weight: WeightExpr) -> Self {
        Self {
            weight,
            ..self.clone()
        }
    }

    /// Replaces `sigma` without re-validating.
    pub fn with_sigma_unchecked(&self, sigma: Sigma) -> Self {
        Self {
            sigma,
            ..self.clone()
        }
    }

    /// Lowest-index branch whose image contains `x`.
    pub fn branch_containing(&self, x: f64) -> Option<usize> {
        let x = circle(x);
        self.branches.iter().position(|b| b.image().contains(x))
    }
}

fn overlap(a: &IntervalSet, b: &IntervalSet) -> f64 {
    let mut total = 0.0;
    for &(a0, a1) in a.intervals() {
        for &(b0, b1) in b.intervals() {
            total += (a1.min(b1) - a0.max(b0)).max(0.0);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        assert!(IfsSystem::doubling(WeightExpr::constant(1.0)).is_ok());
        assert!(IfsSystem::doubling(WeightExpr::haar()).is_ok());
        assert!(IfsSystem::cantor(WeightExpr::constant(1.0)).is_ok());
    }

    #[test]
    fn perturbed_sigma_fails_left_inverse_check() {
        let good = IfsSystem::doubling(WeightExpr::constant(1.0)).unwrap();
        let bad = good.with_sigma_unchecked(Sigma::affine(2.0 + 1e-3, 0.0));
        assert!(bad.sigma_residual() > 1e-4);
        match bad.validate() {
            Err(Error::InvalidSystem(msg)) => assert!(msg.contains("sigma is not a left inverse")),
            other => panic!("{other:?}"),
        }
        let triple = good.with_sigma_unchecked(Sigma::affine(3.0, 0.0));
        assert!(triple.validate().is_err());
    }

    #[test]
    fn probability_and_overlap_checks() {
        let b = vec![Branch::new(0.5, 0.0).unwrap(), Branch::new(0.5, 0.5).unwrap()];
        let e = IfsSystem::new(b.clone(), vec![0.6, 0.6], WeightExpr::constant(1.0), Sigma::affine(2.0, 0.0));
        assert!(matches!(e, Err(Error::InvalidSystem(m)) if m.contains("probabilities must sum to 1")));
        let e = IfsSystem::new(b, vec![1.5, -0.5], WeightExpr::constant(1.0), Sigma::affine(2.0, 0.0));
        assert!(e.is_err());
        let o = vec![Branch::new(0.5, 0.0).unwrap(), Branch::new(0.5, 0.25).unwrap()];
        let e = IfsSystem::new(o, vec![0.5, 0.5], WeightExpr::constant(1.0), Sigma::affine(2.0, 0.0));
        assert!(matches!(e, Err(Error::InvalidSystem(m)) if m.contains("overlap")));
    }

    #[test]
    fn inferred_sigma_matches_affine_maps() {
        let cantor = IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap();
        let inferred = Sigma::inferred(cantor.branches()).unwrap();
        for k in 0..99 {
            let x = k as f64 / 99.0 + 0.001;
            let a = inferred.apply(x);
            let b = Sigma::affine(3.0, 0.0).apply(x);
            assert!(circle_distance(a, b) < 1e-12, "x = {x}: {a} vs {b}");
        }
        let sys = cantor.with_sigma_unchecked(inferred);
        assert!(sys.validate().is_ok());
    }

    #[test]
    fn wrapped_branch_image_and_inverse() {
        let b = Branch::new(0.5, 0.75).unwrap();
        assert_eq!(b.image().intervals(), &[(0.0, 0.25), (0.75, 1.0)]);
        let s = Sigma::inferred(&[b, Branch::new(0.5, 0.25).unwrap()]).unwrap();
        for k in 0..50 {
            let x = k as f64 / 50.0;
            assert!(circle_distance(s.apply(b.apply(x)), x) < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn branch_membership() {
        let sys = IfsSystem::doubling(WeightExpr::constant(1.0)).unwrap();
        assert_eq!(sys.branch_containing(0.75), Some(1));
        assert_eq!(sys.branch_containing(0.25), Some(0));
        assert_eq!(sys.branch_containing(0.5), Some(1));
        let cantor = IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap();
        assert_eq!(cantor.branch_containing(0.5), None);
    }
}
