//! Power iteration for `R h = rho h`, weight normalisation and the Fourier
//! cascade identity for doubling-map systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{integrate, GridFunction, IfsSystem, Measure, Sigma};
use crate::transfer::TransferOperator;
use crate::{par, Error, Result};

/// Iterates are clipped to zero above this negativity; anything lower is an error.
const CLIP: f64 = -1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarmonicOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicSolution {
    /// Normalised so that `integral h d lambda = 1`.
    pub h: GridFunction,
    pub rho: f64,
    /// `max |R h - rho h|` over the nodes.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl HarmonicSolution {
    /// Turns a non-converged result into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                change: self.residual,
            })
        }
    }
}

/// Power iteration from a strictly positive random start drawn from `seed`.
pub fn solve_harmonic(
    op: &TransferOperator,
    lambda: &Measure,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = (0..op.n()).map(|_| rng.random_range(0.5..1.5)).collect();
    solve_harmonic_from(op, lambda, GridFunction::new(start)?, opts)
}

/// Power iteration `h <- R h / integral(R h) d lambda` from `initial`.
pub fn solve_harmonic_from(
    op: &TransferOperator,
    lambda: &Measure,
    initial: GridFunction,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if initial.n() != op.n() || lambda.n() != op.n() {
        return Err(Error::GridMismatch {
            left: op.n(),
            right: if initial.n() != op.n() { initial.n() } else { lambda.n() },
        });
    }
    let mut h = normalise(initial, lambda)?;
    let mut rho = f64::NAN;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let rh = op.apply_r(&h)?;
        rho = integrate(&rh, lambda)?;
        if !(rho > 0.0) {
            return Err(Error::NonPositiveEigenvalue(rho));
        }
        let next = normalise(rh, lambda)?;
        change = next.max_diff(&h)?;
        h = next;
        if change < opts.tol {
            break;
        }
    }
    let rh = op.apply_r(&h)?;
    let rho_final = integrate(&rh, lambda)?;
    if rho_final.is_finite() && rho_final > 0.0 {
        rho = rho_final;
    }
    let residual = rh
        .values()
        .iter()
        .zip(h.values())
        .fold(0.0, |m: f64, (r, v)| m.max((r - rho * v).abs()));
    Ok(HarmonicSolution {
        h,
        rho,
        residual,
        iterations,
        converged: change < opts.tol,
    })
}

fn normalise(h: GridFunction, lambda: &Measure) -> Result<GridFunction> {
    let mut values = h.into_values();
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(Error::NonFinite("harmonic iterate"));
        }
        if *v < 0.0 {
            if *v < CLIP {
                return Err(Error::NegativeIterate(*v));
            }
            *v = 0.0;
        }
    }
    let h = GridFunction::new(values)?;
    let mass = integrate(&h, lambda)?;
    if !(mass > 0.0) {
        return Err(Error::HarmonicNormalisation(mass));
    }
    h.scaled(1.0 / mass)
}

/// Copy of the system with `W / rho`, where `rho` is the Perron eigenvalue
/// found by [`solve_harmonic`].
pub fn normalize_weight(
    op: &TransferOperator,
    lambda: &Measure,
    opts: &HarmonicOptions,
) -> Result<IfsSystem> {
    let sol = solve_harmonic(op, lambda, opts)?.require_converged()?;
    if !(sol.rho > 0.0) {
        return Err(Error::NonPositiveEigenvalue(sol.rho));
    }
    Ok(op.system().with_weight(op.weight().scaled(1.0 / sol.rho)?))
}

fn is_doubling(system: &IfsSystem) -> bool {
    let b = system.branches();
    let p = system.probabilities();
    b.len() == 2
        && b[0].slope == 0.5
        && b[0].offset == 0.0
        && b[1].slope == 0.5
        && b[1].offset == 0.5
        && p == [0.5, 0.5]
        && matches!(system.sigma(), Sigma::Affine { slope, offset } if *slope == 2.0 && *offset == 0.0)
}

/// `max |h^(n) - (W_k h)^(2^k n)|` over `0 <= k <= k_max`, `|n| <= n_max`, with
/// `W_k(x) = W(x) W(2x) ... W(2^{k-1} x)`; transforms use the node sum.
pub fn fourier_cascade_check(
    op: &TransferOperator,
    h: &GridFunction,
    k_max: u32,
    n_max: i64,
) -> Result<f64> {
    if !is_doubling(op.system()) {
        return Err(Error::NotDoubling);
    }
    if h.n() != op.n() {
        return Err(Error::GridMismatch {
            left: op.n(),
            right: h.n(),
        });
    }
    let n = h.n();
    let top = (n_max.unsigned_abs() as usize) << k_max;
    if 2 * top >= n {
        return Err(Error::InvalidArgument(format!(
            "grid of {n} nodes cannot resolve frequency {top}"
        )));
    }
    let w = op.weight();
    let nodes: Vec<f64> = (0..n).map(|j| h.node(j)).collect();
    let pairs: Vec<(u32, i64)> = (0..=k_max)
        .flat_map(|k| (-n_max..=n_max).map(move |m| (k, m)))
        .collect();
    let diffs = par::map_indexed(pairs.len(), |i| {
        let (k, m) = pairs[i];
        let lhs = coefficient(h.values(), m);
        let wk: Vec<f64> = nodes
            .iter()
            .zip(h.values())
            .map(|(&x, &hv)| {
                let mut prod = hv;
                let mut y = x;
                for _ in 0..k {
                    prod *= w.value(y);
                    y = crate::circle(2.0 * y);
                }
                prod
            })
            .collect();
        let rhs = coefficient(&wk, m << k);
        ((lhs.0 - rhs.0).powi(2) + (lhs.1 - rhs.1).powi(2)).sqrt()
    });
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

/// `(1/N) sum_j f_j e^{-2 pi i m x_j}` as `(re, im)`.
fn coefficient(values: &[f64], m: i64) -> (f64, f64) {
    let n = values.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (j, &v) in values.iter().enumerate() {
        // exact phase reduction keeps large frequencies accurate
        let phase = ((m.rem_euclid(n as i64) as usize * j) % n) as f64 / n as f64;
        let t = 2.0 * std::f64::consts::PI * phase;
        re += v * t.cos();
        im -= v * t.sin();
    }
    (re / n as f64, im / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WeightExpr;

    fn doubling(w: WeightExpr, n: usize) -> TransferOperator {
        TransferOperator::new(IfsSystem::doubling(w).unwrap(), n).unwrap()
    }

    fn solve(op: &TransferOperator) -> HarmonicSolution {
        let leb = Measure::lebesgue(op.n()).unwrap();
        solve_harmonic(op, &leb, &HarmonicOptions::default()).unwrap()
    }

    #[test]
    fn unit_weight_gives_constant() {
        let s = solve(&doubling(WeightExpr::constant(1.0), 128));
        assert!(s.converged);
        assert!((s.rho - 1.0).abs() < 1e-12);
        assert!(s.residual < 1e-12);
        assert!(s.h.values().iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn haar_weight_has_eigenvalue_one() {
        let s = solve(&doubling(WeightExpr::haar(), 256));
        assert!(s.converged);
        assert!((s.rho - 1.0).abs() < 1e-10);
        assert!(s.residual < 1e-10);
    }

    #[test]
    fn weight_two_and_its_normalisation() {
        let op = doubling(WeightExpr::constant(2.0), 64);
        assert!((solve(&op).rho - 2.0).abs() < 1e-10);
        let leb = Measure::lebesgue(64).unwrap();
        let sys = normalize_weight(&op, &leb, &HarmonicOptions::default()).unwrap();
        assert_eq!(sys.weight().is_constant(), Some(1.0));
        let half = doubling(WeightExpr::constant(0.5), 64);
        let sys = normalize_weight(&half, &leb, &HarmonicOptions::default()).unwrap();
        assert_eq!(sys.weight().is_constant(), Some(1.0));
    }

    #[test]
    fn start_scale_does_not_matter() {
        let op = doubling(WeightExpr::haar(), 64);
        let leb = Measure::lebesgue(64).unwrap();
        let start = GridFunction::from_fn(64, |x: f64| 1.0 + 0.5 * (6.0 * x).sin()).unwrap();
        let opts = HarmonicOptions::default();
        let a = solve_harmonic_from(&op, &leb, start.clone(), &opts).unwrap();
        let b = solve_harmonic_from(&op, &leb, start.scaled(37.0).unwrap(), &opts).unwrap();
        assert!(a.h.max_diff(&b.h).unwrap() < 1e-12);
    }

    #[test]
    fn cascade_examples() {
        let one = GridFunction::constant(1024, 1.0).unwrap();
        let b = doubling(WeightExpr::haar(), 1024);
        assert!(fourier_cascade_check(&b, &one, 4, 8).unwrap() < 1e-12);
        assert!(fourier_cascade_check(&b, &one, 1, 1).unwrap() < 1e-15);
        let a = doubling(WeightExpr::constant(1.0), 1024);
        assert!(fourier_cascade_check(&a, &one, 4, 8).unwrap() < 1e-12);
        let d = TransferOperator::new(IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap(), 81).unwrap();
        let one = GridFunction::constant(81, 1.0).unwrap();
        assert_eq!(fourier_cascade_check(&d, &one, 1, 1), Err(Error::NotDoubling));
        let coarse = doubling(WeightExpr::haar(), 64);
        let one = GridFunction::constant(64, 1.0).unwrap();
        assert!(matches!(fourier_cascade_check(&coarse, &one, 4, 8), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_harmonic_input_breaks_the_cascade() {
        let h = GridFunction::from_fn(1024, |x: f64| 1.0 + (2.0 * std::f64::consts::PI * x).cos()).unwrap();
        let b = doubling(WeightExpr::haar(), 1024);
        assert!(fourier_cascade_check(&b, &h, 2, 4).unwrap() > 0.1);
    }
}
