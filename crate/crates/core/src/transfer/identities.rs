//! Residual checks for the operator identities satisfied by `R`, `S` and `W`
//! against a reference measure `lambda` and a candidate harmonic `h`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::TransferOperator;
use crate::check::{Check, CheckStatus};
use crate::grid::{integrate, GridFunction, IntervalSet, Measure, PointFn, Sigma, TrigPoly};
use crate::{par, Error, Result, EPS_H};

pub const PULL_OUT: &str = "pull_out";
pub const DUALITY: &str = "duality";
pub const RW_MULTIPLIER: &str = "rw_multiplier";
pub const PULLBACK_DENSITY: &str = "pullback_density";
pub const SIGMA_INVARIANCE: &str = "sigma_invariance";
pub const QUADRATIC_SETS: &str = "quadratic_sets";
pub const HARMONIC_SUPPORT: &str = "harmonic_support";
pub const KERNEL_BOUND: &str = "kernel_bound";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteOptions {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
    /// Random test functions are trig polynomials of degree `1..=max_degree`.
    pub max_degree: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            tol: 1e-8,
            max_degree: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub checks: Vec<Check>,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn count_passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed()).count()
    }

    pub fn count_failed(&self) -> usize {
        self.checks.iter().filter(|c| c.failed()).count()
    }

    pub fn count_skipped(&self) -> usize {
        self.checks.iter().filter(|c| c.is_skipped()).count()
    }

    pub fn all_ok(&self) -> bool {
        self.count_failed() == 0
    }
}

/// Per-trial worst residuals.
struct Trial {
    pull_out: f64,
    duality: f64,
    rw: f64,
    pullback: Option<f64>,
    invariance: f64,
    quadratic: f64,
    bound: f64,
}

/// Runs the eight identity checks with `trials` random trig test functions.
///
/// Test functions are evaluated in closed form at branch images, so the
/// pointwise identities are exact up to rounding and the integral ones up
/// to quadrature error on `lambda`.
pub fn identity_suite(
    op: &TransferOperator,
    lambda: &Measure,
    h: &GridFunction,
    opts: &SuiteOptions,
) -> Result<IdentityReport> {
    if opts.trials == 0 || opts.max_degree == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(
            "identity suite needs trials >= 1, max_degree >= 1 and tol > 0".into(),
        ));
    }
    if !(lambda.total() > 0.0) {
        return Err(Error::EmptyMeasure);
    }
    let sets = set_grid(op);
    let trials = par::map_indexed(opts.trials, |t| run_trial(op, lambda, h, opts, sets, t));
    let trials: Vec<Trial> = trials.into_iter().collect::<Result<_>>()?;
    let tol = opts.tol;
    let worst = |f: fn(&Trial) -> f64| trials.iter().map(f).fold(0.0, f64::max);

    let mut checks = vec![
        Check::from_residual(PULL_OUT, worst(|t| t.pull_out), tol),
        Check::from_residual(DUALITY, worst(|t| t.duality), tol),
        Check::from_residual(RW_MULTIPLIER, worst(|t| t.rw), tol),
    ];

    checks.push(if trials.iter().any(|t| t.pullback.is_none()) {
        Check::skipped(PULLBACK_DENSITY, "DOMAIN: 1/W undefined on the support of lambda", tol)
    } else {
        Check::from_residual(
            PULLBACK_DENSITY,
            trials.iter().map(|t| t.pullback.unwrap_or(0.0)).fold(0.0, f64::max),
            tol,
        )
    });

    checks.push(sigma_invariance(op, lambda, worst(|t| t.invariance), tol));
    checks.push(Check::from_residual(QUADRATIC_SETS, worst(|t| t.quadratic), tol));
    checks.push(harmonic_support(op, h, tol)?);
    checks.push(Check::from_residual(KERNEL_BOUND, worst(|t| t.bound), tol));
    Ok(IdentityReport { checks })
}

fn run_trial(
    op: &TransferOperator,
    lambda: &Measure,
    h: &GridFunction,
    opts: &SuiteOptions,
    sets: usize,
    trial: usize,
) -> Result<Trial> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(trial as u64);
    let f = TrigPoly::random(rng.random_range(1..=opts.max_degree), &mut rng);
    let g = TrigPoly::random(rng.random_range(1..=opts.max_degree), &mut rng);
    let w = op.weight();
    let f_sigma = |y: f64| f.value(op.sigma(y));

    let mut pull_out: f64 = 0.0;
    let mut rw: f64 = 0.0;
    let mut bound: f64 = 0.0;
    for j in 0..op.n() {
        let x = op.node(j);
        // R((f o sigma) g) = f R(g)
        let lhs = op.apply_at(&|y: f64| f_sigma(y) * g.value(y), x);
        pull_out = pull_out.max((lhs - f.value(x) * op.apply_at(&g, x)).abs());
        // R(S f) = R(W) f
        let lhs = op.apply_at(&|y: f64| w.value(y) * f_sigma(y), x);
        rw = rw.max((lhs - op.apply_at(w, x) * f.value(x)).abs());
        // |R(f h)(x)| <= ||f||_{P(.|x)} h(x)
        let kernel = op.conditional_kernel(x);
        let lhs = kernel.integrate(&|y: f64| f.value(y) * h.interpolate(y)).abs();
        bound = bound.max(lhs - kernel.sup_abs(&f) * h.values()[j]);
    }

    // int (W f o sigma) g dlambda = int f R(g) dlambda
    let lhs = integrate(&|x: f64| w.value(x) * f_sigma(x) * g.value(x), lambda)?;
    let rhs = integrate(&|x: f64| f.value(x) * op.apply_at(&g, x), lambda)?;
    let duality = (lhs - rhs).abs();

    // d(lambda o sigma^{-1}) / d lambda = R(1/W)
    let pulled = integrate(&f_sigma, lambda)?;
    let pullback = match integrate(
        &|x: f64| op.r_inverse_weight_at(x).map_or(f64::NAN, |r| r * f.value(x)),
        lambda,
    ) {
        Ok(v) => Some((pulled - v).abs()),
        Err(Error::NonFinite(_)) => None,
        Err(e) => return Err(e),
    };
    let invariance = (pulled - integrate(&f, lambda)?).abs();

    // int_{sigma^{-1} E} |W|^2 dlambda = int_E R(W) dlambda
    let e = if trial == 0 {
        IntervalSet::interval(0.0, 0.25)?
    } else {
        let u = rng.random_range(0..sets);
        let v = rng.random_range(u + 1..=sets);
        IntervalSet::interval(u as f64 / sets as f64, v as f64 / sets as f64)?
    };
    let lhs = integrate(
        &|x: f64| e.eval(op.sigma(x)) * w.value(x) * w.value(x),
        lambda,
    )?;
    let rhs = integrate(&|x: f64| e.eval(x) * op.apply_at(w, x), lambda)?;
    let quadratic = (lhs - rhs).abs();

    Ok(Trial {
        pull_out,
        duality,
        rw,
        pullback,
        invariance,
        quadratic,
        bound: bound.max(0.0),
    })
}

/// Number of cells for the random sets `E`: chosen so that `sigma^{-1}(E)`
/// is a union of grid cells when `sigma` is `s x mod 1` with integer `s`.
fn set_grid(op: &TransferOperator) -> usize {
    if let Sigma::Affine { slope, offset } = op.system().sigma() {
        let s = slope.abs().round();
        if *offset == 0.0 && s >= 1.0 && (slope.abs() - s).abs() < 1e-12 {
            let s = s as usize;
            if op.n().is_multiple_of(s) {
                return op.n() / s;
            }
        }
    }
    op.n()
}

/// `lambda` is sigma-invariant iff `R(1/W) = 1` on its support; the check
/// passes when both sides agree.
fn sigma_invariance(op: &TransferOperator, lambda: &Measure, invariance: f64, tol: f64) -> Check {
    let n = op.n();
    let mut points: Vec<f64> = (0..n)
        .filter(|&j| lambda.density()[j] > 0.0 || lambda.density()[(j + n - 1) % n] > 0.0)
        .map(|j| op.node(j))
        .collect();
    points.extend(lambda.atoms().iter().map(|a| a.position));
    let mut excluded = 0usize;
    let mut w2: f64 = 0.0;
    let mut evaluated = 0usize;
    for x in points {
        match op.r_inverse_weight_at(x) {
            Some(v) => {
                evaluated += 1;
                w2 = w2.max((v - 1.0).abs());
            }
            None => excluded += 1,
        }
    }
    if evaluated == 0 {
        return Check::skipped(SIGMA_INVARIANCE, "DOMAIN: 1/W undefined on the support of lambda", tol);
    }
    let invariant = invariance < tol;
    let unit = w2 < tol;
    let detail = format!(
        "invariance residual {invariance:.3e}; |R(1/W) - 1| {w2:.3e} on {evaluated} points ({excluded} excluded where W < eps)"
    );
    let mut check = match (invariant, unit) {
        (true, true) => Check::from_residual(SIGMA_INVARIANCE, invariance.max(w2), tol),
        (false, false) => Check::from_residual(SIGMA_INVARIANCE, 0.0, tol),
        _ => {
            let mut c = Check::from_residual(SIGMA_INVARIANCE, invariance.max(w2), tol);
            c.status = CheckStatus::Fail;
            c
        }
    };
    check.detail = detail;
    check
}

/// `h(x) != 0 => R(W)(x) = 1`, only meaningful when `sup R(W) <= 1`.
fn harmonic_support(op: &TransferOperator, h: &GridFunction, tol: f64) -> Result<Check> {
    let rw = op.rw_multiplier()?;
    let sup = rw.max_abs();
    if sup > 1.0 + tol {
        return Ok(Check::skipped(
            HARMONIC_SUPPORT,
            format!("hypothesis sup R(W) <= 1 fails (sup = {sup:.6})"),
            tol,
        ));
    }
    let h = if h.n() == op.n() { h.clone() } else { h.resample(op.n())? };
    let residual = rw
        .values()
        .iter()
        .zip(h.values())
        .filter(|(_, hv)| hv.abs() > EPS_H)
        .fold(0.0, |m: f64, (r, _)| m.max((r - 1.0).abs()));
    Ok(Check::from_residual(HARMONIC_SUPPORT, residual, tol))
}
