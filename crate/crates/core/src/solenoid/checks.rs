use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CylinderFn, Estimate, Mode, PathMeasure, DEPTH_MAX};
use crate::grid::{integrate, GridFunction, IntervalSet, PointFn, TrigPoly};
use crate::{par, Error, Result};

/// Random `psi = (f_0, ..., f_depth)` with trig factors of degree `1..=max_degree`.
pub fn random_cylinder(depth: usize, max_degree: usize, rng: &mut impl Rng) -> CylinderFn {
    let factors = (0..=depth)
        .map(|_| {
            let d = rng.random_range(1..=max_degree.max(1));
            Arc::new(TrigPoly::random(d, rng)) as Arc<dyn PointFn>
        })
        .collect();
    CylinderFn::new(factors).expect("depth + 1 factors")
}

/// `g o Z_0 . (psi o shift)`, where `(psi o shift)(w) = f_0(sigma w_0) f_1(w_0) ... f_m(w_{m-1})`.
fn shifted(pm: &PathMeasure, psi: &CylinderFn, g: Arc<dyn PointFn>) -> CylinderFn {
    let sigma = pm.op().system().sigma().clone();
    let f = psi.factors();
    let f0 = Arc::clone(&f[0]);
    let f1 = f.get(1).cloned();
    let head = move |x: f64| {
        let v = g.eval(x) * f0.eval(sigma.apply(x));
        match &f1 {
            Some(f1) => v * f1.eval(x),
            None => v,
        }
    };
    let mut factors: Vec<Arc<dyn PointFn>> = vec![Arc::new(head)];
    factors.extend(f.iter().skip(2).cloned());
    CylinderFn::new(factors).expect("non-empty")
}

/// `U psi = sqrt(W o Z_0) (psi o shift)`.
pub fn u_apply(pm: &PathMeasure, psi: &CylinderFn) -> CylinderFn {
    let w = pm.op().weight().clone();
    shifted(pm, psi, Arc::new(move |x: f64| w.value(x).max(0.0).sqrt()))
}

/// Signed `E[(W o Z_0)(psi o shift)] - E[psi]` under `P`.
pub fn quasi_invariance_defect(pm: &PathMeasure, psi: &CylinderFn, mode: Mode) -> Result<Estimate> {
    if psi.depth() + 1 > DEPTH_MAX {
        return Err(Error::DepthExceeded {
            depth: psi.depth() + 1,
            max: DEPTH_MAX,
        });
    }
    match mode {
        Mode::Exact => {
            let w = pm.op().weight().clone();
            let lhs = pm.expectation(&shifted(pm, psi, Arc::new(w)), Mode::Exact)?;
            let rhs = pm.expectation(psi, Mode::Exact)?;
            Ok(Estimate::exact(lhs.value - rhs.value))
        }
        Mode::MonteCarlo { paths, seed } => {
            let system = pm.op().system();
            let samples = pm.sample_weighted(psi.depth(), paths, seed)?;
            // coordinates of the shifted path; no branch digit is needed
            let values: Vec<f64> = samples
                .iter()
                .map(|(p, hx)| {
                    if *hx == 0.0 {
                        return 0.0;
                    }
                    let z = p.coordinates();
                    let mut moved = Vec::with_capacity(z.len() + 1);
                    moved.push(system.sigma().apply(z[0]));
                    moved.extend_from_slice(z);
                    let w = system.weight().value(z[0]);
                    hx * (w * psi.eval_path(&moved) - psi.eval_path(z))
                })
                .collect();
            Estimate::from_samples(&values)
        }
    }
}

/// `max |‖U psi‖^2 - ‖psi‖^2|` over `trials` random cylinders of depth `<= max_depth`.
pub fn unitarity_check(pm: &PathMeasure, trials: usize, max_depth: usize, seed: u64) -> Result<f64> {
    let defects = par::map_indexed(trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let depth = rng.random_range(0..=max_depth);
        let psi = random_cylinder(depth, 4, &mut rng);
        let lhs = pm.expectation(&u_apply(pm, &psi).squared(), Mode::Exact)?.value;
        let rhs = pm.expectation(&psi.squared(), Mode::Exact)?.value;
        Ok((lhs - rhs).abs())
    });
    defects
        .into_iter()
        .try_fold(0.0, |m: f64, d: Result<f64>| Ok(m.max(d?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiresReport {
    /// `max |f(Z_n) - (f o sigma)(Z_{n+1})|`.
    pub nesting: f64,
    /// `max |U(f o Z_n) - sqrt(W o sigma^{n-1} o Z_{n-1}) f(Z_{n-1})|`.
    pub shift: f64,
    pub paths: usize,
    pub n_max: usize,
}

/// Nesting `H_n` in `H_{n+1}` and `U(H_n)` in `H_{n-1}` on sampled paths.
pub fn multires_check(pm: &PathMeasure, n_max: usize, paths: usize, seed: u64) -> Result<MultiresReport> {
    if n_max == 0 || n_max + 1 > DEPTH_MAX {
        return Err(Error::InvalidArgument(format!(
            "n_max must be in 1..={}",
            DEPTH_MAX - 1
        )));
    }
    let sigma = pm.op().system().sigma();
    let w = pm.op().weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = TrigPoly::random(rng.random_range(1..=8), &mut rng);
    let samples = pm.sample_weighted(n_max + 1, paths, seed.wrapping_add(1))?;
    let mut nesting: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let cylinders: Vec<CylinderFn> = (1..=n_max)
        .map(|n| u_apply(pm, &CylinderFn::coordinate(n, f.clone())))
        .collect();
    for (p, _) in &samples {
        let z = p.coordinates();
        for n in 0..=n_max {
            nesting = nesting.max((f.value(z[n]) - f.value(sigma.apply(z[n + 1]))).abs());
        }
        for n in 1..=n_max {
            let lhs = cylinders[n - 1].eval_path(z);
            let mut y = z[n - 1];
            for _ in 0..n - 1 {
                y = sigma.apply(y);
            }
            let rhs = w.value(y).max(0.0).sqrt() * f.value(z[n - 1]);
            shift = shift.max((lhs - rhs).abs());
        }
    }
    Ok(MultiresReport {
        nesting,
        shift,
        paths,
        n_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovDeviation {
    /// `P_x(Z_1 in A, Z_2 in B)`.
    pub m1: f64,
    /// `P_x(Z_n in A, Z_{n+1} in B)`.
    pub mn: f64,
    pub difference: f64,
    /// `lambda(A) . integral chi_B h d lambda`.
    pub product_limit: f64,
}

/// `m_k = R^k(chi_A R(chi_B h))(x)` for `k = 1` and `k = n`.
pub fn markov_deviation(
    pm: &PathMeasure,
    a: &IntervalSet,
    b: &IntervalSet,
    x: f64,
    n: usize,
) -> Result<MarkovDeviation> {
    if n < 2 {
        return Err(Error::InvalidArgument("markov deviation needs n >= 2".into()));
    }
    let one = IntervalSet::all();
    let m = |k: usize| {
        let mut factors: Vec<&dyn PointFn> = vec![&one; k - 1];
        factors.push(a);
        factors.push(b);
        pm.nested(x, &factors)
    };
    let m1 = m(1)?;
    let mn = m(n)?;
    let lambda_a = integrate(a, pm.lambda())?;
    let bh = integrate(&|y: f64| b.eval(y) * pm.h().interpolate(y), pm.lambda())?;
    Ok(MarkovDeviation {
        m1,
        mn,
        difference: mn - m1,
        product_limit: lambda_a * bh,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicFromMeasure {
    /// `x -> P_x(Z_0^{-1}(x))` at the nodes.
    pub h: GridFunction,
    /// `max |R h~ - h~|`.
    pub residual: f64,
    /// `max |h~ - h|` against the input.
    pub input_deviation: f64,
    /// `max_x |sum_y P(y | x) P_y(total) - P_x(total)|`.
    pub consistency: f64,
    pub depth: usize,
}

/// Recovers `h` from the total masses of the path measures at `depth`.
pub fn harmonic_from_measure(pm: &PathMeasure, depth: usize) -> Result<HarmonicFromMeasure> {
    let op = pm.op();
    let values = par::map_indexed(op.n(), |j| pm.total_mass(op.node(j), depth))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let h = GridFunction::new(values)?;
    let residual = op.apply_r(&h)?.max_diff(&h)?;
    let input_deviation = h.max_diff(pm.h())?;
    let consistency = par::map_indexed(op.n(), |j| {
        let x = op.node(j);
        let mut acc = 0.0;
        for (y, m) in op.kernel_atoms(x) {
            if m != 0.0 {
                acc += m * pm.total_mass(y, depth)?;
            }
        }
        Ok((acc - h.values()[j]).abs())
    })
    .into_iter()
    .try_fold(0.0, |m: f64, d: Result<f64>| Ok::<f64, Error>(m.max(d?)))?;
    Ok(HarmonicFromMeasure {
        h,
        residual,
        input_deviation,
        consistency,
        depth,
    })
}
