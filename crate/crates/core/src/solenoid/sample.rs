use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CylinderSpec, PathMeasure, SolPath};
use crate::{par, Error, Result, EPS_H};

/// Exact `P_x(C) / h(x)` against the fraction of sampled paths in `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderComparison {
    pub exact: f64,
    pub empirical: f64,
    /// Binomial standard error `sqrt(p (1 - p) / n)` at the exact `p`.
    pub std_error: f64,
    pub paths: usize,
}

impl CylinderComparison {
    /// `|empirical - exact| <= k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        (self.empirical - self.exact).abs() <= k * self.std_error + 1e-12
    }

    pub fn z_score(&self) -> f64 {
        let d = self.empirical - self.exact;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

pub fn empirical_frequency(paths: &[SolPath], spec: &CylinderSpec) -> f64 {
    if paths.is_empty() {
        return f64::NAN;
    }
    paths.iter().filter(|p| spec.contains(p)).count() as f64 / paths.len() as f64
}

fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Cumulative masses of the cells, then the atoms, of `lambda`.
struct BaseSampler {
    cumulative: Vec<f64>,
    n: usize,
    atoms: Vec<f64>,
}

impl BaseSampler {
    fn new(pm: &PathMeasure) -> Result<Self> {
        let lambda = pm.lambda();
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(lambda.n() + lambda.atoms().len());
        for j in 0..lambda.n() {
            acc += lambda.cell_mass(j);
            cumulative.push(acc);
        }
        for a in lambda.atoms() {
            acc += a.mass;
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        Ok(Self {
            cumulative,
            n: lambda.n(),
            atoms: lambda.atoms().iter().map(|a| a.position).collect(),
        })
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        if k < self.n {
            (k as f64 + rng.random::<f64>()) / self.n as f64
        } else {
            self.atoms[k - self.n]
        }
    }
}

impl PathMeasure {
    /// One path of `P_x / h(x)`: digit `i` is drawn with probability
    /// `p_i W(tau_i y) h(tau_i y) / h(y)`, renormalised.
    pub fn sample_path(&self, x: f64, depth: usize, rng: &mut impl Rng) -> Result<SolPath> {
        let system = self.op().system();
        let h = self.h();
        let mut digits = Vec::with_capacity(depth);
        let mut y = crate::circle(x);
        let mut weights = vec![0.0; system.branch_count()];
        for _ in 0..depth {
            let hy = h.interpolate(y);
            if !(hy > EPS_H) {
                return Err(Error::DegenerateConditioning { x: y, h: hy });
            }
            let mut total = 0.0;
            for (k, (z, m)) in self.op().kernel_atoms(y).enumerate() {
                let w = (m * h.interpolate(z)).max(0.0);
                weights[k] = w;
                total += w;
            }
            if !(total > 0.0) {
                return Err(Error::DegenerateConditioning { x: y, h: hy });
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (k, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(k);
                    acc += w;
                    if u < acc {
                        break;
                    }
                }
            }
            let k = pick.expect("positive total");
            digits.push(k);
            y = system.branches()[k].apply(y);
        }
        SolPath::new(system, x, digits)
    }

    /// `count` paths from `x`, path `k` drawn from ChaCha stream `k` of `seed`.
    pub fn sample_paths(&self, x: f64, depth: usize, count: usize, seed: u64) -> Result<Vec<SolPath>> {
        par::map_indexed(count, |k| self.sample_path(x, depth, &mut stream(seed, k)))
            .into_iter()
            .collect()
    }

    /// Bases drawn from `lambda`, each path carrying the weight `h(x_0)`, so
    /// that averages of `weight * psi` estimate `integral psi dP`.
    pub fn sample_weighted(&self, depth: usize, count: usize, seed: u64) -> Result<Vec<(SolPath, f64)>> {
        if count == 0 {
            return Err(Error::InvalidArgument("no sample paths".into()));
        }
        let bases = BaseSampler::new(self)?;
        par::map_indexed(count, |k| {
            let mut rng = stream(seed, k);
            let x = bases.draw(&mut rng);
            let hx = self.h().interpolate(x);
            if hx <= EPS_H {
                return Ok((SolPath::new(self.op().system(), x, vec![])?, 0.0));
            }
            Ok((self.sample_path(x, depth, &mut rng)?, hx))
        })
        .into_iter()
        .collect()
    }

    pub fn compare_cylinder(
        &self,
        x: f64,
        spec: &CylinderSpec,
        paths: &[SolPath],
    ) -> Result<CylinderComparison> {
        let hx = self.h().interpolate(x);
        if hx <= EPS_H {
            return Err(Error::DegenerateConditioning { x, h: hx });
        }
        let p = self.cylinder_mass(x, spec)? / hx;
        let n = paths.len();
        Ok(CylinderComparison {
            exact: p,
            empirical: empirical_frequency(paths, spec),
            std_error: (p * (1.0 - p)).max(0.0).sqrt() / (n as f64).sqrt(),
            paths: n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFunction, IfsSystem, Measure, WeightExpr};
    use crate::transfer::TransferOperator;

    fn pm(weight: WeightExpr) -> PathMeasure {
        let n = 64;
        let op = TransferOperator::new(IfsSystem::doubling(weight).unwrap(), n).unwrap();
        PathMeasure::new(op, GridFunction::constant(n, 1.0).unwrap(), Measure::lebesgue(n).unwrap()).unwrap()
    }

    #[test]
    fn unit_weight_digits_are_fair() {
        let a = pm(WeightExpr::constant(1.0));
        let paths = a.sample_paths(0.3, 1, 100_000, 9).unwrap();
        let zeros = paths.iter().filter(|p| p.digits()[0] == 0).count() as f64 / 1e5;
        let sigma = 0.5 / 1e5f64.sqrt();
        assert!((zeros - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn haar_weight_forces_digit_zero_at_origin() {
        let b = pm(WeightExpr::haar());
        let paths = b.sample_paths(0.0, 1, 1000, 2).unwrap();
        assert!(paths.iter().all(|p| p.digits() == [0]));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let b = pm(WeightExpr::haar());
        assert_eq!(b.sample_paths(0.4, 4, 50, 5).unwrap(), b.sample_paths(0.4, 4, 50, 5).unwrap());
    }

    #[test]
    fn empirical_matches_exact_cylinder() {
        let b = pm(WeightExpr::haar());
        let spec: CylinderSpec = "[0,0.3);[0.2,0.8);all".parse().unwrap();
        let paths = b.sample_paths(0.37, 3, 50_000, 4).unwrap();
        let c = b.compare_cylinder(0.37, &spec, &paths).unwrap();
        assert!(c.within(4.0), "{c:?}");
    }
}
