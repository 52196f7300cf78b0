//! Lebesgue decomposition, square densities `f sqrt(d mu)`, the defect
//! functional measuring how far `lambda R` is from being `lambda`-continuous,
//! and Hutchinson iteration for IFS measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{IfsSystem, Measure};
use crate::transfer::TransferOperator;
use crate::{par, Error, GridFunction, PointFn, Result};

/// `mu = W_lambda . lambda + singular` with `singular` carried by sites
/// (cells or atoms) where `lambda` has no mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    /// `d mu_ac / d lambda` per cell, zero where `lambda` has no cell mass.
    pub density: Vec<f64>,
    /// `(position, mu-mass / lambda-mass)` for every atom of `lambda`.
    pub atom_density: Vec<(f64, f64)>,
    pub absolutely_continuous: Measure,
    pub singular: Measure,
}

impl Decomposition {
    /// `W_lambda` sampled at the nodes (cell `j` is `[j/N, (j+1)/N)`).
    pub fn density_function(&self) -> Result<GridFunction> {
        GridFunction::new(self.density.clone())
    }

    /// `W_lambda . lambda + singular`.
    pub fn reconstruct(&self, lambda: &Measure) -> Result<Measure> {
        let density = lambda
            .density()
            .iter()
            .zip(&self.density)
            .map(|(l, w)| l * w)
            .collect();
        let atoms = lambda.atoms().iter().zip(&self.atom_density).map(|(a, &(_, w))| (a.position, a.mass * w));
        Measure::from_density(density)?
            .with_atoms(atoms)?
            .add(&self.singular)
    }
}

pub fn lebesgue_decompose(mu: &Measure, lambda: &Measure) -> Result<Decomposition> {
    mu.check_grid(lambda)?;
    let n = mu.n();
    let mut density = vec![0.0; n];
    let mut ac = vec![0.0; n];
    let mut sing = vec![0.0; n];
    for j in 0..n {
        let (m, l) = (mu.density()[j], lambda.density()[j]);
        if l > 0.0 {
            density[j] = m / l;
            ac[j] = m;
        } else {
            sing[j] = m;
        }
    }
    let mut atom_density = Vec::with_capacity(lambda.atoms().len());
    let mut ac_atoms = Vec::new();
    let mut used = vec![false; mu.atoms().len()];
    for a in lambda.atoms() {
        let w = match mu.atom_at(a.position) {
            Some(k) => {
                used[k] = true;
                ac_atoms.push((mu.atoms()[k].position, mu.atoms()[k].mass));
                mu.atoms()[k].mass / a.mass
            }
            None => 0.0,
        };
        atom_density.push((a.position, w));
    }
    let sing_atoms = mu
        .atoms()
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(a, _)| (a.position, a.mass));
    Ok(Decomposition {
        density,
        atom_density,
        absolutely_continuous: Measure::from_density(ac)?.with_atoms(ac_atoms)?,
        singular: Measure::from_density(sing)?.with_atoms(sing_atoms)?,
    })
}

/// The class of `(f, mu)` in the space of square densities.
#[derive(Debug, Clone, PartialEq)]
pub struct SigElement {
    pub f: GridFunction,
    pub mu: Measure,
}

impl SigElement {
    pub fn new(f: GridFunction, mu: Measure) -> Result<Self> {
        if f.n() != mu.n() {
            return Err(Error::GridMismatch {
                left: f.n(),
                right: mu.n(),
            });
        }
        let e = Self { f, mu };
        if !e.norm_squared().is_finite() {
            return Err(Error::NonFinite("square norm"));
        }
        Ok(e)
    }

    /// `integral |f|^2 d mu`.
    pub fn norm_squared(&self) -> f64 {
        sig_inner(self, self).unwrap_or(f64::NAN)
    }

    /// `(f, mu) ~ (g, nu)`: the distance in the square-density norm is below `tol`.
    pub fn equivalent(&self, other: &Self, tol: f64) -> Result<bool> {
        let d = self.norm_squared() + other.norm_squared() - 2.0 * sig_inner(self, other)?;
        Ok(d.abs() < tol)
    }
}

/// `integral f1 sqrt(d mu1/d tau) f2 sqrt(d mu2/d tau) d tau`; independent of
/// the dominating `tau`, evaluated site by site as `f1 f2 sqrt(m1 m2)`.
pub fn sig_inner(a: &SigElement, b: &SigElement) -> Result<f64> {
    a.mu.check_grid(&b.mu)?;
    let n = a.mu.n();
    let nf = n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        let (d1, d2) = (a.mu.density()[j], b.mu.density()[j]);
        if d1 > 0.0 && d2 > 0.0 {
            let x = (j as f64 + 0.5) / nf;
            acc += a.f.interpolate(x) * b.f.interpolate(x) * (d1 * d2).sqrt() / nf;
        }
    }
    for x in a.mu.atoms() {
        if let Some(k) = b.mu.atom_at(x.position) {
            let y = &b.mu.atoms()[k];
            acc += a.f.interpolate(x.position) * b.f.interpolate(y.position) * (x.mass * y.mass).sqrt();
        }
    }
    Ok(acc)
}

/// Integrand used by [`defect_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectForm {
    /// `|sqrt(d lambda R) - sqrt(W_lambda) sqrt(d lambda)|^2`: vanishes exactly
    /// when `lambda R << lambda`, equal to the singular mass of `lambda R`.
    #[default]
    SquareDensity,
    /// `|sqrt(d lambda R / d tau) - W_lambda sqrt(d lambda / d tau)|^2 d tau`
    /// with the weight itself (not its square root) multiplying `sqrt(d lambda)`.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefectBreakdown {
    pub square_density: f64,
    pub as_printed: f64,
    /// Total mass of the part of `lambda R` singular to `lambda`.
    pub singular_mass: f64,
}

impl DefectBreakdown {
    pub fn get(&self, form: DefectForm) -> f64 {
        match form {
            DefectForm::SquareDensity => self.square_density,
            DefectForm::AsPrinted => self.as_printed,
        }
    }
}

fn require_probability(lambda: &Measure) -> Result<()> {
    let total = lambda.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotProbability(total));
    }
    Ok(())
}

/// Both integrands for `lambda R` against `lambda`, summed over cells and atoms.
pub fn defect_breakdown(lambda: &Measure, op: &TransferOperator) -> Result<DefectBreakdown> {
    require_probability(lambda)?;
    let lr = op.lambda_r(lambda)?;
    let dec = lebesgue_decompose(&lr, lambda)?;
    let nf = lambda.n() as f64;
    let site = |r: f64, l: f64, w: f64| {
        let sq = (r.sqrt() - w.sqrt() * l.sqrt()).powi(2);
        let printed = (r.sqrt() - w * l.sqrt()).powi(2);
        (sq, printed)
    };
    let (mut sq, mut printed) = (0.0, 0.0);
    for j in 0..lambda.n() {
        let (a, b) = site(lr.density()[j], lambda.density()[j], dec.density[j]);
        sq += a / nf;
        printed += b / nf;
    }
    for (a, &(_, w)) in lambda.atoms().iter().zip(&dec.atom_density) {
        let r = lr.atom_at(a.position).map_or(0.0, |k| lr.atoms()[k].mass);
        let (x, y) = site(r, a.mass, w);
        sq += x;
        printed += y;
    }
    for b in dec.singular.atoms() {
        sq += b.mass;
        printed += b.mass;
    }
    Ok(DefectBreakdown {
        square_density: sq,
        as_printed: printed,
        singular_mass: dec.singular.total(),
    })
}

pub fn defect(lambda: &Measure, op: &TransferOperator) -> Result<f64> {
    defect_with(lambda, op, DefectForm::SquareDensity)
}

pub fn defect_with(lambda: &Measure, op: &TransferOperator, form: DefectForm) -> Result<f64> {
    Ok(defect_breakdown(lambda, op)?.get(form))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub defect: f64,
    pub singular_mass: f64,
}

/// Grid-scale certificate for `lambda R << lambda`.
pub fn l1_membership(lambda: &Measure, op: &TransferOperator, tol: f64) -> Result<Membership> {
    let b = defect_breakdown(lambda, op)?;
    Ok(Membership {
        member: b.square_density < tol && b.singular_mass < tol,
        defect: b.square_density,
        singular_mass: b.singular_mass,
    })
}

/// One step `lambda -> sum_i p_i lambda o tau_i^{-1}`.
pub fn hutchinson_step(system: &IfsSystem, lambda: &Measure) -> Result<Measure> {
    let mut density = vec![0.0; lambda.n()];
    let mut atoms = Vec::with_capacity(lambda.atoms().len() * system.branch_count());
    for (b, &p) in system.branches().iter().zip(system.probabilities()) {
        lambda.pushforward_into(b, p, None, &mut density);
        atoms.extend(lambda.atoms().iter().map(|a| (b.apply(a.position), p * a.mass)));
    }
    Measure::from_density(density)?.with_atoms(atoms)
}

pub fn hutchinson_iterate(system: &IfsSystem, lambda0: &Measure, steps: usize) -> Result<Measure> {
    let mut lambda = lambda0.clone();
    for _ in 0..steps {
        lambda = hutchinson_step(system, &lambda)?;
    }
    Ok(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Measure,
    pub defect: f64,
    pub start: usize,
    /// Defects of the accepted (strictly improving) iterates of the winning start.
    pub history: Vec<f64>,
}

/// Above this many atoms a search iterate is folded into its cells.
const SEARCH_ATOMS_MAX: usize = 1024;

/// Heuristic minimisation of the defect over probability measures: from each
/// start, alternate a Hutchinson step with `lambda <- ac(lambda R) / mass`.
pub fn defect_search(op: &TransferOperator, starts: &[Measure], steps: usize) -> Result<SearchResult> {
    if starts.is_empty() {
        return Err(Error::InvalidArgument("defect search needs at least one start".into()));
    }
    let runs = par::map_indexed(starts.len(), |i| search_from(op, &starts[i], steps, i));
    let mut best: Option<SearchResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.defect < b.defect) {
            best = Some(run);
        }
    }
    best.ok_or(Error::EmptyMeasure)
}

fn search_from(op: &TransferOperator, start: &Measure, steps: usize, index: usize) -> Result<SearchResult> {
    let mut lambda = start.normalized()?;
    let mut best = lambda.clone();
    let mut best_defect = defect(&lambda, op)?;
    let mut history = vec![best_defect];
    for _ in 0..steps {
        if best_defect == 0.0 {
            break;
        }
        lambda = hutchinson_step(op.system(), &lambda)?.normalized()?;
        if lambda.atoms().len() > SEARCH_ATOMS_MAX {
            lambda = lambda.binned();
        }
        let ac = op.rn_derivative(&lambda)?.absolutely_continuous;
        if ac.total() > 0.0 {
            lambda = ac.normalized()?;
        }
        let d = defect(&lambda, op)?;
        if d < best_defect {
            best_defect = d;
            best = lambda.clone();
            history.push(d);
        }
    }
    Ok(SearchResult {
        best,
        defect: best_defect,
        start: index,
        history,
    })
}

/// Random positive cell densities, one ChaCha stream per start.
pub fn random_starts(count: usize, n: usize, seed: u64) -> Result<Vec<Measure>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let masses: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            Measure::from_cell_masses(&masses)?.normalized()
        })
        .collect()
}

/// Plot helper: `(x, W_lambda)` at cell midpoints.
pub fn density_samples(dec: &Decomposition) -> Vec<(f64, f64)> {
    let nf = dec.density.len() as f64;
    dec.density
        .iter()
        .enumerate()
        .map(|(j, &w)| ((j as f64 + 0.5) / nf, w))
        .collect()
}

impl PointFn for Decomposition {
    fn eval(&self, x: f64) -> f64 {
        let n = self.density.len();
        let j = ((crate::circle(x) * n as f64) as usize).min(n - 1);
        self.density[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Sigma, WeightExpr};
    use approx::assert_abs_diff_eq;

    fn op(system: IfsSystem, n: usize) -> TransferOperator {
        TransferOperator::new(system, n).unwrap()
    }

    fn sys_a(n: usize) -> TransferOperator {
        op(IfsSystem::doubling(WeightExpr::constant(1.0)).unwrap(), n)
    }

    fn sys_b(n: usize) -> TransferOperator {
        op(IfsSystem::doubling(WeightExpr::haar()).unwrap(), n)
    }

    fn sys_d(n: usize) -> TransferOperator {
        op(IfsSystem::cantor(WeightExpr::constant(1.0)).unwrap(), n)
    }

    #[test]
    fn decompose_examples() {
        let leb = Measure::lebesgue(8).unwrap();
        let mu = Measure::from_density(vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let d = lebesgue_decompose(&mu, &leb).unwrap();
        assert_eq!(d.density, vec![2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(d.singular.total(), 0.0);

        let d = lebesgue_decompose(&Measure::dirac(8, 0.5).unwrap(), &leb).unwrap();
        assert!(d.density.iter().all(|w| *w == 0.0));
        assert_eq!(d.singular, Measure::dirac(8, 0.5).unwrap());

        let mu = Measure::from_density(vec![0.5; 8]).unwrap().with_atoms([(0.0, 0.5)]).unwrap();
        let d = lebesgue_decompose(&mu, &leb).unwrap();
        assert!(d.density.iter().all(|w| *w == 0.5));
        assert_eq!(d.singular.atoms(), &[crate::Atom { position: 0.0, mass: 0.5 }]);
        assert!(d.reconstruct(&leb).unwrap().total_variation(&mu).unwrap() < 1e-12);
    }

    #[test]
    fn inner_product_examples() {
        let n = 16;
        let one = GridFunction::constant(n, 1.0).unwrap();
        let leb = SigElement::new(one.clone(), Measure::lebesgue(n).unwrap()).unwrap();
        let dirac = SigElement::new(one.clone(), Measure::dirac(n, 0.0).unwrap()).unwrap();
        let four = SigElement::new(one, Measure::lebesgue(n).unwrap().scaled(4.0).unwrap()).unwrap();
        assert_abs_diff_eq!(sig_inner(&leb, &leb).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(sig_inner(&leb, &dirac).unwrap(), 0.0);
        assert_abs_diff_eq!(sig_inner(&leb, &four).unwrap(), 2.0, epsilon = 1e-15);
        assert!(!leb.equivalent(&four, 1e-9).unwrap());
        let two = SigElement::new(GridFunction::constant(n, 2.0).unwrap(), Measure::lebesgue(n).unwrap()).unwrap();
        assert!(two.equivalent(&four, 1e-12).unwrap());
    }

    #[test]
    fn defect_vanishes_for_lebesgue() {
        for o in [sys_a(256), sys_b(256), sys_d(243)] {
            let leb = Measure::lebesgue(o.n()).unwrap();
            assert!(defect(&leb, &o).unwrap() < 1e-10);
            assert!(l1_membership(&leb, &o, 1e-8).unwrap().member);
        }
    }

    #[test]
    fn dirac_at_zero_under_doubling() {
        let o = sys_a(64);
        let b = defect_breakdown(&Measure::dirac(64, 0.0).unwrap(), &o).unwrap();
        let closed = 0.5 + 0.5 * (1.0 - 0.5f64.sqrt()).powi(2);
        assert_abs_diff_eq!(b.as_printed, closed, epsilon = 1e-15);
        assert_abs_diff_eq!(b.square_density, 0.5, epsilon = 1e-15);
        assert_eq!(b.singular_mass, 0.5);
        assert!(!l1_membership(&Measure::dirac(64, 0.0).unwrap(), &o, 1e-8).unwrap().member);
    }

    #[test]
    fn defect_needs_probability() {
        let leb = Measure::lebesgue(8).unwrap().scaled(2.0).unwrap();
        assert_eq!(defect(&leb, &sys_a(8)), Err(Error::NotProbability(2.0)));
    }

    #[test]
    fn hutchinson_fixed_point_and_cantor_masses() {
        let a = sys_a(64);
        let leb = Measure::lebesgue(64).unwrap();
        assert_eq!(hutchinson_iterate(a.system(), &leb, 5).unwrap(), leb);

        let k = 4;
        let n = 3usize.pow(k);
        let d = sys_d(n);
        let out = hutchinson_iterate(d.system(), &Measure::lebesgue(n).unwrap(), k as usize).unwrap();
        let masses = out.cell_masses();
        let mut cantor = 0;
        for (j, m) in masses.iter().enumerate() {
            let mut t = j;
            let in_set = (0..k).all(|_| {
                let digit = t % 3;
                t /= 3;
                digit != 1
            });
            if in_set {
                cantor += 1;
                assert_eq!(*m, 0.5f64.powi(k as i32), "cell {j}");
            } else {
                assert_eq!(*m, 0.0, "cell {j}");
            }
        }
        assert_eq!(cantor, 1 << k);
    }

    #[test]
    fn hutchinson_from_dirac_approaches_lebesgue() {
        let a = sys_a(256);
        let out = hutchinson_iterate(a.system(), &Measure::dirac(256, 0.3).unwrap(), 12).unwrap();
        assert_eq!(out.atoms().len(), 4096);
        assert_abs_diff_eq!(out.total(), 1.0, epsilon = 1e-12);
        let tv = out.binned().total_variation(&Measure::lebesgue(256).unwrap()).unwrap();
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn search_finds_known_zeros() {
        for o in [sys_b(64), sys_d(81)] {
            let starts = random_starts(3, o.n(), 7).unwrap();
            let r = defect_search(&o, &starts, 50).unwrap();
            assert!(r.defect < 1e-6);
        }
    }

    #[test]
    fn search_on_single_contraction_is_monotone() {
        let sys = IfsSystem::new(
            vec![Branch::new(0.5, 0.0).unwrap()],
            vec![1.0],
            WeightExpr::constant(1.0),
            Sigma::affine(2.0, 0.0),
        )
        .unwrap();
        let o = op(sys, 32);
        let r = defect_search(&o, &[Measure::dirac(32, 0.7).unwrap()], 60).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(r.history[0], 1.0);
        assert!(r.best.atoms()[0].position < 1e-11);
    }
}
