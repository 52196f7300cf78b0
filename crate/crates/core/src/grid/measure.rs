use serde::{Deserialize, Serialize};

use super::function::{circle, circle_distance, PointFn};
use super::system::Branch;
use crate::{Error, Result, EPS_ATOM};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
const GAUSS: [(f64, f64); 4] = [
    (0.5 - 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_8),
    (0.5 - 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_8),
];

/// Average of `f` over `[lo, hi]` by four-point Gauss-Legendre.
pub(crate) fn gauss_mean(f: &(impl PointFn + ?Sized), lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    GAUSS.iter().map(|&(t, g)| g * f.eval(lo + t * w)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Finite positive measure on the circle: a piecewise-constant density over
/// `N` uniform cells plus finitely many atoms.
///
/// The density is stored per unit length, so Lebesgue measure has density
/// exactly `1.0` and affine pushforwards that map cells onto cells stay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    density: Vec<f64>,
    atoms: Vec<Atom>,
}

impl Measure {
    pub fn new(density: Vec<f64>, atoms: Vec<Atom>) -> Result<Self> {
        if density.is_empty() {
            return Err(Error::GridTooSmall(0));
        }
        for &d in &density {
            if !d.is_finite() {
                return Err(Error::NonFinite("cell density"));
            }
            if d < 0.0 {
                return Err(Error::NegativeMass {
                    what: "cell",
                    mass: d,
                });
            }
        }
        for a in &atoms {
            if !(a.mass.is_finite() && a.position.is_finite()) {
                return Err(Error::NonFinite("atom"));
            }
            if a.mass < 0.0 {
                return Err(Error::NegativeMass {
                    what: "atom",
                    mass: a.mass,
                });
            }
        }
        Ok(Self {
            density,
            atoms: normalize_atoms(atoms),
        })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], Vec::new())
    }

    pub fn lebesgue(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], Vec::new())
    }

    /// Unit point mass at `x`.
    pub fn dirac(n: usize, x: f64) -> Result<Self> {
        Self::atomic(n, [(x, 1.0)])
    }

    pub fn atomic(n: usize, atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::new(
            vec![0.0; n],
            atoms
                .into_iter()
                .map(|(position, mass)| Atom { position, mass })
                .collect(),
        )
    }

    pub fn from_cell_masses(masses: &[f64]) -> Result<Self> {
        let n = masses.len() as f64;
        Self::new(masses.iter().map(|m| m * n).collect(), Vec::new())
    }

    pub fn from_density(density: Vec<f64>) -> Result<Self> {
        Self::new(density, Vec::new())
    }

    pub fn with_atoms(mut self, atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut all = self.atoms;
        all.extend(atoms.into_iter().map(|(position, mass)| Atom { position, mass }));
        self.atoms = Vec::new();
        Self::new(self.density, all)
    }

    pub fn n(&self) -> usize {
        self.density.len()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn cell_mass(&self, j: usize) -> f64 {
        self.density[j] / self.n() as f64
    }

    pub fn cell_masses(&self) -> Vec<f64> {
        (0..self.n()).map(|j| self.cell_mass(j)).collect()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((circle(x) * self.n() as f64) as usize).min(self.n() - 1)
    }

    pub fn cells_total(&self) -> f64 {
        self.density.iter().sum::<f64>() / self.n() as f64
    }

    pub fn atoms_total(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn total(&self) -> f64 {
        self.cells_total() + self.atoms_total()
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.density.iter().map(|d| c * d).collect(),
            self.atoms
                .iter()
                .map(|a| Atom {
                    position: a.position,
                    mass: c * a.mass,
                })
                .collect(),
        )
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::EmptyMeasure);
        }
        self.scaled(1.0 / total)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Self::new(
            self.density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| a + b)
                .collect(),
            self.atoms.iter().chain(&other.atoms).copied().collect(),
        )
    }

    /// Cell part only.
    pub fn continuous_part(&self) -> Self {
        Self {
            density: self.density.clone(),
            atoms: Vec::new(),
        }
    }

    pub fn atomic_part(&self) -> Self {
        Self {
            density: vec![0.0; self.n()],
            atoms: self.atoms.clone(),
        }
    }

    /// Folds every atom into the cell containing it.
    pub fn binned(&self) -> Self {
        let n = self.n() as f64;
        let mut density = self.density.clone();
        for a in &self.atoms {
            density[self.cell_of(a.position)] += a.mass * n;
        }
        Self {
            density,
            atoms: Vec::new(),
        }
    }

    /// Index of the atom at `x` (within the merge tolerance), if any.
    pub fn atom_at(&self, x: f64) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| circle_distance(a.position, x) < EPS_ATOM)
    }

    /// Total-variation norm `|self - other|(X)`, cells compared cellwise and
    /// atoms matched by position.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let n = self.n() as f64;
        let cells: f64 = self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs() / n)
            .sum();
        let mut used = vec![false; other.atoms.len()];
        let mut atoms = 0.0;
        for a in &self.atoms {
            match other.atom_at(a.position) {
                Some(k) if !used[k] => {
                    used[k] = true;
                    atoms += (a.mass - other.atoms[k].mass).abs();
                }
                _ => atoms += a.mass,
            }
        }
        atoms += other
            .atoms
            .iter()
            .zip(&used)
            .filter(|(_, u)| !**u)
            .map(|(b, _)| b.mass)
            .sum::<f64>();
        Ok(cells + atoms)
    }

    /// Image measure `self o tau^{-1}`.
    pub fn pushforward(&self, branch: &Branch) -> Result<Self> {
        self.pushforward_weighted(branch, 1.0, None)
    }

    /// `scale * weight * (self o tau^{-1})`; cell mass is split over target
    /// cells by overlap length and the weight is averaged over each overlap.
    pub fn pushforward_weighted(
        &self,
        branch: &Branch,
        scale: f64,
        weight: Option<&dyn PointFn>,
    ) -> Result<Self> {
        let mut out = vec![0.0; self.n()];
        self.pushforward_into(branch, scale, weight, &mut out);
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                let y = branch.apply(a.position);
                let w = weight.map_or(1.0, |w| w.eval(y));
                Atom {
                    position: y,
                    mass: scale * w * a.mass,
                }
            })
            .collect();
        Self::new(out, atoms)
    }

    /// Accumulates the cell part of `scale * weight * (self o tau^{-1})` into
    /// a density buffer of the same grid.
    pub(crate) fn pushforward_into(
        &self,
        branch: &Branch,
        scale: f64,
        weight: Option<&dyn PointFn>,
        out: &mut [f64],
    ) {
        let n = self.n();
        let nf = n as f64;
        for (j, &d) in self.density.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let mut lo = snap(branch.slope * j as f64 + branch.offset * nf);
            let mut hi = snap(branch.slope * (j + 1) as f64 + branch.offset * nf);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            let shift = (lo / nf).floor() * nf;
            lo -= shift;
            hi -= shift;
            let len = hi - lo;
            let first = lo.floor();
            if hi <= first + 1.0 {
                // image inside one cell: the whole mass moves, no rounding
                let k = (first as usize) % n;
                let w = weight.map_or(1.0, |w| gauss_mean(w, lo / nf, hi / nf));
                out[k] += scale * d * w;
                continue;
            }
            let mut k = first;
            while k < hi {
                let a = lo.max(k);
                let b = hi.min(k + 1.0);
                if b > a {
                    let w = weight.map_or(1.0, |w| gauss_mean(w, a / nf, b / nf));
                    out[(k as usize) % n] += scale * d * w * (b - a) / len;
                }
                k += 1.0;
            }
        }
    }

    pub(crate) fn check_grid(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::GridMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(())
    }
}

/// Snaps cell-unit coordinates that are integers up to rounding.
fn snap(y: f64) -> f64 {
    let r = y.round();
    if (y - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        y
    }
}

/// Reduces positions to `[0, 1)`, drops empty atoms and merges atoms closer
/// than [`EPS_ATOM`] on the circle.
fn normalize_atoms(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut atoms: Vec<Atom> = atoms
        .into_iter()
        .filter(|a| a.mass > 0.0)
        .map(|a| Atom {
            position: circle(a.position),
            mass: a.mass,
        })
        .collect();
    atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match merged.last_mut() {
            Some(last) if a.position - last.position < EPS_ATOM => last.mass += a.mass,
            _ => merged.push(a),
        }
    }
    if merged.len() > 1 {
        let last = merged[merged.len() - 1];
        if merged[0].position + 1.0 - last.position < EPS_ATOM {
            merged[0].mass += last.mass;
            merged.pop();
        }
    }
    merged
}

/// `integral of f d(lambda)`: four-point Gauss-Legendre inside each charged
/// cell (equal to the midpoint rule for grid functions, which are linear on
/// cells) plus point evaluation at the atoms.
pub fn integrate(f: &(impl PointFn + ?Sized), lambda: &Measure) -> Result<f64> {
    let n = lambda.n();
    let nf = n as f64;
    let mut acc = 0.0;
    for (j, &d) in lambda.density.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let lo = j as f64 / nf;
        let hi = (j + 1) as f64 / nf;
        acc += d / nf * gauss_mean(f, lo, hi);
    }
    for a in &lambda.atoms {
        acc += a.mass * f.eval(a.position);
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::NonFinite("integrand"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(offset: f64) -> Branch {
        Branch::new(0.5, offset).unwrap()
    }

    #[test]
    fn integrate_examples() {
        let leb = Measure::lebesgue(64).unwrap();
        assert!((integrate(&|_x: f64| 1.0, &leb).unwrap() - 1.0).abs() < 1e-15);
        let leb = Measure::lebesgue(1024).unwrap();
        assert!((integrate(&|x: f64| x, &leb).unwrap() - 0.5).abs() < 1e-6);
        let dirac = Measure::dirac(16, 0.25).unwrap();
        assert_eq!(integrate(&|x: f64| x, &dirac).unwrap(), 0.25);
        assert!(integrate(&|_x: f64| f64::NAN, &dirac).is_err());
    }

    #[test]
    fn gauss_is_exact_for_cubics() {
        let m = gauss_mean(&|x: f64| x * x * x, 0.0, 1.0);
        assert!((m - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pushforward_half_map() {
        let leb = Measure::lebesgue(8).unwrap();
        let img = leb.pushforward(&half(0.0)).unwrap();
        assert_eq!(&img.density()[..4], &[2.0; 4]);
        assert_eq!(&img.density()[4..], &[0.0; 4]);
        assert_eq!(img.total(), 1.0);
    }

    #[test]
    fn pushforward_moves_atoms() {
        let d = Measure::dirac(8, 0.4).unwrap();
        let img = d.pushforward(&half(0.5)).unwrap();
        assert_eq!(img.atoms().len(), 1);
        assert!((img.atoms()[0].position - 0.7).abs() < 1e-15);
    }

    #[test]
    fn cantor_first_step_exact() {
        // 1/2 pushforward by x/3 plus 1/2 by (x+2)/3 has density 3/2 off the middle third
        let n = 27;
        let leb = Measure::lebesgue(n).unwrap();
        let t0 = Branch::new(1.0 / 3.0, 0.0).unwrap();
        let t1 = Branch::new(1.0 / 3.0, 2.0 / 3.0).unwrap();
        let mut out = vec![0.0; n];
        leb.pushforward_into(&t0, 0.5, None, &mut out);
        leb.pushforward_into(&t1, 0.5, None, &mut out);
        for (j, d) in out.iter().enumerate() {
            let expected = if (9..18).contains(&j) { 0.0 } else { 1.5 };
            assert_eq!(*d, expected, "cell {j}");
        }
    }

    #[test]
    fn straddling_image_splits_by_overlap() {
        // cell [0, 1/4) under x/2 + 3/16 lands on [3/16, 5/16), split evenly across cells 0 and 1
        let m = Measure::from_cell_masses(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let img = m.pushforward(&half(3.0 / 16.0)).unwrap();
        let masses = img.cell_masses();
        assert!((masses[0] - 0.5).abs() < 1e-15 && (masses[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn atoms_merge_within_tolerance_and_across_zero() {
        let m = Measure::atomic(4, [(0.3, 0.5), (0.3 + 1e-13, 0.25), (1.0 - 1e-13, 0.1), (0.0, 0.1)]).unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert!((m.total() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn total_variation_matches_atoms() {
        let a = Measure::atomic(4, [(0.1, 0.5), (0.2, 0.5)]).unwrap();
        let b = Measure::atomic(4, [(0.1, 0.25), (0.7, 0.5)]).unwrap();
        assert!((a.total_variation(&b).unwrap() - (0.25 + 0.5 + 0.5)).abs() < 1e-15);
        assert!(Measure::lebesgue(4).unwrap().total_variation(&Measure::lebesgue(8).unwrap()).is_err());
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(Measure::from_density(vec![1.0, -0.5]).is_err());
    }
}
