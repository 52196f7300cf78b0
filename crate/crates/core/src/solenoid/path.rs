use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::grid::{circle_distance, IfsSystem, IntervalSet};
use crate::{Error, Result};

/// Finite piece `(x_0, x_1, ..., x_m)` of a backward orbit, `x_j = tau_{i_j}(x_{j-1})`.
///
/// Coordinates are stored, not recomputed, so shifting forward and back is exact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolPath {
    coords: Vec<f64>,
    digits: Vec<usize>,
}

impl SolPath {
    pub fn new(system: &IfsSystem, base: f64, digits: Vec<usize>) -> Result<Self> {
        let branches = system.branches();
        let mut coords = Vec::with_capacity(digits.len() + 1);
        coords.push(crate::circle(base));
        for &d in &digits {
            let b = branches.get(d).ok_or(Error::BranchIndex {
                index: d,
                count: branches.len(),
            })?;
            coords.push(b.apply(*coords.last().unwrap()));
        }
        Ok(Self { coords, digits })
    }

    pub fn base(&self) -> f64 {
        self.coords[0]
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[usize] {
        &self.digits
    }

    /// `(Z_0, ..., Z_m)`.
    pub fn coordinates(&self) -> &[f64] {
        &self.coords
    }

    /// `max_j |sigma(x_{j+1}) - x_j|` on the circle.
    pub fn residual(&self, system: &IfsSystem) -> f64 {
        self.coords
            .windows(2)
            .map(|w| circle_distance(system.sigma().apply(w[1]), w[0]))
            .fold(0.0, f64::max)
    }

    /// `(sigma(x_0), x_0, x_1, ...)`; boundary points take the lowest branch index.
    pub fn shift_forward(&self, system: &IfsSystem) -> Result<Self> {
        let x0 = self.base();
        let i = system
            .branch_containing(x0)
            .ok_or(Error::NotInBranchImage(x0))?;
        let mut coords = Vec::with_capacity(self.coords.len() + 1);
        coords.push(system.sigma().apply(x0));
        coords.extend_from_slice(&self.coords);
        let mut digits = Vec::with_capacity(self.digits.len() + 1);
        digits.push(i);
        digits.extend_from_slice(&self.digits);
        Ok(Self { coords, digits })
    }

    /// `(x_1, x_2, ...)`.
    pub fn shift_back(&self) -> Result<Self> {
        if self.digits.is_empty() {
            return Err(Error::EmptyPath);
        }
        Ok(Self {
            coords: self.coords[1..].to_vec(),
            digits: self.digits[1..].to_vec(),
        })
    }
}

/// Constraints `Z_1 in A_1, ..., Z_m in A_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderSpec {
    pub sets: Vec<IntervalSet>,
}

impl CylinderSpec {
    pub fn new(sets: Vec<IntervalSet>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::InvalidArgument("a cylinder needs at least one set".into()));
        }
        Ok(Self { sets })
    }

    /// `m` unconstrained coordinates.
    pub fn all(depth: usize) -> Result<Self> {
        Self::new(vec![IntervalSet::all(); depth])
    }

    pub fn depth(&self) -> usize {
        self.sets.len()
    }

    pub fn contains(&self, path: &SolPath) -> bool {
        path.depth() >= self.depth()
            && self
                .sets
                .iter()
                .zip(&path.coordinates()[1..])
                .all(|(a, &x)| a.contains(x))
    }

    /// The same constraints followed by `Z_{m+1}` unconstrained.
    pub fn extended(&self) -> Self {
        let mut sets = self.sets.clone();
        sets.push(IntervalSet::all());
        Self { sets }
    }
}

impl fmt::Display for CylinderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.sets.iter().enumerate() {
            if k > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Sets separated by `;`, e.g. `"[0,0.25);all"`.
impl FromStr for CylinderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let sets = s
            .split(';')
            .map(|p| p.trim().parse())
            .collect::<Result<Vec<IntervalSet>>>()?;
        Self::new(sets)
    }
}
