use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::function::PointFn;
use crate::{Error, Result};

/// Finite union of disjoint half-open intervals `[a, b)` inside `[0, 1)`,
/// kept sorted and merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut parts = Vec::new();
        for (a, b) in intervals {
            if !(a.is_finite() && b.is_finite()) || a > b || a < 0.0 || b > 1.0 {
                return Err(Error::InvalidInterval(a, b));
            }
            if a < b {
                parts.push((a, b));
            }
        }
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new([(a, b)])
    }

    /// The whole circle.
    pub fn all() -> Self {
        Self {
            intervals: vec![(0.0, 1.0)],
        }
    }

    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
        }
    }

    pub fn is_all(&self) -> bool {
        self.intervals == [(0.0, 1.0)]
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x < b)
    }

    /// Lebesgue measure of the set.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.intervals.iter().chain(&other.intervals).copied())
            .expect("both operands are already valid")
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::new();
        let mut cursor = 0.0;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        Self { intervals: out }
    }

    pub fn intersects_open(&self, lo: f64, hi: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < hi && lo < b)
    }
}

impl PointFn for IntervalSet {
    /// Sharp indicator.
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        if self.is_all() {
            return write!(f, "all");
        }
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(a, b)| format!("[{a},{b})"))
            .collect();
        write!(f, "{}", parts.join("u"))
    }
}

impl FromStr for IntervalSet {
    type Err = Error;

    /// Parses `all`, `{}` or unions such as `[0,0.25)u[0.5,1)` (also `∪` or `+`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") || s == "*" {
            return Ok(Self::all());
        }
        if s == "{}" || s.is_empty() {
            return Ok(Self::empty());
        }
        let bad = || Error::InvalidArgument(format!("cannot parse interval set {s:?}"));
        let normalized = s.replace(['∪', '+', 'U'], "u");
        let mut parts = Vec::new();
        for piece in normalized.split('u') {
            let piece = piece.trim();
            let inner = piece
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(bad)?;
            let (a, b) = inner.split_once(',').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            parts.push((a, b));
        }
        Self::new(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_sorts() {
        let s = IntervalSet::new([(0.5, 0.75), (0.0, 0.25), (0.2, 0.3), (0.75, 0.8)]).unwrap();
        assert_eq!(s.intervals(), &[(0.0, 0.3), (0.5, 0.8)]);
        assert!((s.length() - 0.6).abs() < 1e-15);
        assert!(s.contains(0.0) && !s.contains(0.3) && s.contains(0.79));
    }

    #[test]
    fn complement_and_all() {
        let s = IntervalSet::interval(0.25, 0.5).unwrap();
        assert_eq!(s.complement().intervals(), &[(0.0, 0.25), (0.5, 1.0)]);
        assert!(s.union(&s.complement()).is_all());
    }

    #[test]
    fn parses_text_forms() {
        let s: IntervalSet = "[0,0.25)u[0.5,1)".parse().unwrap();
        assert_eq!(s.intervals(), &[(0.0, 0.25), (0.5, 1.0)]);
        assert!("all".parse::<IntervalSet>().unwrap().is_all());
        assert!("[0.3,0.1)".parse::<IntervalSet>().is_err());
        assert!("0,1".parse::<IntervalSet>().is_err());
        let round: IntervalSet = s.to_string().parse().unwrap();
        assert_eq!(round, s);
    }
}
