use serde::{Deserialize, Serialize};

use super::function::{circle, GridFunction, PointFn, TrigPoly};
use crate::{Error, Result};

/// The weight `W` of a transfer operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightExpr {
    Constant { value: f64 },
    Trig(TrigPoly),
    Table { values: GridFunction },
}

impl WeightExpr {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn trig(poly: TrigPoly) -> Self {
        Self::Trig(poly)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWeightTable);
        }
        Ok(Self::Table {
            values: GridFunction::new(values)?,
        })
    }

    /// `1 + cos 2 pi x = 2 cos^2(pi x)`, the Haar low-pass weight.
    pub fn haar() -> Self {
        Self::Trig(TrigPoly::new(1.0, vec![1.0], vec![]))
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Trig(p) => p.value(x),
            Self::Table { values } => values.interpolate(x),
        }
    }

    /// Checked evaluation at a point of the circle.
    pub fn eval_weight(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite("weight argument"));
        }
        Ok(self.value(circle(x)))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Ok(match self {
            Self::Constant { value } => Self::Constant { value: c * value },
            Self::Trig(p) => Self::Trig(p.scaled(c)),
            Self::Table { values } => Self::Table {
                values: values.scaled(c)?,
            },
        })
    }

    pub fn is_constant(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// Strict positivity on the offset nodes `(j + 1/2) / n` and
    /// non-negativity (to rounding) on the nodes `j / n`.
    ///
    /// Isolated zeros such as `1 + cos 2 pi x` at `x = 1/2` pass whenever no
    /// offset node hits them, i.e. for even `n`.
    pub fn validate_positive(&self, n: usize) -> Result<()> {
        let nf = n as f64;
        for j in 0..n {
            let x = (j as f64 + 0.5) / nf;
            let v = self.value(x);
            if !(v > 0.0) {
                return Err(Error::WeightNotPositive { x, value: v });
            }
            let x = j as f64 / nf;
            let v = self.value(x);
            if !(v >= -1e-14) {
                return Err(Error::WeightNotPositive { x, value: v });
            }
        }
        Ok(())
    }
}

impl PointFn for WeightExpr {
    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_each_kind() {
        assert_eq!(WeightExpr::constant(1.0).eval_weight(0.3).unwrap(), 1.0);
        let w = WeightExpr::haar();
        assert_eq!(w.eval_weight(0.0).unwrap(), 2.0);
        assert_eq!(w.eval_weight(0.5).unwrap(), 0.0);
        let t = WeightExpr::table(vec![1.0, 3.0]).unwrap();
        assert_eq!(t.eval_weight(0.25).unwrap(), 2.0);
        assert_eq!(WeightExpr::table(vec![]), Err(Error::EmptyWeightTable));
    }

    #[test]
    fn haar_zero_only_caught_when_an_offset_node_hits_it() {
        let w = WeightExpr::haar();
        assert!(w.validate_positive(1024).is_ok());
        // n = 5 puts the offset node (2 + 1/2)/5 exactly on x = 1/2
        match w.validate_positive(5) {
            Err(Error::WeightNotPositive { x, value }) => {
                assert_eq!(x, 0.5);
                assert_eq!(value, 0.0);
            }
            other => panic!("expected a positivity failure, got {other:?}"),
        }
        assert!(WeightExpr::constant(-1.0).validate_positive(4).is_err());
    }

    #[test]
    fn scaling() {
        assert_eq!(WeightExpr::constant(2.0).scaled(0.5).unwrap(), WeightExpr::constant(1.0));
        let s = WeightExpr::haar().scaled(2.0).unwrap();
        assert_eq!(s.value(0.0), 4.0);
    }
}
