//! Pass/fail records shared by the verification routines.

use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
}

/// One named identity check: its worst residual against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn from_residual(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let status = if residual.is_finite() && residual < tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.into(),
            status,
            residual,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::Skipped(reason.into()),
            residual: f64::NAN,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, CheckStatus::Skipped(_))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            CheckStatus::Pass => write!(f, "PASS {} ({:.3e} < {:.1e})", self.name, self.residual, self.tolerance),
            CheckStatus::Fail => write!(f, "FAIL {} ({:.3e} >= {:.1e})", self.name, self.residual, self.tolerance),
            CheckStatus::Skipped(r) => write!(f, "SKIPPED {} ({r})", self.name),
        }
    }
}
