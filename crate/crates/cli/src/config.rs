//! Run configuration: a TOML document with `[system]`, `[weight]`, `[grid]`,
//! `[measure]`, `[solver]` and `[sampler]` sections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use towb::harmonic::HarmonicOptions;
use towb::solenoid::CylinderSpec;
use towb::{Branch, IfsSystem, IntervalSet, Measure, Sigma, TransferOperator, TrigPoly, WeightExpr};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

fn field(field: &'static str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub weight: WeightSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub measure: MeasureSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sampler: SamplerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    /// `[slope, offset]` per branch: `tau(x) = slope * x + offset mod 1`.
    pub branches: Vec<[f64; 2]>,
    pub probabilities: Vec<f64>,
    /// `"inferred"` or `"affine"` (with `sigma_slope`, `sigma_offset`).
    #[serde(default = "inferred")]
    pub sigma: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_offset: Option<f64>,
}

fn inferred() -> String {
    "inferred".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    /// `constant`, `haar`, `trig` or `table`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    /// `lebesgue`, `dirac`, `atoms` or `density` (cell masses, renormalised).
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            kind: "lebesgue".into(),
            point: None,
            atoms: None,
            masses: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Stopping tolerance of the power iteration.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Residual tolerance for the operator identities.
    pub identity_tol: f64,
    pub trials: usize,
    pub max_degree: usize,
    /// Tolerance for harmonic residuals and path-space identities.
    pub check_tol: f64,
    /// Rescale `W` by `1/rho` before building path measures.
    pub normalize_weight: bool,
    /// `h` for path commands: `solve` (power iteration) or `unit` (`h = 1`,
    /// checked against `check_tol`).
    pub harmonic: String,
    pub k_max: u32,
    pub n_max: i64,
    pub cascade_tol: f64,
    /// Hutchinson steps for `measure`.
    pub steps: usize,
    pub defect_tol: f64,
    pub search_starts: usize,
    pub search_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            seed: 0,
            identity_tol: 1e-8,
            trials: 100,
            max_degree: 8,
            check_tol: 1e-10,
            normalize_weight: false,
            harmonic: "solve".into(),
            k_max: 4,
            n_max: 8,
            cascade_tol: 1e-6,
            steps: 12,
            defect_tol: 1e-8,
            search_starts: 4,
            search_steps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub seed: u64,
    pub paths: usize,
    pub depth: usize,
    /// Base point for `cylinder`, `sample` and `markov`.
    pub x: f64,
    /// Cylinder constraints, `;`-separated interval sets.
    pub sets: String,
    /// Random cylinder functions for `quasi`.
    pub trials: usize,
    pub n_max: usize,
    pub markov_a: String,
    pub markov_b: String,
    pub markov_n: usize,
    pub bins: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: 100_000,
            depth: 3,
            x: 0.3,
            sets: "[0,0.25)".into(),
            trials: 20,
            n_max: 4,
            markov_a: "[0,0.25)".into(),
            markov_b: "[0,0.5)".into(),
            markov_n: 10,
            bins: 64,
        }
    }
}

/// Everything a command needs, built from a validated [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub op: TransferOperator,
    pub lambda: Measure,
    pub spec: CylinderSpec,
    pub markov_a: IntervalSet,
    pub markov_b: IntervalSet,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

impl RunConfig {
    /// The TOML text that parses back to `self`.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.setup().map(|_| ())
    }

    pub fn harmonic_options(&self) -> HarmonicOptions {
        HarmonicOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            seed: self.solver.seed,
        }
    }

    pub fn system(&self) -> Result<IfsSystem, ConfigError> {
        let s = &self.system;
        let branches = s
            .branches
            .iter()
            .map(|&[a, b]| Branch::new(a, b))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| field("system.branches", e))?;
        let sigma = match s.sigma.as_str() {
            "inferred" => Sigma::inferred(&branches).map_err(|e| field("system.sigma", e))?,
            "affine" => Sigma::affine(
                s.sigma_slope
                    .ok_or_else(|| field("system.sigma_slope", "required when sigma = \"affine\""))?,
                s.sigma_offset.unwrap_or(0.0),
            ),
            other => {
                return Err(field(
                    "system.sigma",
                    format!("expected \"inferred\" or \"affine\", got {other:?}"),
                ))
            }
        };
        IfsSystem::new(branches, s.probabilities.clone(), self.weight()?, sigma).map_err(|e| {
            let msg = e.to_string();
            let name = if msg.contains("probabilit") {
                "system.probabilities"
            } else if msg.contains("sigma") {
                "system.sigma"
            } else {
                "system.branches"
            };
            field(name, msg)
        })
    }

    pub fn weight(&self) -> Result<WeightExpr, ConfigError> {
        let w = &self.weight;
        let need = |v: Option<f64>, name: &'static str| v.ok_or_else(|| field(name, "required for this weight kind"));
        match w.kind.as_str() {
            "constant" => Ok(WeightExpr::constant(need(w.value, "weight.value")?)),
            "haar" => Ok(WeightExpr::haar()),
            "trig" => Ok(WeightExpr::trig(TrigPoly::new(
                need(w.constant, "weight.constant")?,
                w.cos.clone().unwrap_or_default(),
                w.sin.clone().unwrap_or_default(),
            ))),
            "table" => WeightExpr::table(w.values.clone().unwrap_or_default())
                .map_err(|e| field("weight.values", e)),
            other => Err(field(
                "weight.kind",
                format!("expected constant, haar, trig or table, got {other:?}"),
            )),
        }
    }

    pub fn measure(&self) -> Result<Measure, ConfigError> {
        let n = self.grid.n;
        let m = &self.measure;
        let built = match m.kind.as_str() {
            "lebesgue" => Measure::lebesgue(n),
            "dirac" => Measure::dirac(
                n,
                m.point.ok_or_else(|| field("measure.point", "required for a dirac measure"))?,
            ),
            "atoms" => Measure::atomic(
                n,
                m.atoms
                    .clone()
                    .ok_or_else(|| field("measure.atoms", "required for an atomic measure"))?
                    .into_iter()
                    .map(|[x, w]| (x, w)),
            ),
            "density" => {
                let masses = m
                    .masses
                    .clone()
                    .ok_or_else(|| field("measure.masses", "required for a density measure"))?;
                if masses.len() != n {
                    return Err(field(
                        "measure.masses",
                        format!("{} cell masses for a grid of {n}", masses.len()),
                    ));
                }
                Measure::from_cell_masses(&masses)
            }
            other => {
                return Err(field(
                    "measure.kind",
                    format!("expected lebesgue, dirac, atoms or density, got {other:?}"),
                ))
            }
        }
        .map_err(|e| field("measure", e))?;
        built.normalized().map_err(|e| field("measure", e))
    }

    pub fn setup(&self) -> Result<Setup, ConfigError> {
        let positive = |v: f64, name: &'static str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(name, format!("must be positive, got {v}")))
            }
        };
        positive(self.solver.tol, "solver.tol")?;
        positive(self.solver.identity_tol, "solver.identity_tol")?;
        positive(self.solver.check_tol, "solver.check_tol")?;
        positive(self.solver.cascade_tol, "solver.cascade_tol")?;
        positive(self.solver.defect_tol, "solver.defect_tol")?;
        if !matches!(self.solver.harmonic.as_str(), "solve" | "unit") {
            return Err(field(
                "solver.harmonic",
                format!("expected \"solve\" or \"unit\", got {:?}", self.solver.harmonic),
            ));
        }
        if self.grid.n < 2 {
            return Err(field("grid.n", format!("need at least 2 nodes, got {}", self.grid.n)));
        }
        if !(0.0..1.0).contains(&self.sampler.x) {
            return Err(field("sampler.x", format!("must lie in [0, 1), got {}", self.sampler.x)));
        }
        let system = self.system()?;
        let op = TransferOperator::new(system, self.grid.n).map_err(|e| field("weight", e))?;
        let spec = self
            .sampler
            .sets
            .parse::<CylinderSpec>()
            .map_err(|e| field("sampler.sets", e))?;
        let set = |s: &str, name| s.parse::<IntervalSet>().map_err(|e| field(name, e));
        Ok(Setup {
            op,
            lambda: self.measure()?,
            spec,
            markov_a: set(&self.sampler.markov_a, "sampler.markov_a")?,
            markov_b: set(&self.sampler.markov_b, "sampler.markov_b")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYS_B: &str = include_str!("../fixtures/sys-b.toml");

    #[test]
    fn fixtures_parse() {
        for text in [
            include_str!("../fixtures/sys-a.toml"),
            SYS_B,
            include_str!("../fixtures/sys-c.toml"),
            include_str!("../fixtures/sys-d.toml"),
        ] {
            let c = parse_config(text).unwrap();
            assert_eq!(parse_config(&c.emit()).unwrap(), c);
        }
    }

    #[test]
    fn probability_sum_is_checked() {
        let text = SYS_B.replace("probabilities = [0.5, 0.5]", "probabilities = [0.6, 0.6]");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "system.probabilities", .. }));
        assert!(err.to_string().contains("probabilities must sum to 1"));
    }

    #[test]
    fn wrong_sigma_is_rejected() {
        let text = SYS_B.replace("sigma_slope = 2.0", "sigma_slope = 3.0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sigma is not a left inverse of branches"), "{err}");
    }

    #[test]
    fn unknown_keys_and_syntax_errors() {
        let err = parse_config(&SYS_B.replace("[grid]", "[grid]\nsize = 3")).unwrap_err();
        assert!(matches!(err, ConfigError::Syntax(ref m) if m.contains("size")));
        let err = parse_config("[system\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax(ref m) if m.contains("line 1")), "{err}");
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let err = parse_config(&SYS_B.replace("[solver]", "[solver]\ntol = 0.0")).unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "solver.tol", .. }));
    }
}
