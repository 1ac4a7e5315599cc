//! Run configuration: a JSON document describing the problem instance, the
//! solver settings, and the starting point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Vector;
use crate::market::{CostVariant, DemandCurve, Firm, MarketModel};
use crate::reform::PhiFunction;
use crate::solver::{Method, SolverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which bundled problem family the config describes. `Market` instances
/// carry their own parameters; the other two are fixed demonstration
/// systems for the convergence-order tooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    #[default]
    Market,
    ScalarQuad,
    Smooth2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_reg")]
    pub reg_t: f64,
    #[serde(default = "default_reg")]
    pub reg_lambda: f64,
    #[serde(default = "default_reg")]
    pub reg_mu: f64,
    #[serde(default = "default_reg")]
    pub reg_eta: f64,
    #[serde(default)]
    pub method: Method,
}

fn default_tol() -> f64 {
    1e-7
}
fn default_max_iter() -> usize {
    50
}
fn default_reg() -> f64 {
    1e-3
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            tol: default_tol(),
            max_iter: default_max_iter(),
            reg_t: default_reg(),
            reg_lambda: default_reg(),
            reg_mu: default_reg(),
            reg_eta: default_reg(),
            method: Method::default(),
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            reg_t: self.reg_t,
            reg_lambda: self.reg_lambda,
            reg_mu: self.reg_mu,
            reg_eta: self.reg_eta,
            method: self.method,
        }
    }
}

/// Top-level run configuration. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemKind,
    #[serde(default)]
    pub firms: Vec<Firm>,
    #[serde(default)]
    pub demand: Option<DemandCurve>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub phi: PhiFunction,
    #[serde(default)]
    pub cost_variant: CostVariant,
    pub initial_point: Vec<f64>,
}

impl std::str::FromStr for RunConfig {
    type Err = ConfigError;

    /// Parses and validates a JSON configuration document.
    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.solver
            .to_solver_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("solver: {e}")))?;
        if self.initial_point.is_empty() {
            return Err(ConfigError::Invalid(
                "initial_point: must not be empty".into(),
            ));
        }
        if self.initial_point.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::Invalid(
                "initial_point: entries must be finite".into(),
            ));
        }
        match self.problem {
            ProblemKind::Market => {
                if self.firms.is_empty() {
                    return Err(ConfigError::Invalid(
                        "firms: at least one firm is required".into(),
                    ));
                }
                for (i, firm) in self.firms.iter().enumerate() {
                    firm.validate()
                        .map_err(|e| ConfigError::Invalid(format!("firms[{i}]: {e}")))?;
                }
                let demand = self.demand.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("demand: required for market problems".into())
                })?;
                demand
                    .validate()
                    .map_err(|e| ConfigError::Invalid(format!("demand: {e}")))?;
                if self.initial_point.len() != self.firms.len() {
                    return Err(ConfigError::Invalid(format!(
                        "initial_point: dimension {} does not match firm count {}",
                        self.initial_point.len(),
                        self.firms.len()
                    )));
                }
            }
            ProblemKind::ScalarQuad => {
                if self.initial_point.len() != 1 {
                    return Err(ConfigError::Invalid(
                        "initial_point: scalar_quad is one-dimensional".into(),
                    ));
                }
            }
            ProblemKind::Smooth2d => {
                if self.initial_point.len() != 2 {
                    return Err(ConfigError::Invalid(
                        "initial_point: smooth2d is two-dimensional".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Builds the market model described by a `problem = "market"` config.
    pub fn build_market(&self) -> Result<MarketModel, ConfigError> {
        debug_assert_eq!(self.problem, ProblemKind::Market);
        let demand = self
            .demand
            .ok_or_else(|| ConfigError::Invalid("demand: required".into()))?;
        MarketModel::new(self.firms.clone(), demand, self.cost_variant)
            .map_err(ConfigError::Invalid)
    }

    pub fn initial_vector(&self) -> Vector {
        Vector::new(self.initial_point.clone()).expect("validated finite entries")
    }

    /// Emits the normalized JSON form: all defaults made explicit, so a
    /// re-parse reproduces an identical `RunConfig`.
    pub fn to_normalized_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable config")
    }
}
