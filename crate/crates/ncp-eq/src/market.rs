//! Cournot oligopoly market model: firm cost functions, inverse demand, the
//! induced complementarity map `f`, its analytic Jacobian, and the
//! equilibrium (KKT) verification oracle.
//!
//! For firm `i` with supply `z_i` and total supply `Q = sum(z)`, the
//! complementarity map is
//!
//! ```text
//! f_i(z) = c_i'(z_i) - P(Q) - z_i * P'(Q)
//! ```
//!
//! A nonnegative `z` with `f(z) >= 0` and `z_i f_i(z) = 0` for all `i` is a
//! Nash equilibrium of the oligopoly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};

/// Below this floor, the marginal-cost slope is evaluated at the floor
/// instead of the supplied output level (the slope diverges as `q -> 0`
/// when `beta > 1`).
pub const OUTPUT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("total supply must be positive, got {0}")]
    NonPositiveTotalSupply(f64),
    #[error("negative supply {value} for firm {index}")]
    NegativeSupply { index: usize, value: f64 },
    #[error("output level must be positive, got {0}")]
    NonPositiveOutput(f64),
    #[error("output level must be nonnegative, got {0}")]
    NegativeOutput(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("{0}")]
    OutOfDomain(String),
}

/// Which reading of the total-cost function the model uses.
///
/// `AsWritten` differentiates the cost function with the capacity parameter
/// raised to the positive exponent `1/beta`; `ClassicMurphy` uses the
/// negative exponent form of the classical Murphy-Sherali-Soyster instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    #[default]
    AsWritten,
    ClassicMurphy,
}

/// Cost parameters for one producer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Firm {
    /// Linear marginal-cost coefficient, `>= 0`.
    pub n: f64,
    /// Capacity-like scale parameter, `> 0`.
    #[serde(rename = "L")]
    pub l: f64,
    /// Cost-curvature exponent, `> 0`.
    pub beta: f64,
}

impl Firm {
    pub fn validate(&self) -> Result<(), String> {
        if !self.n.is_finite() || self.n < 0.0 {
            return Err(format!("firm parameter n must be finite and >= 0, got {}", self.n));
        }
        if !self.l.is_finite() || self.l <= 0.0 {
            return Err(format!("firm parameter L must be finite and > 0, got {}", self.l));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(format!(
                "firm parameter beta must be finite and > 0, got {}",
                self.beta
            ));
        }
        Ok(())
    }

    /// Marginal cost `c'(q)` for output level `q >= 0`.
    pub fn marginal_cost(&self, q: f64, variant: CostVariant) -> Result<f64, DomainError> {
        if q < 0.0 {
            return Err(DomainError::NegativeOutput(q));
        }
        let ib = 1.0 / self.beta;
        let term = match variant {
            CostVariant::AsWritten => self.l.powf(ib) * q.powf(ib),
            CostVariant::ClassicMurphy => (q / self.l).powf(ib),
        };
        Ok(self.n + term)
    }

    /// Slope of the marginal cost, `c''(q)`, for `q > 0`.
    pub fn marginal_cost_slope(&self, q: f64, variant: CostVariant) -> Result<f64, DomainError> {
        if q <= 0.0 {
            return Err(DomainError::NonPositiveOutput(q));
        }
        let ib = 1.0 / self.beta;
        let coeff = match variant {
            CostVariant::AsWritten => ib * self.l.powf(ib),
            CostVariant::ClassicMurphy => ib * self.l.powf(-ib),
        };
        Ok(coeff * q.powf(ib - 1.0))
    }
}

/// Constant-elasticity inverse demand `P(Q) = scale^(1/e) * Q^(-1/e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandCurve {
    pub scale: f64,
    pub elasticity: f64,
}

impl DemandCurve {
    pub fn validate(&self) -> Result<(), String> {
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(format!("demand scale must be finite and > 0, got {}", self.scale));
        }
        if !self.elasticity.is_finite() || self.elasticity <= 1.0 {
            return Err(format!(
                "demand elasticity must be finite and > 1, got {}",
                self.elasticity
            ));
        }
        Ok(())
    }

    /// Market price at total supply `q_total > 0`.
    pub fn inverse_demand(&self, q_total: f64) -> Result<f64, DomainError> {
        if q_total <= 0.0 {
            return Err(DomainError::NonPositiveTotalSupply(q_total));
        }
        let ie = 1.0 / self.elasticity;
        Ok(self.scale.powf(ie) * q_total.powf(-ie))
    }

    /// First derivative of the price with respect to total supply; strictly
    /// negative on the domain.
    pub fn demand_slope(&self, q_total: f64) -> Result<f64, DomainError> {
        if q_total <= 0.0 {
            return Err(DomainError::NonPositiveTotalSupply(q_total));
        }
        let ie = 1.0 / self.elasticity;
        Ok(-ie * self.scale.powf(ie) * q_total.powf(-ie - 1.0))
    }

    /// Second derivative of the price with respect to total supply; positive
    /// (the price curve is convex decreasing).
    pub fn demand_curvature(&self, q_total: f64) -> Result<f64, DomainError> {
        if q_total <= 0.0 {
            return Err(DomainError::NonPositiveTotalSupply(q_total));
        }
        let ie = 1.0 / self.elasticity;
        Ok(ie * (ie + 1.0) * self.scale.powf(ie) * q_total.powf(-ie - 2.0))
    }
}

/// Abstract evaluator for a complementarity map `f: R^n -> R^n` and its
/// Jacobian.
pub trait NcpProblem: Sync {
    fn dimension(&self) -> usize;
    fn eval(&self, z: &Vector) -> Result<Vector, DomainError>;
    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError>;
}

/// A Cournot market: an ordered list of firms plus the demand curve. This is
/// the flagship realization of [`NcpProblem`].
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    firms: Vec<Firm>,
    demand: DemandCurve,
    cost_variant: CostVariant,
}

impl MarketModel {
    pub fn new(
        firms: Vec<Firm>,
        demand: DemandCurve,
        cost_variant: CostVariant,
    ) -> Result<Self, String> {
        if firms.is_empty() {
            return Err("market must have at least one firm".into());
        }
        for (i, firm) in firms.iter().enumerate() {
            firm.validate().map_err(|e| format!("firm {}: {e}", i + 1))?;
        }
        demand.validate()?;
        Ok(MarketModel {
            firms,
            demand,
            cost_variant,
        })
    }

    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    pub fn demand(&self) -> &DemandCurve {
        &self.demand
    }

    pub fn cost_variant(&self) -> CostVariant {
        self.cost_variant
    }

    fn check_supplies(&self, z: &Vector) -> Result<f64, DomainError> {
        if z.dim() != self.firms.len() {
            return Err(DomainError::DimensionMismatch {
                expected: self.firms.len(),
                actual: z.dim(),
            });
        }
        for (i, &zi) in z.iter().enumerate() {
            if zi < 0.0 {
                return Err(DomainError::NegativeSupply { index: i, value: zi });
            }
        }
        let total: f64 = z.iter().sum();
        if total <= 0.0 {
            return Err(DomainError::NonPositiveTotalSupply(total));
        }
        Ok(total)
    }

    /// The complementarity map `f_i(z) = c_i'(z_i) - P(Q) - z_i P'(Q)`.
    pub fn ncp_map(&self, z: &Vector) -> Result<Vector, DomainError> {
        let total = self.check_supplies(z)?;
        let price = self.demand.inverse_demand(total)?;
        let slope = self.demand.demand_slope(total)?;
        let mut out = Vec::with_capacity(z.dim());
        for (firm, &zi) in self.firms.iter().zip(z.iter()) {
            let mc = firm.marginal_cost(zi, self.cost_variant)?;
            out.push(mc - price - zi * slope);
        }
        Vector::new(out).map_err(|_| DomainError::NonPositiveTotalSupply(total))
    }

    /// Analytic Jacobian of [`MarketModel::ncp_map`]:
    /// off-diagonal `(i,j)` entries are `-P'(Q) - z_i P''(Q)`, the diagonal
    /// adds `c_i''(z_i) - P'(Q)` on top.
    pub fn ncp_jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        let total = self.check_supplies(z)?;
        let slope = self.demand.demand_slope(total)?;
        let curv = self.demand.demand_curvature(total)?;
        let n = z.dim();
        let mut m = Matrix::zeros(n);
        for (i, (firm, &zi)) in self.firms.iter().zip(z.iter()).enumerate() {
            let shared = -slope - zi * curv;
            for j in 0..n {
                m.set(i, j, shared);
            }
            let q = zi.max(OUTPUT_FLOOR);
            let curvature = firm.marginal_cost_slope(q, self.cost_variant)?;
            m.set(i, i, shared + curvature - slope);
        }
        Ok(m)
    }

    /// Natural-residual equilibrium merit: `max_i |min(z_i, f_i(z))|`.
    /// Zero exactly on the Nash equilibrium set.
    pub fn kkt_residual(&self, z: &Vector) -> Result<f64, DomainError> {
        let f = self.ncp_map(z)?;
        let mut worst = 0.0f64;
        for (&zi, &fi) in z.iter().zip(f.iter()) {
            worst = worst.max(zi.min(fi).abs());
        }
        Ok(worst)
    }
}

impl NcpProblem for MarketModel {
    fn dimension(&self) -> usize {
        self.firms.len()
    }

    fn eval(&self, z: &Vector) -> Result<Vector, DomainError> {
        self.ncp_map(z)
    }

    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        self.ncp_jacobian(z)
    }
}
