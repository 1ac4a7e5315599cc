//! Nonlinear complementarity problems solved through an equivalent smooth
//! equation system.
//!
//! Given a map `f`, the complementarity problem asks for `z >= 0` with
//! `f(z) >= 0` and `z' f(z) = 0`. Each component is folded into a single
//! smooth residual
//!
//! ```text
//! psi_i(z) = phi((f_i - z_i)^2) - phi(f_i |f_i|) - phi(z_i |z_i|)
//! ```
//!
//! whose roots are exactly the complementarity solutions. The resulting
//! square system is solved either by classical Newton or by a four-stage
//! modified Newton iteration with signed diagonal regularizers.
//!
//! The crate ships a Cournot oligopoly market model as its flagship
//! problem family, plus verification tooling (finite-difference audits and
//! randomized equivalence suites) and a small CLI, `ncp-eq`.

pub mod config;
pub mod linalg;
pub mod market;
pub mod problems;
pub mod reform;
pub mod solver;
pub mod verify;

#[cfg(test)]
pub(crate) mod testutil {
    use crate::linalg::Vector;
    use crate::market::{CostVariant, DemandCurve, Firm, MarketModel};
    use crate::solver::{Method, SolverConfig};

    /// The bundled five-firm market: costs `c_i(q) = n_i q + (beta_i /
    /// (beta_i + 1)) L_i^(1/beta_i) q^((beta_i+1)/beta_i)` and isoelastic
    /// demand `P(Q) = (5000/Q)^(1/1.1)`.
    pub fn five_firm_market() -> MarketModel {
        let firms = [
            (10.0, 1.2),
            (8.0, 1.1),
            (6.0, 1.0),
            (4.0, 0.9),
            (2.0, 0.8),
        ]
        .into_iter()
        .map(|(n, beta)| Firm { n, l: 5.0, beta })
        .collect();
        let demand = DemandCurve {
            scale: 5000.0,
            elasticity: 1.1,
        };
        MarketModel::new(firms, demand, CostVariant::AsWritten).expect("valid fixture")
    }

    /// The published four-decimal equilibrium for the five-firm market.
    pub const BENCHMARK_EQUILIBRIUM: [f64; 5] =
        [15.4293, 12.4986, 9.6635, 7.1651, 5.1326];

    /// The same equilibrium refined to full double precision.
    #[allow(clippy::excessive_precision)]
    pub const REFERENCE_EQUILIBRIUM: [f64; 5] = [
        15.429307572204471,
        12.498581730617944,
        9.6634729715687303,
        7.1650935128908859,
        5.1325661792541039,
    ];

    /// The distant starting point and the regularizer magnitudes that carry
    /// the modified method from it to the equilibrium.
    pub fn murphy_config() -> (Vector, SolverConfig) {
        let z0 = Vector::new(vec![40.0, 50.0, 60.0, 55.0, 45.0]).unwrap();
        let cfg = SolverConfig {
            tol: 1e-7,
            max_iter: 50,
            reg_t: 1.0,
            reg_lambda: 1e3,
            reg_mu: 1e-9,
            reg_eta: 1e-9,
            method: Method::ModifiedNewton,
        };
        (z0, cfg)
    }
}
