//! Newton-type solvers for square nonlinear systems.
//!
//! The centerpiece is a four-stage modified Newton iteration whose stages
//! carry sign-conditioned diagonal regularizers built from the residual. A
//! plain Newton iteration is kept as the baseline, and
//! [`estimate_order`] measures the empirical convergence order of a recorded
//! run against a refined reference solution.

use thiserror::Error;

use crate::linalg::{mat_mul, norm2, solve_linear, LinalgError, Matrix, Vector};
use crate::market::DomainError;
use crate::reform::PsiSystem;

/// A square nonlinear system `g: R^n -> R^n` with an analytic Jacobian.
///
/// [`PsiSystem`] is the primary implementor; the bundled demonstration
/// systems in [`crate::problems`] provide smooth small-dimension instances.
pub trait EquationSystem: Sync {
    fn dimension(&self) -> usize;
    fn eval(&self, z: &Vector) -> Result<Vector, DomainError>;
    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError>;
}

impl EquationSystem for PsiSystem<'_> {
    fn dimension(&self) -> usize {
        PsiSystem::dimension(self)
    }
    fn eval(&self, z: &Vector) -> Result<Vector, DomainError> {
        self.psi(z)
    }
    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        self.psi_jacobian(z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ModifiedNewton,
    ClassicalNewton,
}

/// Solver settings. The four `reg_*` fields are the magnitudes of the
/// diagonal regularizer coefficients; their signs are assigned at runtime
/// from the sign conditions on the Jacobian diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub reg_t: f64,
    pub reg_lambda: f64,
    pub reg_mu: f64,
    pub reg_eta: f64,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-7,
            max_iter: 50,
            reg_t: 1e-3,
            reg_lambda: 1e-3,
            reg_mu: 1e-3,
            reg_eta: 1e-3,
            method: Method::ModifiedNewton,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_iter < 1 {
            return Err("max_iter must be >= 1".into());
        }
        for (name, v) in [
            ("reg_t", self.reg_t),
            ("reg_lambda", self.reg_lambda),
            ("reg_mu", self.reg_mu),
            ("reg_eta", self.reg_eta),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        Ok(())
    }
}

/// One full pass of the configured iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// 1-based pass count.
    pub k: usize,
    /// Iterate produced by this pass.
    pub z: Vector,
    /// Stage iterates; present only for the modified method.
    pub y: Option<Vector>,
    pub x: Option<Vector>,
    pub w: Option<Vector>,
    /// Residual norm `n_1 = ||g(z)||_2` at the produced iterate.
    pub residual_norm: f64,
    /// Number of singularity repairs (regularizer amplifications) this pass.
    pub singular_repair_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    SingularFailure,
    DomainFailure,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub solution: Vector,
    pub trace: Vec<IterationRecord>,
    pub final_residual: f64,
    /// Present when the run ended in a failure status.
    pub failure: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("linear stage is singular even after regularizer amplification: {0}")]
    Singular(LinalgError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Outcome of one modified-Newton pass.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub z_next: Vector,
    pub y: Vector,
    pub x: Vector,
    pub w: Vector,
    pub repair_count: usize,
}

fn sign_or_positive(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Coefficients `t_i` for the first stage: `sgn(t_i g_i) = sgn(J_ii)`.
/// When `g_i = 0` the regularizing term vanishes and the magnitude is used
/// with a positive sign.
pub fn t_coefficients(jac_diag: &[f64], residual: &[f64], magnitude: f64) -> Vec<f64> {
    jac_diag
        .iter()
        .zip(residual)
        .map(|(&jii, &gi)| {
            if gi == 0.0 {
                magnitude
            } else {
                sign_or_positive(jii) * sign_or_positive(gi) * magnitude
            }
        })
        .collect()
}

/// Coefficients for the squared-residual stages: `sgn(c_i) = sgn(J_ii)`.
pub fn signed_magnitudes(jac_diag: &[f64], magnitude: f64) -> Vec<f64> {
    jac_diag
        .iter()
        .map(|&jii| sign_or_positive(jii) * magnitude)
        .collect()
}

/// Amplification applied to all four magnitudes when a stage reports a
/// singular linear system.
const REPAIR_AMPLIFICATION: f64 = 1e3;

fn attempt_modified_step(
    sys: &dyn EquationSystem,
    z: &Vector,
    rt: f64,
    rl: f64,
    rm: f64,
    re: f64,
) -> Result<(Vector, Vector, Vector, Vector), StepError> {
    let g_z = sys.eval(z)?;
    let j_z = sys.jacobian(z)?;
    let diag_z = j_z.diagonal();

    // Stage 1: y = z - 1/2 [J(z) + diag(t_i g_i(z))]^{-1} g(z)
    let t = t_coefficients(&diag_z, g_z.as_slice(), rt);
    let t_terms: Vec<f64> = t.iter().zip(g_z.iter()).map(|(ti, gi)| ti * gi).collect();
    let a1 = j_z.add_diagonal(&t_terms);
    let step1 = solve_linear(&a1, &g_z).map_err(StepError::Singular)?;
    let y = z.sub(&step1.scale(0.5));

    let j_y = sys.jacobian(&y)?;

    // Stage 2: x = z - 1/2 [J(z)^2 + J(y)^2 + diag(l_i g_i(z)^2)]^{-1} [J(z)+J(y)] g(z)
    let lambda = signed_magnitudes(&diag_z, rl);
    let sq_z = mat_mul(&j_z, &j_z).expect("square dims");
    let sq_y = mat_mul(&j_y, &j_y).expect("square dims");
    let l_terms: Vec<f64> = lambda
        .iter()
        .zip(g_z.iter())
        .map(|(li, gi)| li * gi * gi)
        .collect();
    let a2 = sq_z.add(&sq_y).add_diagonal(&l_terms);
    let rhs2 = j_z.add(&j_y).mat_vec(&g_z);
    let step2 = solve_linear(&a2, &rhs2).map_err(StepError::Singular)?;
    let x = z.sub(&step2.scale(0.5));

    let g_x = sys.eval(&x)?;
    let j_x = sys.jacobian(&x)?;
    let diag_x = j_x.diagonal();

    // Stage 3: w = x - [J(x)^2 + J(y)^2 + diag(m_i g_i(x)^2)]^{-1} [J(x)+J(y)] g(x)
    let mu = signed_magnitudes(&diag_x, rm);
    let sq_x = mat_mul(&j_x, &j_x).expect("square dims");
    let m_terms: Vec<f64> = mu
        .iter()
        .zip(g_x.iter())
        .map(|(mi, gi)| mi * gi * gi)
        .collect();
    let a3 = sq_x.add(&sq_y).add_diagonal(&m_terms);
    let rhs3 = j_x.add(&j_y).mat_vec(&g_x);
    let step3 = solve_linear(&a3, &rhs3).map_err(StepError::Singular)?;
    let w = x.sub(&step3);

    let g_w = sys.eval(&w)?;
    let j_w = sys.jacobian(&w)?;
    let diag_w = j_w.diagonal();

    // Stage 4: z_next = w - [J(w) + diag(e_i g_i(w)^2)]^{-1} g(w)
    let eta = signed_magnitudes(&diag_w, re);
    let e_terms: Vec<f64> = eta
        .iter()
        .zip(g_w.iter())
        .map(|(ei, gi)| ei * gi * gi)
        .collect();
    let a4 = j_w.add_diagonal(&e_terms);
    let step4 = solve_linear(&a4, &g_w).map_err(StepError::Singular)?;
    let z_next = w.sub(&step4);

    Ok((z_next, y, x, w))
}

/// One four-stage modified Newton pass. A singular linear stage is retried
/// once with all regularizer magnitudes amplified by `1e3`; a second
/// singularity is surfaced as [`StepError::Singular`].
pub fn modified_newton_step(
    sys: &dyn EquationSystem,
    z: &Vector,
    cfg: &SolverConfig,
) -> Result<StepOutcome, StepError> {
    match attempt_modified_step(sys, z, cfg.reg_t, cfg.reg_lambda, cfg.reg_mu, cfg.reg_eta) {
        Ok((z_next, y, x, w)) => Ok(StepOutcome {
            z_next,
            y,
            x,
            w,
            repair_count: 0,
        }),
        Err(StepError::Singular(_)) => {
            let a = REPAIR_AMPLIFICATION;
            let (z_next, y, x, w) = attempt_modified_step(
                sys,
                z,
                cfg.reg_t * a,
                cfg.reg_lambda * a,
                cfg.reg_mu * a,
                cfg.reg_eta * a,
            )?;
            Ok(StepOutcome {
                z_next,
                y,
                x,
                w,
                repair_count: 1,
            })
        }
        Err(e) => Err(e),
    }
}

/// One plain Newton pass, `z - J(z)^{-1} g(z)`. No repair: the baseline is
/// deliberately unadorned.
pub fn classical_newton_step(sys: &dyn EquationSystem, z: &Vector) -> Result<Vector, StepError> {
    let g = sys.eval(z)?;
    let j = sys.jacobian(z)?;
    let step = solve_linear(&j, &g).map_err(StepError::Singular)?;
    Ok(z.sub(&step))
}

/// Iterates the configured method until the residual norm drops below
/// `cfg.tol` or `cfg.max_iter` passes have been taken. The full trace is
/// recorded; failures surface as status codes, never as silent continuation.
pub fn solve(sys: &dyn EquationSystem, z0: &Vector, cfg: &SolverConfig) -> SolveResult {
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut z = z0.clone();

    let mut n1 = match sys.eval(&z) {
        Ok(g) => norm2(&g),
        Err(e) => {
            return SolveResult {
                status: SolveStatus::DomainFailure,
                solution: z,
                trace,
                final_residual: f64::INFINITY,
                failure: Some(e.to_string()),
            }
        }
    };
    if n1 < cfg.tol {
        return SolveResult {
            status: SolveStatus::Converged,
            solution: z,
            trace,
            final_residual: n1,
            failure: None,
        };
    }

    for k in 1..=cfg.max_iter {
        let (z_next, stages, repairs) = match cfg.method {
            Method::ModifiedNewton => match modified_newton_step(sys, &z, cfg) {
                Ok(out) => (out.z_next, Some((out.y, out.x, out.w)), out.repair_count),
                Err(e) => return failure_result(e, z, trace, n1),
            },
            Method::ClassicalNewton => match classical_newton_step(sys, &z) {
                Ok(z_next) => (z_next, None, 0),
                Err(e) => return failure_result(e, z, trace, n1),
            },
        };

        n1 = match sys.eval(&z_next) {
            Ok(g) => norm2(&g),
            Err(e) => return failure_result(StepError::Domain(e), z, trace, n1),
        };
        z = z_next;
        let (y, x, w) = match stages {
            Some((y, x, w)) => (Some(y), Some(x), Some(w)),
            None => (None, None, None),
        };
        trace.push(IterationRecord {
            k,
            z: z.clone(),
            y,
            x,
            w,
            residual_norm: n1,
            singular_repair_count: repairs,
        });

        if n1 < cfg.tol {
            return SolveResult {
                status: SolveStatus::Converged,
                solution: z,
                trace,
                final_residual: n1,
                failure: None,
            };
        }
    }

    SolveResult {
        status: SolveStatus::MaxIterations,
        solution: z,
        trace,
        final_residual: n1,
        failure: None,
    }
}

fn failure_result(
    e: StepError,
    z: Vector,
    trace: Vec<IterationRecord>,
    n1: f64,
) -> SolveResult {
    let status = match e {
        StepError::Singular(_) => SolveStatus::SingularFailure,
        StepError::Domain(_) => SolveStatus::DomainFailure,
    };
    SolveResult {
        status,
        solution: z,
        trace,
        final_residual: n1,
        failure: Some(e.to_string()),
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("need at least 3 error norms above the precision floor, got {0}")]
    InsufficientData(usize),
}

/// Empirical convergence-order estimate for one recorded run.
#[derive(Debug, Clone)]
pub struct OrderEstimate {
    /// `rho_k = ln(e_{k+1}/e_k) / ln(e_k/e_{k-1})` per consecutive triple.
    pub per_step_orders: Vec<f64>,
    pub reference_solution: Vector,
    /// Error norms `||z_k - reference||_2`, truncated at the precision floor.
    pub error_norms: Vec<f64>,
}

/// Computes per-triple convergence orders from a trace against a
/// high-accuracy reference solution. Error norms at or below
/// `100 * machine-epsilon * scale` are considered indistinguishable from the
/// reference and are excluded.
pub fn estimate_order(
    trace: &[IterationRecord],
    reference: &Vector,
) -> Result<OrderEstimate, OrderError> {
    estimate_order_from_norms(
        trace.iter().map(|r| norm2(&r.z.sub(reference))).collect(),
        reference,
    )
}

/// Same as [`estimate_order`] but starting from precomputed error norms,
/// with the initial-point error prepended by the caller when available.
pub fn estimate_order_from_norms(
    norms: Vec<f64>,
    reference: &Vector,
) -> Result<OrderEstimate, OrderError> {
    let scale = norm2(reference).max(1.0);
    let floor = 100.0 * f64::EPSILON * scale;
    let usable: Vec<f64> = norms.into_iter().take_while(|&e| e > floor).collect();
    if usable.len() < 3 {
        return Err(OrderError::InsufficientData(usable.len()));
    }
    let mut orders = Vec::new();
    for k in 1..usable.len() - 1 {
        let rho = (usable[k + 1] / usable[k]).ln() / (usable[k] / usable[k - 1]).ln();
        if rho.is_finite() {
            orders.push(rho);
        }
    }
    Ok(OrderEstimate {
        per_step_orders: orders,
        reference_solution: reference.clone(),
        error_norms: usable,
    })
}
