//! The equation-system reformulation of a complementarity problem.
//!
//! For an increasing `phi` with `phi(0) = 0`, the vector `z` solves the
//! complementarity problem (`z >= 0`, `f(z) >= 0`, `z^T f(z) = 0`) exactly
//! when every component of
//!
//! ```text
//! psi_i(z) = phi((f_i(z) - z_i)^2) - phi(f_i(z)|f_i(z)|) - phi(z_i|z_i|)
//! ```
//!
//! vanishes. [`PsiSystem`] evaluates this system and its analytic Jacobian;
//! the two `check_equivalence_*` predicates express both directions of the
//! equivalence as testable statements.

use crate::linalg::{norm_inf, Matrix, Vector};
use crate::market::{DomainError, NcpProblem};

/// Residual tolerance used by the equivalence predicates on `psi`.
pub const PSI_TOL: f64 = 1e-8;
/// Slack allowed on the complementarity conditions recovered from a small
/// `psi` residual.
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;

/// `sgn` with the convention `sgn(0) = 0`, which makes `x * sgn(x) = |x|`
/// hold everywhere.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The increasing functions the reformulation ships with.
///
/// `Cube` is the default. `Identity` is the degenerate-Jacobian stress case:
/// its psi-Jacobian loses rank at every solution component, which exercises
/// the solver's diagonal regularizers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiFunction {
    #[default]
    Cube,
    Identity,
}

impl PhiFunction {
    pub fn value(self, x: f64) -> f64 {
        match self {
            PhiFunction::Cube => x * x * x,
            PhiFunction::Identity => x,
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            PhiFunction::Cube => 3.0 * x * x,
            PhiFunction::Identity => 1.0,
        }
    }
}

/// The reformulated equation system for one complementarity problem.
pub struct PsiSystem<'a> {
    problem: &'a dyn NcpProblem,
    phi: PhiFunction,
}

impl<'a> PsiSystem<'a> {
    pub fn new(problem: &'a dyn NcpProblem, phi: PhiFunction) -> Self {
        PsiSystem { problem, phi }
    }

    pub fn dimension(&self) -> usize {
        self.problem.dimension()
    }

    pub fn phi(&self) -> PhiFunction {
        self.phi
    }

    pub fn problem(&self) -> &dyn NcpProblem {
        self.problem
    }

    /// Componentwise evaluation of the reformulated system.
    pub fn psi(&self, z: &Vector) -> Result<Vector, DomainError> {
        let f = self.problem.eval(z)?;
        Ok(self.psi_from_f(z, &f))
    }

    fn psi_from_f(&self, z: &Vector, f: &Vector) -> Vector {
        let phi = self.phi;
        let out: Vec<f64> = z
            .iter()
            .zip(f.iter())
            .map(|(&zi, &fi)| {
                let d = fi - zi;
                phi.value(d * d) - phi.value(fi * fi.abs()) - phi.value(zi * zi.abs())
            })
            .collect();
        // psi is a finite composition of finite values.
        Vector::new(out).expect("psi produced non-finite entries")
    }

    /// Analytic Jacobian of `psi`:
    ///
    /// ```text
    /// d psi_i / d z_j = phi'((f_i-z_i)^2) 2(f_i-z_i) (df_i/dz_j - delta_ij)
    ///                 - phi'(f_i|f_i|) 2 f_i sgn(f_i) df_i/dz_j
    ///                 - phi'(z_i|z_i|) 2 z_i sgn(z_i) delta_ij
    /// ```
    pub fn psi_jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        let f = self.problem.eval(z)?;
        let jf = self.problem.jacobian(z)?;
        let n = z.dim();
        let phi = self.phi;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            let zi = z[i];
            let fi = f[i];
            let d = fi - zi;
            let a = phi.derivative(d * d) * 2.0 * d;
            let b = phi.derivative(fi * fi.abs()) * 2.0 * fi * sgn(fi);
            let c = phi.derivative(zi * zi.abs()) * 2.0 * zi * sgn(zi);
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                out.set(i, j, a * (jf.get(i, j) - delta) - b * jf.get(i, j) - c * delta);
            }
        }
        Ok(out)
    }

    /// Is `z` complementary for the underlying problem, within `tol`?
    pub fn is_complementary(&self, z: &Vector, tol: f64) -> bool {
        match self.problem.eval(z) {
            Ok(f) => z
                .iter()
                .zip(f.iter())
                .all(|(&zi, &fi)| zi >= -tol && fi >= -tol && (zi * fi).abs() <= tol),
            Err(_) => false,
        }
    }

    /// Necessity direction of the equivalence: a complementary `z` must make
    /// the reformulated system vanish. Vacuously true when `z` is not
    /// complementary.
    pub fn check_equivalence_forward(&self, z: &Vector) -> bool {
        if !self.is_complementary(z, 1e-9) {
            return true;
        }
        match self.psi(z) {
            Ok(psi) => norm_inf(&psi) <= PSI_TOL,
            Err(_) => false,
        }
    }

    /// Sufficiency direction: a vanishing reformulated system forces the
    /// complementarity conditions. Vacuously true when the residual is not
    /// small.
    pub fn check_equivalence_backward(&self, z: &Vector) -> bool {
        match self.psi(z) {
            Ok(psi) if norm_inf(&psi) <= PSI_TOL => {
                self.is_complementary(z, COMPLEMENTARITY_TOL)
            }
            _ => true,
        }
    }
}
