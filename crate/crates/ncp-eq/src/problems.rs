//! Bundled demonstration systems for the convergence-order tooling.
//!
//! These are not market models: they are small smooth equation systems fed
//! directly to the solver, used to validate the order estimator against
//! textbook behavior and to show the modified method's high-order decay
//! before the double-precision floor cuts it off.

use crate::linalg::{Matrix, Vector};
use crate::market::DomainError;
use crate::solver::EquationSystem;

/// `g(z) = z^2 - 4`, root at `z = 2`. The classical-Newton order oracle.
pub struct ScalarQuad;

impl EquationSystem for ScalarQuad {
    fn dimension(&self) -> usize {
        1
    }

    fn eval(&self, z: &Vector) -> Result<Vector, DomainError> {
        Ok(Vector::new(vec![z[0] * z[0] - 4.0]).expect("finite"))
    }

    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        Matrix::new(1, vec![2.0 * z[0]])
            .map_err(|_| DomainError::OutOfDomain("non-finite iterate".into()))
    }
}

/// A smooth, well-conditioned two-dimensional system:
///
/// ```text
/// g_1(x, y) = exp(x) - x - y - 3/2
/// g_2(x, y) = x + ln(y + 2) - 1
/// ```
///
/// Defined for `y > -2`.
pub struct Smooth2d;

impl EquationSystem for Smooth2d {
    fn dimension(&self) -> usize {
        2
    }

    fn eval(&self, z: &Vector) -> Result<Vector, DomainError> {
        let (x, y) = (z[0], z[1]);
        if y <= -2.0 {
            return Err(DomainError::OutOfDomain(format!(
                "second component must exceed -2, got {y}"
            )));
        }
        let g1 = x.exp() - x - y - 1.5;
        let g2 = x + (y + 2.0).ln() - 1.0;
        Vector::new(vec![g1, g2])
            .map_err(|_| DomainError::OutOfDomain("non-finite evaluation".into()))
    }

    fn jacobian(&self, z: &Vector) -> Result<Matrix, DomainError> {
        let (x, y) = (z[0], z[1]);
        if y <= -2.0 {
            return Err(DomainError::OutOfDomain(format!(
                "second component must exceed -2, got {y}"
            )));
        }
        Matrix::from_rows(&[vec![x.exp() - 1.0, -1.0], vec![1.0, 1.0 / (y + 2.0)]])
            .map_err(|_| DomainError::OutOfDomain("non-finite Jacobian".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::solver::{solve, Method, SolveStatus, SolverConfig};

    #[test]
    fn scalar_quad_root() {
        let z = Vector::new(vec![2.0]).unwrap();
        assert_eq!(ScalarQuad.eval(&z).unwrap()[0], 0.0);
    }

    #[test]
    fn smooth2d_jacobian_matches_finite_differences() {
        let sys = Smooth2d;
        let z = Vector::new(vec![0.7, 0.3]).unwrap();
        let analytic = sys.jacobian(&z).unwrap();
        let fd = crate::verify::central_difference_jacobian(|p| sys.eval(p).ok(), &z, 1e-6)
            .unwrap();
        assert!(crate::verify::max_relative_error(&analytic, &fd) <= 1e-6);
    }

    #[test]
    fn smooth2d_solves_with_both_methods() {
        let sys = Smooth2d;
        // Close enough that the undamped classical step stays inside the
        // logarithm's domain.
        let z0 = Vector::new(vec![1.0, 0.0]).unwrap();
        for method in [Method::ModifiedNewton, Method::ClassicalNewton] {
            let cfg = SolverConfig {
                method,
                tol: 1e-12,
                ..SolverConfig::default()
            };
            let result = solve(&sys, &z0, &cfg);
            assert_eq!(result.status, SolveStatus::Converged, "{method:?}");
            assert!(norm2(&sys.eval(&result.solution).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn smooth2d_rejects_log_domain_violation() {
        let sys = Smooth2d;
        let z = Vector::new(vec![0.0, -3.0]).unwrap();
        assert!(sys.eval(&z).is_err());
    }
}
