//! Numerical verification machinery: finite-difference Jacobian audits,
//! construction of complementary points on randomized markets, and the
//! batch property suites behind `ncp-eq check`.
//!
//! The batch suites evaluate many independent points; with the `parallel`
//! feature (on by default) they fan out over a rayon pool. The `_seq`
//! variants always run on the calling thread and are kept public so the
//! benchmark suite can compare both.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::linalg::{norm_inf, solve_linear, Matrix, Vector};
use crate::market::{CostVariant, DemandCurve, Firm, MarketModel, NcpProblem};
use crate::reform::{PhiFunction, PsiSystem};

/// Central finite-difference Jacobian of `f` at `z`. The step for column `j`
/// is `rel_step * max(|z_j|, 1)`. Returns `None` when any evaluation fails.
pub fn central_difference_jacobian<F>(f: F, z: &Vector, rel_step: f64) -> Option<Matrix>
where
    F: Fn(&Vector) -> Option<Vector>,
{
    let n = z.dim();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let h = rel_step * z[j].abs().max(1.0);
        let mut plus: Vec<f64> = z.as_slice().to_vec();
        let mut minus = plus.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = f(&Vector::new(plus).ok()?)?;
        let fm = f(&Vector::new(minus).ok()?)?;
        columns.push(
            fp.iter()
                .zip(fm.iter())
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect(),
        );
    }
    let mut m = Matrix::zeros(n);
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m.set(i, j, v);
        }
    }
    Some(m)
}

/// Largest entrywise deviation between two matrices, relative to the largest
/// magnitude present in either.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.dim();
    let mut scale = 0.0f64;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a.get(i, j).abs()).max(b.get(i, j).abs());
            worst = worst.max((a.get(i, j) - b.get(i, j)).abs());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Uniformly random interior points of `[low, high]^n`, reproducible from
/// the seed.
pub fn random_points(n: usize, count: usize, low: f64, high: f64, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            Vector::new((0..n).map(|_| rng.gen_range(low..high)).collect())
                .expect("finite samples")
        })
        .collect()
}

/// Worst relative deviation of the market's analytic Jacobian from central
/// finite differences over the given points.
pub fn ncp_jacobian_audit(market: &MarketModel, points: &[Vector]) -> f64 {
    let worker = |z: &Vector| -> f64 {
        let analytic = match market.ncp_jacobian(z) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        match central_difference_jacobian(|p| market.ncp_map(p).ok(), z, 1e-6) {
            Some(fd) => max_relative_error(&analytic, &fd),
            None => f64::INFINITY,
        }
    };
    max_over_points(points, worker)
}

/// Worst relative deviation of the reformulated system's analytic Jacobian
/// from central finite differences over the given points.
pub fn psi_jacobian_audit(sys: &PsiSystem<'_>, points: &[Vector]) -> f64 {
    let worker = |z: &Vector| -> f64 {
        let analytic = match sys.psi_jacobian(z) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        match central_difference_jacobian(|p| sys.psi(p).ok(), z, 1e-5) {
            Some(fd) => max_relative_error(&analytic, &fd),
            None => f64::INFINITY,
        }
    };
    max_over_points(points, worker)
}

fn max_over_points<F>(points: &[Vector], worker: F) -> f64
where
    F: Fn(&Vector) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        points.par_iter().map(&worker).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(worker).fold(0.0, f64::max)
    }
}

/// A market drawn with parameters scaled so equilibria sit near unit
/// magnitude, which keeps the sixth-power reformulation residuals near the
/// floating-point floor at constructed solutions.
pub fn random_market(rng: &mut ChaCha8Rng, n_firms: usize) -> MarketModel {
    // The intercept range straddles typical prices so that equilibria with
    // genuinely idle firms (intercept above price) occur regularly.
    let firms: Vec<Firm> = (0..n_firms)
        .map(|_| Firm {
            n: rng.gen_range(0.2..6.0),
            l: rng.gen_range(0.5..3.0),
            beta: rng.gen_range(0.6..1.4),
        })
        .collect();
    let demand = DemandCurve {
        scale: rng.gen_range(2.0..20.0),
        elasticity: rng.gen_range(1.2..3.0),
    };
    MarketModel::new(firms, demand, CostVariant::AsWritten).expect("valid random market")
}

/// Solves the reduced system `f_S(z) = 0` over the active subset `S`, with
/// inactive supplies pinned to zero, by a guarded Newton iteration. Returns
/// a fully complementary point (active `f_i = 0` at machine accuracy,
/// inactive `f_i > 0`) or `None` when the construction fails.
pub fn construct_complementary_point(
    market: &MarketModel,
    active: &[bool],
) -> Option<Vector> {
    let n = market.dimension();
    let indices: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    if indices.is_empty() {
        return None;
    }

    let assemble = |reduced: &[f64]| -> Option<Vector> {
        let mut full = vec![0.0; n];
        for (slot, &i) in indices.iter().enumerate() {
            full[i] = reduced[slot];
        }
        Vector::new(full).ok()
    };

    let mut reduced = vec![1.0f64; indices.len()];
    let mut polished = false;
    for _ in 0..80 {
        let z = assemble(&reduced)?;
        let f = market.ncp_map(&z).ok()?;
        let jac = market.ncp_jacobian(&z).ok()?;

        let residual: Vec<f64> = indices.iter().map(|&i| f[i]).collect();
        let max_res = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        // One extra full step after crossing the gate pushes the active
        // residuals to the floating-point floor.
        if max_res <= 1e-12 && !polished {
            polished = true;
        } else if max_res <= 1e-12 {
            // Verify the inactive side of complementarity with a margin.
            let ok = (0..n).all(|i| active[i] || f[i] > 1e-9);
            return if ok { Some(z) } else { None };
        }

        let m = indices.len();
        let mut sub = Matrix::zeros(m);
        for (r, &i) in indices.iter().enumerate() {
            for (c, &j) in indices.iter().enumerate() {
                sub.set(r, c, jac.get(i, j));
            }
        }
        let rhs = Vector::new(residual).ok()?;
        let step = solve_linear(&sub, &rhs).ok()?;
        for (slot, s) in reduced.iter_mut().zip(step.iter()) {
            // Guarded update: stay strictly inside the positive orthant.
            let mut trial = *slot - s;
            if trial <= 0.0 {
                trial = *slot * 0.5;
            }
            *slot = trial;
        }
    }
    None
}

/// Necessity suite: constructs `count` complementary points on randomized
/// markets (firm counts drawn from `firm_counts`) and returns the largest
/// `||psi||_inf` observed.
pub fn necessity_suite(
    phi: PhiFunction,
    firm_counts: &[usize],
    count: usize,
    seed: u64,
) -> f64 {
    let worker = |item: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(item));
        for _attempt in 0..200 {
            let n = firm_counts[rng.gen_range(0..firm_counts.len())];
            let market = random_market(&mut rng, n);
            let active: Vec<bool> = if n == 1 {
                vec![true]
            } else {
                let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
                if mask.iter().all(|&a| !a) {
                    mask[rng.gen_range(0..n)] = true;
                }
                mask
            };
            if let Some(z) = construct_complementary_point(&market, &active) {
                let sys = PsiSystem::new(&market, phi);
                if let Ok(psi) = sys.psi(&z) {
                    return norm_inf(&psi);
                }
            }
        }
        f64::INFINITY
    };
    max_over_items(count, worker)
}

/// Sufficiency contrapositive suite: rejection-samples `count` points with
/// at least one component violating complementarity (`z_i > 1e-3` and
/// `f_i > 1e-3`) and returns the smallest `|psi_i|` at the violating
/// component. A positive return confirms that a violation always leaves a
/// nonzero residual.
pub fn sufficiency_suite(
    phi: PhiFunction,
    firm_counts: &[usize],
    count: usize,
    seed: u64,
) -> f64 {
    let worker = |item: u64| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(item) ^ 0x5u64);
        for _attempt in 0..500 {
            let n = firm_counts[rng.gen_range(0..firm_counts.len())];
            let market = random_market(&mut rng, n);
            let z = Vector::new((0..n).map(|_| rng.gen_range(1e-2..5.0)).collect::<Vec<_>>())
                .expect("finite");
            let f = match market.ncp_map(&z) {
                Ok(f) => f,
                Err(_) => continue,
            };
            let violating = (0..n).find(|&i| z[i] > 1e-3 && f[i] > 1e-3);
            if let Some(i) = violating {
                let sys = PsiSystem::new(&market, phi);
                if let Ok(psi) = sys.psi(&z) {
                    return psi[i].abs();
                }
            }
        }
        0.0
    };
    min_over_items(count, worker)
}

fn max_over_items<F>(count: usize, worker: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count as u64)
            .into_par_iter()
            .map(worker)
            .reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count as u64).map(worker).fold(0.0, f64::max)
    }
}

fn min_over_items<F>(count: usize, worker: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count as u64)
            .into_par_iter()
            .map(worker)
            .reduce(|| f64::INFINITY, f64::min)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count as u64).map(worker).fold(f64::INFINITY, f64::min)
    }
}

/// Sequential twin of [`necessity_suite`]; same results, calling thread only.
pub fn necessity_suite_seq(
    phi: PhiFunction,
    firm_counts: &[usize],
    count: usize,
    seed: u64,
) -> f64 {
    let mut worst = 0.0f64;
    for item in 0..count as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(item));
        let mut value = f64::INFINITY;
        for _attempt in 0..200 {
            let n = firm_counts[rng.gen_range(0..firm_counts.len())];
            let market = random_market(&mut rng, n);
            let active: Vec<bool> = if n == 1 {
                vec![true]
            } else {
                let mut mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
                if mask.iter().all(|&a| !a) {
                    mask[rng.gen_range(0..n)] = true;
                }
                mask
            };
            if let Some(z) = construct_complementary_point(&market, &active) {
                let sys = PsiSystem::new(&market, phi);
                if let Ok(psi) = sys.psi(&z) {
                    value = norm_inf(&psi);
                    break;
                }
            }
        }
        worst = worst.max(value);
    }
    worst
}

/// One named check with its tolerance and outcome.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckItem {
    fn upper(name: &str, value: f64, tolerance: f64) -> Self {
        CheckItem {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    fn lower(name: &str, value: f64, tolerance: f64) -> Self {
        CheckItem {
            name: name.into(),
            value,
            tolerance,
            passed: value > tolerance,
        }
    }
}

/// Runs the Jacobian audits and both equivalence suites for one market.
/// `points_per_check` scales the randomized sample sizes;
/// `corrupt_jacobian` deliberately perturbs the analytic psi-Jacobian so the
/// audit's failure path can be demonstrated.
pub fn run_check_suite(
    market: &MarketModel,
    phi: PhiFunction,
    points_per_check: usize,
    seed: u64,
    corrupt_jacobian: bool,
) -> Vec<CheckItem> {
    let n = market.dimension();
    let mut items = Vec::new();

    let points = random_points(n, 20, 1.0, 100.0, seed);
    items.push(CheckItem::upper(
        "ncp_jacobian vs central differences (20 points)",
        ncp_jacobian_audit(market, &points),
        1e-5,
    ));

    let sys = PsiSystem::new(market, phi);
    let psi_err = if corrupt_jacobian {
        let worker = |z: &Vector| -> f64 {
            let mut analytic = match sys.psi_jacobian(z) {
                Ok(m) => m,
                Err(_) => return f64::INFINITY,
            };
            let bent = analytic.get(0, 0) * 1.5 + 1.0;
            analytic.set(0, 0, bent);
            match central_difference_jacobian(|p| sys.psi(p).ok(), z, 1e-5) {
                Some(fd) => max_relative_error(&analytic, &fd),
                None => f64::INFINITY,
            }
        };
        max_over_points(&points, worker)
    } else {
        psi_jacobian_audit(&sys, &points)
    };
    items.push(CheckItem::upper(
        "psi_jacobian vs central differences (20 points)",
        psi_err,
        1e-5,
    ));

    items.push(CheckItem::upper(
        "necessity: ||psi||_inf at constructed complementary points",
        necessity_suite(phi, &[1, n.max(2)], points_per_check, seed ^ 0x11),
        1e-8,
    ));
    items.push(CheckItem::lower(
        "sufficiency: |psi_i| at complementarity violations",
        sufficiency_suite(phi, &[1, n.max(2)], points_per_check, seed ^ 0x22),
        0.0,
    ));

    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::five_firm_market;

    #[test]
    fn fd_jacobian_on_linear_map_is_exact() {
        let f = |z: &Vector| {
            Vector::new(vec![2.0 * z[0] + z[1], -z[0] + 3.0 * z[1]]).ok()
        };
        let z = Vector::new(vec![1.0, 2.0]).unwrap();
        let fd = central_difference_jacobian(f, &z, 1e-6).unwrap();
        let exact = Matrix::from_rows(&[vec![2.0, 1.0], vec![-1.0, 3.0]]).unwrap();
        assert!(max_relative_error(&fd, &exact) < 1e-9);
    }

    #[test]
    fn market_jacobian_audit_passes() {
        let market = five_firm_market();
        let points = random_points(5, 20, 1.0, 100.0, 7);
        assert!(ncp_jacobian_audit(&market, &points) <= 1e-5);
    }

    #[test]
    fn constructed_point_is_complementary() {
        // Not every market admits an equilibrium with this activity
        // pattern (an idle firm whose marginal cost sits below the price
        // would want to produce), so draw markets until one does.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let active = vec![true, false, true, false];
        let (market, z) = (0..200)
            .find_map(|_| {
                let market = random_market(&mut rng, 4);
                construct_complementary_point(&market, &active).map(|z| (market, z))
            })
            .expect("construction");
        let f = market.ncp_map(&z).unwrap();
        for i in 0..4 {
            if active[i] {
                assert!(z[i] > 0.0);
                assert!(f[i].abs() <= 1e-12);
            } else {
                assert_eq!(z[i], 0.0);
                assert!(f[i] > 0.0);
            }
        }
        assert!(market.kkt_residual(&z).unwrap() <= 1e-12);
    }

    #[test]
    fn suites_run_and_pass_at_small_counts() {
        for phi in [PhiFunction::Cube, PhiFunction::Identity] {
            let necessity = necessity_suite(phi, &[1, 5], 50, 3);
            assert!(necessity <= 1e-8, "phi {phi:?}: {necessity}");
            let sufficiency = sufficiency_suite(phi, &[1, 5], 50, 3);
            assert!(sufficiency > 0.0, "phi {phi:?}");
        }
    }

    #[test]
    fn parallel_and_sequential_suites_agree() {
        let par = necessity_suite(PhiFunction::Cube, &[1, 5], 40, 9);
        let seq = necessity_suite_seq(PhiFunction::Cube, &[1, 5], 40, 9);
        assert_eq!(par, seq);
    }

    #[test]
    fn corrupted_jacobian_fails_loudly() {
        let market = five_firm_market();
        let items = run_check_suite(&market, PhiFunction::Cube, 20, 1, true);
        assert!(items.iter().any(|item| !item.passed));
        let items = run_check_suite(&market, PhiFunction::Cube, 20, 1, false);
        assert!(items.iter().all(|item| item.passed));
    }
}
