use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use ncp_eq::config::{ProblemKind, RunConfig};
use ncp_eq::linalg::norm2;
use ncp_eq::market::MarketModel;
use ncp_eq::problems::{ScalarQuad, Smooth2d};
use ncp_eq::reform::{PhiFunction, PsiSystem};
use ncp_eq::solver::{
    estimate_order_from_norms, solve, EquationSystem, Method, SolveResult, SolveStatus,
};
use ncp_eq::verify::run_check_suite;

/// Exit codes: 0 converged/ok, 1 usage or configuration error,
/// 2 iteration limit, 3 singular linear stage, 4 domain failure,
/// 5 failed verification check, 6 not enough data for an order estimate.
const EXIT_CONFIG: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_SINGULAR: u8 = 3;
const EXIT_DOMAIN: u8 = 4;
const EXIT_CHECK_FAILED: u8 = 5;
const EXIT_ORDER_DATA: u8 = 6;

#[derive(Parser)]
#[command(name = "ncp-eq", version, about = "Complementarity problems via smooth reformulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and report the solution.
    Solve {
        config: PathBuf,
        /// Write a comma-delimited per-iteration trace to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the configured convergence tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Override the configured iteration limit.
        #[arg(long)]
        max_iter: Option<usize>,
        /// Emit a machine-readable JSON summary instead of the text report.
        #[arg(long)]
        json: bool,
    },
    /// Run both iteration methods from the same starting point.
    Compare {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Estimate the empirical convergence order of the configured run.
    Order {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Audit Jacobians against finite differences and run the
    /// reformulation-equivalence suites.
    Check {
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

enum ProblemInstance {
    Market(MarketModel),
    ScalarQuad(ScalarQuad),
    Smooth2d(Smooth2d),
}

impl ProblemInstance {
    fn build(cfg: &RunConfig) -> Result<Self, String> {
        match cfg.problem {
            ProblemKind::Market => cfg
                .build_market()
                .map(ProblemInstance::Market)
                .map_err(|e| e.to_string()),
            ProblemKind::ScalarQuad => Ok(ProblemInstance::ScalarQuad(ScalarQuad)),
            ProblemKind::Smooth2d => Ok(ProblemInstance::Smooth2d(Smooth2d)),
        }
    }

    /// Runs `body` against the equation system this instance solves: the
    /// reformulated system for markets, the raw system otherwise.
    fn with_system<R>(
        &self,
        phi: PhiFunction,
        body: impl FnOnce(&dyn EquationSystem) -> R,
    ) -> R {
        match self {
            ProblemInstance::Market(m) => body(&PsiSystem::new(m, phi)),
            ProblemInstance::ScalarQuad(s) => body(s),
            ProblemInstance::Smooth2d(s) => body(s),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve {
            config,
            trace,
            tol,
            max_iter,
            json,
        } => cmd_solve(&config, trace.as_deref(), tol, max_iter, json),
        Command::Compare { config, json } => cmd_compare(&config, json),
        Command::Order { config, json } => cmd_order(&config, json),
        Command::Check { config, json } => cmd_check(&config, json),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_config(path: &std::path::Path) -> Result<RunConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    RunConfig::from_str(&text).map_err(|e| e.to_string())
}

fn status_exit(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::MaxIterations => EXIT_MAX_ITER,
        SolveStatus::SingularFailure => EXIT_SINGULAR,
        SolveStatus::DomainFailure => EXIT_DOMAIN,
    }
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "Converged",
        SolveStatus::MaxIterations => "MaxIterations",
        SolveStatus::SingularFailure => "SingularFailure",
        SolveStatus::DomainFailure => "DomainFailure",
    }
}

/// Full-precision decimal rendering used in trace files: 17 significant
/// digits round-trips every finite double.
fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_trace(path: &std::path::Path, result: &SolveResult, n: usize) -> Result<(), String> {
    let mut out = String::new();
    out.push('k');
    for j in 1..=n {
        out.push_str(&format!(",z_{j}"));
    }
    out.push_str(",n_1\n");
    for rec in &result.trace {
        out.push_str(&rec.k.to_string());
        for v in rec.z.iter() {
            out.push(',');
            out.push_str(&g17(*v));
        }
        out.push(',');
        out.push_str(&g17(rec.residual_norm));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_solve(
    path: &std::path::Path,
    trace_path: Option<&std::path::Path>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    json: bool,
) -> Result<u8, String> {
    let cfg = load_config(path)?;
    let mut solver_cfg = cfg.solver.to_solver_config();
    if let Some(t) = tol {
        solver_cfg.tol = t;
    }
    if let Some(m) = max_iter {
        solver_cfg.max_iter = m;
    }
    solver_cfg.validate()?;

    let instance = ProblemInstance::build(&cfg)?;
    let z0 = cfg.initial_vector();
    let result = instance.with_system(cfg.phi, |sys| solve(sys, &z0, &solver_cfg));

    if let Some(tp) = trace_path {
        write_trace(tp, &result, z0.dim())?;
    }

    let market_summary = if let ProblemInstance::Market(m) = &instance {
        let total: f64 = result.solution.iter().sum();
        let price = m.demand().inverse_demand(total).ok();
        let kkt = m.kkt_residual(&result.solution).ok();
        Some((total, price, kkt))
    } else {
        None
    };

    if json {
        let summary = serde_json::json!({
            "status": result.status,
            "solution": result.solution.as_slice(),
            "iterations": result.trace.len(),
            "final_residual": result.final_residual,
            "total_supply": market_summary.map(|(t, _, _)| t),
            "price": market_summary.and_then(|(_, p, _)| p),
            "kkt_residual": market_summary.and_then(|(_, _, k)| k),
            "failure": result.failure,
        });
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    } else {
        println!("status          : {}", status_name(result.status));
        println!("iterations      : {}", result.trace.len());
        print!("solution        :");
        for v in result.solution.iter() {
            print!(" {v:.10}");
        }
        println!();
        if let Some((total, price, kkt)) = market_summary {
            println!("total supply    : {total:.10}");
            if let Some(p) = price {
                println!("market price    : {p:.10}");
            }
            if let Some(k) = kkt {
                println!("kkt residual    : {k:.3e}");
            }
        }
        println!("final n_1       : {:.3e}", result.final_residual);
        if let Some(f) = &result.failure {
            println!("failure         : {f}");
        }
    }
    Ok(status_exit(result.status))
}

fn cmd_compare(path: &std::path::Path, json: bool) -> Result<u8, String> {
    let cfg = load_config(path)?;
    let solver_cfg = cfg.solver.to_solver_config();
    solver_cfg.validate()?;
    let instance = ProblemInstance::build(&cfg)?;
    let z0 = cfg.initial_vector();

    let run = |method: Method| -> SolveResult {
        let mut c = solver_cfg;
        c.method = method;
        instance.with_system(cfg.phi, |sys| solve(sys, &z0, &c))
    };

    // The two runs are independent; do them concurrently.
    let (modified, classical) = std::thread::scope(|scope| {
        let m = scope.spawn(|| run(Method::ModifiedNewton));
        let c = scope.spawn(|| run(Method::ClassicalNewton));
        (m.join().expect("solver panicked"), c.join().expect("solver panicked"))
    });

    let agreement = norm2(&modified.solution.sub(&classical.solution));

    if json {
        let row = |r: &SolveResult| {
            serde_json::json!({
                "status": r.status,
                "iterations": r.trace.len(),
                "final_residual": r.final_residual,
                "solution": r.solution.as_slice(),
                "failure": r.failure,
            })
        };
        let summary = serde_json::json!({
            "modified_newton": row(&modified),
            "classical_newton": row(&classical),
            "agreement_norm": agreement,
        });
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    } else {
        println!(
            "{:<18} {:>10} {:>14} {:>16}",
            "method", "iterations", "status", "final n_1"
        );
        for (name, r) in [("modified_newton", &modified), ("classical_newton", &classical)] {
            println!(
                "{:<18} {:>10} {:>14} {:>16.3e}",
                name,
                r.trace.len(),
                status_name(r.status),
                r.final_residual
            );
            if let Some(f) = &r.failure {
                println!("    failure: {f}");
            }
        }
        println!("solution agreement (2-norm): {agreement:.3e}");
    }

    // Converged iff both converged; otherwise surface the worse status.
    let code = status_exit(modified.status).max(status_exit(classical.status));
    Ok(code)
}

fn cmd_order(path: &std::path::Path, json: bool) -> Result<u8, String> {
    let cfg = load_config(path)?;
    let solver_cfg = cfg.solver.to_solver_config();
    solver_cfg.validate()?;
    let instance = ProblemInstance::build(&cfg)?;
    let z0 = cfg.initial_vector();

    let result = instance.with_system(cfg.phi, |sys| solve(sys, &z0, &solver_cfg));
    if result.status != SolveStatus::Converged {
        return Err(format!(
            "run did not converge (status {}); cannot estimate order",
            status_name(result.status)
        ));
    }

    // Refine the reference with extra iterations at a much tighter
    // tolerance, starting from the converged point.
    let mut refine_cfg = solver_cfg;
    refine_cfg.tol = (solver_cfg.tol * 1e-8).max(1e-15);
    refine_cfg.max_iter = solver_cfg.max_iter + 20;
    let reference = instance
        .with_system(cfg.phi, |sys| solve(sys, &result.solution, &refine_cfg))
        .solution;

    let mut norms = vec![norm2(&z0.sub(&reference))];
    norms.extend(result.trace.iter().map(|r| norm2(&r.z.sub(&reference))));

    match estimate_order_from_norms(norms, &reference) {
        Ok(est) => {
            if json {
                let summary = serde_json::json!({
                    "per_step_orders": est.per_step_orders,
                    "error_norms": est.error_norms,
                    "reference_solution": est.reference_solution.as_slice(),
                });
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                println!("error norms (above precision floor):");
                for (k, e) in est.error_norms.iter().enumerate() {
                    println!("  e_{k} = {e:.6e}");
                }
                println!("per-step convergence orders rho_k:");
                for (k, rho) in est.per_step_orders.iter().enumerate() {
                    println!("  rho_{} = {rho:.3}", k + 1);
                }
            }
            Ok(0)
        }
        Err(e) => {
            eprintln!(
                "{e}; the iteration reaches the double-precision floor too quickly \
                 for a meaningful estimate — try a farther starting point"
            );
            Ok(EXIT_ORDER_DATA)
        }
    }
}

fn cmd_check(path: &std::path::Path, json: bool) -> Result<u8, String> {
    let cfg = load_config(path)?;
    let market = match ProblemInstance::build(&cfg)? {
        ProblemInstance::Market(m) => m,
        _ => return Err("check requires a market problem".into()),
    };
    // Test hook: deliberately corrupt the analytic Jacobian so the audit's
    // failure path can be exercised end to end.
    let corrupt = std::env::var("NCP_EQ_CORRUPT_JACOBIAN").is_ok_and(|v| v == "1");
    let items = run_check_suite(&market, cfg.phi, 100, 0x9e3779b9, corrupt);
    let all_passed = items.iter().all(|i| i.passed);

    if json {
        println!("{}", serde_json::to_string_pretty(&items).unwrap());
    } else {
        for item in &items {
            println!(
                "[{}] {:<55} value {:>12.3e}  tolerance {:>9.1e}",
                if item.passed { "pass" } else { "FAIL" },
                item.name,
                item.value,
                item.tolerance
            );
        }
    }
    if all_passed {
        Ok(0)
    } else {
        eprintln!("one or more checks failed");
        Ok(EXIT_CHECK_FAILED)
    }
}
