//! Runs every configured method on a shared problem and summarizes the results.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cubicqn::dataio::{normalize_rows, read_libsvm, synth_dataset, DataError, ZeroLabel};
use cubicqn::linalg::DenseMatrix;
use cubicqn::oracle::{CountingOracle, Objective, OracleError, QuadraticProblem};
use cubicqn::solvers::{
    adaptive_accelerated_crn, adaptive_inexact_crn, alt_adaptive_cubic, classical_lbfgs, classical_lsr1, damped_newton,
    exact_crn, gradient_descent, SolverConfig, SolverError, SolverTrace, StopCriteria,
};
use thiserror::Error;

use crate::config::{ExperimentConfig, MethodConfig, MethodKind, ProblemConfig};
use crate::report::{emit_plot_svg, emit_trace_csv, PlotSeries, XAxis};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("cannot build problem: {0}")]
    Data(#[from] DataError),
    #[error("cannot build problem: {0}")]
    Oracle(#[from] OracleError),
    #[error("{method}: {source}")]
    Solver { method: String, source: SolverError },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl BenchError {
    /// Process exit code: 1 for solver failures, 2 for configuration and input problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Solver { .. } | BenchError::Output { .. } => 1,
            _ => 2,
        }
    }
}

/// Materializes the configured objective.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<Box<dyn Objective>, BenchError> {
    Ok(match &cfg.problem {
        ProblemConfig::Synthetic { n, d, separation, seed, mu } => {
            let data = synth_dataset(*n, *d, seed.unwrap_or(cfg.seed), *separation)?;
            Box::new(data.to_problem(*mu)?)
        }
        ProblemConfig::Libsvm { path, mu, normalize, zero_as_negative } => {
            let zero = if *zero_as_negative { ZeroLabel::AsNegative } else { ZeroLabel::Reject };
            let mut data = read_libsvm(path, zero)?;
            if *normalize {
                data = normalize_rows(&data);
            }
            Box::new(data.to_problem(*mu)?)
        }
        ProblemConfig::Quadratic { diagonal, linear } => {
            let b = linear.clone().unwrap_or_else(|| vec![0.0; diagonal.len()]);
            Box::new(QuadraticProblem::new(DenseMatrix::from_diagonal(diagonal), b)?)
        }
    })
}

/// Runs one configured method from `x0`.
pub fn run_method(
    problem: &dyn Objective,
    method: &MethodConfig,
    cfg: &ExperimentConfig,
    x0: &[f64],
) -> Result<SolverTrace, SolverError> {
    let stop: StopCriteria = cfg.stop.into();
    let mut oracle = CountingOracle::new(problem);
    let l1 = || problem.smoothness().map(|s| s.l1);
    let mut trace = match method.kind {
        MethodKind::Gd => {
            let lr = match method.lr {
                Some(lr) => lr,
                None => 1.0 / l1()?,
            };
            gradient_descent(&mut oracle, lr, x0, &stop)?
        }
        MethodKind::DampedNewton => damped_newton(&mut oracle, method.gamma.unwrap_or(1.0), x0, &stop)?,
        MethodKind::Lbfgs => {
            classical_lbfgs(&mut oracle, method.lr.unwrap_or(1.0), method.memory.unwrap_or(10), x0, &stop)?
        }
        MethodKind::Lsr1 => {
            classical_lsr1(&mut oracle, method.lr.unwrap_or(1.0), method.memory.unwrap_or(10), x0, &stop)?
        }
        MethodKind::ExactCrn | MethodKind::Adaptive | MethodKind::Accelerated | MethodKind::AltAdaptive => {
            let mut sc = SolverConfig::for_problem(problem, method.hessian_policy())?;
            if let Some(m) = method.cubic_weight {
                sc.cubic_weight = m;
            }
            if method.kind == MethodKind::ExactCrn {
                sc.delta0 = 0.0;
            }
            sc.delta0 = method.delta0.unwrap_or(sc.delta0);
            sc.gamma_inc = method.gamma_inc.unwrap_or(sc.gamma_inc);
            sc.gamma_dec = method.gamma_dec.unwrap_or(sc.gamma_dec);
            sc.memory = method.memory.unwrap_or(sc.memory);
            sc.seed = cfg.seed;
            sc.stop = stop;
            match method.kind {
                MethodKind::ExactCrn => exact_crn(&mut oracle, &sc, x0)?,
                MethodKind::Adaptive => adaptive_inexact_crn(&mut oracle, &sc, x0)?,
                MethodKind::Accelerated => adaptive_accelerated_crn(&mut oracle, &sc, x0)?,
                _ => alt_adaptive_cubic(&mut oracle, &sc, x0)?,
            }
        }
    };
    trace.method = method.display_name();
    Ok(trace)
}

/// Outcome of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub name: String,
    pub outcome: Result<SolverTrace, String>,
}

/// Per-method line of [`RunSummary`].
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub name: String,
    /// `None` when the method failed; the message is in `error`.
    pub final_gap: Option<f64>,
    pub iterations: usize,
    /// First iteration with gap ≤ the configured target.
    pub iters_to_target: Option<usize>,
    pub hvp_equiv: u64,
    pub grad_evals: u64,
    pub wall_ns: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Best value seen over all runs minus the configured slack.
    pub f_star: f64,
    pub target_gap: f64,
    pub methods: Vec<MethodSummary>,
}

impl RunSummary {
    pub fn failures(&self) -> usize {
        self.methods.iter().filter(|m| m.error.is_some()).count()
    }

    /// Fixed-width table for terminals.
    pub fn table(&self) -> String {
        let mut out = format!(
            "f* proxy = {:e}   target gap = {:e}\n{:<28} {:>12} {:>8} {:>10} {:>10} {:>10}\n",
            self.f_star, self.target_gap, "method", "gap", "iters", "to_target", "hvp_equiv", "grads"
        );
        for m in &self.methods {
            match (&m.error, m.final_gap) {
                (Some(e), _) => out.push_str(&format!("{:<28} error: {e}\n", m.name)),
                (None, gap) => out.push_str(&format!(
                    "{:<28} {:>12.3e} {:>8} {:>10} {:>10} {:>10}\n",
                    m.name,
                    gap.unwrap_or(f64::NAN),
                    m.iterations,
                    m.iters_to_target.map_or("-".to_string(), |t| t.to_string()),
                    m.hvp_equiv,
                    m.grad_evals
                )),
            }
        }
        out
    }
}

/// Results of [`run_experiment`], in configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub results: Vec<MethodResult>,
    pub summary: RunSummary,
}

/// Runs all methods in parallel threads. A failing method is reported in the
/// summary without affecting the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, BenchError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let problem: &dyn Objective = problem.as_ref();
    let x0 = cfg.start.point(problem.dim());
    let results: Vec<MethodResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .methods
            .iter()
            .map(|m| {
                let x0 = &x0;
                scope.spawn(move || {
                    let started = Instant::now();
                    let outcome = run_method(problem, m, cfg, x0).map_err(|e| e.to_string());
                    if let Err(e) = &outcome {
                        log::warn!("{} failed: {e}", m.display_name());
                    } else {
                        log::info!("{} finished in {:?}", m.display_name(), started.elapsed());
                    }
                    MethodResult { name: m.display_name(), outcome }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let summary = summarize(&results, cfg.gap_slack, cfg.target_gap);
    Ok(ExperimentOutput { results, summary })
}

fn summarize(results: &[MethodResult], slack: f64, target: f64) -> RunSummary {
    let best = results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .flat_map(|t| t.records.iter().map(|r| r.f))
        .fold(f64::INFINITY, f64::min);
    let f_star = best - slack;
    let methods = results
        .iter()
        .map(|r| match &r.outcome {
            Ok(t) => {
                let last = t.records.last();
                MethodSummary {
                    name: r.name.clone(),
                    final_gap: Some(t.final_f() - f_star),
                    iterations: t.iterations(),
                    iters_to_target: t.records.iter().position(|rec| rec.f - f_star <= target),
                    hvp_equiv: last.map_or(0, |l| l.hvp_equiv),
                    grad_evals: last.map_or(0, |l| l.grad_evals),
                    wall_ns: last.map_or(0, |l| l.wall_ns),
                    error: None,
                }
            }
            Err(e) => MethodSummary {
                name: r.name.clone(),
                final_gap: None,
                iterations: 0,
                iters_to_target: None,
                hvp_equiv: 0,
                grad_evals: 0,
                wall_ns: 0,
                error: Some(e.clone()),
            },
        })
        .collect();
    RunSummary { f_star, target_gap: target, methods }
}

/// Files produced by [`write_outputs`].
pub const PLOT_ITERATIONS: &str = "gap_vs_iterations.svg";
pub const PLOT_COST: &str = "gap_vs_cost.svg";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Writes `<name>.csv` per successful method, both plots and `summary.csv`
/// into `dir`; returns the written paths.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let fail =
        |path: &Path, e: &dyn std::fmt::Display| BenchError::Output { path: path.into(), message: e.to_string() };
    std::fs::create_dir_all(dir).map_err(|e| fail(dir, &e))?;
    let mut written = Vec::new();
    let traces: Vec<&SolverTrace> = output.results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    for t in &traces {
        let path = dir.join(format!("{}.csv", t.method));
        emit_trace_csv(t, &path).map_err(|e| fail(&path, &e))?;
        written.push(path);
    }
    let series: Vec<PlotSeries<'_>> =
        traces.iter().map(|t| PlotSeries { name: &t.method, records: &t.records }).collect();
    for (file, axis) in [(PLOT_ITERATIONS, XAxis::Iteration), (PLOT_COST, XAxis::HvpEquivalent)] {
        let path = dir.join(file);
        emit_plot_svg(&series, output.summary.f_star, axis, &path).map_err(|e| fail(&path, &e))?;
        written.push(path);
    }
    let path = dir.join(SUMMARY_CSV);
    write_summary_csv(&output.summary, &path).map_err(|e| fail(&path, &e))?;
    written.push(path);
    Ok(written)
}

fn write_summary_csv(summary: &RunSummary, path: &Path) -> csv::Result<()> {
    use crate::report::fmt_float;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "final_gap",
        "iterations",
        "iters_to_target",
        "hvp_equiv",
        "grad_evals",
        "wall_ns",
        "error",
    ])?;
    for m in &summary.methods {
        w.write_record([
            m.name.clone(),
            m.final_gap.map(fmt_float).unwrap_or_default(),
            m.iterations.to_string(),
            m.iters_to_target.map(|t| t.to_string()).unwrap_or_default(),
            m.hvp_equiv.to_string(),
            m.grad_evals.to_string(),
            m.wall_ns.to_string(),
            m.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
