//! Self-test run by `cubicqn check`: derivative checks on the fixture and a
//! handful of model and subproblem invariants on seeded random instances.

use cubicqn::cubic::{solve_dense, solve_low_rank, stationarity_residual};
use cubicqn::dataio::fixture_dataset;
use cubicqn::linalg::{kernels, sym_eig, DenseMatrix};
use cubicqn::models::{sample_directions, LowRankHessianModel};
use cubicqn::oracle::check_derivatives;
use cubicqn::solvers::accel_coefficients;

/// One named check and whether it passed.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn line(name: &'static str, passed: bool, detail: String) -> CheckLine {
    CheckLine { name, passed, detail }
}

fn random_vec(d: usize, seed: u64, stream: u64, scale: f64) -> Vec<f64> {
    let mut v = sample_directions(d, 1, seed, stream).pop().expect("one direction");
    kernels::scale(scale, &mut v);
    v
}

fn derivatives() -> CheckLine {
    let problem = fixture_dataset().to_problem(0.0).expect("fixture builds");
    let mut worst = 0.0f64;
    for k in 0..10 {
        let x = random_vec(50, 1, k, 2.0);
        match check_derivatives(&problem, &x, 5, k) {
            Ok(r) => worst = worst.max(r.max_rel_err()),
            Err(e) => return line("derivatives", false, e.to_string()),
        }
    }
    line("derivatives", worst <= 1e-6, format!("max relative error {worst:.2e} (limit 1e-6)"))
}

fn secant_and_psd() -> CheckLine {
    let d = 8;
    let mut a = DenseMatrix::identity(d);
    for k in 0..d as u64 {
        a.add_outer(1.0, &random_vec(d, 2, k, 1.0)).expect("matching sizes");
    }
    let mut worst_secant = 0.0f64;
    let mut worst_eig = f64::INFINITY;
    let mut b = LowRankHessianModel::new(d, 0.0);
    for k in 0..6 {
        let s = random_vec(d, 3, k, 1.0);
        let y = a.matvec(&s).expect("matching sizes");
        if b.lbfgs_update(&s, &y, None).map(|st| st.is_accepted()).unwrap_or(false) {
            let bs = b.matvec(&s).expect("matching sizes");
            worst_secant = worst_secant.max(kernels::dist(&bs, &y) / kernels::norm(&y));
            if let Ok(eig) = b.materialize_dense().and_then(|m| Ok(sym_eig(&m)?)) {
                worst_eig = worst_eig.min(eig.min() / eig.max().abs().max(1e-300));
            }
        }
    }
    let ok = worst_secant <= 1e-9 && worst_eig >= -1e-9;
    line("secant+psd", ok, format!("secant error {worst_secant:.2e}, min eig / max eig {worst_eig:.2e}"))
}

fn subproblem() -> CheckLine {
    let d = 30;
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let mut model = LowRankHessianModel::new(d, 0.1 * k as f64);
        for j in 0..(k % 8 + 1) {
            if model.push_term(0.5 + j as f64, random_vec(d, 4 + k, j, 1.0)).is_err() {
                return line("subproblem", false, "cannot build model".into());
            }
        }
        let g = random_vec(d, 5, k, 1.0);
        let (m, delta) = (0.1 + k as f64, 1e-3 * k as f64);
        let dense = model.materialize_dense().expect("small model");
        match (solve_low_rank(&model, &g, m, delta, 1e-13), solve_dense(&dense, &g, m, delta, 1e-13)) {
            (Ok(lr), Ok(dn)) => {
                let res = stationarity_residual(&model, &g, m, delta, &lr.h).unwrap_or(f64::INFINITY);
                worst = worst.max(kernels::dist(&lr.h, &dn.h) / dn.r).max(res);
            }
            _ => return line("subproblem", false, "solver error".into()),
        }
    }
    line("subproblem", worst <= 1e-8, format!("low-rank vs dense / residual {worst:.2e} (limit 1e-8)"))
}

fn coefficients() -> CheckLine {
    let mut worst = 0.0f64;
    for t in 1..=10_000usize {
        let (alpha, a) = accel_coefficients(t);
        let (_, prev) = accel_coefficients(t - 1);
        let tf = t as f64;
        worst = worst.max((a * (tf + 1.0) * (tf + 2.0) * (tf + 3.0) - 6.0).abs());
        worst = worst.max(((1.0 - alpha) * prev - a).abs());
    }
    line("coefficients", worst <= 1e-12, format!("max identity error {worst:.2e}"))
}

/// Runs every self-test.
pub fn run_checks() -> Vec<CheckLine> {
    vec![derivatives(), secant_and_psd(), subproblem(), coefficients()]
}
