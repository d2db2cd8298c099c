//! Acceptance suite: one line per criterion, in order.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails if any criterion fails, except those listed in `KNOWN_RED`,
//! which are still reported as FAIL.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cubicqn::cubic::{solve_dense, solve_low_rank, stationarity_residual, EstimatingSequenceState};
use cubicqn::dataio::{
    fixture_dataset, normalize_rows, parse_libsvm, separable_fixture_dataset, serialize, DataError, RawDataset,
    SparseRow, ZeroLabel,
};
use cubicqn::linalg::{kernels, sym_eig, DenseMatrix};
use cubicqn::models::{build_history_model, build_sampling_model, HistoryUpdate, LowRankHessianModel, PairBuffer};
use cubicqn::oracle::{check_derivatives, CountingOracle, LogisticProblem, Objective, QuadraticProblem};
use cubicqn::solvers::{
    accel_coefficients, adaptive_accelerated_crn, adaptive_condition_holds, adaptive_inexact_crn, alt_adaptive_cubic,
    damped_newton, exact_crn, HessianPolicy, SolverConfig, SolverTrace, StopCriteria, StopReason,
};
use cubicqn_bench::{run_experiment, write_outputs, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail; see the README for the measurements.
const KNOWN_RED: &[usize] = &[7];

const GAP_FLOOR: f64 = 1e-16;
const SAMPLING: HessianPolicy = HessianPolicy::BroydenSampling { upsilon: 1.0 };

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_psd(rng: &mut ChaCha8Rng, d: usize) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(d, d);
    for _ in 0..d {
        a.add_outer(1.0, &rand_vec(rng, d)).unwrap();
    }
    a.add_diagonal(1e-3);
    a
}

fn fixture() -> LogisticProblem {
    fixture_dataset().to_problem(0.0).unwrap()
}

fn fixture_config(p: &LogisticProblem, policy: HessianPolicy, iters: usize) -> SolverConfig {
    let mut cfg = SolverConfig::for_problem(p, policy).unwrap();
    cfg.stop.max_iters = iters;
    cfg.stop.grad_tol = 0.0;
    cfg
}

type Runner = fn(&mut CountingOracle<'_>, &SolverConfig, &[f64]) -> Result<SolverTrace, cubicqn::solvers::SolverError>;

fn run(p: &LogisticProblem, runner: Runner, cfg: &SolverConfig) -> SolverTrace {
    let mut o = CountingOracle::new(p);
    runner(&mut o, cfg, &vec![1.0; p.dim()]).unwrap()
}

fn c1_derivatives() -> Outcome {
    let start = Instant::now();
    let p = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let x: Vec<f64> = rand_vec(&mut rng, p.dim()).iter().map(|v| 3.0 * v).collect();
        worst = worst.max(check_derivatives(&p, &x, 1, k).unwrap().max_rel_err());
    }
    let el = start.elapsed();
    outcome(worst <= 1e-6 && within(el, 5.0), format!("max rel err {worst:.2e} (≤ 1e-6), {el:.2?} (< 5 s)"))
}

fn c2_subproblem() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut agree, mut resid) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let d = rng.random_range(1..=50);
        let k = rng.random_range(0..=16);
        let mut model = LowRankHessianModel::new(d, rng.random_range(0.0..1.0));
        for _ in 0..k {
            model.push_term(rng.random_range(0.0..3.0), rand_vec(&mut rng, d)).unwrap();
        }
        let g = rand_vec(&mut rng, d);
        let m = 10f64.powf(rng.random_range(-2.0..1.0));
        let delta = if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-8.0..0.0)) };
        let lr = solve_low_rank(&model, &g, m, delta, 1e-13).unwrap();
        let dense = model.materialize_dense().unwrap();
        let dn = solve_dense(&dense, &g, m, delta, 1e-13).unwrap();
        agree = agree.max(kernels::dist(&lr.h, &dn.h) / dn.r.max(f64::MIN_POSITIVE));
        let scale = kernels::norm(&g).max(1.0);
        resid = resid.max(stationarity_residual(&model, &g, m, delta, &lr.h).unwrap() / scale);
        resid = resid.max(stationarity_residual(&dense, &g, m, delta, &dn.h).unwrap() / scale);
    }
    let el = start.elapsed();
    outcome(
        agree <= 1e-8 && resid <= 1e-8 && within(el, 10.0),
        format!("step disagreement {agree:.2e}, residual {resid:.2e} (both ≤ 1e-8), {el:.2?} (< 10 s)"),
    )
}

fn random_instance(rng: &mut ChaCha8Rng, k: u64) -> Box<dyn Objective> {
    let d = rng.random_range(2..=30);
    if k.is_multiple_of(2) {
        let n = rng.random_range(d..=4 * d);
        let data = cubicqn::dataio::synth_dataset(n, d, k, 2.0).unwrap();
        Box::new(data.to_problem(rng.random_range(0.0..0.1)).unwrap())
    } else {
        let a = random_psd(rng, d);
        Box::new(QuadraticProblem::new(a, rand_vec(rng, d)).unwrap())
    }
}

/// Range of the eigenvalues of `B − H`.
fn gap_spectrum(b: &LowRankHessianModel, h: &DenseMatrix) -> (f64, f64) {
    let e = sym_eig(&b.materialize_dense().unwrap().sub(h).unwrap()).unwrap();
    (e.min(), e.max())
}

fn c3_spectral_bounds() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mem = 10;
    // Worst violation of each bound, in units of L1 beyond the allowed interval.
    let (mut hist, mut damped, mut sampled) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..50 {
        let p = random_instance(&mut rng, k);
        let d = p.dim();
        let l1 = p.smoothness().unwrap().l1;
        let mut buffer = PairBuffer::new(mem);
        let mut x = rand_vec(&mut rng, d);
        let mut g = p.gradient(&x).unwrap();
        for _ in 0..mem {
            let step: Vec<f64> = rand_vec(&mut rng, d).iter().map(|v| 0.5 * v).collect();
            let x_new = kernels::add_scaled(&x, 1.0, &step);
            let g_new = p.gradient(&x_new).unwrap();
            buffer.push(step, kernels::sub(&g_new, &g));
            x = x_new;
            g = g_new;
        }
        let h = p.hessian(&x).unwrap();
        let (b, _) = build_history_model(&buffer, d, HistoryUpdate::Lbfgs, 0.0).unwrap();
        let (lo, hi) = gap_spectrum(&b, &h);
        hist = hist.max(-l1 - 1e-9 - lo).max(hi - mem as f64 * l1 - 1e-9);
        let (b, _) = build_history_model(&buffer, d, HistoryUpdate::LbfgsDamped, 0.0).unwrap();
        let (lo, hi) = gap_spectrum(&b, &h);
        damped = damped.max(-l1 - 1e-9 - lo).max(hi - l1 - 1e-9);
        let mut o = CountingOracle::new(p.as_ref());
        let upsilon = rng.random_range(0.0..=1.0);
        let b = build_sampling_model(&mut o, &x, rng.random_range(1..=d), 5, k, upsilon).unwrap();
        let (lo, hi) = gap_spectrum(&b, &h);
        sampled = sampled.max(-l1 - 1e-9 - lo).max(hi - 1e-9);
    }
    let el = start.elapsed();
    outcome(
        hist <= 0.0 && damped <= 0.0 && sampled <= 0.0 && within(el, 20.0),
        format!(
            "largest excursion beyond bound: history {hist:.2e}, damped {damped:.2e}, sampled {sampled:.2e} (all ≤ 0), {el:.2?} (< 20 s)"
        ),
    )
}

fn c4_secant_psd() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut secant, mut psd) = (0.0f64, f64::INFINITY);
    let mut accepted = 0;
    for k in 0..500 {
        let d = rng.random_range(2..=12);
        let a = random_psd(&mut rng, d);
        let broyden = k % 2 == 1;
        let upsilon = rng.random_range(0.0..=1.0);
        let mut b = LowRankHessianModel::new(d, if broyden { 0.0 } else { rng.random_range(0.0..1.0) });
        for _ in 0..rng.random_range(1..=8) {
            let s = rand_vec(&mut rng, d);
            let y = a.matvec(&s).unwrap();
            let ok = if broyden {
                b.broyden_update(&s, &y, upsilon).is_ok()
            } else {
                b.lbfgs_update(&s, &y, None).unwrap().is_accepted()
            };
            if !ok {
                continue;
            }
            accepted += 1;
            let bs = b.matvec(&s).unwrap();
            secant = secant.max(kernels::dist(&bs, &y) / kernels::norm(&y).max(1.0));
            let e = sym_eig(&b.materialize_dense().unwrap()).unwrap();
            let spec_norm = e.max().abs().max(e.min().abs());
            psd = psd.min(e.min() / spec_norm.max(f64::MIN_POSITIVE));
        }
    }
    let el = start.elapsed();
    outcome(
        secant <= 1e-9 && psd >= -1e-9 && within(el, 10.0),
        format!(
            "{accepted} updates: secant error {secant:.2e} (≤ 1e-9), min eig / ‖B‖ {psd:.2e} (≥ −1e-9), {el:.2?} (< 10 s)"
        ),
    )
}

fn c5_monotone() -> Outcome {
    let start = Instant::now();
    let mut worst_rise = f64::NEG_INFINITY;
    let mut min_long = usize::MAX;
    let mut lens = Vec::new();
    for (label, data) in [("noisy", fixture_dataset()), ("separable", separable_fixture_dataset())] {
        let p = data.to_problem(0.0).unwrap();
        let runs: [(Runner, HessianPolicy); 5] = [
            (adaptive_inexact_crn, HessianPolicy::LbfgsHistory),
            (adaptive_inexact_crn, SAMPLING),
            (alt_adaptive_cubic, HessianPolicy::LbfgsHistory),
            (alt_adaptive_cubic, SAMPLING),
            (exact_crn, HessianPolicy::Exact),
        ];
        for (runner, policy) in runs {
            let mut cfg = fixture_config(&p, policy, 200);
            cfg.gamma_dec = 0.8;
            let t = run(&p, runner, &cfg);
            for w in t.records.windows(2) {
                worst_rise = worst_rise.max(w[1].f - w[0].f);
            }
            if label == "separable" {
                min_long = min_long.min(t.iterations());
            }
            lens.push(t.iterations());
        }
    }
    let el = start.elapsed();
    outcome(
        worst_rise <= 1e-12 && min_long >= 200 && within(el, 30.0),
        format!(
            "largest increase {worst_rise:.2e} (≤ 1e-12), separable runs ≥ {min_long} iterations (≥ 200), run lengths {lens:?}, {el:.2?} (< 30 s)"
        ),
    )
}

fn c6_certificates() -> Outcome {
    let p = fixture();
    let mut checked = 0;
    let mut failed = 0;
    let mut complete = true;
    for policy in [HessianPolicy::LbfgsHistory, SAMPLING] {
        let cfg = fixture_config(&p, policy, 200);
        for runner in [adaptive_inexact_crn as Runner, adaptive_accelerated_crn] {
            let t = run(&p, runner, &cfg);
            complete &= t.certificates.len() == t.iterations();
            for c in &t.certificates {
                checked += 1;
                let g = p.gradient(&c.point).unwrap();
                if !adaptive_condition_holds(&g, &c.reference, &c.point, c.delta, cfg.cubic_weight) {
                    failed += 1;
                }
            }
        }
    }
    outcome(failed == 0 && complete, format!("{checked} accepted steps replayed, {failed} violations"))
}

/// Least-squares slope of `ln max(gap, floor)` against `ln t` over `t ∈ [10, 200]`.
fn log_log_slope(t: &SolverTrace, f_star: f64) -> f64 {
    let pts: Vec<(f64, f64)> = t
        .records
        .iter()
        .filter(|r| (10..=200).contains(&r.t))
        .map(|r| ((r.t as f64).ln(), (r.f - f_star).max(GAP_FLOOR).ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn iters_to(t: &SolverTrace, f_star: f64, gap: f64) -> Option<usize> {
    t.records.iter().find(|r| r.f - f_star <= gap).map(|r| r.t)
}

/// Optimal value of the fixture from damped Newton run to ‖∇f‖ ≤ 1e-13.
fn fixture_optimum(p: &LogisticProblem) -> f64 {
    let stop = StopCriteria { max_iters: 200, grad_tol: 1e-13, timing: false };
    let mut o = CountingOracle::new(p);
    let t = damped_newton(&mut o, 1.0, &vec![0.0; p.dim()], &stop).unwrap();
    assert!(t.records.last().unwrap().gnorm <= 1e-13, "damped Newton did not reach 1e-13");
    t.final_f()
}

fn c7_rates() -> Outcome {
    let start = Instant::now();
    let p = fixture();
    let f_star = fixture_optimum(&p);
    let lbfgs = run(&p, adaptive_inexact_crn, &fixture_config(&p, HessianPolicy::LbfgsHistory, 200));
    let exact = run(&p, exact_crn, &fixture_config(&p, HessianPolicy::Exact, 200));
    let sampled = run(&p, adaptive_inexact_crn, &fixture_config(&p, SAMPLING, 200));
    let accel = run(&p, adaptive_accelerated_crn, &fixture_config(&p, HessianPolicy::LbfgsHistory, 200));
    let (s_l, s_e, s_s) =
        (log_log_slope(&lbfgs, f_star), log_log_slope(&exact, f_star), log_log_slope(&sampled, f_star));
    let (t_plain, t_acc) = (iters_to(&lbfgs, f_star, 1e-6), iters_to(&accel, f_star, 1e-6));
    let accel_ok = matches!((t_acc, t_plain), (Some(a), Some(b)) if a < b) || (t_acc.is_some() && t_plain.is_none());
    let el = start.elapsed();
    let slopes_ok = s_l <= -0.9 && s_e <= -1.8 && s_s <= -1.8;
    outcome(
        slopes_ok && accel_ok && within(el, 120.0),
        format!(
            "slopes: L-BFGS {s_l:.2} (≤ −0.9), exact {s_e:.2} (≤ −1.8), sampled {s_s:.2} (≤ −1.8) [{}]; \
             iterations to 1e-6: accelerated {t_acc:?} vs plain {t_plain:?} [{}]; {el:.2?} (< 120 s)",
            if slopes_ok { "ok" } else { "FAIL" },
            if accel_ok { "ok" } else { "FAIL" },
        ),
    )
}

fn c8_inner_budget() -> Outcome {
    let p = fixture();
    let mut cfg = fixture_config(&p, HessianPolicy::LbfgsHistory, 200);
    cfg.gamma_inc = 2.0;
    cfg.delta0 = 1e-8;
    let l1 = p.smoothness().unwrap().l1;
    let budget = (cfg.memory as f64 * l1 / cfg.delta0).log2().ceil() as u64 + 5;
    let t = run(&p, adaptive_inexact_crn, &cfg);
    outcome(
        t.delta_increases <= budget,
        format!("{} δ increases over {} iterations (≤ {budget})", t.delta_increases, t.iterations()),
    )
}

fn c9_costs() -> Outcome {
    let p = fixture();
    let d = p.dim() as u64;
    let exact = run(&p, exact_crn, &fixture_config(&p, HessianPolicy::Exact, 200));
    let t_exact = exact.iterations() as u64;
    let hvp = exact.records.last().unwrap().hvp_equiv;
    let exact_ok = hvp.abs_diff(d * t_exact) <= d;

    let cfg = fixture_config(&p, SAMPLING, 200);
    let m = cfg.memory as u64;
    let sampled = run(&p, adaptive_inexact_crn, &cfg);
    // Every outer step: m HVPs and one gradient at the accepted point, plus one
    // gradient per retried trial point.
    let per_step_ok = sampled.records.windows(2).all(|w| {
        w[1].hvp_equiv - w[0].hvp_equiv == m && w[1].grad_evals - w[0].grad_evals == 1 + w[1].inner_repeats as u64
    });
    let t_s = sampled.iterations() as u64;
    // A run that stalls built one more model than it accepted steps.
    let extra = u64::from(sampled.stop == StopReason::Stalled);
    let totals_ok = sampled.records.last().unwrap().hvp_equiv == m * t_s
        && sampled.counters.n_hvp == m * (t_s + extra)
        && sampled.counters.n_full_hessian == 0;
    outcome(
        exact_ok && per_step_ok && totals_ok,
        format!(
            "exact: hvp_equiv {hvp} vs d·T = {} (± {d}); sampled: {} HVPs over {t_s} steps (m = {m}, stop {:?}), {} gradients, {} retries, per-step counts {}",
            d * t_exact,
            sampled.counters.n_hvp,
            sampled.stop,
            sampled.counters.n_grad,
            sampled.total_inner_repeats(),
            if per_step_ok { "exact" } else { "WRONG" },
        ),
    )
}

/// Golden-section minimum of ψ along the ray `x₀ − r·g_agg/‖g_agg‖`.
fn numeric_minimum(psi: &EstimatingSequenceState) -> f64 {
    let gn = kernels::norm(&psi.g_agg);
    let at = |r: f64| psi.value(&kernels::add_scaled(&psi.anchor, -r / gn, &psi.g_agg));
    // ψ'(r) = κ₂r + κ₃r² − ‖g‖ ≥ 0 beyond either bound.
    let mut hi = f64::INFINITY;
    if psi.kappa2 > 0.0 {
        hi = hi.min(gn / psi.kappa2);
    }
    if psi.kappa3 > 0.0 {
        hi = hi.min((gn / psi.kappa3).sqrt());
    }
    let (mut a, mut b) = (0.0, hi);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - ratio * (b - a);
        let e = a + ratio * (b - a);
        if at(c) < at(e) {
            b = e;
        } else {
            a = c;
        }
    }
    at(0.5 * (a + b))
}

fn c10_estimating_sequence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(1..=20);
        let mut psi = EstimatingSequenceState::new(rand_vec(&mut rng, d));
        psi.kappa2 = if rng.random_bool(0.2) { 0.0 } else { 10f64.powf(rng.random_range(-4.0..2.0)) };
        psi.kappa3 = 10f64.powf(rng.random_range(-4.0..2.0));
        for _ in 0..rng.random_range(1..=5) {
            let point = rand_vec(&mut rng, d);
            let grad = rand_vec(&mut rng, d);
            psi.add_linearization(rng.random_range(0.1..3.0), &point, rng.random_range(-1.0..1.0), &grad);
        }
        let closed = psi.value(&psi.minimize().unwrap());
        let numeric = numeric_minimum(&psi);
        worst = worst.max((closed - numeric).abs() / closed.abs().max(1.0));
    }
    let mut coef = 0.0f64;
    for t in 1..=10_000usize {
        let (alpha, a) = accel_coefficients(t);
        let (_, prev) = accel_coefficients(t - 1);
        let tf = t as f64;
        coef = coef.max((a * (tf + 1.0) * (tf + 2.0) * (tf + 3.0) - 6.0).abs());
        coef = coef.max(((1.0 - alpha) * prev - a).abs());
    }
    outcome(
        worst <= 1e-10 && coef <= 1e-12,
        format!("ψ closed form vs numeric {worst:.2e} (≤ 1e-10), coefficient identities {coef:.2e} (≤ 1e-12)"),
    )
}

fn random_dataset(rng: &mut ChaCha8Rng) -> RawDataset {
    let n = rng.random_range(1..=30);
    let dim = rng.random_range(1..=40);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = SparseRow::new();
        for j in 1..=dim {
            if rng.random_bool(0.3) {
                let v = match rng.random_range(0..4) {
                    0 => rng.random_range(-1.0..1.0),
                    1 => rng.random_range(-1.0..1.0) * 1e-300,
                    2 => rng.random_range(-1e6..1e6),
                    _ => rng.random_range(-100i32..100) as f64,
                };
                row.push((j, v));
            }
        }
        rows.push(row);
        labels.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    }
    let max_index = rows.iter().filter_map(|r| r.last().map(|&(j, _)| j)).max().unwrap_or(0);
    RawDataset::new(rows, labels, max_index).unwrap()
}

fn c11_parser() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut round_trips, mut norm_err) = (0, 0.0f64);
    for _ in 0..100 {
        let data = random_dataset(&mut rng);
        let mut text = Vec::new();
        serialize(&data, &mut text).unwrap();
        if parse_libsvm(text.as_slice(), ZeroLabel::Reject).unwrap() == data {
            round_trips += 1;
        }
        for row in normalize_rows(&data).rows() {
            let nrm = row.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            norm_err = norm_err.max((nrm - 1.0).abs());
        }
    }
    let malformed = [
        ("+1 1:1\n-1 2:abc\n", 2),
        ("+1 1:1\n\n# note\n-1 4:1 3:1\n", 4),
        ("+1 0:1\n", 1),
        ("x 1:1\n", 1),
        ("+1 1:1\n+1 2:1\n+1 7\n", 3),
        ("+1 2:1 2:1\n", 1),
        ("-1 1:inf\n", 1),
        ("0 1:1\n", 1),
    ];
    let mut wrong_lines = Vec::new();
    for (text, line) in malformed {
        match parse_libsvm(text.as_bytes(), ZeroLabel::Reject) {
            Err(DataError::Parse { line: l, .. }) if l == line => {}
            other => wrong_lines.push(format!("{text:?} -> {other:?}")),
        }
    }
    outcome(
        round_trips == 100 && norm_err <= 1e-12 && wrong_lines.is_empty(),
        format!(
            "{round_trips}/100 round trips, max |‖a‖ − 1| {norm_err:.2e} (≤ 1e-12), {}/{} malformed lines located{}",
            malformed.len() - wrong_lines.len(),
            malformed.len(),
            if wrong_lines.is_empty() { String::new() } else { format!(": {wrong_lines:?}") },
        ),
    )
}

fn fixture_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixture.toml")
}

fn c12_determinism() -> Outcome {
    let cfg = ExperimentConfig::load(&fixture_config_path()).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut written = Vec::new();
    for dir in &dirs {
        let out = run_experiment(&cfg).unwrap();
        let mut files: Vec<PathBuf> = write_outputs(&out, dir.path()).unwrap();
        files.sort();
        written.push(files);
    }
    let names = |files: &[PathBuf]| -> Vec<String> {
        files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect()
    };
    let mut differing = Vec::new();
    if names(&written[0]) != names(&written[1]) {
        differing.push("file list".to_string());
    }
    for (a, b) in written[0].iter().zip(&written[1]) {
        if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
            differing.push(names(std::slice::from_ref(a)).remove(0));
        }
    }
    let csv = written[0].iter().filter(|f| f.extension().is_some_and(|e| e == "csv")).count();
    let svg = written[0].iter().filter(|f| f.extension().is_some_and(|e| e == "svg")).count();
    outcome(
        differing.is_empty() && csv > 0 && svg == 2,
        format!("{csv} CSV and {svg} SVG files compared, {} differ {differing:?}", differing.len()),
    )
}

type Criterion = fn() -> Outcome;

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("derivative correctness", c1_derivatives),
        ("subproblem oracle equivalence", c2_subproblem),
        ("quasi-Newton spectral bounds", c3_spectral_bounds),
        ("secant and PSD updates", c4_secant_psd),
        ("monotonicity", c5_monotone),
        ("adaptive certificate replay", c6_certificates),
        ("rate slopes", c7_rates),
        ("inner-repeat budget", c8_inner_budget),
        ("cost accounting", c9_costs),
        ("estimating-sequence minimizer", c10_estimating_sequence),
        ("LIBSVM parser", c11_parser),
        ("determinism", c12_determinism),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        let o = check();
        let known = KNOWN_RED.contains(&id);
        let tag = match (o.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("[{id:>2}] {tag:<12} {name}: {}", o.detail);
        if o.passed {
            passed += 1;
        } else if !known {
            unexpected.push(id);
        }
    }
    println!("{passed}/{} criteria pass", criteria.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
