//! Monotone adaptive cubic methods.

use super::{
    adaptive_step, raise_delta, HessianPolicy, ModelSource, Recorder, SolverConfig, SolverError, SolverTrace,
    StepCertificate, StopReason,
};
use crate::linalg::kernels;
use crate::oracle::CountingOracle;

/// Adaptive inexact cubic-regularized Newton.
///
/// Each iteration builds `B_t`, takes the cubic step from `x_t` with slack
/// `δ_t`, and retries with `δ_t ← γ_inc·δ_t` while
/// `⟨∇f(x₊), x_t − x₊⟩ < min{‖∇f(x₊)‖²/(4δ_t), ‖∇f(x₊)‖^{3/2}/√(3M)}`.
/// `δ` is carried forward and never decreased.
pub fn adaptive_inexact_crn(
    oracle: &mut CountingOracle<'_>,
    cfg: &SolverConfig,
    x0: &[f64],
) -> Result<SolverTrace, SolverError> {
    run_adaptive(oracle, cfg, x0, "adaptive")
}

/// Cubic Newton with the exact Hessian: [`adaptive_inexact_crn`] with the
/// `Exact` policy (`δ₀` as configured, typically 0).
pub fn exact_crn(oracle: &mut CountingOracle<'_>, cfg: &SolverConfig, x0: &[f64]) -> Result<SolverTrace, SolverError> {
    let cfg = SolverConfig { policy: HessianPolicy::Exact, ..cfg.clone() };
    run_adaptive(oracle, &cfg, x0, "exact-crn")
}

fn run_adaptive(
    oracle: &mut CountingOracle<'_>,
    cfg: &SolverConfig,
    x0: &[f64],
    name: &str,
) -> Result<SolverTrace, SolverError> {
    cfg.validate()?;
    let mut rec = Recorder::new(name, &cfg.stop);
    let mut source = ModelSource::new(cfg);
    let mut x = x0.to_vec();
    let (mut f, mut g) = oracle.value_grad(&x)?;
    let mut delta = cfg.delta0;
    let mut increases = 0u64;
    let mut certificates = Vec::new();
    rec.push(oracle, f, kernels::norm(&g), delta, 0, 0.0);

    let stop = loop {
        let t = rec.len() - 1;
        let gnorm = kernels::norm(&g);
        if gnorm <= cfg.stop.grad_tol || gnorm == 0.0 {
            break StopReason::GradientTolerance;
        }
        if t >= cfg.stop.max_iters {
            break StopReason::MaxIterations;
        }
        let model = source.build(oracle, &x, t)?;
        let Some(step) = adaptive_step(oracle, &model, &x, &g, &mut delta, cfg, t)? else {
            break StopReason::Stalled;
        };
        increases += step.repeats as u64;
        source.observe(&x, &g, &step.x, &step.g);
        certificates.push(StepCertificate { t, reference: x, point: step.x.clone(), delta });
        x = step.x;
        f = step.f;
        g = step.g;
        rec.push(oracle, f, kernels::norm(&g), delta, step.repeats, step.step_norm);
    };
    let mut trace = rec.finish(oracle, x, stop);
    trace.delta_increases = increases;
    trace.skipped_pairs = source.skipped;
    trace.certificates = certificates;
    Ok(trace)
}

/// Relative rounding level, in units of machine epsilon, below which
/// [`alt_adaptive_cubic`] treats a required decrease as unresolvable.
pub const VALUE_NOISE_ULPS: f64 = 16.0;

/// Adaptive cubic method with a function-value acceptance test.
///
/// The step from `x_t` with slack `δ_t` is accepted once
/// `f(x₊) ≤ f(x_t) + ½⟨∇f(x_t), h⟩ − (M/12)‖h‖³`; until then `δ_t ← γ_inc·δ_t`.
/// After acceptance `δ_{t+1} = γ_dec·δ_t`. The run stops as stalled when a
/// trial is rejected while the required decrease is within
/// [`VALUE_NOISE_ULPS`] ulps of `|f|`, where function values cannot resolve it.
pub fn alt_adaptive_cubic(
    oracle: &mut CountingOracle<'_>,
    cfg: &SolverConfig,
    x0: &[f64],
) -> Result<SolverTrace, SolverError> {
    cfg.validate()?;
    let mut rec = Recorder::new("alt-adaptive", &cfg.stop);
    let mut source = ModelSource::new(cfg);
    let m = cfg.cubic_weight;
    let mut x = x0.to_vec();
    let (mut f, mut g) = oracle.value_grad(&x)?;
    let mut delta = cfg.delta0;
    let mut increases = 0u64;
    rec.push(oracle, f, kernels::norm(&g), delta, 0, 0.0);

    let stop = loop {
        let t = rec.len() - 1;
        let gnorm = kernels::norm(&g);
        if gnorm <= cfg.stop.grad_tol || gnorm == 0.0 {
            break StopReason::GradientTolerance;
        }
        if t >= cfg.stop.max_iters {
            break StopReason::MaxIterations;
        }
        let model = source.build(oracle, &x, t)?;
        let mut repeats = 0;
        let accepted = loop {
            let step = model.solve(&g, m, delta, cfg.root_tol)?;
            let cand = kernels::add_scaled(&x, 1.0, &step.h);
            if !kernels::all_finite(&cand) {
                return Err(SolverError::NonFinite { t });
            }
            if cand == x {
                break None;
            }
            let fc = oracle.value(&cand)?;
            let bound = f + 0.5 * kernels::dot(&g, &step.h) - m / 12.0 * step.r.powi(3);
            if fc <= bound {
                break Some((cand, fc, step.r, delta));
            }
            if f - bound <= VALUE_NOISE_ULPS * f64::EPSILON * f.abs() {
                break None;
            }
            repeats += 1;
            if repeats > cfg.max_inner_repeats {
                return Err(SolverError::InnerCapExceeded { t, delta, cap: cfg.max_inner_repeats });
            }
            delta = raise_delta(delta, cfg.gamma_inc);
        };
        increases += repeats as u64;
        let Some((x_new, f_new, r, used)) = accepted else {
            break StopReason::Stalled;
        };
        let g_new = oracle.gradient(&x_new)?;
        source.observe(&x, &g, &x_new, &g_new);
        x = x_new;
        f = f_new;
        g = g_new;
        rec.push(oracle, f, kernels::norm(&g), used, repeats, r);
        delta = used * cfg.gamma_dec;
    };
    let mut trace = rec.finish(oracle, x, stop);
    trace.delta_increases = increases;
    trace.skipped_pairs = source.skipped;
    Ok(trace)
}
