//! Accelerated adaptive cubic method driven by an estimating sequence.

use super::{
    adaptive_step, ModelSource, Recorder, SolverConfig, SolverError, SolverTrace, StepCertificate, StopReason,
};
use crate::cubic::EstimatingSequenceState;
use crate::linalg::kernels;
use crate::oracle::CountingOracle;

/// `(α_t, A_t) = (3/(t+3), 6/((t+1)(t+2)(t+3)))`; in particular `A₀ = 1`.
pub fn accel_coefficients(t: usize) -> (f64, f64) {
    let tf = t as f64;
    (3.0 / (tf + 3.0), 6.0 / ((tf + 1.0) * (tf + 2.0) * (tf + 3.0)))
}

fn kappa3(m: f64, t: usize) -> f64 {
    let (alpha, a) = accel_coefficients(t);
    8.0 * m / 3.0 * alpha.powi(3) / a
}

fn kappa2(delta: f64, step: usize) -> f64 {
    let (alpha, a) = accel_coefficients(step);
    4.0 * delta * alpha * alpha / a
}

/// State attached to iterate index `j`.
#[derive(Clone)]
struct Frame {
    x: Vec<f64>,
    g: Vec<f64>,
    y: Vec<f64>,
    /// ψ_j, whose minimizer is `y`.
    psi: EstimatingSequenceState,
    /// `δ` used for `κ̄₂^j` (`None` at `j = 0`).
    kappa_delta: Option<f64>,
}

/// Safety guard of step `t`: passes unless both
/// `‖y_{t+1} − y_t‖ > ‖y_{t+1} − x₀‖` and `κ̄₂^t < 2δ_t α_t²/A_t`.
fn guard_holds(prev: &Frame, y_next: &[f64], anchor: &[f64], delta: f64, t: usize) -> bool {
    let (alpha, a) = accel_coefficients(t);
    let far = kernels::dist(y_next, &prev.y) > kernels::dist(y_next, anchor);
    let small_kappa = prev.psi.kappa2 < 2.0 * delta * alpha * alpha / a;
    !(far && small_kappa)
}

/// Accelerated adaptive inexact cubic Newton.
///
/// Per iteration: `v_t = (1−α_t)x_t + α_t y_t`; `x_{t+1}` is the adaptive cubic
/// step from `v_t`; the estimating sequence receives
/// `κ̄₂^{t+1} = 4δ_tα_t²/A_t`, `κ̄₃^{t+1} = (8M/3)α_{t+1}³/A_{t+1}` and the
/// linearization at `x_{t+1}` with weight `α_t/A_t`; `y_{t+1} = argmin ψ_{t+1}`.
///
/// If the safety guard fails, the method returns to the end of the previous
/// step's inner loop: `κ̄₂^t` and `y_t` are recomputed with the raised `δ`
/// (keeping `x_t`), the previous guard is rechecked (possibly cascading
/// further back) and the step is redone. A failure that a rollback cannot
/// change (no `δ` increase since `κ̄₂^t` was computed) is counted in
/// `unresolved_guards` and the step is kept.
pub fn adaptive_accelerated_crn(
    oracle: &mut CountingOracle<'_>,
    cfg: &SolverConfig,
    x0: &[f64],
) -> Result<SolverTrace, SolverError> {
    cfg.validate()?;
    let m = cfg.cubic_weight;
    let mut rec = Recorder::new("accelerated", &cfg.stop);
    let mut source = ModelSource::new(cfg);
    let (f0, g0) = oracle.value_grad(x0)?;
    rec.push(oracle, f0, kernels::norm(&g0), cfg.delta0, 0, 0.0);

    let mut psi0 = EstimatingSequenceState::new(x0.to_vec());
    psi0.kappa3 = kappa3(m, 0);
    let mut frames = vec![Frame { x: x0.to_vec(), g: g0, y: x0.to_vec(), psi: psi0, kappa_delta: None }];
    let mut delta = cfg.delta0;
    let mut increases = 0u64;
    let mut rollbacks = 0u64;
    let mut unresolved = 0u64;
    let mut rollbacks_at: Vec<usize> = Vec::new();
    let mut certificates: Vec<StepCertificate> = Vec::new();

    let stop = loop {
        let t = frames.len() - 1;
        let cur = &frames[t];
        let gnorm = kernels::norm(&cur.g);
        if gnorm <= cfg.stop.grad_tol || gnorm == 0.0 {
            break StopReason::GradientTolerance;
        }
        if t >= cfg.stop.max_iters {
            break StopReason::MaxIterations;
        }

        let (alpha, a) = accel_coefficients(t);
        let v: Vec<f64> = cur.x.iter().zip(&cur.y).map(|(x, y)| (1.0 - alpha) * x + alpha * y).collect();
        let g_v = if v == cur.x { cur.g.clone() } else { oracle.gradient(&v)? };
        let model = source.build(oracle, &v, t)?;
        let Some(step) = adaptive_step(oracle, &model, &v, &g_v, &mut delta, cfg, t)? else {
            break StopReason::Stalled;
        };
        increases += step.repeats as u64;

        let mut psi = cur.psi.clone();
        psi.kappa2 = kappa2(delta, t);
        psi.kappa3 = kappa3(m, t + 1);
        psi.add_linearization(alpha / a, &step.x, step.f, &step.g);
        let y_next = psi.minimize()?;

        if !guard_holds(cur, &y_next, x0, delta, t) {
            if t == 0 || cur.kappa_delta == Some(delta) {
                log::debug!("accelerated: guard at t = {t} cannot be repaired by rollback; keeping step");
                unresolved += 1;
            } else {
                if rollbacks_at.len() <= t {
                    rollbacks_at.resize(t + 1, 0);
                }
                rollbacks_at[t] += 1;
                rollbacks += 1;
                if rollbacks_at[t] > cfg.rollback_cap {
                    return Err(SolverError::RollbackCapExceeded { t, delta, cap: cfg.rollback_cap });
                }
                let j = roll_back(&mut frames, t, delta, x0)?;
                frames.truncate(j + 1);
                rec.truncate(j + 1);
                certificates.truncate(j);
                continue;
            }
        }

        source.observe(&v, &g_v, &step.x, &step.g);
        certificates.push(StepCertificate { t, reference: v, point: step.x.clone(), delta });
        rec.push(oracle, step.f, kernels::norm(&step.g), delta, step.repeats, step.step_norm);
        frames.push(Frame { x: step.x, g: step.g, y: y_next, psi, kappa_delta: Some(delta) });
    };

    let x = frames.last().expect("at least the initial frame").x.clone();
    let mut trace = rec.finish(oracle, x, stop);
    trace.delta_increases = increases;
    trace.rollbacks = rollbacks;
    trace.unresolved_guards = unresolved;
    trace.skipped_pairs = source.skipped;
    trace.certificates = certificates;
    Ok(trace)
}

/// Recomputes `κ̄₂^j, y_j` for `j = t, t−1, …` with the current `δ` until the
/// guard of step `j − 1` holds; returns the index to resume from.
fn roll_back(frames: &mut [Frame], t: usize, delta: f64, anchor: &[f64]) -> Result<usize, SolverError> {
    let mut j = t;
    loop {
        let frame = &mut frames[j];
        frame.psi.kappa2 = kappa2(delta, j - 1);
        frame.y = frame.psi.minimize()?;
        frame.kappa_delta = Some(delta);
        if j == 1 || guard_holds(&frames[j - 1], &frames[j].y, anchor, delta, j - 1) {
            return Ok(j);
        }
        j -= 1;
    }
}
