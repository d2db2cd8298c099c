//! Outer optimization loops.
//!
//! - [`adaptive_inexact_crn`]: cubic steps with a quasi-Newton model and an
//!   adaptively increased quadratic slack `δ`.
//! - [`adaptive_accelerated_crn`]: the estimating-sequence accelerated variant,
//!   with rollback when its safety guard fails.
//! - [`alt_adaptive_cubic`]: function-value acceptance test with `δ` that may
//!   also decrease.
//! - Baselines: [`gradient_descent`], [`exact_crn`], [`damped_newton`],
//!   [`classical_lbfgs`], [`classical_lsr1`].
//!
//! Every run returns a [`SolverTrace`] with one [`IterationRecord`] per
//! iterate, cumulative oracle costs included.

mod accelerated;
mod adaptive;
mod baselines;

use std::time::Instant;

use thiserror::Error;

use crate::cubic::{solve_low_rank, CubicError, CubicStepResult, DenseCubicSolver};
use crate::linalg::{kernels, LinalgError};
use crate::models::{
    build_history_model, build_sampling_model, refine_with_directions, sample_directions, HistoryUpdate,
    LowRankHessianModel, ModelError, PairBuffer,
};
use crate::oracle::{CountingOracle, Objective, OracleCounters, OracleError};

pub use accelerated::{accel_coefficients, adaptive_accelerated_crn};
pub use adaptive::{adaptive_inexact_crn, alt_adaptive_cubic, exact_crn, VALUE_NOISE_ULPS};
pub use baselines::{classical_lbfgs, classical_lsr1, damped_newton, gradient_descent};

/// Slack used when a retry is requested at `δ = 0`, where multiplying by
/// `γ_inc` would have no effect.
pub const ZERO_DELTA_BUMP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "inner loop exceeded {cap} repeats at iteration {t} (delta = {delta:e}); the cubic weight may be below 2·L2"
    )]
    InnerCapExceeded { t: usize, delta: f64, cap: usize },
    #[error("rollback cap {cap} exceeded at iteration {t} (delta = {delta:e})")]
    RollbackCapExceeded { t: usize, delta: f64, cap: usize },
    #[error("non-finite iterate at iteration {t}")]
    NonFinite { t: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cubic(#[from] CubicError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Source of the Hessian model `B_t` used by the cubic methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HessianPolicy {
    /// Full Hessian (charged as `d` HVPs).
    Exact,
    /// L-BFGS from the last `memory` iterate pairs.
    LbfgsHistory,
    /// L-BFGS history with `ξ` divided by `memory`.
    LbfgsHistoryDamped,
    /// L-SR1 from the last `memory` iterate pairs.
    Lsr1History,
    /// Broyden-class model from `B₀ = 0` along `memory` random directions (HVPs).
    BroydenSampling { upsilon: f64 },
    /// L-BFGS history model refined along `samples` random directions.
    Combined { upsilon: f64, samples: usize },
}

impl HessianPolicy {
    pub fn uses_history(&self) -> bool {
        matches!(
            self,
            HessianPolicy::LbfgsHistory
                | HessianPolicy::LbfgsHistoryDamped
                | HessianPolicy::Lsr1History
                | HessianPolicy::Combined { .. }
        )
    }
}

/// Iteration budget and stopping tolerance shared by every method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCriteria {
    pub max_iters: usize,
    /// Stop once `‖∇f(x_t)‖ ≤ grad_tol`.
    pub grad_tol: f64,
    /// Record wall-clock time per iteration; when false `wall_ns` is 0 so
    /// traces are reproducible byte for byte.
    pub timing: bool,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self { max_iters: 200, grad_tol: 0.0, timing: false }
    }
}

/// Parameters of the cubic methods.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Cubic regularization weight `M`.
    pub cubic_weight: f64,
    pub delta0: f64,
    pub gamma_inc: f64,
    /// Decrease factor applied after each accepted step of [`alt_adaptive_cubic`].
    pub gamma_dec: f64,
    pub memory: usize,
    pub policy: HessianPolicy,
    /// `c` in `B₀ = c·I` for history models.
    pub base_scale: f64,
    pub max_inner_repeats: usize,
    pub rollback_cap: usize,
    pub seed: u64,
    pub root_tol: f64,
    pub stop: StopCriteria,
}

impl SolverConfig {
    pub fn new(cubic_weight: f64, policy: HessianPolicy) -> Self {
        Self {
            cubic_weight,
            delta0: 1e-8,
            gamma_inc: 2.0,
            gamma_dec: 1.0,
            memory: 10,
            policy,
            base_scale: 0.0,
            max_inner_repeats: 60,
            rollback_cap: 30,
            seed: 0,
            root_tol: crate::cubic::DEFAULT_ROOT_TOL,
            stop: StopCriteria::default(),
        }
    }

    /// Defaults with `M = 2·L2` from the problem's smoothness estimate
    /// (floored at `1e-6` so quadratics, where `L2 = 0`, still get `M > 0`).
    pub fn for_problem(problem: &dyn Objective, policy: HessianPolicy) -> Result<Self, SolverError> {
        let sm = problem.smoothness()?;
        Ok(Self::new((2.0 * sm.l2).max(1e-6), policy))
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if !(self.cubic_weight > 0.0) || !self.cubic_weight.is_finite() {
            return bad(format!("cubic weight M must be positive, got {}", self.cubic_weight));
        }
        if !(self.delta0 >= 0.0) || !self.delta0.is_finite() {
            return bad(format!("delta0 must be >= 0, got {}", self.delta0));
        }
        if !(self.gamma_inc > 1.0) || !self.gamma_inc.is_finite() {
            return bad(format!("gamma_inc must be > 1, got {}", self.gamma_inc));
        }
        if !(self.gamma_dec > 0.0 && self.gamma_dec <= 1.0) {
            return bad(format!("gamma_dec must lie in (0, 1], got {}", self.gamma_dec));
        }
        if self.policy != HessianPolicy::Exact && self.memory == 0 {
            return bad("memory must be at least 1".into());
        }
        if !(self.base_scale >= 0.0) {
            return bad(format!("base scale must be >= 0, got {}", self.base_scale));
        }
        if self.max_inner_repeats == 0 {
            return bad("max_inner_repeats must be at least 1".into());
        }
        match self.policy {
            HessianPolicy::BroydenSampling { upsilon } | HessianPolicy::Combined { upsilon, .. }
                if !(0.0..=1.0).contains(&upsilon) =>
            {
                bad(format!("upsilon must lie in [0, 1], got {upsilon}"))
            }
            _ => Ok(()),
        }
    }
}

/// One row of a solver trace, describing iterate `x_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub f: f64,
    pub gnorm: f64,
    /// Slack `δ` of the step that produced `x_t` (the initial `δ₀` at `t = 0`).
    pub delta: f64,
    /// Retries of the step that produced `x_t`.
    pub inner_repeats: usize,
    /// `‖x_t − reference‖` for the step that produced `x_t`.
    pub step_norm: f64,
    pub grad_evals: u64,
    /// `n_hvp + d·n_full_hessian` so far.
    pub hvp_equiv: u64,
    pub wall_ns: u64,
}

/// Data needed to re-check the adaptive acceptance inequality after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCertificate {
    pub t: usize,
    /// Point the step was taken from (`x_t`, or `v_t` for the accelerated method).
    pub reference: Vec<f64>,
    pub point: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The step no longer changes the iterate in floating point.
    Stalled,
}

/// Result of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub method: String,
    pub records: Vec<IterationRecord>,
    pub x: Vec<f64>,
    pub counters: OracleCounters,
    pub stop: StopReason,
    /// Number of times `δ` was increased by an inner loop.
    pub delta_increases: u64,
    pub rollbacks: u64,
    /// Accelerated guard failures that a rollback could not change.
    pub unresolved_guards: u64,
    pub skipped_pairs: u64,
    pub certificates: Vec<StepCertificate>,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_f(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f)
    }

    /// Total inner-loop retries over the run.
    pub fn total_inner_repeats(&self) -> usize {
        self.records.iter().map(|r| r.inner_repeats).sum()
    }
}

/// `⟨∇f(x₊), ref − x₊⟩ ≥ min{‖∇f(x₊)‖²/(4δ), ‖∇f(x₊)‖^{3/2}/√(3M)}`; the first
/// term is infinite for `δ = 0`.
pub fn adaptive_condition_holds(grad_new: &[f64], reference: &[f64], point: &[f64], delta: f64, m: f64) -> bool {
    let gn = kernels::norm(grad_new);
    if gn == 0.0 {
        return true;
    }
    let lhs = kernels::dot(grad_new, &kernels::sub(reference, point));
    let first = if delta > 0.0 { gn * gn / (4.0 * delta) } else { f64::INFINITY };
    let second = gn.powf(1.5) / (3.0 * m).sqrt();
    !(lhs < first.min(second))
}

pub(crate) fn raise_delta(delta: f64, gamma: f64) -> f64 {
    if delta > 0.0 {
        delta * gamma
    } else {
        ZERO_DELTA_BUMP
    }
}

/// Builds trace rows with cumulative oracle costs.
pub(crate) struct Recorder {
    method: String,
    start: Option<Instant>,
    records: Vec<IterationRecord>,
}

impl Recorder {
    pub(crate) fn new(method: &str, stop: &StopCriteria) -> Self {
        Self { method: method.to_string(), start: stop.timing.then(Instant::now), records: Vec::new() }
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(
        &mut self,
        oracle: &CountingOracle<'_>,
        f: f64,
        gnorm: f64,
        delta: f64,
        inner_repeats: usize,
        step_norm: f64,
    ) {
        let c = oracle.counters();
        self.records.push(IterationRecord {
            t: self.records.len(),
            f,
            gnorm,
            delta,
            inner_repeats,
            step_norm,
            grad_evals: c.n_grad,
            hvp_equiv: oracle.hvp_equivalent(),
            wall_ns: self.start.map_or(0, |s| s.elapsed().as_nanos() as u64),
        });
    }

    pub(crate) fn len(&self) -> usize {
        self.records.len()
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.records.truncate(len);
    }

    pub(crate) fn finish(self, oracle: &CountingOracle<'_>, x: Vec<f64>, stop: StopReason) -> SolverTrace {
        SolverTrace {
            method: self.method,
            records: self.records,
            x,
            counters: oracle.counters(),
            stop,
            delta_increases: 0,
            rollbacks: 0,
            unresolved_guards: 0,
            skipped_pairs: 0,
            certificates: Vec::new(),
        }
    }
}

/// Hessian model for one outer iteration.
pub(crate) enum StepModel {
    Dense(DenseCubicSolver),
    LowRank(LowRankHessianModel),
}

impl StepModel {
    pub(crate) fn solve(&self, g: &[f64], m: f64, delta: f64, tol: f64) -> Result<CubicStepResult, CubicError> {
        match self {
            StepModel::Dense(s) => s.solve(g, m, delta, tol),
            StepModel::LowRank(model) => solve_low_rank(model, g, m, delta, tol),
        }
    }
}

/// Produces `B_t` according to the configured policy and keeps the pair history.
pub(crate) struct ModelSource {
    policy: HessianPolicy,
    memory: usize,
    base: f64,
    seed: u64,
    buffer: PairBuffer,
    pub(crate) skipped: u64,
}

impl ModelSource {
    pub(crate) fn new(cfg: &SolverConfig) -> Self {
        Self {
            policy: cfg.policy,
            memory: cfg.memory,
            base: cfg.base_scale,
            seed: cfg.seed,
            buffer: PairBuffer::new(cfg.memory),
            skipped: 0,
        }
    }

    pub(crate) fn build(
        &mut self,
        oracle: &mut CountingOracle<'_>,
        x: &[f64],
        t: usize,
    ) -> Result<StepModel, SolverError> {
        let d = oracle.dim();
        let history = |kind| build_history_model(&self.buffer, d, kind, self.base);
        let model = match self.policy {
            HessianPolicy::Exact => return Ok(StepModel::Dense(DenseCubicSolver::new(&oracle.full_hessian(x)?)?)),
            HessianPolicy::LbfgsHistory => history(HistoryUpdate::Lbfgs)?,
            HessianPolicy::LbfgsHistoryDamped => history(HistoryUpdate::LbfgsDamped)?,
            HessianPolicy::Lsr1History => history(HistoryUpdate::Lsr1)?,
            HessianPolicy::BroydenSampling { upsilon } => {
                let model = build_sampling_model(oracle, x, self.memory, self.seed, t as u64, upsilon)?;
                (model, 0)
            }
            HessianPolicy::Combined { upsilon, samples } => {
                let (mut model, skipped) = history(HistoryUpdate::Lbfgs)?;
                let dirs = sample_directions(d, samples, self.seed, t as u64);
                let more = refine_with_directions(&mut model, oracle, x, &dirs, upsilon)?;
                (model, skipped + more)
            }
        };
        self.skipped += model.1 as u64;
        Ok(StepModel::LowRank(model.0))
    }

    /// Records the pair `(x₊ − ref, ∇f(x₊) − ∇f(ref))` for history policies.
    pub(crate) fn observe(&mut self, reference: &[f64], g_ref: &[f64], point: &[f64], g_point: &[f64]) {
        if self.policy.uses_history() {
            self.buffer.push(kernels::sub(point, reference), kernels::sub(g_point, g_ref));
        }
    }
}

/// Accepted cubic step from `reference`.
pub(crate) struct AdaptiveStep {
    pub(crate) x: Vec<f64>,
    pub(crate) f: f64,
    pub(crate) g: Vec<f64>,
    pub(crate) step_norm: f64,
    pub(crate) repeats: usize,
}

/// Cubic step from `reference`, raising `δ` until the adaptive condition holds.
/// Returns `None` once the trial point rounds back to `reference`.
pub(crate) fn adaptive_step(
    oracle: &mut CountingOracle<'_>,
    model: &StepModel,
    reference: &[f64],
    g_ref: &[f64],
    delta: &mut f64,
    cfg: &SolverConfig,
    t: usize,
) -> Result<Option<AdaptiveStep>, SolverError> {
    let mut repeats = 0;
    loop {
        let step = model.solve(g_ref, cfg.cubic_weight, *delta, cfg.root_tol)?;
        let x = kernels::add_scaled(reference, 1.0, &step.h);
        if !kernels::all_finite(&x) {
            return Err(SolverError::NonFinite { t });
        }
        if x == reference {
            log::debug!("step at t = {t} vanished (delta = {delta})");
            return Ok(None);
        }
        let (f, g) = oracle.value_grad(&x)?;
        if adaptive_condition_holds(&g, reference, &x, *delta, cfg.cubic_weight) {
            return Ok(Some(AdaptiveStep { x, f, g, step_norm: step.r, repeats }));
        }
        repeats += 1;
        if repeats > cfg.max_inner_repeats {
            return Err(SolverError::InnerCapExceeded { t, delta: *delta, cap: cfg.max_inner_repeats });
        }
        *delta = raise_delta(*delta, cfg.gamma_inc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_ties_accept_and_zero_delta() {
        // lhs = ⟨g, ref − x⟩ = 1·1 = 1; second term = 1/√(3M) = 1 at M = 1/3.
        assert!(adaptive_condition_holds(&[1.0], &[1.0], &[0.0], 0.0, 1.0 / 3.0));
        assert!(!adaptive_condition_holds(&[1.0], &[0.5], &[0.0], 0.0, 1.0 / 3.0));
        assert!(adaptive_condition_holds(&[0.0], &[0.5], &[0.0], 1.0, 1.0));
        // Small δ makes the first term large, so only the second one binds.
        assert!(!adaptive_condition_holds(&[1.0], &[0.1], &[0.0], 1e-9, 1.0));
        // Large δ: first term 1/(4δ) binds.
        assert!(adaptive_condition_holds(&[1.0], &[0.1], &[0.0], 2.5, 1e-6));
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::new(1.0, HessianPolicy::LbfgsHistory);
        assert!(ok.validate().is_ok());
        for bad in [
            SolverConfig { cubic_weight: 0.0, ..ok.clone() },
            SolverConfig { gamma_inc: 1.0, ..ok.clone() },
            SolverConfig { gamma_dec: 0.0, ..ok.clone() },
            SolverConfig { delta0: -1.0, ..ok.clone() },
            SolverConfig { memory: 0, ..ok.clone() },
            SolverConfig { policy: HessianPolicy::BroydenSampling { upsilon: 1.5 }, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(SolverError::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn raise_delta_from_zero() {
        assert_eq!(raise_delta(0.0, 2.0), ZERO_DELTA_BUMP);
        assert_eq!(raise_delta(3.0, 2.0), 6.0);
    }
}
