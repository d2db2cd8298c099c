//! Reference methods: gradient descent, damped Newton and classical
//! line-search-free L-BFGS / L-SR1.

use std::collections::VecDeque;

use super::{Recorder, SolverError, SolverTrace, StopCriteria, StopReason};
use crate::linalg::{cholesky_solve, kernels};
use crate::models::{CURVATURE_TOL, SR1_TOL};
use crate::oracle::CountingOracle;

/// Jitter added to the Hessian diagonal by [`damped_newton`].
pub const NEWTON_JITTER: f64 = 1e-12;

fn check_lr(lr: f64) -> Result<(), SolverError> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(SolverError::InvalidConfig(format!("step size must be positive, got {lr}")))
    }
}

/// Runs `x ← x + direction(x, g)` until the stop criteria are met.
fn iterate<F>(
    oracle: &mut CountingOracle<'_>,
    name: &str,
    x0: &[f64],
    stop: &StopCriteria,
    mut direction: F,
) -> Result<SolverTrace, SolverError>
where
    F: FnMut(&mut CountingOracle<'_>, &[f64], &[f64]) -> Result<Vec<f64>, SolverError>,
{
    let mut rec = Recorder::new(name, stop);
    let mut x = x0.to_vec();
    let (f, mut g) = oracle.value_grad(&x)?;
    rec.push(oracle, f, kernels::norm(&g), 0.0, 0, 0.0);
    let reason = loop {
        let t = rec.len() - 1;
        let gnorm = kernels::norm(&g);
        if gnorm <= stop.grad_tol || gnorm == 0.0 {
            break StopReason::GradientTolerance;
        }
        if t >= stop.max_iters {
            break StopReason::MaxIterations;
        }
        let step = direction(oracle, &x, &g)?;
        let x_new = kernels::add_scaled(&x, 1.0, &step);
        if !kernels::all_finite(&x_new) {
            return Err(SolverError::NonFinite { t });
        }
        let (f_new, g_new) = oracle.value_grad(&x_new)?;
        x = x_new;
        g = g_new;
        rec.push(oracle, f_new, kernels::norm(&g), 0.0, 0, kernels::norm(&step));
    };
    Ok(rec.finish(oracle, x, reason))
}

/// `x ← x − lr·∇f(x)`.
pub fn gradient_descent(
    oracle: &mut CountingOracle<'_>,
    lr: f64,
    x0: &[f64],
    stop: &StopCriteria,
) -> Result<SolverTrace, SolverError> {
    check_lr(lr)?;
    iterate(oracle, "gd", x0, stop, |_, _, g| Ok(g.iter().map(|v| -lr * v).collect()))
}

/// `x ← x − γ(∇²f(x) + εI)⁻¹∇f(x)` with `ε` = [`NEWTON_JITTER`].
pub fn damped_newton(
    oracle: &mut CountingOracle<'_>,
    gamma: f64,
    x0: &[f64],
    stop: &StopCriteria,
) -> Result<SolverTrace, SolverError> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(SolverError::InvalidConfig(format!("damping must be >= 0, got {gamma}")));
    }
    iterate(oracle, "damped-newton", x0, stop, |o, x, g| {
        let mut h = o.full_hessian(x)?;
        h.add_diagonal(NEWTON_JITTER);
        let dir = cholesky_solve(&h, g)?;
        Ok(dir.into_iter().map(|v| -gamma * v).collect())
    })
}

/// Inverse-Hessian approximation from stored pairs with `H₀ = γI`,
/// `γ = sᵀy/yᵀy` of the newest pair.
struct PairMemory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl PairMemory {
    fn new(capacity: usize) -> Self {
        Self { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        if self.capacity == 0 {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
    }

    fn initial_scale(&self) -> f64 {
        match self.pairs.back() {
            Some((s, y)) => {
                let yy = kernels::dot(y, y);
                let sy = kernels::dot(s, y);
                if yy > 0.0 && sy > 0.0 {
                    sy / yy
                } else {
                    1.0
                }
            }
            None => 1.0,
        }
    }

    /// L-BFGS two-loop recursion for `H g`.
    fn lbfgs_apply(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut coeffs = Vec::with_capacity(self.pairs.len());
        for (s, y) in self.pairs.iter().rev() {
            let rho = 1.0 / kernels::dot(y, s);
            let a = rho * kernels::dot(s, &q);
            kernels::axpy(-a, y, &mut q);
            coeffs.push((rho, a));
        }
        kernels::scale(self.initial_scale(), &mut q);
        for ((s, y), (rho, a)) in self.pairs.iter().zip(coeffs.into_iter().rev()) {
            let b = rho * kernels::dot(y, &q);
            kernels::axpy(a - b, s, &mut q);
        }
        q
    }

    /// Inverse L-SR1: `H₊ = H + wwᵀ/(wᵀy)` with `w = s − Hy`, folded oldest first.
    fn lsr1_apply(&self, g: &[f64]) -> Vec<f64> {
        let gamma = self.initial_scale();
        let mut terms: Vec<(f64, Vec<f64>)> = Vec::with_capacity(self.pairs.len());
        let apply = |terms: &[(f64, Vec<f64>)], v: &[f64]| {
            let mut out: Vec<f64> = v.iter().map(|x| gamma * x).collect();
            for (c, w) in terms {
                kernels::axpy(c * kernels::dot(w, v), w, &mut out);
            }
            out
        };
        for (s, y) in &self.pairs {
            let w = kernels::sub(s, &apply(&terms, y));
            let wy = kernels::dot(&w, y);
            if wy.abs() > SR1_TOL * kernels::norm(&w) * kernels::norm(y) {
                terms.push((1.0 / wy, w));
            }
        }
        apply(&terms, g)
    }
}

/// Classical L-BFGS without line search: `x ← x − lr·H_t∇f(x)`.
pub fn classical_lbfgs(
    oracle: &mut CountingOracle<'_>,
    lr: f64,
    memory: usize,
    x0: &[f64],
    stop: &StopCriteria,
) -> Result<SolverTrace, SolverError> {
    check_lr(lr)?;
    let mut mem = PairMemory::new(memory);
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    iterate(oracle, "lbfgs", x0, stop, |_, x, g| {
        if let Some((xp, gp)) = last.take() {
            let s = kernels::sub(x, &xp);
            let y = kernels::sub(g, &gp);
            if kernels::dot(&y, &s) > CURVATURE_TOL * kernels::norm(&y) * kernels::norm(&s) {
                mem.push(s, y);
            }
        }
        last = Some((x.to_vec(), g.to_vec()));
        Ok(mem.lbfgs_apply(g).into_iter().map(|v| -lr * v).collect())
    })
}

/// Classical L-SR1 without line search. When the inverse model does not give
/// a descent direction the scaled gradient step `−lr·γ∇f` is used instead.
pub fn classical_lsr1(
    oracle: &mut CountingOracle<'_>,
    lr: f64,
    memory: usize,
    x0: &[f64],
    stop: &StopCriteria,
) -> Result<SolverTrace, SolverError> {
    check_lr(lr)?;
    let mut mem = PairMemory::new(memory);
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    iterate(oracle, "lsr1", x0, stop, |_, x, g| {
        if let Some((xp, gp)) = last.take() {
            let s = kernels::sub(x, &xp);
            let y = kernels::sub(g, &gp);
            if kernels::norm(&s) > 0.0 {
                mem.push(s, y);
            }
        }
        last = Some((x.to_vec(), g.to_vec()));
        let mut dir = mem.lsr1_apply(g);
        if !(kernels::dot(&dir, g) > 0.0) || !kernels::all_finite(&dir) {
            dir = g.iter().map(|v| mem.initial_scale() * v).collect();
        }
        Ok(dir.into_iter().map(|v| -lr * v).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::oracle::QuadraticProblem;

    fn stop(n: usize) -> StopCriteria {
        StopCriteria { max_iters: n, grad_tol: 1e-12, timing: false }
    }

    #[test]
    fn gd_on_identity_converges_in_one_step() {
        let q = QuadraticProblem::bowl(3);
        let mut o = CountingOracle::new(&q);
        let trace = gradient_descent(&mut o, 1.0, &[1.0, 2.0, 3.0], &stop(10)).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.x, vec![0.0; 3]);
        assert!(gradient_descent(&mut o, 0.0, &[1.0; 3], &stop(10)).is_err());
    }

    #[test]
    fn fixed_point_is_stationary() {
        let q = QuadraticProblem::new(DenseMatrix::from_diagonal(&[1.0, 2.0]), vec![1.0, 2.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let trace = gradient_descent(&mut o, 0.1, &[1.0, 1.0], &stop(10)).unwrap();
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.stop, StopReason::GradientTolerance);
    }

    #[test]
    fn damped_newton_quadratic() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let q = QuadraticProblem::new(a, vec![1.0, -1.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let trace = damped_newton(&mut o, 1.0, &[5.0, 5.0], &stop(1)).unwrap();
        assert!(trace.records.last().unwrap().gnorm < 1e-10);
        let mut o = CountingOracle::new(&q);
        let trace = damped_newton(&mut o, 0.0, &[5.0, 5.0], &stop(3)).unwrap();
        assert_eq!(trace.x, vec![5.0, 5.0]);
    }

    #[test]
    fn quasi_newton_on_identity_is_gd() {
        let q = QuadraticProblem::bowl(2);
        for run in [classical_lbfgs, classical_lsr1] {
            let mut o = CountingOracle::new(&q);
            let trace = run(&mut o, 0.5, 5, &[4.0, -2.0], &stop(3)).unwrap();
            let mut o = CountingOracle::new(&q);
            let gd = gradient_descent(&mut o, 0.5, &[4.0, -2.0], &stop(3)).unwrap();
            for (a, b) in trace.records.iter().zip(&gd.records) {
                assert!((a.f - b.f).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn lbfgs_solves_ill_conditioned_quadratic() {
        let q = QuadraticProblem::new(DenseMatrix::from_diagonal(&[1.0, 10.0, 100.0]), vec![1.0, 1.0, 1.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let trace = classical_lbfgs(&mut o, 1.0, 5, &[0.0; 3], &stop(200)).unwrap();
        assert!(trace.records.last().unwrap().gnorm < 1e-8);
    }
}
