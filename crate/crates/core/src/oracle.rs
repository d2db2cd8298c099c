//! Objective oracles: regularized logistic regression and convex quadratics.
//!
//! An [`Objective`] is a pure description of `f` with analytic gradient,
//! Hessian-vector products and (for small `d`) the full Hessian. Solvers never
//! call it directly; they go through a [`CountingOracle`], which charges every
//! evaluation so runs can be compared by oracle cost. One full Hessian counts
//! as `d` Hessian-vector products in [`CountingOracle::hvp_equivalent`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{kernels, sym_eig, DenseMatrix, LinalgError};

/// Largest dimension for which a dense Hessian may be formed.
pub const MAX_DENSE_HESSIAN_DIM: usize = 10_000;

/// Exponent clamp for the logistic sigmoid.
const SIGMOID_CLAMP: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dense Hessian requested for d = {dim} (limit {limit})")]
    DenseGuard { dim: usize, limit: usize },
    #[error("invalid label {0}; expected -1 or +1")]
    InvalidLabel(f64),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn check_dim(expected: usize, v: &[f64]) -> Result<(), OracleError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(OracleError::DimensionMismatch { expected, found: v.len() })
    }
}

/// Conservative smoothness constants: `L1` bounds the Hessian spectral norm,
/// `L2` is a Lipschitz constant of the Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    pub l1: f64,
    pub l2: f64,
}

/// A twice-differentiable convex objective.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, OracleError>;
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.value_grad(x).map(|(_, g)| g)
    }
    /// `∇²f(x) v`
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, OracleError>;
    fn hessian(&self, x: &[f64]) -> Result<DenseMatrix, OracleError>;
    fn smoothness(&self) -> Result<Smoothness, OracleError>;
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP)).exp())
}

/// `log(1 + exp(-t))` without overflow.
#[inline]
pub fn log1p_exp_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `f(x) = (1/n) Σ log(1 + exp(-b_i a_iᵀx)) + (μ/2)‖x‖²`
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    rows: Vec<f64>,
    labels: Vec<f64>,
    mu: f64,
    n: usize,
    d: usize,
}

impl LogisticProblem {
    /// `rows` is row-major `n x d`; labels must be exactly ±1.
    pub fn new(rows: Vec<f64>, labels: Vec<f64>, d: usize, mu: f64) -> Result<Self, OracleError> {
        let n = labels.len();
        if rows.len() != n * d {
            return Err(OracleError::DimensionMismatch { expected: n * d, found: rows.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(OracleError::InvalidLabel(bad));
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(OracleError::InvalidProblem(format!("regularizer must be >= 0, got {mu}")));
        }
        if !kernels::all_finite(&rows) {
            return Err(OracleError::InvalidProblem("non-finite feature value".into()));
        }
        Ok(Self { rows, labels, mu, n, d })
    }

    /// Pure regularizer `(μ/2)‖x‖²` in dimension `d`.
    pub fn regularizer_only(d: usize, mu: f64) -> Result<Self, OracleError> {
        Self::new(Vec::new(), Vec::new(), d, mu)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self, OracleError> {
        Self::new(self.rows.clone(), self.labels.clone(), self.d, mu)
    }

    fn inv_n(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            1.0 / self.n as f64
        }
    }

    // Per-row curvature weights σ_i(1-σ_i) with σ_i = σ(b_i a_iᵀx).
    fn curvature_weights(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let s = sigmoid(self.labels[i] * kernels::dot(self.row(i), x));
                s * (1.0 - s)
            })
            .collect()
    }

    /// `(L1, L2) = (¼ max‖a_i‖² + μ, max‖a_i‖³ / (6√3))`.
    pub fn lipschitz_estimates(&self) -> Result<Smoothness, OracleError> {
        if self.n == 0 {
            return Err(OracleError::EmptyDataset);
        }
        let max_norm = (0..self.n).map(|i| kernels::norm(self.row(i))).fold(0.0, f64::max);
        Ok(Smoothness { l1: 0.25 * max_norm * max_norm + self.mu, l2: max_norm.powi(3) / (6.0 * 3f64.sqrt()) })
    }
}

impl Objective for LogisticProblem {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> Result<f64, OracleError> {
        check_dim(self.d, x)?;
        let loss: f64 = (0..self.n).map(|i| log1p_exp_neg(self.labels[i] * kernels::dot(self.row(i), x))).sum();
        Ok(loss * self.inv_n() + 0.5 * self.mu * kernels::dot(x, x))
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        check_dim(self.d, x)?;
        let mut loss = 0.0;
        let mut g = vec![0.0; self.d];
        for i in 0..self.n {
            let b = self.labels[i];
            let z = b * kernels::dot(self.row(i), x);
            loss += log1p_exp_neg(z);
            kernels::axpy(-b * sigmoid(-z), self.row(i), &mut g);
        }
        let inv_n = self.inv_n();
        kernels::scale(inv_n, &mut g);
        kernels::axpy(self.mu, x, &mut g);
        Ok((loss * inv_n + 0.5 * self.mu * kernels::dot(x, x), g))
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_dim(self.d, x)?;
        check_dim(self.d, v)?;
        let mut out = vec![0.0; self.d];
        for i in 0..self.n {
            let a = self.row(i);
            let s = sigmoid(self.labels[i] * kernels::dot(a, x));
            let coef = s * (1.0 - s) * kernels::dot(a, v);
            if coef != 0.0 {
                kernels::axpy(coef, a, &mut out);
            }
        }
        kernels::scale(self.inv_n(), &mut out);
        kernels::axpy(self.mu, v, &mut out);
        Ok(out)
    }

    fn hessian(&self, x: &[f64]) -> Result<DenseMatrix, OracleError> {
        check_dim(self.d, x)?;
        if self.d > MAX_DENSE_HESSIAN_DIM {
            return Err(OracleError::DenseGuard { dim: self.d, limit: MAX_DENSE_HESSIAN_DIM });
        }
        let weights = self.curvature_weights(x);
        let mut h = DenseMatrix::zeros(self.d, self.d);
        for (i, w) in weights.into_iter().enumerate() {
            if w != 0.0 {
                h.add_outer(w, self.row(i))?;
            }
        }
        let inv_n = self.inv_n();
        for i in 0..self.d {
            for v in h.row_mut(i) {
                *v *= inv_n;
            }
        }
        h.add_diagonal(self.mu);
        Ok(h)
    }

    fn smoothness(&self) -> Result<Smoothness, OracleError> {
        self.lipschitz_estimates()
    }
}

/// `f(x) = ½xᵀAx − bᵀx` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: DenseMatrix,
    b: Vec<f64>,
    l1: f64,
}

impl QuadraticProblem {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self, OracleError> {
        if !a.is_square() {
            return Err(OracleError::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        check_dim(a.rows(), &b)?;
        let eig = sym_eig(&a)?;
        if eig.min() < -1e-10 {
            return Err(OracleError::InvalidProblem(format!(
                "quadratic is not PSD (smallest eigenvalue {:e})",
                eig.min()
            )));
        }
        Ok(Self { a, b, l1: eig.max().max(0.0) })
    }

    /// `½‖x‖²`
    pub fn bowl(d: usize) -> Self {
        Self::new(DenseMatrix::identity(d), vec![0.0; d]).expect("identity is PSD")
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, OracleError> {
        let ax = self.a.matvec(x)?;
        Ok(0.5 * kernels::dot(x, &ax) - kernels::dot(&self.b, x))
    }

    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        let ax = self.a.matvec(x)?;
        let f = 0.5 * kernels::dot(x, &ax) - kernels::dot(&self.b, x);
        Ok((f, kernels::sub(&ax, &self.b)))
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, OracleError> {
        check_dim(self.dim(), x)?;
        Ok(self.a.matvec(v)?)
    }

    fn hessian(&self, x: &[f64]) -> Result<DenseMatrix, OracleError> {
        check_dim(self.dim(), x)?;
        if self.dim() > MAX_DENSE_HESSIAN_DIM {
            return Err(OracleError::DenseGuard { dim: self.dim(), limit: MAX_DENSE_HESSIAN_DIM });
        }
        Ok(self.a.clone())
    }

    fn smoothness(&self) -> Result<Smoothness, OracleError> {
        Ok(Smoothness { l1: self.l1, l2: 0.0 })
    }
}

/// Evaluation counts accumulated over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleCounters {
    pub n_f: u64,
    pub n_grad: u64,
    pub n_hvp: u64,
    pub n_full_hessian: u64,
}

impl OracleCounters {
    /// HVP-equivalent cost with each full Hessian charged as `dim` products.
    pub fn hvp_equivalent(&self, dim: usize) -> u64 {
        self.n_hvp + dim as u64 * self.n_full_hessian
    }
}

/// An [`Objective`] plus the counters charged by every call.
pub struct CountingOracle<'p> {
    problem: &'p dyn Objective,
    counters: OracleCounters,
}

impl<'p> CountingOracle<'p> {
    pub fn new(problem: &'p dyn Objective) -> Self {
        Self { problem, counters: OracleCounters::default() }
    }

    pub fn problem(&self) -> &'p dyn Objective {
        self.problem
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn counters(&self) -> OracleCounters {
        self.counters
    }

    pub fn hvp_equivalent(&self) -> u64 {
        self.counters.hvp_equivalent(self.dim())
    }

    pub fn value(&mut self, x: &[f64]) -> Result<f64, OracleError> {
        self.counters.n_f += 1;
        self.problem.value(x)
    }

    pub fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.counters.n_grad += 1;
        self.problem.gradient(x)
    }

    pub fn value_grad(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
        self.counters.n_f += 1;
        self.counters.n_grad += 1;
        self.problem.value_grad(x)
    }

    pub fn hvp(&mut self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.counters.n_hvp += 1;
        self.problem.hvp(x, v)
    }

    pub fn full_hessian(&mut self, x: &[f64]) -> Result<DenseMatrix, OracleError> {
        let h = self.problem.hessian(x)?;
        self.counters.n_full_hessian += 1;
        Ok(h)
    }
}

/// Worst relative errors of analytic derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeReport {
    pub grad_rel_err: f64,
    pub hvp_rel_err: f64,
    pub trials: usize,
}

impl DerivativeReport {
    pub fn max_rel_err(&self) -> f64 {
        self.grad_rel_err.max(self.hvp_rel_err)
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let nrm = kernels::norm(&v);
        if nrm > 0.0 {
            kernels::scale(1.0 / nrm, &mut v);
            return v;
        }
    }
}

/// Compares the gradient and HVP against central differences along `trials`
/// random unit directions, with step `ε = 1e-5·(1 + ‖x‖)`.
///
/// The gradient error along `u` is `|D_u f − ⟨∇f, u⟩| / ‖∇f‖`; the HVP error is
/// `‖(∇f(x+εv) − ∇f(x−εv))/2ε − ∇²f v‖ / ‖∇²f v‖`.
pub fn check_derivatives(
    problem: &dyn Objective,
    x: &[f64],
    trials: usize,
    seed: u64,
) -> Result<DerivativeReport, OracleError> {
    let d = problem.dim();
    check_dim(d, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 1e-5 * (1.0 + kernels::norm(x));
    let g = problem.gradient(x)?;
    let gnorm = kernels::norm(&g);
    let rel = |err: f64, scale: f64| if err == 0.0 { 0.0 } else { err / scale.max(f64::MIN_POSITIVE) };

    let mut grad_rel_err = 0.0f64;
    let mut hvp_rel_err = 0.0f64;
    for _ in 0..trials {
        let u = random_unit(&mut rng, d);
        let fp = problem.value(&kernels::add_scaled(x, eps, &u))?;
        let fm = problem.value(&kernels::add_scaled(x, -eps, &u))?;
        let fd = (fp - fm) / (2.0 * eps);
        grad_rel_err = grad_rel_err.max(rel((fd - kernels::dot(&g, &u)).abs(), gnorm));

        let v = random_unit(&mut rng, d);
        let gp = problem.gradient(&kernels::add_scaled(x, eps, &v))?;
        let gm = problem.gradient(&kernels::add_scaled(x, -eps, &v))?;
        let fd_hv: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let hv = problem.hvp(x, &v)?;
        hvp_rel_err = hvp_rel_err.max(rel(kernels::dist(&fd_hv, &hv), kernels::norm(&hv)));
    }
    Ok(DerivativeReport { grad_rel_err, hvp_rel_err, trials })
}
