//! Low-rank quasi-Newton Hessian approximations.
//!
//! A [`LowRankHessianModel`] stores `B = c·I + Σ_i coef_i · v_i v_iᵀ`. Updates
//! (L-BFGS, damped L-BFGS, L-SR1, convex Broyden class) append rank-one terms;
//! the cubic subproblem solver consumes the cached spectral form of the sum.
//!
//! Pairs come either from the optimization history ([`PairBuffer`] +
//! [`build_history_model`]) or from Hessian-vector products along random
//! directions at the current point ([`build_sampling_model`]).

use std::collections::VecDeque;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{kernels, sym_eig, thin_qr, DenseMatrix, LinalgError, SpectralFactor, SymmetricOperator};
use crate::oracle::{CountingOracle, OracleError};

/// Largest dimension for which [`LowRankHessianModel::materialize_dense`] runs.
pub const MAX_MATERIALIZE_DIM: usize = 1_000;

/// L-BFGS pairs with `yᵀs ≤ CURVATURE_TOL·‖y‖‖s‖` are skipped.
pub const CURVATURE_TOL: f64 = 1e-12;

/// L-SR1 pairs with `|uᵀs| ≤ SR1_TOL·‖u‖‖s‖` are skipped.
pub const SR1_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero or non-finite direction")]
    DegenerateDirection,
    #[error("non-positive curvature <As, s> = {0:e}")]
    NonPositiveCurvature(f64),
    #[error("dense materialization refused for d = {dim} (limit {limit})")]
    DenseGuard { dim: usize, limit: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Why an update left the model unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkipReason {
    /// `yᵀs` too small relative to `‖y‖‖s‖`.
    Curvature,
    /// L-SR1 denominator `uᵀs` too small (including `y = Bs`).
    Sr1Denominator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateStatus {
    Accepted,
    Skipped(SkipReason),
}

impl UpdateStatus {
    pub fn is_accepted(&self) -> bool {
        matches!(self, UpdateStatus::Accepted)
    }
}

/// `coef · v vᵀ`
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneTerm {
    pub coef: f64,
    pub vector: Vec<f64>,
}

/// `B = c·I + Σ coef_i v_i v_iᵀ` with a lazily computed spectral form of the sum.
#[derive(Debug, Clone)]
pub struct LowRankHessianModel {
    dim: usize,
    base: f64,
    terms: Vec<RankOneTerm>,
    spectral: OnceLock<Result<SpectralFactor, LinalgError>>,
}

impl LowRankHessianModel {
    /// `B = c·I`
    pub fn new(dim: usize, base: f64) -> Self {
        Self { dim, base, terms: Vec::new(), spectral: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn terms(&self) -> &[RankOneTerm] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    fn check(&self, v: &[f64]) -> Result<(), ModelError> {
        if v.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, found: v.len() });
        }
        Ok(())
    }

    fn check_direction(&self, s: &[f64]) -> Result<f64, ModelError> {
        self.check(s)?;
        let ns = kernels::norm(s);
        if ns == 0.0 || !ns.is_finite() {
            return Err(ModelError::DegenerateDirection);
        }
        Ok(ns)
    }

    /// Appends `coef · v vᵀ`; zero coefficients and zero vectors are dropped.
    pub fn push_term(&mut self, coef: f64, vector: Vec<f64>) -> Result<(), ModelError> {
        self.check(&vector)?;
        if !coef.is_finite() || !kernels::all_finite(&vector) {
            return Err(LinalgError::NonFinite.into());
        }
        if coef != 0.0 && vector.iter().any(|&v| v != 0.0) {
            self.terms.push(RankOneTerm { coef, vector });
            self.spectral = OnceLock::new();
        }
        Ok(())
    }

    /// `B v`
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check(v)?;
        let mut out: Vec<f64> = v.iter().map(|x| self.base * x).collect();
        for t in &self.terms {
            let c = t.coef * kernels::dot(&t.vector, v);
            kernels::axpy(c, &t.vector, &mut out);
        }
        Ok(out)
    }

    /// Applies `B₊ = B − (Bs)(Bs)ᵀ/(sᵀBs) + ξ yyᵀ` with `ξ = 1/(yᵀs)`, divided by
    /// `damping` when given (damped L-BFGS).
    ///
    /// Pairs failing the curvature test are skipped. When `sᵀBs` vanishes (for
    /// instance `B₀ = 0`) the subtraction term is omitted and only `ξ yyᵀ` is added.
    pub fn lbfgs_update(&mut self, s: &[f64], y: &[f64], damping: Option<usize>) -> Result<UpdateStatus, ModelError> {
        let ns = self.check_direction(s)?;
        self.check(y)?;
        let ys = kernels::dot(y, s);
        if !(ys > CURVATURE_TOL * kernels::norm(y) * ns) {
            return Ok(UpdateStatus::Skipped(SkipReason::Curvature));
        }
        let bs = self.matvec(s)?;
        let sbs = kernels::dot(s, &bs);
        let xi = match damping {
            Some(m) if m > 1 => 1.0 / (ys * m as f64),
            _ => 1.0 / ys,
        };
        self.push_term(xi, y.to_vec())?;
        if sbs > CURVATURE_TOL * ns * ns {
            self.push_term(-1.0 / sbs, bs)?;
        }
        Ok(UpdateStatus::Accepted)
    }

    /// Symmetric rank-one update `B₊ = B + uuᵀ/(uᵀs)` with `u = y − Bs`.
    pub fn lsr1_update(&mut self, s: &[f64], y: &[f64]) -> Result<UpdateStatus, ModelError> {
        let ns = self.check_direction(s)?;
        self.check(y)?;
        let u = kernels::sub(y, &self.matvec(s)?);
        let us = kernels::dot(&u, s);
        if !(us.abs() > SR1_TOL * kernels::norm(&u) * ns) {
            return Ok(UpdateStatus::Skipped(SkipReason::Sr1Denominator));
        }
        self.push_term(1.0 / us, u)?;
        Ok(UpdateStatus::Accepted)
    }

    /// Convex Broyden-class update `υ·DFP + (1−υ)·BFGS` for the pair `(s, As)`.
    ///
    /// With `w = Bs`, `a = As` and `ρ = 1/⟨a, s⟩` the correction is
    /// `−(1−υ) wwᵀ/⟨w,s⟩ − υρ(awᵀ + waᵀ) + (υρ²⟨w,s⟩ + ρ) aaᵀ`, a symmetric
    /// matrix of rank ≤ 2 stored as at most two eigen-terms on `span{w, a}`.
    pub fn broyden_update(&mut self, s: &[f64], a_s: &[f64], upsilon: f64) -> Result<(), ModelError> {
        let ns = self.check_direction(s)?;
        self.check(a_s)?;
        let upsilon = upsilon.clamp(0.0, 1.0);
        let curv = kernels::dot(a_s, s);
        if !(curv > CURVATURE_TOL * kernels::norm(a_s) * ns) {
            return Err(ModelError::NonPositiveCurvature(curv));
        }
        let rho = 1.0 / curv;
        let w = self.matvec(s)?;
        let ws = kernels::dot(&w, s);
        let nw = kernels::norm(&w);
        let has_w = nw > 0.0 && ws > CURVATURE_TOL * nw * ns;

        if !has_w {
            // B s = 0: both cross terms vanish and only ρ·aaᵀ remains.
            return self.push_term(rho, a_s.to_vec());
        }

        // Orthonormal basis {q1, q2} of span{a, w}: a = a1 q1, w = w1 q1 + w2 q2.
        let na = kernels::norm(a_s);
        let q1: Vec<f64> = a_s.iter().map(|v| v / na).collect();
        let a1 = na;
        let w1 = kernels::dot(&w, &q1);
        let mut q2 = kernels::add_scaled(&w, -w1, &q1);
        let mut w2 = kernels::norm(&q2);
        if w2 <= 1e-14 * nw {
            w2 = 0.0;
        } else {
            kernels::scale(1.0 / w2, &mut q2);
        }

        let kw = -(1.0 - upsilon) / ws;
        let kx = -upsilon * rho;
        let ka = upsilon * rho * rho * ws + rho;
        // C = kw wwᵀ + kx (awᵀ + waᵀ) + ka aaᵀ in the (q1, q2) coordinates.
        let c11 = kw * w1 * w1 + 2.0 * kx * a1 * w1 + ka * a1 * a1;
        let c12 = kw * w1 * w2 + kx * a1 * w2;
        let c22 = kw * w2 * w2;

        if w2 == 0.0 {
            return self.push_term(c11, q1);
        }
        let (lams, vecs) = eig2(c11, c12, c22);
        for (lam, (e1, e2)) in lams.into_iter().zip(vecs) {
            let v: Vec<f64> = q1.iter().zip(&q2).map(|(x, y)| e1 * x + e2 * y).collect();
            self.push_term(lam, v)?;
        }
        Ok(())
    }

    /// Spectral form `P diag(λ) Pᵀ` of `Σ coef_i v_i v_iᵀ`, cached after first use.
    pub fn spectral_factor(&self) -> Result<&SpectralFactor, ModelError> {
        self.spectral
            .get_or_init(|| spectral_of_terms(self.dim, &self.terms))
            .as_ref()
            .map_err(|e| ModelError::Linalg(e.clone()))
    }

    /// Eigenvalues of `B` restricted to the span of its terms (ascending),
    /// with `c` on the orthogonal complement.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, ModelError> {
        let sf = self.spectral_factor()?;
        Ok(sf.eigvals.iter().map(|l| l + self.base).collect())
    }

    /// Explicit `c·I + Σ coef_i v_i v_iᵀ`.
    pub fn materialize_dense(&self) -> Result<DenseMatrix, ModelError> {
        if self.dim > MAX_MATERIALIZE_DIM {
            return Err(ModelError::DenseGuard { dim: self.dim, limit: MAX_MATERIALIZE_DIM });
        }
        let mut b = DenseMatrix::zeros(self.dim, self.dim);
        b.add_diagonal(self.base);
        for t in &self.terms {
            b.add_outer(t.coef, &t.vector)?;
        }
        Ok(b)
    }
}

impl SymmetricOperator for LowRankHessianModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.matvec(v).map_err(|e| match e {
            ModelError::Linalg(l) => l,
            ModelError::DimensionMismatch { expected, found } => LinalgError::DimensionMismatch { expected, found },
            _ => LinalgError::NonFinite,
        })
    }
}

/// Eigen-decomposition of `[[a, b], [b, c]]` as (values, unit vectors).
fn eig2(a: f64, b: f64, c: f64) -> ([f64; 2], [(f64, f64); 2]) {
    if b == 0.0 {
        return ([a, c], [(1.0, 0.0), (0.0, 1.0)]);
    }
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    let (l1, l2) = (mean + rad, mean - rad);
    // Eigenvector for l1 from the better-conditioned row.
    let (x, y) = if (l1 - a).abs() > (l1 - c).abs() { (b, l1 - a) } else { (l1 - c, b) };
    let n = x.hypot(y);
    let (x, y) = (x / n, y / n);
    ([l1, l2], [(x, y), (-y, x)])
}

fn spectral_of_terms(dim: usize, terms: &[RankOneTerm]) -> Result<SpectralFactor, LinalgError> {
    let k = terms.len();
    if k == 0 {
        return Ok(SpectralFactor { basis: DenseMatrix::zeros(dim, 0), eigvals: Vec::new() });
    }
    if k >= dim {
        let mut s = DenseMatrix::zeros(dim, dim);
        for t in terms {
            s.add_outer(t.coef, &t.vector)?;
        }
        let eig = sym_eig(&s)?;
        return Ok(SpectralFactor { basis: eig.vectors, eigvals: eig.values });
    }
    // W = [v_1 … v_k] = P R, so Σ coef_i v_i v_iᵀ = P (R D Rᵀ) Pᵀ.
    let columns: Vec<Vec<f64>> = terms.iter().map(|t| t.vector.clone()).collect();
    let w = DenseMatrix::from_columns(&columns)?;
    let (p, r) = thin_qr(&w)?;
    let mut core = DenseMatrix::zeros(k, k);
    for (j, t) in terms.iter().enumerate() {
        let col = r.column(j);
        core.add_outer(t.coef, &col)?;
    }
    let eig = sym_eig(&core)?;
    let basis = p.matmul(&eig.vectors)?;
    Ok(SpectralFactor { basis, eigvals: eig.values })
}

/// FIFO buffer of curvature pairs `(s_i, y_i)` with capacity `m`.
#[derive(Debug, Clone)]
pub struct PairBuffer {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl PairBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores the pair, evicting the oldest at capacity. Zero or non-finite
    /// `s` and non-finite `y` are rejected; returns whether the pair was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        if self.capacity == 0
            || s.len() != y.len()
            || !kernels::all_finite(&s)
            || !kernels::all_finite(&y)
            || kernels::norm(&s) == 0.0
        {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
        true
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Pairs oldest first.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&[f64], &[f64])> + ExactSizeIterator {
        self.pairs.iter().map(|(s, y)| (s.as_slice(), y.as_slice()))
    }
}

/// Update formula used when folding history pairs into a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryUpdate {
    Lbfgs,
    /// L-BFGS with `ξ` divided by the memory size.
    LbfgsDamped,
    Lsr1,
}

/// Folds the buffered pairs, oldest first, into `B₀ = c·I`. Returns the model
/// and the number of skipped pairs.
pub fn build_history_model(
    buffer: &PairBuffer,
    dim: usize,
    kind: HistoryUpdate,
    base: f64,
) -> Result<(LowRankHessianModel, usize), ModelError> {
    let mut model = LowRankHessianModel::new(dim, base);
    let mut skipped = 0;
    let damping = buffer.capacity().max(1);
    for (s, y) in buffer.iter() {
        let status = match kind {
            HistoryUpdate::Lbfgs => model.lbfgs_update(s, y, None)?,
            HistoryUpdate::LbfgsDamped => model.lbfgs_update(s, y, Some(damping))?,
            HistoryUpdate::Lsr1 => model.lsr1_update(s, y)?,
        };
        if !status.is_accepted() {
            skipped += 1;
        }
    }
    Ok((model, skipped))
}

/// `m` unit directions drawn uniformly from the sphere; deterministic in
/// `(seed, stream)`.
pub fn sample_directions(dim: usize, m: usize, seed: u64, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = kernels::norm(&v);
        if n > 0.0 {
            kernels::scale(1.0 / n, &mut v);
            out.push(v);
        }
    }
    out
}

/// Broyden-class update along `s` with `As = ∇²f(x)s` from one HVP.
pub fn broyden_apply_pair(
    model: &mut LowRankHessianModel,
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    s: &[f64],
    upsilon: f64,
) -> Result<(), ModelError> {
    let a_s = oracle.hvp(x, s)?;
    model.broyden_update(s, &a_s, upsilon)
}

/// Refines `model` with one Broyden-class update per direction. Directions
/// with vanishing curvature `⟨As, s⟩` are skipped; returns the skip count.
/// Each direction costs one HVP.
pub fn refine_with_directions(
    model: &mut LowRankHessianModel,
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    directions: &[Vec<f64>],
    upsilon: f64,
) -> Result<usize, ModelError> {
    let mut skipped = 0;
    for s in directions {
        match broyden_apply_pair(model, oracle, x, s, upsilon) {
            Ok(()) => {}
            Err(ModelError::NonPositiveCurvature(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(skipped)
}

/// Sampling model at `x`: `B₀ = 0` refined along `m` random unit directions.
pub fn build_sampling_model(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    m: usize,
    seed: u64,
    stream: u64,
    upsilon: f64,
) -> Result<LowRankHessianModel, ModelError> {
    let dirs = sample_directions(oracle.dim(), m, seed, stream);
    build_sampling_model_with_directions(oracle, x, &dirs, upsilon)
}

pub fn build_sampling_model_with_directions(
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    directions: &[Vec<f64>],
    upsilon: f64,
) -> Result<LowRankHessianModel, ModelError> {
    let mut model = LowRankHessianModel::new(oracle.dim(), 0.0);
    refine_with_directions(&mut model, oracle, x, directions, upsilon)?;
    Ok(model)
}

/// `‖(∇²f(x) − B)h‖ / ‖h‖` using one HVP.
pub fn directional_inexactness(
    model: &LowRankHessianModel,
    oracle: &mut CountingOracle<'_>,
    x: &[f64],
    h: &[f64],
) -> Result<f64, ModelError> {
    let nh = model.check_direction(h)?;
    let hh = oracle.hvp(x, h)?;
    let bh = model.matvec(h)?;
    Ok(kernels::dist(&hh, &bh) / nh)
}
