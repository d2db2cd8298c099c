//! Cubic-regularized subproblem and the estimating-sequence minimizer.
//!
//! The step operator minimizes
//! `m(h) = ⟨g, h⟩ + ½⟨Bh, h⟩ + (M/6)‖h‖³ + (δ/2)‖h‖²`.
//! Its minimizer satisfies `(B + (δ + (M/2)r)I) h = −g` with `r = ‖h‖`, so once
//! `B` is available in spectral form the problem reduces to finding the root of
//! the scalar function `φ(r) = ‖h(r)‖ − r`.
//!
//! Two spectral sources are supported: a [`LowRankHessianModel`] (`c·I` plus a
//! thin spectral factor, cost `O(k²d + k³)` to factor) and a dense Hessian
//! (one full eigendecomposition, cached in [`DenseCubicSolver`] so that
//! repeated solves with different `δ` reuse it).

use thiserror::Error;

use crate::linalg::{kernels, sym_eig, DenseMatrix, LinalgError, SymEigen, SymmetricOperator};
use crate::models::{LowRankHessianModel, ModelError};

/// Default relative tolerance on the root `r`.
pub const DEFAULT_ROOT_TOL: f64 = 1e-13;

const MAX_ROOT_ITERS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CubicError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite input to the cubic subproblem")]
    NonFinite,
    #[error("invalid parameters: M = {m}, delta = {delta}")]
    InvalidParameters { m: f64, delta: f64 },
    #[error("estimating sequence has zero coefficients but a nonzero gradient sum")]
    DegenerateSequence,
    #[error("negative curvature on the complement of the low-rank span is unsupported")]
    IndefiniteBase,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Minimizer of the cubic model and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicStepResult {
    pub h: Vec<f64>,
    /// `‖h‖`
    pub r: f64,
    /// `−m(h) ≥ 0`
    pub model_decrease: f64,
    pub root_iters: usize,
}

/// Eigen-structure of `B`: `basis` columns carry `eigvals`; `complement` is the
/// eigenvalue on the orthogonal complement of the basis when it is nontrivial.
struct Spectrum<'a> {
    basis: &'a DenseMatrix,
    eigvals: Vec<f64>,
    complement: Option<f64>,
}

/// Scalar data of the secular equation: coordinates of `g` in the eigenbasis
/// and the squared norm of its complement component.
struct Secular<'a> {
    eigvals: &'a [f64],
    coords: Vec<f64>,
    complement: Option<(f64, f64)>,
    delta: f64,
    half_m: f64,
}

impl Secular<'_> {
    fn shift(&self, r: f64) -> f64 {
        self.delta + self.half_m * r
    }

    /// `(‖h(r)‖, d‖h(r)‖/dr)` skipping coordinates flagged in `skip`.
    fn norm_and_slope(&self, r: f64, skip: &[bool]) -> (f64, f64) {
        let sigma = self.shift(r);
        let mut sq = 0.0;
        let mut cube = 0.0;
        for (i, (&z, &lam)) in self.coords.iter().zip(self.eigvals).enumerate() {
            if skip[i] || z == 0.0 {
                continue;
            }
            let inv = 1.0 / (lam + sigma);
            sq += z * z * inv * inv;
            cube += z * z * inv * inv * inv;
        }
        if let Some((lam, gamma_sq)) = self.complement {
            if gamma_sq > 0.0 {
                let inv = 1.0 / (lam + sigma);
                sq += gamma_sq * inv * inv;
                cube += gamma_sq * inv * inv * inv;
            }
        }
        let n = sq.sqrt();
        let slope = if n > 0.0 { -self.half_m * cube / n } else { 0.0 };
        (n, slope)
    }
}

fn validate(g: &[f64], m: f64, delta: f64) -> Result<(), CubicError> {
    if !(m > 0.0) || !m.is_finite() || !(delta >= 0.0) || !delta.is_finite() {
        return Err(CubicError::InvalidParameters { m, delta });
    }
    if !kernels::all_finite(g) {
        return Err(CubicError::NonFinite);
    }
    Ok(())
}

fn solve_spectral(
    spectrum: &Spectrum<'_>,
    g: &[f64],
    m: f64,
    delta: f64,
    tol: f64,
) -> Result<CubicStepResult, CubicError> {
    let d = g.len();
    if spectrum.basis.rows() != d {
        return Err(CubicError::DimensionMismatch { expected: spectrum.basis.rows(), found: d });
    }
    validate(g, m, delta)?;
    let gnorm = kernels::norm(g);
    if gnorm == 0.0 {
        return Ok(CubicStepResult { h: vec![0.0; d], r: 0.0, model_decrease: 0.0, root_iters: 0 });
    }

    let coords = spectrum.basis.tr_matvec(g)?;
    let complement = spectrum.complement.map(|lam| {
        let proj = spectrum.basis.matvec(&coords).expect("basis shape checked");
        let rest = kernels::sub(g, &proj);
        (lam, kernels::dot(&rest, &rest))
    });
    let sec = Secular { eigvals: &spectrum.eigvals, coords, complement, delta, half_m: 0.5 * m };

    let mut lam_min = spectrum.eigvals.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(c) = spectrum.complement {
        if c < lam_min {
            lam_min = c;
            if c + delta < 0.0 {
                return Err(CubicError::IndefiniteBase);
            }
        }
    }
    if !lam_min.is_finite() {
        lam_min = 0.0;
    }
    let r_lo = (-(lam_min + delta) / sec.half_m).max(0.0);
    let r_up = r_lo + (2.0 * gnorm / m).sqrt();

    let no_skip = vec![false; sec.coords.len()];
    let (mut r, iters, hard) = if r_lo > 0.0 {
        // Hard case: g has (numerically) no component along the most negative
        // eigenvectors and the reduced solution at r_lo is already short.
        let small = 1e-12 * gnorm;
        let skip: Vec<bool> = sec
            .eigvals
            .iter()
            .zip(&sec.coords)
            .map(|(&l, &z)| l + delta + sec.half_m * r_lo <= 1e-12 * (1.0 + l.abs()) && z.abs() <= small)
            .collect();
        let touches_min = skip.iter().any(|&s| s);
        let (n_lo, _) = sec.norm_and_slope(r_lo, &skip);
        if touches_min && n_lo <= r_lo {
            (r_lo, 0, Some((skip, n_lo)))
        } else {
            let (r, it) = find_root(&sec, r_lo, r_up, tol, &no_skip);
            (r, it, None)
        }
    } else {
        let (r, it) = find_root(&sec, r_lo, r_up, tol, &no_skip);
        (r, it, None)
    };

    // Assemble h(r) = −Q diag(1/(λ+σ)) Qᵀg − (g − QQᵀg)/(λ_c+σ).
    let sigma = sec.shift(r);
    let skip = hard.as_ref().map(|(s, _)| s.clone()).unwrap_or(no_skip);
    let scaled: Vec<f64> = sec
        .coords
        .iter()
        .zip(sec.eigvals)
        .zip(&skip)
        .map(|((&z, &lam), &sk)| if sk || z == 0.0 { 0.0 } else { -z / (lam + sigma) })
        .collect();
    let mut h = spectrum.basis.matvec(&scaled)?;
    if let Some(lam) = spectrum.complement {
        let proj = spectrum.basis.matvec(&sec.coords)?;
        let inv = 1.0 / (lam + sigma);
        for i in 0..d {
            h[i] -= (g[i] - proj[i]) * inv;
        }
    }
    if let Some((skip, n_lo)) = hard {
        let tau = (r_lo * r_lo - n_lo * n_lo).max(0.0).sqrt();
        if let Some(j) = skip.iter().position(|&s| s) {
            let v = spectrum.basis.column(j);
            kernels::axpy(tau, &v, &mut h);
        }
    }
    r = kernels::norm(&h);

    let mut quad = 0.0;
    let hc = spectrum.basis.tr_matvec(&h)?;
    for (c, lam) in hc.iter().zip(&spectrum.eigvals) {
        quad += lam * c * c;
    }
    if let Some(lam) = spectrum.complement {
        let rest = (r * r - kernels::dot(&hc, &hc)).max(0.0);
        quad += lam * rest;
    }
    let value = kernels::dot(g, &h) + 0.5 * quad + m / 6.0 * r.powi(3) + 0.5 * delta * r * r;
    Ok(CubicStepResult { h, r, model_decrease: -value, root_iters: iters })
}

/// Root of the convex decreasing `φ(r) = ‖h(r)‖ − r` on `(lo, hi]` by Newton
/// steps from the left, safeguarded by bisection.
fn find_root(sec: &Secular<'_>, lo: f64, hi: f64, tol: f64, skip: &[bool]) -> (f64, usize) {
    let phi = |r: f64| {
        let (n, s) = sec.norm_and_slope(r, skip);
        (n - r, s - 1.0)
    };
    if phi(hi).0 >= 0.0 {
        return (hi, 0);
    }
    let (mut a, mut b) = (lo, hi);
    let mut r = lo;
    for it in 1..=MAX_ROOT_ITERS {
        let (p, dp) = phi(r);
        if p == 0.0 {
            return (r, it);
        }
        if p > 0.0 || p.is_nan() {
            a = r;
        } else {
            b = r;
        }
        let newton = if p.is_finite() && dp < 0.0 { r - p / dp } else { f64::NAN };
        let mut next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a <= tol * b {
            return (next, it);
        }
        if (next - r).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            if p.abs() <= tol.sqrt() * r.max(f64::MIN_POSITIVE) {
                return (next, it);
            }
            // Tiny Newton step with a large residual: r sits next to a pole.
            next = 0.5 * (a + b);
        }
        r = next;
    }
    (0.5 * (a + b), MAX_ROOT_ITERS)
}

/// Minimizes the cubic model for a low-rank `B = c·I + Σ coef_i v_i v_iᵀ`.
pub fn solve_low_rank(
    model: &LowRankHessianModel,
    g: &[f64],
    m: f64,
    delta: f64,
    tol: f64,
) -> Result<CubicStepResult, CubicError> {
    if g.len() != model.dim() {
        return Err(CubicError::DimensionMismatch { expected: model.dim(), found: g.len() });
    }
    let sf = model.spectral_factor()?;
    let c = model.base();
    let spectrum = Spectrum {
        basis: &sf.basis,
        eigvals: sf.eigvals.iter().map(|l| l + c).collect(),
        complement: (sf.rank() < model.dim()).then_some(c),
    };
    solve_spectral(&spectrum, g, m, delta, tol)
}

/// Dense subproblem solver holding the eigendecomposition of `H`.
#[derive(Debug, Clone)]
pub struct DenseCubicSolver {
    eig: SymEigen,
}

impl DenseCubicSolver {
    pub fn new(hessian: &DenseMatrix) -> Result<Self, CubicError> {
        Ok(Self { eig: sym_eig(hessian)? })
    }

    pub fn eigen(&self) -> &SymEigen {
        &self.eig
    }

    pub fn solve(&self, g: &[f64], m: f64, delta: f64, tol: f64) -> Result<CubicStepResult, CubicError> {
        let spectrum = Spectrum { basis: &self.eig.vectors, eigvals: self.eig.values.clone(), complement: None };
        solve_spectral(&spectrum, g, m, delta, tol)
    }
}

/// Minimizes the cubic model for an explicit symmetric Hessian.
pub fn solve_dense(
    hessian: &DenseMatrix,
    g: &[f64],
    m: f64,
    delta: f64,
    tol: f64,
) -> Result<CubicStepResult, CubicError> {
    DenseCubicSolver::new(hessian)?.solve(g, m, delta, tol)
}

/// `⟨g, h⟩ + ½⟨Bh, h⟩ + (M/6)‖h‖³ + (δ/2)‖h‖²`
pub fn model_value(b: &dyn SymmetricOperator, g: &[f64], m: f64, delta: f64, h: &[f64]) -> Result<f64, CubicError> {
    if g.len() != b.dim() || h.len() != b.dim() {
        return Err(CubicError::DimensionMismatch { expected: b.dim(), found: h.len().min(g.len()) });
    }
    let r = kernels::norm(h);
    Ok(kernels::dot(g, h) + 0.5 * b.quad_form(h)? + m / 6.0 * r.powi(3) + 0.5 * delta * r * r)
}

/// `‖g + (B + (δ + (M/2)‖h‖)I) h‖`
pub fn stationarity_residual(
    b: &dyn SymmetricOperator,
    g: &[f64],
    m: f64,
    delta: f64,
    h: &[f64],
) -> Result<f64, CubicError> {
    let mut res = b.apply(h)?;
    let shift = delta + 0.5 * m * kernels::norm(h);
    kernels::axpy(shift, h, &mut res);
    kernels::axpy(1.0, g, &mut res);
    Ok(kernels::norm(&res))
}

/// Aggregated lower model
/// `ψ(x) = (κ₂/2)‖x − x₀‖² + (κ₃/3)‖x − x₀‖³ + ⟨g_agg, x − x₀⟩ + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatingSequenceState {
    pub anchor: Vec<f64>,
    pub g_agg: Vec<f64>,
    pub kappa2: f64,
    pub kappa3: f64,
    /// Constant term `Σ (α_j/A_j)(f(x_{j+1}) − ⟨∇f(x_{j+1}), x_{j+1} − x₀⟩)`.
    pub constant: f64,
}

impl EstimatingSequenceState {
    pub fn new(anchor: Vec<f64>) -> Self {
        let d = anchor.len();
        Self { anchor, g_agg: vec![0.0; d], kappa2: 0.0, kappa3: 0.0, constant: 0.0 }
    }

    /// Adds `weight · (f(p) + ⟨∇f(p), x − p⟩)` to ψ.
    pub fn add_linearization(&mut self, weight: f64, point: &[f64], f: f64, grad: &[f64]) {
        kernels::axpy(weight, grad, &mut self.g_agg);
        let offset = kernels::sub(point, &self.anchor);
        self.constant += weight * (f - kernels::dot(grad, &offset));
    }

    /// `ψ(x)`
    pub fn value(&self, x: &[f64]) -> f64 {
        let u = kernels::sub(x, &self.anchor);
        let n = kernels::norm(&u);
        0.5 * self.kappa2 * n * n + self.kappa3 / 3.0 * n.powi(3) + kernels::dot(&self.g_agg, &u) + self.constant
    }

    /// Radius `r = ‖y − x₀‖` of the minimizer, solving `κ₂ r + κ₃ r² = ‖g_agg‖`.
    pub fn minimizer_radius(&self) -> Result<f64, CubicError> {
        let gn = kernels::norm(&self.g_agg);
        if gn == 0.0 {
            return Ok(0.0);
        }
        let (k2, k3) = (self.kappa2, self.kappa3);
        if k3 > 0.0 {
            // Rationalized root of κ₃r² + κ₂r − ‖g‖ = 0, free of cancellation.
            Ok(2.0 * gn / (k2 + (k2 * k2 + 4.0 * k3 * gn).sqrt()))
        } else if k2 > 0.0 {
            Ok(gn / k2)
        } else {
            Err(CubicError::DegenerateSequence)
        }
    }

    /// `argmin ψ = x₀ − g_agg / (κ₂ + κ₃ r)`.
    pub fn minimize(&self) -> Result<Vec<f64>, CubicError> {
        let r = self.minimizer_radius()?;
        if r == 0.0 {
            return Ok(self.anchor.clone());
        }
        let denom = self.kappa2 + self.kappa3 * r;
        Ok(kernels::add_scaled(&self.anchor, -1.0 / denom, &self.g_agg))
    }
}
