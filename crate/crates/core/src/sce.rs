//! Small-sample statistical condition estimation.
//!
//! `k` Gaussian samples in the perturbed-parameter space are orthonormalized,
//! mapped through the directional derivative of `x_λ`, and combined with the
//! Wallis factors `ω_k / ω_p`, `p` being the dimension of the sampled sphere:
//!
//! | structure      | p           |
//! |----------------|-------------|
//! | unstructured   | m n + m     |
//! | linear (k_s)   | k_s + m     |
//! | Vandermonde    | n + m       |
//! | Cauchy         | 2 m + n     |

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::cond::componentwise_ratio;
use crate::error::{Result, TikhError};
use crate::problem::SolvedProblem;
use crate::random;
use crate::structmat::StructuredMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WallisMode {
    Approximate,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceOpts {
    pub k: usize,
    pub seed: u64,
    pub wallis_mode: WallisMode,
    /// Overrides the sphere dimension used in `ω_p`.
    pub param_dim: Option<usize>,
    pub parallel: bool,
}

impl Default for SceOpts {
    fn default() -> Self {
        Self {
            k: 3,
            seed: 0,
            wallis_mode: WallisMode::Approximate,
            param_dim: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceReport {
    pub kappa_sce: f64,
    pub m_sce: f64,
    pub c_sce: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub undefined_components: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    #[serde(skip)]
    pub p: usize,
    /// `κ_abs`, one entry per row of `M`.
    #[serde(skip)]
    pub kappa_abs: DVector<f64>,
    /// `c_abs`, one entry per row of `M`.
    #[serde(skip)]
    pub c_abs: DVector<f64>,
}

/// `ω_p = E|d₁|` for `d` uniform on the unit sphere in `R^p`.
pub fn wallis(p: usize, mode: WallisMode) -> f64 {
    assert!(p >= 1, "wallis factor needs p ≥ 1");
    match mode {
        WallisMode::Approximate => (2.0 / (std::f64::consts::PI * (p as f64 - 0.5))).sqrt(),
        WallisMode::Exact => {
            let mut w = if p % 2 == 1 { 1.0 } else { 2.0 / std::f64::consts::PI };
            let mut q = if p % 2 == 1 { 1 } else { 2 };
            while q < p {
                q += 2;
                w *= (q - 2) as f64 / (q - 1) as f64;
            }
            w
        }
    }
}

/// `P (Aᵀf + Eᵀr − AᵀE x)`, the derivative of `x_λ` along `(E, f)`.
pub fn directional_derivative(ctx: &SolvedProblem, e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let a = ctx.a();
    let mut w = a.tr_mul(f);
    w += e.tr_mul(ctx.r());
    w -= a.tr_mul(&(e * ctx.x()));
    ctx.apply_p(&w)
}

fn draw(seed: u64, first_stream: u64, p: usize, k: usize) -> Result<DMatrix<f64>> {
    let mut g = DMatrix::zeros(p, k);
    for i in 0..k {
        let mut rng = random::stream(seed, first_stream + i as u64);
        g.set_column(i, &random::gaussian_vector(&mut rng, p));
    }
    let qr = g.qr();
    let r = qr.r();
    let diag = r.diagonal().abs();
    let rmax = diag.max();
    let rank = diag.iter().filter(|v| **v > 1e-10 * rmax).count();
    if rank < k || !(rmax > 0.0) {
        return Err(TikhError::DegenerateSamples { rank, wanted: k });
    }
    Ok(qr.q())
}

/// `k` orthonormal Gaussian directions in `R^p` (a `p × k` matrix). Sample `i`
/// draws from stream `i`; a rank-deficient draw is repeated once on streams
/// `k..2k`.
pub fn orthonormal_samples(seed: u64, p: usize, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > p {
        return Err(TikhError::InvalidInput(format!("need 1 ≤ k ≤ p, got k={k}, p={p}")));
    }
    match draw(seed, 0, p, k) {
        Err(TikhError::DegenerateSamples { .. }) => draw(seed, k as u64, p, k),
        other => other,
    }
}

/// Maps a parameter-space direction `[e; f]` to `(E, f)`.
fn to_matrix_direction(
    ctx: &SolvedProblem,
    handle: Option<&StructuredMatrix>,
    dir: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let (m, n) = ctx.a().shape();
    let k = dir.len() - m;
    let f = dir.rows(k, m).into_owned();
    let e = match handle {
        Some(h) => h.first_order_direction(&dir.rows(0, k).into_owned()),
        None => DMatrix::from_column_slice(m, n, &dir.as_slice()[..k]),
    };
    (e, f)
}

fn data_point(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>) -> DVector<f64> {
    let head: Vec<f64> = match handle {
        Some(h) => h.params().iter().copied().collect(),
        None => ctx.a().as_slice().to_vec(),
    };
    DVector::from_iterator(head.len() + ctx.b().len(), head.into_iter().chain(ctx.b().iter().copied()))
}

/// `‖[A, b]‖` scaled estimates for unstructured (`handle = None`) or
/// structured perturbations. Normwise and componentwise values share one
/// set of orthonormal samples.
pub fn sce_estimate(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>, opts: &SceOpts) -> Result<SceReport> {
    if let Some(h) = handle {
        if h.dims() != ctx.a().shape() {
            return Err(TikhError::BadDimension("handle does not match A".into()));
        }
    }
    let w = data_point(ctx, handle);
    let p = w.len();
    let q = orthonormal_samples(opts.seed, p, opts.k)?;
    let wp = opts.param_dim.unwrap_or(p);
    if opts.k > wp {
        return Err(TikhError::InvalidInput(format!("k={} exceeds p={wp}", opts.k)));
    }
    let factor = wallis(opts.k, opts.wallis_mode) / wallis(wp, opts.wallis_mode);

    let sel = ctx.selector();
    let eval = |c: usize| -> (DVector<f64>, DVector<f64>) {
        let dir = q.column(c).into_owned();
        let (e, f) = to_matrix_direction(ctx, handle, &dir);
        let dn = sel * directional_derivative(ctx, &e, &f);
        let (e, f) = to_matrix_direction(ctx, handle, &dir.component_mul(&w));
        let dc = sel * directional_derivative(ctx, &e, &f);
        (dn, dc)
    };
    let derivs: Vec<(DVector<f64>, DVector<f64>)> = if opts.parallel {
        (0..opts.k).into_par_iter().map(eval).collect()
    } else {
        (0..opts.k).map(eval).collect()
    };

    let l = sel.nrows();
    let mut sn = DVector::zeros(l);
    let mut sc = DVector::zeros(l);
    for (dn, dc) in &derivs {
        sn += dn.component_mul(dn);
        sc += dc.component_mul(dc);
    }
    let kappa_abs = sn.map(f64::sqrt) * factor;
    let c_abs = sc.map(f64::sqrt) * factor;

    let mx = ctx.mx();
    let kappa_sce = kappa_abs.norm() * w.norm() / mx.norm();
    let m_sce = c_abs.amax() / mx.amax();
    let (c_sce, undefined_components) = match componentwise_ratio(&c_abs, &mx) {
        Ok(c) => (Some(c), Vec::new()),
        Err(idx) => (None, idx),
    };
    Ok(SceReport {
        kappa_sce,
        m_sce,
        c_sce,
        undefined_components,
        k: opts.k,
        seed: opts.seed,
        p: wp,
        kappa_abs,
        c_abs,
    })
}

/// Unstructured normwise estimate; the componentwise fields are filled from
/// the same samples.
pub fn sce_normwise(ctx: &SolvedProblem, opts: &SceOpts) -> Result<SceReport> {
    sce_estimate(ctx, None, opts)
}

/// Unstructured componentwise estimate; fails on a zero component of `M x`
/// with a nonzero numerator.
pub fn sce_componentwise(ctx: &SolvedProblem, opts: &SceOpts) -> Result<SceReport> {
    let rep = sce_estimate(ctx, None, opts)?;
    if rep.c_sce.is_none() {
        return Err(TikhError::ZeroDenominator(rep.undefined_components));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceMode {
    Normwise,
    Componentwise,
}

/// Estimates under perturbations that keep the structure of `handle`.
pub fn sce_structured(
    ctx: &SolvedProblem,
    handle: &StructuredMatrix,
    opts: &SceOpts,
    mode: SceMode,
) -> Result<SceReport> {
    let rep = sce_estimate(ctx, Some(handle), opts)?;
    if mode == SceMode::Componentwise && rep.c_sce.is_none() {
        return Err(TikhError::ZeroDenominator(rep.undefined_components));
    }
    Ok(rep)
}
