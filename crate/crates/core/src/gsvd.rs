//! Generalized singular value decomposition of a pair `(A, L)`.
//!
//! For `A` (m × n) and `L` (p × n) with `p ≤ n ≤ m`, rank(L) = p and
//! `[A; L]` of full column rank:
//!
//! ```text
//! A = U · blkdiag(Σ, I_{n−p}) · R · Qᵀ
//! L = V · [S 0] · R · Qᵀ
//! ```
//!
//! with `Σ = diag(σ)` ascending, `S = diag(μ)` descending and `σ² + μ² = 1`.
//! Computed from a QR factorization of the stacked pair followed by an SVD of
//! the lower orthonormal block.

use std::cmp::Ordering;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TikhError};

pub const RANK_TOL: f64 = 1e-10;
pub const GSVD_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct GsvdFactors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub mu: DVector<f64>,
}

impl GsvdFactors {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    /// Diagonal of `blkdiag((Σ² + λ²S²)⁻¹, I)`.
    fn shift_inverse(&self, lambda: f64) -> Result<DVector<f64>> {
        let l2 = lambda * lambda;
        let mut d = DVector::from_element(self.n(), 1.0);
        for i in 0..self.p() {
            let s = self.sigma[i] * self.sigma[i] + l2 * self.mu[i] * self.mu[i];
            if !(s > f64::MIN_POSITIVE) {
                return Err(TikhError::SingularShift(i));
            }
            d[i] = 1.0 / s;
        }
        Ok(d)
    }

    /// `P(A, λ) y = (AᵀA + λ²LᵀL)⁻¹ y` through two triangular solves.
    pub fn apply_p(&self, lambda: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.shift_inverse(lambda)?;
        Ok(self.apply_p_with(&d, y))
    }

    pub(crate) fn apply_p_with(&self, shift_inv: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let z = self.q.tr_mul(y);
        let mut w = self
            .r
            .tr_solve_upper_triangular(&z)
            .expect("R is nonsingular");
        w.component_mul_assign(shift_inv);
        let v = self.r.solve_upper_triangular(&w).expect("R is nonsingular");
        &self.q * v
    }

    /// Filter-factor solution `Q R⁻¹ (diag(σ/(σ² + λ²μ²)) ⊕ I) Uᵀ b`.
    pub fn filtered_solution(&self, lambda: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.shift_inverse(lambda)?;
        let mut w = self.u.tr_mul(b);
        for i in 0..self.p() {
            w[i] *= self.sigma[i] * d[i];
        }
        let v = self.r.solve_upper_triangular(&w).expect("R is nonsingular");
        Ok(&self.q * v)
    }

    /// `f_i = γ_i² / (γ_i² + λ²)`, evaluated as `σ_i² / (σ_i² + λ²μ_i²)`.
    pub fn filter_factors(&self, lambda: f64) -> DVector<f64> {
        let l2 = lambda * lambda;
        DVector::from_fn(self.p(), |i, _| {
            let s2 = self.sigma[i] * self.sigma[i];
            s2 / (s2 + l2 * self.mu[i] * self.mu[i])
        })
    }

    /// `U · blkdiag(Σ, I) · R · Qᵀ`.
    pub fn reconstruct_a(&self) -> DMatrix<f64> {
        let mut ur = self.u.clone();
        for i in 0..self.p() {
            ur.column_mut(i).scale_mut(self.sigma[i]);
        }
        ur * &self.r * self.q.transpose()
    }

    /// `V · [S 0] · R · Qᵀ`.
    pub fn reconstruct_l(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut vs = DMatrix::zeros(p, self.n());
        for i in 0..p {
            vs.column_mut(i).axpy(self.mu[i], &self.v.column(i), 0.0);
        }
        vs * &self.r * self.q.transpose()
    }
}

/// `γ_i = σ_i / μ_i`, nondecreasing.
pub fn gen_singular_values(f: &GsvdFactors) -> DVector<f64> {
    f.sigma.component_div(&f.mu)
}

/// One-sided Jacobi SVD of an `m × n` matrix: `(σ, U, V)` with `A V = U Diag(σ)`,
/// unsorted. Small singular values keep high relative accuracy; columns of
/// `U` for `σ = 0` are left zero.
fn jacobi_svd(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut x = a.clone();
    let mut v = DMatrix::identity(n, n);
    let tol = f64::EPSILON * (m.max(1) as f64);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = x.column(i).norm_squared();
                let beta = x.column(j).norm_squared();
                let gamma = x.column(i).dot(&x.column(j));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut x, &mut v] {
                    for r in 0..mat.nrows() {
                        let (xi, xj) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = c * xi - s * xj;
                        mat[(r, j)] = s * xi + c * xj;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = DVector::from_fn(n, |j, _| x.column(j).norm());
    for j in 0..n {
        if sigma[j] > 0.0 {
            x.column_mut(j).unscale_mut(sigma[j]);
        }
    }
    (sigma, x, v)
}

fn reversal(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i + j + 1 == n { 1.0 } else { 0.0 })
}

pub fn compute_gsvd(a: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<GsvdFactors> {
    let (m, n) = a.shape();
    let (p, nl) = l.shape();
    if nl != n {
        return Err(TikhError::BadDimension(format!(
            "A has {n} columns, L has {nl}"
        )));
    }
    if p == 0 || p > n || n > m {
        return Err(TikhError::BadDimension(format!(
            "need 1 ≤ p ≤ n ≤ m, got p={p}, n={n}, m={m}"
        )));
    }

    let mut stack = DMatrix::zeros(m + p, n);
    stack.view_mut((0, 0), (m, n)).copy_from(a);
    stack.view_mut((m, 0), (p, n)).copy_from(l);
    let qr = stack.qr();
    let qs = qr.q();
    let rs = qr.r();

    let rsv = jacobi_svd(&rs).0;
    let (smin, smax) = (rsv.min(), rsv.max());
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(TikhError::RankDeficient(format!(
            "stacked [A; L] has σ_min/σ_max = {:.3e}",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }

    let q1 = qs.rows(0, m).into_owned();
    let q2 = qs.rows(m, p).into_owned();

    // Directions with σ < 1/√2 come from the SVD of Q₁, where they are well
    // separated; the rest from the SVD of Q₂ restricted to their complement.
    let (sv1, _, v1) = jacobi_svd(&q1);
    let mut order1: Vec<usize> = (0..n).collect();
    order1.sort_by(|&i, &j| sv1[i].partial_cmp(&sv1[j]).unwrap_or(Ordering::Equal));
    let split = order1
        .iter()
        .take(p)
        .take_while(|&&i| sv1[i] < FRAC_1_SQRT_2)
        .count();
    let w1 = DMatrix::from_fn(n, n, |r, c| v1[(r, order1[c])]);
    let ws = w1.columns(0, split).into_owned();
    let wc = w1.columns(split, n - split).into_owned();

    let nc = n - split;
    let (mut mu2, mut z, mut v2) = (Vec::new(), DMatrix::zeros(nc, nc), DMatrix::zeros(p, nc));
    if nc > 0 {
        let (sv2, su, sv) = jacobi_svd(&(&q2 * &wc));
        let mut order2: Vec<usize> = (0..nc).collect();
        order2.sort_by(|&i, &j| sv2[j].partial_cmp(&sv2[i]).unwrap_or(Ordering::Equal));
        mu2 = order2.iter().map(|&i| sv2[i]).collect();
        z = DMatrix::from_fn(nc, nc, |r, c| sv[(r, order2[c])]);
        v2 = DMatrix::from_fn(p, nc, |r, c| su[(r, order2[c])]);
    }

    let mut w = DMatrix::zeros(n, n);
    w.columns_mut(0, split).copy_from(&ws);
    w.columns_mut(split, nc).copy_from(&(&wc * z));

    let mut mu_raw = DVector::zeros(p);
    let mut v = DMatrix::zeros(p, p);
    let y2s = &q2 * &ws;
    for i in 0..split {
        let c = y2s.column(i);
        mu_raw[i] = c.norm();
        v.set_column(i, &(c / mu_raw[i]));
    }
    for i in split..p {
        mu_raw[i] = mu2[i - split];
        v.set_column(i, &v2.column(i - split));
    }
    if !(mu_raw[p - 1] > RANK_TOL) {
        return Err(TikhError::RankDeficient(format!(
            "L has numerical rank below {p} (μ_p = {:.3e})",
            mu_raw[p - 1]
        )));
    }

    // Columns of Q₁W are orthogonal with norms σ (ascending) then 1. Factor
    // them largest first so vanishing columns only get completed at the end.
    let jr = reversal(n);
    let yqr = (&q1 * &w * &jr).qr();
    let mut u = yqr.q() * &jr;
    let mut tdiag = (&jr * yqr.r().diagonal()).into_owned();
    for i in 0..n {
        if tdiag[i] < 0.0 {
            tdiag[i] = -tdiag[i];
            u.column_mut(i).neg_mut();
        }
    }

    let mut x = w.tr_mul(&rs);
    let mut sigma = DVector::zeros(p);
    let mut mu = DVector::zeros(p);
    for i in 0..n {
        let scale = if i < p {
            let h = tdiag[i].hypot(mu_raw[i]);
            sigma[i] = tdiag[i] / h;
            mu[i] = mu_raw[i] / h;
            h
        } else {
            tdiag[i]
        };
        x.row_mut(i).scale_mut(scale);
    }

    // RQ of X through a QR of (J X)ᵀ.
    let xqr = (&jr * &x).transpose().qr();
    let q = xqr.q() * &jr;
    let r = &jr * xqr.r().transpose() * &jr;

    Ok(GsvdFactors {
        u,
        v,
        q,
        r,
        sigma,
        mu,
    })
}

/// Dense `P(A, λ)` through a Cholesky factorization of `AᵀA + λ²LᵀL`.
#[derive(Debug, Clone)]
pub struct DenseP {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DenseP {
    pub fn new(a: &DMatrix<f64>, l: &DMatrix<f64>, lambda: f64) -> Result<Self> {
        let k = a.tr_mul(a) + l.tr_mul(l) * (lambda * lambda);
        let chol = k
            .cholesky()
            .ok_or_else(|| TikhError::RankDeficient("AᵀA + λ²LᵀL is not positive definite".into()))?;
        Ok(Self { chol })
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(y)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}
