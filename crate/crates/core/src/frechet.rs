//! Fréchet derivatives of `[params; b] ↦ M x_λ` and their adjoints.
//!
//! Every operator applies `P(A, λ)` exactly once per forward or adjoint call.
//! With `g = P Mᵀ h` and `d = A g`, the adjoints share the form
//! `[⟨S_i, r gᵀ − d xᵀ⟩_i ; d]`, specialised per structure.

use nalgebra::{DMatrix, DVector};

use crate::cond::StructureTag;
use crate::error::{Result, TikhError};
use crate::problem::SolvedProblem;
use crate::structmat::{
    cauchy_derived_c1, vdm_derived_v1, LinearBasis, StructureKind, StructuredMatrix, STRUCT_TOL,
};

/// Default cap on the number of entries of an assembled unstructured Jacobian.
pub const JACOBIAN_CAP: usize = 50_000_000;

pub trait FrechetOperator: Sync {
    /// Number of matrix parameters (the `b` block is not counted).
    fn param_count(&self) -> usize;
    /// Rows of `A`, the length of the `b` block.
    fn m(&self) -> usize;
    /// Rows of the selector, the output dimension.
    fn l(&self) -> usize;

    fn input_dim(&self) -> usize {
        self.param_count() + self.m()
    }

    fn structure(&self) -> StructureTag;

    /// `Dφ · [Δparams; Δb]`.
    fn forward(&self, u: &DVector<f64>) -> DVector<f64>;

    /// `Dφᵀ · h`.
    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64>;

    /// `[params; b]`, the point at which relative perturbations are measured.
    fn data_point(&self) -> DVector<f64>;

    /// Dense `l × (k + m)` matrix of the operator.
    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let dim = self.input_dim();
        let mut j = DMatrix::zeros(self.l(), dim);
        let mut e = DVector::zeros(dim);
        for c in 0..dim {
            e[c] = 1.0;
            j.set_column(c, &self.forward(&e));
            e[c] = 0.0;
        }
        Ok(j)
    }
}

fn split(u: &DVector<f64>, k: usize) -> (DVector<f64>, DVector<f64>) {
    (u.rows(0, k).into_owned(), u.rows(k, u.len() - k).into_owned())
}

fn stack(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

/// `g = P Mᵀ h` and `d = A g`.
fn adjoint_core(ctx: &SolvedProblem, h: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let g = ctx.apply_p(&ctx.selector().tr_mul(h));
    let d = ctx.a() * &g;
    (g, d)
}

/// `M P w`.
fn finish(ctx: &SolvedProblem, w: &DVector<f64>) -> DVector<f64> {
    ctx.selector() * ctx.apply_p(w)
}

/// `−AᵀΔA x + ΔAᵀ r + AᵀΔb`.
fn matrix_direction_rhs(ctx: &SolvedProblem, da: &DMatrix<f64>, db: &DVector<f64>) -> DVector<f64> {
    let a = ctx.a();
    let mut w = da.tr_mul(ctx.r());
    w -= a.tr_mul(&(da * ctx.x()));
    w += a.tr_mul(db);
    w
}

/// Linear structures `A = Σ a_i S_i`.
pub struct LinearFrechet<'a> {
    ctx: &'a SolvedProblem,
    kind: StructureKind,
    basis: LinearBasis,
    params: DVector<f64>,
}

impl<'a> LinearFrechet<'a> {
    pub fn new(ctx: &'a SolvedProblem, kind: StructureKind, basis: LinearBasis, params: DVector<f64>) -> Result<Self> {
        if basis.dims() != ctx.a().shape() || params.len() != basis.len() {
            return Err(TikhError::BadDimension("basis does not match A".into()));
        }
        let residual = (basis.combine(&params) - ctx.a()).norm() / ctx.a().norm().max(f64::MIN_POSITIVE);
        if residual > STRUCT_TOL {
            return Err(TikhError::BasisMismatch { residual });
        }
        Ok(Self {
            ctx,
            kind,
            basis,
            params,
        })
    }

    pub fn from_handle(ctx: &'a SolvedProblem, handle: &StructuredMatrix) -> Result<Self> {
        let basis = handle
            .basis()
            .ok_or_else(|| TikhError::UnsupportedForNonlinear(handle.kind().to_string()))?;
        Self::new(ctx, handle.kind(), basis.clone(), handle.params().clone())
    }

    pub fn basis(&self) -> &LinearBasis {
        &self.basis
    }

    /// `[v_1 … v_k]` with `v_i = −AᵀS_i x + S_iᵀ r` (n × k).
    pub fn v_matrix(&self) -> DMatrix<f64> {
        self.basis.apply_transpose_all(self.ctx.r()) - self.ctx.a().tr_mul(&self.basis.apply_all(self.ctx.x()))
    }
}

impl FrechetOperator for LinearFrechet<'_> {
    fn param_count(&self) -> usize {
        self.basis.len()
    }
    fn m(&self) -> usize {
        self.ctx.a().nrows()
    }
    fn l(&self) -> usize {
        self.ctx.l_rows()
    }
    fn structure(&self) -> StructureTag {
        StructureTag::Structured(self.kind)
    }

    fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        let (da, db) = split(u, self.param_count());
        let dmat = self.basis.combine(&da);
        finish(self.ctx, &matrix_direction_rhs(self.ctx, &dmat, &db))
    }

    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
        let (g, d) = adjoint_core(self.ctx, h);
        let k = self.ctx.r() * g.transpose() - &d * self.ctx.x().transpose();
        stack(&self.basis.project(&k), &d)
    }

    fn data_point(&self) -> DVector<f64> {
        stack(&self.params, self.ctx.b())
    }

    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let g = self.ctx.g_matrix();
        let (k, m) = (self.param_count(), self.m());
        let mut j = DMatrix::zeros(self.l(), k + m);
        j.columns_mut(0, k).copy_from(&(&g * self.v_matrix()));
        j.columns_mut(k, m).copy_from(&(&g * self.ctx.a().transpose()));
        Ok(j)
    }
}

/// Vandermonde `v_ij = a_j^i`, parameters are the nodes.
pub struct VandermondeFrechet<'a> {
    ctx: &'a SolvedProblem,
    nodes: DVector<f64>,
    v1: DMatrix<f64>,
    y: DVector<f64>,
}

impl<'a> VandermondeFrechet<'a> {
    pub fn new(ctx: &'a SolvedProblem, nodes: DVector<f64>) -> Result<Self> {
        let (m, n) = ctx.a().shape();
        if nodes.len() != n {
            return Err(TikhError::BadDimension(format!("{} nodes for {n} columns", nodes.len())));
        }
        let handle = StructuredMatrix::vandermonde(m, nodes.as_slice())?;
        let v = handle.materialize();
        let residual = (&v - ctx.a()).norm() / ctx.a().norm().max(f64::MIN_POSITIVE);
        if residual > STRUCT_TOL {
            return Err(TikhError::NotInClass { residual });
        }
        let v1 = vdm_derived_v1(&v);
        let y = v1.tr_mul(ctx.r());
        Ok(Self { ctx, nodes, v1, y })
    }
}

impl FrechetOperator for VandermondeFrechet<'_> {
    fn param_count(&self) -> usize {
        self.nodes.len()
    }
    fn m(&self) -> usize {
        self.ctx.a().nrows()
    }
    fn l(&self) -> usize {
        self.ctx.l_rows()
    }
    fn structure(&self) -> StructureTag {
        StructureTag::Structured(StructureKind::Vandermonde)
    }

    fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        let (da, db) = split(u, self.param_count());
        let a = self.ctx.a();
        let mut w = a.tr_mul(&db);
        w += da.component_mul(&self.y);
        w -= a.tr_mul(&(&self.v1 * da.component_mul(self.ctx.x())));
        finish(self.ctx, &w)
    }

    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
        let (g, d) = adjoint_core(self.ctx, h);
        let top = self.y.component_mul(&g) - self.ctx.x().component_mul(&self.v1.tr_mul(&d));
        stack(&top, &d)
    }

    fn data_point(&self) -> DVector<f64> {
        stack(&self.nodes, self.ctx.b())
    }

    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let g = self.ctx.g_matrix();
        let a = self.ctx.a();
        let (n, m) = (self.param_count(), self.m());
        let mut left = -a.tr_mul(&self.v1);
        for (j, mut col) in left.column_iter_mut().enumerate() {
            col *= self.ctx.x()[j];
        }
        for i in 0..n {
            left[(i, i)] += self.y[i];
        }
        let mut jac = DMatrix::zeros(self.l(), n + m);
        jac.columns_mut(0, n).copy_from(&(&g * left));
        jac.columns_mut(n, m).copy_from(&(&g * a.transpose()));
        Ok(jac)
    }
}

/// Cauchy `c_ij = 1/(u_i − v_j)`, parameters `[u; v]`.
pub struct CauchyFrechet<'a> {
    ctx: &'a SolvedProblem,
    u: DVector<f64>,
    v: DVector<f64>,
    c1: DMatrix<f64>,
    z1: DVector<f64>,
    z2: DVector<f64>,
}

impl<'a> CauchyFrechet<'a> {
    pub fn new(ctx: &'a SolvedProblem, u: DVector<f64>, v: DVector<f64>) -> Result<Self> {
        let handle = StructuredMatrix::cauchy(u.as_slice(), v.as_slice())?;
        if handle.dims() != ctx.a().shape() {
            return Err(TikhError::BadDimension("generators do not match A".into()));
        }
        let residual = (handle.materialize() - ctx.a()).norm() / ctx.a().norm().max(f64::MIN_POSITIVE);
        if residual > STRUCT_TOL {
            return Err(TikhError::NotInClass { residual });
        }
        let c1 = cauchy_derived_c1(&u, &v)?;
        let z1 = &c1 * ctx.x();
        let z2 = c1.tr_mul(ctx.r());
        Ok(Self { ctx, u, v, c1, z1, z2 })
    }

    /// The blocks `C_u = C₁ᵀDiag(r) − CᵀDiag(z₁)` and `C_v = CᵀC₁Diag(x) − Diag(z₂)`.
    pub fn blocks(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = self.ctx.a();
        let (m, n) = c.shape();
        let r = self.ctx.r();
        let x = self.ctx.x();
        let mut cu = self.c1.transpose();
        let ct = c.transpose();
        for i in 0..m {
            let mut col = cu.column_mut(i);
            col *= r[i];
            col.axpy(-self.z1[i], &ct.column(i), 1.0);
        }
        let mut cv = c.tr_mul(&self.c1);
        for j in 0..n {
            cv.column_mut(j).scale_mut(x[j]);
            cv[(j, j)] -= self.z2[j];
        }
        (cu, cv)
    }
}

impl FrechetOperator for CauchyFrechet<'_> {
    fn param_count(&self) -> usize {
        self.u.len() + self.v.len()
    }
    fn m(&self) -> usize {
        self.u.len()
    }
    fn l(&self) -> usize {
        self.ctx.l_rows()
    }
    fn structure(&self) -> StructureTag {
        StructureTag::Structured(StructureKind::Cauchy)
    }

    fn forward(&self, w_in: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.u.len(), self.v.len());
        // dC = C₁ Diag(dv) − Diag(du) C₁, so the generator blocks enter as −C_u, −C_v.
        let du = -w_in.rows(0, m).into_owned();
        let dv = -w_in.rows(m, n).into_owned();
        let db = w_in.rows(m + n, m).into_owned();
        let c = self.ctx.a();
        let mut w = c.tr_mul(&(db - du.component_mul(&self.z1)));
        w += self.c1.tr_mul(&du.component_mul(self.ctx.r()));
        w += c.tr_mul(&(&self.c1 * dv.component_mul(self.ctx.x())));
        w -= dv.component_mul(&self.z2);
        finish(self.ctx, &w)
    }

    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
        let (g, d) = adjoint_core(self.ctx, h);
        let pu = self.ctx.r().component_mul(&(&self.c1 * &g)) - self.z1.component_mul(&d);
        let pv = self.ctx.x().component_mul(&self.c1.tr_mul(&d)) - self.z2.component_mul(&g);
        stack(&stack(&-pu, &-pv), &d)
    }

    fn data_point(&self) -> DVector<f64> {
        stack(&stack(&self.u, &self.v), self.ctx.b())
    }

    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let g = self.ctx.g_matrix();
        let (m, n) = (self.u.len(), self.v.len());
        let (cu, cv) = self.blocks();
        let mut jac = DMatrix::zeros(self.l(), 2 * m + n);
        jac.columns_mut(0, m).copy_from(&-(&g * cu));
        jac.columns_mut(m, n).copy_from(&-(&g * cv));
        jac.columns_mut(m + n, m).copy_from(&(&g * self.ctx.a().transpose()));
        Ok(jac)
    }
}

/// Every entry of `A` is a parameter, ordered column-major (`i + j·m`).
pub struct UnstructuredFrechet<'a> {
    ctx: &'a SolvedProblem,
    cap: usize,
}

impl<'a> UnstructuredFrechet<'a> {
    pub fn new(ctx: &'a SolvedProblem) -> Self {
        Self { ctx, cap: JACOBIAN_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }
}

impl FrechetOperator for UnstructuredFrechet<'_> {
    fn param_count(&self) -> usize {
        self.ctx.a().len()
    }
    fn m(&self) -> usize {
        self.ctx.a().nrows()
    }
    fn l(&self) -> usize {
        self.ctx.l_rows()
    }
    fn structure(&self) -> StructureTag {
        StructureTag::Unstructured
    }

    fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        let (m, n) = self.ctx.a().shape();
        let da = DMatrix::from_column_slice(m, n, &u.as_slice()[..m * n]);
        let db = u.rows(m * n, m).into_owned();
        finish(self.ctx, &matrix_direction_rhs(self.ctx, &da, &db))
    }

    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
        let (g, d) = adjoint_core(self.ctx, h);
        let k = self.ctx.r() * g.transpose() - &d * self.ctx.x().transpose();
        stack(&DVector::from_column_slice(k.as_slice()), &d)
    }

    fn data_point(&self) -> DVector<f64> {
        stack(&DVector::from_column_slice(self.ctx.a().as_slice()), self.ctx.b())
    }

    /// Column `(i, j)` is `r_i G[:, j] − x_j D[:, i]`.
    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let (m, n) = self.ctx.a().shape();
        let l = self.l();
        let entries = l.saturating_mul(m * n + m);
        if entries > self.cap {
            return Err(TikhError::SizeCap { entries, cap: self.cap });
        }
        let g = self.ctx.g_matrix();
        let d = &g * self.ctx.a().transpose();
        let (x, r) = (self.ctx.x(), self.ctx.r());
        let mut jac = DMatrix::zeros(l, m * n + m);
        for j in 0..n {
            for i in 0..m {
                let mut col = jac.column_mut(i + j * m);
                col.axpy(r[i], &g.column(j), 0.0);
                col.axpy(-x[j], &d.column(i), 1.0);
            }
        }
        jac.columns_mut(m * n, m).copy_from(&d);
        Ok(jac)
    }
}

/// `Diag(s)⁻¹ · op`, the row scaling used for componentwise estimates.
pub struct RowScaled<'a> {
    inner: &'a dyn FrechetOperator,
    inv: DVector<f64>,
}

impl<'a> RowScaled<'a> {
    /// Fails with [`TikhError::ZeroDenominator`] if any `s_j` is zero.
    pub fn new(inner: &'a dyn FrechetOperator, s: &DVector<f64>) -> Result<Self> {
        let zeros: Vec<usize> = s.iter().enumerate().filter(|(_, v)| **v == 0.0).map(|(i, _)| i).collect();
        if !zeros.is_empty() {
            return Err(TikhError::ZeroDenominator(zeros));
        }
        Ok(Self {
            inner,
            inv: s.map(|v| 1.0 / v),
        })
    }
}

impl FrechetOperator for RowScaled<'_> {
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }
    fn m(&self) -> usize {
        self.inner.m()
    }
    fn l(&self) -> usize {
        self.inner.l()
    }
    fn structure(&self) -> StructureTag {
        self.inner.structure()
    }
    fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
        self.inner.forward(u).component_mul(&self.inv)
    }
    fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
        self.inner.adjoint(&h.component_mul(&self.inv))
    }
    fn data_point(&self) -> DVector<f64> {
        self.inner.data_point()
    }
    fn jacobian(&self) -> Result<DMatrix<f64>> {
        let mut j = self.inner.jacobian()?;
        for (i, mut row) in j.row_iter_mut().enumerate() {
            row *= self.inv[i];
        }
        Ok(j)
    }
}

/// The operator matching `handle`, or the unstructured one for `None`.
pub fn operator_for<'a>(
    ctx: &'a SolvedProblem,
    handle: Option<&StructuredMatrix>,
) -> Result<Box<dyn FrechetOperator + 'a>> {
    let Some(h) = handle else {
        return Ok(Box::new(UnstructuredFrechet::new(ctx)));
    };
    Ok(match h.kind() {
        StructureKind::Vandermonde => Box::new(VandermondeFrechet::new(ctx, h.params().clone())?),
        StructureKind::Cauchy => {
            let (u, v) = h.cauchy_generators().expect("cauchy");
            Box::new(CauchyFrechet::new(ctx, u, v)?)
        }
        _ => Box::new(LinearFrechet::from_handle(ctx, h)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::TikhonovProblem;
    use approx::assert_relative_eq;

    fn identity_ctx() -> SolvedProblem {
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let handle = StructuredMatrix::sym_toeplitz(3, 3, &[1.0, 0.0, 0.0]).unwrap();
        let p = TikhonovProblem::from_handle(handle, DMatrix::identity(3, 3), b, 1.0).unwrap();
        SolvedProblem::new(p).unwrap()
    }

    #[test]
    fn symmetric_identity_cancels() {
        let ctx = identity_ctx();
        let op = LinearFrechet::from_handle(&ctx, ctx.problem().handle().unwrap()).unwrap();
        let v = op.v_matrix();
        assert!(v.amax() < 1e-15);
        let db = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.2, -0.4, 1.0]);
        assert_relative_eq!(op.forward(&db), DVector::from_vec(vec![0.1, -0.2, 0.5]), epsilon = 1e-15);
    }

    #[test]
    fn forward_adjoint_and_jacobian_agree() {
        let ctx = identity_ctx();
        let op = UnstructuredFrechet::new(&ctx);
        let j = op.jacobian().unwrap();
        let dense = FrechetOperator::jacobian(&ByForward(&op)).unwrap();
        assert_relative_eq!(j, dense, epsilon = 1e-14);
        let h = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_relative_eq!(op.adjoint(&h), j.tr_mul(&h), epsilon = 1e-14);
    }

    #[test]
    fn basis_mismatch_detected() {
        let ctx = identity_ctx();
        let basis = crate::structmat::canonical_basis(StructureKind::SymToeplitz, 3, 3).unwrap();
        let err = LinearFrechet::new(&ctx, StructureKind::SymToeplitz, basis, DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert!(matches!(err, Err(TikhError::BasisMismatch { .. })));
    }

    #[test]
    fn unstructured_cap() {
        let ctx = identity_ctx();
        let op = UnstructuredFrechet::new(&ctx).with_cap(10);
        assert!(matches!(op.jacobian(), Err(TikhError::SizeCap { .. })));
    }

    /// Uses the default column-by-column jacobian.
    struct ByForward<'a>(&'a dyn FrechetOperator);

    impl FrechetOperator for ByForward<'_> {
        fn param_count(&self) -> usize {
            self.0.param_count()
        }
        fn m(&self) -> usize {
            self.0.m()
        }
        fn l(&self) -> usize {
            self.0.l()
        }
        fn structure(&self) -> StructureTag {
            self.0.structure()
        }
        fn forward(&self, u: &DVector<f64>) -> DVector<f64> {
            self.0.forward(u)
        }
        fn adjoint(&self, h: &DVector<f64>) -> DVector<f64> {
            self.0.adjoint(h)
        }
        fn data_point(&self) -> DVector<f64> {
            self.0.data_point()
        }
    }
}
