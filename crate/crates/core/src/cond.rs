//! Exact normwise, mixed and componentwise condition numbers.
//!
//! For a Fréchet derivative `J` (l × (k + m)) at the data point `w = [params; b]`:
//!
//! ```text
//! κ = ‖J‖₂ ‖w‖₂ / ‖M x‖₂
//! m = ‖ |J| |w| ‖_∞ / ‖M x‖_∞
//! c = ‖ (|J| |w|) / (M x) ‖_∞
//! ```
//!
//! Componentwise division follows the convention `0/0 = 0`; a nonzero
//! numerator over a zero component leaves `c` undefined and lists the index.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Result, TikhError};
use crate::frechet::{operator_for, CauchyFrechet, FrechetOperator, LinearFrechet, UnstructuredFrechet, VandermondeFrechet};
use crate::problem::SolvedProblem;
use crate::random;
use crate::structmat::{
    cauchy_derived_c1, vdm_derived_v1, LinearBasis, ParamPerturbation, StructureKind, StructuredMatrix,
};

/// Magnitude below which numerator and denominator count as zero.
pub const ZERO_TOL: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureTag {
    Structured(StructureKind),
    Unstructured,
}

impl StructureTag {
    pub fn name(self) -> &'static str {
        match self {
            StructureTag::Structured(k) => k.name(),
            StructureTag::Unstructured => "unstructured",
        }
    }
}

impl fmt::Display for StructureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for StructureTag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Power,
    Sce,
    /// Sampled lower bound from re-solved perturbed problems.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub structure: StructureTag,
    pub method: Method,
    pub normwise: f64,
    pub mixed: f64,
    /// `None` when some zero component of `M x` has a nonzero numerator.
    pub componentwise: Option<f64>,
    pub undefined_components: Vec<usize>,
}

impl ConditionReport {
    /// The componentwise value or [`TikhError::ZeroDenominator`].
    pub fn componentwise_value(&self) -> Result<f64> {
        self.componentwise
            .ok_or_else(|| TikhError::ZeroDenominator(self.undefined_components.clone()))
    }
}

/// `‖num ⊘ den‖_∞` under the `0/0 = 0` convention; `Err` lists undefined indices.
pub fn componentwise_ratio(num: &DVector<f64>, den: &DVector<f64>) -> std::result::Result<f64, Vec<usize>> {
    let mut best = 0.0f64;
    let mut undefined = Vec::new();
    for (j, (&n, &d)) in num.iter().zip(den.iter()).enumerate() {
        if d.abs() < ZERO_TOL {
            if n.abs() < ZERO_TOL {
                continue;
            }
            undefined.push(j);
        } else {
            best = best.max((n / d).abs());
        }
    }
    if undefined.is_empty() {
        Ok(best)
    } else {
        Err(undefined)
    }
}

/// Largest singular value, through the smaller Gram matrix.
pub fn spectral_norm(j: &DMatrix<f64>) -> f64 {
    if j.is_empty() {
        return 0.0;
    }
    if j.nrows() == 1 || j.ncols() == 1 {
        return j.norm();
    }
    let gram = if j.nrows() <= j.ncols() {
        j * j.transpose()
    } else {
        j.tr_mul(j)
    };
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// The triple from an explicit Jacobian.
pub fn triple_from_jacobian(
    structure: StructureTag,
    jac: &DMatrix<f64>,
    w: &DVector<f64>,
    mx: &DVector<f64>,
) -> ConditionReport {
    let num = jac.abs() * w.abs();
    let normwise = spectral_norm(jac) * w.norm() / mx.norm();
    let mixed = num.amax() / mx.amax();
    let (componentwise, undefined_components) = match componentwise_ratio(&num, mx) {
        Ok(c) => (Some(c), Vec::new()),
        Err(idx) => (None, idx),
    };
    ConditionReport {
        structure,
        method: Method::Exact,
        normwise,
        mixed,
        componentwise,
        undefined_components,
    }
}

/// Exact triple for any operator, through its assembled Jacobian.
pub fn cond_from_operator(ctx: &SolvedProblem, op: &dyn FrechetOperator) -> Result<ConditionReport> {
    let jac = op.jacobian()?;
    Ok(triple_from_jacobian(op.structure(), &jac, &op.data_point(), &ctx.mx()))
}

pub fn cond_structured_linear(
    ctx: &SolvedProblem,
    kind: StructureKind,
    basis: &LinearBasis,
    params: &DVector<f64>,
) -> Result<ConditionReport> {
    let op = LinearFrechet::new(ctx, kind, basis.clone(), params.clone())?;
    cond_from_operator(ctx, &op)
}

pub fn cond_unstructured(ctx: &SolvedProblem) -> Result<ConditionReport> {
    cond_from_operator(ctx, &UnstructuredFrechet::new(ctx))
}

pub fn cond_vandermonde(ctx: &SolvedProblem, nodes: &DVector<f64>) -> Result<ConditionReport> {
    cond_from_operator(ctx, &VandermondeFrechet::new(ctx, nodes.clone())?)
}

pub fn cond_cauchy(ctx: &SolvedProblem, u: &DVector<f64>, v: &DVector<f64>) -> Result<ConditionReport> {
    cond_from_operator(ctx, &CauchyFrechet::new(ctx, u.clone(), v.clone())?)
}

/// Dispatch on the handle's kind; `None` means unstructured.
pub fn cond_exact(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>) -> Result<ConditionReport> {
    let op = operator_for(ctx, handle)?;
    cond_from_operator(ctx, op.as_ref())
}

/// Normwise condition number for a single-row selector `M = mᵀ`, from the
/// closed forms of each structure. With `g = P m` and `d = A g`:
///
/// * linear: `√(Σ s_i² + ‖d‖²)`, `s_i = ⟨S_i, r gᵀ − d xᵀ⟩`
/// * Vandermonde: `√(‖y ⊙ g − x ⊙ V₁ᵀd‖² + ‖d‖²)`
/// * Cauchy: `√(t² + s² + ‖d‖²)` with `t = ‖r ⊙ C₁g − z₁ ⊙ d‖`, `s = ‖x ⊙ C₁ᵀd − z₂ ⊙ g‖`
/// * unstructured: `√(‖r gᵀ − d xᵀ‖_F² + ‖d‖²)`
///
/// each multiplied by `‖[params; b]‖₂ / |m x|`.
pub fn cond_single_component(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>) -> Result<f64> {
    let sel = ctx.selector();
    if sel.nrows() != 1 {
        return Err(TikhError::MNotSingleRow(sel.nrows()));
    }
    let g = ctx.apply_p(&sel.row(0).transpose());
    let a = ctx.a();
    let d = a * &g;
    let (x, r, b) = (ctx.x(), ctx.r(), ctx.b());
    let mx = sel.row(0).transpose().dot(x).abs();
    let dn2 = d.norm_squared();

    let (sq, w2) = match handle {
        None => {
            let f2 = (r * g.transpose() - &d * x.transpose()).norm_squared();
            (f2 + dn2, a.norm_squared() + b.norm_squared())
        }
        Some(h) => {
            let p2 = h.params().norm_squared() + b.norm_squared();
            match h.kind() {
                StructureKind::Vandermonde => {
                    let v1 = vdm_derived_v1(a);
                    let y = v1.tr_mul(r);
                    let top = y.component_mul(&g) - x.component_mul(&v1.tr_mul(&d));
                    (top.norm_squared() + dn2, p2)
                }
                StructureKind::Cauchy => {
                    let (u, v) = h.cauchy_generators().expect("cauchy");
                    let c1 = cauchy_derived_c1(&u, &v)?;
                    let z1 = &c1 * x;
                    let z2 = c1.tr_mul(r);
                    let t = r.component_mul(&(&c1 * &g)) - z1.component_mul(&d);
                    let s = x.component_mul(&c1.tr_mul(&d)) - z2.component_mul(&g);
                    (t.norm_squared() + s.norm_squared() + dn2, p2)
                }
                _ => {
                    let basis = h
                        .basis()
                        .ok_or_else(|| TikhError::UnsupportedForNonlinear(h.kind().to_string()))?;
                    let k = r * g.transpose() - &d * x.transpose();
                    (basis.project(&k).norm_squared() + dn2, p2)
                }
            }
        }
    };
    Ok(sq.sqrt() * w2.sqrt() / mx)
}

/// Rebuilds `(A, b)` from a perturbed data vector `[params; b]`.
fn perturbed_data(
    ctx: &SolvedProblem,
    handle: Option<&StructuredMatrix>,
    dw: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let m = ctx.a().nrows();
    let k = dw.len() - m;
    let db = dw.rows(k, m).into_owned();
    let a = match handle {
        Some(h) => h
            .perturbed(&ParamPerturbation::new(dw.rows(0, k).into_owned()))?
            .materialize(),
        None => ctx.a() + DMatrix::from_column_slice(m, ctx.a().ncols(), &dw.as_slice()[..k]),
    };
    Ok((a, ctx.b() + db))
}

/// Sampled lower bounds on the three condition numbers.
///
/// Mixed and componentwise values use relative sign perturbations
/// `Δw = δ s ⊙ w`; the normwise value uses random unit directions scaled by
/// `δ‖w‖₂`. Each sample re-solves the perturbed problem.
pub fn fd_condition_oracle(
    ctx: &SolvedProblem,
    handle: Option<&StructuredMatrix>,
    n_samples: usize,
    delta: f64,
    seed: u64,
) -> Result<ConditionReport> {
    let w = match handle {
        Some(h) => {
            let mut v = h.params().iter().copied().collect::<Vec<_>>();
            v.extend(ctx.b().iter());
            DVector::from_vec(v)
        }
        None => {
            let mut v = ctx.a().as_slice().to_vec();
            v.extend(ctx.b().iter());
            DVector::from_vec(v)
        }
    };
    let mx = ctx.mx();
    let wn = w.norm();

    let samples: Vec<Result<(f64, f64, f64)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::stream(seed, i);
            let s = random::signs(&mut rng, w.len());
            let dir = random::gaussian_vector(&mut rng, w.len());
            let dir = &dir / dir.norm();

            let (a1, b1) = perturbed_data(ctx, handle, &(s.component_mul(&w) * delta))?;
            let dx = ctx.selector() * ctx.resolve(a1, b1)? - &mx;
            let mixed = dx.amax() / (delta * mx.amax());
            let comp = componentwise_ratio(&dx, &mx).unwrap_or(0.0) / delta;

            let (a2, b2) = perturbed_data(ctx, handle, &(dir * (delta * wn)))?;
            let dx2 = ctx.selector() * ctx.resolve(a2, b2)? - &mx;
            let norm = dx2.norm() / (delta * mx.norm());
            Ok((norm, mixed, comp))
        })
        .collect();

    let mut best = (0.0f64, 0.0f64, 0.0f64);
    for s in samples {
        let (n, m, c) = s?;
        best = (best.0.max(n), best.1.max(m), best.2.max(c));
    }
    Ok(ConditionReport {
        structure: handle.map_or(StructureTag::Unstructured, |h| StructureTag::Structured(h.kind())),
        method: Method::Oracle,
        normwise: best.0,
        mixed: best.1,
        componentwise: Some(best.2),
        undefined_components: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::TikhonovProblem;
    use approx::assert_relative_eq;

    fn identity_ctx(b: DVector<f64>, selector: Option<DMatrix<f64>>) -> SolvedProblem {
        let n = b.len();
        let mut diag = vec![0.0; n];
        diag[0] = 1.0;
        let handle = StructuredMatrix::sym_toeplitz(n, n, &diag).unwrap();
        let mut p = TikhonovProblem::from_handle(handle, DMatrix::identity(n, n), b, 1.0).unwrap();
        if let Some(s) = selector {
            p = p.with_selector(s).unwrap();
        }
        SolvedProblem::new(p).unwrap()
    }

    #[test]
    fn identity_unstructured_mixed_is_one() {
        let ctx = identity_ctx(DVector::from_vec(vec![1.0, 0.0, 0.0]), None);
        let rep = cond_unstructured(&ctx).unwrap();
        assert_relative_eq!(rep.mixed, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_over_zero_is_zero() {
        let jac = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        let w = DVector::from_vec(vec![1.0, 1.0]);
        let mx = DVector::from_vec(vec![3.0, 0.0]);
        let rep = triple_from_jacobian(StructureTag::Unstructured, &jac, &w, &mx);
        assert_eq!(rep.componentwise, Some(1.0));
        assert_eq!(rep.mixed, 1.0);
    }

    #[test]
    fn nonzero_over_zero_is_flagged() {
        let num = DVector::from_vec(vec![1.0, 0.0, 2.0]);
        let den = DVector::from_vec(vec![0.5, 0.0, 0.0]);
        assert_eq!(componentwise_ratio(&num, &den), Err(vec![2]));
        let den = DVector::from_vec(vec![0.5, 0.0, -4.0]);
        assert_eq!(componentwise_ratio(&num, &den), Ok(2.0));
    }

    #[test]
    fn single_row_identity_closed_form() {
        let sel = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ctx = identity_ctx(DVector::from_vec(vec![1.0, 0.0, 0.0]), Some(sel));
        let h = ctx.problem().handle().unwrap();
        let closed = cond_single_component(&ctx, Some(h)).unwrap();
        // D = e1ᵀ/2, ‖[a; b]‖ = √2, |x₁| = 1/2.
        assert_relative_eq!(closed, 0.5 * 2f64.sqrt() / 0.5, epsilon = 1e-14);
        let general = cond_exact(&ctx, Some(h)).unwrap().normwise;
        assert_relative_eq!(closed, general, max_relative = 1e-10);
    }

    #[test]
    fn single_row_requires_one_row() {
        let ctx = identity_ctx(DVector::from_vec(vec![1.0, 0.0, 0.0]), None);
        assert!(matches!(cond_single_component(&ctx, None), Err(TikhError::MNotSingleRow(3))));
    }

    #[test]
    fn oracle_on_identity() {
        let ctx = identity_ctx(DVector::from_vec(vec![1.0, 1.0, 1.0]), None);
        let rep = fd_condition_oracle(&ctx, ctx.problem().handle(), 64, 1e-7, 1).unwrap();
        assert!((rep.mixed - 1.0).abs() < 1e-5, "{}", rep.mixed);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let j = DMatrix::from_fn(3, 7, |i, k| ((i * 7 + k) as f64).sin());
        assert_relative_eq!(spectral_norm(&j), j.singular_values().max(), max_relative = 1e-12);
        assert_relative_eq!(spectral_norm(&j.transpose()), j.singular_values().max(), max_relative = 1e-12);
    }

    #[test]
    fn report_json_shape() {
        let rep = ConditionReport {
            structure: StructureTag::Structured(StructureKind::Hankel),
            method: Method::Exact,
            normwise: 1.0,
            mixed: 2.0,
            componentwise: None,
            undefined_components: vec![3],
        };
        let js = serde_json::to_value(&rep).unwrap();
        assert_eq!(js["structure"], "hankel");
        assert_eq!(js["method"], "exact");
        assert!(js["componentwise"].is_null());
    }
}
