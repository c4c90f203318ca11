mod common;

use common::{dims, problem_for, random_handle, rel, uniform};
use proptest::prelude::*;
use tikhcond_core::cond::{cond_exact, cond_single_component, cond_structured_linear, cond_unstructured};
use tikhcond_core::frechet::{operator_for, RowScaled};
use tikhcond_core::{
    DMatrix, DVector, FrechetOperator, LinearBasis, ParamPerturbation, SolvedProblem, StructureKind,
    StructuredMatrix,
};

const KINDS: [StructureKind; 5] = [
    StructureKind::SymToeplitz,
    StructureKind::Toeplitz,
    StructureKind::Hankel,
    StructureKind::Vandermonde,
    StructureKind::Cauchy,
];

fn config() -> ProptestConfig {
    ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() }
}

/// `M x` at data `[params; b] + t·u`.
fn phi(ctx: &SolvedProblem, h: &StructuredMatrix, u: &DVector<f64>, t: f64) -> DVector<f64> {
    let k = h.param_count();
    let m = ctx.a().nrows();
    let a = h
        .perturbed(&ParamPerturbation::new(u.rows(0, k) * t))
        .unwrap()
        .materialize();
    let b = ctx.b() + u.rows(k, m) * t;
    ctx.selector() * ctx.resolve(a, b).unwrap()
}

fn setup(seed: u64, kind: usize, l: usize, max_n: usize) -> (StructuredMatrix, SolvedProblem) {
    let (m, n) = dims(seed, max_n);
    let h = random_handle(KINDS[kind], m, n, seed);
    let ctx = problem_for(&h, l, seed);
    (h, ctx)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn forward_matches_central_difference(seed in any::<u64>(), kind in 0usize..5, l in 0usize..3) {
        let (h, ctx) = setup(seed, kind, l, 12);
        let op = operator_for(&ctx, Some(&h)).unwrap();
        let u = uniform(seed, 30, op.input_dim());
        let delta = 1e-6;
        let fd = (phi(&ctx, &h, &u, delta) - phi(&ctx, &h, &u, -delta)) / (2.0 * delta);
        let fwd = op.forward(&u);
        prop_assert!((&fd - &fwd).norm() <= 1e-5 * fwd.norm(), "{} fd={} fwd={}", h.kind(), fd, fwd);
    }

    #[test]
    fn adjoint_identity(seed in any::<u64>(), kind in 0usize..6, l in 0usize..3) {
        let (h, ctx) = setup(seed, kind % 5, l, 20);
        let handle = (kind < 5).then_some(&h);
        let op = operator_for(&ctx, handle).unwrap();
        let u = uniform(seed, 31, op.input_dim());
        let w = uniform(seed, 32, op.l());
        let ju = op.forward(&u);
        let jtw = op.adjoint(&w);
        let scale = (w.norm() * ju.norm()).max(jtw.norm() * u.norm());
        prop_assert!((w.dot(&ju) - jtw.dot(&u)).abs() <= 1e-12 * scale);

        let s = DVector::from_fn(op.l(), |i, _| 1.0 + i as f64);
        let scaled = RowScaled::new(op.as_ref(), &s).unwrap();
        let lhs = w.dot(&scaled.forward(&u));
        let rhs = scaled.adjoint(&w).dot(&u);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(scale));
    }

    #[test]
    fn jacobian_columns_are_forward_images(seed in any::<u64>(), kind in 0usize..6) {
        let (h, ctx) = setup(seed, kind % 5, 0, 8);
        let handle = (kind < 5).then_some(&h);
        let op = operator_for(&ctx, handle).unwrap();
        let jac = op.jacobian().unwrap();
        let j = (seed as usize) % op.input_dim();
        let e = DVector::from_fn(op.input_dim(), |i, _| if i == j { 1.0 } else { 0.0 });
        let col = jac.column(j).into_owned();
        prop_assert!((op.forward(&e) - &col).norm() <= 1e-12 * jac.norm());
    }

    #[test]
    fn structured_below_unstructured(seed in any::<u64>(), kind in 0usize..3, l in 0usize..3) {
        let (h, ctx) = setup(seed, kind, l, 20);
        let s = cond_exact(&ctx, Some(&h)).unwrap();
        let u = cond_unstructured(&ctx).unwrap();
        prop_assert!(s.mixed <= u.mixed * (1.0 + 1e-12));
        if let (Some(cs), Some(cu)) = (s.componentwise, u.componentwise) {
            prop_assert!(cs <= cu * (1.0 + 1e-12));
        }
        let basis = h.basis().unwrap();
        let smax = (0..basis.len()).map(|i| basis.frobenius_norm(i)).fold(1.0f64, f64::max);
        prop_assert!(s.normwise <= 2f64.sqrt() * smax * u.normwise * (1.0 + 1e-12));
    }

    #[test]
    fn full_canonical_basis_collapses(seed in any::<u64>()) {
        let (h, ctx) = setup(seed, 1, (seed % 3) as usize, 8);
        let (m, n) = h.dims();
        let mut mats = Vec::with_capacity(m * n);
        for j in 0..n {
            for i in 0..m {
                mats.push(DMatrix::from_fn(m, n, |r, c| if r == i && c == j { 1.0 } else { 0.0 }));
            }
        }
        let basis = LinearBasis::new(m, n, mats).unwrap();
        let params = DVector::from_column_slice(ctx.a().as_slice());
        let s = cond_structured_linear(&ctx, StructureKind::GeneralLinear, &basis, &params).unwrap();
        let u = cond_unstructured(&ctx).unwrap();
        prop_assert!(rel(s.normwise, u.normwise) <= 1e-10);
        prop_assert!(rel(s.mixed, u.mixed) <= 1e-10);
        if let (Some(cs), Some(cu)) = (s.componentwise, u.componentwise) {
            prop_assert!(rel(cs, cu) <= 1e-10);
        }
    }

    #[test]
    fn single_row_closed_forms(seed in any::<u64>(), kind in 0usize..6) {
        let (h, ctx) = setup(seed, kind % 5, 1, 20);
        let handle = (kind < 5).then_some(&h);
        let closed = cond_single_component(&ctx, handle).unwrap();
        let general = cond_exact(&ctx, handle).unwrap().normwise;
        prop_assert!(rel(closed, general) <= 1e-10, "{} vs {}", closed, general);
    }
}
