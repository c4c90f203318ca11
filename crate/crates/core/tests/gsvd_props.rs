mod common;

use common::uniform;
use proptest::prelude::*;
use tikhcond_core::gsvd::{gen_singular_values, DenseP};
use tikhcond_core::problem::normal_equations_residual;
use tikhcond_core::testproblems::gen_l1;
use tikhcond_core::{compute_gsvd, solve_tikhonov, DMatrix, DVector, TikhonovProblem};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() }
}

fn orth_residual(q: &DMatrix<f64>) -> f64 {
    (q.tr_mul(q) - DMatrix::identity(q.ncols(), q.ncols())).norm()
}

fn random_a(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
    DMatrix::from_column_slice(m, n, uniform(seed, 20, m * n).as_slice())
}

/// `I`, `L₁` or a random full-rank `p × n`.
fn random_l(n: usize, which: u8, seed: u64) -> DMatrix<f64> {
    match which {
        0 => DMatrix::identity(n, n),
        1 if n >= 2 => gen_l1(n).unwrap(),
        _ => {
            let p = 1 + (seed as usize) % n;
            DMatrix::from_column_slice(p, n, uniform(seed, 21, p * n).as_slice()) + DMatrix::identity(p, n)
        }
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gsvd_invariants(n in 1usize..=20, extra in 0usize..6, which in 0u8..3, seed in any::<u64>()) {
        let m = n + extra;
        let a = random_a(m, n, seed);
        let l = random_l(n, which, seed);
        let f = compute_gsvd(&a, &l).unwrap();
        let cs = f.sigma.component_mul(&f.sigma) + f.mu.component_mul(&f.mu);
        prop_assert!((cs - DVector::from_element(f.p(), 1.0)).amax() <= 1e-11);
        prop_assert!((f.reconstruct_a() - &a).norm() <= 1e-11 * a.norm());
        prop_assert!((f.reconstruct_l() - &l).norm() <= 1e-11 * l.norm());
        prop_assert!(orth_residual(&f.u) <= 1e-11);
        prop_assert!(orth_residual(&f.v) <= 1e-11);
        prop_assert!(orth_residual(&f.q) <= 1e-11);
        for i in 1..f.p() {
            prop_assert!(f.sigma[i] >= f.sigma[i - 1] - 1e-14);
            prop_assert!(f.mu[i] <= f.mu[i - 1] + 1e-14);
        }
    }

    #[test]
    fn identity_l_gives_singular_values(n in 1usize..=20, extra in 0usize..6, seed in any::<u64>()) {
        let a = random_a(n + extra, n, seed);
        let f = compute_gsvd(&a, &DMatrix::identity(n, n)).unwrap();
        let gamma = gen_singular_values(&f);
        let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
        sv.sort_by(|x, y| x.total_cmp(y));
        for (g, s) in gamma.iter().zip(&sv) {
            prop_assert!((g - s).abs() <= 1e-10 * s.max(1.0), "{} vs {}", g, s);
        }
    }

    #[test]
    fn p_symmetric_and_matches_dense(n in 1usize..=20, extra in 0usize..6, which in 0u8..3, seed in any::<u64>()) {
        let a = random_a(n + extra, n, seed);
        let l = random_l(n, which, seed);
        let lambda = 0.05 + (seed % 100) as f64 / 50.0;
        let f = compute_gsvd(&a, &l).unwrap();
        let y = uniform(seed, 22, n);
        let z = uniform(seed, 23, n);
        let py = f.apply_p(lambda, &y).unwrap();
        let pz = f.apply_p(lambda, &z).unwrap();
        prop_assert!((z.dot(&py) - y.dot(&pz)).abs() <= 1e-10 * py.norm() * z.norm());
        let dense = DenseP::new(&a, &l, lambda).unwrap().apply(&y);
        prop_assert!((dense - &py).norm() <= 1e-9 * py.norm());
    }

    #[test]
    fn filter_solution_matches_normal_equations(n in 1usize..=20, extra in 0usize..6, which in 0u8..3, seed in any::<u64>()) {
        let m = n + extra;
        let a = random_a(m, n, seed);
        let l = random_l(n, which, seed);
        let b = uniform(seed, 24, m);
        let lambda = 0.05 + (seed % 100) as f64 / 50.0;
        let prob = TikhonovProblem::new(a.clone(), l.clone(), b.clone(), lambda).unwrap();
        let sol = solve_tikhonov(&prob).unwrap();
        let dense = DenseP::new(&a, &l, lambda).unwrap().apply(&a.tr_mul(&b));
        prop_assert!((&sol.x_lambda - dense).norm() <= 1e-9 * sol.x_lambda.norm().max(1e-300));
        prop_assert!(normal_equations_residual(&prob, &sol.x_lambda) <= 1e-10);
        prop_assert!((&sol.r_lambda - (&b - &a * &sol.x_lambda)).norm() <= 1e-12 * b.norm());
    }
}
