#![allow(dead_code)]

use tikhcond_core::random::{stream, uniform_symmetric};
use tikhcond_core::{DMatrix, DVector, SolvedProblem, StructureKind, StructuredMatrix, TikhonovProblem};

pub fn uniform(seed: u64, idx: u64, len: usize) -> DVector<f64> {
    uniform_symmetric(&mut stream(seed, idx), len)
}

/// Random handle of `kind` with parameters in (−1, 1). Vandermonde nodes
/// are spread over (0.2, 1.2) and Cauchy generators are kept apart.
pub fn random_handle(kind: StructureKind, m: usize, n: usize, seed: u64) -> StructuredMatrix {
    let jitter = uniform(seed, 1, m + n);
    match kind {
        StructureKind::Vandermonde => {
            let nodes: Vec<f64> = (0..n).map(|j| 0.2 + (j as f64 + 0.5 + 0.3 * jitter[j]) / n as f64).collect();
            StructuredMatrix::vandermonde(m, &nodes).unwrap()
        }
        StructureKind::Cauchy => {
            let u: Vec<f64> = (0..m).map(|i| 1.0 + i as f64 + 0.3 * jitter[i]).collect();
            let v: Vec<f64> = (0..n).map(|j| -(j as f64) - 0.3 * jitter[m + j].abs()).collect();
            StructuredMatrix::cauchy(&u, &v).unwrap()
        }
        _ => {
            let k = kind.param_count(m, n).unwrap();
            StructuredMatrix::new(kind, m, n, uniform(seed, 2, k)).unwrap()
        }
    }
}

/// Well-posed problem around `handle`: `L = I`, `λ ∈ [0.1, 1)`, random `b`
/// and a random `l × n` selector (identity when `l == 0`).
pub fn problem_for(handle: &StructuredMatrix, l: usize, seed: u64) -> SolvedProblem {
    let (m, n) = handle.dims();
    let b = uniform(seed, 3, m) + DVector::from_element(m, 0.1);
    let lambda = 0.1 + 0.45 * (1.0 + uniform(seed, 4, 1)[0]);
    let p = TikhonovProblem::from_handle(handle.clone(), DMatrix::identity(n, n), b, lambda).unwrap();
    let p = if l == 0 {
        p
    } else {
        let sel = DMatrix::from_column_slice(l, n, uniform(seed, 5, l * n).as_slice());
        p.with_selector(sel).unwrap()
    };
    SolvedProblem::new(p).unwrap()
}

pub fn dims(seed: u64, max_n: usize) -> (usize, usize) {
    let u = uniform(seed, 0, 2);
    let n = 2 + ((u[0] + 1.0) * 0.5 * (max_n - 1) as f64) as usize;
    let n = n.min(max_n);
    let m = n + ((u[1] + 1.0) * 3.0) as usize;
    (m, n)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
