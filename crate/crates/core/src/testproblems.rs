//! Generators for the example problems and the first-difference operator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TikhError};
use crate::problem::TikhonovProblem;
use crate::structmat::StructuredMatrix;

const H: f64 = 1e-3;

pub const EXAMPLE_IDS: [&str; 5] = ["toeplitz5", "hankel6", "vandermonde25x10", "cauchy10x8", "toeplitz_rho(m,n,rho)"];

#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub handle: StructuredMatrix,
    pub l: DMatrix<f64>,
    pub b: DVector<f64>,
    pub selector: DMatrix<f64>,
}

impl Example {
    fn new(id: impl Into<String>, handle: StructuredMatrix, b: Vec<f64>) -> Self {
        let n = handle.dims().1;
        Self {
            id: id.into(),
            handle,
            l: DMatrix::identity(n, n),
            b: DVector::from_vec(b),
            selector: DMatrix::identity(n, n),
        }
    }

    pub fn problem(&self, lambda: f64) -> Result<TikhonovProblem> {
        TikhonovProblem::from_handle(self.handle.clone(), self.l.clone(), self.b.clone(), lambda)?
            .with_selector(self.selector.clone())
    }
}

fn alternating(len: usize, first: f64) -> Vec<f64> {
    (0..len).map(|i| if i % 2 == 0 { first } else { -first }).collect()
}

/// `toeplitz5`, `hankel6`, `vandermonde25x10`, `cauchy10x8`, or
/// `toeplitz_rho(m,n,rho)`.
pub fn gen_example(id: &str) -> Result<Example> {
    let id = id.trim();
    match id {
        "toeplitz5" => Ok(Example::new(
            id,
            StructuredMatrix::sym_toeplitz(5, 5, &[0.0, 0.0, 1.0 + H, -1.0, 1.0])?,
            vec![0.0, H, 2.0 * (1.0 + H), H, 0.0],
        )),
        "hankel6" => Ok(Example::new(
            id,
            StructuredMatrix::hankel(6, 6, &[H, 1., 1., -1., 0., 0., 0., -1., 1., 1., 0.])?,
            vec![H, 2.0, 0.0, 0.0, 2.0, 0.0],
        )),
        "vandermonde25x10" => {
            let nodes: Vec<f64> = (1..=10).map(|j| j as f64 / 10.0).collect();
            Ok(Example::new(id, StructuredMatrix::vandermonde(25, &nodes)?, alternating(25, -1.0)))
        }
        "cauchy10x8" => {
            let u: Vec<f64> = (1..=10).map(|i| i as f64).collect();
            let v: Vec<f64> = (1..=8).map(|j| 1.0 - j as f64).collect();
            Ok(Example::new(id, StructuredMatrix::cauchy(&u, &v)?, alternating(10, 1.0)))
        }
        _ => parse_rho(id).ok_or_else(|| TikhError::UnknownExample(id.to_string()))?,
    }
}

fn parse_rho(id: &str) -> Option<Result<Example>> {
    let compact: String = id.chars().filter(|c| !c.is_whitespace()).collect();
    let args = compact
        .strip_prefix("toeplitz_rho(")
        .and_then(|s| s.strip_suffix(')'))
        .or_else(|| compact.strip_prefix("toeplitz_rho:"))?;
    let parts: Vec<&str> = args.split([',', ':']).collect();
    if parts.len() != 3 {
        return None;
    }
    let m = parts[0].parse().ok()?;
    let n = parts[1].parse().ok()?;
    let rho = parts[2].parse().ok()?;
    Some(toeplitz_rho(m, n, rho))
}

/// `a_d = ρ^d` on the diagonals `|i − j| = d`, `b = e`, `L = I`.
pub fn toeplitz_rho(m: usize, n: usize, rho: f64) -> Result<Example> {
    if m == 0 || n == 0 || n > m {
        return Err(TikhError::BadDimension(format!("toeplitz_rho needs 1 ≤ n ≤ m, got {m}×{n}")));
    }
    let k = m.max(n);
    let diag: Vec<f64> = (0..k).map(|d| rho.powi(d as i32)).collect();
    Ok(Example::new(
        format!("toeplitz_rho({m},{n},{rho})"),
        StructuredMatrix::sym_toeplitz(m, n, &diag)?,
        vec![1.0; m],
    ))
}

/// `(n − 1) × n` first-difference operator: `+1` on the diagonal, `−1` above it.
pub fn gen_l1(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(TikhError::BadDimension(format!("L1 needs n ≥ 2, got {n}")));
    }
    Ok(DMatrix::from_fn(n - 1, n, |i, j| {
        if i == j {
            1.0
        } else if j == i + 1 {
            -1.0
        } else {
            0.0
        }
    }))
}
