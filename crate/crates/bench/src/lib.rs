//! Fixtures shared by the estimator benches.

use tikhcond_core::testproblems::{gen_example, toeplitz_rho};
use tikhcond_core::{SolvedProblem, StructuredMatrix};

/// Solved example at `lambda`, with its structure handle.
pub fn example(id: &str, lambda: f64) -> (SolvedProblem, StructuredMatrix) {
    let ex = gen_example(id).expect("known example");
    let handle = ex.handle.clone();
    (SolvedProblem::new(ex.problem(lambda).expect("valid λ")).expect("solvable"), handle)
}

/// The `ρ^|i−j|` Toeplitz problem of size `m × n` with `ρ = 0.99999`.
pub fn rho_problem(m: usize, n: usize, lambda: f64) -> (SolvedProblem, StructuredMatrix) {
    let ex = toeplitz_rho(m, n, 0.99999).expect("m ≥ n");
    let handle = ex.handle.clone();
    (SolvedProblem::new(ex.problem(lambda).expect("valid λ")).expect("solvable"), handle)
}
