//! Tikhonov problems, their solution, and a solved-problem context shared by
//! the exact and estimated condition number routines.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TikhError};
use crate::gsvd::{compute_gsvd, GsvdFactors};
use crate::structmat::StructuredMatrix;

pub const SOLVE_TOL: f64 = 1e-10;

/// The data `(A, L, b, λ, M)` of `min ‖Ax − b‖² + λ²‖Lx‖²` together with the
/// selector `M` whose image `M x_λ` is the quantity being conditioned.
#[derive(Debug, Clone)]
pub struct TikhonovProblem {
    a: DMatrix<f64>,
    handle: Option<StructuredMatrix>,
    l: DMatrix<f64>,
    b: DVector<f64>,
    lambda: f64,
    selector: DMatrix<f64>,
}

impl TikhonovProblem {
    pub fn new(a: DMatrix<f64>, l: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> Result<Self> {
        let (m, n) = a.shape();
        if b.len() != m {
            return Err(TikhError::BadDimension(format!("b has {} entries, A has {m} rows", b.len())));
        }
        if l.ncols() != n {
            return Err(TikhError::BadDimension(format!("L has {} columns, A has {n}", l.ncols())));
        }
        if l.nrows() == 0 || l.nrows() > n || n > m {
            return Err(TikhError::BadDimension(format!(
                "need p ≤ n ≤ m, got p={}, n={n}, m={m}",
                l.nrows()
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(TikhError::InvalidInput(format!("λ must be positive, got {lambda}")));
        }
        if a.iter().chain(b.iter()).chain(l.iter()).any(|v| !v.is_finite()) {
            return Err(TikhError::InvalidInput("non-finite entry in A, L or b".into()));
        }
        Ok(Self {
            selector: DMatrix::identity(n, n),
            a,
            handle: None,
            l,
            b,
            lambda,
        })
    }

    /// A problem whose coefficient matrix is `materialize(handle)`.
    pub fn from_handle(
        handle: StructuredMatrix,
        l: DMatrix<f64>,
        b: DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let mut p = Self::new(handle.materialize(), l, b, lambda)?;
        p.handle = Some(handle);
        Ok(p)
    }

    /// Replaces the default selector `M = I_n`.
    pub fn with_selector(mut self, selector: DMatrix<f64>) -> Result<Self> {
        if selector.ncols() != self.n() || selector.nrows() == 0 {
            return Err(TikhError::BadDimension(format!(
                "M is {:?}, needs {} columns",
                selector.shape(),
                self.n()
            )));
        }
        self.selector = selector;
        Ok(self)
    }

    /// `M = e_iᵀ` (zero-based `i`).
    pub fn with_row_selector(self, i: usize) -> Result<Self> {
        let n = self.n();
        if i >= n {
            return Err(TikhError::BadDimension(format!("row {i} out of range for n={n}")));
        }
        self.with_selector(DMatrix::from_fn(1, n, |_, j| if j == i { 1.0 } else { 0.0 }))
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(TikhError::InvalidInput(format!("λ must be positive, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn selector(&self) -> &DMatrix<f64> {
        &self.selector
    }
    pub fn handle(&self) -> Option<&StructuredMatrix> {
        self.handle.as_ref()
    }
    pub fn m(&self) -> usize {
        self.a.nrows()
    }
    pub fn n(&self) -> usize {
        self.a.ncols()
    }
    pub fn p(&self) -> usize {
        self.l.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegSolution {
    pub x_lambda: DVector<f64>,
    pub r_lambda: DVector<f64>,
    pub filters: DVector<f64>,
}

/// `‖(AᵀA + λ²LᵀL)x − Aᵀb‖ / ‖Aᵀb‖`.
pub fn normal_equations_residual(problem: &TikhonovProblem, x: &DVector<f64>) -> f64 {
    let (a, l) = (problem.a(), problem.l());
    let atb = a.tr_mul(problem.b());
    let lhs = a.tr_mul(&(a * x)) + l.tr_mul(&(l * x)) * problem.lambda().powi(2);
    (lhs - &atb).norm() / atb.norm().max(f64::MIN_POSITIVE)
}

fn solve_with(problem: &TikhonovProblem, factors: &GsvdFactors) -> Result<RegSolution> {
    let x = factors.filtered_solution(problem.lambda(), problem.b())?;
    let r = problem.b() - problem.a() * &x;
    Ok(RegSolution {
        filters: factors.filter_factors(problem.lambda()),
        x_lambda: x,
        r_lambda: r,
    })
}

pub fn solve_tikhonov(problem: &TikhonovProblem) -> Result<RegSolution> {
    let factors = compute_gsvd(problem.a(), problem.l())?;
    solve_with(problem, &factors)
}

/// A problem with its GSVD and solution, plus a counter of `P` applications.
#[derive(Debug)]
pub struct SolvedProblem {
    problem: TikhonovProblem,
    factors: GsvdFactors,
    solution: RegSolution,
    shift_inv: DVector<f64>,
    p_applications: AtomicUsize,
}

impl Clone for SolvedProblem {
    fn clone(&self) -> Self {
        Self {
            problem: self.problem.clone(),
            factors: self.factors.clone(),
            solution: self.solution.clone(),
            shift_inv: self.shift_inv.clone(),
            p_applications: AtomicUsize::new(self.p_applications()),
        }
    }
}

impl SolvedProblem {
    pub fn new(problem: TikhonovProblem) -> Result<Self> {
        let factors = compute_gsvd(problem.a(), problem.l())?;
        let solution = solve_with(&problem, &factors)?;
        let l2 = problem.lambda().powi(2);
        let mut shift_inv = DVector::from_element(problem.n(), 1.0);
        for i in 0..factors.p() {
            shift_inv[i] = 1.0 / (factors.sigma[i].powi(2) + l2 * factors.mu[i].powi(2));
        }
        Ok(Self {
            problem,
            factors,
            solution,
            shift_inv,
            p_applications: AtomicUsize::new(0),
        })
    }

    pub fn problem(&self) -> &TikhonovProblem {
        &self.problem
    }
    pub fn factors(&self) -> &GsvdFactors {
        &self.factors
    }
    pub fn solution(&self) -> &RegSolution {
        &self.solution
    }
    pub fn x(&self) -> &DVector<f64> {
        &self.solution.x_lambda
    }
    pub fn r(&self) -> &DVector<f64> {
        &self.solution.r_lambda
    }
    pub fn a(&self) -> &DMatrix<f64> {
        self.problem.a()
    }
    pub fn b(&self) -> &DVector<f64> {
        self.problem.b()
    }
    pub fn selector(&self) -> &DMatrix<f64> {
        self.problem.selector()
    }
    pub fn lambda(&self) -> f64 {
        self.problem.lambda()
    }
    /// Rows of the selector.
    pub fn l_rows(&self) -> usize {
        self.problem.selector().nrows()
    }

    /// `M x_λ`.
    pub fn mx(&self) -> DVector<f64> {
        self.selector() * self.x()
    }

    /// `P(A, λ) y`; counted.
    pub fn apply_p(&self, y: &DVector<f64>) -> DVector<f64> {
        self.p_applications.fetch_add(1, Ordering::Relaxed);
        self.factors.apply_p_with(&self.shift_inv, y)
    }

    pub fn p_applications(&self) -> usize {
        self.p_applications.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.p_applications.store(0, Ordering::Relaxed);
    }

    /// `G = M P` (l × n), from `P Mᵀ` column by column since `P` is symmetric.
    pub fn g_matrix(&self) -> DMatrix<f64> {
        let sel = self.selector();
        let mut g = DMatrix::zeros(sel.nrows(), sel.ncols());
        for (i, row) in sel.row_iter().enumerate() {
            let col = self.apply_p(&row.transpose());
            g.set_row(i, &col.transpose());
        }
        g
    }

    /// `D = M P Aᵀ` (l × m).
    pub fn d_matrix(&self) -> DMatrix<f64> {
        self.g_matrix() * self.a().transpose()
    }

    /// Solution of the problem with `A`, `b` replaced and `L`, `λ` kept.
    pub fn resolve(&self, a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
        let p = TikhonovProblem::new(a, self.problem.l().clone(), b, self.lambda())?;
        solve_tikhonov(&p)
            .map(|s| s.x_lambda)
            .map_err(|e| match e {
                TikhError::RankDeficient(msg) => TikhError::PerturbedRankDeficient(msg),
                other => other,
            })
    }
}
