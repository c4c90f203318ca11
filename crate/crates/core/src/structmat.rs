//! Structured matrices and their parameterizations.
//!
//! A structured matrix is described by a [`StructureKind`], its dimensions and
//! a parameter vector. Linear kinds (symmetric Toeplitz, Toeplitz, Hankel and
//! user supplied bases) are of the form `A = Σ a_i S_i`; Vandermonde and Cauchy
//! matrices are nonlinear in their generators and instead expose the derived
//! matrices `V₁` and `C₁` that describe their first-order perturbations.
//!
//! Canonical parameter orderings:
//!
//! | kind          | k         | ordering                                              |
//! |---------------|-----------|-------------------------------------------------------|
//! | `SymToeplitz` | max(m, n) | `a_d` sits on the diagonals with `|i - j| = d`          |
//! | `Toeplitz`    | m + n - 1 | first column top to bottom, then first row from col 1 |
//! | `Hankel`      | m + n - 1 | first column, then last row from col 1 (`a_{i+j}`)     |
//! | `Vandermonde` | n         | nodes; entry `(i, j) = a_j^i`, `i = 0..m`, `0⁰ = 1`     |
//! | `Cauchy`      | m + n     | `[u; v]`; entry `(i, j) = 1 / (u_i - v_j)`             |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, TikhError};

/// Relative tolerance used when recovering parameters from a dense matrix.
pub const STRUCT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    GeneralLinear,
    SymToeplitz,
    Toeplitz,
    Hankel,
    Vandermonde,
    Cauchy,
}

impl StructureKind {
    pub fn is_linear(self) -> bool {
        !matches!(self, StructureKind::Vandermonde | StructureKind::Cauchy)
    }

    /// Number of generating parameters for an `m × n` matrix. `None` for
    /// [`StructureKind::GeneralLinear`], whose count is the basis size.
    pub fn param_count(self, m: usize, n: usize) -> Option<usize> {
        match self {
            StructureKind::GeneralLinear => None,
            StructureKind::SymToeplitz => Some(m.max(n)),
            StructureKind::Toeplitz | StructureKind::Hankel => Some(m + n - 1),
            StructureKind::Vandermonde => Some(n),
            StructureKind::Cauchy => Some(m + n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::GeneralLinear => "general_linear",
            StructureKind::SymToeplitz => "sym_toeplitz",
            StructureKind::Toeplitz => "toeplitz",
            StructureKind::Hankel => "hankel",
            StructureKind::Vandermonde => "vandermonde",
            StructureKind::Cauchy => "cauchy",
        }
    }

    /// Index of the canonical basis element that owns entry `(row, col)`.
    fn pattern_index(self, m: usize, row: usize, col: usize) -> usize {
        match self {
            StructureKind::SymToeplitz => row.abs_diff(col),
            StructureKind::Toeplitz => {
                if row >= col {
                    row - col
                } else {
                    m - 1 + col - row
                }
            }
            StructureKind::Hankel => row + col,
            _ => unreachable!("no canonical pattern for {self}"),
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = TikhError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "generallinear" | "linear" => Ok(StructureKind::GeneralLinear),
            "symtoeplitz" | "symtoep" => Ok(StructureKind::SymToeplitz),
            "toeplitz" | "toep" => Ok(StructureKind::Toeplitz),
            "hankel" => Ok(StructureKind::Hankel),
            "vandermonde" | "vdm" => Ok(StructureKind::Vandermonde),
            "cauchy" => Ok(StructureKind::Cauchy),
            _ => Err(TikhError::InvalidInput(format!("unknown structure `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BasisRepr {
    /// 0/1 patterns of a canonical linear kind, never materialized.
    Canonical(StructureKind),
    Dense(Vec<DMatrix<f64>>),
}

/// Ordered basis `S_1..S_k` of a linear subspace of `m × n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBasis {
    m: usize,
    n: usize,
    len: usize,
    repr: BasisRepr,
}

impl LinearBasis {
    /// Wraps a user basis. The vectorized matrices must be linearly independent.
    pub fn new(m: usize, n: usize, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(TikhError::BadDimension("empty basis".into()));
        }
        if let Some(bad) = matrices.iter().find(|s| s.shape() != (m, n)) {
            return Err(TikhError::BadDimension(format!(
                "basis matrix is {:?}, expected ({m}, {n})",
                bad.shape()
            )));
        }
        let k = matrices.len();
        if k > m * n {
            return Err(TikhError::RankDeficient(format!(
                "{k} basis matrices in a space of dimension {}",
                m * n
            )));
        }
        let stacked = DMatrix::from_fn(m * n, k, |r, c| matrices[c].as_slice()[r]);
        let sv = stacked.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|s| **s > 1e-10 * smax).count();
        if smax == 0.0 || rank < k {
            return Err(TikhError::RankDeficient(format!(
                "basis has numerical rank {rank} < {k}"
            )));
        }
        Ok(Self {
            m,
            n,
            len: k,
            repr: BasisRepr::Dense(matrices),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// `true` for the implicit Toeplitz/Hankel/symmetric Toeplitz patterns.
    pub fn is_canonical(&self) -> bool {
        matches!(self.repr, BasisRepr::Canonical(_))
    }

    /// Dense copy of `S_i`.
    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        match &self.repr {
            BasisRepr::Dense(ms) => ms[i].clone(),
            BasisRepr::Canonical(kind) => DMatrix::from_fn(self.m, self.n, |r, c| {
                if kind.pattern_index(self.m, r, c) == i {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }

    /// `Σ coeffs_i S_i`.
    pub fn combine(&self, coeffs: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(coeffs.len(), self.len, "coefficient count");
        match &self.repr {
            BasisRepr::Canonical(kind) => DMatrix::from_fn(self.m, self.n, |r, c| {
                coeffs[kind.pattern_index(self.m, r, c)]
            }),
            BasisRepr::Dense(ms) => {
                let mut out = DMatrix::zeros(self.m, self.n);
                for (s, &a) in ms.iter().zip(coeffs.iter()) {
                    if a != 0.0 {
                        out += s * a;
                    }
                }
                out
            }
        }
    }

    /// Trace inner products `⟨S_i, K⟩ = trace(S_iᵀ K)` for every basis element.
    pub fn project(&self, k: &DMatrix<f64>) -> DVector<f64> {
        assert_eq!(k.shape(), (self.m, self.n));
        match &self.repr {
            BasisRepr::Canonical(kind) => {
                let mut out = DVector::zeros(self.len);
                for c in 0..self.n {
                    for r in 0..self.m {
                        out[kind.pattern_index(self.m, r, c)] += k[(r, c)];
                    }
                }
                out
            }
            BasisRepr::Dense(ms) => DVector::from_iterator(self.len, ms.iter().map(|s| s.dot(k))),
        }
    }

    /// Columns `S_i x`, as an `m × k` matrix.
    pub fn apply_all(&self, x: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(x.len(), self.n);
        match &self.repr {
            BasisRepr::Canonical(kind) => {
                let mut out = DMatrix::zeros(self.m, self.len);
                for c in 0..self.n {
                    for r in 0..self.m {
                        out[(r, kind.pattern_index(self.m, r, c))] += x[c];
                    }
                }
                out
            }
            BasisRepr::Dense(ms) => {
                let mut out = DMatrix::zeros(self.m, self.len);
                for (i, s) in ms.iter().enumerate() {
                    out.set_column(i, &(s * x));
                }
                out
            }
        }
    }

    /// Columns `S_iᵀ r`, as an `n × k` matrix.
    pub fn apply_transpose_all(&self, r: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(r.len(), self.m);
        match &self.repr {
            BasisRepr::Canonical(kind) => {
                let mut out = DMatrix::zeros(self.n, self.len);
                for c in 0..self.n {
                    for row in 0..self.m {
                        out[(c, kind.pattern_index(self.m, row, c))] += r[row];
                    }
                }
                out
            }
            BasisRepr::Dense(ms) => {
                let mut out = DMatrix::zeros(self.n, self.len);
                for (i, s) in ms.iter().enumerate() {
                    out.set_column(i, &s.tr_mul(r));
                }
                out
            }
        }
    }

    pub fn frobenius_norm(&self, i: usize) -> f64 {
        match &self.repr {
            BasisRepr::Dense(ms) => ms[i].norm(),
            BasisRepr::Canonical(_) => self.matrix(i).norm(),
        }
    }

    /// Least-squares coordinates of `a` in this basis together with the
    /// relative residual `‖Σ c_i S_i − a‖_F / ‖a‖_F`.
    pub fn coordinates(&self, a: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
        if a.shape() != (self.m, self.n) {
            return Err(TikhError::BadDimension(format!(
                "matrix is {:?}, basis is ({}, {})",
                a.shape(),
                self.m,
                self.n
            )));
        }
        let coeffs = match &self.repr {
            BasisRepr::Canonical(kind) => {
                let sums = self.project(a);
                let mut counts = DVector::<f64>::zeros(self.len);
                for c in 0..self.n {
                    for r in 0..self.m {
                        counts[kind.pattern_index(self.m, r, c)] += 1.0;
                    }
                }
                sums.component_div(&counts)
            }
            BasisRepr::Dense(ms) => {
                let k = ms.len();
                let stacked = DMatrix::from_fn(self.m * self.n, k, |r, c| ms[c].as_slice()[r]);
                let rhs = DVector::from_column_slice(a.as_slice());
                stacked
                    .svd(true, true)
                    .solve(&rhs, 1e-14)
                    .map_err(|e| TikhError::InvalidInput(e.to_string()))?
            }
        };
        let recon = self.combine(&coeffs);
        let denom = a.norm().max(f64::MIN_POSITIVE);
        Ok((coeffs, (recon - a).norm() / denom))
    }
}

/// Canonical basis of a linear structure, ordered as in the module table.
pub fn canonical_basis(kind: StructureKind, m: usize, n: usize) -> Result<LinearBasis> {
    match kind {
        StructureKind::Vandermonde | StructureKind::Cauchy => {
            Err(TikhError::UnsupportedForNonlinear(kind.to_string()))
        }
        StructureKind::GeneralLinear => Err(TikhError::InvalidInput(
            "general linear structures carry their own basis".into(),
        )),
        _ => {
            if m == 0 || n == 0 {
                return Err(TikhError::BadDimension(format!("{m} × {n}")));
            }
            Ok(LinearBasis {
                m,
                n,
                len: kind.param_count(m, n).expect("canonical kinds have a count"),
                repr: BasisRepr::Canonical(kind),
            })
        }
    }
}

/// A structure kind, its dimensions and generating parameters.
///
/// Values are immutable once built; every constructor validates its input so
/// [`StructuredMatrix::materialize`] cannot fail.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    kind: StructureKind,
    m: usize,
    n: usize,
    params: DVector<f64>,
    basis: Option<LinearBasis>,
}

impl StructuredMatrix {
    /// Canonical linear kinds and Vandermonde/Cauchy from a flat parameter
    /// vector (Cauchy as `[u; v]`).
    pub fn new(kind: StructureKind, m: usize, n: usize, params: DVector<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(TikhError::BadDimension(format!("{m} × {n}")));
        }
        let want = kind.param_count(m, n).ok_or_else(|| {
            TikhError::InvalidInput("general linear structures need a basis".into())
        })?;
        if params.len() != want {
            return Err(TikhError::BadDimension(format!(
                "{kind} {m}×{n} needs {want} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(TikhError::InvalidInput("non-finite parameter".into()));
        }
        let basis = if kind.is_linear() {
            Some(canonical_basis(kind, m, n)?)
        } else {
            None
        };
        if kind == StructureKind::Cauchy {
            check_cauchy_separation(&params.rows(0, m).into_owned(), &params.rows(m, n).into_owned())?;
        }
        Ok(Self {
            kind,
            m,
            n,
            params,
            basis,
        })
    }

    pub fn sym_toeplitz(m: usize, n: usize, diagonals: &[f64]) -> Result<Self> {
        Self::new(StructureKind::SymToeplitz, m, n, DVector::from_column_slice(diagonals))
    }

    pub fn toeplitz(m: usize, n: usize, params: &[f64]) -> Result<Self> {
        Self::new(StructureKind::Toeplitz, m, n, DVector::from_column_slice(params))
    }

    pub fn hankel(m: usize, n: usize, params: &[f64]) -> Result<Self> {
        Self::new(StructureKind::Hankel, m, n, DVector::from_column_slice(params))
    }

    pub fn vandermonde(m: usize, nodes: &[f64]) -> Result<Self> {
        Self::new(
            StructureKind::Vandermonde,
            m,
            nodes.len(),
            DVector::from_column_slice(nodes),
        )
    }

    pub fn cauchy(u: &[f64], v: &[f64]) -> Result<Self> {
        let params = DVector::from_iterator(u.len() + v.len(), u.iter().chain(v).copied());
        Self::new(StructureKind::Cauchy, u.len(), v.len(), params)
    }

    /// A general linear structure `Σ a_i S_i` with a user basis.
    pub fn general_linear(basis: LinearBasis, params: DVector<f64>) -> Result<Self> {
        if params.len() != basis.len() {
            return Err(TikhError::BadDimension(format!(
                "{} coefficients for a basis of {}",
                params.len(),
                basis.len()
            )));
        }
        let (m, n) = basis.dims();
        Ok(Self {
            kind: StructureKind::GeneralLinear,
            m,
            n,
            params,
            basis: Some(basis),
        })
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn params(&self) -> &DVector<f64> {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Basis of a linear kind; `None` for Vandermonde and Cauchy.
    pub fn basis(&self) -> Option<&LinearBasis> {
        self.basis.as_ref()
    }

    /// Cauchy generators `(u, v)`.
    pub fn cauchy_generators(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        (self.kind == StructureKind::Cauchy).then(|| {
            (
                self.params.rows(0, self.m).into_owned(),
                self.params.rows(self.m, self.n).into_owned(),
            )
        })
    }

    /// The dense matrix `g(params)`.
    pub fn materialize(&self) -> DMatrix<f64> {
        match self.kind {
            StructureKind::Vandermonde => {
                DMatrix::from_fn(self.m, self.n, |i, j| self.params[j].powi(i as i32))
            }
            StructureKind::Cauchy => {
                let (u, v) = self.cauchy_generators().expect("cauchy");
                DMatrix::from_fn(self.m, self.n, |i, j| 1.0 / (u[i] - v[j]))
            }
            _ => self.basis.as_ref().expect("linear kinds carry a basis").combine(&self.params),
        }
    }

    /// Matrix direction `dA` induced by a parameter direction `e` to first
    /// order: `Σ e_i S_i`, `V₁ Diag(e)` or `C₁ Diag(e_v) − Diag(e_u) C₁`.
    pub fn first_order_direction(&self, e: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(e.len(), self.param_count(), "direction length");
        match self.kind {
            StructureKind::Vandermonde => {
                let mut v1 = vdm_derived_v1(&self.materialize());
                for (j, mut col) in v1.column_iter_mut().enumerate() {
                    col *= e[j];
                }
                v1
            }
            StructureKind::Cauchy => {
                let (u, v) = self.cauchy_generators().expect("cauchy");
                let c1 = cauchy_derived_c1(&u, &v).expect("validated at construction");
                DMatrix::from_fn(self.m, self.n, |i, j| {
                    (e[self.m + j] - e[i]) * c1[(i, j)]
                })
            }
            _ => self.basis.as_ref().expect("linear").combine(e),
        }
    }

    /// Same structure with parameters `params + delta`.
    pub fn perturbed(&self, delta: &ParamPerturbation) -> Result<Self> {
        if delta.delta.len() != self.param_count() {
            return Err(TikhError::BadDimension(format!(
                "perturbation has {} entries, structure has {} parameters",
                delta.delta.len(),
                self.param_count()
            )));
        }
        let params = &self.params + &delta.delta;
        match &self.basis {
            Some(basis) if self.kind == StructureKind::GeneralLinear => {
                Self::general_linear(basis.clone(), params)
            }
            _ => Self::new(self.kind, self.m, self.n, params),
        }
    }
}

/// A perturbation of a structure's parameter vector (Cauchy as `[Δu; Δv]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPerturbation {
    pub delta: DVector<f64>,
}

impl ParamPerturbation {
    pub fn new(delta: DVector<f64>) -> Self {
        Self { delta }
    }
}

fn check_cauchy_separation(u: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
    let scale = 1.0 + u.amax().max(v.amax());
    let mut min_gap = f64::INFINITY;
    for &ui in u.iter() {
        for &vj in v.iter() {
            min_gap = min_gap.min((ui - vj).abs());
        }
    }
    if min_gap <= 1e-12 * scale {
        return Err(TikhError::DegenerateStructure(format!(
            "min |u_i - v_j| = {min_gap:.3e} is below the separation threshold"
        )));
    }
    Ok(())
}

/// Recovers the canonical parameters of `a`, failing with
/// [`TikhError::NotInClass`] when the relative residual exceeds [`STRUCT_TOL`].
pub fn params_from_dense(kind: StructureKind, a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(TikhError::BadDimension(format!("{m} × {n}")));
    }
    match kind {
        StructureKind::GeneralLinear => Err(TikhError::InvalidInput(
            "general linear structures need a basis; use LinearBasis::coordinates".into(),
        )),
        StructureKind::Cauchy => Err(TikhError::UnsupportedForNonlinear(
            "Cauchy generators are only defined up to a common shift".into(),
        )),
        StructureKind::Vandermonde => {
            if m < 2 {
                return Err(TikhError::BadDimension(
                    "a single-row Vandermonde matrix does not determine its nodes".into(),
                ));
            }
            let nodes = a.row(1).transpose();
            let handle = StructuredMatrix::new(kind, m, n, nodes.clone())?;
            check_residual(&handle.materialize(), a)?;
            Ok(nodes)
        }
        _ => {
            let basis = canonical_basis(kind, m, n)?;
            let (coeffs, residual) = basis.coordinates(a)?;
            if residual > STRUCT_TOL {
                return Err(TikhError::NotInClass { residual });
            }
            Ok(coeffs)
        }
    }
}

fn check_residual(recon: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<()> {
    let residual = (recon - a).norm() / a.norm().max(f64::MIN_POSITIVE);
    if residual > STRUCT_TOL {
        Err(TikhError::NotInClass { residual })
    } else {
        Ok(())
    }
}

/// `V₁ = Diag(0, 1, …, m−1) [0; V(0..m−1, :)]`, the entrywise derivative of a
/// Vandermonde matrix with respect to its nodes.
pub fn vdm_derived_v1(v: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = v.shape();
    DMatrix::from_fn(m, n, |i, j| if i == 0 { 0.0 } else { i as f64 * v[(i - 1, j)] })
}

/// `C₁ = [1 / (u_i − v_j)²]`.
pub fn cauchy_derived_c1(u: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_cauchy_separation(u, v)?;
    Ok(DMatrix::from_fn(u.len(), v.len(), |i, j| {
        let d = u[i] - v[j];
        1.0 / (d * d)
    }))
}

// ---------------------------------------------------------------------------
// JSON encoding: {kind, m, n, params} or, for Cauchy, {kind, m, n, u, v}.

#[derive(Serialize, Deserialize)]
struct HandleWire {
    kind: StructureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Vec<f64>>,
    /// General linear only: basis matrices as lists of rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    basis: Option<Vec<Vec<Vec<f64>>>>,
}

impl Serialize for StructuredMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut wire = HandleWire {
            kind: self.kind,
            m: Some(self.m),
            n: Some(self.n),
            params: None,
            u: None,
            v: None,
            basis: None,
        };
        match self.kind {
            StructureKind::Cauchy => {
                let (u, v) = self.cauchy_generators().expect("cauchy");
                wire.u = Some(u.iter().copied().collect());
                wire.v = Some(v.iter().copied().collect());
            }
            StructureKind::GeneralLinear => {
                wire.params = Some(self.params.iter().copied().collect());
                let basis = self.basis.as_ref().expect("linear");
                wire.basis = Some(
                    (0..basis.len())
                        .map(|i| {
                            let s = basis.matrix(i);
                            s.row_iter().map(|r| r.iter().copied().collect()).collect()
                        })
                        .collect(),
                );
            }
            _ => wire.params = Some(self.params.iter().copied().collect()),
        }
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StructuredMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let wire = HandleWire::deserialize(deserializer)?;
        let built = match wire.kind {
            StructureKind::Cauchy => {
                let u = wire.u.ok_or_else(|| D::Error::missing_field("u"))?;
                let v = wire.v.ok_or_else(|| D::Error::missing_field("v"))?;
                StructuredMatrix::cauchy(&u, &v)
            }
            StructureKind::GeneralLinear => {
                let rows = wire.basis.ok_or_else(|| D::Error::missing_field("basis"))?;
                let params = wire.params.ok_or_else(|| D::Error::missing_field("params"))?;
                let mats = rows
                    .iter()
                    .map(|mat| dense_from_rows(mat))
                    .collect::<Result<Vec<_>>>()
                    .map_err(D::Error::custom)?;
                let (m, n) = mats.first().map(|s| s.shape()).unwrap_or((0, 0));
                LinearBasis::new(m, n, mats)
                    .and_then(|b| StructuredMatrix::general_linear(b, DVector::from_vec(params)))
            }
            StructureKind::Vandermonde => {
                let params = wire.params.ok_or_else(|| D::Error::missing_field("params"))?;
                let m = wire.m.ok_or_else(|| D::Error::missing_field("m"))?;
                StructuredMatrix::vandermonde(m, &params)
            }
            kind => {
                let params = wire.params.ok_or_else(|| D::Error::missing_field("params"))?;
                let m = wire.m.ok_or_else(|| D::Error::missing_field("m"))?;
                let n = wire.n.ok_or_else(|| D::Error::missing_field("n"))?;
                StructuredMatrix::new(kind, m, n, DVector::from_vec(params))
            }
        };
        built.map_err(D::Error::custom)
    }
}

/// Dense matrix from a list of equally long rows.
pub fn dense_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(TikhError::BadDimension("ragged or empty matrix rows".into()));
    }
    Ok(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex1_params() -> Vec<f64> {
        vec![0.0, 0.0, 1.001, -1.0, 1.0]
    }

    #[test]
    fn sym_toeplitz_example_matrix() {
        let a = StructuredMatrix::sym_toeplitz(5, 5, &ex1_params()).unwrap().materialize();
        let expected = DMatrix::from_row_slice(
            5,
            5,
            &[
                0.0, 0.0, 1.001, -1.0, 1.0, //
                0.0, 0.0, 0.0, 1.001, -1.0, //
                1.001, 0.0, 0.0, 0.0, 1.001, //
                -1.0, 1.001, 0.0, 0.0, 0.0, //
                1.0, -1.0, 1.001, 0.0, 0.0,
            ],
        );
        assert_eq!(a, expected);
    }

    #[test]
    fn sym_toeplitz_first_unit_vector_is_identity() {
        let a = StructuredMatrix::sym_toeplitz(5, 5, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(a.materialize(), DMatrix::identity(5, 5));
    }

    #[test]
    fn cauchy_hilbert() {
        let u: Vec<f64> = (1..=10).map(f64::from).collect();
        let v: Vec<f64> = (1..=8).map(|j| 1.0 - f64::from(j)).collect();
        let c = StructuredMatrix::cauchy(&u, &v).unwrap().materialize();
        for i in 0..10 {
            for j in 0..8 {
                assert_eq!(c[(i, j)], 1.0 / (i + j + 1) as f64);
            }
        }
    }

    #[test]
    fn cauchy_rejects_coincident_nodes() {
        let err = StructuredMatrix::cauchy(&[1.0, 2.0], &[2.0]).unwrap_err();
        assert!(matches!(err, TikhError::DegenerateStructure(_)));
        let err = cauchy_derived_c1(&DVector::from_vec(vec![0.5]), &DVector::from_vec(vec![0.5]));
        assert!(err.is_err());
    }

    #[test]
    fn canonical_sym_toeplitz_basis_pattern() {
        let basis = canonical_basis(StructureKind::SymToeplitz, 5, 5).unwrap();
        assert_eq!(basis.len(), 5);
        let z3 = basis.matrix(2);
        for r in 0..5usize {
            for c in 0..5 {
                let want = if r.abs_diff(c) == 2 { 1.0 } else { 0.0 };
                assert_eq!(z3[(r, c)], want);
            }
        }
    }

    #[test]
    fn hankel_basis_matches_example_enumeration() {
        let basis = canonical_basis(StructureKind::Hankel, 6, 6).unwrap();
        assert_eq!(basis.len(), 11);
        // Y1 = g([e1; 0]) touches only the top-left corner.
        let y1 = basis.matrix(0);
        assert_eq!(y1.sum(), 1.0);
        assert_eq!(y1[(0, 0)], 1.0);
        // Y6 = g([e6; e1]) is the anti-diagonal through the bottom-left corner.
        let y6 = basis.matrix(5);
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(y6[(r, c)], if r + c == 5 { 1.0 } else { 0.0 });
            }
        }
        // Y11 = g([0; e6]) is the bottom-right corner.
        let y11 = basis.matrix(10);
        assert_eq!(y11.sum(), 1.0);
        assert_eq!(y11[(5, 5)], 1.0);
    }

    #[test]
    fn toeplitz_all_ones() {
        let basis = canonical_basis(StructureKind::Toeplitz, 2, 2).unwrap();
        assert_eq!(basis.len(), 3);
        let a = basis.combine(&DVector::from_element(3, 1.0));
        assert_eq!(a, DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn toeplitz_ordering_first_column_then_first_row() {
        // params [c0, c1, c2, r1, r2]
        let t = StructuredMatrix::toeplitz(3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().materialize();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 4.0, 5.0, 2.0, 1.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(t, expected);
    }

    #[test]
    fn nonlinear_kinds_have_no_canonical_basis() {
        assert!(matches!(
            canonical_basis(StructureKind::Vandermonde, 3, 2),
            Err(TikhError::UnsupportedForNonlinear(_))
        ));
        assert!(matches!(
            canonical_basis(StructureKind::Cauchy, 3, 2),
            Err(TikhError::UnsupportedForNonlinear(_))
        ));
    }

    #[test]
    fn params_from_identity_and_hankel_example() {
        let a = params_from_dense(StructureKind::SymToeplitz, &DMatrix::identity(5, 5)).unwrap();
        assert_eq!(a.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0]);

        let h = 1e-3;
        let hankel = DMatrix::from_row_slice(
            6,
            6,
            &[
                h, 1., 1., -1., 0., 0., //
                1., 1., -1., 0., 0., 0., //
                1., -1., 0., 0., 0., -1., //
                -1., 0., 0., 0., -1., 1., //
                0., 0., 0., -1., 1., 1., //
                0., 0., -1., 1., 1., 0.,
            ],
        );
        let p = params_from_dense(StructureKind::Hankel, &hankel).unwrap();
        assert_eq!(p.as_slice(), &[h, 1., 1., -1., 0., 0., 0., -1., 1., 1., 0.]);
    }

    #[test]
    fn params_from_dense_rejects_non_members() {
        let mut a = DMatrix::identity(4, 4);
        a[(0, 1)] = 1.0;
        assert!(matches!(
            params_from_dense(StructureKind::SymToeplitz, &a),
            Err(TikhError::NotInClass { .. })
        ));
    }

    #[test]
    fn vandermonde_v1_hand_derivative() {
        let v = StructuredMatrix::vandermonde(3, &[2.0]).unwrap().materialize();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 4.0]);
        let v1 = vdm_derived_v1(&v);
        assert_eq!(v1.as_slice(), &[0.0, 1.0, 4.0]);

        let single = StructuredMatrix::vandermonde(1, &[3.0, -2.0]).unwrap().materialize();
        assert_eq!(vdm_derived_v1(&single), DMatrix::zeros(1, 2));
    }

    #[test]
    fn vandermonde_zero_node_has_unit_first_row() {
        let v = StructuredMatrix::vandermonde(3, &[0.0, 1.5]).unwrap().materialize();
        assert_eq!(v[(0, 0)], 1.0);
        assert_eq!(v[(1, 0)], 0.0);
    }

    #[test]
    fn cauchy_c1_scalar() {
        let c1 = cauchy_derived_c1(&DVector::from_vec(vec![2.0]), &DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(c1[(0, 0)], 1.0);
    }

    #[test]
    fn cauchy_c1_for_hilbert_parameters() {
        let u = DVector::from_fn(10, |i, _| (i + 1) as f64);
        let v = DVector::from_fn(8, |j, _| -(j as f64));
        let c1 = cauchy_derived_c1(&u, &v).unwrap();
        for i in 0..10 {
            for j in 0..8 {
                let d = (i + j + 1) as f64;
                assert_eq!(c1[(i, j)], 1.0 / (d * d));
            }
        }
    }

    #[test]
    fn general_linear_basis_rejects_dependence() {
        let s = DMatrix::identity(2, 2);
        let err = LinearBasis::new(2, 2, vec![s.clone(), s * 2.0]).unwrap_err();
        assert!(matches!(err, TikhError::RankDeficient(_)));
    }

    #[test]
    fn json_roundtrip_and_shape() {
        let h = StructuredMatrix::cauchy(&[1.0, 2.0], &[0.0]).unwrap();
        let js = serde_json::to_value(&h).unwrap();
        assert_eq!(js["kind"], "cauchy");
        assert_eq!(js["u"], serde_json::json!([1.0, 2.0]));
        let back: StructuredMatrix = serde_json::from_value(js).unwrap();
        assert_eq!(back, h);

        let t: StructuredMatrix =
            serde_json::from_str(r#"{"kind":"sym_toeplitz","m":3,"n":3,"params":[1,2,3]}"#).unwrap();
        assert_eq!(t.materialize()[(0, 2)], 3.0);

        let bad = serde_json::from_str::<StructuredMatrix>(r#"{"kind":"cauchy","u":[1],"v":[1]}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn parse_kind_aliases() {
        assert_eq!("symtoeplitz".parse::<StructureKind>().unwrap(), StructureKind::SymToeplitz);
        assert_eq!("sym_toeplitz".parse::<StructureKind>().unwrap(), StructureKind::SymToeplitz);
        assert!("circulant".parse::<StructureKind>().is_err());
    }
}
