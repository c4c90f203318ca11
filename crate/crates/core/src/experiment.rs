//! Perturbation experiments: perturb the data at relative size `ε`, re-solve,
//! and compare the observed errors with first-order bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cond::{componentwise_ratio, cond_exact};
use crate::error::{Result, TikhError};
use crate::frechet::operator_for;
use crate::power::{estimate_all, PowerOpts};
use crate::problem::{SolvedProblem, TikhonovProblem};
use crate::random;
use crate::sce::{sce_estimate, SceOpts};
use crate::structmat::{dense_from_rows, ParamPerturbation, StructuredMatrix};
use crate::testproblems::{gen_example, gen_l1};

/// Stream index for perturbation draws, clear of the estimator streams.
const PERTURB_STREAM: u64 = 1 << 40;

/// `L` as `"identity"`, `"l1"`, or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl LSpec {
    pub fn build(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            LSpec::Named(s) => match s.to_ascii_lowercase().as_str() {
                "identity" | "i" => Ok(DMatrix::identity(n, n)),
                "l1" => gen_l1(n),
                other => Err(TikhError::InvalidInput(format!("unknown L `{other}`"))),
            },
            LSpec::Rows(rows) => dense_from_rows(rows),
        }
    }
}

/// `M` as `"identity"`, `"row:<i>"` (zero-based), or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SelectorSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

impl SelectorSpec {
    pub fn build(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            SelectorSpec::Named(s) => parse_selector(s, n),
            SelectorSpec::Rows(rows) => dense_from_rows(rows),
        }
    }
}

pub fn parse_selector(s: &str, n: usize) -> Result<DMatrix<f64>> {
    let s = s.trim().to_ascii_lowercase();
    if s == "identity" || s == "i" {
        return Ok(DMatrix::identity(n, n));
    }
    if let Some(idx) = s.strip_prefix("row:") {
        let i: usize = idx
            .parse()
            .map_err(|_| TikhError::InvalidInput(format!("bad row index `{idx}`")))?;
        if i >= n {
            return Err(TikhError::BadDimension(format!("row {i} out of range for n={n}")));
        }
        return Ok(DMatrix::from_fn(1, n, |_, j| if j == i { 1.0 } else { 0.0 }));
    }
    Err(TikhError::InvalidInput(format!("unknown selector `{s}`")))
}

/// A problem file: the structured-matrix JSON plus `b`, optional `L`, `M`
/// and `lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(flatten)]
    pub handle: StructuredMatrix,
    pub b: Vec<f64>,
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<LSpec>,
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<SelectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Id(String),
    Inline(ProblemFile),
}

/// Data, `L` and `M` before `λ` is fixed.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub handle: StructuredMatrix,
    pub l: DMatrix<f64>,
    pub b: DVector<f64>,
    pub selector: DMatrix<f64>,
    pub lambda: Option<f64>,
}

impl ProblemData {
    pub fn problem(&self, lambda: f64) -> Result<TikhonovProblem> {
        TikhonovProblem::from_handle(self.handle.clone(), self.l.clone(), self.b.clone(), lambda)?
            .with_selector(self.selector.clone())
    }
}

impl ProblemSource {
    pub fn load(&self) -> Result<ProblemData> {
        match self {
            ProblemSource::Id(id) => {
                let ex = gen_example(id)?;
                Ok(ProblemData {
                    handle: ex.handle,
                    l: ex.l,
                    b: ex.b,
                    selector: ex.selector,
                    lambda: None,
                })
            }
            ProblemSource::Inline(f) => f.load(),
        }
    }
}

impl ProblemFile {
    pub fn load(&self) -> Result<ProblemData> {
        let n = self.handle.dims().1;
        let l = self.l.clone().unwrap_or(LSpec::Named("identity".into())).build(n)?;
        let selector = match &self.m {
            Some(s) => s.build(n)?,
            None => DMatrix::identity(n, n),
        };
        Ok(ProblemData {
            handle: self.handle.clone(),
            l,
            b: DVector::from_vec(self.b.clone()),
            selector,
            lambda: self.lambda,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Exact,
    Power,
    Sce,
}

fn default_epsilon() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}
fn default_k() -> usize {
    3
}
fn default_seeds() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSource,
    pub lambda: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Number of consecutive seeds starting at `seed`.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub estimator: Estimator,
    /// Structure-preserving perturbations and estimates when `true`.
    #[serde(default = "default_true")]
    pub structured: bool,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueErrors {
    pub normwise: f64,
    pub mixed: f64,
    pub componentwise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimates {
    pub normwise: f64,
    pub mixed: f64,
    pub componentwise: Option<f64>,
}

/// `ε · estimate / observed error`; `None` where the observed error is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub seed: u64,
    pub r_kappa: Option<f64>,
    pub r_m: Option<f64>,
    pub r_c: Option<f64>,
    pub true_errors: TrueErrors,
    pub estimates: Estimates,
}

fn ratio(eps: f64, est: Option<f64>, err: f64) -> Option<f64> {
    match est {
        Some(e) if err > 0.0 && err.is_finite() => Some(eps * e / err),
        _ => None,
    }
}

/// Relative errors of `M x̃` against `M x`.
pub fn true_errors(mx: &DVector<f64>, mx_pert: &DVector<f64>) -> TrueErrors {
    let dx = mx_pert - mx;
    TrueErrors {
        normwise: dx.norm() / mx.norm(),
        mixed: dx.amax() / mx.amax(),
        componentwise: componentwise_ratio(&dx, mx).unwrap_or(f64::INFINITY),
    }
}

/// Perturbs `(A, b)` with seed `seed` and returns `M x̃`.
///
/// Structured: `Δa_i = ε s_i a_i`, `Δb_j = ε f_j b_j`; unstructured:
/// `ΔA = ε (E ⊙ A)`, `Δb = ε (f ⊙ b)`, all factors uniform in (−1, 1).
pub fn perturbed_solution(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>, epsilon: f64, seed: u64) -> Result<DVector<f64>> {
    let mut rng = random::stream(seed, PERTURB_STREAM);
    let (m, n) = ctx.a().shape();
    let a_new = match handle {
        Some(h) => {
            let s = random::uniform_symmetric(&mut rng, h.param_count());
            let delta = s.component_mul(h.params()) * epsilon;
            h.perturbed(&ParamPerturbation::new(delta))?.materialize()
        }
        None => {
            let e = random::uniform_symmetric(&mut rng, m * n);
            let e = DMatrix::from_column_slice(m, n, e.as_slice());
            ctx.a() + e.component_mul(ctx.a()) * epsilon
        }
    };
    let f = random::uniform_symmetric(&mut rng, m);
    let b_new = ctx.b() + f.component_mul(ctx.b()) * epsilon;
    Ok(ctx.selector() * ctx.resolve(a_new, b_new)?)
}

fn estimates_for(ctx: &SolvedProblem, handle: Option<&StructuredMatrix>, spec: &ExperimentSpec, seed: u64) -> Result<Estimates> {
    Ok(match spec.estimator {
        Estimator::Exact => {
            let r = cond_exact(ctx, handle)?;
            Estimates {
                normwise: r.normwise,
                mixed: r.mixed,
                componentwise: r.componentwise,
            }
        }
        Estimator::Power => {
            let op = operator_for(ctx, handle)?;
            let opts = PowerOpts {
                init: crate::power::InitVector::Random(seed),
                ..PowerOpts::default()
            };
            let r = estimate_all(op.as_ref(), &ctx.mx(), &opts)?;
            Estimates {
                normwise: r.normwise,
                mixed: r.mixed,
                componentwise: r.componentwise,
            }
        }
        Estimator::Sce => {
            let opts = SceOpts {
                k: spec.k,
                seed,
                ..SceOpts::default()
            };
            let r = sce_estimate(ctx, handle, &opts)?;
            Estimates {
                normwise: r.kappa_sce,
                mixed: r.m_sce,
                componentwise: r.c_sce,
            }
        }
    })
}

/// One report per seed in `spec.seed .. spec.seed + spec.seeds`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<RatioReport>> {
    if !(spec.epsilon >= 0.0) || !(spec.lambda > 0.0) {
        return Err(TikhError::InvalidInput("need ε ≥ 0 and λ > 0".into()));
    }
    let data = spec.problem.load()?;
    let ctx = SolvedProblem::new(data.problem(spec.lambda)?)?;
    let handle = spec.structured.then_some(&data.handle);
    let mx = ctx.mx();
    (spec.seed..spec.seed + spec.seeds.max(1) as u64)
        .map(|seed| {
            let errs = true_errors(&mx, &perturbed_solution(&ctx, handle, spec.epsilon, seed)?);
            let est = estimates_for(&ctx, handle, spec, seed)?;
            Ok(RatioReport {
                seed,
                r_kappa: ratio(spec.epsilon, Some(est.normwise), errs.normwise),
                r_m: ratio(spec.epsilon, Some(est.mixed), errs.mixed),
                r_c: ratio(spec.epsilon, est.componentwise, errs.componentwise),
                true_errors: errs,
                estimates: est,
            })
        })
        .collect()
}

/// Single-seed experiment.
pub fn perturb_and_measure(spec: &ExperimentSpec) -> Result<RatioReport> {
    let one = ExperimentSpec {
        seeds: 1,
        ..spec.clone()
    };
    Ok(run_experiment(&one)?.remove(0))
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Medians of `(r_κ, r_m, r_c)` over reports, skipping undefined entries.
pub fn median_ratios(reports: &[RatioReport]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let mut k: Vec<f64> = reports.iter().filter_map(|r| r.r_kappa).collect();
    let mut m: Vec<f64> = reports.iter().filter_map(|r| r.r_m).collect();
    let mut c: Vec<f64> = reports.iter().filter_map(|r| r.r_c).collect();
    (median(&mut k), median(&mut m), median(&mut c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eps: f64) -> ExperimentSpec {
        ExperimentSpec {
            problem: ProblemSource::Id("toeplitz5".into()),
            lambda: 4.9988e-4,
            epsilon: eps,
            seed: 3,
            seeds: 1,
            estimator: Estimator::Exact,
            structured: true,
            k: 3,
        }
    }

    #[test]
    fn zero_epsilon_gives_undefined_ratios() {
        let r = perturb_and_measure(&spec(0.0)).unwrap();
        assert_eq!(r.true_errors.normwise, 0.0);
        assert!(r.r_kappa.is_none() && r.r_m.is_none());
    }

    #[test]
    fn deterministic() {
        assert_eq!(perturb_and_measure(&spec(1e-8)).unwrap(), perturb_and_measure(&spec(1e-8)).unwrap());
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(parse_selector("row:2", 4).unwrap()[(0, 2)], 1.0);
        assert!(parse_selector("row:4", 4).is_err());
        assert!(parse_selector("diag", 4).is_err());
    }

    #[test]
    fn problem_file_roundtrip() {
        let js = r#"{"kind":"sym_toeplitz","m":3,"n":3,"params":[2,1,0],"b":[1,2,3],"L":"l1","lambda":0.5}"#;
        let f: ProblemFile = serde_json::from_str(js).unwrap();
        let d = f.load().unwrap();
        assert_eq!(d.l.shape(), (2, 3));
        assert_eq!(d.lambda, Some(0.5));
        let src: ProblemSource = serde_json::from_str(r#""hankel6""#).unwrap();
        assert_eq!(src.load().unwrap().b.len(), 6);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
