//! Matrix-free estimators built on forward/adjoint applications only.
//!
//! The normwise estimator is a power iteration on `DφᵀDφ`; the mixed and
//! componentwise estimators run the Hager–Higham ∞-norm iteration on
//! `Dφ · Diag([params; b])`, optionally row-scaled by `(M x)⁻¹`.

use nalgebra::DVector;
use serde::Serialize;

use crate::cond::{ConditionReport, Method};
use crate::error::{Result, TikhError};
use crate::frechet::{FrechetOperator, RowScaled};
use crate::random;

#[derive(Debug, Clone, PartialEq)]
pub enum InitVector {
    Random(u64),
    Given(DVector<f64>),
    Ones,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOpts {
    pub max_iters: usize,
    pub tol: f64,
    pub init: InitVector,
    /// Independent starts for the normwise iteration; the largest estimate wins.
    pub restarts: usize,
}

impl Default for PowerOpts {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: 1e-3,
            init: InitVector::Random(0),
            restarts: 1,
        }
    }
}

impl PowerOpts {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.tol > 0.0) || self.restarts == 0 {
            return Err(TikhError::InvalidInput(
                "power options need max_iters ≥ 1, tol > 0 and restarts ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    /// Scaled condition estimate.
    pub estimate: f64,
    /// Unscaled operator-norm estimate (`‖Dφ‖₂` or `‖Dφ Diag(w)‖_∞`).
    pub raw: f64,
    pub iterations: usize,
}

fn start_vector(init: &InitVector, len: usize, restart: usize) -> Result<DVector<f64>> {
    let v = match init {
        InitVector::Ones => DVector::from_element(len, 1.0),
        InitVector::Given(v) => {
            if v.len() != len {
                return Err(TikhError::BadDimension(format!(
                    "initial vector has {} entries, need {len}",
                    v.len()
                )));
            }
            v.clone()
        }
        InitVector::Random(seed) => random::gaussian_vector(&mut random::stream(*seed, restart as u64), len),
    };
    let n = v.norm();
    if !(n > 0.0) {
        return Err(TikhError::InvalidInput("zero initial vector".into()));
    }
    Ok(v / n)
}

/// Power iteration for `‖Dφ‖₂`, scaled by `‖w‖₂ / ‖M x‖₂`.
///
/// Each step sets `ā = Dφᵀh`, `ν = ‖ā‖`, `a = ā/ν`, `h = Dφ a / ‖Dφ a‖`; both
/// `ν` and `‖Dφ a‖` are lower bounds on `‖Dφ‖₂`.
pub fn estimate_normwise_power(
    op: &dyn FrechetOperator,
    w_norm: f64,
    mx_norm: f64,
    opts: &PowerOpts,
) -> Result<PowerEstimate> {
    opts.validate()?;
    let mut best = 0.0f64;
    let mut iterations = 0;
    for restart in 0..opts.restarts {
        let mut h = start_vector(&opts.init, op.l(), restart)?;
        let mut prev = 0.0f64;
        for it in 1..=opts.max_iters {
            iterations += 1;
            let abar = op.adjoint(&h);
            let nu = abar.norm();
            if !(nu > 1e-300) {
                if it == 1 && restart == 0 {
                    return Err(TikhError::ZeroOperator);
                }
                break;
            }
            let hn = op.forward(&(abar / nu));
            let fnorm = hn.norm();
            let est = nu.max(fnorm);
            best = best.max(est);
            if !(fnorm > 1e-300) {
                break;
            }
            h = hn / fnorm;
            if (est - prev).abs() <= opts.tol * est {
                break;
            }
            prev = est;
        }
    }
    Ok(PowerEstimate {
        estimate: best * w_norm / mx_norm,
        raw: best,
        iterations,
    })
}

/// Hager–Higham estimate of `‖op · Diag(w)‖_∞`.
fn hager_infinity(op: &dyn FrechetOperator, w: &DVector<f64>, opts: &PowerOpts) -> Result<(f64, usize)> {
    let l = op.l();
    let mut h = DVector::from_element(l, 1.0 / l as f64);
    let mut gamma = 0.0f64;
    let mut last_j = usize::MAX;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        iterations = it;
        let y = w.component_mul(&op.adjoint(&h));
        let y1 = y.lp_norm(1);
        if it == 1 && !(y1 > 1e-300) {
            return Err(TikhError::ZeroOperator);
        }
        gamma = gamma.max(y1);
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = op.forward(&w.component_mul(&xi));
        let zmax = z.amax();
        if zmax <= h.dot(&z) {
            break;
        }
        let j = z.iamax();
        if j == last_j {
            break;
        }
        last_j = j;
        h = DVector::zeros(l);
        h[j] = 1.0;
    }
    Ok((gamma, iterations))
}

/// Mixed condition estimate `‖Dφ Diag(w)‖_∞ / ‖M x‖_∞`.
pub fn estimate_mixed_power(
    op: &dyn FrechetOperator,
    w: &DVector<f64>,
    mx: &DVector<f64>,
    opts: &PowerOpts,
) -> Result<PowerEstimate> {
    opts.validate()?;
    let (raw, iterations) = hager_infinity(op, w, opts)?;
    Ok(PowerEstimate {
        estimate: raw / mx.amax(),
        raw,
        iterations,
    })
}

/// Componentwise estimate `‖Diag(M x)⁻¹ Dφ Diag(w)‖_∞`.
pub fn estimate_componentwise_power(
    op: &dyn FrechetOperator,
    w: &DVector<f64>,
    mx: &DVector<f64>,
    opts: &PowerOpts,
) -> Result<PowerEstimate> {
    opts.validate()?;
    let scaled = RowScaled::new(op, mx)?;
    let (raw, iterations) = hager_infinity(&scaled, w, opts)?;
    Ok(PowerEstimate {
        estimate: raw,
        raw,
        iterations,
    })
}

/// All three estimates as a report. An undefined componentwise value is
/// reported through `undefined_components`.
pub fn estimate_all(op: &dyn FrechetOperator, mx: &DVector<f64>, opts: &PowerOpts) -> Result<ConditionReport> {
    let w = op.data_point();
    let normwise = estimate_normwise_power(op, w.norm(), mx.norm(), opts)?.estimate;
    let mixed = estimate_mixed_power(op, &w, mx, opts)?.estimate;
    let (componentwise, undefined_components) = match estimate_componentwise_power(op, &w, mx, opts) {
        Ok(c) => (Some(c.estimate), Vec::new()),
        Err(TikhError::ZeroDenominator(idx)) => (None, idx),
        Err(e) => return Err(e),
    };
    Ok(ConditionReport {
        structure: op.structure(),
        method: Method::Power,
        normwise,
        mixed,
        componentwise,
        undefined_components,
    })
}
