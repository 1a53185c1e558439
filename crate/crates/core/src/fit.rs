//! Deterministic multi-start nonlinear least squares for parameter slots.
//!
//! Each restart runs a Levenberg-Marquardt style damped Gauss-Newton descent
//! with central finite-difference Jacobians. Restart 0 starts from all ones;
//! later restarts draw uniformly from `[-10, 10]` using a seeded stream.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::expr::{ExprError, Expression};

const START_RANGE: f64 = 10.0;
const FD_STEP: f64 = 1e-6;
const MAX_DAMPING_TRIES: usize = 12;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("empty dataset")]
    EmptyData,
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters_per_restart: usize,
    pub step_tolerance: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 4,
            max_iters_per_restart: 100,
            step_tolerance: 1e-10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if self.restarts == 0 {
            return Err(FitError::Config("restarts must be positive".into()));
        }
        if self.max_iters_per_restart == 0 {
            return Err(FitError::Config("max_iters_per_restart must be positive".into()));
        }
        if !(self.step_tolerance > 0.0 && self.step_tolerance.is_finite()) {
            return Err(FitError::Config("step_tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(with = "crate::real::vec")]
    pub params: Vec<f64>,
    #[serde(with = "crate::real")]
    pub sse: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Predicted minus observed, one entry per row.
pub fn residuals(expr: &Expression, data: &Dataset, params: &[f64]) -> Result<Vec<f64>, ExprError> {
    let mut pred = expr.evaluate_batch(data, params)?;
    for (p, y) in pred.iter_mut().zip(data.target()) {
        *p -= y;
    }
    Ok(pred)
}

fn sum_squares(r: &[f64]) -> f64 {
    let mut acc = 0.0;
    for v in r {
        acc += v * v;
    }
    if acc.is_finite() {
        acc
    } else {
        f64::NAN
    }
}

/// Sum of squared errors; NaN if any residual is non-finite.
pub fn sse(expr: &Expression, data: &Dataset, params: &[f64]) -> Result<f64, ExprError> {
    let pred = expr.evaluate_batch(data, params)?;
    let mut acc = 0.0;
    for (y, p) in data.target().iter().zip(&pred) {
        let d = y - p;
        acc += d * d;
    }
    Ok(if acc.is_finite() { acc } else { f64::NAN })
}

fn fd_step(p: f64) -> f64 {
    FD_STEP * p.abs().max(1.0)
}

/// Central-difference Jacobian of the residual vector; `jac[j][i]` is
/// d r_i / d p_j.
pub fn jacobian(
    expr: &Expression,
    data: &Dataset,
    params: &[f64],
) -> Result<Vec<Vec<f64>>, ExprError> {
    let mut probe = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for j in 0..params.len() {
        let h = fd_step(params[j]);
        probe[j] = params[j] + h;
        let up = expr.evaluate_batch(data, &probe)?;
        probe[j] = params[j] - h;
        let down = expr.evaluate_batch(data, &probe)?;
        probe[j] = params[j];
        out.push(
            up.iter()
                .zip(&down)
                .map(|(u, d)| (u - d) / (2.0 * h))
                .collect(),
        );
    }
    Ok(out)
}

fn check_schema(expr: &Expression, data: &Dataset) -> Result<(), FitError> {
    if expr.var_names() != data.input_names() {
        return Err(FitError::Schema(format!(
            "expression variables [{}] do not match dataset columns [{}]",
            expr.var_names().join(", "),
            data.input_names().join(", ")
        )));
    }
    Ok(())
}

struct Restart {
    params: Vec<f64>,
    sse: f64,
    converged: bool,
}

fn descend(
    expr: &Expression,
    data: &Dataset,
    start: Vec<f64>,
    cfg: &FitConfig,
    evals: &mut usize,
) -> Restart {
    let mut p = start;
    let mut r = residuals(expr, data, &p).expect("arity checked by caller");
    *evals += 1;
    let mut cost = sum_squares(&r);
    if cost.is_nan() {
        return Restart {
            params: p,
            sse: f64::NAN,
            converged: false,
        };
    }
    let m = p.len();
    let n = r.len();
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..cfg.max_iters_per_restart {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(expr, data, &p).expect("arity checked by caller");
        *evals += 2 * m;
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            break;
        }
        let jm = DMatrix::from_fn(n, m, |i, j| jac[j][i]);
        let rv = DVector::from_column_slice(&r);
        let jtj = jm.tr_mul(&jm);
        let grad = jm.tr_mul(&rv);

        let mut accepted = None;
        for _ in 0..MAX_DAMPING_TRIES {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let tr = residuals(expr, data, &trial).expect("arity checked by caller");
            *evals += 1;
            let tc = sum_squares(&tr);
            if tc.is_finite() && tc < cost {
                accepted = Some((trial, tr, tc, step.norm()));
                lambda = (lambda / 3.0).max(1e-15);
                break;
            }
            lambda *= 4.0;
        }
        let Some((trial, tr, tc, step_norm)) = accepted else {
            // No damping level improves the cost: a local minimum at this precision.
            converged = true;
            break;
        };
        let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p = trial;
        r = tr;
        cost = tc;
        if step_norm <= cfg.step_tolerance * (p_norm + cfg.step_tolerance) {
            converged = true;
            break;
        }
    }
    Restart {
        params: p,
        sse: cost,
        converged,
    }
}

/// Fits the parameter slots of `expr` to `data`.
pub fn fit_params(expr: &Expression, data: &Dataset, cfg: &FitConfig) -> Result<FitResult, FitError> {
    cfg.validate()?;
    check_schema(expr, data)?;
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    let m = expr.param_count();
    if m == 0 {
        let s = sse(expr, data, &[])?;
        return Ok(FitResult {
            params: Vec::new(),
            sse: s,
            converged: s.is_finite(),
            evaluations: 1,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evals = 0;
    let mut best: Option<Restart> = None;
    let mut first_start = None;
    for restart in 0..cfg.restarts {
        let start: Vec<f64> = if restart == 0 {
            vec![1.0; m]
        } else {
            (0..m)
                .map(|_| rng.random_range(-START_RANGE..=START_RANGE))
                .collect()
        };
        if first_start.is_none() {
            first_start = Some(start.clone());
        }
        let outcome = descend(expr, data, start, cfg, &mut evals);
        if !outcome.sse.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| outcome.sse < b.sse) {
            best = Some(outcome);
        }
    }

    Ok(match best {
        Some(b) => FitResult {
            params: b.params,
            sse: b.sse,
            converged: b.converged,
            evaluations: evals,
        },
        None => FitResult {
            params: first_start.unwrap_or_default(),
            sse: f64::NAN,
            converged: false,
            evaluations: evals,
        },
    })
}
