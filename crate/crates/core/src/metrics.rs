//! Generalization metrics and report curves.
//!
//! NMSE is normalized by the centered target energy, so predicting the
//! target mean scores exactly 1. Rows with a non-finite prediction are never
//! dropped: any such row makes the metric NaN, and [`MetricReport`] records
//! how many rows were affected.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Split};
use crate::expr::{ExprError, Expression};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} targets vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("degenerate target: {0}")]
    DegenerateTarget(&'static str),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

fn check(y: &[f64], yhat: &[f64], min_len: usize) -> Result<(), MetricError> {
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < min_len {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn any_nonfinite(yhat: &[f64]) -> bool {
    yhat.iter().any(|v| !v.is_finite())
}

/// Weighted mean absolute percentage error, `sum|y - yhat| / sum|y|`.
pub fn wmape(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    let denom: f64 = y.iter().map(|v| v.abs()).sum();
    if denom == 0.0 {
        return Err(MetricError::DegenerateTarget("sum of |y| is zero"));
    }
    if any_nonfinite(yhat) {
        return Ok(f64::NAN);
    }
    let num: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(num / denom)
}

/// Normalized mean squared error, `sum (y - yhat)^2 / sum (y - mean(y))^2`.
pub fn nmse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 2)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let denom: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(MetricError::DegenerateTarget("target variance is zero"));
    }
    if any_nonfinite(yhat) {
        return Ok(f64::NAN);
    }
    let num: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// Mean absolute error.
pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat, 1)?;
    if any_nonfinite(yhat) {
        return Ok(f64::NAN);
    }
    let total: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / y.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(with = "crate::real")]
    pub wmape: f64,
    #[serde(with = "crate::real")]
    pub nmse: f64,
    #[serde(with = "crate::real")]
    pub mae: f64,
    pub n: usize,
    pub split: Split,
    pub nonfinite_rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_vec")]
    pub per_point_abs_error: Option<Vec<f64>>,
}

mod opt_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::real::vec")] Vec<f64>);

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|x| Wrap(x.clone())).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

impl MetricReport {
    /// Computes all three metrics. Degenerate cases (e.g. a constant target
    /// for NMSE) yield NaN for that metric rather than failing the report.
    pub fn compute(y: &[f64], yhat: &[f64], split: Split, keep_points: bool) -> Result<Self, MetricError> {
        check(y, yhat, 1)?;
        let soft = |r: Result<f64, MetricError>| match r {
            Ok(v) => Ok(v),
            Err(MetricError::DegenerateTarget(_) | MetricError::Empty) => Ok(f64::NAN),
            Err(e) => Err(e),
        };
        Ok(MetricReport {
            wmape: soft(wmape(y, yhat))?,
            nmse: soft(nmse(y, yhat))?,
            mae: soft(mae(y, yhat))?,
            n: y.len(),
            split,
            nonfinite_rows: yhat.iter().filter(|v| !v.is_finite()).count(),
            per_point_abs_error: keep_points
                .then(|| y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).collect()),
        })
    }

    pub fn evaluate(expr: &Expression, params: &[f64], data: &Dataset) -> Result<Self, MetricError> {
        let yhat = expr.evaluate_batch(data, params)?;
        MetricReport::compute(data.target(), &yhat, data.split(), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    pub abs_error: f64,
    pub finite: bool,
}

/// `|y - yhat|` against one input variable, sorted by that variable.
pub fn abs_error_curve(
    expr: &Expression,
    params: &[f64],
    data: &Dataset,
    axis_var: &str,
) -> Result<Vec<CurvePoint>, MetricError> {
    let xs = data
        .column(axis_var)
        .ok_or_else(|| MetricError::UnknownVariable(axis_var.to_string()))?;
    let yhat = expr.evaluate_batch(data, params)?;
    let mut pts: Vec<CurvePoint> = xs
        .iter()
        .zip(data.target())
        .zip(&yhat)
        .map(|((&x, &y), &p)| CurvePoint {
            x,
            abs_error: (y - p).abs(),
            finite: p.is_finite(),
        })
        .collect();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(pts)
}

pub fn write_curve_csv<W: Write>(w: W, axis_var: &str, pts: &[CurvePoint]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([axis_var, "abs_error", "finite"])?;
    for p in pts {
        out.write_record([p.x.to_string(), p.abs_error.to_string(), p.finite.to_string()])?;
    }
    out.flush()
}

/// One incumbent per iteration, as logged by a discovery run.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent<'a> {
    pub iteration: usize,
    pub expr_text: &'a str,
    pub params: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub wmape: f64,
}

/// OOD WMAPE of each iteration's incumbent. Incumbents that fail to parse
/// or evaluate are reported as NaN.
pub fn ood_trace(incumbents: &[Incumbent<'_>], ood: &Dataset) -> Vec<TracePoint> {
    let mut cache: Option<(&str, &[f64], f64)> = None;
    incumbents
        .iter()
        .map(|inc| {
            let wmape = match cache {
                Some((t, p, w)) if t == inc.expr_text && p == inc.params => w,
                _ => {
                    let w = Expression::parse(inc.expr_text, ood.input_names())
                        .ok()
                        .and_then(|e| e.evaluate_batch(ood, inc.params).ok())
                        .and_then(|yhat| wmape(ood.target(), &yhat).ok())
                        .unwrap_or(f64::NAN);
                    cache = Some((inc.expr_text, inc.params, w));
                    w
                }
            };
            TracePoint {
                iteration: inc.iteration,
                wmape,
            }
        })
        .collect()
}
