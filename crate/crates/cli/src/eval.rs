use std::fs;
use std::path::{Path, PathBuf};

use eqswarm_core::benchmarks::DatasetMeta;
use eqswarm_core::data::{Provenance, Split};
use eqswarm_core::fit::{fit_params, FitConfig};
use eqswarm_core::metrics::MetricReport;
use eqswarm_core::{Dataset, Expression};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub expr_text: String,
    /// Datasets to evaluate on, one report each.
    pub data: Vec<PathBuf>,
    /// Parameter values; when absent and the expression has slots, they
    /// are fitted on `train` (or on the first dataset).
    pub params: Option<Vec<f64>>,
    pub train: Option<PathBuf>,
    /// Split label for files without a metadata sidecar.
    pub split: Option<Split>,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub expr_text: String,
    #[serde(with = "eqswarm_core::real::vec")]
    pub params: Vec<f64>,
    pub fitted_on: Option<PathBuf>,
    pub reports: Vec<DatasetReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub path: PathBuf,
    pub metrics: MetricReport,
}

/// Reads a comma-separated dataset whose last column is the target. The
/// split comes from the metadata sidecar when present.
pub fn read_dataset(path: &Path, fallback: Option<Split>) -> Result<Dataset, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let split = DatasetMeta::read_for(path)
        .map(|m| m.split)
        .or(fallback)
        .unwrap_or(Split::TestId);
    let provenance = Provenance::File {
        path: path.display().to_string(),
        checksum: eqswarm_core::data::sha256_hex(&bytes),
    };
    let data = Dataset::read_csv(&bytes[..], split, provenance)?;
    if data.is_empty() {
        return Err(CliError::Schema(format!("{} has no rows", path.display())));
    }
    Ok(data)
}

pub fn cmd_eval(opts: &EvalOptions) -> Result<EvalReport, CliError> {
    if opts.data.is_empty() {
        return Err(CliError::Config("no dataset given".into()));
    }
    let sets = opts
        .data
        .iter()
        .map(|p| read_dataset(p, opts.split))
        .collect::<Result<Vec<_>, _>>()?;
    let schema = sets[0].input_names().to_vec();
    for (p, d) in opts.data.iter().zip(&sets) {
        if d.input_names() != schema.as_slice() {
            return Err(CliError::Schema(format!(
                "{} has inputs [{}], expected [{}]",
                p.display(),
                d.input_names().join(", "),
                schema.join(", ")
            )));
        }
    }
    let expr = Expression::parse(&opts.expr_text, &schema)?;

    let (params, fitted_on) = match &opts.params {
        Some(p) => {
            expr.check_arity(schema.len(), p.len())?;
            (p.clone(), None)
        }
        None if expr.param_count() == 0 => (Vec::new(), None),
        None => {
            let (path, train) = match &opts.train {
                Some(t) => (t.clone(), read_dataset(t, Some(Split::Train))?),
                None => (opts.data[0].clone(), sets[0].clone()),
            };
            if train.input_names() != schema.as_slice() {
                return Err(CliError::Schema(format!("{} does not match the evaluation schema", path.display())));
            }
            (fit_params(&expr, &train, &opts.fit)?.params, Some(path))
        }
    };

    let reports = opts
        .data
        .iter()
        .zip(&sets)
        .map(|(p, d)| {
            Ok(DatasetReport {
                path: p.clone(),
                metrics: MetricReport::evaluate(&expr, &params, d)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(EvalReport {
        expr_text: expr.serialize(),
        params,
        fitted_on,
        reports,
    })
}
