//! Benchmark problems: synthetic generators with known governing equations,
//! tabular ingestion for the empirical problems, and the problem catalog.

mod catalog;
pub mod problems;
mod ranges;
mod tabular;

use thiserror::Error;

pub use catalog::{catalog, lookup, CatalogEntry, Problem, SplitCounts};
pub use problems::{EcbgConstants, FhstConstants, HhmConstants, NdoConstants, NnnWeights};
pub use ranges::{split_id_ood, Interval, RangeSpec, SamplingPlan, VarRange};
pub use tabular::{load_tabular, DatasetMeta, LoadedTable, TabularSchema};

use crate::data::{DataError, Dataset, Provenance, Split};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("range error: {0}")]
    Range(String),
    #[error("unknown problem `{name}`; valid problems: {}", valid.join(", "))]
    Catalog { name: String, valid: Vec<String> },
    #[error("problem `{0}` has no synthetic generator; load it from a file")]
    NotSynthetic(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Physical constants for whichever generator is being run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenOptions {
    pub seed: u64,
    /// Seed for the NNN network weights; defaults to `seed`.
    pub weight_seed: Option<u64>,
    pub ranges: Option<RangeSpec>,
    pub ndo: NdoConstants,
    pub fhst: FhstConstants,
    pub ecbg: EcbgConstants,
    pub hhm: HhmConstants,
}

impl GenOptions {
    pub fn seeded(seed: u64) -> Self {
        GenOptions {
            seed,
            ..GenOptions::default()
        }
    }
}

/// The three splits of one generated benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Dataset,
    pub test_id: Dataset,
    pub test_ood: Option<Dataset>,
    /// Ground-truth equation in the expression grammar.
    pub ground_truth: String,
}

impl SplitSet {
    pub fn get(&self, split: Split) -> Option<&Dataset> {
        match split {
            Split::Train => Some(&self.train),
            Split::TestId => Some(&self.test_id),
            Split::TestOod => self.test_ood.as_ref(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        [Some(&self.train), Some(&self.test_id), self.test_ood.as_ref()]
            .into_iter()
            .flatten()
    }
}

type Truth = Box<dyn Fn(&[f64]) -> Result<f64, BenchError>>;

fn truth_for(problem: Problem, opts: &GenOptions) -> Result<(Truth, String, Vec<(String, f64)>), BenchError> {
    let consts = |m: std::collections::BTreeMap<String, f64>| m.into_iter().collect::<Vec<_>>();
    Ok(match problem {
        Problem::Chi2Pdf => (
            Box::new(|r: &[f64]| problems::chi2pdf(r[0], r[1])),
            problems::CHI2PDF_EXPR.to_string(),
            Vec::new(),
        ),
        Problem::Ndo => {
            let c = opts.ndo;
            (
                Box::new(move |r: &[f64]| Ok(c.accel(r[0], r[1], r[2]))),
                c.expression(),
                consts(c.as_map()),
            )
        }
        Problem::Nnn => {
            let w = NnnWeights::from_seed(opts.weight_seed.unwrap_or(opts.seed));
            (
                Box::new(move |r: &[f64]| Ok(w.forward(r[0], r[1]))),
                w.expression(),
                consts(w.as_map()),
            )
        }
        Problem::Fhst => {
            let c = opts.fhst;
            (
                Box::new(move |r: &[f64]| c.free_energy(r[0], r[1], r[2])),
                c.expression(),
                consts(c.as_map()),
            )
        }
        Problem::Ecbg => {
            let c = opts.ecbg;
            (
                Box::new(move |r: &[f64]| c.growth_rate(r[0], r[1], r[2], r[3])),
                c.expression(),
                consts(c.as_map()),
            )
        }
        Problem::Hhm => {
            let c = opts.hhm;
            (
                Box::new(move |r: &[f64]| c.dv_dt(r[0], r[1], r[2], r[3], r[4])),
                c.expression(),
                consts(c.as_map()),
            )
        }
        other => return Err(BenchError::NotSynthetic(other.name().to_string())),
    })
}

fn check_domain(problem: Problem, spec: &RangeSpec) -> Result<(), BenchError> {
    let all = |name: &str| -> Vec<Interval> {
        spec.interval(name)
            .map(|v| [Some(v.train), v.ood].into_iter().flatten().collect())
            .unwrap_or_default()
    };
    let fail = |msg: String| Err(BenchError::Range(msg));
    match problem {
        Problem::Chi2Pdf => {
            for iv in all("x") {
                if iv.lo < 0.0 || (iv.lo == 0.0 && !iv.lo_open) {
                    return fail("chi2pdf requires x > 0".into());
                }
            }
            for iv in all("k") {
                if !iv.integer || iv.lo < 1.0 {
                    return fail("chi2pdf requires integer k >= 1".into());
                }
            }
        }
        Problem::Fhst => {
            for iv in all("phi") {
                if iv.lo < 0.0 || (iv.lo == 0.0 && !iv.lo_open) || iv.hi > 1.0 || (iv.hi == 1.0 && !iv.hi_open)
                {
                    return fail("fhst requires phi strictly inside (0, 1)".into());
                }
            }
            for iv in all("N") {
                if iv.lo < 1.0 {
                    return fail("fhst requires chain length N >= 1".into());
                }
            }
        }
        Problem::Ecbg => {
            for name in ["B", "S"] {
                for iv in all(name) {
                    if iv.lo < 0.0 {
                        return fail(format!("ecbg requires {name} >= 0"));
                    }
                }
            }
        }
        Problem::Hhm => {
            for name in ["m", "n", "h"] {
                for iv in all(name) {
                    if iv.lo < 0.0 || iv.hi > 1.0 {
                        return fail(format!("hhm gating variable {name} must lie in [0, 1]"));
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// Generates the train / test_id / test_ood splits of a synthetic problem.
pub fn generate(problem: Problem, opts: &GenOptions) -> Result<SplitSet, BenchError> {
    let entry = lookup(problem.name())?;
    let spec = match &opts.ranges {
        Some(s) => s.clone(),
        None => entry
            .ranges
            .clone()
            .ok_or_else(|| BenchError::NotSynthetic(problem.name().to_string()))?,
    };
    let names: Vec<&str> = spec.vars.iter().map(|v| v.name.as_str()).collect();
    if names != entry.var_names.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(BenchError::Schema(format!(
            "range variables [{}] do not match problem inputs [{}]",
            names.join(", "),
            entry.var_names.join(", ")
        )));
    }
    check_domain(problem, &spec)?;
    let (truth, ground_truth, constants) = truth_for(problem, opts)?;
    let plans = split_id_ood(&spec, opts.seed)?;

    let mut out = Vec::with_capacity(3);
    for plan in &plans {
        if plan.count == 0 {
            out.push(None);
            continue;
        }
        let columns = plan.sample_columns();
        let mut target = Vec::with_capacity(plan.count);
        let mut row = vec![0.0; columns.len()];
        for i in 0..plan.count {
            for (slot, col) in row.iter_mut().zip(&columns) {
                *slot = col[i];
            }
            let y = truth(&row)?;
            if !y.is_finite() {
                return Err(BenchError::Range(format!(
                    "{} produced a non-finite target at {row:?}",
                    problem.name()
                )));
            }
            target.push(y);
        }
        let provenance = Provenance::Synthetic {
            generator: problem.name().to_string(),
            seed: opts.seed,
            ranges: spec.vars.clone(),
            constants: constants.iter().cloned().collect(),
        };
        out.push(Some(Dataset::new(
            entry.var_names.clone(),
            entry.target_name.clone(),
            columns,
            target,
            plan.split,
            provenance,
        )?));
    }
    let mut it = out.into_iter();
    let train = it.next().flatten().ok_or_else(|| BenchError::Range("empty train split".into()))?;
    let test_id = it.next().flatten().ok_or_else(|| BenchError::Range("empty test split".into()))?;
    let test_ood = it.next().flatten();
    Ok(SplitSet {
        train,
        test_id,
        test_ood,
        ground_truth,
    })
}

macro_rules! named_generator {
    ($(#[$doc:meta])* $fn_name:ident, $problem:expr) => {
        $(#[$doc])*
        pub fn $fn_name(opts: &GenOptions) -> Result<SplitSet, BenchError> {
            generate($problem, opts)
        }
    };
}

named_generator!(
    /// Chi-squared density, inputs (x, k).
    gen_chi2pdf, Problem::Chi2Pdf);
named_generator!(
    /// Nonlinear damped oscillator, inputs (t, x, v).
    gen_ndo, Problem::Ndo);
named_generator!(
    /// Two-unit sigmoid network, inputs (x1, x2).
    gen_nnn, Problem::Nnn);
named_generator!(
    /// Flory-Huggins free energy of mixing, inputs (phi, N, chi).
    gen_fhst, Problem::Fhst);
named_generator!(
    /// E. coli growth rate, inputs (B, S, T, pH).
    gen_ecbg, Problem::Ecbg);
named_generator!(
    /// Hodgkin-Huxley membrane rate, inputs (V, m, n, h, I_ext).
    gen_hhm, Problem::Hhm);
