use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use eqswarm_core::data::Split;
use eqswarm_core::metrics::{abs_error_curve, ood_trace, write_curve_csv, Incumbent, MetricReport};

use crate::artifacts::{load_checkpoint, read_log, read_manifest, write_atomic, CHECKPOINT_FILE, LOG_FILE, MANIFEST_FILE};
use crate::config::ResolvedConfig;
use crate::error::CliError;

pub const REPORT_DIR: &str = "report";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub convergence: PathBuf,
    pub ood_trace: Option<PathBuf>,
    pub curves: Vec<PathBuf>,
    pub summary: PathBuf,
    /// Metrics of the final incumbent, as listed in the summary.
    pub final_metrics: Vec<MetricReport>,
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io {
        path: PathBuf::from("<csv>"),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| err(e.into_error().into()))
}

/// Writes convergence, OOD-trace and absolute-error curve files plus a
/// text summary into `<run_dir>/report/`.
pub fn cmd_report(run_dir: &Path) -> Result<ReportFiles, CliError> {
    let records = read_log(&run_dir.join(LOG_FILE))?;
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let cfg: ResolvedConfig = if manifest_path.is_file() {
        read_manifest(&manifest_path)?.config
    } else {
        load_checkpoint(&run_dir.join(CHECKPOINT_FILE))?.config
    };
    let last = records
        .last()
        .ok_or_else(|| CliError::MissingLog(run_dir.join(LOG_FILE)))?;
    let out = run_dir.join(REPORT_DIR);

    let convergence = out.join("convergence.csv");
    let rows = records.iter().map(|r| {
        vec![
            r.iteration.to_string(),
            r.generation_best.score.to_string(),
            r.archive_best.score.to_string(),
            r.archive_best.expr_text.clone(),
        ]
    });
    write_atomic(
        &convergence,
        &csv_bytes(&["iteration", "generation_best_score", "archive_best_score", "archive_best_expr"], rows)?,
    )?;

    let loaded = cfg.load_all()?;
    let expr = cfg.spec.parse(&last.archive_best.expr_text)?;
    let params = &last.archive_best.params;

    let mut ood_path = None;
    if let Some(ood) = loaded.iter().find(|l| l.split == Split::TestOod) {
        let incumbents: Vec<Incumbent> = records
            .iter()
            .map(|r| Incumbent {
                iteration: r.iteration,
                expr_text: &r.archive_best.expr_text,
                params: &r.archive_best.params,
            })
            .collect();
        let trace = ood_trace(&incumbents, &ood.dataset);
        let path = out.join("ood_trace.csv");
        let rows = trace.iter().map(|t| vec![t.iteration.to_string(), t.wmape.to_string()]);
        write_atomic(&path, &csv_bytes(&["iteration", "ood_wmape"], rows)?)?;
        ood_path = Some(path);
    }

    let mut curves = Vec::new();
    for l in loaded.iter().filter(|l| l.split != Split::Train) {
        for var in &cfg.spec.var_names {
            let pts = abs_error_curve(&expr, params, &l.dataset, var)?;
            let mut buf = Vec::new();
            write_curve_csv(&mut buf, var, &pts).map_err(|e| CliError::io(&out, e))?;
            let path = out.join(format!("abs_error_{}_{var}.csv", l.split));
            write_atomic(&path, &buf)?;
            curves.push(path);
        }
    }

    let final_metrics = loaded
        .iter()
        .map(|l| MetricReport::evaluate(&expr, params, &l.dataset))
        .collect::<Result<Vec<_>, _>>()?;
    let mut s = String::new();
    let _ = writeln!(s, "problem: {}", cfg.spec.name);
    let _ = writeln!(s, "iterations completed: {} of {}", last.iteration, cfg.run.iterations);
    let _ = writeln!(s, "agents: {}", cfg.run.agents);
    let _ = writeln!(s, "seed: {}", cfg.run.seed);
    let _ = writeln!(s, "best equation: {}", last.archive_best.expr_text);
    let _ = writeln!(s, "parameters: {:?}", params);
    let _ = writeln!(s, "discovery score: {}", last.archive_best.score);
    let _ = writeln!(s, "training SSE: {}", last.archive_best.sse);
    let _ = writeln!(s, "depth: {}, free parameters: {}", expr.depth(), expr.param_count());
    let _ = writeln!(s, "knowledge reads/writes: {}/{}", last.ck_reads, last.ck_writes);
    for m in &final_metrics {
        let _ = writeln!(s, "{} (n={}): wmape={} nmse={} mae={}", m.split, m.n, m.wmape, m.nmse, m.mae);
    }
    let summary = out.join("summary.txt");
    write_atomic(&summary, s.as_bytes())?;

    Ok(ReportFiles {
        convergence,
        ood_trace: ood_path,
        curves,
        summary,
        final_metrics,
    })
}
