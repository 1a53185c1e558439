use std::fs;
use std::path::PathBuf;

use eqswarm_core::benchmarks::{catalog, generate, lookup, DatasetMeta, GenOptions, Problem, RangeSpec};
use eqswarm_core::data::sha256_hex;

use crate::artifacts::{write_atomic, write_json_atomic};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct BenchGenOptions {
    /// Catalog name, or `all` for every synthetic problem.
    pub problem: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Seed for the NNN network weights; defaults to `seed`.
    pub weight_seed: Option<u64>,
    /// JSON file with a replacement sampling-range specification.
    pub ranges: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFile {
    pub path: PathBuf,
    pub rows: usize,
    pub checksum: String,
}

fn problems_for(name: &str) -> Result<Vec<Problem>, CliError> {
    if name.eq_ignore_ascii_case("all") {
        return Ok(Problem::ALL.into_iter().filter(|p| p.is_synthetic()).collect());
    }
    let entry = lookup(name)?;
    if !entry.problem.is_synthetic() {
        return Err(CliError::Config(format!(
            "problem `{}` is empirical and has no generator; supply its data files in a run config",
            entry.name
        )));
    }
    Ok(vec![entry.problem])
}

/// Writes the train / test_id / test_ood files of each requested problem
/// under `out_dir/<problem>/`, each with a `.meta.json` sidecar, a starter
/// run configuration, and `catalog.json` at the top level.
pub fn cmd_bench_gen(opts: &BenchGenOptions) -> Result<Vec<GeneratedFile>, CliError> {
    let problems = problems_for(&opts.problem)?;
    let ranges: Option<RangeSpec> = match &opts.ranges {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Some(serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?)
        }
        None => None,
    };
    if ranges.is_some() && problems.len() > 1 {
        return Err(CliError::Config("a range override applies to a single problem".into()));
    }

    let mut written = Vec::new();
    for problem in problems {
        let gen_opts = GenOptions {
            weight_seed: opts.weight_seed,
            ranges: ranges.clone(),
            ..GenOptions::seeded(opts.seed)
        };
        let splits = generate(problem, &gen_opts)?;
        let dir = opts.out_dir.join(problem.name());
        for data in splits.iter() {
            let path = dir.join(format!("{}.csv", data.split()));
            let bytes = data.to_csv_bytes();
            let checksum = sha256_hex(&bytes);
            write_atomic(&path, &bytes)?;
            let meta = DatasetMeta {
                problem: problem.name().to_string(),
                split: data.split(),
                rows: data.len(),
                input_names: data.input_names().to_vec(),
                target_name: data.target_name().to_string(),
                checksum: checksum.clone(),
                provenance: data.provenance().clone(),
                ground_truth: Some(splits.ground_truth.clone()),
            };
            write_json_atomic(&DatasetMeta::sidecar_path(&path), &meta)?;
            log::info!("wrote {} ({} rows)", path.display(), data.len());
            written.push(GeneratedFile {
                path,
                rows: data.len(),
                checksum,
            });
        }
        write_atomic(&dir.join("config.toml"), starter_config(problem, splits.test_ood.is_some()).as_bytes())?;
    }
    write_json_atomic(&opts.out_dir.join("catalog.json"), &catalog())?;
    Ok(written)
}

fn starter_config(problem: Problem, has_ood: bool) -> String {
    let mut s = format!(
        "[problem]\nname = \"{}\"\ntrain = \"train.csv\"\ntest_id = \"test_id.csv\"\n",
        problem.name()
    );
    if has_ood {
        s.push_str("test_ood = \"test_ood.csv\"\n");
    }
    s.push_str("\n[run]\nseed = 0\n\n[backend]\nkind = \"mutation\"\n");
    s
}
