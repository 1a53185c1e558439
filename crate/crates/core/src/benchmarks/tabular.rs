use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{lookup, BenchError};
use crate::data::{sha256_hex, DataError, Dataset, Provenance, Split};

/// Expected layout of a comma-separated dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSchema {
    /// Catalog problem name, used to check published row counts.
    #[serde(default)]
    pub problem: Option<String>,
    pub input_names: Vec<String>,
    pub target_name: String,
    pub split: Split,
}

impl TabularSchema {
    /// Schema of a cataloged problem.
    pub fn for_problem(name: &str, split: Split) -> Result<Self, BenchError> {
        let e = lookup(name)?;
        Ok(TabularSchema {
            problem: Some(e.name.clone()),
            input_names: e.var_names.clone(),
            target_name: e.target_name.clone(),
            split,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTable {
    pub dataset: Dataset,
    pub checksum: String,
    /// Row-count mismatches against the catalog; not fatal.
    pub warnings: Vec<String>,
}

/// Sidecar metadata written next to every generated dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub problem: String,
    pub split: Split,
    pub rows: usize,
    pub input_names: Vec<String>,
    pub target_name: String,
    pub checksum: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
}

impl DatasetMeta {
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        let mut name = csv_path
            .file_stem()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(".meta.json");
        csv_path.with_file_name(name)
    }

    pub fn read_for(csv_path: &Path) -> Option<DatasetMeta> {
        let text = fs::read_to_string(Self::sidecar_path(csv_path)).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// Loads a comma-separated file whose header must equal the schema's input
/// names followed by its target name.
pub fn load_tabular(path: &Path, schema: &TabularSchema) -> Result<LoadedTable, BenchError> {
    let bytes = fs::read(path).map_err(DataError::from)?;
    let checksum = sha256_hex(&bytes);
    let provenance = Provenance::File {
        path: path.display().to_string(),
        checksum: checksum.clone(),
    };
    let dataset = Dataset::read_csv(&bytes[..], schema.split, provenance)?;

    let mut expected = schema.input_names.clone();
    expected.push(schema.target_name.clone());
    let mut found = dataset.input_names().to_vec();
    found.push(dataset.target_name().to_string());
    if expected != found {
        return Err(BenchError::Schema(format!(
            "{}: header [{}] does not match schema [{}]",
            path.display(),
            found.join(", "),
            expected.join(", ")
        )));
    }

    let mut warnings = Vec::new();
    if let Some(problem) = &schema.problem {
        let entry = lookup(problem)?;
        let want = match schema.split {
            Split::Train => entry.counts.train,
            Split::TestId => entry.counts.test_id,
            Split::TestOod => entry.counts.test_ood,
        };
        if let Some(want) = want {
            if want != dataset.len() {
                let msg = format!(
                    "{}: {} {} split has {} rows, catalog lists {}",
                    path.display(),
                    entry.name,
                    schema.split,
                    dataset.len(),
                    want
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    Ok(LoadedTable {
        dataset,
        checksum,
        warnings,
    })
}
