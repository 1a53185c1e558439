use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::benchmarks::VarRange;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("column `{name}` has {got} rows, expected {expected}")]
    RaggedColumn {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("non-numeric cell at row {row}, column `{col}`: `{cell}`")]
    NonNumericCell { row: usize, col: String, cell: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    TestId,
    TestOod,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::TestId, Split::TestOod];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestId => "test_id",
            Split::TestOod => "test_ood",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test_id" | "test" => Ok(Split::TestId),
            "test_ood" | "ood" => Ok(Split::TestOod),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        generator: String,
        seed: u64,
        ranges: Vec<VarRange>,
        #[serde(default)]
        constants: BTreeMap<String, f64>,
    },
    File {
        path: String,
        checksum: String,
    },
    Inline,
}

/// Named real-valued input columns plus one target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_names: Vec<String>,
    target_name: String,
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    split: Split,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        input_names: Vec<String>,
        target_name: impl Into<String>,
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        split: Split,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if input_names.len() != columns.len() {
            return Err(DataError::Schema(format!(
                "{} names for {} columns",
                input_names.len(),
                columns.len()
            )));
        }
        for (name, col) in input_names.iter().zip(&columns) {
            if col.len() != target.len() {
                return Err(DataError::RaggedColumn {
                    name: name.clone(),
                    expected: target.len(),
                    got: col.len(),
                });
            }
        }
        Ok(Dataset {
            input_names,
            target_name: target_name.into(),
            columns,
            target,
            split,
            provenance,
        })
    }

    /// Builds a dataset from row-major input tuples.
    pub fn from_rows(
        input_names: Vec<String>,
        target_name: impl Into<String>,
        rows: &[Vec<f64>],
        target: Vec<f64>,
    ) -> Result<Self, DataError> {
        let mut columns = vec![Vec::with_capacity(rows.len()); input_names.len()];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != input_names.len() {
                return Err(DataError::Schema(format!(
                    "row {i} has {} values, expected {}",
                    row.len(),
                    input_names.len()
                )));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Dataset::new(
            input_names,
            target_name,
            columns,
            target,
            Split::Train,
            Provenance::Inline,
        )
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let i = self.input_names.iter().position(|n| n == name)?;
        Some(&self.columns[i])
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// First `n` rows (or all rows if fewer).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            input_names: self.input_names.clone(),
            target_name: self.target_name.clone(),
            columns: self.columns.iter().map(|c| c[..n].to_vec()).collect(),
            target: self.target[..n].to_vec(),
            split: self.split,
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.input_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        out.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[i].to_string()));
            record.push(self.target[i].to_string());
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Reads a CSV whose last column is the target.
    pub fn read_csv<R: Read>(r: R, split: Split, provenance: Provenance) -> Result<Self, DataError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(DataError::Schema(format!(
                "need at least one input and one target column, header has {}",
                header.len()
            )));
        }
        let n_inputs = header.len() - 1;
        let mut columns = vec![Vec::new(); n_inputs];
        let mut target = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                    row: row + 1,
                    col: header[j].clone(),
                    cell: cell.to_string(),
                })?;
                if j < n_inputs {
                    columns[j].push(v);
                } else {
                    target.push(v);
                }
            }
        }
        let target_name = header[n_inputs].clone();
        let mut input_names = header;
        input_names.truncate(n_inputs);
        Dataset::new(input_names, target_name, columns, target, split, provenance)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
