use std::path::{Path, PathBuf};

use eqswarm_core::benchmarks::BenchError;
use eqswarm_core::data::DataError;
use eqswarm_core::discovery::DiscoveryError;
use eqswarm_core::fit::FitError;
use eqswarm_core::generators::BackendError;
use eqswarm_core::metrics::MetricError;
use eqswarm_core::ExprError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Catalog(String),
    #[error("parse error: {0}")]
    Parse(#[from] ExprError),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("backend error: {0}")]
    Backend(#[from] BackendError),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint {}: {reason}", path.display())]
    CorruptCheckpoint { path: PathBuf, reason: String },
    #[error("run log missing: {}", .0.display())]
    MissingLog(PathBuf),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("run interrupted; checkpoint written to {}", .0.display())]
    Interrupted(PathBuf),
}

impl CliError {
    /// Process exit status: 2 for configuration and input errors, 3 for
    /// backend failures, 4 for file-system and artifact errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Catalog(_)
            | CliError::Parse(_)
            | CliError::Schema(_)
            | CliError::VersionMismatch { .. } => 2,
            CliError::Backend(_) => 3,
            CliError::CorruptCheckpoint { .. } | CliError::MissingLog(_) | CliError::Io { .. } => 4,
            CliError::Interrupted(_) => 130,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<DiscoveryError> for CliError {
    fn from(e: DiscoveryError) -> Self {
        match e {
            DiscoveryError::Backend(b) => CliError::Backend(b),
            DiscoveryError::Expr(x) => CliError::Parse(x),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Catalog { .. } => CliError::Catalog(e.to_string()),
            BenchError::Schema(m) => CliError::Schema(m),
            BenchError::Data(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Schema(other.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Expr(x) => CliError::Parse(x),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Expr(x) => CliError::Parse(x),
            other => CliError::Schema(other.to_string()),
        }
    }
}
