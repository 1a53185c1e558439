//! Command-line front end: benchmark generation, configured discovery runs
//! with logging and checkpoint/resume, stand-alone evaluation and reports.

pub mod artifacts;
pub mod bench;
pub mod config;
pub mod error;
pub mod eval;
pub mod report;
pub mod run;

pub use bench::{cmd_bench_gen, BenchGenOptions, GeneratedFile};
pub use config::{load_config, ConfigFile, Overrides, ResolvedConfig};
pub use error::CliError;
pub use eval::{cmd_eval, EvalOptions, EvalReport};
pub use report::{cmd_report, ReportFiles};
pub use run::{cmd_resume, cmd_run, RunOptions, RunStatus};
