use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use eqswarm_cli::artifacts::{write_json_atomic, CHECKPOINT_FILE};
use eqswarm_cli::{
    cmd_bench_gen, cmd_eval, cmd_report, cmd_resume, cmd_run, BenchGenOptions, CliError, EvalOptions, Overrides,
    RunOptions, RunStatus,
};
use eqswarm_core::data::Split;
use eqswarm_core::discovery::Ablation;

#[derive(Parser)]
#[command(name = "eqswarm", version, about = "Collective symbolic equation discovery")]
struct Cli {
    /// Random seed (overrides the configuration file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log progress at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Output directory (or output file for `eval`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationArg {
    None,
    Msi,
    NoAst,
}

impl From<AblationArg> for Ablation {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::None => Ablation::None,
            AblationArg::Msi => Ablation::Msi,
            AblationArg::NoAst => Ablation::NoAst,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the splits of a synthetic benchmark (`all` for every one).
    BenchGen {
        problem: String,
        /// Seed for the NNN network weights.
        #[arg(long)]
        weight_seed: Option<u64>,
        /// JSON file replacing the sampling ranges.
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Run discovery from a configuration file.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        ablation: Option<AblationArg>,
        /// Independent repetitions with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Checkpoint and exit after this iteration.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Continue a run from its checkpoint file or run directory.
    Resume {
        checkpoint: PathBuf,
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Evaluate an expression on one or more datasets.
    Eval {
        #[arg(long)]
        expr: String,
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        /// Comma-separated parameter values; fitted when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        /// Dataset to fit parameters on (defaults to the first --data).
        #[arg(long)]
        train: Option<PathBuf>,
        /// Split label for files without metadata.
        #[arg(long)]
        split: Option<Split>,
    },
    /// Write convergence, OOD-trace and error-curve files for a run.
    Report { run_dir: PathBuf },
}

fn print_status(s: &RunStatus) {
    match s {
        RunStatus::Completed { run_dir, manifest } => {
            println!("completed: {}", run_dir.display());
            println!("best: {}  score {}", manifest.outcome.best_expr, manifest.outcome.best_score);
            for m in &manifest.outcome.metrics {
                println!("{}: wmape={} nmse={} mae={}", m.split, m.wmape, m.nmse, m.mae);
            }
        }
        RunStatus::Stopped { run_dir, iteration } => {
            println!("stopped after iteration {iteration}; resume with: eqswarm resume {}", run_dir.display())
        }
        RunStatus::AlreadyComplete { run_dir } => println!("run in {} is already complete", run_dir.display()),
    }
}

fn dispatch(cli: Cli, stop: &AtomicBool) -> Result<(), CliError> {
    match cli.command {
        Command::BenchGen {
            problem,
            weight_seed,
            ranges,
        } => {
            let opts = BenchGenOptions {
                problem,
                seed: cli.seed.unwrap_or(0),
                out_dir: cli.out.unwrap_or_else(|| PathBuf::from("data")),
                weight_seed,
                ranges,
            };
            for f in cmd_bench_gen(&opts)? {
                println!("{}\t{} rows\tsha256 {}", f.path.display(), f.rows, f.checksum);
            }
        }
        Command::Run {
            config,
            ablation,
            repeats,
            stop_after,
        } => {
            let ov = Overrides {
                seed: cli.seed,
                ablation: ablation.map(Into::into),
                out_dir: cli.out,
            };
            for s in cmd_run(&config, &ov, &RunOptions { stop_after, repeats }, stop)? {
                print_status(&s);
            }
        }
        Command::Resume { checkpoint, stop_after } => {
            let path = if checkpoint.is_dir() {
                checkpoint.join(CHECKPOINT_FILE)
            } else {
                checkpoint
            };
            let s = cmd_resume(&path, &RunOptions { stop_after, repeats: 1 }, stop)?;
            print_status(&s);
        }
        Command::Eval {
            expr,
            data,
            params,
            train,
            split,
        } => {
            let report = cmd_eval(&EvalOptions {
                expr_text: expr,
                data,
                params,
                train,
                split,
                ..EvalOptions::default()
            })?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if let Some(out) = cli.out {
                write_json_atomic(&out, &report)?;
            }
        }
        Command::Report { run_dir } => {
            let files = cmd_report(&run_dir)?;
            println!("{}", files.summary.display());
            println!("{}", files.convergence.display());
            if let Some(p) = &files.ood_trace {
                println!("{}", p.display());
            }
            for p in &files.curves {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        log::warn!("cannot install signal handler: {e}");
    }

    match dispatch(cli, &stop) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
