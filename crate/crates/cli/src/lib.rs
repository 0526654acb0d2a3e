//! Command-line driver: builds a topographical map of a dataset's input
//! space (`map`), analyzes mutants against it (`mutate`), and exposes the
//! k-selection loop, graph export and pairwise scoring as standalone tools.

pub mod config;
mod map;
mod mutate;
mod tools;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use map::cmd_map;
pub use mutate::cmd_mutate;
pub use tools::{cmd_eval_pair, cmd_export_graph, cmd_select_k};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ALL_CANDIDATES_FAILED: i32 = 3;
pub const EXIT_PARTIAL_MUTANTS: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("every candidate configuration failed; see {0}")]
    AllCandidatesFailed(PathBuf),
    #[error("{failed} mutant(s) could not be analyzed; see {report}")]
    PartialMutants { failed: usize, report: PathBuf },
    #[error(transparent)]
    Core(#[from] topomap::Error),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::AllCandidatesFailed(_) => EXIT_ALL_CANDIDATES_FAILED,
            CliError::PartialMutants { .. } => EXIT_PARTIAL_MUTANTS,
            CliError::Core(_) | CliError::Other(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "topomap", version, about = "Topographical maps of a model's input space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Artifact directory; overrides `output` in the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for candidates and mutants (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the configuration seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the candidate configurations and persist the winning map.
    Map(RunArgs),
    /// Kill-test the configured mutants against a persisted map.
    Mutate {
        #[command(flatten)]
        run: RunArgs,
        /// Map directory (default: `<out>/map`).
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Run the k-selection loop for every candidate and report k*.
    SelectK(RunArgs),
    /// Export a persisted map as GEXF or DOT.
    ExportGraph {
        /// Map directory written by `map`.
        #[arg(long)]
        map: PathBuf,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "gexf")]
        format: String,
        /// Optional `strength.csv` written by `mutate`.
        #[arg(long)]
        strengths: Option<PathBuf>,
    },
    /// Weighted pairwise accuracy of predicted vs true labels (`row,label`
    /// CSVs), for one pair or all pairs.
    EvalPair {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, requires = "b")]
        a: Option<usize>,
        #[arg(long, requires = "a")]
        b: Option<usize>,
    },
}

/// Runs `f` on a rayon pool of `jobs` threads (rayon's default when unset).
pub(crate) fn with_pool<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Other(anyhow::anyhow!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub(crate) fn load_run(args: &RunArgs) -> Result<(config::RunConfig, PathBuf), CliError> {
    let mut cfg = config::RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = cfg.output_dir(args.out.as_deref())?;
    Ok((cfg, out))
}

pub(crate) fn core_validation(e: topomap::Error) -> CliError {
    CliError::Validation(e.to_string())
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Map(args) => cmd_map(&args).map(|_| ()),
        Command::Mutate { run, map } => cmd_mutate(&run, map.as_deref()).map(|_| ()),
        Command::SelectK(args) => cmd_select_k(&args),
        Command::ExportGraph {
            map,
            out,
            format,
            strengths,
        } => cmd_export_graph(&map, &out, &format, strengths.as_deref()),
        Command::EvalPair { pred, truth, a, b } => {
            let text = cmd_eval_pair(&pred, &truth, a.zip(b))?;
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
