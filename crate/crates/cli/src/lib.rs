//! Experiment runner behind the `memrate` binary.
//!
//! A run reads a flat config (or a bundled recipe), fans its jobs out to a
//! worker pool and appends the bounds to `results.csv` and the optimizer
//! traces to `trace.csv` in the output directory.

pub mod config;
pub mod output;
pub mod recipes;
pub mod run;

use std::fmt;
use std::path::{Path, PathBuf};

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use recipes::{list_recipes, recipe};
pub use run::{plan, run_all, run_job, Job, JobResult};

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Run(memrate::Error),
    Io(String),
}

impl CliError {
    /// Process exit status: 2 for config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Run(e) => write!(f, "run failed: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<memrate::Error> for CliError {
    fn from(e: memrate::Error) -> Self {
        CliError::Run(e)
    }
}

/// Exit status for numeric warnings under `--strict`.
pub const EXIT_STRICT: i32 = 3;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub strict: bool,
    pub dry_run: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// `None` for a dry run.
    pub run_id: Option<u64>,
    pub hash: String,
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self, strict: bool) -> i32 {
        if strict && !self.warnings.is_empty() {
            EXIT_STRICT
        } else {
            0
        }
    }
}

/// Loads `name` as a config file, or as a bundled recipe name when no such
/// file exists.
pub fn load_config(name: &str) -> Result<ExperimentConfig, CliError> {
    let path = Path::new(name);
    let text = if path.exists() {
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{name}: {e}")))?
    } else if let Some(r) = recipe(name) {
        r.to_string()
    } else {
        return Err(CliError::Config(ConfigError {
            field: "<config>".into(),
            line: None,
            msg: format!("no file or bundled recipe named '{name}'"),
        }));
    };
    Ok(ExperimentConfig::parse(&text)?)
}

/// Worker count: the flag, then `MEMRATE_THREADS`, then the machine.
pub fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    let bad = |v: String| CliError::Config(ConfigError { field: "MEMRATE_THREADS".into(), line: None, msg: format!("expected a positive integer, got '{v}'") });
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var("MEMRATE_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(bad(v)),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Applies the command-line overrides, then runs (or only describes) the
/// experiment.
pub fn execute(mut cfg: ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    if let Some(o) = &opts.out {
        cfg.out_dir = o.display().to_string();
    }
    let threads = thread_count(opts.threads)?;
    let hash = cfg.hash();
    if opts.dry_run {
        let lines = run::describe(&cfg, threads).lines().map(str::to_string).collect();
        return Ok(Outcome { run_id: None, hash, lines, warnings: Vec::new() });
    }
    let results = run_all(&cfg, threads)?;
    let run_id = output::write_all(Path::new(&cfg.out_dir), &cfg, &results)?;
    let mut lines = vec![format!("config {hash} run {run_id} -> {}", cfg.out_dir)];
    lines.extend(run::summarize(&cfg, &results));
    let warnings = results
        .iter()
        .flat_map(|r| r.warnings.iter().map(move |w| format!("{} snr {} seed {}: {w}", r.job.kind.as_str(), r.job.snr_db, r.job.seed)))
        .collect();
    Ok(Outcome { run_id: Some(run_id), hash, lines, warnings })
}
