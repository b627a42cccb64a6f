//! Appending results and traces to CSV files.

use std::fs::{self, OpenOptions};
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::run::JobResult;
use crate::CliError;

pub const RESULTS_FILE: &str = "results.csv";
pub const TRACE_FILE: &str = "trace.csv";

pub const RESULTS_HEADER: [&str; 10] =
    ["config_hash", "run_id", "kind", "snr_db", "n_half", "seed", "value_bits", "stderr_bits", "iters", "wall_ms"];
pub const TRACE_HEADER: [&str; 11] =
    ["config_hash", "run_id", "kind", "snr_db", "seed", "iter", "bound_bits", "stderr_bits", "gamma", "wall_ms", "kept"];

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn opt(v: f64, fmt: impl Fn(f64) -> String) -> String {
    if v.is_nan() {
        String::new()
    } else {
        fmt(v)
    }
}

/// One more than the largest run id already recorded for `hash`, or 1.
pub fn next_run_id(dir: &Path, hash: &str) -> Result<u64, CliError> {
    let path = dir.join(RESULTS_FILE);
    if !path.exists() {
        return Ok(1);
    }
    let mut rd = csv::Reader::from_path(&path).map_err(|e| io(&path, e))?;
    let header = rd.headers().map_err(|e| io(&path, e))?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(io(&path, "existing file has a different header; refusing to append"));
    }
    let mut last = 0;
    for rec in rd.records() {
        let rec = rec.map_err(|e| io(&path, e))?;
        if &rec[0] == hash {
            let id: u64 = rec[1].parse().map_err(|_| io(&path, format!("bad run_id '{}'", &rec[1])))?;
            last = last.max(id);
        }
    }
    Ok(last + 1)
}

fn appender(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(header).map_err(|e| io(path, e))?;
    }
    Ok(w)
}

/// Appends every result and trace row under a new run id and returns it.
/// The canonical config is saved next to the CSVs as `<hash>.conf`.
pub fn write_all(dir: &Path, cfg: &ExperimentConfig, results: &[JobResult]) -> Result<u64, CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let hash = cfg.hash();
    let run_id = next_run_id(dir, &hash)?;
    let conf = dir.join(format!("{hash}.conf"));
    if !conf.exists() {
        fs::write(&conf, cfg.canonical()).map_err(|e| io(&conf, e))?;
    }

    let path = dir.join(RESULTS_FILE);
    let mut w = appender(&path, &RESULTS_HEADER)?;
    for r in results {
        w.write_record([
            hash.clone(),
            run_id.to_string(),
            r.job.kind.as_str().to_string(),
            r.job.snr_db.to_string(),
            r.n_half.to_string(),
            r.job.seed.to_string(),
            format!("{:.9}", r.value_bits),
            opt(r.stderr_bits, |v| format!("{v:.3e}")),
            r.iters.to_string(),
            format!("{:.1}", r.wall_ms),
        ])
        .map_err(|e| io(&path, e))?;
    }
    w.flush().map_err(|e| io(&path, e))?;

    let path = dir.join(TRACE_FILE);
    let mut w = appender(&path, &TRACE_HEADER)?;
    for r in results {
        for t in &r.trace {
            w.write_record([
                hash.clone(),
                run_id.to_string(),
                r.job.kind.as_str().to_string(),
                r.job.snr_db.to_string(),
                r.job.seed.to_string(),
                t.iter.to_string(),
                format!("{:.9}", t.bound_bits),
                opt(t.stderr_bits, |v| format!("{v:.3e}")),
                opt(t.gamma, |v| v.to_string()),
                format!("{:.1}", t.wall_ms),
                t.kept.to_string(),
            ])
            .map_err(|e| io(&path, e))?;
        }
    }
    w.flush().map_err(|e| io(&path, e))?;
    Ok(run_id)
}
