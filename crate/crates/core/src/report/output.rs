//! Result files: `results.csv`, `results.json`, `run_config.txt` and optional
//! per-volume GC logs. Nothing time-dependent is written, so identical runs
//! give identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::write_gc_log;
use crate::Result;

use super::config::RunConfig;
use super::run::{MemoryReport, ReplayResult, SweepRow, VolumeResult};

pub const SCHEMA_VERSION: u32 = 1;

const RESULT_COLUMNS: &str = "volume,wss_blocks,user_blocks,gc_blocks,wa,gc_ops,median_collected_gp,\
memory_status,memory_worst_unique,memory_snapshot_unique,memory_worst_reduction,memory_snapshot_reduction,\
fifo_compared,fifo_divergent";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn result_fields(r: &VolumeResult) -> String {
    let memory = match &r.memory {
        None => ",,,,".to_string(),
        Some(MemoryReport::InsufficientData { .. }) => "insufficient data,,,,".to_string(),
        Some(MemoryReport::Ok {
            worst_unique_lbas,
            snapshot_unique_lbas,
            worst_reduction,
            snapshot_reduction,
            ..
        }) => format!("ok,{worst_unique_lbas},{snapshot_unique_lbas},{worst_reduction},{snapshot_reduction}"),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.volume,
        r.wss_blocks,
        r.user_blocks,
        r.gc_blocks,
        r.wa,
        r.gc_op_count,
        opt(r.median_collected_gp),
        memory,
        opt(r.fifo_audit.map(|a| a.compared)),
        opt(r.fifo_audit.map(|a| a.divergent)),
    )
}

/// One row per volume followed by the `ALL` aggregate.
pub fn results_csv(res: &ReplayResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RESULT_COLUMNS}");
    for r in res.volumes.iter().chain(std::iter::once(&res.aggregate)) {
        let _ = writeln!(out, "{}", result_fields(r));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    volumes: &'a [VolumeResult],
    aggregate: &'a VolumeResult,
}

pub fn results_json(cfg: &RunConfig, res: &ReplayResult) -> Result<String> {
    let report = JsonReport { schema_version: SCHEMA_VERSION, config: cfg, volumes: &res.volumes, aggregate: &res.aggregate };
    serde_json::to_string_pretty(&report).map_err(|e| crate::Error::Config(e.to_string()))
}

pub fn sweep_csv_header() -> String {
    format!("scheme,selector,segment_size,gp_threshold,alpha,{RESULT_COLUMNS}")
}

pub fn sweep_csv_row(row: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        row.scheme,
        row.selector,
        row.segment_size,
        row.gp_threshold,
        opt(row.alpha),
        result_fields(&row.result)
    )
}

/// Writes all result files into `dir` and returns their paths.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, res: &ReplayResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &[u8]| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("results.csv".into(), results_csv(res).as_bytes())?;
    put("results.json".into(), results_json(cfg, res)?.as_bytes())?;
    put("run_config.txt".into(), cfg.to_text().as_bytes())?;
    for (volume, log) in &res.gc_logs {
        let mut buf = Vec::new();
        write_gc_log(log, &mut buf)?;
        put(format!("gc_log_{volume}.csv"), &buf)?;
    }
    Ok(written)
}
