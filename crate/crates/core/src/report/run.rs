//! Replay and sweep drivers.

use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::median;
use crate::engine::VolumeSim;
use crate::index::MemorySample;
use crate::model::{GcEvent, Lba, VolumeConfig, BLOCK_SIZE};
use crate::placement::{FifoAudit, SchemeDiagnostics, SchemeKind};
use crate::selection::SelectionPolicy;
use crate::workload::{
    annotate_bits, filter_volumes, gen_two_region, gen_zipf, parse_trace, split_volumes, volume_stats,
};
use crate::{Error, Result};

use super::config::{RunConfig, Source, SyntheticKind};

/// One volume's user-write stream.
#[derive(Clone, Debug)]
pub struct Volume {
    pub name: String,
    pub lbas: Vec<Lba>,
}

impl Volume {
    pub fn wss_blocks(&self) -> u64 {
        volume_stats(&self.name, &self.lbas).wss_blocks
    }
}

/// Loads the configured workload, applying the volume filter to traces.
pub fn load_volumes(cfg: &RunConfig) -> Result<Vec<Volume>> {
    match &cfg.source {
        Source::Trace { path, format, columns, wss_min_bytes, traffic_multiple } => {
            let file = File::open(path)?;
            let mut cols = format.columns();
            if let Some(c) = columns {
                cols = cols.with_overrides(c)?;
            }
            let all = split_volumes(parse_trace(BufReader::new(file), cols))?;
            let stats: Vec<_> = all.iter().map(|(name, lbas)| volume_stats(name, lbas)).collect();
            let keep = filter_volumes(&stats, wss_min_bytes / BLOCK_SIZE, *traffic_multiple);
            Ok(all
                .into_iter()
                .filter(|(name, _)| keep.contains(name))
                .map(|(name, lbas)| Volume { name, lbas })
                .collect())
        }
        Source::Synthetic { kind, spec, volumes } => (0..*volumes)
            .map(|v| {
                let mut s = spec.clone();
                s.seed = spec.seed.wrapping_add(v as u64);
                let lbas = match kind {
                    SyntheticKind::Zipf => gen_zipf(&s)?,
                    SyntheticKind::TwoRegion => gen_two_region(&s)?,
                };
                Ok(Volume { name: format!("syn{v}"), lbas })
            })
            .collect(),
    }
}

/// Result of replaying one volume.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub user_blocks: u64,
    pub gc_blocks: u64,
    pub gc_ops: u64,
    pub gc_log: Vec<GcEvent>,
    pub diagnostics: SchemeDiagnostics,
}

impl SimOutcome {
    pub fn write_amplification(&self) -> Result<f64> {
        if self.user_blocks == 0 {
            return Err(Error::NoUserWrites);
        }
        Ok((self.user_blocks + self.gc_blocks) as f64 / self.user_blocks as f64)
    }

    pub fn victim_gps(&self) -> Vec<f64> {
        self.gc_log.iter().flat_map(|e| e.victims.iter().map(|v| v.gp)).collect()
    }

    pub fn median_victim_gp(&self) -> Option<f64> {
        let mut gps = self.victim_gps();
        gps.sort_by(f64::total_cmp);
        median(&gps)
    }
}

/// Replays `lbas` under one scheme. Ideal placement runs with its own GC rule.
pub fn simulate(
    scheme: &SchemeKind,
    selector: SelectionPolicy,
    config: &VolumeConfig,
    lbas: &[Lba],
) -> Result<SimOutcome> {
    let annotation = scheme.needs_annotation().then(|| annotate_bits(lbas));
    let placement = scheme.build(config, annotation.as_deref())?;
    let mut sim = match scheme {
        SchemeKind::Ideal => VolumeSim::ideal(config.clone(), placement)?,
        _ => VolumeSim::with_gp_trigger(config.clone(), placement, selector)?,
    };
    sim.replay(lbas.iter().copied())?;
    Ok(SimOutcome {
        user_blocks: sim.user_blocks_written(),
        gc_blocks: sim.gc_blocks_written(),
        gc_ops: sim.gc_op_count(),
        diagnostics: sim.diagnostics(),
        gc_log: sim.gc_log().to_vec(),
    })
}

/// Memory use of the recency index over a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MemoryReport {
    Ok {
        samples: usize,
        worst_unique_lbas: usize,
        snapshot_unique_lbas: usize,
        worst_reduction: f64,
        snapshot_reduction: f64,
    },
    InsufficientData {
        samples: usize,
    },
}

/// Minimum number of ℓ updates for a memory report.
pub const MIN_MEMORY_SAMPLES: usize = 10;

/// Largest count after dropping the first tenth of the samples.
pub fn worst_case(counts: &[usize]) -> Option<usize> {
    counts[counts.len() / 10..].iter().copied().max()
}

pub fn memory_report(samples: &[MemorySample], wss_unique: u64) -> MemoryReport {
    let counts: Vec<usize> = samples.iter().map(|s| s.unique_lbas).collect();
    let (Some(worst), Some(&snapshot)) = (worst_case(&counts), counts.last()) else {
        return MemoryReport::InsufficientData { samples: counts.len() };
    };
    if counts.len() < MIN_MEMORY_SAMPLES || wss_unique == 0 {
        return MemoryReport::InsufficientData { samples: counts.len() };
    }
    let reduction = |c: usize| 1.0 - c as f64 / wss_unique as f64;
    MemoryReport::Ok {
        samples: counts.len(),
        worst_unique_lbas: worst,
        snapshot_unique_lbas: snapshot,
        worst_reduction: reduction(worst),
        snapshot_reduction: reduction(snapshot),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeResult {
    pub volume: String,
    pub wss_blocks: u64,
    pub user_blocks: u64,
    pub gc_blocks: u64,
    pub wa: f64,
    pub gc_op_count: u64,
    pub median_collected_gp: Option<f64>,
    pub memory: Option<MemoryReport>,
    pub fifo_audit: Option<FifoAudit>,
}

/// Per-volume results plus the aggregate over all volumes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayResult {
    pub volumes: Vec<VolumeResult>,
    pub aggregate: VolumeResult,
    #[serde(skip)]
    pub gc_logs: Vec<(String, Vec<GcEvent>)>,
}

fn run_volume(cfg: &RunConfig, vol: &Volume) -> Result<(VolumeResult, Vec<f64>, Vec<GcEvent>)> {
    let out = simulate(&cfg.scheme, cfg.selector, &cfg.volume_config(), &vol.lbas)?;
    let wss = vol.wss_blocks();
    let gps = out.victim_gps();
    let memory = cfg
        .scheme
        .sepbit_params()
        .filter(|p| p.index == crate::placement::IndexMode::Fifo && !matches!(cfg.scheme, SchemeKind::Gw(_)))
        .map(|_| memory_report(&out.diagnostics.memory_samples, wss));
    let result = VolumeResult {
        volume: vol.name.clone(),
        wss_blocks: wss,
        user_blocks: out.user_blocks,
        gc_blocks: out.gc_blocks,
        wa: out.write_amplification()?,
        gc_op_count: out.gc_ops,
        median_collected_gp: out.median_victim_gp(),
        memory,
        fifo_audit: out.diagnostics.fifo_audit,
    };
    Ok((result, gps, out.gc_log))
}

/// Replays pre-loaded volumes, `cfg.jobs` at a time.
pub fn replay_volumes(cfg: &RunConfig, volumes: &[Volume]) -> Result<ReplayResult> {
    cfg.validate()?;
    if volumes.is_empty() {
        return Err(Error::Degenerate("no volume passed the filter"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<Result<_>> = pool.install(|| volumes.par_iter().map(|v| run_volume(cfg, v)).collect());
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut all_gps: Vec<f64> = runs.iter().flat_map(|(_, gps, _)| gps.iter().copied()).collect();
    all_gps.sort_by(f64::total_cmp);
    let user: u64 = runs.iter().map(|(r, ..)| r.user_blocks).sum();
    let gc: u64 = runs.iter().map(|(r, ..)| r.gc_blocks).sum();
    let aggregate = VolumeResult {
        volume: "ALL".into(),
        wss_blocks: runs.iter().map(|(r, ..)| r.wss_blocks).sum(),
        user_blocks: user,
        gc_blocks: gc,
        wa: (user + gc) as f64 / user as f64,
        gc_op_count: runs.iter().map(|(r, ..)| r.gc_op_count).sum(),
        median_collected_gp: median(&all_gps),
        memory: None,
        fifo_audit: None,
    };
    let mut results = Vec::with_capacity(runs.len());
    let mut gc_logs = Vec::new();
    for (r, _, log) in runs {
        if cfg.gc_log {
            gc_logs.push((r.volume.clone(), log));
        }
        results.push(r);
    }
    Ok(ReplayResult { volumes: results, aggregate, gc_logs })
}

pub fn replay(cfg: &RunConfig) -> Result<ReplayResult> {
    cfg.validate()?;
    replay_volumes(cfg, &load_volumes(cfg)?)
}

/// Axes of a sweep; empty axes keep the base config's value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepGrid {
    pub schemes: Vec<SchemeKind>,
    pub selectors: Vec<SelectionPolicy>,
    pub segment_sizes: Vec<u64>,
    pub gp_thresholds: Vec<f64>,
    pub alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme: String,
    pub selector: String,
    pub segment_size: u64,
    pub gp_threshold: f64,
    pub alpha: Option<f64>,
    pub result: VolumeResult,
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

/// Runs every cell of the grid in order, handing each aggregate row to
/// `on_row` as soon as it is ready. Workloads are generated once per skewness.
pub fn sweep<F>(base: &RunConfig, grid: &SweepGrid, mut on_row: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&SweepRow) -> Result<()>,
{
    base.validate()?;
    let base_alpha = match &base.source {
        Source::Synthetic { spec, .. } => Some(spec.alpha),
        Source::Trace { .. } => None,
    };
    if base_alpha.is_none() && !grid.alphas.is_empty() {
        return Err(Error::Config("the alpha axis needs a synthetic workload".into()));
    }
    let mut rows = Vec::new();
    for alpha in axis(&grid.alphas, base_alpha.unwrap_or(f64::NAN)) {
        let mut workload = base.clone();
        if let Source::Synthetic { spec, .. } = &mut workload.source {
            spec.alpha = alpha;
        }
        let volumes = load_volumes(&workload)?;
        for scheme in axis(&grid.schemes, base.scheme.clone()) {
            for &selector in &axis(&grid.selectors, base.selector) {
                for &segment_size in &axis(&grid.segment_sizes, base.segment_size) {
                    for &gp_threshold in &axis(&grid.gp_thresholds, base.gp_threshold) {
                        let cell = RunConfig {
                            scheme: scheme.clone(),
                            selector,
                            segment_size,
                            gp_threshold,
                            gc_log: false,
                            ..workload.clone()
                        };
                        let result = replay_volumes(&cell, &volumes)?.aggregate;
                        let row = SweepRow {
                            scheme: scheme.to_string(),
                            selector: selector.to_string(),
                            segment_size,
                            gp_threshold,
                            alpha: base_alpha.map(|_| alpha),
                            result,
                        };
                        on_row(&row)?;
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(rows)
}
