//! Flat `key=value` run configuration.
//!
//! Every key accepted in a config file is also accepted as an environment
//! variable `LOGSIM_<KEY>` (upper-case) and as a CLI flag. Later sources win:
//! file, then environment, then flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{VolumeConfig, BLOCK_SIZE, GIB, MIB};
use crate::placement::{AgeThresholds, IndexMode, SchemeKind, SepBitParams};
use crate::selection::SelectionPolicy;
use crate::workload::{SyntheticSpec, TraceFormat};
use crate::{Error, Result};

pub const ENV_PREFIX: &str = "LOGSIM_";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticKind {
    Zipf,
    TwoRegion,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zipf" => Ok(SyntheticKind::Zipf),
            "two-region" | "two_region" => Ok(SyntheticKind::TwoRegion),
            other => Err(Error::Config(format!("unknown synthetic workload `{other}`"))),
        }
    }
}

impl std::fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SyntheticKind::Zipf => "zipf",
            SyntheticKind::TwoRegion => "two-region",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Source {
    Trace {
        path: PathBuf,
        format: TraceFormat,
        columns: Option<String>,
        wss_min_bytes: u64,
        traffic_multiple: f64,
    },
    Synthetic {
        kind: SyntheticKind,
        spec: SyntheticSpec,
        volumes: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub selector: SelectionPolicy,
    pub segment_size: u64,
    pub gp_threshold: f64,
    /// Defaults to the segment size.
    pub gc_retrieval: Option<u64>,
    pub classes: u32,
    pub source: Source,
    pub out_dir: Option<PathBuf>,
    pub gc_log: bool,
    pub jobs: usize,
}

impl Default for RunConfig {
    /// SepBIT with Greedy selection on the desk-scale two-region workload.
    fn default() -> Self {
        let spec = SyntheticSpec::default();
        RunConfig {
            scheme: SchemeKind::sepbit(),
            selector: SelectionPolicy::Greedy,
            segment_size: desk_segment_bytes(spec.wss_blocks),
            gp_threshold: 0.15,
            gc_retrieval: None,
            classes: 6,
            source: Source::Synthetic { kind: SyntheticKind::TwoRegion, spec, volumes: 1 },
            out_dir: None,
            gc_log: false,
            jobs: 1,
        }
    }
}

/// Segment size keeping the ratio of a 512 MiB segment to a 50 GiB working
/// set: one hundredth of the WSS, rounded up to whole blocks.
pub fn desk_segment_bytes(wss_blocks: u64) -> u64 {
    wss_blocks.div_ceil(100).max(1) * BLOCK_SIZE
}

/// Parses a byte count with an optional binary suffix (`K`, `KiB`, `M`,
/// `MiB`, `G`, `GiB`).
pub fn parse_bytes(s: &str) -> Result<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let mult = match unit.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1,
        "k" | "kib" => 1 << 10,
        "m" | "mib" => MIB,
        "g" | "gib" => GIB,
        "t" | "tib" => GIB << 10,
        other => return Err(Error::Config(format!("unknown size unit `{other}` in `{s}`"))),
    };
    if let Ok(n) = num.parse::<u64>() {
        return n.checked_mul(mult).ok_or_else(|| Error::Config(format!("size `{s}` overflows")));
    }
    let x: f64 = num.parse().map_err(|_| Error::Config(format!("bad size `{s}`")))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Config(format!("bad size `{s}`")));
    }
    Ok((x * mult as f64).round() as u64)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{value}` for `{key}`"))),
    }
}

/// Keys in serialization order.
pub const KEYS: &[&str] = &[
    "trace",
    "format",
    "columns",
    "wss_min",
    "traffic_multiple",
    "synthetic",
    "wss",
    "alpha",
    "traffic",
    "hot_fraction",
    "churn_period",
    "volumes",
    "seed",
    "scheme",
    "selector",
    "segment_size",
    "gp_threshold",
    "gc_retrieval",
    "classes",
    "sepbit_thresholds",
    "sepbit_scale",
    "sepbit_index",
    "out_dir",
    "gc_log",
    "jobs",
];

impl RunConfig {
    pub fn volume_config(&self) -> VolumeConfig {
        VolumeConfig {
            segment_size: self.segment_size,
            gp_threshold: self.gp_threshold,
            gc_retrieval_bytes: self.gc_retrieval.unwrap_or(self.segment_size),
            num_classes: self.classes,
            ..VolumeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.volume_config().validate()?;
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        match &self.source {
            Source::Synthetic { spec, volumes, .. } => {
                spec.validate()?;
                if *volumes == 0 {
                    return Err(Error::Config("at least one synthetic volume is required".into()));
                }
            }
            Source::Trace { traffic_multiple, .. } => {
                if !(*traffic_multiple >= 0.0) {
                    return Err(Error::Config("traffic multiple must be non-negative".into()));
                }
            }
        }
        if let Some(p) = self.scheme.sepbit_params() {
            crate::placement::SepBit::new(crate::placement::SepBitVariant::Full, p.clone())?;
        }
        Ok(())
    }

    fn sepbit_params_mut(&mut self) -> SepBitParams {
        self.scheme.sepbit_params().cloned().unwrap_or_default()
    }

    fn trace_source(&mut self) -> &mut Source {
        if !matches!(self.source, Source::Trace { .. }) {
            self.source = Source::Trace {
                path: PathBuf::new(),
                format: TraceFormat::Native,
                columns: None,
                wss_min_bytes: 10 * GIB,
                traffic_multiple: 2.0,
            };
        }
        &mut self.source
    }

    fn synthetic_source(&mut self) -> Result<(&mut SyntheticKind, &mut SyntheticSpec, &mut u32)> {
        match &mut self.source {
            Source::Synthetic { kind, spec, volumes } => Ok((kind, spec, volumes)),
            Source::Trace { .. } => Err(Error::Config("synthetic workload keys conflict with `trace`".into())),
        }
    }

    /// Sets one key. Scheme parameters set before `scheme` are kept when the
    /// scheme changes between SepBIT variants.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "scheme" => {
                let params = self.sepbit_params_mut();
                self.scheme = parse::<SchemeKind>(&key, value)
                    .map_err(|_| Error::Config(format!("unknown scheme `{value}`")))?
                    .with_sepbit_params(params);
            }
            "selector" => {
                self.selector = value.parse().map_err(|_| Error::Config(format!("unknown selector `{value}`")))?
            }
            "segment_size" => self.segment_size = parse_bytes(value)?,
            "gp_threshold" => self.gp_threshold = parse(&key, value)?,
            "gc_retrieval" => {
                self.gc_retrieval = if value.is_empty() || value == "segment" { None } else { Some(parse_bytes(value)?) }
            }
            "classes" => self.classes = parse(&key, value)?,
            "sepbit_thresholds" | "sepbit_scale" | "sepbit_index" => {
                let mut p = self.sepbit_params_mut();
                match key.as_str() {
                    "sepbit_thresholds" => p.thresholds = value.parse::<AgeThresholds>()?,
                    "sepbit_scale" => p.scale = parse(&key, value)?,
                    _ => p.index = value.parse::<IndexMode>()?,
                }
                self.scheme = std::mem::replace(&mut self.scheme, SchemeKind::NoSep).with_sepbit_params(p);
            }
            "trace" => {
                if let Source::Trace { path, .. } = self.trace_source() {
                    *path = PathBuf::from(value);
                }
            }
            "format" | "columns" | "wss_min" | "traffic_multiple" => {
                let parsed_format = if key == "format" { Some(value.parse::<TraceFormat>()?) } else { None };
                let wss = if key == "wss_min" { Some(parse_bytes(value)?) } else { None };
                let mult = if key == "traffic_multiple" { Some(parse::<f64>(&key, value)?) } else { None };
                if let Source::Trace { format, columns, wss_min_bytes, traffic_multiple, .. } = self.trace_source() {
                    match key.as_str() {
                        "format" => *format = parsed_format.unwrap_or(*format),
                        "columns" => *columns = (!value.is_empty()).then(|| value.to_string()),
                        "wss_min" => *wss_min_bytes = wss.unwrap_or(*wss_min_bytes),
                        _ => *traffic_multiple = mult.unwrap_or(*traffic_multiple),
                    }
                }
            }
            "synthetic" => *self.synthetic_source()?.0 = value.parse()?,
            "wss" => {
                let bytes = parse_bytes(value)?;
                let default_segment = self.segment_size;
                let spec = self.synthetic_source()?.1;
                // Traffic, churn and a default-sized segment keep their ratio
                // to the working set.
                let old_blocks = spec.wss_blocks;
                let old = old_blocks.max(1) as f64;
                spec.wss_blocks = bytes / BLOCK_SIZE;
                let new_blocks = spec.wss_blocks;
                let ratio = spec.wss_blocks as f64 / old;
                spec.total_writes = (spec.total_writes as f64 * ratio).round() as u64;
                spec.churn_period = ((spec.churn_period as f64 * ratio).round() as u64).max(1);
                if default_segment == desk_segment_bytes(old_blocks) {
                    self.segment_size = desk_segment_bytes(new_blocks);
                }
            }
            "alpha" => self.synthetic_source()?.1.alpha = parse(&key, value)?,
            "traffic" => {
                let mult: f64 = parse(&key, value)?;
                let spec = self.synthetic_source()?.1;
                spec.total_writes = (mult * spec.wss_blocks as f64).round() as u64;
            }
            "total_writes" => self.synthetic_source()?.1.total_writes = parse(&key, value)?,
            "hot_fraction" => self.synthetic_source()?.1.hot_fraction = parse(&key, value)?,
            "churn_period" => self.synthetic_source()?.1.churn_period = parse_bytes(value)? / BLOCK_SIZE,
            "volumes" => *self.synthetic_source()?.2 = parse(&key, value)?,
            "seed" => self.synthetic_source()?.1.seed = parse(&key, value)?,
            "out_dir" => self.out_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "gc_log" => self.gc_log = parse_bool(&key, value)?,
            "jobs" => self.jobs = parse(&key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies `LOGSIM_<KEY>` variables in key order.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let vars: std::collections::HashMap<String, String> = vars.into_iter().collect();
        for key in KEYS.iter().chain(&["total_writes"]) {
            if let Some(v) = vars.get(&format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())) {
                self.set(key, v)?;
            }
        }
        Ok(())
    }

    /// Serializes every key, such that [`RunConfig::from_text`] reproduces
    /// this config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        match &self.source {
            Source::Trace { path, format, columns, wss_min_bytes, traffic_multiple } => {
                kv("trace", path.display().to_string());
                kv("format", format.to_string());
                kv("columns", columns.clone().unwrap_or_default());
                kv("wss_min", wss_min_bytes.to_string());
                kv("traffic_multiple", traffic_multiple.to_string());
            }
            Source::Synthetic { kind, spec, volumes } => {
                kv("synthetic", kind.to_string());
                kv("wss", (spec.wss_blocks * BLOCK_SIZE).to_string());
                kv("alpha", spec.alpha.to_string());
                kv("total_writes", spec.total_writes.to_string());
                kv("hot_fraction", spec.hot_fraction.to_string());
                kv("churn_period", (spec.churn_period * BLOCK_SIZE).to_string());
                kv("volumes", volumes.to_string());
                kv("seed", spec.seed.to_string());
            }
        }
        kv("scheme", self.scheme.to_string());
        kv("selector", self.selector.to_string());
        kv("segment_size", self.segment_size.to_string());
        kv("gp_threshold", self.gp_threshold.to_string());
        kv("gc_retrieval", self.gc_retrieval.map_or("segment".into(), |r| r.to_string()));
        kv("classes", self.classes.to_string());
        if let Some(p) = self.scheme.sepbit_params() {
            kv("sepbit_thresholds", p.thresholds.to_string());
            kv("sepbit_scale", p.scale.to_string());
            kv("sepbit_index", p.index.to_string());
        }
        kv("gc_log", self.gc_log.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_sizes() {
        assert_eq!(parse_bytes("4096").unwrap(), 4096);
        assert_eq!(parse_bytes("512MiB").unwrap(), 512 * MIB);
        assert_eq!(parse_bytes("10 GiB").unwrap(), 10 * GIB);
        assert_eq!(parse_bytes("0.25G").unwrap(), GIB / 4);
        assert!(parse_bytes("3 parsecs").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("scheme=uw\nsepbit_thresholds=method2:4\nalpha=0.6 # skew\nvolumes=3\nselector=cost-benefit\n")
            .unwrap();
        let back = RunConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, RunConfig { out_dir: None, jobs: 1, ..cfg.clone() });
        assert_eq!(back.scheme.sepbit_params().unwrap().thresholds, AgeThresholds::Powers4(4));

        let mut trace = RunConfig::default();
        trace.apply_text("trace=/tmp/x.csv\nformat=tencent\ncolumns=volume=3\nwss_min=1GiB\n").unwrap();
        assert_eq!(RunConfig::from_text(&trace.to_text()).unwrap(), trace);
    }

    #[test]
    fn sepbit_params_survive_scheme_change() {
        let mut cfg = RunConfig::default();
        cfg.set("sepbit_scale", "2").unwrap();
        cfg.set("scheme", "gw").unwrap();
        assert_eq!(cfg.scheme.sepbit_params().unwrap().scale, 2.0);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_env(vec![("LOGSIM_SCHEME".into(), "nosep".into()), ("HOME".into(), "/".into())]).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::NoSep);
    }

    #[test]
    fn bad_inputs() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("scheme", "sfs").is_err());
        assert!(cfg.set("nonsense", "1").is_err());
        assert!(cfg.apply_text("scheme").is_err());
        cfg.set("gp_threshold", "1.5").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.set("trace", "x.csv").unwrap();
        assert!(cfg.set("alpha", "0.5").is_err());
    }

    #[test]
    fn desk_defaults() {
        let cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.segment_size, 1311 * BLOCK_SIZE);
        assert_eq!(cfg.volume_config().victims_per_gc(), 1);
    }
}
