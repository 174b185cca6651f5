//! Write streams: trace parsing, per-volume statistics and filtering,
//! lifespan annotation and synthetic generators.

mod synth;
mod trace;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::Lba;
use crate::{Error, Result};

pub use synth::{gen_two_region, gen_zipf, SyntheticSpec};
pub use trace::{parse_trace, serialize_record, ColumnMap, TraceFormat, TraceReader, WriteRecord};

/// One user-written block with its lifespan annotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedWrite {
    pub write_index: u64,
    pub lba: Lba,
    /// Blocks until the next write to the same LBA; `None` if never rewritten.
    pub lifespan: Option<u64>,
    /// Lifespan of the version this write invalidates; `None` for a first write.
    pub prev_lifespan: Option<u64>,
}

impl AnnotatedWrite {
    /// Lifespan with never-invalidated blocks measured up to `end` (the
    /// number of writes in the trace).
    pub fn lifespan_or_until(&self, end: u64) -> u64 {
        self.lifespan.unwrap_or(end - self.write_index)
    }
}

/// Annotates each write with its own lifespan and the lifespan of the block it
/// invalidates.
pub fn annotate_bits(lbas: &[Lba]) -> Vec<AnnotatedWrite> {
    let mut last: HashMap<Lba, usize> = HashMap::new();
    let mut out: Vec<AnnotatedWrite> = Vec::with_capacity(lbas.len());
    for (t, &lba) in lbas.iter().enumerate() {
        let prev_lifespan = last.insert(lba, t).map(|p| {
            let v = (t - p) as u64;
            out[p].lifespan = Some(v);
            v
        });
        out.push(AnnotatedWrite { write_index: t as u64, lba, lifespan: None, prev_lifespan });
    }
    out
}

fn opt_field(v: Option<u64>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

/// Writes an annotation sidecar: `write_index,lba,lifespan,prev_lifespan`
/// with `never` / `new` for absent values.
pub fn write_annotation<W: Write>(writes: &[AnnotatedWrite], mut out: W) -> Result<()> {
    writeln!(out, "write_index,lba,lifespan,prev_lifespan")?;
    for w in writes {
        writeln!(
            out,
            "{},{},{},{}",
            w.write_index,
            w.lba,
            opt_field(w.lifespan, "never"),
            opt_field(w.prev_lifespan, "new")
        )?;
    }
    Ok(())
}

pub fn read_annotation<R: BufRead>(input: R) -> Result<Vec<AnnotatedWrite>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if lineno == 1 && line.starts_with("write_index") || line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(err("expected 4 fields"));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| err(&format!("bad number `{s}`")));
        let opt = |s: &str, none: &str| if s == none { Ok(None) } else { num(s).map(Some) };
        out.push(AnnotatedWrite {
            write_index: num(f[0])?,
            lba: Lba(num(f[1])?),
            lifespan: opt(f[2], "never")?,
            prev_lifespan: opt(f[3], "new")?,
        });
    }
    Ok(out)
}

/// Write-side statistics of one volume.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeStats {
    pub volume: String,
    /// Unique LBAs written.
    pub wss_blocks: u64,
    /// Total blocks written.
    pub write_blocks: u64,
}

/// Splits records into per-volume block-write streams, in file order.
pub fn split_volumes<I>(records: I) -> Result<BTreeMap<String, Vec<Lba>>>
where
    I: IntoIterator<Item = Result<WriteRecord>>,
{
    let mut volumes: BTreeMap<String, Vec<Lba>> = BTreeMap::new();
    for rec in records {
        let rec = rec?;
        let stream = volumes.entry(rec.volume.clone()).or_default();
        stream.extend(rec.blocks().map(Lba));
    }
    Ok(volumes)
}

pub fn volume_stats(volume: &str, lbas: &[Lba]) -> VolumeStats {
    let unique: std::collections::HashSet<Lba> = lbas.iter().copied().collect();
    VolumeStats { volume: volume.to_string(), wss_blocks: unique.len() as u64, write_blocks: lbas.len() as u64 }
}

/// Keeps volumes with WSS above `wss_min_blocks` and traffic above
/// `traffic_multiple` times their WSS, both strictly.
pub fn filter_volumes(stats: &[VolumeStats], wss_min_blocks: u64, traffic_multiple: f64) -> Vec<String> {
    stats
        .iter()
        .filter(|s| s.wss_blocks > wss_min_blocks && s.write_blocks as f64 > traffic_multiple * s.wss_blocks as f64)
        .map(|s| s.volume.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BLOCKS_PER_GIB;

    fn lbas(xs: &[u64]) -> Vec<Lba> {
        xs.iter().copied().map(Lba).collect()
    }

    #[test]
    fn annotation_examples() {
        let a = annotate_bits(&lbas(&[1, 2, 1]));
        assert_eq!(a[0].lifespan, Some(2));
        assert_eq!(a[1].lifespan, None);
        assert_eq!(a[2].prev_lifespan, Some(2));
        let a = annotate_bits(&lbas(&[1, 1]));
        assert_eq!(a[1].prev_lifespan, Some(1));
        assert_eq!(a[1].lifespan, None);
        assert_eq!(a[0].prev_lifespan, None);
    }

    #[test]
    fn annotation_sidecar_round_trip() {
        let a = annotate_bits(&lbas(&[5, 6, 5, 7, 6, 5]));
        let mut buf = Vec::new();
        write_annotation(&a, &mut buf).unwrap();
        let back = read_annotation(&buf[..]).unwrap();
        assert_eq!(a, back);
        assert!(matches!(read_annotation(&b"write_index\n1,2,x,new\n"[..]), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn filter_rules() {
        let g = BLOCKS_PER_GIB;
        let stats = vec![
            VolumeStats { volume: "a".into(), wss_blocks: 12 * g, write_blocks: 30 * g },
            VolumeStats { volume: "b".into(), wss_blocks: 12 * g, write_blocks: 24 * g },
            VolumeStats { volume: "c".into(), wss_blocks: g, write_blocks: 30 * g },
        ];
        assert_eq!(filter_volumes(&stats, 10 * g, 2.0), vec!["a".to_string()]);
    }

    #[test]
    fn stats_count_unique_lbas() {
        let s = volume_stats("v", &lbas(&[1, 2, 1, 3]));
        assert_eq!((s.wss_blocks, s.write_blocks), (3, 4));
    }
}
