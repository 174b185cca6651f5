//! Block I/O trace readers.
//!
//! Three layouts are understood, all comma-separated:
//!
//! * native: `timestamp_us,volume_id,opcode,offset_bytes,length_bytes`
//! * alibaba: `device_id,opcode,offset_bytes,length_bytes,timestamp_us`
//! * tencent: `timestamp_s,offset_sectors,size_sectors,io_type,volume_id`
//!   (512-byte sectors, `io_type` 1 for writes)
//!
//! The public-trace column orders are assumptions; [`ColumnMap::with_overrides`]
//! remaps them. A header line is skipped if its offset field is not numeric.
//! Opcodes `W`, `write` and `1` (case-insensitive) are writes; everything else
//! is dropped.

use std::fmt;
use std::io::{BufRead, Lines, Write};
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::BLOCK_SIZE;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub timestamp_us: u64,
    pub volume: String,
    pub offset: u64,
    pub length: u64,
}

impl WriteRecord {
    /// LBAs covered by the request; unaligned edges round outward.
    pub fn blocks(&self) -> Range<u64> {
        if self.length == 0 {
            return 0..0;
        }
        let first = self.offset / BLOCK_SIZE;
        let last = (self.offset + self.length - 1) / BLOCK_SIZE;
        first..last + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceFormat {
    Native,
    Alibaba,
    Tencent,
}

impl TraceFormat {
    pub fn columns(self) -> ColumnMap {
        match self {
            TraceFormat::Native => ColumnMap {
                timestamp: 0,
                volume: 1,
                opcode: 2,
                offset: 3,
                length: 4,
                unit_bytes: 1,
                timestamp_scale: 1,
            },
            TraceFormat::Alibaba => ColumnMap {
                volume: 0,
                opcode: 1,
                offset: 2,
                length: 3,
                timestamp: 4,
                unit_bytes: 1,
                timestamp_scale: 1,
            },
            TraceFormat::Tencent => ColumnMap {
                timestamp: 0,
                offset: 1,
                length: 2,
                opcode: 3,
                volume: 4,
                unit_bytes: 512,
                timestamp_scale: 1_000_000,
            },
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Native => "native",
            TraceFormat::Alibaba => "alibaba",
            TraceFormat::Tencent => "tencent",
        })
    }
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" | "native-csv" | "csv" => Ok(TraceFormat::Native),
            "alibaba" => Ok(TraceFormat::Alibaba),
            "tencent" => Ok(TraceFormat::Tencent),
            other => Err(Error::Config(format!("unknown trace format `{other}`"))),
        }
    }
}

/// Field positions and units of one trace layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub timestamp: usize,
    pub volume: usize,
    pub opcode: usize,
    pub offset: usize,
    pub length: usize,
    /// Bytes per offset/length unit.
    pub unit_bytes: u64,
    /// Microseconds per timestamp unit.
    pub timestamp_scale: u64,
}

impl ColumnMap {
    /// Applies `key=value` overrides such as
    /// `volume=0,opcode=1,offset=2,length=3,timestamp=4,unit=512`.
    pub fn with_overrides(mut self, spec: &str) -> Result<Self> {
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("column override `{part}` is not key=value")))?;
            let value: u64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("column override `{part}` needs a number")))?;
            let slot = match key.trim() {
                "timestamp" => &mut self.timestamp,
                "volume" => &mut self.volume,
                "opcode" => &mut self.opcode,
                "offset" => &mut self.offset,
                "length" => &mut self.length,
                "unit" => {
                    self.unit_bytes = value.max(1);
                    continue;
                }
                "timestamp_scale" => {
                    self.timestamp_scale = value.max(1);
                    continue;
                }
                other => return Err(Error::Config(format!("unknown column `{other}`"))),
            };
            *slot = value as usize;
        }
        Ok(self)
    }

    fn width(&self) -> usize {
        [self.timestamp, self.volume, self.opcode, self.offset, self.length].into_iter().max().unwrap_or(0) + 1
    }
}

fn is_write(op: &str) -> bool {
    op.eq_ignore_ascii_case("w") || op.eq_ignore_ascii_case("write") || op == "1"
}

/// Streaming reader yielding write records in file order.
pub struct TraceReader<R> {
    lines: Lines<R>,
    columns: ColumnMap,
    lineno: usize,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(input: R, columns: ColumnMap) -> Self {
        TraceReader { lines: input.lines(), columns, lineno: 0 }
    }

    fn parse_line(&self, line: &str) -> Result<Option<WriteRecord>> {
        let c = &self.columns;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let err = |msg: String| Error::Parse { line: self.lineno, msg };
        if fields.len() < c.width() {
            return Err(err(format!("expected at least {} fields, found {}", c.width(), fields.len())));
        }
        if self.lineno == 1 && fields[c.offset].parse::<u64>().is_err() {
            return Ok(None);
        }
        if !is_write(fields[c.opcode]) {
            return Ok(None);
        }
        let num = |idx: usize, name: &str| {
            fields[idx].parse::<u64>().map_err(|_| err(format!("bad {name} `{}`", fields[idx])))
        };
        let raw_ts = fields[c.timestamp];
        let timestamp_us = match raw_ts.parse::<u64>() {
            Ok(t) => t.checked_mul(c.timestamp_scale),
            Err(_) => raw_ts
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .map(|t| (t * c.timestamp_scale as f64) as u64),
        }
        .ok_or_else(|| err(format!("bad timestamp `{raw_ts}`")))?;
        let offset = num(c.offset, "offset")?;
        let length = num(c.length, "length")?;
        let overflow = || err("offset/length overflow".into());
        Ok(Some(WriteRecord {
            timestamp_us,
            volume: fields[c.volume].to_string(),
            offset: offset.checked_mul(c.unit_bytes).ok_or_else(overflow)?,
            length: length.checked_mul(c.unit_bytes).ok_or_else(overflow)?,
        }))
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<WriteRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.lineno += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            match self.parse_line(trimmed) {
                Ok(Some(rec)) => return Some(Ok(rec)),
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

pub fn parse_trace<R: BufRead>(input: R, columns: ColumnMap) -> TraceReader<R> {
    TraceReader::new(input, columns)
}

/// Writes one record as a native CSV line.
pub fn serialize_record<W: Write>(rec: &WriteRecord, mut out: W) -> Result<()> {
    writeln!(out, "{},{},W,{},{}", rec.timestamp_us, rec.volume, rec.offset, rec.length)?;
    Ok(())
}
