//! Trace-driven simulation of garbage collection in log-structured block
//! storage.
//!
//! A [`VolumeSim`](engine::VolumeSim) replays a per-volume stream of 4 KiB
//! block writes, appends each block to the open segment of the class chosen by
//! a [`PlacementScheme`](placement::PlacementScheme), and runs GC whenever the
//! garbage proportion of sealed segments reaches the configured threshold.
//! Write amplification is the ratio of all written blocks (user plus GC
//! rewrites) to user-written blocks.
//!
//! Besides the engine, the crate carries:
//!
//! * placement schemes: NoSep, SepGC, SepBIT and its UW/GW breakdowns, DAC,
//!   future-knowledge (FK) and the unbounded ideal construction;
//! * the FIFO recency index used by SepBIT to bound its memory;
//! * the closed-form Zipf model for lifespan conditional probabilities and the
//!   matching empirical trace statistics;
//! * trace parsing, lifespan annotation and synthetic workload generators;
//! * replay and sweep drivers with CSV/JSON reporting.

pub mod analysis;
pub mod engine;
pub mod index;
pub mod model;
pub mod placement;
pub mod report;
pub mod selection;
pub mod workload;

pub use engine::{GcTrigger, VolumeSim};
pub use model::{BlockMeta, ClassId, Clock, GcEvent, Lba, Segment, SegmentId, VolumeConfig};
pub use placement::{PlacementScheme, SchemeKind};
pub use selection::SelectionPolicy;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("clock overflow")]
    ClockOverflow,
    #[error("LBA {lba} outside the volume's LBA space of {space} blocks")]
    LbaOutOfRange { lba: u64, space: u64 },
    #[error("no sealed segment available for selection")]
    EmptyPool,
    #[error("selector returned no victim; GC operation aborted")]
    NoVictim,
    #[error("write amplification is undefined without user writes")]
    NoUserWrites,
    #[error("missing lifespan annotation for write {0}")]
    MissingAnnotation(u64),
    #[error("degenerate conditioning event: {0}")]
    Degenerate(&'static str),
    #[error("empty conditioning set")]
    EmptyConditioningSet,
    #[error("empty GC log")]
    EmptyGcLog,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
