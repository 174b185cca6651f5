//! Domain types shared by the simulator: addresses, the user-write clock,
//! per-block metadata, segments and volume configuration.
//!
//! Every lifespan, age and threshold in the crate is measured in user-written
//! 4 KiB blocks. Byte quantities only appear at configuration boundaries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Size of one logical block.
pub const BLOCK_SIZE: u64 = 4096;

/// Blocks per GiB (4 KiB blocks).
pub const BLOCKS_PER_GIB: u64 = 1 << 18;

pub const MIB: u64 = 1 << 20;
pub const GIB: u64 = 1 << 30;

/// Logical block address inside one volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lba(pub u64);

impl Lba {
    pub fn from_byte_offset(offset: u64) -> Self {
        Lba(offset / BLOCK_SIZE)
    }

    pub fn byte_offset(self) -> u64 {
        self.0 * BLOCK_SIZE
    }
}

impl fmt::Display for Lba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Count of user-written blocks since the volume started.
///
/// GC rewrites never advance the clock.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clock(pub u64);

impl Clock {
    pub const ZERO: Clock = Clock(0);

    /// The clock after one more user-written block.
    pub fn advance(self) -> Result<Clock> {
        self.0.checked_add(1).map(Clock).ok_or(Error::ClockOverflow)
    }

    /// Blocks elapsed since `earlier`. Saturates at zero.
    pub fn since(self, earlier: Clock) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Placement class label. Its meaning is scheme-defined.
pub type ClassId = u32;

/// Volume-unique, strictly increasing segment identifier.
pub type SegmentId = u64;

/// Metadata of one stored version of a logical block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockMeta {
    pub lba: Lba,
    /// Clock value of the user write that produced this version. GC rewrites copy it.
    pub last_user_write_time: Clock,
    pub valid: bool,
}

impl BlockMeta {
    /// Age of the block at `now`, in user-written blocks.
    pub fn age(&self, now: Clock) -> u64 {
        now.since(self.last_user_write_time)
    }
}

/// Append-only container of blocks belonging to one placement class.
#[derive(Clone, Debug)]
pub struct Segment {
    pub id: SegmentId,
    pub class_id: ClassId,
    pub creation_time: Clock,
    pub seal_time: Option<Clock>,
    pub blocks: Vec<BlockMeta>,
    pub valid_count: usize,
    pub capacity_blocks: usize,
}

impl Segment {
    pub fn new(id: SegmentId, class_id: ClassId, creation_time: Clock, capacity_blocks: usize) -> Self {
        Segment {
            id,
            class_id,
            creation_time,
            seal_time: None,
            blocks: Vec::with_capacity(capacity_blocks.min(1 << 16)),
            valid_count: 0,
            capacity_blocks,
        }
    }

    pub fn is_sealed(&self) -> bool {
        self.seal_time.is_some()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.len() >= self.capacity_blocks
    }

    pub fn invalid_count(&self) -> usize {
        self.blocks.len() - self.valid_count
    }

    /// Fraction of invalid blocks relative to segment capacity.
    pub fn garbage_proportion(&self) -> f64 {
        if self.capacity_blocks == 0 {
            return 0.0;
        }
        (self.capacity_blocks - self.valid_count) as f64 / self.capacity_blocks as f64
    }

    /// Appends a block and returns its slot.
    pub(crate) fn append(&mut self, block: BlockMeta) -> usize {
        debug_assert!(!self.is_full(), "append to a full segment");
        debug_assert!(!self.is_sealed(), "append to a sealed segment");
        if block.valid {
            self.valid_count += 1;
        }
        self.blocks.push(block);
        self.blocks.len() - 1
    }

    /// Marks a slot invalid. Returns false if it was already invalid.
    pub(crate) fn invalidate(&mut self, slot: usize) -> bool {
        let block = &mut self.blocks[slot];
        if !block.valid {
            return false;
        }
        block.valid = false;
        self.valid_count -= 1;
        true
    }

    pub fn valid_blocks(&self) -> impl Iterator<Item = &BlockMeta> {
        self.blocks.iter().filter(|b| b.valid)
    }
}

/// Static configuration of one simulated volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeConfig {
    pub block_size: u64,
    pub segment_size: u64,
    /// GC triggers once the garbage proportion of sealed segments reaches this value.
    pub gp_threshold: f64,
    /// Bytes of sealed segments pulled by one GC operation.
    pub gc_retrieval_bytes: u64,
    pub num_classes: u32,
    /// Optional exclusive upper bound on LBAs.
    pub lba_space: Option<u64>,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            block_size: BLOCK_SIZE,
            segment_size: 512 * MIB,
            gp_threshold: 0.15,
            gc_retrieval_bytes: 512 * MIB,
            num_classes: 6,
            lba_space: None,
        }
    }
}

impl VolumeConfig {
    /// A config with the given segment size; GC retrieves one segment per operation.
    pub fn with_segment_size(segment_size: u64) -> Self {
        VolumeConfig {
            segment_size,
            gc_retrieval_bytes: segment_size,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size != BLOCK_SIZE {
            return Err(Error::Config(format!("block size must be {BLOCK_SIZE}")));
        }
        if self.segment_size == 0 || self.segment_size % self.block_size != 0 {
            return Err(Error::Config(format!(
                "segment size {} is not a positive multiple of {}",
                self.segment_size, self.block_size
            )));
        }
        if !(self.gp_threshold > 0.0 && self.gp_threshold < 1.0) {
            return Err(Error::Config(format!("GP threshold {} outside (0, 1)", self.gp_threshold)));
        }
        let (r, s) = (self.gc_retrieval_bytes, self.segment_size);
        if r == 0 || (r % s != 0 && s % r != 0) {
            return Err(Error::Config(format!(
                "GC retrieval size {r} must be a multiple or divisor of the segment size {s}"
            )));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("at least one class is required".into()));
        }
        Ok(())
    }

    pub fn segment_blocks(&self) -> usize {
        (self.segment_size / self.block_size) as usize
    }

    /// Number of victims one GC operation pulls.
    pub fn victims_per_gc(&self) -> usize {
        self.gc_retrieval_bytes.div_ceil(self.segment_size).max(1) as usize
    }

    /// Provisioned capacity for a volume with the given write working set.
    pub fn capacity_bytes(&self, wss_bytes: u64) -> u64 {
        (wss_bytes as f64 / (1.0 - self.gp_threshold)).ceil() as u64
    }
}

/// One victim reclaimed by a GC operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VictimRecord {
    pub segment_id: SegmentId,
    pub class_id: ClassId,
    pub gp: f64,
    pub rewritten: usize,
    pub reclaimed: usize,
}

/// Record of one GC operation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcEvent {
    pub at_time: Clock,
    pub victims: Vec<VictimRecord>,
}

impl GcEvent {
    pub fn rewritten_blocks(&self) -> usize {
        self.victims.iter().map(|v| v.rewritten).sum()
    }

    pub fn reclaimed_blocks(&self) -> usize {
        self.victims.iter().map(|v| v.reclaimed).sum()
    }
}
