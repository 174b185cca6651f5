//! Per-volume log-structured state machine.
//!
//! User writes invalidate the previous version of their LBA, are appended to
//! the open segment of the class the placement scheme picks, and advance the
//! clock. After each user write GC runs while the trigger holds: victims are
//! selected from sealed segments, their valid blocks are rewritten through the
//! scheme, and the victims are dropped.

use std::collections::HashMap;
use std::io::Write;

use crate::model::{BlockMeta, ClassId, Clock, GcEvent, Lba, Segment, SegmentId, VictimRecord, VolumeConfig};
use crate::placement::{PlacementScheme, SchemeDiagnostics};
use crate::selection::SelectionPolicy;
use crate::{Error, Result};

/// When GC runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GcTrigger {
    /// Garbage proportion of sealed segments at or above the threshold.
    Gp(f64),
    /// At least this many invalid blocks stored anywhere (ideal placement).
    InvalidBlocks(u64),
}

pub struct VolumeSim {
    config: VolumeConfig,
    segment_blocks: usize,
    clock: Clock,
    segments: Vec<Option<Segment>>,
    open: HashMap<ClassId, SegmentId>,
    sealed: Vec<SegmentId>,
    lba_index: HashMap<Lba, (SegmentId, u32)>,
    user_blocks: u64,
    gc_blocks: u64,
    gc_ops: u64,
    gc_log: Vec<GcEvent>,
    sealed_invalid: u64,
    total_invalid: u64,
    scheme: Box<dyn PlacementScheme>,
    selector: SelectionPolicy,
    trigger: GcTrigger,
}

impl VolumeSim {
    pub fn new(
        config: VolumeConfig,
        scheme: Box<dyn PlacementScheme>,
        selector: SelectionPolicy,
        trigger: GcTrigger,
    ) -> Result<Self> {
        config.validate()?;
        Ok(VolumeSim {
            segment_blocks: config.segment_blocks(),
            config,
            clock: Clock::ZERO,
            segments: Vec::new(),
            open: HashMap::new(),
            sealed: Vec::new(),
            lba_index: HashMap::new(),
            user_blocks: 0,
            gc_blocks: 0,
            gc_ops: 0,
            gc_log: Vec::new(),
            sealed_invalid: 0,
            total_invalid: 0,
            scheme,
            selector,
            trigger,
        })
    }

    /// GP-triggered volume using the config's threshold.
    pub fn with_gp_trigger(
        config: VolumeConfig,
        scheme: Box<dyn PlacementScheme>,
        selector: SelectionPolicy,
    ) -> Result<Self> {
        let trigger = GcTrigger::Gp(config.gp_threshold);
        Self::new(config, scheme, selector, trigger)
    }

    /// Ideal-placement volume: GC whenever a segment's worth of invalid
    /// blocks exists, Greedy selection.
    pub fn ideal(config: VolumeConfig, scheme: Box<dyn PlacementScheme>) -> Result<Self> {
        let s = config.segment_blocks() as u64;
        Self::new(config, scheme, SelectionPolicy::Greedy, GcTrigger::InvalidBlocks(s))
    }

    pub fn config(&self) -> &VolumeConfig {
        &self.config
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn user_blocks_written(&self) -> u64 {
        self.user_blocks
    }

    pub fn gc_blocks_written(&self) -> u64 {
        self.gc_blocks
    }

    pub fn gc_op_count(&self) -> u64 {
        self.gc_ops
    }

    pub fn gc_log(&self) -> &[GcEvent] {
        &self.gc_log
    }

    pub fn scheme(&self) -> &dyn PlacementScheme {
        self.scheme.as_ref()
    }

    pub fn diagnostics(&self) -> SchemeDiagnostics {
        self.scheme.diagnostics()
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(id as usize).and_then(Option::as_ref)
    }

    pub fn sealed_segments(&self) -> impl Iterator<Item = &Segment> {
        self.sealed.iter().filter_map(|&id| self.segment(id))
    }

    pub fn open_segments(&self) -> impl Iterator<Item = &Segment> {
        self.open.values().filter_map(|&id| self.segment(id))
    }

    /// Number of valid blocks across all segments.
    pub fn valid_blocks(&self) -> usize {
        self.lba_index.len()
    }

    /// The current valid version of `lba`.
    pub fn lookup(&self, lba: Lba) -> Option<&BlockMeta> {
        let &(seg, slot) = self.lba_index.get(&lba)?;
        self.segment(seg).map(|s| &s.blocks[slot as usize])
    }

    /// Invalid fraction of blocks in sealed segments; 0 without sealed segments.
    pub fn garbage_proportion(&self) -> f64 {
        if self.sealed.is_empty() {
            return 0.0;
        }
        self.sealed_invalid as f64 / (self.sealed.len() * self.segment_blocks) as f64
    }

    pub fn write_amplification(&self) -> Result<f64> {
        if self.user_blocks == 0 {
            return Err(Error::NoUserWrites);
        }
        Ok((self.user_blocks + self.gc_blocks) as f64 / self.user_blocks as f64)
    }

    /// Processes one user-written block and any GC it triggers. Returns the
    /// number of GC operations run.
    pub fn user_write(&mut self, lba: Lba) -> Result<u64> {
        if let Some(space) = self.config.lba_space {
            if lba.0 >= space {
                return Err(Error::LbaOutOfRange { lba: lba.0, space });
            }
        }
        let now = self.clock;
        let next = now.advance()?;
        let prev_lifespan = match self.lba_index.remove(&lba) {
            Some((seg, slot)) => Some(now.since(self.invalidate(seg, slot as usize))),
            None => None,
        };
        let class = self.scheme.on_user_write(lba, prev_lifespan, now)?;
        let block = BlockMeta { lba, last_user_write_time: now, valid: true };
        self.append(class, block, now);
        self.clock = next;
        self.user_blocks += 1;
        self.maybe_gc()
    }

    /// Replays a whole stream of user writes.
    pub fn replay<I: IntoIterator<Item = Lba>>(&mut self, lbas: I) -> Result<()> {
        for lba in lbas {
            self.user_write(lba)?;
        }
        Ok(())
    }

    fn trigger_holds(&self) -> bool {
        match self.trigger {
            GcTrigger::Gp(threshold) => self.garbage_proportion() >= threshold,
            GcTrigger::InvalidBlocks(n) => self.total_invalid >= n,
        }
    }

    /// Runs GC operations while the trigger holds and some sealed segment has
    /// an invalid block.
    pub fn maybe_gc(&mut self) -> Result<u64> {
        let mut ops = 0;
        while self.sealed_invalid > 0 && self.trigger_holds() {
            self.garbage_collect_once()?;
            ops += 1;
        }
        Ok(ops)
    }

    /// One GC operation: reclaims up to `victims_per_gc` sealed segments.
    /// Only segments holding at least one invalid block are candidates.
    pub fn garbage_collect_once(&mut self) -> Result<GcEvent> {
        if self.sealed.is_empty() {
            return Err(Error::EmptyPool);
        }
        let now = self.clock;
        let mut victims = Vec::new();
        for _ in 0..self.config.victims_per_gc() {
            let candidates = self
                .sealed
                .iter()
                .filter_map(|&id| self.segments[id as usize].as_ref())
                .filter(|s| s.valid_count < s.capacity_blocks);
            let id = match self.selector.select(candidates, now) {
                Ok(id) => id,
                Err(Error::EmptyPool) if !victims.is_empty() => break,
                Err(Error::EmptyPool) => return Err(Error::NoVictim),
                Err(e) => return Err(e),
            };
            victims.push(self.reclaim(id, now)?);
        }
        self.gc_ops += 1;
        let event = GcEvent { at_time: now, victims };
        self.gc_log.push(event.clone());
        Ok(event)
    }

    fn reclaim(&mut self, id: SegmentId, now: Clock) -> Result<VictimRecord> {
        let pos = self.sealed.iter().position(|&s| s == id).ok_or(Error::NoVictim)?;
        self.sealed.remove(pos);
        let victim = self.segments[id as usize].take().ok_or(Error::NoVictim)?;
        let invalid = victim.invalid_count() as u64;
        self.sealed_invalid -= invalid;
        self.total_invalid -= invalid;
        let record = VictimRecord {
            segment_id: victim.id,
            class_id: victim.class_id,
            gp: victim.garbage_proportion(),
            rewritten: victim.valid_count,
            reclaimed: victim.capacity_blocks - victim.valid_count,
        };
        self.scheme.notify_reclaim(&victim, now);
        for block in victim.valid_blocks() {
            let class = self.scheme.on_gc_write(block, victim.class_id, now)?;
            self.append(class, *block, now);
            self.gc_blocks += 1;
        }
        Ok(record)
    }

    /// Marks the block at `(seg, slot)` invalid and returns its write time.
    fn invalidate(&mut self, seg: SegmentId, slot: usize) -> Clock {
        let segment = self.segments[seg as usize].as_mut().expect("index points at a live segment");
        let written = segment.blocks[slot].last_user_write_time;
        if segment.invalidate(slot) {
            self.total_invalid += 1;
            if segment.is_sealed() {
                self.sealed_invalid += 1;
            }
        }
        written
    }

    fn append(&mut self, class: ClassId, block: BlockMeta, now: Clock) {
        let id = match self.open.get(&class) {
            Some(&id) => id,
            None => {
                let id = self.segments.len() as SegmentId;
                self.segments.push(Some(Segment::new(id, class, now, self.segment_blocks)));
                self.open.insert(class, id);
                id
            }
        };
        let segment = self.segments[id as usize].as_mut().expect("open segment is live");
        let slot = segment.append(block);
        self.lba_index.insert(block.lba, (id, slot as u32));
        if segment.is_full() {
            segment.seal_time = Some(now);
            self.sealed_invalid += segment.invalid_count() as u64;
            self.sealed.push(id);
            self.open.remove(&class);
        }
    }

    /// Writes the GC log as `at_time,victim_id,victim_gp,rewritten,reclaimed`,
    /// one row per victim.
    pub fn write_gc_log<W: Write>(&self, out: W) -> Result<()> {
        write_gc_log(&self.gc_log, out)
    }
}

pub fn write_gc_log<W: Write>(log: &[GcEvent], mut out: W) -> Result<()> {
    writeln!(out, "at_time,victim_id,victim_gp,rewritten,reclaimed")?;
    for event in log {
        for v in &event.victims {
            writeln!(out, "{},{},{},{},{}", event.at_time, v.segment_id, v.gp, v.rewritten, v.reclaimed)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BLOCK_SIZE;
    use crate::placement::{NoSep, SepGc};
    use proptest::prelude::*;

    fn config(seg_blocks: u64, gpt: f64) -> VolumeConfig {
        VolumeConfig {
            segment_size: seg_blocks * BLOCK_SIZE,
            gc_retrieval_bytes: seg_blocks * BLOCK_SIZE,
            gp_threshold: gpt,
            ..Default::default()
        }
    }

    fn nosep(seg_blocks: u64, gpt: f64) -> VolumeSim {
        VolumeSim::with_gp_trigger(config(seg_blocks, gpt), Box::new(NoSep), SelectionPolicy::Greedy).unwrap()
    }

    /// Records the lifespans reported to the scheme.
    struct Probe(std::sync::Arc<std::sync::Mutex<Vec<Option<u64>>>>);

    impl PlacementScheme for Probe {
        fn name(&self) -> &'static str {
            "probe"
        }
        fn on_user_write(&mut self, _: Lba, v: Option<u64>, _: Clock) -> Result<ClassId> {
            self.0.lock().unwrap().push(v);
            Ok(0)
        }
        fn on_gc_write(&mut self, _: &BlockMeta, _: ClassId, _: Clock) -> Result<ClassId> {
            Ok(0)
        }
    }

    #[test]
    fn first_write() {
        let mut sim = nosep(8, 0.15);
        sim.user_write(Lba(7)).unwrap();
        assert_eq!(sim.clock(), Clock(1));
        assert_eq!(sim.valid_blocks(), 1);
        assert_eq!(sim.lookup(Lba(7)).unwrap().last_user_write_time, Clock(0));
    }

    #[test]
    fn self_invalidation() {
        let mut sim = nosep(8, 0.15);
        sim.replay([Lba(7), Lba(7)]).unwrap();
        let seg = sim.open_segments().next().unwrap();
        assert_eq!(seg.blocks.len(), 2);
        assert!(!seg.blocks[0].valid);
        assert_eq!(seg.valid_count, 1);
    }

    #[test]
    fn lifespan_of_invalidated_block() {
        let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::new()));
        let scheme = Box::new(Probe(seen.clone()));
        let mut sim = VolumeSim::with_gp_trigger(config(8, 0.15), scheme, SelectionPolicy::Greedy).unwrap();
        sim.replay([Lba(0), Lba(1), Lba(0)]).unwrap();
        assert_eq!(*seen.lock().unwrap(), vec![None, None, Some(2)]);
    }

    #[test]
    fn gp_counts_sealed_segments_only() {
        let mut sim = nosep(8, 0.99);
        assert_eq!(sim.garbage_proportion(), 0.0);
        // 8 distinct then 3 overwrites: one sealed segment, 3 of 8 invalid.
        sim.replay((0..8).chain(0..3).map(Lba)).unwrap();
        assert!((sim.garbage_proportion() - 0.375).abs() < 1e-12);
        // Second segment sealed, one more invalid in the first.
        sim.replay((3..4).chain(100..104).map(Lba)).unwrap();
        assert_eq!(sim.sealed_segments().count(), 2);
        assert!((sim.garbage_proportion() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_gc_below_threshold_or_without_garbage() {
        let mut sim = nosep(10, 0.15);
        sim.replay((0..10).chain(0..1).map(Lba)).unwrap();
        assert!((sim.garbage_proportion() - 0.1).abs() < 1e-12);
        assert_eq!(sim.gc_op_count(), 0);
        // Open-segment garbage does not count.
        let mut sim = nosep(10, 0.15);
        sim.replay((0..10).chain([10, 10, 10, 10].into_iter()).map(Lba)).unwrap();
        assert_eq!(sim.garbage_proportion(), 0.0);
        assert_eq!(sim.gc_op_count(), 0);
    }

    #[test]
    fn fully_invalid_victim_is_reclaimed() {
        let mut sim = nosep(4, 0.99);
        // Segment 0 holds 0..4 and is then fully overwritten into segment 1.
        sim.replay((0..4).chain(0..4).map(Lba)).unwrap();
        let ev = sim.garbage_collect_once().unwrap();
        let v = &ev.victims[0];
        assert_eq!((v.segment_id, v.rewritten, v.reclaimed, v.gp), (0, 0, 4, 1.0));
        assert_eq!(sim.garbage_proportion(), 0.0);
        assert_eq!(sim.write_amplification().unwrap(), 1.0);
    }

    #[test]
    fn trigger_runs_until_below_threshold() {
        let mut sim = nosep(4, 0.2);
        sim.replay((0..16).chain(0..3).map(Lba)).unwrap();
        assert!((sim.garbage_proportion() - 3.0 / 16.0).abs() < 1e-12);
        assert_eq!(sim.gc_op_count(), 0);
        // The fourth overwrite seals a fifth segment: GP 4/20 with segment 0 fully invalid.
        assert_eq!(sim.user_write(Lba(3)).unwrap(), 1);
        assert_eq!(sim.gc_log()[0].victims[0].gp, 1.0);
        assert_eq!(sim.garbage_proportion(), 0.0);
    }

    #[test]
    fn partial_victim_rewrites_valid_blocks() {
        let mut sim = VolumeSim::with_gp_trigger(config(8, 0.99), Box::new(SepGc), SelectionPolicy::Greedy).unwrap();
        sim.replay((0..8).chain(0..5).map(Lba)).unwrap();
        let ev = sim.garbage_collect_once().unwrap();
        assert_eq!(ev.rewritten_blocks(), 3);
        assert_eq!(ev.reclaimed_blocks(), 5);
        assert_eq!(sim.gc_blocks_written(), 3);
        for lba in 5..8 {
            let b = sim.lookup(Lba(lba)).unwrap();
            assert_eq!(b.last_user_write_time, Clock(lba));
        }
        let gc_seg = sim.open_segments().find(|s| s.class_id == 1).unwrap();
        assert_eq!(gc_seg.valid_count, 3);
    }

    #[test]
    fn retrieval_size_sets_victim_count() {
        let mut cfg = config(4, 0.99);
        cfg.gc_retrieval_bytes = 8 * BLOCK_SIZE;
        let mut sim = VolumeSim::with_gp_trigger(cfg, Box::new(NoSep), SelectionPolicy::Greedy).unwrap();
        sim.replay((0..12).chain([0, 4, 8]).map(Lba)).unwrap();
        let ev = sim.garbage_collect_once().unwrap();
        assert_eq!(ev.victims.len(), 2);
    }

    #[test]
    fn write_amplification_formula() {
        let mut sim = nosep(4, 0.15);
        assert!(matches!(sim.write_amplification(), Err(Error::NoUserWrites)));
        sim.replay((0..3).map(Lba)).unwrap();
        assert_eq!(sim.write_amplification().unwrap(), 1.0);
    }

    #[test]
    fn lba_space_is_enforced() {
        let mut cfg = config(4, 0.15);
        cfg.lba_space = Some(10);
        let mut sim = VolumeSim::with_gp_trigger(cfg, Box::new(NoSep), SelectionPolicy::Greedy).unwrap();
        assert!(matches!(sim.user_write(Lba(10)), Err(Error::LbaOutOfRange { .. })));
    }

    #[test]
    fn gc_log_csv() {
        let mut sim = nosep(4, 0.99);
        sim.replay((0..4).chain(0..4).map(Lba)).unwrap();
        sim.garbage_collect_once().unwrap();
        let mut buf = Vec::new();
        sim.write_gc_log(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "at_time,victim_id,victim_gp,rewritten,reclaimed\n8,0,1,0,4\n");
    }

    proptest! {
        #[test]
        fn invariants_hold(
            lbas in prop::collection::vec(0u64..48, 1..1500),
            sepgc in any::<bool>(),
            cost_benefit in any::<bool>(),
        ) {
            let scheme: Box<dyn PlacementScheme> = if sepgc { Box::new(SepGc) } else { Box::new(NoSep) };
            let selector = if cost_benefit { SelectionPolicy::CostBenefit } else { SelectionPolicy::Greedy };
            let mut sim = VolumeSim::with_gp_trigger(config(8, 0.25), scheme, selector).unwrap();
            let mut distinct = std::collections::HashSet::new();
            for &lba in &lbas {
                sim.user_write(Lba(lba)).unwrap();
                distinct.insert(lba);
                let valid: usize = sim.segments.iter().flatten().map(|s| s.valid_count).sum();
                prop_assert_eq!(valid, distinct.len());
                prop_assert!(sim.garbage_proportion() < 0.25 || sim.sealed_invalid == 0);
                for (&lba, &(seg, slot)) in &sim.lba_index {
                    let b = sim.segments[seg as usize].as_ref().unwrap().blocks[slot as usize];
                    prop_assert!(b.valid && b.lba == lba && b.last_user_write_time <= sim.clock());
                }
            }
            prop_assert_eq!(sim.clock().0, lbas.len() as u64);
            prop_assert!(sim.write_amplification().unwrap() >= 1.0);
        }
    }
}
