//! Placement schemes that read the future from a lifespan annotation.

use crate::model::{BlockMeta, ClassId, Clock, Lba};
use crate::workload::AnnotatedWrite;
use crate::{Error, Result};

use super::PlacementScheme;

/// Class of never-invalidated blocks under [`Ideal`].
pub const IDEAL_OVERFLOW_CLASS: ClassId = ClassId::MAX;

const NEVER: u64 = u64::MAX;

/// `ceil(t / s)` clamped to `1..=k`.
pub fn fk_class(until_invalid: u64, segment_blocks: u64, k: u32) -> ClassId {
    let k = k.max(1);
    let group = until_invalid.div_ceil(segment_blocks.max(1));
    group.clamp(1, k as u64) as ClassId
}

/// Open-segment index `ceil(o / s)` for the block with invalidation order `o`.
pub fn ideal_assign(order: u64, segment_blocks: u64) -> ClassId {
    order.div_ceil(segment_blocks.max(1)).min((IDEAL_OVERFLOW_CLASS - 1) as u64) as ClassId
}

fn lifespans(annotation: &[AnnotatedWrite]) -> (Vec<u64>, Vec<Lba>) {
    let mut life = Vec::with_capacity(annotation.len());
    let mut lbas = Vec::with_capacity(annotation.len());
    for (i, w) in annotation.iter().enumerate() {
        debug_assert_eq!(w.write_index, i as u64);
        life.push(w.lifespan.unwrap_or(NEVER));
        lbas.push(w.lba);
    }
    (life, lbas)
}

fn lookup(table: &[u64], lbas: &[Lba], index: u64, lba: Lba) -> Result<u64> {
    match (table.get(index as usize), lbas.get(index as usize)) {
        (Some(&v), Some(&a)) if a == lba => Ok(v),
        _ => Err(Error::MissingAnnotation(index)),
    }
}

/// Future-knowledge placement: each written block, user or GC, goes to the
/// class of its remaining lifespan in segment-sized steps, with everything at
/// or beyond `k - 1` segments (and never-invalidated blocks) in class `k`.
#[derive(Clone, Debug)]
pub struct FutureKnowledge {
    lifespans: Vec<u64>,
    lbas: Vec<Lba>,
    segment_blocks: u64,
    k: u32,
}

impl FutureKnowledge {
    pub fn new(annotation: &[AnnotatedWrite], segment_blocks: u64, num_classes: u32) -> Self {
        let (lifespans, lbas) = lifespans(annotation);
        FutureKnowledge { lifespans, lbas, segment_blocks, k: num_classes.max(1) }
    }

    fn class_for(&self, written_at: u64, lba: Lba, now: Clock) -> Result<ClassId> {
        let life = lookup(&self.lifespans, &self.lbas, written_at, lba)?;
        if life == NEVER {
            return Ok(self.k);
        }
        let residual = (written_at + life).saturating_sub(now.0);
        Ok(fk_class(residual, self.segment_blocks, self.k))
    }
}

impl PlacementScheme for FutureKnowledge {
    fn name(&self) -> &'static str {
        "fk"
    }

    fn on_user_write(&mut self, lba: Lba, _: Option<u64>, now: Clock) -> Result<ClassId> {
        self.class_for(now.0, lba, now)
    }

    fn on_gc_write(&mut self, block: &BlockMeta, _: ClassId, now: Clock) -> Result<ClassId> {
        self.class_for(block.last_user_write_time.0, block.lba, now)
    }
}

/// Unbounded ideal placement: blocks are laid out in invalidation order, `s`
/// per segment, so every segment becomes fully invalid before it is reclaimed.
#[derive(Clone, Debug)]
pub struct Ideal {
    classes: Vec<ClassId>,
    lbas: Vec<Lba>,
}

impl Ideal {
    pub fn new(annotation: &[AnnotatedWrite], segment_blocks: u64) -> Self {
        // The write at index T invalidates at most one block, so the
        // invalidation order of a block dying at T is the number of updates
        // at indices up to T.
        let mut updates_upto = Vec::with_capacity(annotation.len());
        let mut running = 0u64;
        for w in annotation {
            running += w.prev_lifespan.is_some() as u64;
            updates_upto.push(running);
        }
        let classes = annotation
            .iter()
            .map(|w| match w.lifespan {
                Some(u) => ideal_assign(updates_upto[(w.write_index + u) as usize], segment_blocks),
                None => IDEAL_OVERFLOW_CLASS,
            })
            .collect();
        Ideal { classes, lbas: annotation.iter().map(|w| w.lba).collect() }
    }

    fn class_for(&self, index: u64, lba: Lba) -> Result<ClassId> {
        match (self.classes.get(index as usize), self.lbas.get(index as usize)) {
            (Some(&c), Some(&a)) if a == lba => Ok(c),
            _ => Err(Error::MissingAnnotation(index)),
        }
    }
}

impl PlacementScheme for Ideal {
    fn name(&self) -> &'static str {
        "ideal"
    }

    fn on_user_write(&mut self, lba: Lba, _: Option<u64>, now: Clock) -> Result<ClassId> {
        self.class_for(now.0, lba)
    }

    fn on_gc_write(&mut self, block: &BlockMeta, _: ClassId, _: Clock) -> Result<ClassId> {
        self.class_for(block.last_user_write_time.0, block.lba)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::annotate_bits;

    fn lbas(xs: &[u64]) -> Vec<Lba> {
        xs.iter().copied().map(Lba).collect()
    }

    #[test]
    fn ideal_orders() {
        assert_eq!(ideal_assign(2, 2), 1);
        assert_eq!(ideal_assign(3, 2), 2);
        assert_eq!(ideal_assign(5, 2), 3);
    }

    #[test]
    fn fk_classes() {
        assert_eq!(fk_class(8, 16, 6), 1);
        assert_eq!(fk_class(48, 16, 6), 3);
        assert_eq!(fk_class(160, 16, 6), 6);
        assert_eq!(fk_class(0, 16, 6), 1);
    }

    #[test]
    fn ideal_example_layout() {
        // A B C D C B A E D with s = 2: C dies first, then B, A, D.
        let ann = annotate_bits(&lbas(&[0, 1, 2, 3, 2, 1, 0, 4, 3]));
        let mut ideal = Ideal::new(&ann, 2);
        let classes: Vec<ClassId> =
            ann.iter().map(|w| ideal.on_user_write(w.lba, None, Clock(w.write_index)).unwrap()).collect();
        assert_eq!(classes[2], 1); // C, o = 1
        assert_eq!(classes[1], 1); // B, o = 2
        assert_eq!(classes[0], 2); // A, o = 3
        assert_eq!(classes[3], 2); // D, o = 4
        assert_eq!(classes[4], IDEAL_OVERFLOW_CLASS);
    }

    #[test]
    fn fk_gc_uses_residual_lifespan() {
        // LBA 0 written at 0, rewritten at 40.
        let mut seq = vec![0u64];
        seq.extend(1..40);
        seq.push(0);
        let ann = annotate_bits(&lbas(&seq));
        let mut fk = FutureKnowledge::new(&ann, 8, 6);
        assert_eq!(fk.on_user_write(Lba(0), None, Clock(0)).unwrap(), 5);
        let block = BlockMeta { lba: Lba(0), last_user_write_time: Clock(0), valid: true };
        assert_eq!(fk.on_gc_write(&block, 5, Clock(36)).unwrap(), 1);
        assert_eq!(fk.on_user_write(Lba(5), None, Clock(5)).unwrap(), 6);
    }

    #[test]
    fn mismatched_annotation_is_an_error() {
        let ann = annotate_bits(&lbas(&[0, 1]));
        let mut fk = FutureKnowledge::new(&ann, 8, 6);
        assert!(matches!(fk.on_user_write(Lba(9), None, Clock(0)), Err(Error::MissingAnnotation(0))));
        assert!(matches!(fk.on_user_write(Lba(0), None, Clock(7)), Err(Error::MissingAnnotation(7))));
    }
}
