use crate::model::{BlockMeta, ClassId, Clock, Lba};
use crate::Result;

use super::PlacementScheme;

/// Every block goes to one open segment.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSep;

impl PlacementScheme for NoSep {
    fn name(&self) -> &'static str {
        "nosep"
    }

    fn on_user_write(&mut self, _: Lba, _: Option<u64>, _: Clock) -> Result<ClassId> {
        Ok(0)
    }

    fn on_gc_write(&mut self, _: &BlockMeta, _: ClassId, _: Clock) -> Result<ClassId> {
        Ok(0)
    }
}

/// User writes to class 0, GC rewrites to class 1.
#[derive(Clone, Copy, Debug, Default)]
pub struct SepGc;

impl PlacementScheme for SepGc {
    fn name(&self) -> &'static str {
        "sepgc"
    }

    fn on_user_write(&mut self, _: Lba, _: Option<u64>, _: Clock) -> Result<ClassId> {
        Ok(0)
    }

    fn on_gc_write(&mut self, _: &BlockMeta, _: ClassId, _: Clock) -> Result<ClassId> {
        Ok(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block() -> BlockMeta {
        BlockMeta { lba: Lba(3), last_user_write_time: Clock(1), valid: true }
    }

    #[test]
    fn nosep_is_constant() {
        let mut s = NoSep;
        assert_eq!(s.on_user_write(Lba(3), Some(5), Clock(9)).unwrap(), 0);
        assert_eq!(s.on_user_write(Lba(4), None, Clock(9)).unwrap(), 0);
        assert_eq!(s.on_gc_write(&block(), 0, Clock(9)).unwrap(), 0);
    }

    #[test]
    fn sepgc_splits_user_and_gc() {
        let mut s = SepGc;
        assert_eq!(s.on_user_write(Lba(3), Some(5), Clock(9)).unwrap(), 0);
        assert_eq!(s.on_gc_write(&block(), 0, Clock(9)).unwrap(), 1);
        assert_eq!(s.on_gc_write(&block(), 1, Clock(9)).unwrap(), 1);
    }
}
