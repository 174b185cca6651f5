use std::collections::HashMap;

use crate::model::{BlockMeta, ClassId, Clock, Lba};
use crate::Result;

use super::PlacementScheme;

/// Temperature levels per LBA: a user write promotes one level, a GC rewrite
/// demotes one level, and the block is placed at its new level.
///
/// A new LBA starts at level 0, so its first write lands at level 1.
#[derive(Clone, Debug)]
pub struct Dac {
    levels: HashMap<Lba, u8>,
    top: u8,
}

impl Dac {
    pub fn new(num_classes: u32) -> Self {
        Dac { levels: HashMap::new(), top: num_classes.clamp(1, 256).saturating_sub(1) as u8 }
    }

    pub fn level(&self, lba: Lba) -> u8 {
        self.levels.get(&lba).copied().unwrap_or(0)
    }
}

impl PlacementScheme for Dac {
    fn name(&self) -> &'static str {
        "dac"
    }

    fn on_user_write(&mut self, lba: Lba, _: Option<u64>, _: Clock) -> Result<ClassId> {
        let top = self.top;
        let level = self.levels.entry(lba).or_insert(0);
        *level = (*level + 1).min(top);
        Ok(*level as ClassId)
    }

    fn on_gc_write(&mut self, block: &BlockMeta, _: ClassId, _: Clock) -> Result<ClassId> {
        let level = self.levels.entry(block.lba).or_insert(0);
        *level = level.saturating_sub(1);
        Ok(*level as ClassId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gc(dac: &mut Dac, lba: u64) -> ClassId {
        let b = BlockMeta { lba: Lba(lba), last_user_write_time: Clock(0), valid: true };
        dac.on_gc_write(&b, 0, Clock(0)).unwrap()
    }

    #[test]
    fn first_write_is_promoted_to_level_one() {
        let mut dac = Dac::new(6);
        assert_eq!(dac.on_user_write(Lba(7), None, Clock(0)).unwrap(), 1);
    }

    #[test]
    fn top_level_clamps() {
        let mut dac = Dac::new(6);
        for _ in 0..10 {
            dac.on_user_write(Lba(7), Some(1), Clock(0)).unwrap();
        }
        assert_eq!(dac.on_user_write(Lba(7), Some(1), Clock(0)).unwrap(), 5);
    }

    #[test]
    fn bottom_level_clamps() {
        let mut dac = Dac::new(6);
        assert_eq!(gc(&mut dac, 9), 0);
        dac.on_user_write(Lba(9), None, Clock(0)).unwrap();
        assert_eq!(gc(&mut dac, 9), 0);
        assert_eq!(gc(&mut dac, 9), 0);
    }

    proptest! {
        #[test]
        fn levels_stay_in_range(ops in prop::collection::vec((0u64..8, any::<bool>()), 0..200), k in 1u32..9) {
            let mut dac = Dac::new(k);
            for (lba, user) in ops {
                let class = if user {
                    dac.on_user_write(Lba(lba), None, Clock(0)).unwrap()
                } else {
                    gc(&mut dac, lba)
                };
                prop_assert!(class < k);
            }
        }
    }
}
