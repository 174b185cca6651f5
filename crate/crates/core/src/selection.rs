//! GC victim selection over the sealed-segment pool.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Clock, Segment, SegmentId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionPolicy {
    /// Highest garbage proportion first.
    Greedy,
    /// Highest `GP * age / (1 - GP)`, with age counted from sealing.
    CostBenefit,
}

impl SelectionPolicy {
    pub fn select<'a, I>(self, sealed: I, now: Clock) -> Result<SegmentId>
    where
        I: IntoIterator<Item = &'a Segment>,
    {
        match self {
            SelectionPolicy::Greedy => greedy_select(sealed),
            SelectionPolicy::CostBenefit => cost_benefit_select(sealed, now),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionPolicy::Greedy => "greedy",
            SelectionPolicy::CostBenefit => "cost-benefit",
        })
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" => Ok(SelectionPolicy::Greedy),
            "cost-benefit" | "costbenefit" | "cb" => Ok(SelectionPolicy::CostBenefit),
            other => Err(Error::Config(format!("unknown selector `{other}`"))),
        }
    }
}

/// Picks the segment with the highest garbage proportion; ties go to the smallest id.
pub fn greedy_select<'a, I>(sealed: I) -> Result<SegmentId>
where
    I: IntoIterator<Item = &'a Segment>,
{
    argmax_by_score(sealed, Segment::garbage_proportion)
}

/// Cost-benefit score of one segment. A fully invalid segment scores `+inf`.
pub fn cost_benefit_score(segment: &Segment, now: Clock) -> f64 {
    let gp = segment.garbage_proportion();
    if gp >= 1.0 {
        return f64::INFINITY;
    }
    let age = now.since(segment.seal_time.unwrap_or(segment.creation_time)) as f64;
    gp * age / (1.0 - gp)
}

pub fn cost_benefit_select<'a, I>(sealed: I, now: Clock) -> Result<SegmentId>
where
    I: IntoIterator<Item = &'a Segment>,
{
    argmax_by_score(sealed, |s| cost_benefit_score(s, now))
}

fn argmax_by_score<'a, I, F>(sealed: I, score: F) -> Result<SegmentId>
where
    I: IntoIterator<Item = &'a Segment>,
    F: Fn(&Segment) -> f64,
{
    let mut best: Option<(f64, SegmentId)> = None;
    for seg in sealed {
        let s = score(seg);
        let better = match best {
            None => true,
            Some((bs, bid)) => match s.partial_cmp(&bs).unwrap_or(Ordering::Equal) {
                Ordering::Greater => true,
                Ordering::Equal => seg.id < bid,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((s, seg.id));
        }
    }
    best.map(|(_, id)| id).ok_or(Error::EmptyPool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockMeta, Lba};
    use proptest::prelude::*;

    fn sealed(id: SegmentId, capacity: usize, invalid: usize, seal_time: u64) -> Segment {
        let mut seg = Segment::new(id, 0, Clock(0), capacity);
        for i in 0..capacity {
            seg.append(BlockMeta { lba: Lba(i as u64), last_user_write_time: Clock(0), valid: true });
        }
        for slot in 0..invalid {
            seg.invalidate(slot);
        }
        seg.seal_time = Some(Clock(seal_time));
        seg
    }

    #[test]
    fn greedy_picks_highest_gp() {
        let pool = vec![sealed(0, 10, 2, 0), sealed(1, 10, 5, 0), sealed(2, 10, 3, 0)];
        assert_eq!(greedy_select(&pool).unwrap(), 1);
    }

    #[test]
    fn greedy_tie_goes_to_smaller_id() {
        let pool = vec![sealed(9, 10, 4, 0), sealed(4, 10, 4, 0)];
        assert_eq!(greedy_select(&pool).unwrap(), 4);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let pool: Vec<Segment> = Vec::new();
        assert!(matches!(greedy_select(&pool), Err(Error::EmptyPool)));
        assert!(matches!(cost_benefit_select(&pool, Clock(5)), Err(Error::EmptyPool)));
    }

    #[test]
    fn cost_benefit_scores() {
        let seg = sealed(0, 10, 5, 0);
        assert!((cost_benefit_score(&seg, Clock(10)) - 10.0).abs() < 1e-12);
        let seg = sealed(0, 10, 0, 0);
        assert_eq!(cost_benefit_score(&seg, Clock(1000)), 0.0);
        let seg = sealed(0, 10, 10, 7);
        assert_eq!(cost_benefit_score(&seg, Clock(7)), f64::INFINITY);
    }

    #[test]
    fn cost_benefit_prefers_old_moderate_gp() {
        // GP 0.6 aged 5 scores 7.5; GP 0.3 aged 30 scores 90/7.
        let a = sealed(0, 10, 6, 95);
        let b = sealed(1, 10, 3, 70);
        assert!((cost_benefit_score(&a, Clock(100)) - 7.5).abs() < 1e-12);
        assert!((cost_benefit_score(&b, Clock(100)) - 90.0 / 7.0).abs() < 1e-12);
        assert_eq!(cost_benefit_select([&a, &b], Clock(100)).unwrap(), 1);
    }

    fn pool_strategy() -> impl Strategy<Value = Vec<Segment>> {
        prop::collection::vec((0usize..=16, 0u64..1000), 1..64).prop_map(|specs| {
            specs
                .into_iter()
                .enumerate()
                .map(|(i, (invalid, seal))| sealed(i as u64 * 3 + 1, 16, invalid, seal))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn greedy_matches_exhaustive_argmax(pool in pool_strategy()) {
            let max_invalid = pool.iter().map(|s| s.invalid_count()).max().unwrap();
            let expected = pool.iter().filter(|s| s.invalid_count() == max_invalid).map(|s| s.id).min().unwrap();
            prop_assert_eq!(greedy_select(&pool).unwrap(), expected);
        }

        #[test]
        fn greedy_is_permutation_invariant(pool in pool_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(greedy_select(&pool).unwrap(), greedy_select(&shuffled).unwrap());
        }

        #[test]
        fn cost_benefit_with_equal_ages_matches_greedy(pool in pool_strategy()) {
            let pool: Vec<Segment> = pool.into_iter().map(|mut s| { s.seal_time = Some(Clock(10)); s }).collect();
            prop_assert_eq!(cost_benefit_select(&pool, Clock(50)).unwrap(), greedy_select(&pool).unwrap());
        }
    }
}
