//! SepBIT: placement by inferred block invalidation time.
//!
//! User writes are split by the lifespan `v` of the block they invalidate:
//! `v < ℓ` goes to Class 1 (short-lived), everything else, including first
//! writes, to Class 2. GC rewrites out of Class 1 go to Class 3; other GC
//! rewrites are split by age `g = now - last_user_write_time` against
//! multiples of `ℓ` into Classes 4 and up.
//!
//! `ℓ` is the mean lifespan (creation to reclaim, in user-written blocks) of
//! the last [`LIFESPAN_WINDOW`] reclaimed Class-1 segments. It starts at
//! `+inf`, so until the first estimate every update is short-lived.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::index::{MemorySample, RecencyIndex};
use crate::model::{BlockMeta, ClassId, Clock, Lba, Segment};
use crate::{Error, Result};

use super::{PlacementScheme, SchemeDiagnostics};

/// Reclaimed segments per ℓ re-estimate.
pub const LIFESPAN_WINDOW: usize = 16;

/// Mean over non-overlapping windows of `window` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedMean {
    window: usize,
    count: usize,
    total: f64,
    value: f64,
}

impl WindowedMean {
    pub fn new(window: usize) -> Self {
        WindowedMean { window: window.max(1), count: 0, total: 0.0, value: f64::INFINITY }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn pending(&self) -> usize {
        self.count
    }

    /// Adds a sample. Returns true if the window closed and the mean changed.
    pub fn record(&mut self, sample: f64) -> bool {
        self.count += 1;
        self.total += sample;
        if self.count == self.window {
            self.value = self.total / self.window as f64;
            self.count = 0;
            self.total = 0.0;
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SepBitVariant {
    /// Six classes: user 1-2, GC 3-6.
    Full,
    /// User writes split into Classes 1-2; all GC rewrites to Class 3.
    UserOnly,
    /// All user writes to Class 1; GC rewrites split by age into Classes 2 and up.
    GcOnly,
}

/// How the GC age thresholds are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum AgeThresholds {
    /// Fixed multiples of ℓ, strictly increasing. Default `[4, 16]`.
    Multiples(Vec<f64>),
    /// `16^(i/(c-1)) * ℓ` for `i = 1..c-1`, giving `c` age classes.
    Geometric16(u32),
    /// `4^i * ℓ` for `i = 1..c-1`, giving `c` age classes.
    Powers4(u32),
    /// `[ℓ3, ℓ3 + ℓ4]` from the windowed mean lifespans of reclaimed Class-3
    /// and Class-4 segments.
    Adaptive,
}

impl Default for AgeThresholds {
    fn default() -> Self {
        AgeThresholds::Multiples(vec![4.0, 16.0])
    }
}

impl AgeThresholds {
    /// Number of age-separated GC classes this rule produces.
    pub fn class_count(&self) -> usize {
        match self {
            AgeThresholds::Multiples(m) => m.len() + 1,
            AgeThresholds::Geometric16(c) | AgeThresholds::Powers4(c) => (*c).max(1) as usize,
            AgeThresholds::Adaptive => 3,
        }
    }

    /// Threshold multipliers of ℓ; `None` for the adaptive rule.
    pub fn multipliers(&self) -> Option<Vec<f64>> {
        match self {
            AgeThresholds::Multiples(m) => Some(m.clone()),
            AgeThresholds::Geometric16(c) => {
                let c = (*c).max(1);
                Some((1..c).map(|i| 16f64.powf(i as f64 / (c - 1) as f64)).collect())
            }
            AgeThresholds::Powers4(c) => Some((1..(*c).max(1)).map(|i| 4f64.powi(i as i32)).collect()),
            AgeThresholds::Adaptive => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(m) = self.multipliers() {
            let increasing = m.windows(2).all(|w| w[0] < w[1]);
            if !increasing || m.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("age thresholds {m:?} must be positive and strictly increasing")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for AgeThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgeThresholds::Multiples(m) => {
                let parts: Vec<String> = m.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            AgeThresholds::Geometric16(c) => write!(f, "method1:{c}"),
            AgeThresholds::Powers4(c) => write!(f, "method2:{c}"),
            AgeThresholds::Adaptive => f.write_str("bitgw"),
        }
    }
}

impl FromStr for AgeThresholds {
    type Err = Error;

    /// Accepts `4,16`, `method1:C`, `method2:C` or `bitgw`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let count = |rest: &str| {
            rest.parse::<u32>()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::Config(format!("bad age-class count in `{s}`")))
        };
        let rule = if s == "bitgw" || s == "adaptive" {
            AgeThresholds::Adaptive
        } else if let Some(rest) = s.strip_prefix("method1:") {
            AgeThresholds::Geometric16(count(rest)?)
        } else if let Some(rest) = s.strip_prefix("method2:") {
            AgeThresholds::Powers4(count(rest)?)
        } else {
            let m = s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("bad threshold list `{s}`")))?;
            AgeThresholds::Multiples(m)
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// How user-write lifespans are checked against ℓ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexMode {
    /// FIFO of recent LBAs, sized to ℓ.
    #[default]
    Fifo,
    /// Exact lifespan of the invalidated block, read from its metadata.
    Exact,
}

impl FromStr for IndexMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" => Ok(IndexMode::Fifo),
            "exact" => Ok(IndexMode::Exact),
            other => Err(Error::Config(format!("unknown index mode `{other}`"))),
        }
    }
}

impl fmt::Display for IndexMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexMode::Fifo => "fifo",
            IndexMode::Exact => "exact",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SepBitParams {
    pub thresholds: AgeThresholds,
    /// Multiplies every separation threshold (0.5 halves, 2.0 doubles).
    pub scale: f64,
    pub index: IndexMode,
}

impl Default for SepBitParams {
    fn default() -> Self {
        SepBitParams { thresholds: AgeThresholds::default(), scale: 1.0, index: IndexMode::Fifo }
    }
}

/// Comparison of FIFO-index decisions against exact lifespans.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FifoAudit {
    /// Decisions made while the queue covered the full threshold window.
    pub compared: u64,
    pub divergent: u64,
    /// Decisions made while the queue was shorter than the threshold.
    pub uncovered: u64,
    pub uncovered_divergent: u64,
}

#[derive(Clone, Debug)]
pub struct SepBit {
    variant: SepBitVariant,
    params: SepBitParams,
    multipliers: Option<Vec<f64>>,
    ell: WindowedMean,
    ell3: WindowedMean,
    ell4: WindowedMean,
    index: Option<RecencyIndex>,
    audit: FifoAudit,
    ell_history: Vec<(u64, f64)>,
    samples: Vec<MemorySample>,
}

impl SepBit {
    pub fn new(variant: SepBitVariant, params: SepBitParams) -> Result<Self> {
        params.thresholds.validate()?;
        if !(params.scale > 0.0 && params.scale.is_finite()) {
            return Err(Error::Config(format!("threshold scale {} must be positive", params.scale)));
        }
        let index = match (variant, params.index) {
            (SepBitVariant::GcOnly, _) | (_, IndexMode::Exact) => None,
            (_, IndexMode::Fifo) => Some(RecencyIndex::new()),
        };
        Ok(SepBit {
            variant,
            multipliers: params.thresholds.multipliers(),
            params,
            ell: WindowedMean::new(LIFESPAN_WINDOW),
            ell3: WindowedMean::new(LIFESPAN_WINDOW),
            ell4: WindowedMean::new(LIFESPAN_WINDOW),
            index,
            audit: FifoAudit::default(),
            ell_history: Vec::new(),
            samples: Vec::new(),
        })
    }

    /// Current average Class-1 segment lifespan ℓ.
    pub fn ell(&self) -> f64 {
        self.ell.value()
    }

    pub fn recency_index(&self) -> Option<&RecencyIndex> {
        self.index.as_ref()
    }

    /// Total number of classes used by this configuration.
    pub fn class_count(&self) -> usize {
        let age_classes = self.params.thresholds.class_count();
        match self.variant {
            SepBitVariant::Full => 3 + age_classes,
            SepBitVariant::UserOnly => 3,
            SepBitVariant::GcOnly => 1 + age_classes,
        }
    }

    fn user_threshold(&self) -> f64 {
        self.params.scale * self.ell.value()
    }

    /// Index of the age class for `age` (0 = youngest).
    fn age_class(&self, age: u64) -> u32 {
        let g = age as f64;
        let ell = self.ell.value();
        match &self.multipliers {
            Some(m) => m.iter().take_while(|&&k| g >= k * self.params.scale * ell).count() as u32,
            None => {
                let t1 = self.ell3.value();
                let t2 = t1 + self.ell4.value();
                (g >= t1) as u32 + (g >= t2) as u32
            }
        }
    }

    /// Class for a user write given whether it was judged short-lived.
    fn user_class(&self, short_lived: bool) -> ClassId {
        match self.variant {
            SepBitVariant::GcOnly => 1,
            _ if short_lived => 1,
            _ => 2,
        }
    }

    /// Class for a GC rewrite of `block` from a segment of class `origin`.
    pub fn gc_class(&self, block: &BlockMeta, origin: ClassId, now: Clock) -> ClassId {
        match self.variant {
            SepBitVariant::UserOnly => 3,
            SepBitVariant::GcOnly => 2 + self.age_class(block.age(now)),
            SepBitVariant::Full if origin == 1 => 3,
            SepBitVariant::Full => 4 + self.age_class(block.age(now)),
        }
    }
}

impl PlacementScheme for SepBit {
    fn name(&self) -> &'static str {
        match self.variant {
            SepBitVariant::Full => "sepbit",
            SepBitVariant::UserOnly => "uw",
            SepBitVariant::GcOnly => "gw",
        }
    }

    fn on_user_write(&mut self, lba: Lba, prev_lifespan: Option<u64>, _now: Clock) -> Result<ClassId> {
        if self.variant == SepBitVariant::GcOnly {
            return Ok(1);
        }
        let threshold = self.user_threshold();
        let exact = prev_lifespan.is_some_and(|v| (v as f64) < threshold);
        let short_lived = match self.index.as_mut() {
            None => exact,
            Some(idx) => {
                let recent = idx.is_recent(lba, threshold);
                // Before the first ℓ estimate the queue has never dequeued and holds every write.
                let covered = idx.target_capacity().is_none() || idx.len() as f64 >= threshold;
                let diverged = recent != exact;
                if covered {
                    self.audit.compared += 1;
                    self.audit.divergent += diverged as u64;
                } else {
                    self.audit.uncovered += 1;
                    self.audit.uncovered_divergent += diverged as u64;
                }
                idx.record_write(lba);
                recent
            }
        };
        Ok(self.user_class(short_lived))
    }

    fn on_gc_write(&mut self, block: &BlockMeta, origin: ClassId, now: Clock) -> Result<ClassId> {
        Ok(self.gc_class(block, origin, now))
    }

    fn notify_reclaim(&mut self, victim: &Segment, now: Clock) {
        let lifespan = now.since(victim.creation_time) as f64;
        match victim.class_id {
            1 => {
                if self.ell.record(lifespan) {
                    let ell = self.ell.value();
                    self.ell_history.push((now.0, ell));
                    let threshold = self.user_threshold();
                    if let Some(idx) = self.index.as_mut() {
                        idx.retarget(threshold);
                        self.samples.push(idx.sample(now.0));
                    }
                }
            }
            3 if self.params.thresholds == AgeThresholds::Adaptive => {
                self.ell3.record(lifespan);
            }
            4 if self.params.thresholds == AgeThresholds::Adaptive => {
                self.ell4.record(lifespan);
            }
            _ => {}
        }
    }

    fn diagnostics(&self) -> SchemeDiagnostics {
        SchemeDiagnostics {
            ell_history: self.ell_history.clone(),
            memory_samples: self.samples.clone(),
            final_unique_lbas: self.index.as_ref().map(RecencyIndex::unique_lba_count),
            fifo_audit: self.index.as_ref().map(|_| self.audit),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn segment(class_id: ClassId, creation: u64) -> Segment {
        Segment::new(0, class_id, Clock(creation), 4)
    }

    fn exact() -> SepBit {
        SepBit::new(SepBitVariant::Full, SepBitParams { index: IndexMode::Exact, ..Default::default() }).unwrap()
    }

    fn with_ell(mut s: SepBit, ell: u64) -> SepBit {
        for _ in 0..LIFESPAN_WINDOW {
            s.notify_reclaim(&segment(1, 0), Clock(ell));
        }
        assert_eq!(s.ell(), ell as f64);
        s
    }

    fn block(written: u64) -> BlockMeta {
        BlockMeta { lba: Lba(1), last_user_write_time: Clock(written), valid: true }
    }

    #[test]
    fn cold_start_treats_every_update_as_short_lived() {
        let mut s = exact();
        assert_eq!(s.ell(), f64::INFINITY);
        assert_eq!(s.on_user_write(Lba(1), Some(1_000_000_000), Clock(5)).unwrap(), 1);
    }

    #[test]
    fn new_write_is_long_lived() {
        let mut s = exact();
        assert_eq!(s.on_user_write(Lba(1), None, Clock(0)).unwrap(), 2);
        let mut s = SepBit::new(SepBitVariant::Full, SepBitParams::default()).unwrap();
        assert_eq!(s.on_user_write(Lba(1), None, Clock(0)).unwrap(), 2);
    }

    #[test]
    fn long_invalidated_lifespan_goes_to_class_two() {
        let mut s = with_ell(exact(), 1000);
        assert_eq!(s.on_user_write(Lba(1), Some(1500), Clock(5000)).unwrap(), 2);
        assert_eq!(s.on_user_write(Lba(1), Some(999), Clock(5000)).unwrap(), 1);
        // Strict comparison at the boundary.
        assert_eq!(s.on_user_write(Lba(1), Some(1000), Clock(5000)).unwrap(), 2);
    }

    #[test]
    fn gc_classes_follow_age_thresholds() {
        let s = with_ell(exact(), 1000);
        assert_eq!(s.gc_class(&block(0), 1, Clock(100_000)), 3);
        assert_eq!(s.gc_class(&block(0), 4, Clock(2000)), 4);
        assert_eq!(s.gc_class(&block(0), 2, Clock(4000)), 5);
        assert_eq!(s.gc_class(&block(0), 2, Clock(15_999)), 5);
        assert_eq!(s.gc_class(&block(0), 2, Clock(20_000)), 6);
    }

    #[test]
    fn ell_needs_a_full_window() {
        let mut s = exact();
        for _ in 0..LIFESPAN_WINDOW - 1 {
            s.notify_reclaim(&segment(1, 0), Clock(1000));
        }
        assert_eq!(s.ell(), f64::INFINITY);
        // Other classes never count.
        s.notify_reclaim(&segment(2, 0), Clock(1000));
        assert_eq!(s.ell(), f64::INFINITY);
        s.notify_reclaim(&segment(1, 0), Clock(1000));
        assert_eq!(s.ell(), 1000.0);
    }

    #[test]
    fn ell_is_window_mean() {
        let mut s = exact();
        for life in 1..=16u64 {
            s.notify_reclaim(&segment(1, 100), Clock(100 + life));
        }
        assert_eq!(s.ell(), 8.5);
    }

    #[test]
    fn user_only_variant() {
        let mut s = SepBit::new(SepBitVariant::UserOnly, SepBitParams::default()).unwrap();
        assert_eq!(s.on_gc_write(&block(0), 1, Clock(10)).unwrap(), 3);
        assert_eq!(s.on_gc_write(&block(0), 2, Clock(10)).unwrap(), 3);
        assert_eq!(s.on_user_write(Lba(1), None, Clock(10)).unwrap(), 2);
        assert_eq!(s.class_count(), 3);
    }

    #[test]
    fn gc_only_variant() {
        let s = SepBit::new(SepBitVariant::GcOnly, SepBitParams::default()).unwrap();
        let mut s = with_ell(s, 1000);
        assert_eq!(s.on_user_write(Lba(1), Some(1), Clock(10_000)).unwrap(), 1);
        assert_eq!(s.on_user_write(Lba(1), None, Clock(10_000)).unwrap(), 1);
        // No Class-1 fast path: age decides.
        assert_eq!(s.gc_class(&block(0), 1, Clock(5000)), 3);
        assert_eq!(s.gc_class(&block(0), 1, Clock(100)), 2);
        assert_eq!(s.gc_class(&block(0), 1, Clock(50_000)), 4);
        assert_eq!(s.class_count(), 4);
    }

    #[test]
    fn threshold_methods() {
        let m1: AgeThresholds = "method1:3".parse().unwrap();
        assert_eq!(m1.multipliers().unwrap(), vec![4.0, 16.0]);
        let m1: AgeThresholds = "method1:5".parse().unwrap();
        let got = m1.multipliers().unwrap();
        for (g, e) in got.iter().zip([2.0, 4.0, 8.0, 16.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        let m2: AgeThresholds = "method2:5".parse().unwrap();
        assert_eq!(m2.multipliers().unwrap(), vec![4.0, 16.0, 64.0, 256.0]);
        let m2: AgeThresholds = "method2:2".parse().unwrap();
        assert_eq!(m2.multipliers().unwrap(), vec![4.0]);
        assert_eq!("4,16".parse::<AgeThresholds>().unwrap(), AgeThresholds::default());
        assert!("16,4".parse::<AgeThresholds>().is_err());
        assert!("method1:0".parse::<AgeThresholds>().is_err());
    }

    #[test]
    fn scale_halves_every_threshold() {
        let params = SepBitParams { scale: 0.5, index: IndexMode::Exact, ..Default::default() };
        let s = SepBit::new(SepBitVariant::Full, params).unwrap();
        let mut s = with_ell(s, 1000);
        assert_eq!(s.on_user_write(Lba(1), Some(600), Clock(9000)).unwrap(), 2);
        assert_eq!(s.on_user_write(Lba(1), Some(400), Clock(9000)).unwrap(), 1);
        assert_eq!(s.gc_class(&block(0), 2, Clock(2000)), 5);
        assert_eq!(s.gc_class(&block(0), 2, Clock(8000)), 6);
    }

    #[test]
    fn adaptive_thresholds_use_class_three_and_four_lifespans() {
        let params = SepBitParams { thresholds: AgeThresholds::Adaptive, index: IndexMode::Exact, ..Default::default() };
        let mut s = SepBit::new(SepBitVariant::Full, params).unwrap();
        assert_eq!(s.gc_class(&block(0), 2, Clock(1_000_000)), 4);
        for _ in 0..LIFESPAN_WINDOW {
            s.notify_reclaim(&segment(3, 0), Clock(100));
            s.notify_reclaim(&segment(4, 0), Clock(300));
        }
        assert_eq!(s.gc_class(&block(0), 2, Clock(99)), 4);
        assert_eq!(s.gc_class(&block(0), 2, Clock(100)), 5);
        assert_eq!(s.gc_class(&block(0), 2, Clock(399)), 5);
        assert_eq!(s.gc_class(&block(0), 2, Clock(400)), 6);
    }

    #[test]
    fn fifo_retargets_on_ell_update() {
        let mut s = SepBit::new(SepBitVariant::Full, SepBitParams::default()).unwrap();
        for i in 0..100 {
            s.on_user_write(Lba(i), None, Clock(i)).unwrap();
        }
        let s = with_ell(s, 40);
        let idx = s.recency_index().unwrap();
        assert_eq!(idx.target_capacity(), Some(40));
        assert_eq!(s.diagnostics().memory_samples.len(), 1);
    }

    proptest! {
        #[test]
        fn gc_class_is_monotone_in_age(ell in 1u64..10_000, a in 0u64..1_000_000, b in 0u64..1_000_000) {
            let s = with_ell(exact(), ell);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let now = Clock(2_000_000);
            let young = s.gc_class(&block(now.0 - lo), 2, now);
            let old = s.gc_class(&block(now.0 - hi), 2, now);
            prop_assert!(young <= old);
            prop_assert!((4..=6).contains(&young) && (4..=6).contains(&old));
        }
    }
}
