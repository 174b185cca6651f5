//! Data placement: deciding which class (and hence which open segment) each
//! written block goes to.
//!
//! A scheme sees three events: a user write (with the lifespan of the block it
//! invalidates, if any), a GC rewrite of a still-valid block, and the reclaim
//! of a victim segment. Schemes are deterministic functions of these events
//! and their own state.

mod basic;
mod dac;
mod oracle;
mod sepbit;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use basic::{NoSep, SepGc};
pub use dac::Dac;
pub use oracle::{fk_class, ideal_assign, FutureKnowledge, Ideal, IDEAL_OVERFLOW_CLASS};
pub use sepbit::{
    AgeThresholds, FifoAudit, IndexMode, SepBit, SepBitParams, SepBitVariant, WindowedMean,
    LIFESPAN_WINDOW,
};

use crate::index::MemorySample;
use crate::model::{BlockMeta, ClassId, Clock, Lba, Segment, VolumeConfig};
use crate::workload::AnnotatedWrite;
use crate::{Error, Result};

pub trait PlacementScheme: Send {
    fn name(&self) -> &'static str;

    /// Class for a user-written block. `prev_lifespan` is the lifespan of the
    /// block this write invalidates, or `None` for a first write.
    fn on_user_write(&mut self, lba: Lba, prev_lifespan: Option<u64>, now: Clock) -> Result<ClassId>;

    /// Class for a valid block rewritten by GC out of a segment of class `origin`.
    fn on_gc_write(&mut self, block: &BlockMeta, origin: ClassId, now: Clock) -> Result<ClassId>;

    fn notify_reclaim(&mut self, _victim: &Segment, _now: Clock) {}

    fn diagnostics(&self) -> SchemeDiagnostics {
        SchemeDiagnostics::default()
    }
}

/// Runtime observations a scheme can expose after a replay.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SchemeDiagnostics {
    /// `(clock, ℓ)` at each re-estimate of the Class-1 segment lifespan.
    pub ell_history: Vec<(u64, f64)>,
    /// Recency-index size at each ℓ re-estimate.
    pub memory_samples: Vec<MemorySample>,
    /// Recency-index unique LBAs at the time of the call.
    pub final_unique_lbas: Option<usize>,
    pub fifo_audit: Option<FifoAudit>,
}

/// Scheme selector plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SchemeKind {
    NoSep,
    SepGc,
    SepBit(SepBitParams),
    /// SepBIT's user-write separation only; one class for all GC rewrites.
    Uw(SepBitParams),
    /// SepBIT's GC-write separation only; one class for all user writes.
    Gw(SepBitParams),
    Dac,
    Fk,
    Ideal,
}

impl SchemeKind {
    pub fn sepbit() -> Self {
        SchemeKind::SepBit(SepBitParams::default())
    }

    pub fn needs_annotation(&self) -> bool {
        matches!(self, SchemeKind::Fk | SchemeKind::Ideal)
    }

    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::NoSep => "nosep",
            SchemeKind::SepGc => "sepgc",
            SchemeKind::SepBit(_) => "sepbit",
            SchemeKind::Uw(_) => "uw",
            SchemeKind::Gw(_) => "gw",
            SchemeKind::Dac => "dac",
            SchemeKind::Fk => "fk",
            SchemeKind::Ideal => "ideal",
        }
    }

    pub fn sepbit_params(&self) -> Option<&SepBitParams> {
        match self {
            SchemeKind::SepBit(p) | SchemeKind::Uw(p) | SchemeKind::Gw(p) => Some(p),
            _ => None,
        }
    }

    pub fn with_sepbit_params(self, params: SepBitParams) -> Self {
        match self {
            SchemeKind::SepBit(_) => SchemeKind::SepBit(params),
            SchemeKind::Uw(_) => SchemeKind::Uw(params),
            SchemeKind::Gw(_) => SchemeKind::Gw(params),
            other => other,
        }
    }

    /// Instantiates the scheme for one volume. FK and Ideal need the volume's
    /// full lifespan annotation.
    pub fn build(
        &self,
        config: &VolumeConfig,
        annotation: Option<&[AnnotatedWrite]>,
    ) -> Result<Box<dyn PlacementScheme>> {
        let annotation = || annotation.ok_or(Error::MissingAnnotation(0));
        Ok(match self {
            SchemeKind::NoSep => Box::new(NoSep),
            SchemeKind::SepGc => Box::new(SepGc),
            SchemeKind::SepBit(p) => Box::new(SepBit::new(SepBitVariant::Full, p.clone())?),
            SchemeKind::Uw(p) => Box::new(SepBit::new(SepBitVariant::UserOnly, p.clone())?),
            SchemeKind::Gw(p) => Box::new(SepBit::new(SepBitVariant::GcOnly, p.clone())?),
            SchemeKind::Dac => Box::new(Dac::new(config.num_classes)),
            SchemeKind::Fk => Box::new(FutureKnowledge::new(
                annotation()?,
                config.segment_blocks() as u64,
                config.num_classes,
            )),
            SchemeKind::Ideal => Box::new(Ideal::new(annotation()?, config.segment_blocks() as u64)),
        })
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = SepBitParams::default;
        Ok(match s.to_ascii_lowercase().as_str() {
            "nosep" => SchemeKind::NoSep,
            "sepgc" => SchemeKind::SepGc,
            "sepbit" => SchemeKind::SepBit(p()),
            "uw" => SchemeKind::Uw(p()),
            "gw" => SchemeKind::Gw(p()),
            "dac" => SchemeKind::Dac,
            "fk" => SchemeKind::Fk,
            "ideal" => SchemeKind::Ideal,
            other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        for name in ["nosep", "sepgc", "sepbit", "uw", "gw", "dac", "fk", "ideal"] {
            let kind: SchemeKind = name.parse().unwrap();
            assert_eq!(kind.to_string(), name);
        }
        assert!("sfs".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn oracles_require_annotation() {
        let cfg = VolumeConfig::default();
        assert!(matches!(SchemeKind::Fk.build(&cfg, None), Err(Error::MissingAnnotation(_))));
        assert!(matches!(SchemeKind::Ideal.build(&cfg, None), Err(Error::MissingAnnotation(_))));
        assert!(SchemeKind::sepbit().build(&cfg, None).is_ok());
    }
}
