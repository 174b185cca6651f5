//! Lifespan statistics measured on annotated write streams.

use std::collections::HashMap;

use serde::Serialize;

use crate::model::{GcEvent, Lba};
use crate::workload::AnnotatedWrite;
use crate::{Error, Result};

/// Drops writes whose look-back or look-ahead window runs past either end of
/// the trace. `records` must be indexed by position.
///
/// Near the start every LBA looks new and near the end every block looks
/// immortal, which biases both conditional estimators.
pub fn trim_censored(records: &[AnnotatedWrite], lookback: u64, lookahead: u64) -> &[AnnotatedWrite] {
    let len = records.len() as u64;
    let start = lookback.min(len);
    let end = len.saturating_sub(lookahead).max(start);
    &records[start as usize..end as usize]
}

fn fraction(hits: usize, total: usize) -> Result<f64> {
    if total == 0 {
        Err(Error::EmptyConditioningSet)
    } else {
        Ok(hits as f64 / total as f64)
    }
}

/// Among writes that invalidate a block with `v <= v0`, the fraction whose own
/// lifespan is at most `u0`. Never-invalidated writes count as `u > u0`.
pub fn empirical_cond_prob_user(records: &[AnnotatedWrite], u0: u64, v0: u64) -> Result<f64> {
    let (mut hits, mut total) = (0, 0);
    for r in records.iter().filter(|r| r.prev_lifespan.is_some_and(|v| v <= v0)) {
        total += 1;
        hits += r.lifespan.is_some_and(|u| u <= u0) as usize;
    }
    fraction(hits, total)
}

/// Among writes still alive after `g0` further writes (`u > g0`), the
/// fraction invalidated within `r0` more (`u <= g0 + r0`).
pub fn empirical_cond_prob_gc(records: &[AnnotatedWrite], g0: u64, r0: u64) -> Result<f64> {
    let (mut hits, mut total) = (0, 0);
    for r in records.iter().filter(|r| r.lifespan.is_none_or(|u| u > g0)) {
        total += 1;
        hits += r.lifespan.is_some_and(|u| u <= g0 + r0) as usize;
    }
    fraction(hits, total)
}

pub const SHORT_LIVED_MULTIPLES: [f64; 4] = [0.1, 0.2, 0.4, 0.8];
pub const RARE_LIFESPAN_MULTIPLES: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
/// Update-frequency rank groups as fractions of written LBAs.
pub const FREQUENCY_GROUPS: [(f64, f64); 4] = [(0.0, 0.01), (0.01, 0.05), (0.05, 0.10), (0.10, 0.20)];
/// LBAs updated at most this many times count as rarely updated.
pub const RARE_UPDATES: u64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bucket {
    /// Upper bound as a multiple of the WSS (exclusive).
    pub wss_multiple: f64,
    /// Cumulative fraction below the bound.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyGroup {
    pub from_rank: f64,
    pub to_rank: f64,
    pub lbas: usize,
    /// Coefficient of variation of invalidated lifespans; `None` if the group
    /// has no invalidated block.
    pub cv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationReport {
    pub writes: u64,
    pub wss_blocks: u64,
    /// Lifespan CDF of all user-written blocks at multiples of the WSS.
    pub short_lived: Option<Vec<Bucket>>,
    pub frequency_groups: Vec<FrequencyGroup>,
    /// Share of user-written blocks whose LBA is rarely updated.
    pub rare_write_fraction: Option<f64>,
    /// Lifespan CDF of blocks of rarely updated LBAs.
    pub rare_lifespans: Option<Vec<Bucket>>,
}

fn cdf(lifespans: &[u64], wss: u64, multiples: &[f64]) -> Option<Vec<Bucket>> {
    if lifespans.is_empty() {
        return None;
    }
    Some(
        multiples
            .iter()
            .map(|&m| {
                let bound = m * wss as f64;
                let below = lifespans.iter().filter(|&&u| (u as f64) < bound).count();
                Bucket { wss_multiple: m, fraction: below as f64 / lifespans.len() as f64 }
            })
            .collect(),
    )
}

fn coefficient_of_variation(xs: &[u64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(var.sqrt() / mean)
}

/// Lifespan-skew statistics of one volume. `records` must cover the whole
/// trace so never-invalidated lifespans run to its end. Updates of an LBA are
/// its writes after the first.
pub fn observation_stats(records: &[AnnotatedWrite], wss_blocks: u64) -> ObservationReport {
    let end = records.len() as u64;
    let mut writes_per_lba: HashMap<Lba, u64> = HashMap::new();
    for r in records {
        *writes_per_lba.entry(r.lba).or_default() += 1;
    }
    let updates = |lba: Lba| writes_per_lba[&lba] - 1;

    let all: Vec<u64> = records.iter().map(|r| r.lifespan_or_until(end)).collect();
    let short_lived = cdf(&all, wss_blocks, &SHORT_LIVED_MULTIPLES);

    let mut ranked: Vec<(u64, Lba)> = writes_per_lba.iter().map(|(&lba, &w)| (w - 1, lba)).collect();
    ranked.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let n_lbas = ranked.len() as f64;
    let mut group_of: HashMap<Lba, usize> = HashMap::new();
    let mut frequency_groups = Vec::new();
    for (g, &(from, to)) in FREQUENCY_GROUPS.iter().enumerate() {
        let (lo, hi) = ((from * n_lbas).floor() as usize, (to * n_lbas).floor() as usize);
        for &(_, lba) in &ranked[lo..hi] {
            group_of.insert(lba, g);
        }
        frequency_groups.push(FrequencyGroup { from_rank: from, to_rank: to, lbas: hi - lo, cv: None });
    }
    let mut per_group: Vec<Vec<u64>> = vec![Vec::new(); FREQUENCY_GROUPS.len()];
    for r in records {
        if let (Some(u), Some(&g)) = (r.lifespan, group_of.get(&r.lba)) {
            per_group[g].push(u);
        }
    }
    for (group, lifespans) in frequency_groups.iter_mut().zip(&per_group) {
        group.cv = coefficient_of_variation(lifespans);
    }

    let rare: Vec<u64> = records
        .iter()
        .filter(|r| updates(r.lba) <= RARE_UPDATES)
        .map(|r| r.lifespan_or_until(end))
        .collect();
    let rare_write_fraction = (end > 0).then(|| rare.len() as f64 / end as f64);
    let rare_lifespans = cdf(&rare, wss_blocks, &RARE_LIFESPAN_MULTIPLES);

    ObservationReport {
        writes: end,
        wss_blocks,
        short_lived,
        frequency_groups,
        rare_write_fraction,
        rare_lifespans,
    }
}

/// Garbage proportions of all reclaimed segments.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GpDistribution {
    /// Sorted ascending.
    pub values: Vec<f64>,
    pub median: f64,
}

impl GpDistribution {
    /// Fraction of victims with GP at most `gp`.
    pub fn cdf(&self, gp: f64) -> f64 {
        self.values.partition_point(|&v| v <= gp) as f64 / self.values.len() as f64
    }

    /// `(gp, cumulative fraction)` at each distinct GP value.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.values.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = (i + 1) as f64 / n,
                _ => out.push((v, (i + 1) as f64 / n)),
            }
        }
        out
    }
}

pub fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

pub fn collected_gp_distribution(log: &[GcEvent]) -> Result<GpDistribution> {
    let mut values: Vec<f64> = log.iter().flat_map(|e| e.victims.iter().map(|v| v.gp)).collect();
    values.sort_by(f64::total_cmp);
    let median = median(&values).ok_or(Error::EmptyGcLog)?;
    Ok(GpDistribution { values, median })
}
