//! Seeded synthetic write streams over a Zipf popularity distribution.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::ZipfModel;
use crate::model::Lba;
use crate::{Error, Result};

const DRAW_STREAM: u64 = 0;
const LAYOUT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub wss_blocks: u64,
    pub alpha: f64,
    pub total_writes: u64,
    /// Share of the working set forming the frequently updated region.
    pub hot_fraction: f64,
    /// Writes between re-permutations of the hot region.
    pub churn_period: u64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 512 MiB working set, 30x traffic, 20% hot region re-permuted every
    /// 1% of the working set.
    fn default() -> Self {
        let wss = 1 << 17;
        SyntheticSpec {
            wss_blocks: wss,
            alpha: 1.0,
            total_writes: 30 * wss,
            hot_fraction: 0.2,
            churn_period: wss.div_ceil(100),
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.wss_blocks == 0 {
            return Err(Error::Config("synthetic WSS must be positive".into()));
        }
        if !(self.hot_fraction > 0.0 && self.hot_fraction < 1.0) {
            return Err(Error::Config(format!("hot fraction {} outside (0, 1)", self.hot_fraction)));
        }
        if self.churn_period == 0 {
            return Err(Error::Config("churn period must be positive".into()));
        }
        Ok(())
    }

    /// Hot-region size in LBAs, at least one and leaving at least one cold LBA
    /// when the working set has two or more.
    pub fn hot_blocks(&self) -> u64 {
        let hot = (self.hot_fraction * self.wss_blocks as f64).round() as u64;
        hot.clamp(1, self.wss_blocks.saturating_sub(1).max(1))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Inverse-CDF sampler of 0-based Zipf ranks.
struct RankSampler {
    cdf: Vec<f64>,
}

impl RankSampler {
    fn new(spec: &SyntheticSpec) -> Result<Self> {
        Ok(RankSampler { cdf: ZipfModel::new(spec.wss_blocks as usize, spec.alpha)?.cumulative() })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let x: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= x).min(self.cdf.len() - 1)
    }
}

/// I.i.d. Zipf writes; the rank-to-LBA mapping is a seeded permutation of
/// `0..wss_blocks`.
pub fn gen_zipf(spec: &SyntheticSpec) -> Result<Vec<Lba>> {
    spec.validate()?;
    let sampler = RankSampler::new(spec)?;
    let mut layout: Vec<u64> = (0..spec.wss_blocks).collect();
    layout.shuffle(&mut spec.rng(LAYOUT_STREAM));
    let mut draws = spec.rng(DRAW_STREAM);
    Ok((0..spec.total_writes).map(|_| Lba(layout[sampler.draw(&mut draws)])).collect())
}

/// Zipf writes over a hot region `0..hot` holding the top `hot` ranks and a
/// cold region holding the rest. Every `churn_period` writes the hot ranks are
/// reassigned to a fresh permutation of the hot LBAs, which moves popularity
/// inside the region without changing the rank distribution.
pub fn gen_two_region(spec: &SyntheticSpec) -> Result<Vec<Lba>> {
    spec.validate()?;
    let sampler = RankSampler::new(spec)?;
    let hot = spec.hot_blocks();
    let mut layout_rng = spec.rng(LAYOUT_STREAM);
    let mut hot_layout: Vec<u64> = (0..hot).collect();
    let mut cold_layout: Vec<u64> = (hot..spec.wss_blocks).collect();
    hot_layout.shuffle(&mut layout_rng);
    cold_layout.shuffle(&mut layout_rng);
    let mut draws = spec.rng(DRAW_STREAM);
    let mut out = Vec::with_capacity(spec.total_writes as usize);
    for t in 0..spec.total_writes {
        if t > 0 && t % spec.churn_period == 0 {
            hot_layout.shuffle(&mut layout_rng);
        }
        let rank = sampler.draw(&mut draws) as u64;
        let lba = if rank < hot { hot_layout[rank as usize] } else { cold_layout[(rank - hot) as usize] };
        out.push(Lba(lba));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(wss: u64, alpha: f64, writes: u64) -> SyntheticSpec {
        SyntheticSpec { wss_blocks: wss, alpha, total_writes: writes, churn_period: writes + 1, ..Default::default() }
    }

    fn counts(lbas: &[Lba], n: u64) -> Vec<u64> {
        let mut c = vec![0u64; n as usize];
        for l in lbas {
            c[l.0 as usize] += 1;
        }
        c
    }

    #[test]
    fn uniform_frequencies_within_binomial_bounds() {
        let (n, w) = (256u64, 256_000u64);
        let c = counts(&gen_zipf(&spec(n, 0.0, w)).unwrap(), n);
        let mean = w as f64 / n as f64;
        let sd = (w as f64 * (1.0 / n as f64) * (1.0 - 1.0 / n as f64)).sqrt();
        // 4.5 sigma keeps the family-wise false-alarm rate negligible over 256 cells.
        assert!(c.iter().all(|&x| (x as f64 - mean).abs() < 4.5 * sd), "{c:?}");
    }

    #[test]
    fn top_fifth_share_at_alpha_one() {
        let n = 1 << 14;
        let model = ZipfModel::new(n, 1.0).unwrap();
        let mut c = counts(&gen_zipf(&spec(n as u64, 1.0, 20 * n as u64)).unwrap(), n as u64);
        c.sort_unstable_by(|a, b| b.cmp(a));
        let top: u64 = c[..n / 5].iter().sum();
        let share = top as f64 / (20 * n) as f64;
        assert!((share - model.top_fraction_traffic(0.2)).abs() < 0.02, "{share}");
    }

    #[test]
    fn same_seed_same_stream() {
        let s = SyntheticSpec { wss_blocks: 1000, total_writes: 5000, churn_period: 100, ..Default::default() };
        assert_eq!(gen_zipf(&s).unwrap(), gen_zipf(&s).unwrap());
        assert_eq!(gen_two_region(&s).unwrap(), gen_two_region(&s).unwrap());
        let other = SyntheticSpec { seed: 7, ..s.clone() };
        assert_ne!(gen_two_region(&s).unwrap(), gen_two_region(&other).unwrap());
    }

    #[test]
    fn hot_region_takes_top_rank_mass_each_epoch() {
        let s = SyntheticSpec { wss_blocks: 1000, alpha: 1.0, total_writes: 40_000, churn_period: 10_000, ..Default::default() };
        let model = ZipfModel::new(1000, 1.0).unwrap();
        let expected = model.top_fraction_traffic(0.2);
        let lbas = gen_two_region(&s).unwrap();
        for epoch in lbas.chunks(10_000) {
            let hot = epoch.iter().filter(|l| l.0 < 200).count() as f64 / epoch.len() as f64;
            assert!((hot - expected).abs() < 0.02, "{hot} vs {expected}");
        }
    }

    #[test]
    fn churn_preserves_rank_frequencies() {
        // Chi-square of sorted per-epoch counts against the expected rank mass.
        let (n, per_epoch) = (200u64, 100_000u64);
        let s = SyntheticSpec { wss_blocks: n, alpha: 1.0, total_writes: 2 * per_epoch, churn_period: per_epoch, ..Default::default() };
        let p = ZipfModel::new(n as usize, 1.0).unwrap().probabilities().to_vec();
        let lbas = gen_two_region(&s).unwrap();
        let first = counts(&lbas[..per_epoch as usize], n);
        let second = counts(&lbas[per_epoch as usize..], n);
        assert_ne!(first.iter().position(|&c| c == *first.iter().max().unwrap()), second.iter().position(|&c| c == *second.iter().max().unwrap()));
        for epoch in [first, second] {
            let mut sorted = epoch.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            let chi2: f64 = sorted
                .iter()
                .zip(&p)
                .map(|(&o, &pi)| {
                    let e = pi * per_epoch as f64;
                    (o as f64 - e).powi(2) / e
                })
                .sum();
            // Sorting lowers chi-square; 199 degrees of freedom, 99.9% quantile is about 270.
            assert!(chi2 < 270.0, "{chi2}");
        }
    }

    #[test]
    fn no_churn_keeps_region_layout() {
        let s = SyntheticSpec { wss_blocks: 500, total_writes: 10_000, churn_period: 10_000, ..Default::default() };
        let lbas = gen_two_region(&s).unwrap();
        // Most popular LBA is the single hot LBA holding rank 0, fixed throughout.
        let c = counts(&lbas, 500);
        let top = c.iter().enumerate().max_by_key(|&(_, &x)| x).unwrap().0;
        assert!(top < 100);
        let half = counts(&lbas[5000..], 500);
        let top2 = half.iter().enumerate().max_by_key(|&(_, &x)| x).unwrap().0;
        assert_eq!(top, top2);
    }
}
