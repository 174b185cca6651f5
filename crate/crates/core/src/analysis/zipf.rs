//! Closed-form lifespan probabilities under i.i.d. Zipf writes.
//!
//! Each write hits LBA `i` with probability `p_i ∝ i^-α`. A block of LBA `i`
//! survives `x` further writes with probability `(1 - p_i)^x`, which is
//! evaluated as `exp(x * ln(1 - p_i))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ZipfModel {
    alpha: f64,
    p: Vec<f64>,
    /// `ln(1 - p_i)`.
    ln_survive: Vec<f64>,
}

fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

impl ZipfModel {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("Zipf model needs at least one LBA".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("Zipf skewness {alpha} must be finite and non-negative")));
        }
        let weights: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-alpha)).collect();
        let total = kahan_sum(weights.iter().rev().copied());
        let p: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        let ln_survive = p.iter().map(|&pi| (-pi).ln_1p()).collect();
        Ok(ZipfModel { alpha, p, ln_survive })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Running sums of `p`, ending at 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .p
            .iter()
            .map(|&pi| {
                acc += pi;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    fn survive(&self, i: usize, x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            (x * self.ln_survive[i]).exp()
        }
    }

    /// `Pr(u <= u0 | v <= v0)` for a user-written block, in blocks.
    pub fn cond_prob_user(&self, u0: f64, v0: f64) -> Result<f64> {
        if !(v0 >= 1.0) {
            return Err(Error::Degenerate("v0 must be at least one block"));
        }
        let (num, den) = (0..self.n()).fold((0.0, 0.0), |(num, den), i| {
            let within_v = (1.0 - self.survive(i, v0)) * self.p[i];
            (num + (1.0 - self.survive(i, u0)) * within_v, den + within_v)
        });
        if den <= 0.0 {
            return Err(Error::Degenerate("no block has v <= v0"));
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// `Pr(u <= g0 + r0 | u > g0)` for a GC-rewritten block of age `g0`.
    pub fn cond_prob_gc(&self, g0: f64, r0: f64) -> Result<f64> {
        if !(g0 >= 0.0 && r0 >= 0.0) {
            return Err(Error::Degenerate("g0 and r0 must be non-negative"));
        }
        let (num, den) = (0..self.n()).fold((0.0, 0.0), |(num, den), i| {
            let alive = self.survive(i, g0);
            (num + self.p[i] * (alive - self.survive(i, g0 + r0)), den + self.p[i] * alive)
        });
        if den <= 0.0 {
            return Err(Error::Degenerate("no block survives g0 writes"));
        }
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// Share of writes going to the top `frac` of LBAs by rank.
    pub fn top_fraction_traffic(&self, frac: f64) -> f64 {
        let k = ((frac.clamp(0.0, 1.0) * self.n() as f64).round() as usize).min(self.n());
        if k == self.n() {
            return 1.0;
        }
        kahan_sum(self.p[..k].iter().copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserProbRow {
    pub alpha: f64,
    pub u0_blocks: u64,
    pub v0_blocks: u64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GcProbRow {
    pub alpha: f64,
    pub g0_blocks: u64,
    pub r0_blocks: u64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrafficRow {
    pub alpha: f64,
    pub top_fraction: f64,
    pub traffic_fraction: f64,
}

/// `cond_prob_user` over a grid, one model per skewness, in parallel.
pub fn user_grid(n: usize, alphas: &[f64], u0s: &[u64], v0s: &[u64]) -> Result<Vec<UserProbRow>> {
    let per_alpha: Vec<Result<Vec<UserProbRow>>> = alphas
        .par_iter()
        .map(|&alpha| {
            let model = ZipfModel::new(n, alpha)?;
            let mut rows = Vec::new();
            for &u0 in u0s {
                for &v0 in v0s {
                    let probability = model.cond_prob_user(u0 as f64, v0 as f64)?;
                    rows.push(UserProbRow { alpha, u0_blocks: u0, v0_blocks: v0, probability });
                }
            }
            Ok(rows)
        })
        .collect();
    per_alpha.into_iter().collect::<Result<Vec<_>>>().map(|v| v.concat())
}

pub fn gc_grid(n: usize, alphas: &[f64], g0s: &[u64], r0s: &[u64]) -> Result<Vec<GcProbRow>> {
    let per_alpha: Vec<Result<Vec<GcProbRow>>> = alphas
        .par_iter()
        .map(|&alpha| {
            let model = ZipfModel::new(n, alpha)?;
            let mut rows = Vec::new();
            for &g0 in g0s {
                for &r0 in r0s {
                    let probability = model.cond_prob_gc(g0 as f64, r0 as f64)?;
                    rows.push(GcProbRow { alpha, g0_blocks: g0, r0_blocks: r0, probability });
                }
            }
            Ok(rows)
        })
        .collect();
    per_alpha.into_iter().collect::<Result<Vec<_>>>().map(|v| v.concat())
}

pub fn traffic_table(n: usize, alphas: &[f64], top_fraction: f64) -> Result<Vec<TrafficRow>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let model = ZipfModel::new(n, alpha)?;
            Ok(TrafficRow { alpha, top_fraction, traffic_fraction: model.top_fraction_traffic(top_fraction) })
        })
        .collect()
}
