//! Variance of weighted-mean estimators: `K` draws with replacement versus
//! priority sampling, raw and self-normalized.

use std::io::Write;

use rand::Rng;
use rand_distr::Normal;

use crate::error::{ensure, Result};
use crate::math::{pairwise_sum, softmax};
use crate::rng::{self, derive_seed};
use crate::sampling::{estimate_weighted_sum, priority_sample, DiscreteDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueSetting {
    /// Estimate `Σ p_i f_i` where `p = softmax(f)`.
    SameAsLogits,
    /// Estimate `Σ p_i g_i` with `g` drawn independently of `f`.
    Independent,
}

impl ValueSetting {
    pub fn label(self) -> &'static str {
        match self {
            ValueSetting::SameAsLogits => "g=f",
            ValueSetting::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub k_grid: Vec<usize>,
    pub replicates: usize,
    pub value_std: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 100,
            k_grid: (5..=95).step_by(5).collect(),
            replicates: 10_000,
            value_std: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub setting: ValueSetting,
    pub k: usize,
    pub truth: f64,
    pub mc: f64,
    pub priority: f64,
    pub priority_normalized: f64,
}

/// Welford accumulator; a constant stream has variance exactly zero.
#[derive(Default)]
struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Inverse-CDF draw from `cdf` (cumulative, last entry ≈ 1).
fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

pub fn variance_study(cfg: &BenchConfig, seed: u64) -> Result<Vec<VarianceRow>> {
    ensure!(cfg.n >= 1, "need at least one item");
    ensure!(cfg.replicates >= 2, "need at least two replicates");
    ensure!(
        cfg.k_grid.iter().all(|&k| k >= 1 && k <= cfg.n),
        "every K must lie in [1, {}]",
        cfg.n
    );
    let normal = Normal::new(0.0, cfg.value_std).map_err(|e| crate::VodError::invalid(e.to_string()))?;
    let mut rows = Vec::new();
    for (si, setting) in [ValueSetting::SameAsLogits, ValueSetting::Independent]
        .into_iter()
        .enumerate()
    {
        let mut values_rng = rng::stream(seed, si as u64);
        let f: Vec<f64> = (0..cfg.n).map(|_| values_rng.sample(normal)).collect();
        let g: Vec<f64> = match setting {
            ValueSetting::SameAsLogits => f.clone(),
            ValueSetting::Independent => (0..cfg.n).map(|_| values_rng.sample(normal)).collect(),
        };
        let p = softmax(&f);
        let truth = pairwise_sum(&p.iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>());
        let dist = DiscreteDistribution::new((0..cfg.n).collect(), p.clone())?;
        let mut cdf = p.clone();
        for i in 1..cdf.len() {
            cdf[i] += cdf[i - 1];
        }

        for &k in &cfg.k_grid {
            let (mut mc, mut pr, mut sn) = (Moments::default(), Moments::default(), Moments::default());
            let cell = derive_seed(seed, (si as u64) << 32 | k as u64);
            let mut mc_rng = rng::stream(cell, 1);
            for rep in 0..cfg.replicates {
                let est = (0..k).map(|_| g[draw(&cdf, mc_rng.random())]).sum::<f64>() / k as f64;
                mc.push(est);
                let sample = priority_sample(&dist, k, derive_seed(cell, rep as u64))?;
                pr.push(estimate_weighted_sum(&sample, |i| g.get(i).copied(), false)?);
                sn.push(estimate_weighted_sum(&sample, |i| g.get(i).copied(), true)?);
            }
            rows.push(VarianceRow {
                setting,
                k,
                truth,
                mc: mc.variance(),
                priority: pr.variance(),
                priority_normalized: sn.variance(),
            });
        }
    }
    Ok(rows)
}

pub fn write_variance_csv(rows: &[VarianceRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "setting,k,truth,var_mc,var_priority,var_priority_normalized")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.9e},{:.9e},{:.9e},{:.9e}",
            r.setting.label(),
            r.k,
            r.truth,
            r.mc,
            r.priority,
            r.priority_normalized
        )?;
    }
    Ok(())
}
