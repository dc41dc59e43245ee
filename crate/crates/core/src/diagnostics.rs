//! Chain statistics: acceptance rate, lag-1 correlation, normalized
//! histogram, and their averages over independent replicas.

use std::fmt;

use crate::error::{Error, Result};
use crate::samplers::{run_chain, ChainTrace, StepKernel};

/// Exact CSV header of the averaged-metrics table.
pub const CSV_HEADER: &str = "sampler,weights,N,runs,accept_mean,accept_se,corr_mean,corr_se,seed";

/// Written in place of a correlation that does not exist.
pub const UNDEFINED: &str = "undefined";

/// Fraction of steps that moved the chain.
pub fn acceptance_rate(accepted: &[bool]) -> Result<f64> {
    if accepted.is_empty() {
        return Err(Error::Argument("acceptance rate of an empty trace".into()));
    }
    Ok(accepted.iter().filter(|a| **a).count() as f64 / accepted.len() as f64)
}

/// Pearson correlation of consecutive states, or `Undefined` when either
/// side of the pairs has zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Value(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Value(v) => Some(v),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Value(v) => write!(f, "{v}"),
            Correlation::Undefined => f.write_str(UNDEFINED),
        }
    }
}

pub fn lag1_correlation(xs: &[f64]) -> Result<Correlation> {
    if xs.len() < 3 {
        return Err(Error::Argument(format!("lag-1 correlation needs 3 states, got {}", xs.len())));
    }
    let a = &xs[..xs.len() - 1];
    let b = &xs[1..];
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Value((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)))
}

/// Density-normalized histogram over `[lo, hi)`; the last bin also takes `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins()).map(|i| self.lo + i as f64 * self.width()).collect()
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn normalized_histogram(xs: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Argument("histogram needs at least one bin".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!("invalid histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &x in xs {
        if x < lo {
            underflow += 1;
        } else if x > hi || x.is_nan() {
            overflow += 1;
        } else {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let densities = counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / (total as f64 * width) }).collect();
    Ok(Histogram { lo, hi, counts, densities, underflow, overflow })
}

/// Probability of each of `bins` equal bins on `[lo, hi]` under the density
/// `exp(log_p)` restricted to the range, by composite Simpson quadrature
/// with `sub` (even) panels per bin.
pub fn bin_masses(log_p: impl Fn(f64) -> f64, bins: usize, lo: f64, hi: f64, sub: usize) -> Vec<f64> {
    let sub = (sub.max(2) + 1) & !1;
    let width = (hi - lo) / bins as f64;
    let h = width / sub as f64;
    let mut masses: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + b as f64 * width;
            let mut s = log_p(a).exp() + log_p(a + width).exp();
            for i in 1..sub {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += c * log_p(a + i as f64 * h).exp();
            }
            s * h / 3.0
        })
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    masses
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_se(values: &[f64]) -> Result<MeanSe> {
    if values.len() < 2 {
        return Err(Error::Argument("standard error needs at least two values".into()));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(MeanSe { mean: values[0], se: 0.0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MeanSe { mean, se: (var / n).sqrt() })
}

/// Per-run statistics of one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub acceptance: f64,
    pub correlation: Correlation,
    pub mean_alpha: f64,
}

pub fn run_metrics(trace: &ChainTrace<f64>) -> Result<RunMetrics> {
    Ok(RunMetrics {
        acceptance: acceptance_rate(&trace.accepted)?,
        correlation: lag1_correlation(&trace.states)?,
        mean_alpha: trace.alphas.iter().sum::<f64>() / trace.alphas.len() as f64,
    })
}

/// Averages over replicas. The correlation is undefined when any replica's
/// correlation is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedMetrics {
    pub runs: usize,
    pub acceptance: MeanSe,
    pub correlation: Option<MeanSe>,
    pub base_seed: u64,
}

/// Chain length, burn-in and start point of every replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub steps: usize,
    pub burn_in: usize,
    pub x0: f64,
}

/// Replica `r` is seeded with `base_seed + r`.
pub fn averaged_metrics(
    kernel: &dyn StepKernel<f64>,
    plan: RunPlan,
    n_runs: usize,
    base_seed: u64,
) -> Result<AveragedMetrics> {
    let seeds: Vec<u64> = (0..n_runs as u64).map(|r| base_seed.wrapping_add(r)).collect();
    let mut out = averaged_metrics_with_seeds(kernel, plan, &seeds)?;
    out.base_seed = base_seed;
    Ok(out)
}

pub fn averaged_metrics_with_seeds(
    kernel: &dyn StepKernel<f64>,
    plan: RunPlan,
    seeds: &[u64],
) -> Result<AveragedMetrics> {
    if seeds.len() < 2 {
        return Err(Error::Argument(format!("averaging needs at least 2 runs, got {}", seeds.len())));
    }
    let one = |seed: &u64| -> Result<RunMetrics> {
        run_metrics(&run_chain(kernel, plan.x0, plan.steps, plan.burn_in, 1, *seed)?)
    };
    #[cfg(feature = "parallel")]
    let runs: Vec<Result<RunMetrics>> = {
        use rayon::prelude::*;
        seeds.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<Result<RunMetrics>> = seeds.iter().map(one).collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    summarize(&runs, seeds[0])
}

pub fn summarize(runs: &[RunMetrics], base_seed: u64) -> Result<AveragedMetrics> {
    let acc: Vec<f64> = runs.iter().map(|r| r.acceptance).collect();
    let corr: Option<Vec<f64>> = runs.iter().map(|r| r.correlation.value()).collect();
    Ok(AveragedMetrics {
        runs: runs.len(),
        acceptance: mean_se(&acc)?,
        correlation: corr.map(|c| mean_se(&c)).transpose()?,
        base_seed,
    })
}

/// One row of the averaged-metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub sampler: String,
    pub weights: String,
    pub n: usize,
    pub metrics: AveragedMetrics,
}

impl fmt::Display for CsvRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.metrics;
        write!(
            f,
            "{},{},{},{},{},{},",
            self.sampler, self.weights, self.n, m.runs, m.acceptance.mean, m.acceptance.se
        )?;
        match m.correlation {
            Some(c) => write!(f, "{},{}", c.mean, c.se)?,
            None => write!(f, "{UNDEFINED},{UNDEFINED}")?,
        }
        write!(f, ",{}", m.base_seed)
    }
}

/// Header plus rows, `\n`-terminated.
pub fn write_csv(rows: &[CsvRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_string());
        s.push('\n');
    }
    s
}
