//! Gillespie simulation of the multichannel cascade.
//!
//! Each trajectory draws its randomness from a ChaCha8 stream selected by
//! `(master seed, trajectory index)`, so a batch is reproducible bit for bit
//! no matter how trajectories are scheduled across threads. Aggregates are
//! integer counts merged in index order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::system::{OccupationState, SystemSpec};

pub const RNG_SCHEME: &str = "chacha8-stream-v1";
/// Largest `N` for which full per-jump records are kept.
pub const RECORD_LIMIT: u32 = 100_000;
const BLOCK: u64 = 256;

/// RNG for trajectory `index` of the batch seeded by `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One jump: time, channel and the total rate `Λ(t_k⁻)` just before it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub channel: usize,
    pub intensity: f64,
}

/// Runs one cascade to the ground simplex, reporting every jump.
pub fn run_cascade<R: Rng>(spec: &SystemSpec, rng: &mut R, mut on_jump: impl FnMut(Jump)) -> OccupationState {
    let rates = spec.channel_rates_f64();
    let d = rates.len();
    let mut counts = vec![0u32; d];
    let mut weights: Vec<f64> = rates.clone();
    let mut total: f64 = weights.iter().sum();
    let mut m = spec.n();
    let mut t = 0.0;
    while m > 0 {
        let lambda = m as f64 * total;
        let wait: f64 = rng.sample(Exp1);
        t += wait / lambda;
        let u: f64 = rng.random::<f64>() * total;
        let mut alpha = d - 1;
        let mut acc = 0.0;
        for (a, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                alpha = a;
                break;
            }
        }
        on_jump(Jump {
            time: t,
            channel: alpha,
            intensity: lambda,
        });
        counts[alpha] += 1;
        weights[alpha] = rates[alpha] * (counts[alpha] as f64 + 1.0);
        total = weights.iter().sum();
        m -= 1;
    }
    OccupationState::new(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<usize>,
    /// `Λ(t_k⁻)` for each jump.
    pub intensities: Vec<f64>,
    pub final_occupations: OccupationState,
    pub seed: u64,
    pub index: u64,
}

/// Full record of trajectory `index` under `master_seed`.
pub fn simulate_trajectory(spec: &SystemSpec, master_seed: u64, index: u64) -> Result<TrajectoryRecord> {
    if spec.n() > RECORD_LIMIT {
        return Err(Error::DimensionCap {
            dim: spec.n() as usize,
            cap: RECORD_LIMIT as usize,
        });
    }
    let n = spec.n() as usize;
    let mut jump_times = Vec::with_capacity(n);
    let mut jump_channels = Vec::with_capacity(n);
    let mut intensities = Vec::with_capacity(n);
    let mut rng = trajectory_rng(master_seed, index);
    let final_occupations = run_cascade(spec, &mut rng, |j| {
        jump_times.push(j.time);
        jump_channels.push(j.channel);
        intensities.push(j.intensity);
    });
    Ok(TrajectoryRecord {
        jump_times,
        jump_channels,
        intensities,
        final_occupations,
        seed: master_seed,
        index,
    })
}

/// Ascending bin edges on the time axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeBins {
    edges: Vec<f64>,
}

impl TimeBins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
            return Err(Error::validation("bin edges must be at least two ascending non-negative times"));
        }
        Ok(TimeBins { edges })
    }

    pub fn linear(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(hi > lo) {
            return Err(Error::validation("linear bins need count > 0 and hi > lo"));
        }
        Self::new((0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect())
    }

    pub fn log(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(lo > 0.0 && hi > lo) {
            return Err(Error::validation("log bins need count > 0 and 0 < lo < hi"));
        }
        let (a, b) = (lo.ln(), hi.ln());
        Self::new((0..=count).map(|i| (a + (b - a) * i as f64 / count as f64).exp()).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn index(&self, t: f64) -> Option<usize> {
        let k = self.edges.partition_point(|&e| e <= t);
        (k > 0 && k < self.edges.len()).then(|| k - 1)
    }
}

#[derive(Clone, Debug)]
pub struct BatchConfig {
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub bins: TimeBins,
    /// Keep every `TrajectoryRecord` (only allowed up to `RECORD_LIMIT`).
    pub keep_records: bool,
}

/// Streamed aggregates of a batch.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryBatch {
    pub n: u32,
    pub d: usize,
    pub n_trajectories: u64,
    pub master_seed: u64,
    pub rng_scheme: &'static str,
    pub bins: TimeBins,
    /// `jump_counts[α][k]`: jumps into channel `α` inside bin `k`.
    pub jump_counts: Vec<Vec<u64>>,
    /// Jumps outside the binned range.
    pub unbinned: u64,
    /// Final occupations and how often each occurred.
    pub final_histogram: BTreeMap<OccupationState, u64>,
    pub sum_n: Vec<u128>,
    pub sum_n_sq: Vec<u128>,
    #[serde(skip)]
    pub records: Option<Vec<TrajectoryRecord>>,
}

impl TrajectoryBatch {
    fn empty(spec: &SystemSpec, config: &BatchConfig) -> Self {
        let d = spec.d();
        TrajectoryBatch {
            n: spec.n(),
            d,
            n_trajectories: 0,
            master_seed: config.master_seed,
            rng_scheme: RNG_SCHEME,
            bins: config.bins.clone(),
            jump_counts: vec![vec![0; config.bins.len()]; d],
            unbinned: 0,
            final_histogram: BTreeMap::new(),
            sum_n: vec![0; d],
            sum_n_sq: vec![0; d],
            records: config.keep_records.then(Vec::new),
        }
    }

    fn merge(&mut self, other: TrajectoryBatch) {
        self.n_trajectories += other.n_trajectories;
        for (a, b) in self.jump_counts.iter_mut().zip(other.jump_counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.unbinned += other.unbinned;
        for (state, c) in other.final_histogram {
            *self.final_histogram.entry(state).or_insert(0) += c;
        }
        for a in 0..self.d {
            self.sum_n[a] += other.sum_n[a];
            self.sum_n_sq[a] += other.sum_n_sq[a];
        }
        if let (Some(mine), Some(theirs)) = (self.records.as_mut(), other.records) {
            mine.extend(theirs);
        }
    }

    /// Mean fraction in channel `alpha` with its standard error.
    pub fn mean_fraction(&self, alpha: usize) -> (f64, f64) {
        let k = self.n_trajectories as f64;
        let n = self.n as f64;
        let mean = self.sum_n[alpha] as f64 / k;
        let var = if self.n_trajectories > 1 {
            ((self.sum_n_sq[alpha] as f64 - k * mean * mean) / (k - 1.0)).max(0.0)
        } else {
            f64::INFINITY
        };
        (mean / n, (var / k).sqrt() / n)
    }

    /// `n̄₂` estimate and standard error.
    pub fn order_parameter(&self) -> Result<(f64, f64)> {
        if self.d != 2 {
            return Err(Error::validation("the order parameter n̄₂ needs d = 2"));
        }
        Ok(self.mean_fraction(1))
    }
}

/// Runs `n_trajectories` cascades in parallel.
pub fn simulate_batch(spec: &SystemSpec, config: &BatchConfig) -> Result<TrajectoryBatch> {
    if config.n_trajectories == 0 {
        return Err(Error::validation("a batch needs at least one trajectory"));
    }
    if config.keep_records && spec.n() > RECORD_LIMIT {
        return Err(Error::DimensionCap {
            dim: spec.n() as usize,
            cap: RECORD_LIMIT as usize,
        });
    }
    let blocks = config.n_trajectories.div_ceil(BLOCK);
    let partials: Vec<TrajectoryBatch> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut part = TrajectoryBatch::empty(spec, config);
            let end = ((b + 1) * BLOCK).min(config.n_trajectories);
            for index in b * BLOCK..end {
                run_one(spec, config, index, &mut part);
            }
            part
        })
        .collect();
    let mut batch = TrajectoryBatch::empty(spec, config);
    for part in partials {
        batch.merge(part);
    }
    Ok(batch)
}

fn run_one(spec: &SystemSpec, config: &BatchConfig, index: u64, part: &mut TrajectoryBatch) {
    let mut rng = trajectory_rng(config.master_seed, index);
    let mut record = config.keep_records.then(|| TrajectoryRecord {
        jump_times: Vec::new(),
        jump_channels: Vec::new(),
        intensities: Vec::new(),
        final_occupations: OccupationState::fully_excited(spec.d()),
        seed: config.master_seed,
        index,
    });
    let bins = &config.bins;
    let final_state = run_cascade(spec, &mut rng, |j| {
        match bins.index(j.time) {
            Some(k) => part.jump_counts[j.channel][k] += 1,
            None => part.unbinned += 1,
        }
        if let Some(r) = record.as_mut() {
            r.jump_times.push(j.time);
            r.jump_channels.push(j.channel);
            r.intensities.push(j.intensity);
        }
    });
    part.n_trajectories += 1;
    for (a, &n) in final_state.counts().iter().enumerate() {
        part.sum_n[a] += n as u128;
        part.sum_n_sq[a] += (n as u128) * (n as u128);
    }
    if let (Some(mut r), Some(records)) = (record, part.records.as_mut()) {
        r.final_occupations = final_state.clone();
        records.push(r);
    }
    *part.final_histogram.entry(final_state).or_insert(0) += 1;
}

/// Binned jump rates per trajectory per unit time.
#[derive(Clone, Debug, Serialize)]
pub struct IntensityEstimate {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// `[α][k]` rate and Poisson standard error.
    pub channel_rate: Vec<Vec<f64>>,
    pub channel_se: Vec<Vec<f64>>,
    pub total_rate: Vec<f64>,
    pub total_se: Vec<f64>,
    /// Bins with no jumps at all: their relative error is infinite.
    pub empty: Vec<bool>,
}

impl IntensityEstimate {
    /// Relative standard error of the total rate in bin `k`.
    pub fn relative_error(&self, k: usize) -> f64 {
        if self.empty[k] {
            f64::INFINITY
        } else {
            self.total_se[k] / self.total_rate[k]
        }
    }

    /// Center of the bin with the largest total rate.
    pub fn peak_time(&self, channel: Option<usize>) -> f64 {
        let series = match channel {
            Some(a) => &self.channel_rate[a],
            None => &self.total_rate,
        };
        let mut best = 0;
        for (k, v) in series.iter().enumerate() {
            if *v > series[best] {
                best = k;
            }
        }
        self.centers[best]
    }
}

pub fn estimate_intensity(batch: &TrajectoryBatch) -> Result<IntensityEstimate> {
    if batch.n_trajectories == 0 {
        return Err(Error::validation("cannot estimate intensity from an empty batch"));
    }
    let k = batch.n_trajectories as f64;
    let widths = batch.bins.widths();
    let scale: Vec<f64> = widths.iter().map(|w| 1.0 / (k * w)).collect();
    let rate = |c: &[u64]| c.iter().zip(&scale).map(|(&c, s)| c as f64 * s).collect::<Vec<f64>>();
    let se = |c: &[u64]| {
        c.iter()
            .zip(&scale)
            .map(|(&c, s)| (c as f64).sqrt() * s)
            .collect::<Vec<f64>>()
    };
    let totals: Vec<u64> = (0..widths.len())
        .map(|i| batch.jump_counts.iter().map(|c| c[i]).sum())
        .collect();
    Ok(IntensityEstimate {
        centers: batch.bins.centers(),
        widths: widths.clone(),
        channel_rate: batch.jump_counts.iter().map(|c| rate(c)).collect(),
        channel_se: batch.jump_counts.iter().map(|c| se(c)).collect(),
        total_rate: rate(&totals),
        total_se: se(&totals),
        empty: totals.iter().map(|&c| c == 0).collect(),
    })
}

/// Pearson goodness-of-fit of observed counts against expected probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::validation("chi-square test needs matching vectors of at least two cells"));
    }
    let total: u64 = observed.iter().sum();
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::validation(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Monte Carlo `n̄₂` at one `(N, r)` point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderParameterEstimate {
    pub n: u32,
    pub r: f64,
    pub n_bar_2: f64,
    pub standard_error: f64,
}

/// `n̄₂(N, r)` with `Γ₁ = 1`, `Γ₂ = r` over a grid. Point `i` uses master
/// seed `seed + i`.
pub fn sweep_order_parameter(ns: &[u32], rs: &[f64], trajectories: u64, seed: u64) -> Result<Vec<OrderParameterEstimate>> {
    let mut out = Vec::with_capacity(ns.len() * rs.len());
    let mut point = 0u64;
    for &n in ns {
        for &r in rs {
            let spec = SystemSpec::new(
                n,
                vec![crate::expsum::RateValue::integer(1), crate::expsum::RateValue::from_f64(r)?],
            )?;
            let config = BatchConfig {
                n_trajectories: trajectories,
                master_seed: seed.wrapping_add(point),
                bins: TimeBins::linear(0.0, 1.0, 1)?,
                keep_records: false,
            };
            let batch = simulate_batch(&spec, &config)?;
            let (n_bar_2, standard_error) = batch.order_parameter()?;
            out.push(OrderParameterEstimate {
                n,
                r,
                n_bar_2,
                standard_error,
            });
            point += 1;
        }
    }
    Ok(out)
}
