//! Closed-form populations and intensities for single- and multichannel
//! Dicke superradiance.
//!
//! Populations follow from a convolution recurrence over the occupation
//! lattice: a state's population is its decay kernel `e^{-Λ(n)t}` convolved
//! with the weighted populations of its predecessors. The recurrence is the
//! same sum over jump sequences as the explicit path sum in [`paths`], grouped
//! by the last jump; `tests/path_sum.rs` checks the two agree.

pub mod paths;
mod peak;

use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::expsum::{ExpPolySum, Numerics, RateValue};
use crate::system::{compositions, Lattice, OccupationState, SystemSpec};

pub use peak::{burst_predicate, find_peak, find_peak_scaled, intensity_peak, Peak};

/// Default cap on lattice size for the multichannel solver.
pub const DEFAULT_LATTICE_CAP: u128 = 2_000_000;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Fixed working precision; `None` starts from the size-based default and
    /// doubles on precision exhaustion up to `max_precision_bits`.
    pub precision_bits: Option<u32>,
    pub accuracy: f64,
    pub lattice_cap: u128,
    pub max_precision_bits: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            precision_bits: None,
            accuracy: Numerics::DEFAULT_ACCURACY,
            lattice_cap: DEFAULT_LATTICE_CAP,
            max_precision_bits: 16_384,
        }
    }
}

impl SolverOptions {
    pub fn with_precision(bits: u32) -> Self {
        SolverOptions {
            precision_bits: Some(bits),
            ..Self::default()
        }
    }

    pub(crate) fn run<T>(&self, n: u32, mut solve: impl FnMut(Numerics) -> Result<T>) -> Result<T> {
        let mut numerics = match self.precision_bits {
            Some(bits) => Numerics::new(bits, self.accuracy),
            None => Numerics::new(Numerics::for_emitters(n).precision_bits, self.accuracy),
        };
        loop {
            match solve(numerics) {
                Err(Error::PrecisionExhausted { .. })
                    if self.precision_bits.is_none() && numerics.precision_bits < self.max_precision_bits =>
                {
                    numerics.precision_bits *= 2;
                }
                other => return other,
            }
        }
    }
}

/// Which states the multichannel solver should populate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    All,
    /// Only the sub-lattice needed for this state.
    State(OccupationState),
}

/// Channel selector for intensities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Index(usize),
    Total,
}

#[derive(Clone, Debug)]
enum Storage {
    /// Level totals `p_m`, split uniformly among states of equal `m`.
    /// Exact for a single channel and for balanced rates.
    Levels(Vec<ExpPolySum>),
    Lattice {
        lattice: Lattice,
        entries: Vec<ExpPolySum>,
        complete: bool,
    },
}

/// Closed-form populations over the occupation lattice.
#[derive(Clone, Debug)]
pub struct PopulationTable {
    system: SystemSpec,
    storage: Storage,
}

impl PopulationTable {
    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn is_complete(&self) -> bool {
        match &self.storage {
            Storage::Levels(_) => true,
            Storage::Lattice { complete, .. } => *complete,
        }
    }

    /// Explicit states when the table is stored per state.
    pub fn lattice_states(&self) -> Option<&[OccupationState]> {
        match &self.storage {
            Storage::Levels(_) => None,
            Storage::Lattice { lattice, .. } => Some(lattice.states()),
        }
    }

    pub fn numerics(&self) -> Numerics {
        match &self.storage {
            Storage::Levels(levels) => levels[0].numerics(),
            Storage::Lattice { entries, .. } => entries[0].numerics(),
        }
    }

    /// Population of one state.
    pub fn population(&self, state: &OccupationState) -> Result<ExpPolySum> {
        self.system.validate_state(state)?;
        match &self.storage {
            Storage::Levels(levels) => {
                let m = self.system.excitations(state);
                let share = level_multiplicity(&self.system, m);
                Ok(levels[m as usize].scale(&Rational::from((1, share))))
            }
            Storage::Lattice { lattice, entries, .. } => lattice
                .index_of(state)
                .map(|i| entries[i].clone())
                .ok_or(Error::IncompleteTable),
        }
    }

    /// Total population of all states with `m` excitations.
    pub fn level(&self, m: u32) -> Result<ExpPolySum> {
        if m > self.system.n() {
            return Err(Error::validation(format!("level {m} exceeds N = {}", self.system.n())));
        }
        match &self.storage {
            Storage::Levels(levels) => Ok(levels[m as usize].clone()),
            Storage::Lattice {
                lattice,
                entries,
                complete,
            } => {
                if !complete {
                    return Err(Error::IncompleteTable);
                }
                let range = lattice.level(self.system.n() - m);
                Ok(ExpPolySum::sum(&entries[range], self.numerics()))
            }
        }
    }

    /// Every state with its population, refusing more than `cap` states.
    pub fn entries(&self, cap: u128) -> Result<Vec<(OccupationState, ExpPolySum)>> {
        match &self.storage {
            Storage::Lattice { lattice, entries, .. } => {
                Ok(lattice.states().iter().cloned().zip(entries.iter().cloned()).collect())
            }
            Storage::Levels(levels) => {
                let size = self.system.lattice_size();
                if size > cap {
                    return Err(Error::LatticeCap { states: size, cap });
                }
                let n = self.system.n();
                let d = self.system.d();
                let mut out = Vec::with_capacity(size as usize);
                for q in 0..=n {
                    let m = n - q;
                    let share = level_multiplicity(&self.system, m);
                    let p = levels[m as usize].scale(&Rational::from((1, share)));
                    for counts in compositions(q, d) {
                        out.push((OccupationState::new(counts), p.clone()));
                    }
                }
                Ok(out)
            }
        }
    }

    /// `Σ_states p(t)`; 1 up to the precision budget for complete tables.
    pub fn normalization_at(&self, t: f64) -> f64 {
        match &self.storage {
            Storage::Levels(levels) => levels.iter().map(|p| p.evaluate_f64(t)).sum(),
            Storage::Lattice { entries, .. } => entries.iter().map(|p| p.evaluate_f64(t)).sum(),
        }
    }

    /// Largest error bound over all stored signals.
    pub fn error_bound(&self) -> f64 {
        let signals = match &self.storage {
            Storage::Levels(levels) => levels,
            Storage::Lattice { entries, .. } => entries,
        };
        signals.iter().map(ExpPolySum::error_bound).fold(0.0, f64::max)
    }
}

/// Number of states sharing `m` excitations: `C(N − m + d − 1, d − 1)`.
fn level_multiplicity(spec: &SystemSpec, m: u32) -> Integer {
    let d = spec.d() as u32;
    Integer::from(Integer::binomial_u(spec.n() - m + d - 1, d - 1))
}

/// Level cascade `p_N = e^{-Λ_N t}`, `p_m = Λ_{m+1} (p_{m+1} * e^{-Λ_m t})`.
fn cascade(n: u32, level_rate: impl Fn(u32) -> RateValue, numerics: Numerics) -> Result<Vec<ExpPolySum>> {
    let mut levels = vec![ExpPolySum::zero(numerics); n as usize + 1];
    levels[n as usize] = ExpPolySum::exponential(level_rate(n), numerics);
    for m in (0..n).rev() {
        let feed = levels[m as usize + 1].scale(level_rate(m + 1).as_rational());
        levels[m as usize] = feed.convolve(&ExpPolySum::exponential(level_rate(m), numerics))?;
    }
    Ok(levels)
}

/// Single channel: `Λ_m = Γ m (N + 1 − m)`.
pub fn solve_single_channel(spec: &SystemSpec, opts: &SolverOptions) -> Result<PopulationTable> {
    if spec.d() != 1 {
        return Err(Error::validation(format!(
            "single-channel solver needs d = 1, got d = {}",
            spec.d()
        )));
    }
    let n = spec.n();
    let gamma = spec.channels()[0].clone();
    let levels = opts.run(n, |numerics| {
        cascade(n, |m| gamma.scaled(m as u64 * (n + 1 - m) as u64), numerics)
    })?;
    Ok(PopulationTable {
        system: spec.clone(),
        storage: Storage::Levels(levels),
    })
}

/// Balanced channels `Γ_α = Γ/d`: one effective cascade with
/// `Λ_k = (Γ/d) k (N − k + d)`, split uniformly within each level.
pub fn solve_balanced(spec: &SystemSpec, opts: &SolverOptions) -> Result<PopulationTable> {
    if !spec.is_balanced() {
        return Err(Error::validation("balanced solver needs all channel rates exactly equal"));
    }
    let n = spec.n();
    let d = spec.d() as u32;
    let each = spec.channels()[0].clone();
    let levels = opts.run(n, |numerics| {
        cascade(n, |k| each.scaled(k as u64 * (n - k + d) as u64), numerics)
    })?;
    Ok(PopulationTable {
        system: spec.clone(),
        storage: Storage::Levels(levels),
    })
}

/// Lattice recurrence for arbitrary rates:
/// `p(n) = Σ_α Γ_α (m+1) n_α (p(n − e_α) * e^{-Λ(n)t})`, seeded with
/// `p(0) = e^{-Λ_N t}`. States of one level are computed in parallel.
pub fn solve_multichannel(spec: &SystemSpec, target: &Target, opts: &SolverOptions) -> Result<PopulationTable> {
    if spec.d() < 2 {
        return Err(Error::validation(
            "multichannel solver needs d >= 2; use the single-channel solver",
        ));
    }
    let (lattice, complete) = match target {
        Target::All => (Lattice::full(spec, opts.lattice_cap)?, true),
        Target::State(state) => {
            spec.validate_state(state)?;
            (Lattice::below(state, opts.lattice_cap)?, false)
        }
    };
    let entries = opts.run(spec.n(), |numerics| lattice_dp(spec, &lattice, numerics))?;
    Ok(PopulationTable {
        system: spec.clone(),
        storage: Storage::Lattice {
            lattice,
            entries,
            complete,
        },
    })
}

fn lattice_dp(spec: &SystemSpec, lattice: &Lattice, numerics: Numerics) -> Result<Vec<ExpPolySum>> {
    let mut entries: Vec<ExpPolySum> = Vec::with_capacity(lattice.len());
    let origin = &lattice.states()[0];
    entries.push(ExpPolySum::exponential(spec.decay_rate(origin), numerics));
    for q in 1..lattice.levels() {
        let range = lattice.level(q);
        let done = &entries;
        let level: Vec<ExpPolySum> = range
            .into_par_iter()
            .map(|i| {
                let state = &lattice.states()[i];
                let above = spec.excitations(state) as u64 + 1;
                let feeds: Vec<ExpPolySum> = lattice
                    .predecessors(i)
                    .map(|(alpha, j)| {
                        let weight = spec.channels()[alpha].scaled(above * state.counts()[alpha] as u64);
                        done[j].scale(weight.as_rational())
                    })
                    .collect();
                let feed = ExpPolySum::sum(&feeds, numerics);
                feed.convolve(&ExpPolySum::exponential(spec.decay_rate(state), numerics))
            })
            .collect::<Result<_>>()?;
        entries.extend(level);
    }
    Ok(entries)
}

/// Picks the cheapest exact solver for the system.
pub fn solve(spec: &SystemSpec, opts: &SolverOptions) -> Result<PopulationTable> {
    if spec.d() == 1 {
        solve_single_channel(spec, opts)
    } else if spec.is_balanced() {
        solve_balanced(spec, opts)
    } else {
        solve_multichannel(spec, &Target::All, opts)
    }
}

/// Emitted intensity `I_α(t) = Γ_α Σ_n m (n_α + 1) p_n(t)` (photons per
/// unit time), or the sum over channels.
pub fn intensity(table: &PopulationTable, channel: Channel) -> Result<ExpPolySum> {
    let spec = &table.system;
    if let Channel::Index(alpha) = channel {
        if alpha >= spec.d() {
            return Err(Error::validation(format!(
                "channel index {alpha} out of range for d = {}",
                spec.d()
            )));
        }
    }
    let numerics = table.numerics();
    match &table.storage {
        Storage::Levels(levels) => {
            let n = spec.n();
            let d = spec.d() as u32;
            let parts: Vec<ExpPolySum> = (1..=n)
                .map(|m| {
                    let mut representative = vec![0; d as usize];
                    representative[0] = n - m;
                    let rate = spec.decay_rate(&OccupationState::new(representative));
                    levels[m as usize].scale(rate.as_rational())
                })
                .collect();
            let total = ExpPolySum::sum(&parts, numerics);
            Ok(match channel {
                Channel::Total => total,
                Channel::Index(_) => total.scale(&Rational::from((1, d))),
            })
        }
        Storage::Lattice {
            lattice,
            entries,
            complete,
        } => {
            if !complete {
                return Err(Error::IncompleteTable);
            }
            let channels: Vec<usize> = match channel {
                Channel::Total => (0..spec.d()).collect(),
                Channel::Index(alpha) => vec![alpha],
            };
            let parts: Vec<ExpPolySum> = lattice
                .states()
                .iter()
                .zip(entries)
                .filter(|(s, _)| spec.excitations(s) > 0)
                .map(|(s, p)| {
                    let rate: RateValue = channels.iter().map(|&a| spec.channel_rate(s, a)).sum();
                    p.scale(rate.as_rational())
                })
                .collect();
            Ok(ExpPolySum::sum(&parts, numerics))
        }
    }
}
