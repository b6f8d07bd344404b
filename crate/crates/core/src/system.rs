//! Emitter count, channel rates and the occupation lattice.

use std::collections::HashMap;
use std::fmt;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expsum::RateValue;

/// `N` emitters decaying through `d` collective channels with rates `Γ_α`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemSpec {
    n_emitters: u32,
    channels: Vec<RateValue>,
}

impl SystemSpec {
    pub fn new(n_emitters: u32, channels: Vec<RateValue>) -> Result<Self> {
        if n_emitters == 0 {
            return Err(Error::validation("emitter count N must be at least 1"));
        }
        if channels.is_empty() {
            return Err(Error::validation("at least one decay channel is required"));
        }
        if let Some((i, r)) = channels.iter().enumerate().find(|(_, r)| !r.is_positive()) {
            return Err(Error::validation(format!(
                "channel {} has rate {r}; every channel rate must be positive",
                i + 1
            )));
        }
        Ok(SystemSpec { n_emitters, channels })
    }

    /// Parses a comma-separated rate list such as `0.5,0.5` or `1,2/3`.
    pub fn parse(n_emitters: u32, rates: &str) -> Result<Self> {
        let channels = rates
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<RateValue>>>()?;
        Self::new(n_emitters, channels)
    }

    /// Balanced system: `d` channels of rate `total/d` each.
    pub fn balanced(n_emitters: u32, d: usize, total: &RateValue) -> Result<Self> {
        if d == 0 {
            return Err(Error::validation("at least one decay channel is required"));
        }
        let each = RateValue::from_rational(Rational::from(total.as_rational() / d as u32))?;
        Self::new(n_emitters, vec![each; d])
    }

    pub fn n(&self) -> u32 {
        self.n_emitters
    }

    pub fn d(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[RateValue] {
        &self.channels
    }

    pub fn channel_rates_f64(&self) -> Vec<f64> {
        self.channels.iter().map(RateValue::to_f64).collect()
    }

    /// `Γ₀ = Σ_α Γ_α`.
    pub fn total_rate(&self) -> RateValue {
        self.channels.iter().cloned().sum()
    }

    pub fn max_rate(&self) -> &RateValue {
        self.channels.iter().max().expect("non-empty")
    }

    pub fn min_rate(&self) -> &RateValue {
        self.channels.iter().min().expect("non-empty")
    }

    pub fn is_balanced(&self) -> bool {
        self.channels.iter().all(|r| r == &self.channels[0])
    }

    /// Excitations left in a state.
    pub fn excitations(&self, state: &OccupationState) -> u32 {
        self.n_emitters - state.total()
    }

    /// `Λ(n) = m Σ_α Γ_α (n_α + 1)`, exact.
    pub fn decay_rate(&self, state: &OccupationState) -> RateValue {
        let m = self.excitations(state) as u64;
        if m == 0 {
            return RateValue::zero();
        }
        let weight: RateValue = self
            .channels
            .iter()
            .zip(state.counts())
            .map(|(g, &n)| g.scaled(n as u64 + 1))
            .sum();
        weight.scaled(m)
    }

    /// Partial rate into channel `α`: `Γ_α m (n_α + 1)`.
    pub fn channel_rate(&self, state: &OccupationState, alpha: usize) -> RateValue {
        let m = self.excitations(state) as u64;
        self.channels[alpha].scaled(m * (state.counts()[alpha] as u64 + 1))
    }

    /// Number of lattice states, `C(N + d, d)`.
    pub fn lattice_size(&self) -> u128 {
        let b = Integer::from(Integer::binomial_u(self.n_emitters + self.d() as u32, self.d() as u32));
        b.to_u128().unwrap_or(u128::MAX)
    }

    pub fn validate_state(&self, state: &OccupationState) -> Result<()> {
        if state.d() != self.d() {
            return Err(Error::validation(format!(
                "state {state} has {} channels, system has {}",
                state.d(),
                self.d()
            )));
        }
        if state.total() > self.n_emitters {
            return Err(Error::validation(format!(
                "state {state} holds more than N = {} decays",
                self.n_emitters
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rates: Vec<String> = self.channels.iter().map(|r| r.to_string()).collect();
        write!(f, "N={} rates=[{}]", self.n_emitters, rates.join(","))
    }
}

/// Ground-level occupations `(n₁, …, n_d)`; the excitation count is
/// `m = N − Σ n_α`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OccupationState(Vec<u32>);

impl OccupationState {
    pub fn new(counts: Vec<u32>) -> Self {
        OccupationState(counts)
    }

    pub fn fully_excited(d: usize) -> Self {
        OccupationState(vec![0; d])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn d(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// The state one decay earlier through channel `alpha`, if any.
    pub fn predecessor(&self, alpha: usize) -> Option<OccupationState> {
        (self.0[alpha] > 0).then(|| {
            let mut v = self.0.clone();
            v[alpha] -= 1;
            OccupationState(v)
        })
    }

    pub fn successor(&self, alpha: usize) -> OccupationState {
        let mut v = self.0.clone();
        v[alpha] += 1;
        OccupationState(v)
    }

    pub fn dominated_by(&self, other: &OccupationState) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `n_paths = (Σ n)! / Π n_α!`.
    pub fn path_count(&self) -> u128 {
        let mut count = Integer::from(Integer::factorial(self.total()));
        for &n in &self.0 {
            count /= Integer::from(Integer::factorial(n));
        }
        count.to_u128().unwrap_or(u128::MAX)
    }
}

impl fmt::Display for OccupationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All compositions of `total` into `d` non-negative parts, lexicographically
/// descending in the first coordinate.
pub fn compositions(total: u32, d: usize) -> Vec<Vec<u32>> {
    fn rec(remaining: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            rec(remaining - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Dense indexing of a (sub-)lattice of occupation states, ordered by level
/// (number of decays) so that every predecessor precedes its successors.
#[derive(Clone, Debug)]
pub struct Lattice {
    states: Vec<OccupationState>,
    index: HashMap<OccupationState, usize>,
    level_starts: Vec<usize>,
}

impl Lattice {
    /// The full lattice `Σ n_α ≤ N`, refusing more than `cap` states.
    pub fn full(spec: &SystemSpec, cap: u128) -> Result<Self> {
        let size = spec.lattice_size();
        if size > cap {
            return Err(Error::LatticeCap { states: size, cap });
        }
        Self::build(spec.d(), spec.n(), |_| true)
    }

    /// States dominated componentwise by `target`.
    pub fn below(target: &OccupationState, cap: u128) -> Result<Self> {
        let size: u128 = target.counts().iter().map(|&n| n as u128 + 1).product();
        if size > cap {
            return Err(Error::LatticeCap { states: size, cap });
        }
        Self::build(target.d(), target.total(), |s| s.dominated_by(target))
    }

    fn build(d: usize, max_level: u32, keep: impl Fn(&OccupationState) -> bool) -> Result<Self> {
        let mut states = Vec::new();
        let mut level_starts = Vec::with_capacity(max_level as usize + 2);
        for q in 0..=max_level {
            level_starts.push(states.len());
            states.extend(compositions(q, d).into_iter().map(OccupationState).filter(|s| keep(s)));
        }
        level_starts.push(states.len());
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Lattice {
            states,
            index,
            level_starts,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn index_of(&self, state: &OccupationState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Index range of states with exactly `q` decays.
    pub fn level(&self, q: u32) -> std::ops::Range<usize> {
        let q = q as usize;
        if q + 1 >= self.level_starts.len() {
            return 0..0;
        }
        self.level_starts[q]..self.level_starts[q + 1]
    }

    pub fn levels(&self) -> u32 {
        (self.level_starts.len() - 1) as u32
    }

    /// `(alpha, predecessor index)` pairs of a state.
    pub fn predecessors(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let state = &self.states[i];
        (0..state.d()).filter_map(move |alpha| {
            state
                .predecessor(alpha)
                .and_then(|p| self.index_of(&p))
                .map(|j| (alpha, j))
        })
    }
}
