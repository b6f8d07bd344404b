//! Long-time ground-state distributions and the order parameter `n̄₂`.
//!
//! For two channels with `r = Γ₂/Γ₁` the probability of ending in
//! `(N − x, x)` is
//!
//! ```text
//! p_x = (N−x)! x! r^x Γ(1+r)/Γ(N−x+1+(x+1)r) · S_x
//! S_x = Σ_{1≤L₁<…<L_x≤N} Π_j f(j, L_j),   f(j, L) = Γ(L+(j+1)r−(j−1)) / Γ(L+jr−(j−2))
//! ```
//!
//! The nested sum is a prefix-sum DP over `(j, L)`. Its rows do not depend on
//! `x`, so one sweep yields every `S_x` and the whole distribution costs
//! `O(N²)`. Terms with `L_j < j` vanish (the numerator gamma has a pole only
//! where the product is already zero) and are skipped.

use rayon::prelude::*;
use rug::{Assign, Float, Integer, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::RateValue;
use crate::system::{compositions, OccupationState, SystemSpec};
use crate::trajectory::{self, SolverOptions};

pub const DEFAULT_PRECISION_BITS: u32 = 128;
/// Relative central-difference step for `χ = ∂n̄₂/∂r`.
pub const DEFAULT_SUSCEPTIBILITY_STEP: f64 = 1e-4;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Probabilities over the ground simplex `Σ n_α = N`.
#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateDistribution {
    #[serde(skip)]
    system: SystemSpec,
    states: Vec<OccupationState>,
    probabilities: Vec<f64>,
}

impl SteadyStateDistribution {
    pub fn new(system: SystemSpec, states: Vec<OccupationState>, probabilities: Vec<f64>) -> Result<Self> {
        if states.len() != probabilities.len() {
            return Err(Error::validation("state and probability vectors differ in length"));
        }
        for s in &states {
            system.validate_state(s)?;
            if s.total() != system.n() {
                return Err(Error::validation(format!("{s} is not a ground state")));
            }
        }
        let mut probabilities = probabilities;
        for p in &mut probabilities {
            if !p.is_finite() || *p < -NORMALIZATION_TOL || *p > 1.0 + NORMALIZATION_TOL {
                return Err(Error::validation(format!("probability {p} outside [0, 1]")));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::validation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(SteadyStateDistribution {
            system,
            states,
            probabilities,
        })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, state: &OccupationState) -> Option<f64> {
        self.states.iter().position(|s| s == state).map(|i| self.probabilities[i])
    }

    /// Mean fraction of emitters that ended in ground level `alpha`.
    pub fn mean_fraction(&self, alpha: usize) -> f64 {
        let n = self.system.n() as f64;
        self.states
            .iter()
            .zip(&self.probabilities)
            .map(|(s, p)| p * s.counts()[alpha] as f64)
            .sum::<f64>()
            / n
    }

    /// `n̄₂`, the mean fraction in the second ground level.
    pub fn order_parameter(&self) -> Result<f64> {
        if self.system.d() != 2 {
            return Err(Error::validation("the order parameter n̄₂ needs d = 2"));
        }
        Ok(self.mean_fraction(1))
    }

    /// For `d = 2`: probabilities indexed by `x = n₂`.
    pub fn by_x(&self) -> Result<Vec<f64>> {
        if self.system.d() != 2 {
            return Err(Error::validation("indexing by x = n₂ needs d = 2"));
        }
        let mut out = vec![0.0; self.system.n() as usize + 1];
        for (s, p) in self.states.iter().zip(&self.probabilities) {
            out[s.counts()[1] as usize] = *p;
        }
        Ok(out)
    }
}

/// `(r, n̄₂, χ)` at one emitter count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderParameterPoint {
    pub n: u32,
    pub r: f64,
    pub n_bar_2: f64,
    pub susceptibility: f64,
}

fn check_ratio(n: u32, r: &Rational) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("emitter count N must be at least 1"));
    }
    if *r <= 0 {
        return Err(Error::validation(format!("rate ratio r = {r} must be positive")));
    }
    Ok(())
}

fn float(prec: u32, q: &Rational) -> Float {
    Float::with_val(prec, q)
}

/// Nested sums `S_0 … S_N`, all from one DP sweep.
fn nested_sums(n: u32, r: &Rational, prec: u32) -> Vec<Float> {
    let n = n as usize;
    let mut sums = Vec::with_capacity(n + 1);
    sums.push(Float::with_val(prec, 1));
    // prefix[L] = Σ over tuples of length j−1 ending at or before L.
    let mut prefix = vec![Float::with_val(prec, 1); n + 1];
    let mut next = vec![Float::with_val(prec, 0); n + 1];
    let mut term = Float::new(prec);
    for j in 1..=n {
        let jr = Rational::from(r * j as u32);
        let j1r = Rational::from(r * (j as u32 + 1));
        // f(j, j) = Γ(1 + (j+1)r) / Γ(2 + jr)
        let mut f = float(prec, &Rational::from(&j1r + 1u32)).gamma();
        f /= float(prec, &Rational::from(&jr + 2u32)).gamma();
        // f(j, L+1) = f(j, L) · (L+(j+1)r−(j−1)) / (L+jr−(j−2)); both factors step by 1 in L.
        let mut num = float(prec, &Rational::from(&j1r + 1u32));
        let mut den = float(prec, &Rational::from(&jr + 2u32));
        next[..j].iter_mut().for_each(|v| *v = Float::with_val(prec, 0));
        let mut acc = Float::with_val(prec, 0);
        for l in j..=n {
            if l > j {
                f *= &num;
                f /= &den;
                num += 1u32;
                den += 1u32;
            }
            term.assign(&f * &prefix[l - 1]);
            acc += &term;
            next[l].assign(&acc);
        }
        sums.push(next[n].clone());
        std::mem::swap(&mut prefix, &mut next);
    }
    sums
}

/// How the nested-sum DP is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arithmetic {
    /// MPFR floats at the given precision.
    Multiprecision(u32),
    /// `f64` mantissas with a separate integer exponent: no overflow or
    /// underflow, about two orders of magnitude faster, relative error a
    /// small multiple of `N · 2⁻⁵³`.
    WideF64,
}

impl Arithmetic {
    /// Multiprecision up to `N = 1000`, wide `f64` beyond.
    pub fn auto(n: u32) -> Self {
        if n <= 1000 {
            Arithmetic::Multiprecision(DEFAULT_PRECISION_BITS)
        } else {
            Arithmetic::WideF64
        }
    }
}

/// Positive number `m · 2^e` with `m ∈ [0.5, 1)` (or zero): `f64` precision
/// without `f64` range limits.
#[derive(Clone, Copy, Debug, PartialEq)]
struct WideF64 {
    m: f64,
    e: i64,
}

impl WideF64 {
    const ZERO: WideF64 = WideF64 { m: 0.0, e: 0 };

    fn new(m: f64, e: i64) -> Self {
        if m == 0.0 {
            return Self::ZERO;
        }
        let bits = m.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64 - 1022;
        let mant = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
        WideF64 { m: mant, e: e + exp }
    }

    fn from_float(x: &Float) -> Self {
        let (m, e) = x.to_f64_exp();
        Self::new(m, e as i64)
    }

    fn mul(self, other: WideF64) -> Self {
        Self::new(self.m * other.m, self.e + other.e)
    }

    fn add(self, other: WideF64) -> Self {
        if other.m == 0.0 {
            return self;
        }
        if self.m == 0.0 {
            return other;
        }
        let (hi, lo) = if self.e >= other.e { (self, other) } else { (other, self) };
        let diff = hi.e - lo.e;
        if diff > 60 {
            return hi;
        }
        let scale = f64::from_bits(((1023 - diff) as u64) << 52);
        Self::new(hi.m + lo.m * scale, hi.e)
    }

    fn ln(self) -> f64 {
        self.m.ln() + self.e as f64 * std::f64::consts::LN_2
    }
}

/// `ln S_0 … ln S_N` in wide-exponent `f64` arithmetic.
fn nested_log_sums_wide(n: u32, r: &Rational) -> Vec<f64> {
    let n = n as usize;
    let rf = r.to_f64();
    let mut logs = Vec::with_capacity(n + 1);
    logs.push(0.0);
    let one = WideF64::new(1.0, 0);
    let mut prefix = vec![one; n + 1];
    let mut next = vec![WideF64::ZERO; n + 1];
    for j in 1..=n {
        let jr = Rational::from(r * j as u32);
        let j1r = Rational::from(r * (j as u32 + 1));
        let mut f0 = float(DEFAULT_PRECISION_BITS, &Rational::from(&j1r + 1u32)).gamma();
        f0 /= float(DEFAULT_PRECISION_BITS, &Rational::from(&jr + 2u32)).gamma();
        let mut f = WideF64::from_float(&f0);
        let mut num = 1.0 + (j as f64 + 1.0) * rf;
        let mut den = 2.0 + j as f64 * rf;
        next[..j].iter_mut().for_each(|v| *v = WideF64::ZERO);
        let mut acc = WideF64::ZERO;
        for l in j..=n {
            if l > j {
                f = f.mul(WideF64::new(num / den, 0));
                num += 1.0;
                den += 1.0;
            }
            acc = acc.add(f.mul(prefix[l - 1]));
            next[l] = acc;
        }
        logs.push(next[n].ln());
        std::mem::swap(&mut prefix, &mut next);
    }
    logs
}

/// `ln[(N−x)! x! r^x Γ(1+r)/Γ(N−x+1+(x+1)r)]` for every `x`.
fn log_prefactors(n: u32, r: &Rational, prec: u32) -> Vec<Float> {
    let ln_gamma_1r = float(prec, &Rational::from(r + 1u32)).ln_gamma();
    let ln_r = float(prec, r).ln();
    (0..=n)
        .into_par_iter()
        .map(|x| {
            let mut log_p = Float::with_val(prec, n - x + 1).ln_gamma();
            log_p += Float::with_val(prec, x + 1).ln_gamma();
            log_p += Float::with_val(prec, &ln_r * x);
            log_p += &ln_gamma_1r;
            let arg = Rational::from(r * (x + 1)) + (n - x + 1);
            log_p -= float(prec, &arg).ln_gamma();
            log_p
        })
        .collect()
}

/// Closed-form `p_x` for `x = 0 … N` at the given working precision.
pub fn two_channel_probabilities(n: u32, r: &Rational, precision_bits: u32) -> Result<Vec<Float>> {
    check_ratio(n, r)?;
    let prec = precision_bits.max(64);
    let sums = nested_sums(n, r, prec);
    let probs: Vec<Float> = log_prefactors(n, r, prec)
        .into_iter()
        .zip(sums)
        .map(|(log_p, s)| (log_p + s.ln()).exp())
        .collect();
    if let Some(bad) = probs.iter().find(|p| !p.is_finite()) {
        return Err(Error::PrecisionExhausted {
            bits: prec,
            error_bound: bad.to_f64(),
            accuracy: NORMALIZATION_TOL,
        });
    }
    Ok(probs)
}

/// `p_x` for `x = 0 … N` in the chosen arithmetic.
pub fn two_channel_probabilities_f64(n: u32, r: &Rational, arithmetic: Arithmetic) -> Result<Vec<f64>> {
    match arithmetic {
        Arithmetic::Multiprecision(bits) => Ok(two_channel_probabilities(n, r, bits)?
            .iter()
            .map(Float::to_f64)
            .collect()),
        Arithmetic::WideF64 => {
            check_ratio(n, r)?;
            let logs = nested_log_sums_wide(n, r);
            let probs: Vec<f64> = log_prefactors(n, r, DEFAULT_PRECISION_BITS)
                .into_iter()
                .zip(logs)
                .map(|(log_p, s)| (log_p.to_f64() + s).exp())
                .collect();
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::PrecisionExhausted {
                    bits: 53,
                    error_bound: f64::INFINITY,
                    accuracy: NORMALIZATION_TOL,
                });
            }
            Ok(probs)
        }
    }
}

/// Ground-state distribution for `Γ₁ = 1`, `Γ₂ = r`.
pub fn steady_state_two_channel(n: u32, r: &Rational) -> Result<SteadyStateDistribution> {
    steady_state_two_channel_with(n, r, Arithmetic::auto(n))
}

pub fn steady_state_two_channel_with(n: u32, r: &Rational, arithmetic: Arithmetic) -> Result<SteadyStateDistribution> {
    let probs = two_channel_probabilities_f64(n, r, arithmetic)?;
    let system = SystemSpec::new(n, vec![RateValue::integer(1), RateValue::from_rational(r.clone())?])?;
    let states = (0..=n).map(|x| OccupationState::new(vec![n - x, x])).collect();
    SteadyStateDistribution::new(system, states, probs)
}

/// `p_{N,0} = N! Γ(1+r) / Γ(N+1+r)`.
pub fn all_first_channel_probability(n: u32, r: &Rational, precision_bits: u32) -> Result<Float> {
    check_ratio(n, r)?;
    let prec = precision_bits.max(64);
    let mut log_p = Float::with_val(prec, n + 1).ln_gamma();
    log_p += float(prec, &Rational::from(r + 1u32)).ln_gamma();
    log_p -= float(prec, &Rational::from(r + (n + 1))).ln_gamma();
    Ok(log_p.exp())
}

/// The alternative bracketed closed form for `x = 1`,
/// `(N−1)! r Γ(1+r)/Γ(N+2r) [Γ(N+1+2r)/Γ(N+1+r) − Γ(1+2r)/Γ(1+r)]`.
///
/// It evaluates to exactly `r` times `p_1` from the nested-sum formula, so it
/// is kept only as a diagnostic.
pub fn single_second_channel_bracket(n: u32, r: &Rational, precision_bits: u32) -> Result<Float> {
    check_ratio(n, r)?;
    let prec = precision_bits.max(64);
    let g = |q: Rational| float(prec, &q).gamma();
    let two_r = Rational::from(r * 2u32);
    let bracket = g(Rational::from(&two_r + (n + 1))) / g(Rational::from(r + (n + 1)))
        - g(Rational::from(&two_r + 1u32)) / g(Rational::from(r + 1u32));
    let mut p = Float::with_val(prec, Integer::from(Integer::factorial(n - 1)));
    p *= float(prec, r);
    p *= g(Rational::from(r + 1u32));
    p /= g(Rational::from(&two_r + n));
    Ok(p * bracket)
}

/// Steady state of any system as the constant term of each ground-state
/// population in the closed-form table.
pub fn steady_state_general(spec: &SystemSpec) -> Result<SteadyStateDistribution> {
    steady_state_general_with(spec, &SolverOptions::default())
}

pub fn steady_state_general_with(spec: &SystemSpec, opts: &SolverOptions) -> Result<SteadyStateDistribution> {
    let table = trajectory::solve(spec, opts)?;
    let states: Vec<OccupationState> = compositions(spec.n(), spec.d())
        .into_iter()
        .map(OccupationState::new)
        .collect();
    let probabilities = states
        .iter()
        .map(|s| table.population(s).map(|p| p.constant_term().to_f64()))
        .collect::<Result<Vec<f64>>>()?;
    SteadyStateDistribution::new(spec.clone(), states, probabilities)
}

fn mean_x(n: u32, r: &Rational, arithmetic: Arithmetic) -> Result<f64> {
    let probs = two_channel_probabilities_f64(n, r, arithmetic)?;
    let mut weighted: Vec<f64> = probs.iter().enumerate().map(|(x, p)| p * x as f64).collect();
    weighted.sort_by(f64::total_cmp);
    Ok(weighted.iter().sum::<f64>() / n as f64)
}

/// `n̄₂` and `χ = ∂n̄₂/∂r` by central difference with step `step_rel · r`.
pub fn order_parameter(n: u32, r: &Rational) -> Result<OrderParameterPoint> {
    order_parameter_with(n, r, DEFAULT_SUSCEPTIBILITY_STEP, Arithmetic::auto(n))
}

pub fn order_parameter_with(n: u32, r: &Rational, step_rel: f64, arithmetic: Arithmetic) -> Result<OrderParameterPoint> {
    check_ratio(n, r)?;
    if !(step_rel > 0.0 && step_rel < 1.0) {
        return Err(Error::validation(format!("susceptibility step {step_rel} must lie in (0, 1)")));
    }
    let step = Rational::from_f64(step_rel).expect("finite step");
    let h = Rational::from(r * &step);
    let (centre, (up, down)) = rayon::join(
        || mean_x(n, r, arithmetic),
        || {
            rayon::join(
                || mean_x(n, &Rational::from(r + &h), arithmetic),
                || mean_x(n, &Rational::from(r - &h), arithmetic),
            )
        },
    );
    let chi = (up? - down?) / (2.0 * h.to_f64());
    let centre = centre?;
    Ok(OrderParameterPoint {
        n,
        r: r.to_f64(),
        n_bar_2: centre,
        susceptibility: chi,
    })
}
