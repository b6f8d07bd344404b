//! Exact-shape algebra for finite sums `Σ cᵢ tᵏⁱ e^{-λᵢ t}`.
//!
//! Every population and intensity in the crate is an [`ExpPolySum`]. Rates
//! are exact rationals ([`RateValue`]), so two terms share a basis function
//! exactly when their rates compare equal; coefficients are MPFR floats at a
//! configurable precision.
//!
//! Each term also carries a running magnitude: the sum of absolute values of
//! every contribution that was folded into its coefficient. Comparing it with
//! the coefficient measures how much cancellation happened, which gives the
//! rounding-error bound reported by [`ExpPolySum::error_bound`]. When that
//! bound exceeds the requested accuracy, [`ExpPolySum::convolve`] fails with
//! [`Error::PrecisionExhausted`] instead of returning a degraded result.

mod json;
mod rate;

use std::cmp::Ordering;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::ExpTermRecord;
pub use rate::RateValue;

/// Precision used for magnitudes and error bounds. Only the exponent range
/// matters there, so 53 bits is plenty.
const MAG_PREC: u32 = 53;

/// Working precision and the absolute accuracy (on the sup norm over
/// `t ≥ 0`) that results must meet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub precision_bits: u32,
    pub accuracy: f64,
}

impl Numerics {
    pub const DEFAULT_ACCURACY: f64 = 1e-14;

    pub fn new(precision_bits: u32, accuracy: f64) -> Self {
        Numerics {
            precision_bits: precision_bits.max(64),
            accuracy,
        }
    }

    /// Default working precision for an `n`-emitter problem: 128 bits up to
    /// 20 emitters, 256 beyond.
    pub fn for_emitters(n: u32) -> Self {
        let bits = if n > 20 { 256 } else { 128 };
        Numerics::new(bits, Self::DEFAULT_ACCURACY)
    }

    fn combine(self, other: Numerics) -> Numerics {
        Numerics {
            precision_bits: self.precision_bits.max(other.precision_bits),
            accuracy: self.accuracy.min(other.accuracy),
        }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics::new(128, Self::DEFAULT_ACCURACY)
    }
}

/// One basis term `coeff · t^power · e^{-rate·t}`.
#[derive(Clone, Debug)]
pub struct ExpTerm {
    coeff: Float,
    power: u32,
    rate: RateValue,
    mag: Float,
}

impl ExpTerm {
    pub fn new(coeff: Float, power: u32, rate: RateValue) -> Self {
        let mag = Float::with_val(MAG_PREC, &*coeff.as_abs());
        ExpTerm { coeff, power, rate, mag }
    }

    pub fn coeff(&self) -> &Float {
        &self.coeff
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn rate(&self) -> &RateValue {
        &self.rate
    }

    /// `ln sup_{t≥0} |t^k e^{-λt}|`; infinite for a growing basis (`λ = 0`, `k > 0`).
    fn ln_basis_sup(&self) -> f64 {
        if self.power == 0 {
            return 0.0;
        }
        if self.rate.is_zero() {
            return f64::INFINITY;
        }
        let k = self.power as f64;
        k * (k.ln() - 1.0 - self.rate.to_f64().ln())
    }

    fn sup_scaled(&self, x: &Float) -> Float {
        let ln_sup = self.ln_basis_sup();
        if ln_sup.is_infinite() {
            return Float::with_val(MAG_PREC, f64::INFINITY);
        }
        let mut out = Float::with_val(MAG_PREC, &*x.as_abs());
        out *= Float::with_val(MAG_PREC, ln_sup).exp();
        out
    }

    fn key_cmp(&self, other: &ExpTerm) -> Ordering {
        self.rate.cmp(&other.rate).then(self.power.cmp(&other.power))
    }
}

/// A finite sum of polynomial-times-exponential terms.
///
/// Terms are kept sorted by `(rate, power)` with no duplicate keys.
#[derive(Clone, Debug)]
pub struct ExpPolySum {
    terms: Vec<ExpTerm>,
    numerics: Numerics,
    depth: u32,
    dropped: Float,
}

impl ExpPolySum {
    pub fn zero(numerics: Numerics) -> Self {
        ExpPolySum {
            terms: Vec::new(),
            numerics,
            depth: 0,
            dropped: Float::new(MAG_PREC),
        }
    }

    /// `e^{-rate·t}`.
    pub fn exponential(rate: RateValue, numerics: Numerics) -> Self {
        let one = Float::with_val(numerics.precision_bits, 1);
        Self::from_terms(vec![ExpTerm::new(one, 0, rate)], numerics)
    }

    /// `coeff · t^power · e^{-rate·t}` with an exact rational coefficient.
    pub fn monomial(coeff: &Rational, power: u32, rate: RateValue, numerics: Numerics) -> Self {
        let c = Float::with_val(numerics.precision_bits, coeff);
        Self::from_terms(vec![ExpTerm::new(c, power, rate)], numerics)
    }

    pub fn from_terms(terms: Vec<ExpTerm>, numerics: Numerics) -> Self {
        let mut out = ExpPolySum {
            terms,
            numerics,
            depth: 0,
            dropped: Float::new(MAG_PREC),
        };
        out.normalize();
        out
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn numerics(&self) -> Numerics {
        self.numerics
    }

    pub fn precision_bits(&self) -> u32 {
        self.numerics.precision_bits
    }

    /// Total sup-norm mass removed by pruning so far.
    pub fn dropped_budget(&self) -> f64 {
        self.dropped.to_f64()
    }

    fn prec(&self) -> u32 {
        self.numerics.precision_bits
    }

    /// Sort, merge equal keys, remove exact zeros, then prune terms whose
    /// sup-scaled size falls below `2^(-prec/2)` of the largest one.
    fn normalize(&mut self) {
        if self.terms.is_empty() {
            return;
        }
        self.terms.sort_by(ExpTerm::key_cmp);
        let mut merged: Vec<ExpTerm> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.key_cmp(&term) == Ordering::Equal => {
                    last.coeff += &term.coeff;
                    last.mag += &term.mag;
                }
                _ => merged.push(term),
            }
        }
        merged.retain(|t| !t.coeff.is_zero());

        let sizes: Vec<Float> = merged.iter().map(|t| t.sup_scaled(&t.coeff)).collect();
        let largest = sizes
            .iter()
            .filter(|s| s.is_finite())
            .max_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .cloned();
        if let Some(largest) = largest {
            let rel = Float::with_val(MAG_PREC, -(self.prec() as i32 / 2)).exp2();
            let threshold = Float::with_val(MAG_PREC, &largest * &rel);
            let mut kept = Vec::with_capacity(merged.len());
            for (term, size) in merged.into_iter().zip(sizes) {
                if size.is_finite() && size < threshold {
                    self.dropped += &size;
                } else {
                    kept.push(term);
                }
            }
            merged = kept;
        }
        self.terms = merged;
    }

    /// Sup-norm bound on the accumulated rounding and pruning error.
    pub fn error_bound(&self) -> f64 {
        let mut total = Float::with_val(MAG_PREC, 0);
        for term in &self.terms {
            total += term.sup_scaled(&term.mag);
        }
        self.finish_bound(total)
    }

    /// Error bound at a specific time.
    pub fn error_bound_at(&self, t: f64) -> f64 {
        let tf = Float::with_val(MAG_PREC, t);
        let mut total = Float::with_val(MAG_PREC, 0);
        for term in &self.terms {
            total += Float::with_val(MAG_PREC, &term.mag * basis(term, &tf, MAG_PREC));
        }
        self.finish_bound(total)
    }

    fn finish_bound(&self, mag_total: Float) -> f64 {
        let unit = Float::with_val(MAG_PREC, 1 - self.prec() as i32).exp2();
        let factor = 4.0 * (self.depth as f64 + 2.0);
        let mut bound = mag_total * unit * factor;
        bound += &self.dropped;
        bound.to_f64()
    }

    /// Fails with [`Error::PrecisionExhausted`] when the error bound exceeds
    /// the requested accuracy.
    pub fn check_accuracy(&self) -> Result<()> {
        let bound = self.error_bound();
        if bound.is_finite() && bound <= self.numerics.accuracy {
            Ok(())
        } else {
            Err(Error::PrecisionExhausted {
                bits: self.prec(),
                error_bound: bound,
                accuracy: self.numerics.accuracy,
            })
        }
    }

    pub fn add(&self, other: &ExpPolySum) -> ExpPolySum {
        let numerics = self.numerics.combine(other.numerics);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut out = ExpPolySum {
            terms,
            numerics,
            depth: self.depth.max(other.depth) + 1,
            dropped: Float::with_val(MAG_PREC, &self.dropped + &other.dropped),
        };
        out.normalize();
        out
    }

    /// Sum of many signals; equivalent to folding [`ExpPolySum::add`] with a single merge.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a ExpPolySum>, numerics: Numerics) -> ExpPolySum {
        let mut out = ExpPolySum::zero(numerics);
        for item in items {
            out.numerics = out.numerics.combine(item.numerics);
            out.depth = out.depth.max(item.depth);
            out.dropped += &item.dropped;
            out.terms.extend(item.terms.iter().cloned());
        }
        out.depth += 1;
        out.normalize();
        out
    }

    /// Multiply by an exact rational factor.
    pub fn scale(&self, factor: &Rational) -> ExpPolySum {
        let prec = self.prec();
        let abs = Rational::from(factor.abs_ref());
        let mut out = self.clone();
        for term in &mut out.terms {
            term.coeff = Float::with_val(prec, &term.coeff * factor);
            term.mag = Float::with_val(MAG_PREC, &term.mag * &abs);
        }
        out.dropped = Float::with_val(MAG_PREC, &out.dropped * &abs);
        out.depth += 1;
        out.normalize();
        out
    }

    /// Exact convolution `∫₀ᵗ a(t−τ) b(τ) dτ`, term by term through partial
    /// fractions of `k! j! / ((s+F)^{k+1} (s+K)^{j+1})`.
    pub fn convolve(&self, other: &ExpPolySum) -> Result<ExpPolySum> {
        let numerics = self.numerics.combine(other.numerics);
        let prec = numerics.precision_bits;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len() * 2);
        for a in &self.terms {
            for b in &other.terms {
                let c = Float::with_val(prec, &a.coeff * &b.coeff);
                let m = Float::with_val(MAG_PREC, &a.mag * &b.mag);
                for (factor, power, rate) in convolve_basis(a.power, &a.rate, b.power, &b.rate) {
                    let abs = Rational::from(factor.abs_ref());
                    terms.push(ExpTerm {
                        coeff: Float::with_val(prec, &c * &factor),
                        power,
                        rate: rate.clone(),
                        mag: Float::with_val(MAG_PREC, &m * &abs),
                    });
                }
            }
        }
        let mut out = ExpPolySum {
            terms,
            numerics,
            depth: self.depth.max(other.depth) + 1,
            dropped: Float::with_val(MAG_PREC, &self.dropped + &other.dropped),
        };
        out.normalize();
        out.check_accuracy()?;
        Ok(out)
    }

    /// Value at `t ≥ 0`. Terms are summed smallest-magnitude first with a
    /// correctly rounded MPFR sum.
    pub fn evaluate(&self, t: f64) -> Float {
        let prec = self.prec();
        let tf = Float::with_val(prec, t);
        let mut values: Vec<Float> = self
            .terms
            .iter()
            .map(|term| Float::with_val(prec, &term.coeff * basis(term, &tf, prec)))
            .collect();
        values.sort_by(|a, b| a.cmp_abs(b).unwrap_or(Ordering::Equal));
        Float::with_val(prec, Float::sum(values.iter()))
    }

    pub fn evaluate_f64(&self, t: f64) -> f64 {
        self.evaluate(t).to_f64()
    }

    /// [`ExpPolySum::evaluate`] plus a check of the pointwise error bound.
    pub fn evaluate_checked(&self, t: f64) -> Result<Float> {
        let bound = self.error_bound_at(t);
        if bound.is_finite() && bound <= self.numerics.accuracy {
            Ok(self.evaluate(t))
        } else {
            Err(Error::PrecisionExhausted {
                bits: self.prec(),
                error_bound: bound,
                accuracy: self.numerics.accuracy,
            })
        }
    }

    /// Term-wise `d/dt`.
    pub fn derivative(&self) -> ExpPolySum {
        let prec = self.prec();
        let mut terms = Vec::with_capacity(self.terms.len() * 2);
        for term in &self.terms {
            if term.power > 0 {
                let k = term.power;
                terms.push(ExpTerm {
                    coeff: Float::with_val(prec, &term.coeff * k),
                    power: k - 1,
                    rate: term.rate.clone(),
                    mag: Float::with_val(MAG_PREC, &term.mag * k),
                });
            }
            if term.rate.is_positive() {
                let lambda = term.rate.as_rational();
                terms.push(ExpTerm {
                    coeff: Float::with_val(prec, -Float::with_val(prec, &term.coeff * lambda)),
                    power: term.power,
                    rate: term.rate.clone(),
                    mag: Float::with_val(MAG_PREC, &term.mag * lambda),
                });
            }
        }
        let mut out = ExpPolySum {
            terms,
            numerics: self.numerics,
            depth: self.depth + 1,
            dropped: self.dropped.clone(),
        };
        out.normalize();
        out
    }

    /// `∫₀^∞ s(t) dt = Σ cᵢ kᵢ! / λᵢ^{kᵢ+1}`.
    pub fn integral_to_infinity(&self) -> Result<Float> {
        let prec = self.prec();
        let mut values = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            if term.rate.is_zero() {
                return Err(Error::Divergent { power: term.power });
            }
            let factorial = Integer::from(Integer::factorial(term.power));
            let denom = Rational::from(term.rate.as_rational().pow(term.power + 1));
            let factor = Rational::from(factorial) / denom;
            values.push(Float::with_val(prec, &term.coeff * &factor));
        }
        values.sort_by(|a, b| a.cmp_abs(b).unwrap_or(Ordering::Equal));
        Ok(Float::with_val(prec, Float::sum(values.iter())))
    }

    /// Coefficient of `t^power e^{-rate t}`, zero when absent.
    pub fn coefficient(&self, power: u32, rate: &RateValue) -> Float {
        self.terms
            .iter()
            .find(|t| t.power == power && &t.rate == rate)
            .map(|t| t.coeff.clone())
            .unwrap_or_else(|| Float::new(self.prec()))
    }

    /// The `t → ∞` limit when the signal has one: the rate-0, power-0 coefficient.
    pub fn constant_term(&self) -> Float {
        self.coefficient(0, &RateValue::zero())
    }

    pub fn max_rate(&self) -> Option<&RateValue> {
        self.terms.iter().map(|t| &t.rate).max()
    }

    pub fn min_positive_rate(&self) -> Option<&RateValue> {
        self.terms.iter().map(|t| &t.rate).filter(|r| r.is_positive()).min()
    }
}

/// `t^k e^{-λt}` at working precision.
fn basis(term: &ExpTerm, t: &Float, prec: u32) -> Float {
    let lambda = Float::with_val(prec, term.rate.as_rational());
    let mut value = Float::with_val(prec, -(lambda * t));
    value.exp_mut();
    if term.power > 0 {
        value *= Float::with_val(prec, t.pow(term.power));
    }
    value
}

/// Convolution of the basis functions `t^k e^{-Ft}` and `t^j e^{-Kt}`,
/// returned as exact rational multiples of output basis functions.
///
/// Equal rates give `k! j!/(k+j+1)! · t^{k+j+1} e^{-Ft}`. Otherwise, with
/// `D = K − F`, `A = k+1`, `B = j+1`, the Laplace image
/// `k! j! (s+F)^{-A} (s+K)^{-B}` splits into
/// `Σ_l (−1)^l C(B+l−1, l) D^{−B−l} (s+F)^{l−A}` plus the mirrored sum around `−K`.
pub(crate) fn convolve_basis(
    k: u32,
    f: &RateValue,
    j: u32,
    kr: &RateValue,
) -> Vec<(Rational, u32, RateValue)> {
    let kf = Integer::from(Integer::factorial(k));
    let jf = Integer::from(Integer::factorial(j));
    let base = Rational::from(Integer::from(&kf * &jf));
    if f == kr {
        let denom = Integer::from(Integer::factorial(k + j + 1));
        return vec![(base / denom, k + j + 1, f.clone())];
    }
    let d = Rational::from(kr.as_rational() - f.as_rational());
    let neg_d = Rational::from(-&d);
    let (a, b) = (k + 1, j + 1);
    let mut out = Vec::with_capacity((a + b) as usize);
    for l in 0..a {
        let power = a - l - 1;
        out.push((
            partial_fraction_coeff(&base, &d, b, l, power),
            power,
            f.clone(),
        ));
    }
    for l in 0..b {
        let power = b - l - 1;
        out.push((
            partial_fraction_coeff(&base, &neg_d, a, l, power),
            power,
            kr.clone(),
        ));
    }
    out
}

/// `base · (−1)^l C(other+l−1, l) · gap^{−(other+l)} / power!`
fn partial_fraction_coeff(base: &Rational, gap: &Rational, other: u32, l: u32, power: u32) -> Rational {
    let binom = Integer::from(Integer::binomial_u(other + l - 1, l));
    let gap_pow = Rational::from(gap.pow(other + l));
    let fact = Integer::from(Integer::factorial(power));
    let mut value = Rational::from(base * binom) / gap_pow / fact;
    if l % 2 == 1 {
        value = -value;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rate(n: i64, d: i64) -> RateValue {
        RateValue::new(n, d).unwrap()
    }

    fn exp(n: i64) -> ExpPolySum {
        ExpPolySum::exponential(rate(n, 1), Numerics::default())
    }

    fn coeff_f64(s: &ExpPolySum, power: u32, r: i64) -> f64 {
        s.coefficient(power, &rate(r, 1)).to_f64()
    }

    #[test]
    fn equal_rates_give_t_exponential() {
        let c = exp(2).convolve(&exp(2)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(coeff_f64(&c, 1, 2), 1.0);
    }

    #[test]
    fn distinct_rates_give_difference_quotient() {
        let c = exp(1).convolve(&exp(3)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(coeff_f64(&c, 0, 1), 0.5);
        assert_eq!(coeff_f64(&c, 0, 3), -0.5);
    }

    #[test]
    fn degenerate_second_order_rule() {
        // (t e^{-t}) * e^{-3t} = (e^{-3t} - e^{-t})/4 + t e^{-t}/2
        let te = exp(1).convolve(&exp(1)).unwrap();
        let c = te.convolve(&exp(3)).unwrap();
        assert_eq!(coeff_f64(&c, 1, 1), 0.5);
        assert_eq!(coeff_f64(&c, 0, 1), -0.25);
        assert_eq!(coeff_f64(&c, 0, 3), 0.25);
    }

    #[test]
    fn evaluate_simple() {
        assert_eq!(exp(2).evaluate_f64(0.0), 1.0);
        let te = exp(1).convolve(&exp(1)).unwrap();
        assert!((te.evaluate_f64(1.0) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn derivative_rules() {
        let d = exp(2).derivative();
        assert_eq!(coeff_f64(&d, 0, 2), -2.0);
        let te = exp(1).convolve(&exp(1)).unwrap().derivative();
        assert_eq!(coeff_f64(&te, 0, 1), 1.0);
        assert_eq!(coeff_f64(&te, 1, 1), -1.0);
    }

    #[test]
    fn integrals() {
        assert_eq!(exp(2).integral_to_infinity().unwrap().to_f64(), 0.5);
        let te = exp(1).convolve(&exp(1)).unwrap();
        assert_eq!(te.integral_to_infinity().unwrap().to_f64(), 1.0);
        let one = ExpPolySum::exponential(RateValue::zero(), Numerics::default());
        assert!(matches!(one.integral_to_infinity(), Err(Error::Divergent { power: 0 })));
    }

    #[test]
    fn zero_rate_convolution_is_running_integral() {
        // e^{-2t} * 1 = (1 - e^{-2t})/2
        let one = ExpPolySum::exponential(RateValue::zero(), Numerics::default());
        let c = exp(2).convolve(&one).unwrap();
        assert_eq!(c.constant_term().to_f64(), 0.5);
        assert_eq!(coeff_f64(&c, 0, 2), -0.5);
    }

    #[test]
    fn high_multiplicity_matches_closed_form() {
        // e^{-t} convolved with itself n times is t^{n-1} e^{-t} / (n-1)!
        let mut acc = exp(1);
        for _ in 0..5 {
            acc = acc.convolve(&exp(1)).unwrap();
        }
        assert_eq!(acc.len(), 1);
        assert!((coeff_f64(&acc, 5, 1) - 1.0 / 120.0).abs() < 1e-18);
        // (t^2 e^{-t}) * (t e^{-2t}) at t=1.5 against direct quadrature
        let a = ExpPolySum::monomial(&Rational::from(1), 2, rate(1, 1), Numerics::default());
        let b = ExpPolySum::monomial(&Rational::from(1), 1, rate(2, 1), Numerics::default());
        let c = a.convolve(&b).unwrap();
        let t = 1.5f64;
        let n = 20_000;
        let h = t / n as f64;
        let f = |tau: f64| (t - tau).powi(2) * (-(t - tau)).exp() * tau * (-2.0 * tau).exp();
        let mut quad = f(0.0) + f(t);
        for i in 1..n {
            quad += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        quad *= h / 3.0;
        assert!((c.evaluate_f64(t) - quad).abs() < 1e-12, "{} vs {}", c.evaluate_f64(t), quad);
    }

    #[test]
    fn precision_exhaustion_is_reported() {
        // Nearly degenerate rates force huge cancelling coefficients.
        let tight = Numerics::new(64, 1e-30);
        let a = ExpPolySum::exponential(rate(1, 1), tight);
        let b = ExpPolySum::exponential(rate(1_000_000_001, 1_000_000_000), tight);
        let err = a.convolve(&b).and_then(|c| c.convolve(&a)).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { bits: 64, .. }));
    }
}
