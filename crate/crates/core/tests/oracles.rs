//! Closed forms against independent references: direct quadrature, hand
//! solutions, the rate-equation integrator and an embedded jump chain.

use std::collections::HashMap;

use multidicke::expsum::{ExpPolySum, Numerics, RateValue};
use multidicke::oracle_ode;
use multidicke::steady_state;
use multidicke::system::{OccupationState, SystemSpec};
use multidicke::trajectory::{self, Channel, SolverOptions};
use rug::Rational;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn exp(num: i64, den: i64) -> ExpPolySum {
    ExpPolySum::exponential(RateValue::new(num, den).unwrap(), Numerics::default())
}

#[test]
fn triple_convolution_by_quadrature() {
    // (e^{-t} * e^{-2t} * e^{-t})(1) as a double integral over the simplex.
    let closed = exp(1, 1).convolve(&exp(2, 1)).unwrap().convolve(&exp(1, 1)).unwrap();
    let t = 1.0;
    let inner = |s: f64| simpson(|u| (-(s - u)).exp() * (-2.0 * u).exp(), 0.0, s, 400);
    let quad = simpson(|s| inner(s) * (-(t - s)).exp(), 0.0, t, 400);
    assert!((closed.evaluate_f64(t) - quad).abs() < 1e-12, "{} vs {quad}", closed.evaluate_f64(t));
}

#[test]
fn degenerate_rule_sign_by_quadrature() {
    // (t e^{-t}) * e^{-3t}, checked at several times.
    let te = exp(1, 1).convolve(&exp(1, 1)).unwrap();
    let closed = te.convolve(&exp(3, 1)).unwrap();
    for t in [0.01, 0.3, 1.0, 4.0] {
        let quad = simpson(|u| u * (-u).exp() * (-3.0 * (t - u)).exp(), 0.0, t, 2000);
        assert!((closed.evaluate_f64(t) - quad).abs() < 1e-12);
    }
}

#[test]
fn two_emitters_by_hand() {
    // Λ₂ = Λ₁ = 2Γ: p₂ = e^{-2Γt}, p₁ = 2Γt e^{-2Γt}.
    let spec = SystemSpec::parse(2, "3/2").unwrap();
    let table = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
    let g = 1.5f64;
    for t in [0.0, 0.1, 0.7, 3.0] {
        let e = (-2.0 * g * t).exp();
        assert!((table.level(2).unwrap().evaluate_f64(t) - e).abs() < 1e-15);
        assert!((table.level(1).unwrap().evaluate_f64(t) - 2.0 * g * t * e).abs() < 1e-15);
        assert!((table.level(0).unwrap().evaluate_f64(t) - (1.0 - (1.0 + 2.0 * g * t) * e)).abs() < 1e-15);
    }
}

#[test]
fn populations_and_intensities_match_rate_equations() {
    for (n, rates) in [(4, "1,3"), (6, "1/2,1/4,1/4"), (7, "2")] {
        let spec = SystemSpec::parse(n, rates).unwrap();
        let table = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
        let grid: Vec<f64> = (0..80).map(|i| i as f64 * 0.02).collect();
        let ode = oracle_ode::integrate(&spec, &grid, 1e-12, 1e-14).unwrap();
        for (state, p) in table.entries(u128::MAX).unwrap() {
            for (t, v) in grid.iter().zip(ode.column(&state).unwrap()) {
                assert!((p.evaluate_f64(*t) - v).abs() < 1e-9);
            }
        }
        for alpha in 0..spec.d() {
            let closed = trajectory::intensity(&table, Channel::Index(alpha)).unwrap();
            let reference = ode.intensity(&spec, Some(alpha));
            for (t, v) in grid.iter().zip(reference) {
                assert!((closed.evaluate_f64(*t) - v).abs() < 1e-8 * (1.0 + v.abs()));
            }
        }
    }
}

/// Ground-state law from the embedded jump chain: from `n`, the next jump
/// goes to channel α with probability `Γ_α (n_α + 1) / Σ_β Γ_β (n_β + 1)`.
fn jump_chain_law(n: u32, rates: &[f64]) -> HashMap<Vec<u32>, f64> {
    let mut level: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0; rates.len()], 1.0)]);
    for _ in 0..n {
        let mut next = HashMap::new();
        for (state, p) in level {
            let weights: Vec<f64> = rates.iter().zip(&state).map(|(g, &k)| g * (k as f64 + 1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (alpha, w) in weights.iter().enumerate() {
                let mut s = state.clone();
                s[alpha] += 1;
                *next.entry(s).or_insert(0.0) += p * w / total;
            }
        }
        level = next;
    }
    level
}

#[test]
fn steady_state_matches_jump_chain() {
    for (n, num, den) in [(30u32, 1i64, 3i64), (25, 5, 2), (12, 1, 1)] {
        let r = Rational::from((num, den));
        let law = jump_chain_law(n, &[1.0, num as f64 / den as f64]);
        let dist = steady_state::steady_state_two_channel(n, &r).unwrap();
        for (state, p) in dist.states().iter().zip(dist.probabilities()) {
            let q = law[&state.counts().to_vec()];
            assert!((p - q).abs() <= 1e-10 * q + 1e-15, "{state:?}: {p} vs {q}");
        }
    }
    let spec = SystemSpec::parse(9, "1,2,5").unwrap();
    let law = jump_chain_law(9, &[1.0, 2.0, 5.0]);
    let dist = steady_state::steady_state_general(&spec).unwrap();
    for (state, p) in dist.states().iter().zip(dist.probabilities()) {
        assert!((p - law[&state.counts().to_vec()]).abs() < 1e-12);
    }
}

#[test]
fn ode_steady_state_for_three_channels() {
    let spec = SystemSpec::parse(8, "1,2,5").unwrap();
    let exact = steady_state::steady_state_general(&spec).unwrap();
    let ode = oracle_ode::steady_state_by_integration(&spec).unwrap();
    for state in exact.states() {
        let (a, b) = (exact.probability(state).unwrap(), ode.probability(state).unwrap());
        assert!((a - b).abs() < 1e-8);
    }
    assert!(exact.probability(&OccupationState::new(vec![8, 0])).is_none());
}
