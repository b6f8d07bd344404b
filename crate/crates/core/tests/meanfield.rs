//! Mean-field laws against exact steady states.

use multidicke::meanfield;
use multidicke::steady_state;
use rug::Rational;

/// KS distance between two distributions on x = 0..=N.
fn ks(p: &[f64], q: &[f64]) -> f64 {
    let (mut a, mut b, mut d) = (0.0, 0.0, 0.0f64);
    for (x, y) in p.iter().zip(q) {
        a += x;
        b += y;
        d = d.max((a - b).abs());
    }
    d
}

#[test]
fn ks_distance_fixture() {
    // Measured 0.066 at N=100, r=2; the fixture threshold is 0.07.
    let exact = steady_state::steady_state_two_channel(100, &Rational::from(2)).unwrap().by_x().unwrap();
    let approx = meanfield::asymptotic_distribution(100, 2.0).unwrap().by_x().unwrap();
    let d = ks(&exact, &approx);
    assert!(d < 0.07, "KS distance {d}");
}

#[test]
fn order_parameter_at_moderate_n() {
    let exact = steady_state::order_parameter(500, &Rational::from((3, 2))).unwrap().n_bar_2;
    let approx = meanfield::order_parameter_asymptotic(500, 1.5).unwrap();
    assert!((exact - approx).abs() < 0.05, "{exact} vs {approx}");
}

#[test]
fn balanced_susceptibility_tracks_log_n() {
    // χ(N, 1) and its leading form ln N differ by a factor, but both grow
    // linearly in ln N: successive differences over doublings are constant.
    let chi: Vec<f64> = [100u32, 200, 400, 800]
        .iter()
        .map(|&n| steady_state::order_parameter(n, &Rational::from(1)).unwrap().susceptibility)
        .collect();
    let steps: Vec<f64> = chi.windows(2).map(|w| w[1] - w[0]).collect();
    for s in &steps {
        assert!((s / steps[0] - 1.0).abs() < 0.05, "{steps:?}");
    }
}
