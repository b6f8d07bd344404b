//! Jump-process simulator against exact laws.

use multidicke::steady_state;
use multidicke::stochastic::{self, BatchConfig, TimeBins};
use multidicke::system::SystemSpec;
use multidicke::trajectory::{self, Channel, SolverOptions};
use statrs::distribution::{ContinuousCDF, Exp};

/// Kolmogorov–Smirnov distance of a sample from a continuous law.
fn ks_distance(mut sample: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn first_waiting_time_is_exponential() {
    // The fully excited state decays at the total rate N Γ₀.
    let spec = SystemSpec::parse(6, "1,2").unwrap();
    let waits: Vec<f64> = (0..4000)
        .map(|i| stochastic::simulate_trajectory(&spec, 99, i).unwrap().jump_times[0])
        .collect();
    let law = Exp::new(6.0 * 3.0).unwrap();
    let d = ks_distance(waits, |x| law.cdf(x));
    // Critical value at significance 1e-3: 1.95 / sqrt(n).
    assert!(d < 1.95 / 4000f64.sqrt(), "KS distance {d}");
}

#[test]
fn binned_intensity_matches_closed_form() {
    let spec = SystemSpec::parse(5, "1,3").unwrap();
    let table = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
    let config = BatchConfig {
        n_trajectories: 200_000,
        master_seed: 5,
        bins: TimeBins::linear(0.0, 1.0, 25).unwrap(),
        keep_records: false,
    };
    let batch = stochastic::simulate_batch(&spec, &config).unwrap();
    let est = stochastic::estimate_intensity(&batch).unwrap();
    let edges = config.bins.edges();
    for alpha in 0..2 {
        let closed = trajectory::intensity(&table, Channel::Index(alpha)).unwrap();
        let mut outliers = 0;
        for k in 0..est.centers.len() {
            // Bin average of the exact intensity by Simpson's rule.
            let (a, b) = (edges[k], edges[k + 1]);
            let avg = (closed.evaluate_f64(a) + 4.0 * closed.evaluate_f64(0.5 * (a + b)) + closed.evaluate_f64(b)) / 6.0;
            let z = (est.channel_rate[alpha][k] - avg) / est.channel_se[alpha][k].max(1e-12);
            if z.abs() > 4.0 {
                outliers += 1;
            }
        }
        assert!(outliers <= 1, "channel {alpha}: {outliers} bins beyond 4 SE");
    }
}

#[test]
fn three_channel_final_states() {
    let spec = SystemSpec::parse(4, "1,2,5").unwrap();
    let exact = steady_state::steady_state_general(&spec).unwrap();
    let config = BatchConfig {
        n_trajectories: 200_000,
        master_seed: 17,
        bins: TimeBins::linear(0.0, 1.0, 1).unwrap(),
        keep_records: false,
    };
    let batch = stochastic::simulate_batch(&spec, &config).unwrap();
    let observed: Vec<u64> = exact.states().iter().map(|s| *batch.final_histogram.get(s).unwrap_or(&0)).collect();
    let test = stochastic::chi_square_test(&observed, exact.probabilities()).unwrap();
    assert!(test.p_value > 1e-3, "{test:?}");
    assert_eq!(observed.iter().sum::<u64>(), 200_000);
}

#[test]
fn records_reproduce_from_seed_and_index() {
    let spec = SystemSpec::parse(20, "1,4").unwrap();
    let a = stochastic::simulate_trajectory(&spec, 3, 41).unwrap();
    let b = stochastic::simulate_trajectory(&spec, 3, 41).unwrap();
    let c = stochastic::simulate_trajectory(&spec, 3, 42).unwrap();
    assert_eq!(a.jump_times, b.jump_times);
    assert_ne!(a.jump_times, c.jump_times);
    assert_eq!(a.jump_times.len(), 20);
    assert!(a.jump_times.windows(2).all(|w| w[0] <= w[1]));
}
