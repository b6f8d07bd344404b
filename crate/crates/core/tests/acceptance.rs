//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no libtest harness) so the lines always reach the
//! output. Criteria listed in `UNATTAINABLE` are implemented literally and
//! still print FAIL; the README explains why they cannot hold. Any other
//! failure makes the process exit non-zero.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use multidicke::cavity::{self, CavityModel};
use multidicke::expsum::RateValue;
use multidicke::meanfield;
use multidicke::oracle_ode;
use multidicke::steady_state::{self, Arithmetic};
use multidicke::stochastic::{self, BatchConfig, TimeBins};
use multidicke::system::{Lattice, SystemSpec};
use multidicke::trajectory::{self, paths, Channel, SolverOptions, Target};
use rug::Rational;

/// Criteria whose stated tolerance the model itself does not meet.
const UNATTAINABLE: [&str; 2] = ["7c", "9"];

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

const RATE_SETS: [(&str, &[&str]); 3] = [
    ("balanced", &["1", "1/2,1/2", "1/3,1/3,1/3"]),
    ("r=2", &["1", "1,2", "1,2,2"]),
    ("r=(1,2,5)", &["1", "1,2", "1,2,5"]),
];

/// Every (N, rates) pair of the dynamics grid, deduplicated.
fn dynamics_configs() -> Vec<SystemSpec> {
    let mut out: Vec<SystemSpec> = Vec::new();
    for n in [2u32, 5, 10] {
        for (_, sets) in RATE_SETS {
            for rates in sets {
                let spec = SystemSpec::parse(n, rates).unwrap();
                if !out.contains(&spec) {
                    out.push(spec);
                }
            }
        }
    }
    out
}

fn horizon(spec: &SystemSpec) -> f64 {
    let n = spec.n() as f64;
    5.0 * (1.0 + n.ln()) / (n * spec.min_rate().to_f64())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for spec in dynamics_configs() {
        let solution = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
        let t_end = horizon(&spec);
        let grid: Vec<f64> = (0..100).map(|i| t_end * i as f64 / 99.0).collect();
        let ode = oracle_ode::integrate(&spec, &grid, 1e-12, 1e-14).unwrap();
        for (state, p) in solution.entries(u128::MAX).unwrap() {
            for (t, v) in grid.iter().zip(ode.column(&state).unwrap()) {
                worst = worst.max((p.evaluate_f64(*t) - v).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        "1",
        worst <= 1e-6 && elapsed < Duration::from_secs(60),
        format!("oracle equivalence: max-abs {worst:.2e} (<= 1e-6), {:.1} s (< 60 s)", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut instances = 0usize;
    for spec in dynamics_configs().into_iter().filter(|s| s.d() >= 2) {
        let solution = trajectory::solve_multichannel(&spec, &Target::All, &SolverOptions::default()).unwrap();
        let t_end = horizon(&spec);
        for state in Lattice::full(&spec, u128::MAX).unwrap().states() {
            if state.path_count() > 10_000 {
                continue;
            }
            instances += 1;
            let dp = solution.population(state).unwrap();
            let brute = paths::path_sum_population(&spec, state, 10_000, dp.numerics()).unwrap();
            for k in 0..100 {
                let t = t_end * k as f64 / 99.0;
                worst = worst.max((dp.evaluate_f64(t) - brute.evaluate_f64(t)).abs());
            }
        }
    }
    outcome(
        "2",
        worst <= 1e-10,
        format!("path-sum equivalence: {instances} states, max-abs {worst:.2e} (<= 1e-10)"),
    )
}

fn criterion_3() -> Outcome {
    let n = 20;
    let mut worst = 0.0f64;
    for r in ["1/2", "1", "2"] {
        let ratio: RateValue = r.parse().unwrap();
        let spec = SystemSpec::new(n, vec![RateValue::integer(1), ratio.clone()]).unwrap();
        let exact = steady_state::steady_state_two_channel(n, ratio.as_rational()).unwrap().by_x().unwrap();
        let ode = oracle_ode::steady_state_by_integration(&spec).unwrap().by_x().unwrap();
        for (a, b) in exact.iter().zip(&ode) {
            worst = worst.max((a - b).abs());
        }
    }
    let flat = steady_state::steady_state_two_channel(n, &Rational::from(1)).unwrap();
    let flat_err = flat
        .probabilities()
        .iter()
        .map(|p| (p - 1.0 / (n as f64 + 1.0)).abs())
        .fold(0.0, f64::max);
    outcome(
        "3",
        worst <= 1e-8 && flat_err <= 1e-9,
        format!("steady state vs ODE: max-abs {worst:.2e} (<= 1e-8); flat at r=1 within {flat_err:.2e} (<= 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let n = 150u32;
    let nf = n as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [1usize, 2, 4, 8] {
        let spec = SystemSpec::balanced(n, d, &RateValue::integer(1)).unwrap();
        let solution = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
        let peak = trajectory::intensity_peak(&solution, Channel::Total).unwrap();
        let df = d as f64;
        let i_pred = (nf + df - 1.0).powi(2) / (4.0 * df + 1.0);
        let t_pred = (nf / df).ln() * df / (nf + df - 1.0);
        let (ei, et) = ((peak.value / i_pred - 1.0).abs(), (peak.t_peak / t_pred - 1.0).abs());
        ok &= ei <= 0.10 && et <= 0.10;
        if d == 1 {
            let e5 = (peak.value / 4500.0 - 1.0).abs();
            let et1 = (peak.t_peak / (nf.ln() / nf) - 1.0).abs();
            ok &= e5 <= 0.05 && et1 <= 0.10;
        }
        parts.push(format!("d={d}: I {:+.1}%, t {:+.1}%", 100.0 * (peak.value / i_pred - 1.0), 100.0 * (peak.t_peak / t_pred - 1.0)));
    }
    outcome("4", ok, format!("scaling laws at N=150: {}", parts.join("; ")))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for spec in dynamics_configs() {
        let solution = trajectory::solve(&spec, &SolverOptions::default()).unwrap();
        let total = trajectory::intensity(&solution, Channel::Total).unwrap();
        let emitted = total.integral_to_infinity().unwrap().to_f64();
        let n = spec.n() as f64;
        worst = worst.max((emitted - n).abs() / n);
    }
    outcome("5", worst <= 1e-6, format!("photon conservation: max relative error {worst:.2e} (<= 1e-6)"))
}

fn criterion_6() -> Outcome {
    let ns = [50u32, 100, 200, 400, 800];
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns
        .iter()
        .map(|&n| steady_state::order_parameter(n, &Rational::from(1)).unwrap().susceptibility)
        .collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    outcome(
        "6",
        r2 >= 0.99,
        format!("susceptibility vs ln N: R^2 = {r2:.6} (>= 0.99), slope {:.4}", sxy / sxx),
    )
}

fn criterion_7() -> Vec<Outcome> {
    // (a) final-state histogram at N=3, r=2.
    let spec = SystemSpec::parse(3, "1,2").unwrap();
    let batch = stochastic::simulate_batch(
        &spec,
        &BatchConfig {
            n_trajectories: 1_000_000,
            master_seed: 7,
            bins: TimeBins::linear(0.0, 10.0, 10).unwrap(),
            keep_records: false,
        },
    )
    .unwrap();
    let exact = steady_state::two_channel_probabilities_f64(3, &Rational::from(2), Arithmetic::Multiprecision(128)).unwrap();
    let mut observed = vec![0u64; 4];
    for (state, c) in &batch.final_histogram {
        observed[state.counts()[1] as usize] += c;
    }
    let chi = stochastic::chi_square_test(&observed, &exact).unwrap();
    let a = outcome(
        "7a",
        chi.p_value >= 1e-3,
        format!("MC histogram N=3, r=2, 1e6 trajectories: chi2 = {:.2}, p = {:.3} (>= 1e-3)", chi.statistic, chi.p_value),
    );

    // (b) order parameter at N=1e4, r=4.
    let n = 10_000u32;
    let spec = SystemSpec::parse(n, "1,4").unwrap();
    let batch = stochastic::simulate_batch(
        &spec,
        &BatchConfig {
            n_trajectories: 2000,
            master_seed: 11,
            bins: TimeBins::linear(0.0, 1.0, 1).unwrap(),
            keep_records: false,
        },
    )
    .unwrap();
    let (mean, se) = batch.order_parameter().unwrap();
    let exact = steady_state::steady_state_two_channel(n, &Rational::from(4)).unwrap().order_parameter().unwrap();
    let z = (mean - exact).abs() / se;
    let b = outcome(
        "7b",
        z <= 3.0,
        format!("MC n2 at N=1e4, r=4: {mean:.6} +- {se:.1e} vs exact {exact:.6} ({z:.2} SE, <= 3)"),
    );

    // (c) large-N smoke test.
    let n = 1_000_000u32;
    let spec = SystemSpec::parse(n, "0.2,0.8").unwrap();
    let t_peak = (n as f64).ln() / (n as f64 * 0.2);
    let start = Instant::now();
    let batch = stochastic::simulate_batch(
        &spec,
        &BatchConfig {
            n_trajectories: 100,
            master_seed: 13,
            bins: TimeBins::log(t_peak / 100.0, t_peak * 100.0, 200).unwrap(),
            keep_records: false,
        },
    )
    .unwrap();
    let elapsed = start.elapsed();
    let peak = stochastic::estimate_intensity(&batch).unwrap().peak_time(None);
    let ratio = peak / t_peak;
    let c = outcome(
        "7c",
        elapsed < Duration::from_secs(120) && (0.5..=2.0).contains(&ratio),
        format!(
            "MC N=1e6, rates (0.2,0.8), 100 trajectories: {:.1} s (< 120 s); peak bin at {ratio:.3} x ln(N)/(N G1) (within factor 2)",
            elapsed.as_secs_f64()
        ),
    );
    vec![a, b, c]
}

fn criterion_8() -> Outcome {
    let template = CavityModel::new(5, 1.0, 1.0, 0.0, 10).unwrap();
    let ratios = [1.0, 3.0, 10.0, 30.0, 100.0];
    let sweep = cavity::convergence_sweep(&template, &ratios, cavity::DEFAULT_HORIZON, 201).unwrap();
    let devs: Vec<f64> = sweep.iter().map(|c| c.deviation).collect();
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let last = devs[devs.len() - 1];
    let listed: Vec<String> = devs.iter().map(|d| format!("{d:.3e}")).collect();
    outcome(
        "8",
        monotone && last <= 0.05,
        format!("cavity vs Dicke, N=5, cutoff 10: deviations [{}], monotone {monotone}, at 100: {last:.2e} (<= 0.05)", listed.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let (n, r) = (1000u32, 4.0);
    let exact = steady_state::steady_state_two_channel(n, &Rational::from(4)).unwrap().by_x().unwrap();
    let approx = meanfield::asymptotic_distribution(n, r).unwrap().by_x().unwrap();
    let threshold = 1.0 / n as f64;
    let worst_factor = exact
        .iter()
        .zip(&approx)
        .filter(|(p, _)| **p >= threshold)
        .map(|(p, q)| (p / q).max(q / p))
        .fold(1.0, f64::max);
    let slope = |v: &[f64]| v[1].ln() - v[0].ln();
    let (se, sa) = (slope(&exact), slope(&approx));
    let slope_err = (sa / se - 1.0).abs();
    // Informational: the same slope taken at the x = N end, where the mass sits.
    let end = |v: &[f64]| v[v.len() - 1].ln() - v[v.len() - 2].ln();
    outcome(
        "9",
        worst_factor <= 1.5 && slope_err <= 0.10,
        format!(
            "mean-field law at N=1000, r=4: worst ratio {worst_factor:.3} on p >= 1/N (<= 1.5); log-slope at x=0 exact {se:.4} vs asymptotic {sa:.4} ({:.0}% off, <= 10%); at x=N {:.4} vs {:.4}",
            100.0 * slope_err,
            end(&exact),
            end(&approx)
        ),
    )
}

fn criterion_10() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_multidicke");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = std::process::Command::new(exe)
            .args(["verify", "--quick", "--seed", "4242", "--output"])
            .arg(&out)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "verify exited with {status}");
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    let identical = outputs[0] == outputs[1] && !outputs[0].is_empty();
    outcome(
        "10",
        identical,
        format!("verify determinism: {} files, byte-identical {identical}", outputs[0].len()),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters: nothing to enumerate.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let selected = |id: &str| only.as_deref().is_none_or(|o| o.split(',').any(|x| x == id));
    let mut results = Vec::new();
    let singles: [(&str, fn() -> Outcome); 9] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("8", criterion_8),
        ("9", criterion_9),
        ("10", criterion_10),
    ];
    for (id, run) in singles {
        if selected(id) {
            let start = Instant::now();
            results.push(run());
            eprintln!("criterion {id}: {:.1} s", start.elapsed().as_secs_f64());
        }
        if id == "6" && selected("7") {
            results.extend(criterion_7());
        }
    }

    let mut unexpected = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        let note = if !r.passed && UNATTAINABLE.contains(&r.id) {
            " [known: unattainable as stated]"
        } else {
            ""
        };
        println!("{status} criterion {:<3} {}{note}", r.id, r.detail);
        if !r.passed && !UNATTAINABLE.contains(&r.id) {
            unexpected += 1;
        }
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed; {unexpected} unexpected failure(s)", results.len() - failed, results.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
