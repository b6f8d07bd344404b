//! Cross-validation suite behind `multidicke verify`.
//!
//! Every check compares two independent routes and records the worst
//! discrepancy against a fixed threshold. Reports contain no timings or
//! host details, so repeated runs with one seed write identical bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use rug::Rational;
use serde_json::Value;

use super::table::{num, Format, Table};
use crate::cavity::{self, CavityModel};
use crate::error::Result;
use crate::expsum::RateValue;
use crate::meanfield;
use crate::oracle_ode;
use crate::steady_state::{self, Arithmetic};
use crate::stochastic::{self, BatchConfig, TimeBins};
use crate::system::{Lattice, SystemSpec};
use crate::trajectory::{self, paths, Channel, SolverOptions};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Outcome of a suite run plus data tables written next to the matrix.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub artifacts: Vec<(String, Table)>,
}

impl Report {
    /// `metric <= threshold` passes.
    fn at_most(&mut self, name: impl Into<String>, metric: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.into(),
            metric,
            threshold,
            passed: metric <= threshold,
        });
    }

    /// `metric >= threshold` passes.
    fn at_least(&mut self, name: impl Into<String>, metric: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.into(),
            metric,
            threshold,
            passed: metric >= threshold,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn matrix(&self) -> Table {
        let mut t = Table::new(["check", "status", "metric", "threshold"]);
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            t.push(vec![c.name.clone(), status.into(), num(c.metric), num(c.threshold)]);
        }
        t.note("checks", self.checks.len().to_string());
        t.note("failures", self.failures().to_string());
        t
    }

    /// Writes `matrix.<ext>` and one file per artifact into `dir`.
    pub fn write(&self, dir: &Path, format: Format, config: &Value) -> Result<()> {
        fs::create_dir_all(dir)?;
        let ext = match format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let mut files = vec![("matrix".to_string(), self.matrix())];
        files.extend(self.artifacts.iter().cloned());
        for (name, table) in files {
            let mut f = std::io::BufWriter::new(fs::File::create(dir.join(format!("{name}.{ext}")))?);
            table.write(&mut f, format, config)?;
            f.flush()?;
        }
        Ok(())
    }

    pub fn print_matrix(&self, out: &mut impl Write) -> Result<()> {
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{status}  {:<44} {:>12.3e}  (threshold {:.1e})", c.name, c.metric, c.threshold)?;
        }
        writeln!(out, "{} of {} checks passed", self.checks.len() - self.failures(), self.checks.len())?;
        Ok(())
    }
}

fn options(precision_bits: Option<u32>) -> SolverOptions {
    precision_bits.map(SolverOptions::with_precision).unwrap_or_default()
}

/// Rate sets used by the dynamics checks: single channel, balanced, `r = 2`
/// and three distinct rates.
const RATE_SETS: [&str; 5] = ["1", "1/2,1/2", "1,2", "1/3,1/3,1/3", "1,2,5"];

fn oracle_equivalence(report: &mut Report, ns: &[u32], opts: &SolverOptions) -> Result<()> {
    let mut worst = 0.0f64;
    let mut photons = 0.0f64;
    for &n in ns {
        for rates in RATE_SETS {
            let spec = SystemSpec::parse(n, rates)?;
            let solution = trajectory::solve(&spec, opts)?;
            let t_end = 5.0 * (1.0 + (n as f64).ln()) / (n as f64 * spec.min_rate().to_f64());
            let grid: Vec<f64> = (0..100).map(|i| t_end * i as f64 / 99.0).collect();
            let ode = oracle_ode::integrate(&spec, &grid, 1e-12, 1e-14)?;
            for (state, p) in solution.entries(u128::MAX)? {
                let col = ode.column(&state).expect("ODE covers the full lattice");
                for (t, v) in grid.iter().zip(col) {
                    worst = worst.max((p.evaluate_f64(*t) - v).abs());
                }
            }
            let emitted = trajectory::intensity(&solution, Channel::Total)?.integral_to_infinity()?.to_f64();
            photons = photons.max((emitted - n as f64).abs() / n as f64);
        }
    }
    report.at_most("oracle_equivalence_max_abs", worst, 1e-6);
    report.at_most("photon_conservation_rel", photons, 1e-6);
    Ok(())
}

fn path_sum(report: &mut Report, n: u32, opts: &SolverOptions) -> Result<()> {
    let mut worst = 0.0f64;
    for rates in ["1,2", "1,2,5"] {
        let spec = SystemSpec::parse(n, rates)?;
        let solution = trajectory::solve_multichannel(&spec, &trajectory::Target::All, opts)?;
        let lattice = Lattice::full(&spec, u128::MAX)?;
        for state in lattice.states() {
            if state.path_count() > 10_000 {
                continue;
            }
            let dp = solution.population(state)?;
            let brute = paths::path_sum_population(&spec, state, 10_000, dp.numerics())?;
            let t_scale = 1.0 / (n as f64 * spec.min_rate().to_f64());
            for k in 0..50 {
                let t = 5.0 * t_scale * k as f64 / 49.0;
                worst = worst.max((dp.evaluate_f64(t) - brute.evaluate_f64(t)).abs());
            }
        }
    }
    report.at_most("path_sum_max_abs", worst, 1e-10);
    Ok(())
}

fn steady_states(report: &mut Report, n: u32, bits: u32, opts: &SolverOptions) -> Result<()> {
    let mut vs_ode = 0.0f64;
    let mut vs_general = 0.0f64;
    for r in ["1/2", "1", "2"] {
        let ratio: RateValue = r.parse()?;
        let spec = SystemSpec::new(n, vec![RateValue::integer(1), ratio.clone()])?;
        let exact = steady_state::steady_state_two_channel_with(n, ratio.as_rational(), Arithmetic::Multiprecision(bits))?;
        let ode = oracle_ode::steady_state_by_integration(&spec)?;
        let general = steady_state::steady_state_general_with(&spec, opts)?;
        let (a, b, c) = (exact.by_x()?, ode.by_x()?, general.by_x()?);
        for x in 0..a.len() {
            vs_ode = vs_ode.max((a[x] - b[x]).abs());
            vs_general = vs_general.max((a[x] - c[x]).abs());
        }
    }
    report.at_most("steady_state_vs_ode_max_abs", vs_ode, 1e-8);
    report.at_most("steady_state_vs_lattice_max_abs", vs_general, 1e-10);
    let flat = steady_state::two_channel_probabilities_f64(n, &Rational::from(1), Arithmetic::Multiprecision(bits))?;
    let flat_err = flat.iter().map(|p| (p - 1.0 / (n as f64 + 1.0)).abs()).fold(0.0, f64::max);
    report.at_most("steady_state_flat_at_balance", flat_err, 1e-9);
    Ok(())
}

fn monte_carlo(report: &mut Report, trajectories: u64, seed: u64, bits: u32) -> Result<()> {
    let spec = SystemSpec::parse(3, "1,2")?;
    let config = BatchConfig {
        n_trajectories: trajectories,
        master_seed: seed,
        bins: TimeBins::linear(0.0, 10.0, 50)?,
        keep_records: false,
    };
    let batch = stochastic::simulate_batch(&spec, &config)?;
    let exact = steady_state::two_channel_probabilities_f64(3, &Rational::from(2), Arithmetic::Multiprecision(bits))?;
    let mut observed = vec![0u64; exact.len()];
    for (state, count) in &batch.final_histogram {
        observed[state.counts()[1] as usize] += count;
    }
    let test = stochastic::chi_square_test(&observed, &exact)?;
    report.at_least("mc_final_state_chi2_p_value", test.p_value, 1e-3);

    let mut hist = Table::new(["x", "observed", "expected"]);
    hist.note("rng_scheme", stochastic::RNG_SCHEME);
    hist.note("chi2", num(test.statistic));
    for (x, (o, p)) in observed.iter().zip(&exact).enumerate() {
        hist.push(vec![x.to_string(), o.to_string(), num(p * trajectories as f64)]);
    }
    report.artifacts.push(("mc_histogram".into(), hist));
    Ok(())
}

fn cavity_checks(report: &mut Report, n: u32, cutoff: u32) -> Result<()> {
    let template = CavityModel::new(n, 1.0, 1.0, 0.0, cutoff)?;
    let ratios = [1.0, 3.0, 10.0, 30.0, 100.0];
    let sweep = cavity::convergence_sweep(&template, &ratios, cavity::DEFAULT_HORIZON, 201)?;
    let mut table = Table::new(["kappa_over_g", "deviation"]);
    let mut rises = 0.0f64;
    for (i, cmp) in sweep.iter().enumerate() {
        table.push_nums(&[ratios[i], cmp.deviation]);
        if i > 0 {
            rises = rises.max(cmp.deviation - sweep[i - 1].deviation);
        }
    }
    report.at_most(format!("cavity_n{n}_deviation_monotone"), rises, 0.0);
    report.at_most(format!("cavity_n{n}_deviation_at_100"), sweep[ratios.len() - 1].deviation, 0.05);
    report.artifacts.push((format!("cavity_n{n}"), table));
    Ok(())
}

fn meanfield_checks(report: &mut Report) -> Result<()> {
    let mut worst = 0.0f64;
    for n in [1u32, 10, 1000, 1_000_000] {
        for r in [0.25, 1.0, 4.0] {
            worst = worst.max(meanfield::solve_stopping_time(n, 1.0, r)?.relative_residual().abs());
        }
    }
    report.at_most("meanfield_stopping_time_residual", worst, 1e-12);
    Ok(())
}

fn scaling_checks(report: &mut Report, opts: &SolverOptions) -> Result<()> {
    let n = 150u32;
    let mut i_err = 0.0f64;
    let mut t_err = 0.0f64;
    let mut table = Table::new(["d", "I_max", "t_peak"]);
    for d in [1usize, 2, 4, 8] {
        let spec = SystemSpec::balanced(n, d, &RateValue::integer(1))?;
        let peak = trajectory::intensity_peak(&trajectory::solve(&spec, opts)?, Channel::Total)?;
        let (nf, df) = (n as f64, d as f64);
        let i_pred = (nf + df - 1.0).powi(2) / (4.0 * df + 1.0);
        let t_pred = (nf / df).ln() * df / (nf + df - 1.0);
        i_err = i_err.max(((peak.value - i_pred) / i_pred).abs());
        t_err = t_err.max(((peak.t_peak - t_pred) / t_pred).abs());
        table.push_nums(&[df, peak.value, peak.t_peak]);
    }
    report.at_most("scaling_n150_peak_intensity_rel", i_err, 0.10);
    report.at_most("scaling_n150_peak_time_rel", t_err, 0.10);
    report.artifacts.push(("scaling".into(), table));
    Ok(())
}

/// Runs the suite. `quick` keeps every instance at `N <= 10`.
pub fn run_suite(quick: bool, seed: u64, precision_bits: Option<u32>) -> Result<Report> {
    let opts = options(precision_bits);
    let bits = precision_bits.unwrap_or(steady_state::DEFAULT_PRECISION_BITS);
    let mut report = Report::default();
    let ns: &[u32] = if quick { &[2, 5, 10] } else { &[2, 5, 10, 20] };
    oracle_equivalence(&mut report, ns, &opts)?;
    path_sum(&mut report, if quick { 6 } else { 8 }, &opts)?;
    steady_states(&mut report, if quick { 10 } else { 20 }, bits, &opts)?;
    monte_carlo(&mut report, if quick { 100_000 } else { 1_000_000 }, seed, bits)?;
    cavity_checks(&mut report, if quick { 3 } else { 5 }, if quick { 6 } else { 10 })?;
    meanfield_checks(&mut report)?;
    if !quick {
        scaling_checks(&mut report, &opts)?;
    }
    Ok(report)
}
