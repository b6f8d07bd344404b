//! Subcommand bodies. Each returns a table; `mod.rs` handles output.

use rug::Rational;

use super::table::{num, Table};
use super::{parse_list, CavityArgs, DynamicsArgs, GridArgs, McArgs, MeanfieldArgs, ScalingArgs, Spacing, SteadyArgs};
use crate::cavity::{self, CavityModel};
use crate::error::{Error, Result};
use crate::expsum::RateValue;
use crate::meanfield;
use crate::steady_state::{self, Arithmetic};
use crate::stochastic::{self, BatchConfig, TimeBins};
use crate::system::{OccupationState, SystemSpec};
use crate::trajectory::{self, Channel, SolverOptions};

/// States listed individually by `dynamics --states`.
const STATE_OUTPUT_CAP: u128 = 100_000;
/// Final-state histograms longer than this are left out of the `mc` summary.
const HISTOGRAM_SUMMARY_CAP: usize = 1000;

fn solver_options(precision_bits: Option<u32>) -> SolverOptions {
    precision_bits.map(SolverOptions::with_precision).unwrap_or_default()
}

/// `5 (1 + ln N) / (N Γ_min)`: long enough for the slowest channel to finish.
fn default_t_max(spec: &SystemSpec) -> f64 {
    let n = spec.n() as f64;
    5.0 * (1.0 + n.ln()) / (n * spec.min_rate().to_f64())
}

fn time_grid(grid: &GridArgs, spec: &SystemSpec) -> Result<Vec<f64>> {
    let t_max = grid.t_max.unwrap_or_else(|| default_t_max(spec));
    if grid.points < 2 {
        return Err(Error::validation("--points must be at least 2"));
    }
    let span = |lo: f64| {
        if !(t_max > lo && lo.is_finite() && t_max.is_finite()) {
            Err(Error::validation(format!("time grid needs finite 0 <= t-min < t-max, got [{lo}, {t_max}]")))
        } else {
            Ok(())
        }
    };
    let last = (grid.points - 1) as f64;
    match grid.grid {
        Spacing::Lin => {
            let lo = grid.t_min.unwrap_or(0.0);
            span(lo)?;
            if lo < 0.0 {
                return Err(Error::validation("--t-min must be non-negative"));
            }
            Ok((0..grid.points).map(|i| lo + (t_max - lo) * i as f64 / last).collect())
        }
        Spacing::Log => {
            let lo = grid.t_min.unwrap_or(t_max * 1e-4);
            span(lo)?;
            if lo <= 0.0 {
                return Err(Error::validation("log grids need --t-min > 0"));
            }
            let ratio = (t_max / lo).ln();
            Ok((0..grid.points).map(|i| lo * (ratio * i as f64 / last).exp()).collect())
        }
    }
}

fn state_label(state: &OccupationState) -> String {
    let parts: Vec<String> = state.counts().iter().map(u32::to_string).collect();
    format!("p_{}", parts.join("_"))
}

pub fn dynamics(args: &DynamicsArgs, precision_bits: Option<u32>) -> Result<Table> {
    let spec = SystemSpec::parse(args.n, &args.rates)?;
    let times = time_grid(&args.grid, &spec)?;
    let solution = trajectory::solve(&spec, &solver_options(precision_bits))?;
    let d = spec.d();

    let mut signals = vec![trajectory::intensity(&solution, Channel::Total)?];
    let mut columns = vec!["t".to_string(), "I_total".to_string()];
    for alpha in 0..d {
        signals.push(trajectory::intensity(&solution, Channel::Index(alpha))?);
        columns.push(format!("I_{}", alpha + 1));
    }
    if args.states {
        for (state, p) in solution.entries(STATE_OUTPUT_CAP)? {
            columns.push(state_label(&state));
            signals.push(p);
        }
    } else {
        for m in (0..=spec.n()).rev() {
            columns.push(format!("p_m{m}"));
            signals.push(solution.level(m)?);
        }
    }

    let mut table = Table::new(columns);
    table.note("precision_bits", solution.numerics().precision_bits.to_string());
    table.note("error_bound", num(solution.error_bound()));
    let total = trajectory::intensity_peak(&solution, Channel::Total)?;
    table.note("t_peak_total", num(total.t_peak));
    table.note("I_max_total", num(total.value));
    for alpha in 0..d {
        let peak = trajectory::intensity_peak(&solution, Channel::Index(alpha))?;
        let label = alpha + 1;
        table.note(format!("t_peak_{label}"), num(peak.t_peak));
        table.note(format!("I_max_{label}"), num(peak.value));
        table.note(format!("burst_{label}"), trajectory::burst_predicate(&spec, alpha)?.to_string());
    }
    if args.closed_form {
        table.note("I_total_closed_form", signals[0].to_json()?);
    }
    for &t in &times {
        let mut row = vec![t];
        row.extend(signals.iter().map(|s| s.evaluate_f64(t)));
        table.push_nums(&row);
    }
    Ok(table)
}

fn parse_rate(text: &str) -> Result<RateValue> {
    text.trim().parse()
}

pub fn steady(args: &SteadyArgs, precision_bits: Option<u32>) -> Result<Table> {
    if let (Some(lo), Some(hi)) = (&args.r_min, &args.r_max) {
        return steady_sweep(args, parse_rate(lo)?, parse_rate(hi)?, precision_bits);
    }
    if let Some(ratio) = &args.ratio {
        let r = parse_rate(ratio)?;
        let arithmetic = precision_bits.map(Arithmetic::Multiprecision).unwrap_or(Arithmetic::auto(args.n));
        let dist = steady_state::steady_state_two_channel_with(args.n, r.as_rational(), arithmetic)?;
        let mut table = Table::new(["x", "probability"]);
        table.note("n_bar_2", num(dist.order_parameter()?));
        for (x, p) in dist.by_x()?.iter().enumerate() {
            table.push(vec![x.to_string(), num(*p)]);
        }
        return Ok(table);
    }
    if let Some(rates) = &args.rates {
        let spec = SystemSpec::parse(args.n, rates)?;
        let dist = steady_state::steady_state_general_with(&spec, &solver_options(precision_bits))?;
        let mut columns: Vec<String> = (1..=spec.d()).map(|a| format!("n_{a}")).collect();
        columns.push("probability".into());
        let mut table = Table::new(columns);
        for alpha in 0..spec.d() {
            table.note(format!("mean_fraction_{}", alpha + 1), num(dist.mean_fraction(alpha)));
        }
        for (state, p) in dist.states().iter().zip(dist.probabilities()) {
            let mut row: Vec<String> = state.counts().iter().map(u32::to_string).collect();
            row.push(num(*p));
            table.push(row);
        }
        return Ok(table);
    }
    Err(Error::validation("steady needs --ratio, --rates, or --r-min/--r-max"))
}

fn steady_sweep(args: &SteadyArgs, lo: RateValue, hi: RateValue, precision_bits: Option<u32>) -> Result<Table> {
    if args.r_points < 1 {
        return Err(Error::validation("--r-points must be at least 1"));
    }
    if lo.as_rational() > hi.as_rational() {
        return Err(Error::validation("--r-min must not exceed --r-max"));
    }
    let arithmetic = precision_bits.map(Arithmetic::Multiprecision).unwrap_or(Arithmetic::auto(args.n));
    let steps = args.r_points.max(2) - 1;
    let mut table = Table::new(["r", "n_bar_2", "chi"]);
    for i in 0..args.r_points {
        // Exact rational grid points, so r = 1 is hit exactly when it lies on the grid.
        let width = Rational::from(hi.as_rational() - lo.as_rational());
        let r = Rational::from(lo.as_rational() + width * Rational::from((i, steps)));
        let point = steady_state::order_parameter_with(args.n, &r, args.chi_step, arithmetic)?;
        table.push_nums(&[point.r, point.n_bar_2, point.susceptibility]);
    }
    Ok(table)
}

pub fn scaling(args: &ScalingArgs, precision_bits: Option<u32>) -> Result<Table> {
    let ds: Vec<usize> = parse_list(&args.d, "channel count")?;
    let total = parse_rate(&args.total_rate)?;
    let gamma = total.to_f64();
    let n = args.n as f64;
    let mut table = Table::new([
        "d",
        "I_max",
        "t_peak",
        "I_max_predicted",
        "t_peak_predicted",
        "I_max_rel_error",
        "t_peak_rel_error",
    ]);
    for d in ds {
        let spec = SystemSpec::balanced(args.n, d, &total)?;
        let solution = trajectory::solve(&spec, &solver_options(precision_bits))?;
        let peak = trajectory::intensity_peak(&solution, Channel::Total)?;
        let df = d as f64;
        let i_pred = gamma * (n + df - 1.0).powi(2) / (4.0 * df + 1.0);
        let t_pred = (n / df).ln() * df / ((n + df - 1.0) * gamma);
        table.push_nums(&[
            df,
            peak.value,
            peak.t_peak,
            i_pred,
            t_pred,
            (peak.value - i_pred) / i_pred,
            (peak.t_peak - t_pred) / t_pred,
        ]);
    }
    Ok(table)
}

pub fn mc(args: &McArgs) -> Result<Table> {
    let spec = SystemSpec::parse(args.n, &args.rates)?;
    let t_max = args.t_max.unwrap_or_else(|| default_t_max(&spec));
    let bins = match args.bin_spacing {
        Spacing::Lin => TimeBins::linear(args.t_min.unwrap_or(0.0), t_max, args.bins)?,
        Spacing::Log => TimeBins::log(args.t_min.unwrap_or(t_max * 1e-4), t_max, args.bins)?,
    };
    let config = BatchConfig {
        n_trajectories: args.trajectories,
        master_seed: args.seed,
        bins,
        keep_records: false,
    };
    eprintln!("mc: simulating {} trajectories (N = {}, d = {})", args.trajectories, spec.n(), spec.d());
    let batch = stochastic::simulate_batch(&spec, &config)?;
    eprintln!("mc: done");
    let estimate = stochastic::estimate_intensity(&batch)?;

    let mut columns = vec!["t".to_string(), "width".into(), "I_total".into(), "I_total_se".into()];
    for alpha in 1..=spec.d() {
        columns.push(format!("I_{alpha}"));
        columns.push(format!("I_{alpha}_se"));
    }
    let mut table = Table::new(columns);
    table.note("rng_scheme", stochastic::RNG_SCHEME);
    table.note("trajectories", batch.n_trajectories.to_string());
    table.note("unbinned_jumps", batch.unbinned.to_string());
    table.note("peak_bin_t", num(estimate.peak_time(None)));
    for alpha in 0..spec.d() {
        let (mean, se) = batch.mean_fraction(alpha);
        table.note(format!("mean_fraction_{}", alpha + 1), num(mean));
        table.note(format!("mean_fraction_{}_se", alpha + 1), num(se));
    }
    if batch.final_histogram.len() <= HISTOGRAM_SUMMARY_CAP {
        let parts: Vec<String> = batch
            .final_histogram
            .iter()
            .map(|(s, c)| format!("{}={c}", state_label(s).trim_start_matches("p_")))
            .collect();
        table.note("final_histogram", parts.join(" "));
    }
    for k in 0..estimate.centers.len() {
        let mut row = vec![estimate.centers[k], estimate.widths[k], estimate.total_rate[k], estimate.total_se[k]];
        for alpha in 0..spec.d() {
            row.push(estimate.channel_rate[alpha][k]);
            row.push(estimate.channel_se[alpha][k]);
        }
        table.push_nums(&row);
    }
    Ok(table)
}

pub fn meanfield(args: &MeanfieldArgs) -> Result<Table> {
    let ns: Vec<u32> = parse_list(&args.n, "emitter count")?;
    let ratios: Vec<RateValue> = args.ratio.split(',').map(parse_rate).collect::<Result<_>>()?;
    if args.distribution {
        let (&[n], [r]) = (ns.as_slice(), ratios.as_slice()) else {
            return Err(Error::validation("--distribution needs a single --n and a single --ratio"));
        };
        let exact = steady_state::steady_state_two_channel(n, r.as_rational())?.by_x()?;
        let approx = meanfield::asymptotic_distribution(n, r.to_f64())?.by_x()?;
        let mut table = Table::new(["x", "p_exact", "p_asymptotic"]);
        for (x, (p, q)) in exact.iter().zip(&approx).enumerate() {
            table.push(vec![x.to_string(), num(*p), num(*q)]);
        }
        return Ok(table);
    }
    let mut table = Table::new([
        "n",
        "r",
        "tau_star",
        "n_bar_2_exact",
        "n_bar_2_asymptotic",
        "chi_exact",
        "chi_asymptotic",
        "thermal_ratio",
    ]);
    for &n in &ns {
        for r in &ratios {
            let rf = r.to_f64();
            let exact = steady_state::order_parameter(n, r.as_rational())?;
            let st = meanfield::solve_stopping_time(n, 1.0, rf)?;
            table.push_nums(&[
                n as f64,
                rf,
                st.tau_star,
                exact.n_bar_2,
                meanfield::order_parameter_asymptotic(n, rf)?,
                exact.susceptibility,
                meanfield::susceptibility_asymptotic(n, rf)?,
                meanfield::thermal_ratio(n, 1.0, rf)?,
            ]);
        }
    }
    Ok(table)
}

pub fn cavity_check(args: &CavityArgs) -> Result<Table> {
    let ratios: Vec<f64> = parse_list(&args.ratios, "kappa/g ratio")?;
    let template = CavityModel::new(args.n, args.g, args.g.max(f64::MIN_POSITIVE), 0.0, args.cutoff)?;
    let sweep = cavity::convergence_sweep(&template, &ratios, args.horizon, args.points)?;
    let mut table = Table::new(["kappa_over_g", "t", "S_dag_S_full", "S_dag_S_dicke", "photon_number"]);
    let mut monotone = true;
    for (i, cmp) in sweep.iter().enumerate() {
        table.note(format!("deviation_kappa_over_g_{}", ratios[i]), num(cmp.deviation));
        if i > 0 && cmp.deviation >= sweep[i - 1].deviation {
            monotone = false;
        }
    }
    table.note("deviation_monotone", monotone.to_string());
    for (ratio, cmp) in ratios.iter().zip(&sweep) {
        for k in 0..cmp.times.len() {
            table.push_nums(&[*ratio, cmp.times[k], cmp.full.s_dag_s[k], cmp.dicke[k], cmp.full.photon_number[k]]);
        }
    }
    Ok(table)
}
