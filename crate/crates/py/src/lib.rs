//! Python bindings. Rates are passed as strings (`"1,2/3"`) so exact
//! fractions survive the trip.

use multidicke_core::cavity::{self, CavityModel};
use multidicke_core::expsum::RateValue;
use multidicke_core::stochastic::{self, BatchConfig, TimeBins};
use multidicke_core::trajectory::{self, Channel, SolverOptions};
use multidicke_core::{meanfield, steady_state, Error, SystemSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn ratio(r: &str) -> PyResult<RateValue> {
    r.parse().map_err(py_err)
}

/// Ground-state distribution `p_x`, `x = n₂ = 0..=N`, for `Γ₂/Γ₁ = r`.
#[pyfunction]
fn steady_state_two_channel(n: u32, r: &str) -> PyResult<Vec<f64>> {
    let r = ratio(r)?;
    steady_state::steady_state_two_channel(n, r.as_rational())
        .and_then(|d| d.by_x())
        .map_err(py_err)
}

/// `(n̄₂, χ)` at one emitter count and ratio.
#[pyfunction]
fn order_parameter(n: u32, r: &str) -> PyResult<(f64, f64)> {
    let r = ratio(r)?;
    let p = steady_state::order_parameter(n, r.as_rational()).map_err(py_err)?;
    Ok((p.n_bar_2, p.susceptibility))
}

/// Emitted intensity on `times`, total or for one channel.
#[pyfunction]
#[pyo3(signature = (n, rates, times, channel=None))]
fn intensity(n: u32, rates: &str, times: Vec<f64>, channel: Option<usize>) -> PyResult<Vec<f64>> {
    let spec = SystemSpec::parse(n, rates).map_err(py_err)?;
    let table = trajectory::solve(&spec, &SolverOptions::default()).map_err(py_err)?;
    let channel = channel.map_or(Channel::Total, Channel::Index);
    let signal = trajectory::intensity(&table, channel).map_err(py_err)?;
    Ok(times.iter().map(|&t| signal.evaluate_f64(t)).collect())
}

/// Level populations `p_m(t)`: one row per time, columns `m = 0..=N`.
#[pyfunction]
fn level_populations(n: u32, rates: &str, times: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let spec = SystemSpec::parse(n, rates).map_err(py_err)?;
    let table = trajectory::solve(&spec, &SolverOptions::default()).map_err(py_err)?;
    let levels = (0..=n).map(|m| table.level(m)).collect::<Result<Vec<_>, _>>().map_err(py_err)?;
    Ok(times
        .iter()
        .map(|&t| levels.iter().map(|p| p.evaluate_f64(t)).collect())
        .collect())
}

/// `(t_peak, I_max)` of the total intensity.
#[pyfunction]
fn intensity_peak(n: u32, rates: &str) -> PyResult<(f64, f64)> {
    let spec = SystemSpec::parse(n, rates).map_err(py_err)?;
    let table = trajectory::solve(&spec, &SolverOptions::default()).map_err(py_err)?;
    let peak = trajectory::intensity_peak(&table, Channel::Total).map_err(py_err)?;
    Ok((peak.t_peak, peak.value))
}

/// Mean-field stopping time `τ*`.
#[pyfunction]
fn stopping_time(n: u32, g1: f64, g2: f64) -> PyResult<f64> {
    meanfield::solve_stopping_time(n, g1, g2).map(|s| s.tau_star).map_err(py_err)
}

/// Final occupations and their counts over a seeded batch, as
/// `(occupations, count)` pairs in lexicographic order.
#[pyfunction]
fn final_histogram(n: u32, rates: &str, trajectories: u64, seed: u64) -> PyResult<Vec<(Vec<u32>, u64)>> {
    let spec = SystemSpec::parse(n, rates).map_err(py_err)?;
    let config = BatchConfig {
        n_trajectories: trajectories,
        master_seed: seed,
        bins: TimeBins::linear(0.0, 1.0, 1).map_err(py_err)?,
        keep_records: false,
    };
    let batch = stochastic::simulate_batch(&spec, &config).map_err(py_err)?;
    Ok(batch
        .final_histogram
        .into_iter()
        .map(|(s, c)| (s.counts().to_vec(), c))
        .collect())
}

/// Relative L∞ gap between the cavity model and its Dicke limit.
#[pyfunction]
#[pyo3(signature = (n, g, kappa, cutoff, horizon=cavity::DEFAULT_HORIZON, points=201))]
fn cavity_deviation(n: u32, g: f64, kappa: f64, cutoff: u32, horizon: f64, points: usize) -> PyResult<f64> {
    let model = CavityModel::new(n, g, kappa, 0.0, cutoff).map_err(py_err)?;
    cavity::compare(&model, horizon, points).map(|c| c.deviation).map_err(py_err)
}

#[pymodule]
fn multidicke(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(steady_state_two_channel, m)?)?;
    m.add_function(wrap_pyfunction!(order_parameter, m)?)?;
    m.add_function(wrap_pyfunction!(intensity, m)?)?;
    m.add_function(wrap_pyfunction!(level_populations, m)?)?;
    m.add_function(wrap_pyfunction!(intensity_peak, m)?)?;
    m.add_function(wrap_pyfunction!(stopping_time, m)?)?;
    m.add_function(wrap_pyfunction!(final_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(cavity_deviation, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
