//! Rate-equation oracle.
//!
//! Starting from the fully excited state the density matrix stays diagonal in
//! the symmetric basis, so populations obey
//!
//! ```text
//! dp(n)/dt = −Λ(n) p(n) + Σ_α Γ_α (m+1) n_α p(n − e_α)
//! ```
//!
//! This module integrates that system numerically with an adaptive
//! Dormand–Prince 5(4) scheme. It shares nothing with the closed-form path
//! except the lattice layout, which makes it the reference every closed form
//! is checked against.

use crate::error::{Error, Result};
use crate::steady_state::SteadyStateDistribution;
use crate::system::{Lattice, OccupationState, SystemSpec};

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_ABS_TOL: f64 = 1e-14;
/// Largest lattice the oracle will integrate.
pub const STATE_CAP: usize = 100_000;
const STEADY_RESIDUAL: f64 = 1e-10;
const HORIZON_DOUBLINGS: u32 = 6;
const MAX_STEPS: usize = 50_000_000;

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: DEFAULT_REL_TOL,
            abs: DEFAULT_ABS_TOL,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates from `t = 0` with state `y0`, returning the state at every
/// point of the ascending `t_grid`. `on_step` sees every accepted step.
pub fn dormand_prince<S: OdeSystem>(
    system: &S,
    y0: &[f64],
    t_grid: &[f64],
    tol: Tolerances,
    mut on_step: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<Vec<Vec<f64>>> {
    let n = system.dim();
    if y0.len() != n {
        return Err(Error::validation(format!("initial state has length {}, system has {n}", y0.len())));
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("time grid must be ascending and start at t >= 0"));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    system.rhs(t, &y, &mut k[0]);

    let t_end = t_grid.last().copied().unwrap_or(0.0);
    let scale0: f64 = y
        .iter()
        .zip(&k[0])
        .map(|(yi, fi)| (fi / (tol.abs + tol.rel * yi.abs())).powi(2))
        .sum::<f64>()
        .sqrt()
        / (n as f64).sqrt();
    let mut h = if scale0 > 0.0 { 0.01 / scale0 } else { 1e-6 };
    h = h.min(t_end.max(1e-300));
    let mut steps = 0usize;

    for &target in t_grid {
        while t < target {
            if steps >= MAX_STEPS {
                return Err(Error::Integrator {
                    t,
                    reason: format!("exceeded {MAX_STEPS} steps"),
                    estimate: f64::NAN,
                });
            }
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * k[j][i];
                    }
                    stage[i] = y[i] + step * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                system.rhs(t + C[s] * step, &stage, &mut tail[0]);
            }
            // k[6] was evaluated at the 5th-order solution, which is `stage`.
            y_new.copy_from_slice(&stage);
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * k[s][i];
                }
                let sc = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
                err_sq += (step * e / sc).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            steps += 1;
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                on_step(t, &y)?;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || step >= h {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < 1e-14 * t.abs().max(1e-300) {
                    return Err(Error::Integrator {
                        t,
                        reason: "step size underflow".into(),
                        estimate: err,
                    });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Sparse rate-equation generator on the full occupation lattice.
#[derive(Clone, Debug)]
pub struct RateEquationSystem {
    spec: SystemSpec,
    lattice: Lattice,
    loss: Vec<f64>,
    gains: Vec<Vec<(usize, f64)>>,
}

impl RateEquationSystem {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let size = spec.lattice_size();
        if size > STATE_CAP as u128 {
            return Err(Error::DimensionCap {
                dim: size.min(usize::MAX as u128) as usize,
                cap: STATE_CAP,
            });
        }
        let lattice = Lattice::full(spec, STATE_CAP as u128)?;
        let rates = spec.channel_rates_f64();
        let mut loss = Vec::with_capacity(lattice.len());
        let mut gains = Vec::with_capacity(lattice.len());
        for (i, state) in lattice.states().iter().enumerate() {
            let m = spec.excitations(state) as f64;
            let total: f64 = rates.iter().zip(state.counts()).map(|(g, &n)| g * (n as f64 + 1.0)).sum();
            loss.push(m * total);
            gains.push(
                lattice
                    .predecessors(i)
                    .map(|(alpha, j)| (j, rates[alpha] * (m + 1.0) * state.counts()[alpha] as f64))
                    .collect(),
            );
        }
        Ok(RateEquationSystem {
            spec: spec.clone(),
            lattice,
            loss,
            gains,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn states(&self) -> &[OccupationState] {
        self.lattice.states()
    }

    pub fn index_of(&self, state: &OccupationState) -> Option<usize> {
        self.lattice.index_of(state)
    }

    /// `p(0) = δ_{n,0}`.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.lattice.len()];
        y[0] = 1.0;
        y
    }

    /// Sources of probability flowing into state `i`.
    pub fn gain_sources(&self, i: usize) -> &[(usize, f64)] {
        &self.gains[i]
    }

    pub fn loss_rate(&self, i: usize) -> f64 {
        self.loss[i]
    }
}

impl OdeSystem for RateEquationSystem {
    fn dim(&self) -> usize {
        self.loss.len()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        for i in 0..y.len() {
            let mut v = -self.loss[i] * y[i];
            for &(j, g) in &self.gains[i] {
                v += g * y[j];
            }
            dy[i] = v;
        }
    }
}

/// Populations of every lattice state on a time grid.
#[derive(Clone, Debug)]
pub struct PopulationSeries {
    pub times: Vec<f64>,
    pub states: Vec<OccupationState>,
    /// `values[k][i]`: population of `states[i]` at `times[k]`.
    pub values: Vec<Vec<f64>>,
}

impl PopulationSeries {
    pub fn column(&self, state: &OccupationState) -> Option<Vec<f64>> {
        let i = self.states.iter().position(|s| s == state)?;
        Some(self.values.iter().map(|row| row[i]).collect())
    }

    /// Expected photon emission rate into `channel` (or all channels).
    pub fn intensity(&self, spec: &SystemSpec, channel: Option<usize>) -> Vec<f64> {
        let rates = spec.channel_rates_f64();
        let weights: Vec<f64> = self
            .states
            .iter()
            .map(|s| {
                let m = spec.excitations(s) as f64;
                rates
                    .iter()
                    .zip(s.counts())
                    .enumerate()
                    .filter(|(a, _)| channel.is_none_or(|c| c == *a))
                    .map(|(_, (g, &n))| g * m * (n as f64 + 1.0))
                    .sum()
            })
            .collect();
        self.values
            .iter()
            .map(|row| row.iter().zip(&weights).map(|(p, w)| p * w).sum())
            .collect()
    }
}

/// Integrates the rate equations on `t_grid`.
pub fn integrate(spec: &SystemSpec, t_grid: &[f64], rel_tol: f64, abs_tol: f64) -> Result<PopulationSeries> {
    let system = RateEquationSystem::new(spec)?;
    let tol = Tolerances { rel: rel_tol, abs: abs_tol };
    let values = dormand_prince(&system, &system.initial_state(), t_grid, tol, |_, _| Ok(()))?;
    Ok(PopulationSeries {
        times: t_grid.to_vec(),
        states: system.states().to_vec(),
        values,
    })
}

/// Long-time limit by integration, starting at `t_end = 50/(N Γ_min)` and
/// doubling the horizon (up to 6 times) until the population left in excited
/// states drops below 1e-10. The ground simplex is then renormalized.
pub fn steady_state_by_integration(spec: &SystemSpec) -> Result<SteadyStateDistribution> {
    let mut span = 50.0 / (spec.n() as f64 * spec.min_rate().to_f64());
    let system = RateEquationSystem::new(spec)?;
    let excited: Vec<bool> = system.states().iter().map(|s| spec.excitations(s) > 0).collect();
    let mut y = system.initial_state();
    let mut t_end = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..=HORIZON_DOUBLINGS {
        // Autonomous system: each segment restarts the clock at zero.
        y = dormand_prince(&system, &y, &[span], Tolerances::default(), |_, _| Ok(()))?.remove(0);
        t_end += span;
        residual = y.iter().zip(&excited).filter(|(_, e)| **e).map(|(p, _)| p.abs()).sum();
        if residual < STEADY_RESIDUAL {
            break;
        }
        span = t_end;
    }
    if residual >= STEADY_RESIDUAL {
        return Err(Error::Horizon { t_end, residual });
    }
    let ground: Vec<(OccupationState, f64)> = system
        .states()
        .iter()
        .zip(&y)
        .filter(|(s, _)| spec.excitations(s) == 0)
        .map(|(s, &p)| (s.clone(), p))
        .collect();
    let total: f64 = ground.iter().map(|(_, p)| p).sum();
    let (states, probabilities) = ground.into_iter().map(|(s, p)| (s, p / total)).unzip();
    SteadyStateDistribution::new(spec.clone(), states, probabilities)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    #[test]
    fn exponential_decay() {
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let out = dormand_prince(&Decay(1.3), &[1.0], &grid, Tolerances::default(), |_, _| Ok(())).unwrap();
        for (t, y) in grid.iter().zip(&out) {
            assert!((y[0] - (-1.3 * t).exp()).abs() < 1e-9 * (-1.3 * t).exp() + 1e-14);
        }
    }

    #[test]
    fn single_emitter_matches_exponential() {
        let spec = SystemSpec::parse(1, "1").unwrap();
        let grid = [0.0, 0.5, 1.0, 4.0];
        let series = integrate(&spec, &grid, 1e-10, 1e-14).unwrap();
        for (k, &t) in grid.iter().enumerate() {
            assert!((series.values[k][0] - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn probability_is_conserved_on_every_step() {
        let spec = SystemSpec::parse(6, "1,2").unwrap();
        let system = RateEquationSystem::new(&spec).unwrap();
        let grid = [0.05, 0.2, 1.0];
        dormand_prince(&system, &system.initial_state(), &grid, Tolerances::default(), |t, y| {
            let s: f64 = y.iter().sum();
            assert!((s - 1.0).abs() < 10.0 * DEFAULT_REL_TOL, "sum {s} at t={t}");
            assert!(y.iter().all(|&p| p > -1e-12));
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn generator_is_strictly_downhill() {
        let spec = SystemSpec::parse(5, "1,2,3").unwrap();
        let system = RateEquationSystem::new(&spec).unwrap();
        for i in 0..system.states().len() {
            let m_i = spec.excitations(&system.states()[i]);
            for &(j, g) in system.gain_sources(i) {
                assert!(g > 0.0);
                assert_eq!(spec.excitations(&system.states()[j]), m_i + 1);
            }
        }
    }

    #[test]
    fn single_channel_steady_state_is_ground() {
        let spec = SystemSpec::parse(4, "1").unwrap();
        let ss = steady_state_by_integration(&spec).unwrap();
        assert_eq!(ss.probabilities().len(), 1);
        assert!((ss.probabilities()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        let spec = SystemSpec::parse(2, "1").unwrap();
        assert!(integrate(&spec, &[1.0, 0.5], 1e-8, 1e-12).is_err());
        assert!(integrate(&spec, &[-1.0], 1e-8, 1e-12).is_err());
    }
}
