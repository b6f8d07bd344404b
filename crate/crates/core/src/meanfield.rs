//! Large-N asymptotics in operational time.
//!
//! With `dτ = m dt` each channel becomes an independent Yule process,
//! `⟨n_α(τ)⟩ = e^{Γ_α τ} − 1`. Replacing the random stopping time by the
//! mean-field `τ*` solving `e^{Γ₁τ*} + e^{Γ₂τ*} = N + 2` gives a geometric
//! ground-state law whose tilt sets the order parameter.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::expsum::RateValue;
use crate::steady_state::SteadyStateDistribution;
use crate::system::{OccupationState, SystemSpec};

const MAX_NEWTON: usize = 200;
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StoppingTime {
    pub tau_star: f64,
    pub n: u32,
    pub rates: (f64, f64),
}

impl StoppingTime {
    /// `(e^{Γ₁τ*} + e^{Γ₂τ*} − (N+2)) / (N+2)`.
    pub fn relative_residual(&self) -> f64 {
        let target = self.n as f64 + 2.0;
        ((self.rates.0 * self.tau_star).exp() + (self.rates.1 * self.tau_star).exp() - target) / target
    }
}

fn check_rates(g1: f64, g2: f64) -> Result<()> {
    if !(g1 > 0.0 && g2 > 0.0 && g1.is_finite() && g2.is_finite()) {
        return Err(Error::validation(format!("rates ({g1}, {g2}) must be positive and finite")));
    }
    Ok(())
}

/// Newton iteration from `ln(N+2)/Γ_max`. The residual is convex and
/// increasing and the start lies right of the root, so iterates decrease
/// monotonically onto it.
pub fn solve_stopping_time(n: u32, g1: f64, g2: f64) -> Result<StoppingTime> {
    check_rates(g1, g2)?;
    let target = n as f64 + 2.0;
    let mut tau = target.ln() / g1.max(g2);
    for _ in 0..MAX_NEWTON {
        let (e1, e2) = ((g1 * tau).exp(), (g2 * tau).exp());
        let f = e1 + e2 - target;
        if f.abs() <= RESIDUAL_TOL * target * 0.5 {
            return Ok(StoppingTime {
                tau_star: tau,
                n,
                rates: (g1, g2),
            });
        }
        let next = (tau - f / (g1 * e1 + g2 * e2)).max(0.0);
        if next == tau {
            break;
        }
        tau = next;
    }
    let st = StoppingTime {
        tau_star: tau,
        n,
        rates: (g1, g2),
    };
    if st.relative_residual().abs() < RESIDUAL_TOL {
        Ok(st)
    } else {
        Err(Error::NonConvergence {
            what: "stopping-time Newton iteration",
            iterations: MAX_NEWTON,
        })
    }
}

/// `⟨n_α(τ)⟩ = e^{Γ_α τ} − 1`.
pub fn yule_mean(tau: f64, gamma: f64) -> f64 {
    (gamma * tau).exp_m1()
}

/// Joint probability generating function of independent Yule processes,
/// `Π e^{−Γ_i τ} / (1 − (1 − e^{−Γ_i τ}) z_i)`.
pub fn yule_generating_function(tau: f64, rates: &[f64], z: &[f64]) -> f64 {
    rates
        .iter()
        .zip(z)
        .map(|(g, zi)| {
            let decay = (-g * tau).exp();
            decay / (1.0 - (1.0 - decay) * zi)
        })
        .product()
}

/// How the geometric law is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `p_{N,0}` pinned to its exact value; the vector need not sum to 1.
    Anchored,
    /// Anchored, then rescaled to unit mass.
    Renormalized,
}

fn check_asymptotic(n: u32, r: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::validation("asymptotic analysis needs N >= 2"));
    }
    check_rates(1.0, r)
}

/// `ln p_x` for `x = n₂ = 0 … N`, with `Γ₁ = 1`, `Γ₂ = r`.
pub fn asymptotic_log_probabilities(n: u32, r: f64, normalization: Normalization) -> Result<Vec<f64>> {
    check_asymptotic(n, r)?;
    let st = solve_stopping_time(n, 1.0, r)?;
    let q1 = -(-st.tau_star).exp_m1();
    let q2 = -(-r * st.tau_star).exp_m1();
    let tilt = q2.ln() - q1.ln();
    let anchor = ln_gamma(n as f64 + 1.0) + ln_gamma(1.0 + r) - ln_gamma(1.0 + r + n as f64);
    let mut logs: Vec<f64> = (0..=n).map(|x| anchor + tilt * x as f64).collect();
    if normalization == Normalization::Renormalized {
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mass: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let shift = top + mass.ln();
        logs.iter_mut().for_each(|l| *l -= shift);
    }
    Ok(logs)
}

/// Geometric mean-field law, anchored at the exact `p_{N,0}` and renormalized.
pub fn asymptotic_distribution(n: u32, r: f64) -> Result<SteadyStateDistribution> {
    let logs = asymptotic_log_probabilities(n, r, Normalization::Renormalized)?;
    let system = SystemSpec::new(n, vec![RateValue::integer(1), RateValue::from_f64(r)?])?;
    let states = (0..=n).map(|x| OccupationState::new(vec![n - x, x])).collect();
    SteadyStateDistribution::new(system, states, logs.iter().map(|l| l.exp()).collect())
}

/// Leading-order `n̄₂`: `N^{r−1}`, `1/2`, or `1 − N^{1/r−1}`.
pub fn order_parameter_asymptotic(n: u32, r: f64) -> Result<f64> {
    check_asymptotic(n, r)?;
    let nf = n as f64;
    Ok(if r < 1.0 {
        nf.powf(r - 1.0)
    } else if r > 1.0 {
        1.0 - nf.powf(1.0 / r - 1.0)
    } else {
        0.5
    })
}

/// Leading-order `χ`: `ln N · N^{r−1}`, `ln N`, or `ln N / r² · N^{1/r−1}`.
pub fn susceptibility_asymptotic(n: u32, r: f64) -> Result<f64> {
    check_asymptotic(n, r)?;
    let nf = n as f64;
    let ln_n = nf.ln();
    Ok(if r < 1.0 {
        ln_n * nf.powf(r - 1.0)
    } else if r > 1.0 {
        ln_n / (r * r) * nf.powf(1.0 / r - 1.0)
    } else {
        ln_n
    })
}

/// `β ΔE = ln[(1 − e^{−Γ_max τ*}) / (1 − e^{−Γ_min τ*})]`.
pub fn thermal_ratio(n: u32, g1: f64, g2: f64) -> Result<f64> {
    let st = solve_stopping_time(n, g1, g2)?;
    let (lo, hi) = (g1.min(g2), g1.max(g2));
    Ok((-(-hi * st.tau_star).exp_m1()).ln() - (-(-lo * st.tau_star).exp_m1()).ln())
}
