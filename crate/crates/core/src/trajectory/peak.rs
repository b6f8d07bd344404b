use rug::{Integer, Rational};

use super::{intensity, Channel, PopulationTable};
use crate::error::{Error, Result};
use crate::expsum::ExpPolySum;
use crate::system::SystemSpec;

const SCAN_POINTS: usize = 200;
const SCAN_DECADES: (f64, f64) = (-3.0, 2.0);
const T_REL_TOL: f64 = 1e-10;

/// Location and height of a signal's global maximum on `t ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub t_peak: f64,
    pub value: f64,
}

/// Global maximum using the reciprocal of the slowest positive rate as the
/// time scale.
pub fn find_peak(signal: &ExpPolySum) -> Peak {
    let scale = signal
        .min_positive_rate()
        .map(|r| 1.0 / r.to_f64())
        .unwrap_or(1.0);
    find_peak_scaled(signal, scale)
}

/// Scans 200 log-spaced points on `[1e-3, 1e2]·time_scale`, then bisects on
/// the sign of the derivative around the first grid maximum. A signal whose
/// maximum is at `t = 0` (no burst) returns `t_peak = 0`.
pub fn find_peak_scaled(signal: &ExpPolySum, time_scale: f64) -> Peak {
    let at_zero = signal.evaluate_f64(0.0);
    let (lo_dec, hi_dec) = SCAN_DECADES;
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| {
            let frac = i as f64 / (SCAN_POINTS - 1) as f64;
            time_scale * 10f64.powf(lo_dec + (hi_dec - lo_dec) * frac)
        })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| signal.evaluate_f64(t)).collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    if at_zero >= values[best] {
        return Peak {
            t_peak: 0.0,
            value: at_zero,
        };
    }
    let derivative = signal.derivative();
    let slope = |t: f64| derivative.evaluate(t);
    let mut lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let mut hi = if best + 1 < grid.len() { grid[best + 1] } else { grid[best] };
    if !(slope(lo).is_sign_positive() && slope(hi).is_sign_negative()) {
        return Peak {
            t_peak: grid[best],
            value: values[best],
        };
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= T_REL_TOL * mid {
            break;
        }
        if slope(mid).is_sign_positive() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_peak = 0.5 * (lo + hi);
    Peak {
        t_peak,
        value: signal.evaluate_f64(t_peak),
    }
}

/// Peak of an intensity curve, scanned on the natural scale `1/(N Γ_max)`.
pub fn intensity_peak(table: &PopulationTable, channel: Channel) -> Result<Peak> {
    let signal = intensity(table, channel)?;
    let spec = table.system();
    let scale = 1.0 / (spec.n() as f64 * spec.max_rate().to_f64());
    Ok(find_peak_scaled(&signal, scale))
}

/// Whether channel `alpha` shows a superradiant burst: `N − 1 > Γ₀/Γ_α`.
pub fn burst_predicate(spec: &SystemSpec, alpha: usize) -> Result<bool> {
    let rate = spec
        .channels()
        .get(alpha)
        .ok_or_else(|| Error::validation(format!("channel index {alpha} out of range for d = {}", spec.d())))?;
    let lhs = Rational::from(Integer::from(spec.n()) - 1u32);
    let ratio = spec.total_rate().checked_div(rate).expect("channel rates are positive");
    Ok(lhs > ratio)
}
