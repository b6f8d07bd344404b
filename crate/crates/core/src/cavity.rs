//! Single-mode cavity check of the bad-cavity reduction.
//!
//! The full model evolves `ρ` on `symmetric atoms ⊗ truncated Fock space`
//! under `H = Δ a†a + g(a S† + a† S)` with cavity loss `√κ a`, starting from
//! all atoms excited and the cavity empty. Eliminating the mode leaves a
//! Dicke cascade with rate `Γ = 4g²κ/(κ² + 4Δ²)`; the comparison observable is
//! `⟨S†S⟩`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::RateValue;
use crate::oracle_ode::{dormand_prince, OdeSystem, Tolerances};
use crate::system::SystemSpec;
use crate::trajectory::{intensity, solve_single_channel, Channel, SolverOptions};

/// Largest Hilbert-space dimension `(N+1)(cutoff+1)` accepted.
pub const DIMENSION_CAP: usize = 10_000;
/// Largest tolerated population in the top Fock level.
pub const TAIL_TOLERANCE: f64 = 1e-6;
/// Comparison window in units of `1/Γ_eff`.
pub const DEFAULT_HORIZON: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CavityModel {
    pub n: u32,
    pub g: f64,
    pub kappa: f64,
    pub delta: f64,
    pub fock_cutoff: u32,
}

impl CavityModel {
    pub fn new(n: u32, g: f64, kappa: f64, delta: f64, fock_cutoff: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("emitter count N must be at least 1"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::validation(format!("cavity decay κ = {kappa} must be positive")));
        }
        if !(g >= 0.0 && g.is_finite()) || !delta.is_finite() {
            return Err(Error::validation("coupling g must be non-negative and detuning finite"));
        }
        if fock_cutoff == 0 {
            return Err(Error::validation("Fock cutoff must be at least 1"));
        }
        Ok(CavityModel {
            n,
            g,
            kappa,
            delta,
            fock_cutoff,
        })
    }

    pub fn dimension(&self) -> usize {
        (self.n as usize + 1) * (self.fock_cutoff as usize + 1)
    }

    /// `κ ≫ g`, taken here as `κ ≥ 10 g`. Informational only.
    pub fn is_bad_cavity(&self) -> bool {
        self.kappa >= 10.0 * self.g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveRates {
    pub gamma_eff: f64,
    pub lamb_shift: f64,
}

/// `Γ = 4g²κ/(κ²+4Δ²)`, `δ = 4g²Δ/(κ²+4Δ²)`.
pub fn effective_rates(model: &CavityModel) -> EffectiveRates {
    let denom = model.kappa * model.kappa + 4.0 * model.delta * model.delta;
    let g2 = 4.0 * model.g * model.g;
    EffectiveRates {
        gamma_eff: g2 * model.kappa / denom,
        lamb_shift: g2 * model.delta / denom,
    }
}

/// Vectorized Lindbladian. `ρ` is stored row-major as interleaved
/// `(re, im)` pairs.
struct Lindblad {
    dim: usize,
    /// Rows of `H_eff = H − iκ/2 a†a` as `(column, re, im)`.
    h_eff: Vec<Vec<(usize, f64, f64)>>,
    /// `a` maps basis index `i` to `(lowered index, √k)`.
    lower: Vec<Option<(usize, f64)>>,
    kappa: f64,
}

impl Lindblad {
    fn new(model: &CavityModel) -> Self {
        let c = model.fock_cutoff as usize + 1;
        let n = model.n as usize;
        let dim = (n + 1) * c;
        let idx = |m: usize, k: usize| m * c + k;
        let mut h_eff = vec![Vec::new(); dim];
        let mut lower = vec![None; dim];
        for m in 0..=n {
            for k in 0..c {
                let i = idx(m, k);
                let kf = k as f64;
                h_eff[i].push((i, model.delta * kf, -0.5 * model.kappa * kf));
                if m > 0 && k + 1 < c {
                    // ⟨m,k| a S† |m−1,k+1⟩ = √(k+1) √(m(N+1−m))
                    let v = model.g * ((k + 1) as f64).sqrt() * ((m * (n + 1 - m)) as f64).sqrt();
                    h_eff[i].push((idx(m - 1, k + 1), v, 0.0));
                }
                if m < n && k > 0 {
                    // ⟨m,k| a† S |m+1,k−1⟩ = √k √((m+1)(N−m))
                    let v = model.g * kf.sqrt() * (((m + 1) * (n - m)) as f64).sqrt();
                    h_eff[i].push((idx(m + 1, k - 1), v, 0.0));
                }
                if k > 0 {
                    lower[i] = Some((idx(m, k - 1), kf.sqrt()));
                }
            }
        }
        Lindblad {
            dim,
            h_eff,
            lower,
            kappa: model.kappa,
        }
    }

    fn initial_state(&self, n: u32, cutoff: u32) -> Vec<f64> {
        let i = n as usize * (cutoff as usize + 1);
        let mut y = vec![0.0; 2 * self.dim * self.dim];
        y[2 * (i * self.dim + i)] = 1.0;
        y
    }
}

impl OdeSystem for Lindblad {
    fn dim(&self) -> usize {
        2 * self.dim * self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.dim;
        // X = H_eff ρ; dρ = −iX + (−iX)† + κ a ρ a†.
        let mut x = vec![0.0; 2 * d * d];
        for (i, row) in self.h_eff.iter().enumerate() {
            for &(l, hr, hi) in row {
                let src = &y[2 * l * d..2 * (l + 1) * d];
                let dst = &mut x[2 * i * d..2 * (i + 1) * d];
                for j in 0..d {
                    let (pr, pi) = (src[2 * j], src[2 * j + 1]);
                    dst[2 * j] += hr * pr - hi * pi;
                    dst[2 * j + 1] += hr * pi + hi * pr;
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let (xr, xi) = (x[2 * (i * d + j)], x[2 * (i * d + j) + 1]);
                let (tr, ti) = (x[2 * (j * d + i)], x[2 * (j * d + i) + 1]);
                // −i X_ij + i conj(X_ji)
                let mut re = xi + ti;
                let mut im = -xr + tr;
                if let (Some((ai, si)), Some((aj, sj))) = (self.lower_source(i), self.lower_source(j)) {
                    let w = self.kappa * si * sj;
                    re += w * y[2 * (ai * d + aj)];
                    im += w * y[2 * (ai * d + aj) + 1];
                }
                dy[2 * (i * d + j)] = re;
                dy[2 * (i * d + j) + 1] = im;
            }
        }
    }
}

impl Lindblad {
    /// `(a ρ a†)_ij = √(k_i+1) √(k_j+1) ρ_{i↑, j↑}`: the state one photon up.
    fn lower_source(&self, i: usize) -> Option<(usize, f64)> {
        let up = i + 1;
        match self.lower.get(up) {
            Some(Some((target, s))) if *target == i => Some((up, *s)),
            _ => None,
        }
    }
}

/// Expectation values of the full model on a time grid.
#[derive(Clone, Debug, Serialize)]
pub struct CavitySeries {
    pub times: Vec<f64>,
    pub s_dag_s: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub trace: Vec<f64>,
    /// Largest top-Fock-level population seen on any accepted step.
    pub max_tail: f64,
    /// Largest `|ρ_ij − conj(ρ_ji)|` seen on the grid.
    pub max_hermiticity_defect: f64,
}

pub fn simulate_full(model: &CavityModel, t_grid: &[f64]) -> Result<CavitySeries> {
    let dim = model.dimension();
    if dim > DIMENSION_CAP {
        return Err(Error::DimensionCap { dim, cap: DIMENSION_CAP });
    }
    let c = model.fock_cutoff as usize + 1;
    let n = model.n as usize;
    let lindblad = Lindblad::new(model);
    let diag = |y: &[f64], i: usize| y[2 * (i * dim + i)];
    let tail = |y: &[f64]| (0..=n).map(|m| diag(y, m * c + c - 1)).sum::<f64>();
    let mut max_tail = 0.0f64;
    let tol = Tolerances { rel: 1e-10, abs: 1e-12 };
    let states = dormand_prince(
        &lindblad,
        &lindblad.initial_state(model.n, model.fock_cutoff),
        t_grid,
        tol,
        |t, y| {
            let p = tail(y);
            max_tail = max_tail.max(p);
            if p >= TAIL_TOLERANCE {
                return Err(Error::CutoffInadequate {
                    cutoff: model.fock_cutoff as usize,
                    tail: p,
                    t,
                });
            }
            Ok(())
        },
    )?;
    let mut series = CavitySeries {
        times: t_grid.to_vec(),
        s_dag_s: Vec::with_capacity(t_grid.len()),
        photon_number: Vec::with_capacity(t_grid.len()),
        trace: Vec::with_capacity(t_grid.len()),
        max_tail,
        max_hermiticity_defect: 0.0,
    };
    for y in &states {
        let (mut s, mut ph, mut tr) = (0.0, 0.0, 0.0);
        for m in 0..=n {
            for k in 0..c {
                let p = diag(y, m * c + k);
                s += (m * (n + 1 - m)) as f64 * p;
                ph += k as f64 * p;
                tr += p;
            }
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let dr = y[2 * (i * dim + j)] - y[2 * (j * dim + i)];
                let di = y[2 * (i * dim + j) + 1] + y[2 * (j * dim + i) + 1];
                series.max_hermiticity_defect = series.max_hermiticity_defect.max(dr.hypot(di));
            }
        }
        series.s_dag_s.push(s);
        series.photon_number.push(ph);
        series.trace.push(tr);
    }
    Ok(series)
}

/// `⟨S†S⟩ = Σ_m m(N+1−m) p_m` of the effective single-channel cascade.
pub fn dicke_s_dag_s(model: &CavityModel, t_grid: &[f64]) -> Result<Vec<f64>> {
    let rates = effective_rates(model);
    if rates.gamma_eff <= 0.0 {
        return Ok(vec![model.n as f64; t_grid.len()]);
    }
    let gamma = RateValue::from_f64(rates.gamma_eff)?;
    let spec = SystemSpec::new(model.n, vec![gamma])?;
    let table = solve_single_channel(&spec, &SolverOptions::default())?;
    let signal = intensity(&table, Channel::Total)?;
    Ok(t_grid.iter().map(|&t| signal.evaluate_f64(t) / rates.gamma_eff).collect())
}

/// One row of the comparison.
#[derive(Clone, Debug, Serialize)]
pub struct CavityComparison {
    pub model: CavityModel,
    pub gamma_eff: f64,
    pub times: Vec<f64>,
    pub full: CavitySeries,
    pub dicke: Vec<f64>,
    /// `max_t |full − dicke| / max_t dicke`.
    pub deviation: f64,
}

/// Compares both models on `points` equally spaced times in
/// `[0, horizon/Γ_eff]`.
pub fn compare(model: &CavityModel, horizon: f64, points: usize) -> Result<CavityComparison> {
    let gamma_eff = effective_rates(model).gamma_eff;
    if gamma_eff <= 0.0 {
        return Err(Error::validation("comparison needs g > 0"));
    }
    if points < 2 || !(horizon > 0.0) {
        return Err(Error::validation("comparison needs at least two points and a positive horizon"));
    }
    let t_end = horizon / gamma_eff;
    let times: Vec<f64> = (0..points).map(|i| t_end * i as f64 / (points - 1) as f64).collect();
    let full = simulate_full(model, &times)?;
    let dicke = dicke_s_dag_s(model, &times)?;
    let scale = dicke.iter().cloned().fold(0.0, f64::max);
    let deviation = full
        .s_dag_s
        .iter()
        .zip(&dicke)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale;
    Ok(CavityComparison {
        model: *model,
        gamma_eff,
        times,
        full,
        dicke,
        deviation,
    })
}

/// `compare` at each `κ/g`, holding `g`, `Δ`, `N` and the cutoff fixed.
pub fn convergence_sweep(template: &CavityModel, ratios: &[f64], horizon: f64, points: usize) -> Result<Vec<CavityComparison>> {
    ratios
        .par_iter()
        .map(|&ratio| {
            let model = CavityModel::new(template.n, template.g, ratio * template.g, template.delta, template.fock_cutoff)?;
            compare(&model, horizon, points)
        })
        .collect()
}
