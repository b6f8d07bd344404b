//! Explicit path sum: every ordered jump sequence reaching a target state,
//! each contributing the nested convolution of the decay kernels it visits,
//! times the common prefactor
//! `C = Π Γ_α^{n_α} · N! · Π n_α! / m!`.
//!
//! Cost grows with the multinomial path count; this is the brute-force
//! reference for the lattice recurrence, not a production solver.

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::expsum::{ExpPolySum, Numerics};
use crate::system::{OccupationState, SystemSpec};

/// All orderings of a multiset of channel indices with counts `target`.
pub fn enumerate_paths(target: &OccupationState) -> Vec<Vec<usize>> {
    fn rec(remaining: &mut Vec<u32>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(prefix.clone());
            return;
        }
        for alpha in 0..remaining.len() {
            if remaining[alpha] > 0 {
                remaining[alpha] -= 1;
                prefix.push(alpha);
                rec(remaining, prefix, out);
                prefix.pop();
                remaining[alpha] += 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut target.counts().to_vec(), &mut Vec::new(), &mut out);
    out
}

/// `C_{n₁…n_d} = Π Γ_α^{n_α} · N! · Π n_α! / m!`.
pub fn path_prefactor(spec: &SystemSpec, target: &OccupationState) -> Rational {
    let m = spec.excitations(target);
    let mut c = Rational::from(Integer::from(Integer::factorial(spec.n())));
    c /= Integer::from(Integer::factorial(m));
    for (gamma, &n) in spec.channels().iter().zip(target.counts()) {
        c *= Integer::from(Integer::factorial(n));
        for _ in 0..n {
            c *= gamma.as_rational();
        }
    }
    c
}

/// Population of `target` by summing over all jump sequences.
pub fn path_sum_population(
    spec: &SystemSpec,
    target: &OccupationState,
    max_paths: u128,
    numerics: Numerics,
) -> Result<ExpPolySum> {
    spec.validate_state(target)?;
    let count = target.path_count();
    if count > max_paths {
        return Err(Error::LatticeCap {
            states: count,
            cap: max_paths,
        });
    }
    let mut chains = Vec::with_capacity(count as usize);
    for path in enumerate_paths(target) {
        let mut state = OccupationState::fully_excited(spec.d());
        let mut chain = ExpPolySum::exponential(spec.decay_rate(&state), numerics);
        for alpha in path {
            state = state.successor(alpha);
            chain = chain.convolve(&ExpPolySum::exponential(spec.decay_rate(&state), numerics))?;
        }
        chains.push(chain);
    }
    let total = ExpPolySum::sum(&chains, numerics);
    Ok(total.scale(&path_prefactor(spec, target)))
}
