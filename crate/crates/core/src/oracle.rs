//! Exhaustive reference solutions for small instances.
//!
//! [`brute_force`] walks all `2^n` configurations in Gray-code order, so each
//! step flips one spin and the energy is updated in `O(degree)`. The running
//! energies are only used to shortlist candidates; the final minimum and the
//! set of degenerate ground states are decided on exactly recomputed
//! energies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descent::is_local_minimum;
use crate::model::{IsingInstance, SpinConfig};

pub const BRUTE_FORCE_MAX_SPINS: usize = 24;
pub const LOCAL_MINIMA_MAX_SPINS: usize = 16;

/// Energies within this of each other are degenerate.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{n} spins exceeds the exhaustive-search cap of {cap}")]
    TooLarge { n: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub ground_energy: f64,
    /// Every configuration attaining the ground energy, in ascending bit order.
    pub ground_configs: Vec<SpinConfig>,
    pub evaluations: u64,
}

pub fn brute_force(inst: &IsingInstance) -> Result<ExactSolution, OracleError> {
    let n = inst.n();
    if n > BRUTE_FORCE_MAX_SPINS {
        return Err(OracleError::TooLarge { n, cap: BRUTE_FORCE_MAX_SPINS });
    }
    let total: u64 = 1 << n;
    // Drift of the running energy stays far below this band.
    let band = 1e-7 * (1.0 + inst.field_scale());

    let mut z = vec![1i8; n];
    let mut field: Vec<f64> = (0..n).map(|i| inst.local_field_unchecked(&z, i)).collect();
    let mut energy = inst.energy_unchecked(&z);
    let mut bits: u64 = 0;
    let mut best = energy;
    let mut candidates: Vec<(u64, f64)> = vec![(0, energy)];

    for k in 1..total {
        let i = k.trailing_zeros() as usize;
        energy += -2.0 * f64::from(z[i]) * field[i];
        z[i] = -z[i];
        bits ^= 1 << i;
        let step = 2.0 * f64::from(z[i]);
        for (j, v) in inst.neighbors(i) {
            field[j] += step * v;
        }
        if energy < best - band {
            best = energy;
            candidates.retain(|&(_, e)| e <= best + band);
        } else if energy < best {
            best = energy;
        }
        if energy <= best + band {
            candidates.push((bits, energy));
        }
    }

    let exact: Vec<(u64, f64)> = candidates
        .into_iter()
        .map(|(b, _)| (b, inst.energy_unchecked(SpinConfig::from_bits(n, b).spins())))
        .collect();
    let ground_energy = exact.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut ground: Vec<u64> = exact
        .into_iter()
        .filter(|&(_, e)| e <= ground_energy + ENERGY_TOLERANCE)
        .map(|p| p.0)
        .collect();
    ground.sort_unstable();
    Ok(ExactSolution {
        ground_energy,
        ground_configs: ground.into_iter().map(|b| SpinConfig::from_bits(n, b)).collect(),
        evaluations: total,
    })
}

/// Every 1-flip local minimum with its energy, ascending by energy (then by bit pattern).
pub fn enumerate_local_minima(inst: &IsingInstance) -> Result<Vec<(SpinConfig, f64)>, OracleError> {
    let n = inst.n();
    if n > LOCAL_MINIMA_MAX_SPINS {
        return Err(OracleError::TooLarge { n, cap: LOCAL_MINIMA_MAX_SPINS });
    }
    let mut out: Vec<(u64, SpinConfig, f64)> = (0..1u64 << n)
        .map(|b| SpinConfig::from_bits(n, b))
        .filter(|c| is_local_minimum(inst, c).expect("length matches"))
        .map(|c| {
            let e = inst.energy_unchecked(c.spins());
            (c.to_bits(), c, e)
        })
        .collect();
    out.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    Ok(out.into_iter().map(|(_, c, e)| (c, e)).collect())
}
