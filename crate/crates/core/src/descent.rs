//! Greedy single-flip steepest descent.
//!
//! At each iteration the spin whose flip lowers the energy the most is flipped
//! (lowest index on ties); the walk stops once no flip lowers the energy.
//! Local fields are cached and updated along the flipped spin's neighbours.

use serde::{Deserialize, Serialize};

use crate::model::{IsingInstance, ModelError, SpinConfig};

/// Flip deltas above `-tolerance` count as non-improving. The tolerance is a
/// few ulps of the largest possible local field, so rounding in the cached
/// fields can never make a neutral flip look like an improvement.
pub fn delta_tolerance(inst: &IsingInstance) -> f64 {
    1e-12 * (1.0 + inst.field_scale())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub config: SpinConfig,
    pub energy: f64,
    pub flips_applied: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_trace: Option<Vec<usize>>,
}

pub fn steepest_descent(inst: &IsingInstance, start: &SpinConfig) -> Result<DescentOutcome, ModelError> {
    descend(inst, start, false)
}

/// Like [`steepest_descent`], also recording the flipped indices in order.
pub fn steepest_descent_traced(inst: &IsingInstance, start: &SpinConfig) -> Result<DescentOutcome, ModelError> {
    descend(inst, start, true)
}

fn descend(inst: &IsingInstance, start: &SpinConfig, trace: bool) -> Result<DescentOutcome, ModelError> {
    if start.len() != inst.n() {
        return Err(ModelError::DimensionMismatch { expected: inst.n(), found: start.len() });
    }
    let tol = delta_tolerance(inst);
    let mut z: Vec<i8> = start.spins().to_vec();
    let mut field: Vec<f64> = (0..inst.n()).map(|i| inst.local_field_unchecked(&z, i)).collect();
    let mut flips = Vec::new();
    let mut count = 0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&s, &f)) in z.iter().zip(&field).enumerate() {
            let delta = -2.0 * f64::from(s) * f;
            if delta < -tol && best.is_none_or(|(_, d)| delta < d) {
                best = Some((i, delta));
            }
        }
        let Some((i, _)) = best else { break };
        z[i] = -z[i];
        let step = 2.0 * f64::from(z[i]);
        for (j, v) in inst.neighbors(i) {
            field[j] += step * v;
        }
        count += 1;
        if trace {
            flips.push(i);
        }
    }
    let config = SpinConfig::new(z).expect("flips keep spins ±1");
    let energy = inst.energy_unchecked(config.spins());
    Ok(DescentOutcome { config, energy, flips_applied: count, flip_trace: trace.then_some(flips) })
}

/// True iff no single flip lowers the energy by more than [`delta_tolerance`].
pub fn is_local_minimum(inst: &IsingInstance, cfg: &SpinConfig) -> Result<bool, ModelError> {
    if cfg.len() != inst.n() {
        return Err(ModelError::DimensionMismatch { expected: inst.n(), found: cfg.len() });
    }
    let tol = delta_tolerance(inst);
    let z = cfg.spins();
    Ok((0..inst.n()).all(|i| -2.0 * f64::from(z[i]) * inst.local_field_unchecked(z, i) >= -tol))
}
