//! Explicit-Euler steps for the coherent Ising machine variants.
//!
//! All three share the amplitude equation `dx/dt = -x³ + (p - 1) x + F` and
//! differ in the feedback `F` and in how the error variable evolves:
//!
//! | variant | feedback `F`                  | error dynamics            |
//! |---------|-------------------------------|---------------------------|
//! | CAC     | `e ζ g`                       | `-β e (x² - α)`           |
//! | CFC     | `-z`, `z = -e ζ g`            | `-β e (z² - α)`           |
//! | SFC     | `-tanh(c z) - k (z - e)`, `z = -ζ g` | `-β (e - z)`       |
//!
//! with `g` the drive field of the instance and `p` ramped linearly to
//! `p_end` over the run.

use super::{drive_field, ramp, CimParams, SolverError, SolverState, Variant};
use crate::model::IsingInstance;

/// Lower clamp on CAC/CFC error variables.
pub const ERROR_MIN: f64 = 1e-4;
/// Upper clamp on CAC/CFC error variables.
pub const ERROR_MAX: f64 = 1e4;

fn gain(state: &SolverState, params: &CimParams) -> f64 {
    ramp(state.t, params.total_time(), params.p_end)
}

/// One chaotic-amplitude-control step.
pub fn step_cac(
    state: &mut SolverState,
    inst: &IsingInstance,
    params: &CimParams,
    dt: f64,
) -> Result<(), SolverError> {
    state.check(inst)?;
    let p = gain(state, params);
    drive_field(inst, &state.x, &mut state.drive);
    let clamp = params.amplitude_clamp;
    for i in 0..state.x.len() {
        let (x, e) = (state.x[i], state.e[i]);
        let dx = -x * x * x + (p - 1.0) * x + e * params.zeta * state.drive[i];
        let de = -params.beta * e * (x * x - params.alpha);
        state.x[i] = (x + dt * dx).clamp(-clamp, clamp);
        state.e[i] = (e + dt * de).clamp(ERROR_MIN, ERROR_MAX);
    }
    state.finish_step(Variant::Cac, dt)
}

/// One chaotic-feedback-control step.
pub fn step_cfc(
    state: &mut SolverState,
    inst: &IsingInstance,
    params: &CimParams,
    dt: f64,
) -> Result<(), SolverError> {
    state.check(inst)?;
    let p = gain(state, params);
    drive_field(inst, &state.x, &mut state.drive);
    let clamp = params.amplitude_clamp;
    for i in 0..state.x.len() {
        let (x, e) = (state.x[i], state.e[i]);
        let z = -e * params.zeta * state.drive[i];
        let dx = -x * x * x + (p - 1.0) * x - z;
        let de = -params.beta * e * (z * z - params.alpha);
        state.x[i] = (x + dt * dx).clamp(-clamp, clamp);
        state.e[i] = (e + dt * de).clamp(ERROR_MIN, ERROR_MAX);
    }
    state.finish_step(Variant::Cfc, dt)
}

/// One separated-feedback-control step. Only `x` is clamped; `e` tracks the
/// mean field linearly.
pub fn step_sfc(
    state: &mut SolverState,
    inst: &IsingInstance,
    params: &CimParams,
    dt: f64,
) -> Result<(), SolverError> {
    state.check(inst)?;
    let p = gain(state, params);
    drive_field(inst, &state.x, &mut state.drive);
    let clamp = params.amplitude_clamp;
    for i in 0..state.x.len() {
        let (x, e) = (state.x[i], state.e[i]);
        let z = -params.zeta * state.drive[i];
        let dx = -x * x * x + (p - 1.0) * x - (params.c * z).tanh() - params.k * (z - e);
        let de = -params.beta * (e - z);
        state.x[i] = (x + dt * dx).clamp(-clamp, clamp);
        state.e[i] = e + dt * de;
    }
    state.finish_step(Variant::Sfc, dt)
}
