//! Discrete simulated bifurcation.
//!
//! Symplectic Euler on
//!
//! ```text
//! dp_i/dt = -(a0 - a(t)) x_i + c0 g_i(sgn x)
//! dx_i/dt = a0 p_i
//! ```
//!
//! followed by perfectly inelastic walls at `x = ±1`.

use super::{drive_field, ramp, SbParams, SolverError, SolverState, Variant};
use crate::model::IsingInstance;

/// `sgn` with `sgn(0) = +1`.
fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// One dSB step: momentum, then position, then walls. A wall hit pins `x_i` to
/// `±1` and zeroes `p_i`.
pub fn step_dsb(
    state: &mut SolverState,
    inst: &IsingInstance,
    params: &SbParams,
    dt: f64,
) -> Result<(), SolverError> {
    state.check(inst)?;
    let a = ramp(state.t, params.total_time(), params.a0);
    let detuning = params.a0 - a;

    // drive evaluated at the discretized positions
    for (a, x) in state.aux.iter_mut().zip(&state.x) {
        *a = sign(*x);
    }
    drive_field(inst, &state.aux, &mut state.drive);

    for i in 0..state.x.len() {
        state.momentum[i] += dt * (-detuning * state.x[i] + params.c0 * state.drive[i]);
        state.x[i] += dt * params.a0 * state.momentum[i];
        if state.x[i].abs() > 1.0 {
            state.x[i] = sign(state.x[i]);
            state.momentum[i] = 0.0;
        }
    }
    state.finish_step(Variant::Dsb, dt)
}
