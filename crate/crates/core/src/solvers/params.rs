//! Hyperparameters for the CIM-family integrators and for dSB.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Variant;
use crate::model::IsingInstance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("instance has no spins")]
    EmptyInstance,
    #[error("unknown parameter '{key}' for {variant}; accepted keys: {}", .accepted.join(", "))]
    UnknownKey { key: String, variant: Variant, accepted: Vec<&'static str> },
    #[error("cannot parse value '{value}' for parameter '{key}'")]
    BadValue { key: String, value: String },
    #[error("parameter '{key}' = {value} is out of range: {reason}")]
    OutOfRange { key: &'static str, value: f64, reason: &'static str },
    #[error("{variant} needs {expected} parameters")]
    WrongFamily { variant: Variant, expected: &'static str },
    #[error("override '{0}' is not of the form key=value")]
    Malformed(String),
}

/// Parameters shared by CAC, CFC and SFC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CimParams {
    /// Final value of the linearly ramped gain `p`.
    pub p_end: f64,
    /// Target amplitude.
    pub alpha: f64,
    /// Error-variable rate.
    pub beta: f64,
    /// Coupling strength.
    pub zeta: f64,
    /// SFC nonlinearity steepness.
    pub c: f64,
    /// SFC mean-field tracking gain.
    pub k: f64,
    pub dt: f64,
    pub steps: usize,
    pub noise_sigma0: f64,
    pub noise_per_step: f64,
    pub amplitude_clamp: f64,
}

pub const CIM_KEYS: &[&str] = &[
    "p_end",
    "alpha",
    "beta",
    "zeta",
    "c",
    "k",
    "dt",
    "steps",
    "noise_sigma0",
    "noise_per_step",
    "amplitude_clamp",
];

/// Default coupling strength in units of `1 / (σ_J √n)`. At unit scale dense
/// spin glasses relax into the same amplitude pattern from almost every seed;
/// much above 2, sparse graphs go unstable before the gain ramp starts and
/// freeze in domain walls.
pub const ZETA_SCALE: f64 = 2.0;

impl CimParams {
    /// Defaults for `variant` with `zeta = ZETA_SCALE / (σ_J √n)`.
    ///
    /// CAC and CFC use a slow error rate (`beta = 0.02`): their multiplicative
    /// error variables otherwise blow up while the amplitudes are still small
    /// and the gain ramp loses its mode selectivity. SFC's linear tracker
    /// keeps `beta = 0.3`.
    pub fn defaults_for(variant: Variant, inst: &IsingInstance) -> Result<Self, ParamError> {
        if inst.n() == 0 {
            return Err(ParamError::EmptyInstance);
        }
        Ok(CimParams {
            p_end: 2.0,
            alpha: 1.0,
            beta: if variant == Variant::Sfc { 0.3 } else { 0.02 },
            zeta: ZETA_SCALE / (inst.coupling_rms() * (inst.n() as f64).sqrt()),
            c: 1.0,
            k: 0.1,
            dt: 0.1,
            steps: 3000,
            noise_sigma0: 0.1,
            noise_per_step: 0.0,
            amplitude_clamp: 1.5,
        })
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let reals = [
            ("p_end", self.p_end),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("zeta", self.zeta),
            ("c", self.c),
            ("k", self.k),
            ("dt", self.dt),
            ("noise_sigma0", self.noise_sigma0),
            ("noise_per_step", self.noise_per_step),
            ("amplitude_clamp", self.amplitude_clamp),
        ];
        for (key, value) in reals {
            if !value.is_finite() {
                return Err(ParamError::OutOfRange { key, value, reason: "must be finite" });
            }
        }
        for (key, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("noise_sigma0", self.noise_sigma0),
            ("noise_per_step", self.noise_per_step),
        ] {
            if value < 0.0 {
                return Err(ParamError::OutOfRange { key, value, reason: "must be >= 0" });
            }
        }
        for (key, value) in [("dt", self.dt), ("amplitude_clamp", self.amplitude_clamp)] {
            if value <= 0.0 {
                return Err(ParamError::OutOfRange { key, value, reason: "must be > 0" });
            }
        }
        if self.steps == 0 {
            return Err(ParamError::OutOfRange { key: "steps", value: 0.0, reason: "must be >= 1" });
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    fn set(&mut self, key: &str, value: &str) -> Result<bool, ParamError> {
        let slot = match key {
            "p_end" => &mut self.p_end,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            "zeta" => &mut self.zeta,
            "c" => &mut self.c,
            "k" => &mut self.k,
            "dt" => &mut self.dt,
            "noise_sigma0" => &mut self.noise_sigma0,
            "noise_per_step" => &mut self.noise_per_step,
            "amplitude_clamp" => &mut self.amplitude_clamp,
            "steps" => {
                self.steps = parse_value(key, value)?;
                return Ok(true);
            }
            _ => return Ok(false),
        };
        *slot = parse_value(key, value)?;
        Ok(true)
    }
}

/// Parameters of discrete simulated bifurcation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbParams {
    /// Detuning frequency; the pump `a(t)` ramps linearly from 0 to `a0`.
    pub a0: f64,
    /// Coupling strength.
    pub c0: f64,
    pub dt: f64,
    pub steps: usize,
    pub noise_sigma0: f64,
}

pub const SB_KEYS: &[&str] = &["a0", "c0", "dt", "steps", "noise_sigma0"];

impl SbParams {
    /// Defaults with `c0 = a0 / (2 σ_J √n)`.
    pub fn defaults_for(inst: &IsingInstance) -> Result<Self, ParamError> {
        if inst.n() == 0 {
            return Err(ParamError::EmptyInstance);
        }
        let a0 = 1.0;
        Ok(SbParams {
            a0,
            c0: a0 / (2.0 * inst.coupling_rms() * (inst.n() as f64).sqrt()),
            dt: 0.5,
            steps: 4000,
            noise_sigma0: 0.1,
        })
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (key, value) in [("a0", self.a0), ("c0", self.c0), ("dt", self.dt), ("noise_sigma0", self.noise_sigma0)] {
            if !value.is_finite() {
                return Err(ParamError::OutOfRange { key, value, reason: "must be finite" });
            }
        }
        if self.a0 <= 0.0 {
            return Err(ParamError::OutOfRange { key: "a0", value: self.a0, reason: "must be > 0" });
        }
        if self.dt <= 0.0 {
            return Err(ParamError::OutOfRange { key: "dt", value: self.dt, reason: "must be > 0" });
        }
        if self.noise_sigma0 < 0.0 {
            return Err(ParamError::OutOfRange {
                key: "noise_sigma0",
                value: self.noise_sigma0,
                reason: "must be >= 0",
            });
        }
        if self.steps == 0 {
            return Err(ParamError::OutOfRange { key: "steps", value: 0.0, reason: "must be >= 1" });
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        self.dt * self.steps as f64
    }

    fn set(&mut self, key: &str, value: &str) -> Result<bool, ParamError> {
        match key {
            "a0" => self.a0 = parse_value(key, value)?,
            "c0" => self.c0 = parse_value(key, value)?,
            "dt" => self.dt = parse_value(key, value)?,
            "steps" => self.steps = parse_value(key, value)?,
            "noise_sigma0" => self.noise_sigma0 = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ParamError> {
    value
        .trim()
        .parse()
        .map_err(|_| ParamError::BadValue { key: key.to_string(), value: value.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SolverParams {
    Cim(CimParams),
    Sb(SbParams),
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            SolverParams::Cim(p) => p.validate(),
            SolverParams::Sb(p) => p.validate(),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            SolverParams::Cim(p) => p.steps,
            SolverParams::Sb(p) => p.steps,
        }
    }

    pub fn cim(&self) -> Option<&CimParams> {
        match self {
            SolverParams::Cim(p) => Some(p),
            SolverParams::Sb(_) => None,
        }
    }

    pub fn sb(&self) -> Option<&SbParams> {
        match self {
            SolverParams::Sb(p) => Some(p),
            SolverParams::Cim(_) => None,
        }
    }

    /// Applies one `key=value` override. `variant` is only used for diagnostics.
    pub fn set(&mut self, variant: Variant, key: &str, value: &str) -> Result<(), ParamError> {
        let known = match self {
            SolverParams::Cim(p) => p.set(key, value)?,
            SolverParams::Sb(p) => p.set(key, value)?,
        };
        if known {
            Ok(())
        } else {
            Err(ParamError::UnknownKey {
                key: key.to_string(),
                variant,
                accepted: override_keys(variant).to_vec(),
            })
        }
    }

    /// Applies overrides of the form `key=value`, then validates.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, variant: Variant, overrides: &[S]) -> Result<(), ParamError> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o.split_once('=').ok_or_else(|| ParamError::Malformed(o.to_string()))?;
            self.set(variant, key.trim(), value)?;
        }
        self.validate()
    }
}

impl fmt::Display for SolverParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverParams::Cim(p) => write!(
                f,
                "p_end={} alpha={} beta={} zeta={} c={} k={} dt={} steps={} noise_sigma0={} noise_per_step={} amplitude_clamp={}",
                p.p_end, p.alpha, p.beta, p.zeta, p.c, p.k, p.dt, p.steps, p.noise_sigma0, p.noise_per_step, p.amplitude_clamp
            ),
            SolverParams::Sb(p) => write!(
                f,
                "a0={} c0={} dt={} steps={} noise_sigma0={}",
                p.a0, p.c0, p.dt, p.steps, p.noise_sigma0
            ),
        }
    }
}

/// Override keys accepted for `variant`.
pub fn override_keys(variant: Variant) -> &'static [&'static str] {
    match variant {
        Variant::Dsb => SB_KEYS,
        _ => CIM_KEYS,
    }
}

/// Documented defaults for `variant`, with the coupling strength scaled to `inst`.
pub fn default_params(variant: Variant, inst: &IsingInstance) -> Result<SolverParams, ParamError> {
    Ok(match variant {
        Variant::Dsb => SolverParams::Sb(SbParams::defaults_for(inst)?),
        _ => SolverParams::Cim(CimParams::defaults_for(variant, inst)?),
    })
}
