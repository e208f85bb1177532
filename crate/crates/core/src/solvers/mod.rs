//! Dynamical Ising machines.
//!
//! Three coherent-Ising-machine emulations (CAC, CFC, SFC) integrated with
//! explicit Euler, and discrete simulated bifurcation (dSB) integrated with
//! symplectic Euler. Every variant is driven by the negative energy gradient
//! of the instance,
//!
//! ```text
//! g_i(v) = -(h_i + Σ_j J_ij v_j)
//! ```
//!
//! evaluated at the soft spins `x` (CIM family) or at `sgn(x)` (dSB), so that
//! the amplitudes settle along the direction that lowers `E(z)`.
//!
//! A shot is a pure function of `(variant, instance, params, seed)`.

mod cim;
mod dsb;
mod params;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cim::{step_cac, step_cfc, step_sfc, ERROR_MAX, ERROR_MIN};
pub use dsb::step_dsb;
pub use params::{
    default_params, override_keys, CimParams, ParamError, SbParams, SolverParams, CIM_KEYS, SB_KEYS, ZETA_SCALE,
};

use crate::model::{IsingInstance, SpinConfig};

/// Random stream used for everything seeded inside a shot.
pub type ShotRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Chaotic amplitude control.
    Cac,
    /// Chaotic feedback control.
    Cfc,
    /// Separated feedback control.
    Sfc,
    /// Discrete simulated bifurcation.
    Dsb,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Cac, Variant::Cfc, Variant::Sfc, Variant::Dsb];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cac => "cac",
            Variant::Cfc => "cfc",
            Variant::Sfc => "sfc",
            Variant::Dsb => "dsb",
        }
    }

    pub fn is_cim(self) -> bool {
        self != Variant::Dsb
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cac" => Ok(Variant::Cac),
            "cfc" => Ok(Variant::Cfc),
            "sfc" => Ok(Variant::Sfc),
            "dsb" => Ok(Variant::Dsb),
            other => Err(format!("unknown variant '{other}' (expected cac, cfc, sfc or dsb)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("{variant} diverged at step {step}: non-finite state")]
    Divergence { variant: Variant, step: usize },
    #[error("state has {found} entries, instance has {expected} spins")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pump schedule needs t_total > 0, got {0}")]
    NonPositiveDuration(f64),
    #[error("pump schedule time {t} outside [0, {t_total}]")]
    TimeOutOfRange { t: f64, t_total: f64 },
}

/// Linear ramp `end_value · t / t_total`.
pub fn pump_schedule(t: f64, t_total: f64, end_value: f64) -> Result<f64, SolverError> {
    // also rejects NaN
    if t_total.is_nan() || t_total <= 0.0 {
        return Err(SolverError::NonPositiveDuration(t_total));
    }
    if !(0.0..=t_total).contains(&t) {
        return Err(SolverError::TimeOutOfRange { t, t_total });
    }
    Ok(ramp(t, t_total, end_value))
}

/// Ramp used inside the integrators; saturates past `t_total`.
pub(crate) fn ramp(t: f64, t_total: f64, end_value: f64) -> f64 {
    end_value * (t / t_total).clamp(0.0, 1.0)
}

/// Continuous variables of one trajectory.
///
/// `e` holds the error variables of the CIM variants and `momentum` the dSB
/// momenta; the unused one stays at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub momentum: Vec<f64>,
    pub t: f64,
    pub step_index: usize,
    drive: Vec<f64>,
    aux: Vec<f64>,
}

impl SolverState {
    pub fn new(x: Vec<f64>, e: Vec<f64>, momentum: Vec<f64>) -> Self {
        let n = x.len();
        assert!(e.len() == n && momentum.len() == n, "state vectors must share a length");
        SolverState { x, e, momentum, t: 0.0, step_index: 0, drive: vec![0.0; n], aux: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.e).chain(&self.momentum).all(|v| v.is_finite())
    }

    /// The Z2 image of this state: amplitudes, momenta and (for SFC, whose
    /// error variable tracks a signed field) error variables are negated.
    pub fn negated(&self, variant: Variant) -> Self {
        let mut out = self.clone();
        out.x.iter_mut().for_each(|v| *v = -*v);
        out.momentum.iter_mut().for_each(|v| *v = -*v);
        if variant == Variant::Sfc {
            out.e.iter_mut().for_each(|v| *v = -*v);
        }
        out
    }

    /// Moves entry `i` to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let apply = |v: &[f64]| {
            let mut out = vec![0.0; v.len()];
            for (i, &p) in perm.iter().enumerate() {
                out[p] = v[i];
            }
            out
        };
        SolverState { x: apply(&self.x), e: apply(&self.e), momentum: apply(&self.momentum), ..self.clone() }
    }

    fn check(&self, inst: &IsingInstance) -> Result<(), SolverError> {
        if self.n() != inst.n() || self.drive.len() != inst.n() {
            return Err(SolverError::DimensionMismatch { expected: inst.n(), found: self.n() });
        }
        Ok(())
    }

    fn finish_step(&mut self, variant: Variant, dt: f64) -> Result<(), SolverError> {
        if !self.is_finite() {
            return Err(SolverError::Divergence { variant, step: self.step_index });
        }
        self.t += dt;
        self.step_index += 1;
        Ok(())
    }
}

/// Writes `g_i = -(h_i + Σ_j J_ij v_j)` into `out`.
pub(crate) fn drive_field(inst: &IsingInstance, v: &[f64], out: &mut [f64]) {
    inst.coupling_product(v, out);
    for (o, h) in out.iter_mut().zip(inst.fields()) {
        *o = -(h + *o);
    }
}

pub(crate) mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1e3))
    }
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub config: SpinConfig,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_energy_before_descent: Option<f64>,
    pub steps_run: usize,
    #[serde(rename = "wall_ms", with = "duration_ms")]
    pub wall_time: Duration,
    pub seed: u64,
}

impl ShotResult {
    /// Equality on everything but wall time.
    pub fn same_outcome(&self, other: &ShotResult) -> bool {
        self.config == other.config
            && self.energy.to_bits() == other.energy.to_bits()
            && self.raw_energy_before_descent.map(f64::to_bits) == other.raw_energy_before_descent.map(f64::to_bits)
            && self.steps_run == other.steps_run
            && self.seed == other.seed
    }
}

/// A variant bound to an instance and a validated parameter set.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    variant: Variant,
    inst: &'a IsingInstance,
    params: SolverParams,
}

impl<'a> Solver<'a> {
    pub fn new(variant: Variant, inst: &'a IsingInstance, params: SolverParams) -> Result<Self, SolverError> {
        if inst.n() == 0 {
            return Err(ParamError::EmptyInstance.into());
        }
        match (variant.is_cim(), &params) {
            (true, SolverParams::Cim(_)) | (false, SolverParams::Sb(_)) => {}
            (true, _) => return Err(ParamError::WrongFamily { variant, expected: "CIM" }.into()),
            (false, _) => return Err(ParamError::WrongFamily { variant, expected: "SB" }.into()),
        }
        params.validate()?;
        Ok(Solver { variant, inst, params })
    }

    pub fn with_defaults(variant: Variant, inst: &'a IsingInstance) -> Result<Self, SolverError> {
        Self::new(variant, inst, default_params(variant, inst)?)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn instance(&self) -> &IsingInstance {
        self.inst
    }

    /// `x ~ N(0, noise_sigma0²)` i.i.d.; `e = 1` for CAC/CFC, `e = 0` for SFC; zero momenta.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> SolverState {
        let n = self.inst.n();
        let sigma = match &self.params {
            SolverParams::Cim(p) => p.noise_sigma0,
            SolverParams::Sb(p) => p.noise_sigma0,
        };
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        let x: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        let e0 = match self.variant {
            Variant::Cac | Variant::Cfc => 1.0,
            Variant::Sfc | Variant::Dsb => 0.0,
        };
        SolverState::new(x, vec![e0; n], vec![0.0; n])
    }

    /// One deterministic integration step.
    pub fn step(&self, state: &mut SolverState) -> Result<(), SolverError> {
        match (self.variant, &self.params) {
            (Variant::Cac, SolverParams::Cim(p)) => step_cac(state, self.inst, p, p.dt),
            (Variant::Cfc, SolverParams::Cim(p)) => step_cfc(state, self.inst, p, p.dt),
            (Variant::Sfc, SolverParams::Cim(p)) => step_sfc(state, self.inst, p, p.dt),
            (Variant::Dsb, SolverParams::Sb(p)) => step_dsb(state, self.inst, p, p.dt),
            _ => unreachable!("family checked in Solver::new"),
        }
    }

    /// Runs the remaining steps of the schedule, calling `observe` after each one.
    pub fn integrate<R: Rng + ?Sized>(
        &self,
        state: &mut SolverState,
        rng: &mut R,
        mut observe: impl FnMut(&SolverState),
    ) -> Result<(), SolverError> {
        state.check(self.inst)?;
        let steps = self.params.steps();
        let forcing = match &self.params {
            SolverParams::Cim(p) if p.noise_per_step > 0.0 => {
                Some((Normal::new(0.0, p.noise_per_step * p.dt.sqrt()).expect("validated"), p.amplitude_clamp))
            }
            _ => None,
        };
        while state.step_index < steps {
            self.step(state)?;
            if let Some((normal, clamp)) = &forcing {
                for x in &mut state.x {
                    *x = (*x + normal.sample(rng)).clamp(-clamp, *clamp);
                }
            }
            observe(state);
        }
        Ok(())
    }

    /// Binarizes by sign; exact zeros draw a fair ±1 from `rng`.
    pub fn binarize<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> SpinConfig {
        let spins = x
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    1
                } else if v < 0.0 {
                    -1
                } else if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                }
            })
            .collect();
        SpinConfig::new(spins).expect("spins are ±1")
    }

    /// Integrates from an explicit initial state. `seed` feeds the per-step
    /// forcing and tie-breaking at binarization.
    pub fn run_from(&self, mut state: SolverState, seed: u64) -> Result<ShotResult, SolverError> {
        let started = Instant::now();
        let mut rng = ShotRng::seed_from_u64(seed);
        self.finish(&mut state, &mut rng, seed, started)
    }

    pub fn run_shot(&self, seed: u64) -> Result<ShotResult, SolverError> {
        let started = Instant::now();
        let mut rng = ShotRng::seed_from_u64(seed);
        let mut state = self.initial_state(&mut rng);
        self.finish(&mut state, &mut rng, seed, started)
    }

    fn finish(
        &self,
        state: &mut SolverState,
        rng: &mut ShotRng,
        seed: u64,
        started: Instant,
    ) -> Result<ShotResult, SolverError> {
        self.integrate(state, rng, |_| {})?;
        let config = Self::binarize(&state.x, rng);
        let energy = self.inst.energy(&config).expect("dimension checked");
        Ok(ShotResult {
            config,
            energy,
            raw_energy_before_descent: None,
            steps_run: state.step_index,
            wall_time: started.elapsed(),
            seed,
        })
    }
}

/// One seeded trajectory of `variant` on `inst`.
pub fn run_shot(
    variant: Variant,
    inst: &IsingInstance,
    params: &SolverParams,
    seed: u64,
) -> Result<ShotResult, SolverError> {
    Solver::new(variant, inst, *params)?.run_shot(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> IsingInstance {
        IsingInstance::new(vec![0.0; n], (0..n).map(|i| (i, (i + 1) % n, -1.0)), 0.0).unwrap()
    }

    #[test]
    fn pump_schedule_examples() {
        assert_eq!(pump_schedule(0.0, 10.0, 2.0).unwrap(), 0.0);
        assert_eq!(pump_schedule(10.0, 10.0, 1.0).unwrap(), 1.0);
        assert_eq!(pump_schedule(5.0, 10.0, 2.0).unwrap(), 1.0);
        assert_eq!(pump_schedule(1.0, 0.0, 1.0), Err(SolverError::NonPositiveDuration(0.0)));
        assert!(pump_schedule(1.0, -2.0, 1.0).is_err());
        assert!(matches!(pump_schedule(11.0, 10.0, 1.0), Err(SolverError::TimeOutOfRange { .. })));
    }

    #[test]
    fn variant_parsing() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.to_string().to_uppercase().parse::<Variant>().unwrap(), v);
        }
        assert!("sb".parse::<Variant>().is_err());
    }

    #[test]
    fn single_spin_aligns_against_field() {
        let inst = IsingInstance::new(vec![1.0], [], 0.25).unwrap();
        for v in Variant::ALL {
            let p = default_params(v, &inst).unwrap();
            for seed in 0..20 {
                let shot = run_shot(v, &inst, &p, seed).unwrap();
                assert_eq!(shot.config.spins(), &[-1], "{v} seed {seed}");
                assert_eq!(shot.energy, -0.75);
            }
        }
    }

    #[test]
    fn shots_are_deterministic() {
        let inst = ring(8);
        for v in Variant::ALL {
            let p = default_params(v, &inst).unwrap();
            let a = run_shot(v, &inst, &p, 99).unwrap();
            let b = run_shot(v, &inst, &p, 99).unwrap();
            assert!(a.same_outcome(&b), "{v}");
            assert_eq!(a.steps_run, p.steps());
        }
    }

    #[test]
    fn ferro_ring_shots_reach_ground() {
        let inst = ring(8);
        for v in Variant::ALL {
            let p = default_params(v, &inst).unwrap();
            let hits = (0..100).filter(|&s| run_shot(v, &inst, &p, s).unwrap().energy == -8.0).count();
            assert!(hits >= 90, "{v}: {hits}/100");
        }
    }

    #[test]
    fn wrong_family_is_rejected() {
        let inst = ring(4);
        let sb = default_params(Variant::Dsb, &inst).unwrap();
        let cim = default_params(Variant::Cac, &inst).unwrap();
        assert!(matches!(run_shot(Variant::Cfc, &inst, &sb, 0), Err(SolverError::Params(ParamError::WrongFamily { .. }))));
        assert!(matches!(run_shot(Variant::Dsb, &inst, &cim, 0), Err(SolverError::Params(ParamError::WrongFamily { .. }))));
    }

    #[test]
    fn zero_steps_is_an_error() {
        let inst = ring(4);
        let mut p = default_params(Variant::Cac, &inst).unwrap();
        p.apply_overrides(Variant::Cac, &["steps=1"]).unwrap();
        if let SolverParams::Cim(c) = &mut p {
            c.steps = 0;
        }
        assert!(matches!(run_shot(Variant::Cac, &inst, &p, 0), Err(SolverError::Params(ParamError::OutOfRange { key: "steps", .. }))));
    }

    #[test]
    fn divergence_names_the_step() {
        // a huge positive gain without clamping headroom overflows within a few steps
        let inst = ring(4);
        let mut p = default_params(Variant::Sfc, &inst).unwrap();
        p.apply_overrides(Variant::Sfc, &["amplitude_clamp=1e300", "p_end=1e300", "dt=1", "steps=50"]).unwrap();
        let solver = Solver::new(Variant::Sfc, &inst, p).unwrap();
        let state = SolverState::new(vec![1.0; 4], vec![0.0; 4], vec![0.0; 4]);
        match solver.run_from(state, 0) {
            Err(SolverError::Divergence { variant: Variant::Sfc, step }) => assert!(step < 50),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn binarize_zero_uses_stream() {
        let mut rng = ShotRng::seed_from_u64(3);
        let c = Solver::binarize(&[0.5, -0.1, 0.0], &mut rng);
        assert_eq!(&c.spins()[..2], &[1, -1]);
        let ups = (0..200)
            .filter(|s| Solver::binarize(&[0.0], &mut ShotRng::seed_from_u64(*s)).get(0) == 1)
            .count();
        assert!((60..140).contains(&ups), "{ups}");
    }

    #[test]
    fn per_step_noise_is_seeded_and_clamped() {
        let inst = ring(6);
        let mut p = default_params(Variant::Cfc, &inst).unwrap();
        p.apply_overrides(Variant::Cfc, &["noise_per_step=0.5", "steps=200"]).unwrap();
        let solver = Solver::new(Variant::Cfc, &inst, p).unwrap();
        let a = solver.run_shot(5).unwrap();
        let b = solver.run_shot(5).unwrap();
        assert!(a.same_outcome(&b));
        let mut rng = ShotRng::seed_from_u64(5);
        let mut state = solver.initial_state(&mut rng);
        solver
            .integrate(&mut state, &mut rng, |s| assert!(s.x.iter().all(|v| v.abs() <= 1.5)))
            .unwrap();
    }
}
