//! Single-shot and multi-shot sampling protocols.
//!
//! An ensemble runs `shots` independent trajectories whose seeds are derived
//! from `(base_seed, shot_index)` alone, so the per-shot outcomes do not depend
//! on how the shots are scheduled across worker threads.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descent::steepest_descent;
use crate::model::IsingInstance;
use crate::oracle::{brute_force, OracleError};
use crate::solvers::{default_params, duration_ms, ShotResult, Solver, SolverError, SolverParams, Variant};

/// Default tolerance when comparing shot energies to a reference energy.
pub const HIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("a sampling plan needs at least one shot")]
    NoShots,
    #[error("worker limit must be at least 1")]
    NoWorkers,
    #[error("all {shots} shots diverged; first: {first}")]
    AllDiverged { shots: usize, first: SolverError },
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("no reference energy for '{label}' and {n} spins exceeds the oracle cap of {cap}")]
    NoReference { label: String, n: usize, cap: usize },
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of shot `shot_index`: the `(shot_index + 1)`-th output of a SplitMix64
/// generator started at `base_seed`.
pub fn split_seed(base_seed: u64, shot_index: u64) -> u64 {
    const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
    mix64(base_seed.wrapping_add(GAMMA.wrapping_mul(shot_index.wrapping_add(1))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub variant: Variant,
    pub params: SolverParams,
    pub shots: usize,
    pub base_seed: u64,
    pub apply_descent: bool,
    /// Threads used for the shots; `None` uses every available core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_limit: Option<usize>,
    pub hit_tolerance: f64,
}

impl SamplingPlan {
    pub fn new(variant: Variant, params: SolverParams, shots: usize, base_seed: u64) -> Self {
        SamplingPlan {
            variant,
            params,
            shots,
            base_seed,
            apply_descent: true,
            worker_limit: None,
            hit_tolerance: HIT_TOLERANCE,
        }
    }

    /// Plan with the variant's default parameters for `inst`.
    pub fn with_defaults(variant: Variant, inst: &IsingInstance, shots: usize, base_seed: u64) -> Result<Self, SamplerError> {
        let params = default_params(variant, inst).map_err(SolverError::from)?;
        Ok(Self::new(variant, params, shots, base_seed))
    }

    pub fn descent(mut self, on: bool) -> Self {
        self.apply_descent = on;
        self
    }

    pub fn workers(mut self, limit: Option<usize>) -> Self {
        self.worker_limit = limit;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.shots == 0 {
            return Err(SamplerError::NoShots);
        }
        if self.worker_limit == Some(0) {
            return Err(SamplerError::NoWorkers);
        }
        self.params.validate().map_err(SolverError::from)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub shot_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub variant: Variant,
    pub best: ShotResult,
    /// Index of `best` among the shots (first minimum in shot order).
    pub best_shot: usize,
    /// Per-shot final energies in shot order; `None` marks a diverged shot.
    pub energies: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_to_first_hit: Option<usize>,
    pub diverged: Vec<Divergence>,
    #[serde(rename = "total_wall_ms", with = "duration_ms")]
    pub total_wall_time: Duration,
    #[serde(rename = "per_shot_mean_wall_ms", with = "duration_ms")]
    pub per_shot_mean_wall_time: Duration,
}

impl EnsembleReport {
    pub fn shots(&self) -> usize {
        self.energies.len()
    }

    /// Mean of the non-diverged shot energies.
    pub fn mean_energy(&self) -> f64 {
        let ok: Vec<f64> = self.energies.iter().flatten().copied().collect();
        ok.iter().sum::<f64>() / ok.len() as f64
    }

    /// Shots whose energy is within `tol` of `reference` (or below it).
    pub fn hits(&self, reference: f64, tol: f64) -> usize {
        self.energies.iter().flatten().filter(|&&e| e <= reference + tol).count()
    }
}

/// 1-based index of the first shot with energy `<= reference + tol`.
pub fn samples_to_solution(report: &EnsembleReport, reference: f64, tol: f64) -> Option<usize> {
    report
        .energies
        .iter()
        .position(|e| e.is_some_and(|e| e <= reference + tol))
        .map(|i| i + 1)
}

fn one_shot(solver: &Solver<'_>, seed: u64, descent: bool) -> Result<ShotResult, SolverError> {
    let started = Instant::now();
    let mut shot = solver.run_shot(seed)?;
    if descent {
        let refined = steepest_descent(solver.instance(), &shot.config).expect("shot matches instance");
        shot.raw_energy_before_descent = Some(shot.energy);
        shot.config = refined.config;
        shot.energy = refined.energy;
        shot.wall_time = started.elapsed();
    }
    Ok(shot)
}

/// A single shot refined by steepest descent.
pub fn single_shot_plus_descent(
    inst: &IsingInstance,
    variant: Variant,
    params: &SolverParams,
    seed: u64,
) -> Result<ShotResult, SolverError> {
    let solver = Solver::new(variant, inst, *params)?;
    one_shot(&solver, seed, true)
}

pub fn run_ensemble(inst: &IsingInstance, plan: &SamplingPlan) -> Result<EnsembleReport, SamplerError> {
    plan.validate()?;
    let solver = Solver::new(plan.variant, inst, plan.params)?;
    let started = Instant::now();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(limit) = plan.worker_limit {
        builder = builder.num_threads(limit);
    }
    let pool = builder.build().map_err(|e| SamplerError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<ShotResult, SolverError>> = pool.install(|| {
        (0..plan.shots)
            .into_par_iter()
            .map(|k| one_shot(&solver, split_seed(plan.base_seed, k as u64), plan.apply_descent))
            .collect()
    });
    let total_wall_time = started.elapsed();

    let mut energies = Vec::with_capacity(plan.shots);
    let mut diverged = Vec::new();
    let mut first_error = None;
    let mut best: Option<(usize, ShotResult)> = None;
    for (k, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(shot) => {
                energies.push(Some(shot.energy));
                if best.as_ref().is_none_or(|(_, b)| shot.energy < b.energy) {
                    best = Some((k, shot));
                }
            }
            Err(e) => {
                energies.push(None);
                diverged.push(Divergence { shot_index: k, message: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    let Some((best_shot, best)) = best else {
        return Err(SamplerError::AllDiverged { shots: plan.shots, first: first_error.expect("shots > 0") });
    };

    let mut report = EnsembleReport {
        variant: plan.variant,
        best,
        best_shot,
        energies,
        reference_energy: inst.metadata().reference_energy,
        hit_count: None,
        samples_to_first_hit: None,
        diverged,
        total_wall_time,
        per_shot_mean_wall_time: total_wall_time / plan.shots as u32,
    };
    if let Some(reference) = report.reference_energy {
        report.hit_count = Some(report.hits(reference, plan.hit_tolerance));
        report.samples_to_first_hit = samples_to_solution(&report, reference, plan.hit_tolerance);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtsStats {
    pub shots: usize,
    #[serde(rename = "total_ms", with = "duration_ms")]
    pub total: Duration,
    #[serde(rename = "per_shot_mean_ms", with = "duration_ms")]
    pub per_shot_mean: Duration,
}

/// Wall-clock time of a full ensemble (integration, descent and aggregation).
pub fn measure_tts(inst: &IsingInstance, plan: &SamplingPlan) -> Result<(TtsStats, EnsembleReport), SamplerError> {
    let started = Instant::now();
    let report = run_ensemble(inst, plan)?;
    let total = started.elapsed();
    let stats = TtsStats { shots: plan.shots, total, per_shot_mean: total / plan.shots as u32 };
    Ok((stats, report))
}

/// Ground energy used as the hit target: supplied metadata first, the
/// exhaustive oracle otherwise.
pub fn reference_energy(inst: &IsingInstance) -> Result<f64, SamplerError> {
    if let Some(r) = inst.metadata().reference_energy {
        return Ok(r);
    }
    match brute_force(inst) {
        Ok(sol) => Ok(sol.ground_energy),
        Err(OracleError::TooLarge { n, cap }) => {
            Err(SamplerError::NoReference { label: inst.metadata().label.clone(), n, cap })
        }
    }
}

/// Settings shared by every row of a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub variants: Vec<Variant>,
    pub shots: usize,
    pub base_seed: u64,
    pub apply_descent: bool,
    pub worker_limit: Option<usize>,
    pub hit_tolerance: f64,
    /// `key=value` overrides applied to each variant's defaults; keys the
    /// variant does not know are skipped.
    pub overrides: Vec<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variants: Variant::ALL.to_vec(),
            shots: 100,
            base_seed: 0,
            apply_descent: true,
            worker_limit: None,
            hit_tolerance: HIT_TOLERANCE,
            overrides: Vec::new(),
        }
    }
}

/// One benchmark row: a variant over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: Variant,
    pub instances: usize,
    /// Samples-to-solution per instance in corpus order; `None` = never reached.
    pub samples_to_solution: Vec<Option<usize>>,
    pub solved: usize,
    /// Median with unsolved instances ranked above every solved one; `None`
    /// when at least half the corpus is unsolved.
    pub median_samples: Option<f64>,
    pub max_samples: Option<usize>,
    #[serde(rename = "mean_total_ms", with = "duration_ms")]
    pub mean_total: Duration,
    #[serde(rename = "mean_per_shot_ms", with = "duration_ms")]
    pub mean_per_shot: Duration,
}

/// Median of `values`, treating `None` as +∞.
pub fn median_samples(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.map_or(f64::INFINITY, |s| s as f64)).collect();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    let med = if m % 2 == 1 { v[m / 2] } else { (v[m / 2 - 1] + v[m / 2]) / 2.0 };
    med.is_finite().then_some(med)
}

/// Samples-to-solution and TTS of each variant over `corpus`.
pub fn benchmark(corpus: &[IsingInstance], config: &BenchConfig) -> Result<Vec<BenchRow>, SamplerError> {
    let references: Vec<f64> = corpus.iter().map(reference_energy).collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(config.variants.len());
    for &variant in &config.variants {
        let mut sts = Vec::with_capacity(corpus.len());
        let mut total = Duration::ZERO;
        let mut per_shot = Duration::ZERO;
        for (inst, &reference) in corpus.iter().zip(&references) {
            let mut params = default_params(variant, inst).map_err(SolverError::from)?;
            let known: Vec<&String> = config
                .overrides
                .iter()
                .filter(|o| {
                    let key = o.split_once('=').map_or(o.as_str(), |(k, _)| k).trim();
                    crate::solvers::override_keys(variant).contains(&key)
                })
                .collect();
            params.apply_overrides(variant, &known).map_err(SolverError::from)?;
            let mut plan = SamplingPlan::new(variant, params, config.shots, config.base_seed)
                .descent(config.apply_descent)
                .workers(config.worker_limit);
            plan.hit_tolerance = config.hit_tolerance;
            let (stats, report) = measure_tts(inst, &plan)?;
            sts.push(samples_to_solution(&report, reference, config.hit_tolerance));
            total += stats.total;
            per_shot += stats.per_shot_mean;
        }
        let count = corpus.len().max(1) as u32;
        rows.push(BenchRow {
            variant,
            instances: corpus.len(),
            solved: sts.iter().flatten().count(),
            median_samples: median_samples(&sts),
            max_samples: if sts.iter().all(Option::is_some) { sts.iter().flatten().max().copied() } else { None },
            samples_to_solution: sts,
            mean_total: total / count,
            mean_per_shot: per_shot / count,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceMetadata, SpinConfig};

    fn report_with(energies: &[f64]) -> EnsembleReport {
        EnsembleReport {
            variant: Variant::Cfc,
            best: ShotResult {
                config: SpinConfig::all_up(1),
                energy: energies.iter().copied().fold(f64::INFINITY, f64::min),
                raw_energy_before_descent: None,
                steps_run: 1,
                wall_time: Duration::ZERO,
                seed: 0,
            },
            best_shot: 0,
            energies: energies.iter().map(|&e| Some(e)).collect(),
            reference_energy: None,
            hit_count: None,
            samples_to_first_hit: None,
            diverged: vec![],
            total_wall_time: Duration::ZERO,
            per_shot_mean_wall_time: Duration::ZERO,
        }
    }

    fn ring(n: usize) -> IsingInstance {
        IsingInstance::new(vec![0.0; n], (0..n).map(|i| (i, (i + 1) % n, -1.0)), 0.0).unwrap()
    }

    #[test]
    fn samples_to_solution_examples() {
        let r = report_with(&[-3.0, -8.0, -8.0]);
        assert_eq!(samples_to_solution(&r, -8.0, 1e-9), Some(2));
        assert_eq!(samples_to_solution(&r, -9.0, 1e-9), None);
        assert_eq!(samples_to_solution(&r, -8.0, 10.0), Some(1));
    }

    #[test]
    fn split_seed_is_stable_and_distinct() {
        assert_eq!(split_seed(7, 3), split_seed(7, 3));
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|k| split_seed(42, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(split_seed(0, 0), split_seed(1, 0));
        // SplitMix64 reference output for state 0 advanced once
        assert_eq!(split_seed(0, 0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn ensemble_on_ferro_ring() {
        let inst = ring(8).with_metadata(InstanceMetadata { reference_energy: Some(-8.0), ..Default::default() });
        let plan = SamplingPlan::with_defaults(Variant::Cfc, &inst, 20, 5).unwrap().workers(Some(2));
        let report = run_ensemble(&inst, &plan).unwrap();
        assert_eq!(report.best.energy, -8.0);
        assert_eq!(report.shots(), 20);
        assert!(report.hit_count.unwrap() >= 18);
        assert_eq!(report.samples_to_first_hit, samples_to_solution(&report, -8.0, HIT_TOLERANCE));
        assert!(report.energies.iter().flatten().all(|e| *e >= report.best.energy));
        let raw = report.best.raw_energy_before_descent.unwrap();
        assert!(raw >= report.best.energy);
    }

    #[test]
    fn ensemble_is_reproducible() {
        let inst = ring(6);
        let plan = SamplingPlan::with_defaults(Variant::Dsb, &inst, 1, 11).unwrap();
        let a = run_ensemble(&inst, &plan).unwrap();
        let b = run_ensemble(&inst, &plan).unwrap();
        assert_eq!(a.energies, b.energies);
        assert!(a.best.same_outcome(&b.best));
    }

    #[test]
    fn single_shot_plus_descent_on_single_spin() {
        let inst = IsingInstance::new(vec![1.0], [], 0.0).unwrap();
        for v in Variant::ALL {
            let p = default_params(v, &inst).unwrap();
            for seed in 0..10 {
                let shot = single_shot_plus_descent(&inst, v, &p, seed).unwrap();
                assert_eq!(shot.energy, -1.0);
                assert!(shot.raw_energy_before_descent.unwrap() >= shot.energy);
            }
        }
    }

    #[test]
    fn divergence_is_recorded_and_total_divergence_fails() {
        let inst = ring(4);
        let mut params = default_params(Variant::Sfc, &inst).unwrap();
        params
            .apply_overrides(Variant::Sfc, &["amplitude_clamp=1e300", "p_end=1e300", "dt=1", "steps=50", "noise_sigma0=1"])
            .unwrap();
        let plan = SamplingPlan::new(Variant::Sfc, params, 3, 0);
        assert!(matches!(run_ensemble(&inst, &plan), Err(SamplerError::AllDiverged { shots: 3, .. })));
    }

    #[test]
    fn plan_validation() {
        let inst = ring(4);
        let plan = SamplingPlan::with_defaults(Variant::Cac, &inst, 0, 0).unwrap();
        assert_eq!(run_ensemble(&inst, &plan), Err(SamplerError::NoShots));
        let plan = SamplingPlan::with_defaults(Variant::Cac, &inst, 1, 0).unwrap().workers(Some(0));
        assert_eq!(run_ensemble(&inst, &plan), Err(SamplerError::NoWorkers));
    }

    #[test]
    fn median_treats_unsolved_as_infinite() {
        assert_eq!(median_samples(&[Some(3), Some(1), Some(2)]), Some(2.0));
        assert_eq!(median_samples(&[Some(3), None, Some(1), Some(2)]), Some(2.5));
        assert_eq!(median_samples(&[Some(3), None, None]), None);
        assert_eq!(median_samples(&[]), None);
    }

    #[test]
    fn reference_needs_oracle_or_metadata() {
        let big = IsingInstance::new(vec![0.0; 30], [], 0.0).unwrap();
        assert!(matches!(reference_energy(&big), Err(SamplerError::NoReference { n: 30, cap: 24, .. })));
        let tagged = big.with_metadata(InstanceMetadata { reference_energy: Some(-1.0), ..Default::default() });
        assert_eq!(reference_energy(&tagged).unwrap(), -1.0);
        assert_eq!(reference_energy(&ring(5)).unwrap(), -5.0);
    }

    #[test]
    fn benchmark_single_variant() {
        let corpus = vec![ring(6), ring(5)];
        let config = BenchConfig { variants: vec![Variant::Cfc], shots: 10, ..Default::default() };
        let rows = benchmark(&corpus, &config).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].instances, 2);
        assert_eq!(rows[0].solved, 2);
    }
}
