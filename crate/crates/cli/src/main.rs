//! `qaia`: generate, solve, sweep, benchmark and verify Ising instances.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qaia::io::{
    self, export_profile, generate_random_instance, load_instance, parse_manifest, parse_qubo, serialize_instance,
    write_atomic, InstanceKind,
};
use qaia::oracle::brute_force;
use qaia::sampler::{benchmark, run_ensemble, BenchConfig, BenchRow, SamplingPlan, HIT_TOLERANCE};
use qaia::solvers::{default_params, override_keys, Variant, CIM_KEYS, SB_KEYS};
use qaia::{InstanceMetadata, IsingInstance};

fn override_help() -> String {
    format!(
        "Override a solver parameter (repeatable), e.g. --set dt=0.05.\n\
         CAC/CFC/SFC keys: {}.\n\
         dSB keys: {}.",
        CIM_KEYS.join(", "),
        SB_KEYS.join(", ")
    )
}

#[derive(Debug, Parser)]
#[command(name = "qaia", version, about = "Quantum-annealing-inspired Ising solvers", after_help = override_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a generated instance (spin_glass, ferro_ring or ferro_complete).
    Gen {
        kind: InstanceKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a sampling ensemble on one instance and write its report.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Cfc)]
        variant: VariantArg,
        #[command(flatten)]
        run: RunArgs,
        /// Report path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every entry of a sweep manifest and write the energy profile (CSV).
    Sweep {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Cfc)]
        variant: VariantArg,
        #[command(flatten)]
        run: RunArgs,
        /// Profile path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive ground states of a small instance.
    Exact {
        instance: PathBuf,
        /// Solution path (JSON); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples-to-solution and time-to-solution of each variant over a corpus.
    Bench {
        /// Instance files.
        instances: Vec<PathBuf>,
        /// Take the corpus from a sweep manifest instead.
        #[arg(long, conflicts_with = "instances")]
        manifest: Option<PathBuf>,
        /// Variants to benchmark (comma separated).
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [VariantArg::Cac, VariantArg::Cfc, VariantArg::Sfc, VariantArg::Dsb])]
        variants: Vec<VariantArg>,
        #[command(flatten)]
        run: RunArgs,
        /// Table path; `.json` writes the rows as JSON, anything else the text table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a QUBO document to an Ising instance.
    Convert {
        qubo: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value_t = 100)]
    shots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    descent: Toggle,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "set", value_name = "KEY=VALUE", help = override_help())]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Cac,
    Cfc,
    Sfc,
    Dsb,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Cac => Variant::Cac,
            VariantArg::Cfc => Variant::Cfc,
            VariantArg::Sfc => Variant::Sfc,
            VariantArg::Dsb => Variant::Dsb,
        }
    }
}

impl RunArgs {
    fn plan(&self, variant: Variant, inst: &IsingInstance) -> Result<SamplingPlan> {
        let mut params = default_params(variant, inst)?;
        params.apply_overrides(variant, &self.set)?;
        Ok(SamplingPlan::new(variant, params, self.shots, self.seed)
            .descent(matches!(self.descent, Toggle::On))
            .workers(self.workers))
    }
}

/// Writes to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Rejects `--set` keys that none of `variants` accepts.
fn check_overrides(set: &[String], variants: &[Variant]) -> Result<()> {
    for o in set {
        let key = o.split_once('=').map_or(o.as_str(), |(k, _)| k).trim();
        if !variants.iter().any(|&v| override_keys(v).contains(&key)) {
            let names: Vec<&str> = variants.iter().map(|v| v.name()).collect();
            bail!("unknown parameter '{key}' for {}", names.join(", "));
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<IsingInstance> {
    load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_solve(instance: &Path, variant: Variant, run: &RunArgs, out: Option<&Path>) -> Result<()> {
    let inst = load(instance)?;
    let plan = run.plan(variant, &inst)?;
    let report = run_ensemble(&inst, &plan)?;
    println!("{variant}: best energy {} (shot {} of {})", report.best.energy, report.best_shot + 1, report.shots());
    println!("best config {}", report.best.config);
    if let (Some(reference), Some(hits)) = (report.reference_energy, report.hit_count) {
        let verdict = if hits > 0 { "hit" } else { "miss" };
        println!("reference {reference}: {verdict} ({hits}/{} shots)", report.shots());
    }
    if !report.diverged.is_empty() {
        eprintln!("warning: {} of {} shots diverged", report.diverged.len(), report.shots());
    }
    if let Some(path) = out {
        emit(Some(path), &to_json(&report)?)?;
    }
    Ok(())
}

fn cmd_sweep(manifest_path: &Path, variant: Variant, run: &RunArgs, out: Option<&Path>) -> Result<()> {
    let text = io::read_text(manifest_path)?;
    let manifest = parse_manifest(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    check_overrides(&run.set, &[variant])?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut results = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let outcome = (|| -> Result<_> {
            let mut inst = load(&manifest.instance_path(entry, base))?;
            if inst.metadata().reference_energy.is_none() {
                if let Some(reference) = manifest.reference_at(entry.bond_length) {
                    let meta = InstanceMetadata { reference_energy: Some(reference), ..inst.metadata().clone() };
                    inst = inst.with_metadata(meta);
                }
            }
            Ok(run_ensemble(&inst, &run.plan(variant, &inst)?)?)
        })();
        if let Err(e) = &outcome {
            eprintln!("warning: entry r={} bond_length={}: {e:#}", entry.r, entry.bond_length);
        }
        results.push(outcome.map_err(|e| format!("{e:#}")));
    }
    let failed = results.iter().filter(|r| r.is_err()).count();
    emit(out, &export_profile(&manifest, &results)?)?;
    eprintln!("{}: {} entries, {failed} failed", manifest.label, manifest.entries.len());
    Ok(())
}

fn cmd_exact(instance: &Path, out: Option<&Path>) -> Result<()> {
    let inst = load(instance)?;
    let sol = brute_force(&inst)?;
    if out.is_some() {
        println!("ground energy {} ({} configs)", sol.ground_energy, sol.ground_configs.len());
    }
    emit(out, &to_json(&sol)?)
}

fn format_bench(rows: &[BenchRow]) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<8} {:>9} {:>8} {:>10} {:>8} {:>14} {:>16}",
        "variant", "instances", "solved", "median_sts", "max_sts", "mean_total_ms", "mean_per_shot_ms"
    );
    for r in rows {
        let _ = writeln!(
            t,
            "{:<8} {:>9} {:>8} {:>10} {:>8} {:>14.3} {:>16.4}",
            r.variant.name(),
            r.instances,
            r.solved,
            r.median_samples.map_or("inf".to_string(), |m| m.to_string()),
            r.max_samples.map_or("-".to_string(), |m| m.to_string()),
            r.mean_total.as_secs_f64() * 1e3,
            r.mean_per_shot.as_secs_f64() * 1e3,
        );
    }
    t
}

fn cmd_bench(
    instances: &[PathBuf],
    manifest: Option<&Path>,
    variants: &[Variant],
    run: &RunArgs,
    out: Option<&Path>,
) -> Result<()> {
    let paths: Vec<PathBuf> = match manifest {
        Some(path) => {
            let m = parse_manifest(&io::read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
            let base = path.parent().unwrap_or(Path::new("."));
            m.entries.iter().map(|e| m.instance_path(e, base)).collect()
        }
        None => instances.to_vec(),
    };
    if paths.is_empty() {
        bail!("bench needs at least one instance (positional paths or --manifest)");
    }
    check_overrides(&run.set, variants)?;
    let corpus: Vec<IsingInstance> = paths.iter().map(|p| load(p)).collect::<Result<_>>()?;
    let config = BenchConfig {
        variants: variants.to_vec(),
        shots: run.shots,
        base_seed: run.seed,
        apply_descent: matches!(run.descent, Toggle::On),
        worker_limit: run.workers,
        hit_tolerance: HIT_TOLERANCE,
        overrides: run.set.clone(),
    };
    let rows = benchmark(&corpus, &config)?;
    let table = format_bench(&rows);
    print!("{table}");
    if let Some(path) = out {
        let is_json = path.extension().is_some_and(|e| e == "json");
        emit(Some(path), &if is_json { to_json(&rows)? } else { table })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { kind, n, seed, out } => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            emit(out.as_deref(), &serialize_instance(&generate_random_instance(kind, n, seed)))
        }
        Command::Solve { instance, variant, run, out } => cmd_solve(&instance, variant.into(), &run, out.as_deref()),
        Command::Sweep { manifest, variant, run, out } => cmd_sweep(&manifest, variant.into(), &run, out.as_deref()),
        Command::Exact { instance, out } => cmd_exact(&instance, out.as_deref()),
        Command::Bench { instances, manifest, variants, run, out } => {
            let variants: Vec<Variant> = variants.into_iter().map(Variant::from).collect();
            cmd_bench(&instances, manifest.as_deref(), &variants, &run, out.as_deref())
        }
        Command::Convert { qubo, out } => {
            let text = io::read_text(&qubo)?;
            let inst = parse_qubo(&text).with_context(|| format!("parsing {}", qubo.display()))?;
            emit(out.as_deref(), &serialize_instance(&inst))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
