//! File formats.
//!
//! Instance document (JSON):
//!
//! ```text
//! {
//!   "n": 3,
//!   "h": [0.5, 0.0, -1.0],
//!   "J": [
//!     [0, 1, -1.0],
//!     [1, 2, 0.25]
//!   ],
//!   "offset": 0.0,
//!   "metadata": {"label":"h2","bond_length":0.74,"r":2,"reference_energy":-1.137}
//! }
//! ```
//!
//! [`serialize_instance`] emits exactly this layout: two-space indent, one
//! coupling triple per line sorted by `(i, j)`, `offset` always present, and
//! every real in shortest round-trip form. `metadata` keys appear in the order
//! label, bond_length, r, reference_energy, dissociation_limit, with absent
//! optional keys omitted.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{qubo_to_ising, InstanceMetadata, IsingInstance, ModelError, RawInstance};
use crate::sampler::EnsembleReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("'n' is {n} but 'h' has {len} entries")]
    LengthMismatch { n: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("profile: {0}")]
    Profile(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDocument {
    n: usize,
    h: Vec<f64>,
    #[serde(rename = "J", default)]
    couplings: Vec<(usize, usize, f64)>,
    #[serde(default)]
    offset: f64,
    #[serde(default)]
    metadata: InstanceMetadata,
}

pub fn parse_instance(text: &str) -> Result<IsingInstance, IoError> {
    let doc: InstanceDocument = serde_json::from_str(text)?;
    if doc.h.len() != doc.n {
        return Err(IoError::LengthMismatch { n: doc.n, len: doc.h.len() });
    }
    let raw = RawInstance { n: doc.n, h: doc.h, couplings: doc.couplings, offset: doc.offset, metadata: doc.metadata };
    Ok(IsingInstance::from_raw(raw)?)
}

fn real(v: f64) -> String {
    serde_json::to_string(&v).expect("finite reals serialize")
}

/// Canonical text form; see the module docs for the layout.
pub fn serialize_instance(inst: &IsingInstance) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"n\": {},", inst.n());
    let h: Vec<String> = inst.fields().iter().map(|&v| real(v)).collect();
    let _ = writeln!(out, "  \"h\": [{}],", h.join(", "));
    if inst.coupling_count() == 0 {
        out.push_str("  \"J\": [],\n");
    } else {
        out.push_str("  \"J\": [\n");
        let lines: Vec<String> = inst.couplings().map(|(i, j, v)| format!("    [{i}, {j}, {}]", real(v))).collect();
        out.push_str(&lines.join(",\n"));
        out.push_str("\n  ],\n");
    }
    let _ = writeln!(out, "  \"offset\": {},", real(inst.offset()));
    let meta = serde_json::to_string(inst.metadata()).expect("metadata serializes");
    let _ = writeln!(out, "  \"metadata\": {meta}");
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuboDocument {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub metadata: InstanceMetadata,
}

/// Parses a QUBO document (`{"Q": [[...]], "constant": c}`) into an Ising instance.
pub fn parse_qubo(text: &str) -> Result<IsingInstance, IoError> {
    let doc: QuboDocument = serde_json::from_str(text)?;
    Ok(qubo_to_ising(&doc.q, doc.constant)?.with_metadata(doc.metadata))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Instance path, relative to the manifest's directory unless absolute.
    pub instance: PathBuf,
    pub bond_length: f64,
    pub r: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub label: String,
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_curve: Option<Vec<(f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissociation_limit: Option<f64>,
}

impl SweepManifest {
    pub fn validate(&self) -> Result<(), IoError> {
        if self.entries.is_empty() {
            return Err(IoError::Manifest("no entries".into()));
        }
        let mut seen = BTreeSet::new();
        for (k, e) in self.entries.iter().enumerate() {
            if !e.bond_length.is_finite() {
                return Err(IoError::Manifest(format!("entry {k}: non-finite bond_length")));
            }
            if e.r == 0 {
                return Err(IoError::Manifest(format!("entry {k}: r must be >= 1")));
            }
            if !seen.insert((e.bond_length.to_bits(), e.r)) {
                return Err(IoError::Manifest(format!(
                    "entry {k}: duplicate (bond_length, r) = ({}, {})",
                    e.bond_length, e.r
                )));
            }
        }
        Ok(())
    }

    /// Reference-curve energy recorded at exactly `bond_length`.
    pub fn reference_at(&self, bond_length: f64) -> Option<f64> {
        self.reference_curve.as_ref()?.iter().find(|(b, _)| *b == bond_length).map(|p| p.1)
    }

    /// Resolves an entry's instance path against `base` (the manifest directory).
    pub fn instance_path(&self, entry: &ManifestEntry, base: &Path) -> PathBuf {
        if entry.instance.is_absolute() {
            entry.instance.clone()
        } else {
            base.join(&entry.instance)
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<SweepManifest, IoError> {
    let m: SweepManifest = serde_json::from_str(text)?;
    m.validate()?;
    Ok(m)
}

/// One row of an energy profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub bond_length: f64,
    pub r: u32,
    pub best_energy: Option<f64>,
    pub mean_energy: Option<f64>,
    /// Fraction of shots at the reference energy; empty without a reference.
    pub hit_rate: Option<f64>,
    pub wall_ms: Option<f64>,
    /// `ok`, or the reason the entry produced no data.
    pub status: String,
}

pub const PROFILE_HEADER: [&str; 7] =
    ["bond_length", "r", "best_energy", "mean_energy", "hit_rate", "wall_ms", "status"];

impl ProfilePoint {
    pub fn from_report(entry: &ManifestEntry, report: &EnsembleReport) -> Self {
        ProfilePoint {
            bond_length: entry.bond_length,
            r: entry.r,
            best_energy: Some(report.best.energy),
            mean_energy: Some(report.mean_energy()),
            hit_rate: report.hit_count.map(|h| h as f64 / report.shots() as f64),
            wall_ms: Some(report.total_wall_time.as_secs_f64() * 1e3),
            status: "ok".into(),
        }
    }

    pub fn failed(entry: &ManifestEntry, reason: &str) -> Self {
        ProfilePoint {
            bond_length: entry.bond_length,
            r: entry.r,
            best_energy: None,
            mean_energy: None,
            hit_rate: None,
            wall_ms: None,
            status: reason.replace(['\n', '\r'], " "),
        }
    }
}

/// Profile table, one row per manifest entry, ordered by `(r, bond_length)`.
/// `results` pairs with `manifest.entries` by position.
pub fn export_profile(
    manifest: &SweepManifest,
    results: &[Result<EnsembleReport, String>],
) -> Result<String, IoError> {
    if results.len() != manifest.entries.len() {
        return Err(IoError::Profile(format!(
            "{} results for {} manifest entries",
            results.len(),
            manifest.entries.len()
        )));
    }
    let points: Vec<ProfilePoint> = manifest
        .entries
        .iter()
        .zip(results)
        .map(|(entry, res)| match res {
            Ok(report) => ProfilePoint::from_report(entry, report),
            Err(reason) => ProfilePoint::failed(entry, reason),
        })
        .collect();
    write_profile(points)
}

/// Writes points as the profile table, sorted by `(r, bond_length)`.
pub fn write_profile(mut points: Vec<ProfilePoint>) -> Result<String, IoError> {
    points.sort_by(|a, b| a.r.cmp(&b.r).then(a.bond_length.total_cmp(&b.bond_length)));
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &points {
        w.serialize(p)?;
    }
    if points.is_empty() {
        w.write_record(PROFILE_HEADER)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Profile(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_profile(text: &str) -> Result<Vec<ProfilePoint>, IoError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != PROFILE_HEADER {
        return Err(IoError::Profile(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// i.i.d. standard-normal couplings on every pair, no fields.
    SpinGlass,
    /// `J = -1` on the edges of a ring.
    FerroRing,
    /// `J = -1` on every pair.
    FerroComplete,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::SpinGlass => "spin_glass",
            InstanceKind::FerroRing => "ferro_ring",
            InstanceKind::FerroComplete => "ferro_complete",
        }
    }
}

impl FromStr for InstanceKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spin_glass" => Ok(InstanceKind::SpinGlass),
            "ferro_ring" => Ok(InstanceKind::FerroRing),
            "ferro_complete" => Ok(InstanceKind::FerroComplete),
            other => Err(format!("unknown kind '{other}' (expected spin_glass, ferro_ring or ferro_complete)")),
        }
    }
}

pub fn generate_random_instance(kind: InstanceKind, n: usize, seed: u64) -> IsingInstance {
    let pairs = (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)));
    let couplings: Vec<(usize, usize, f64)> = match kind {
        InstanceKind::SpinGlass => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            pairs.map(|(i, j)| (i, j, StandardNormal.sample(&mut rng))).collect()
        }
        InstanceKind::FerroComplete => pairs.map(|(i, j)| (i, j, -1.0)).collect(),
        InstanceKind::FerroRing => match n {
            0 | 1 => vec![],
            2 => vec![(0, 1, -1.0)],
            _ => (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), -1.0)).collect(),
        },
    };
    let label = match kind {
        InstanceKind::SpinGlass => format!("{}_n{n}_s{seed}", kind.name()),
        _ => format!("{}_n{n}", kind.name()),
    };
    IsingInstance::new(vec![0.0; n], couplings, 0.0)
        .expect("generated instances are valid")
        .with_metadata(InstanceMetadata { label, ..Default::default() })
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn load_instance(path: &Path) -> Result<IsingInstance, IoError> {
    parse_instance(&read_text(path)?)
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    let file_err = |source| IoError::File { path: path.to_path_buf(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(file_err)?;
    tmp.write_all(contents).map_err(file_err)?;
    tmp.as_file().sync_all().map_err(file_err)?;
    tmp.persist(path).map_err(|e| file_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpinConfig;

    #[test]
    fn minimal_document() {
        let inst = parse_instance(r#"{"n":1,"h":[1.0],"J":[],"offset":0.0}"#).unwrap();
        assert_eq!(inst.n(), 1);
        assert_eq!(inst.fields(), &[1.0]);
        assert_eq!(inst.coupling_count(), 0);
    }

    #[test]
    fn diagonal_coupling_is_reported_by_entry() {
        let err = parse_instance(r#"{"n":2,"h":[0,0],"J":[[1,1,0.5]],"offset":0}"#).unwrap_err();
        assert!(err.to_string().contains("diagonal coupling at entry 0"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_instance("{\n  \"n\": 1,\n  \"h\": [1.0,]\n}").unwrap_err();
        match err {
            IoError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_instance(r#"{"n":1,"h":[1],"bogus":2}"#), Err(IoError::Syntax { .. })));
        assert!(matches!(parse_instance(r#"{"n":2,"h":[1]}"#), Err(IoError::LengthMismatch { n: 2, len: 1 })));
        assert!(matches!(parse_instance(r#"{"n":2,"h":[1,2],"J":[[0,1]]}"#), Err(IoError::Syntax { .. })));
    }

    #[test]
    fn canonical_layout() {
        let inst = IsingInstance::new(vec![0.5, 0.0, -1.0], [(1, 2, 0.25), (0, 1, -1.0)], 0.0)
            .unwrap()
            .with_metadata(InstanceMetadata { label: "t".into(), r: Some(2), ..Default::default() });
        let text = serialize_instance(&inst);
        assert_eq!(
            text,
            "{\n  \"n\": 3,\n  \"h\": [0.5, 0.0, -1.0],\n  \"J\": [\n    [0, 1, -1.0],\n    [1, 2, 0.25]\n  ],\n  \"offset\": 0.0,\n  \"metadata\": {\"label\":\"t\",\"r\":2}\n}\n"
        );
        assert_eq!(serialize_instance(&parse_instance(&text).unwrap()), text);
    }

    #[test]
    fn empty_couplings_and_offset_are_explicit() {
        let text = serialize_instance(&IsingInstance::new(vec![1.0], [], 0.0).unwrap());
        assert!(text.contains("\"J\": [],"));
        assert!(text.contains("\"offset\": 0.0"));
    }

    #[test]
    fn reals_round_trip_exactly() {
        let h = vec![0.1 + 0.2, 1e-300, -123456.789e10, std::f64::consts::PI];
        let inst = IsingInstance::new(h.clone(), [(0, 3, 1.0 / 3.0)], -2.0f64.sqrt()).unwrap();
        let back = parse_instance(&serialize_instance(&inst)).unwrap();
        assert_eq!(back, inst);
        let cfg = SpinConfig::new(vec![1, -1, 1, -1]).unwrap();
        assert_eq!(back.energy(&cfg).unwrap().to_bits(), inst.energy(&cfg).unwrap().to_bits());
    }

    #[test]
    fn qubo_document() {
        let inst = parse_qubo(r#"{"Q": [[1.0, 2.0], [0.0, -3.0]], "constant": 0.5}"#).unwrap();
        // x = (1, 1): 1 + 2 - 3 + 0.5
        assert_eq!(inst.energy(&SpinConfig::all_up(2)).unwrap(), 0.5);
        assert!(parse_qubo(r#"{"Q": [[1.0, 2.0]]}"#).is_err());
    }

    fn manifest(entries: &[(f64, u32)]) -> SweepManifest {
        SweepManifest {
            label: "m".into(),
            entries: entries
                .iter()
                .map(|&(b, r)| ManifestEntry { instance: format!("i_{b}_{r}.json").into(), bond_length: b, r })
                .collect(),
            reference_curve: Some(vec![(0.5, -1.0)]),
            dissociation_limit: None,
        }
    }

    #[test]
    fn manifest_validation() {
        assert!(manifest(&[(0.5, 2), (0.5, 3)]).validate().is_ok());
        assert!(manifest(&[(0.5, 2), (0.5, 2)]).validate().is_err());
        assert!(manifest(&[]).validate().is_err());
        assert!(manifest(&[(0.5, 0)]).validate().is_err());
        let m = manifest(&[(0.5, 2)]);
        assert_eq!(m.reference_at(0.5), Some(-1.0));
        assert_eq!(m.reference_at(0.6), None);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(parse_manifest(&text).unwrap(), m);
        assert!(parse_manifest(r#"{"label":"x","entries":[]}"#).is_err());
    }

    #[test]
    fn profile_rows_sort_by_r_then_bond_length() {
        let m = manifest(&[(1.5, 3), (0.5, 3), (1.0, 2)]);
        let results = vec![Err("boom".to_string()), Err("a\nb".to_string()), Err("c".to_string())];
        let text = export_profile(&m, &results).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], PROFILE_HEADER.join(","));
        let rows = parse_profile(&text).unwrap();
        let keys: Vec<(u32, f64)> = rows.iter().map(|p| (p.r, p.bond_length)).collect();
        assert_eq!(keys, vec![(2, 1.0), (3, 0.5), (3, 1.5)]);
        assert_eq!(rows[1].status, "a b");
        assert_eq!(rows[1].best_energy, None);
        assert!(export_profile(&m, &results[..2]).is_err());
    }

    #[test]
    fn profile_round_trip() {
        let points = vec![ProfilePoint {
            bond_length: 0.74,
            r: 2,
            best_energy: Some(-1.137_283_8),
            mean_energy: Some(-1.1),
            hit_rate: Some(0.97),
            wall_ms: Some(12.5),
            status: "ok".into(),
        }];
        let text = write_profile(points.clone()).unwrap();
        assert_eq!(parse_profile(&text).unwrap(), points);
        assert_eq!(write_profile(points).unwrap(), text);
    }

    #[test]
    fn generators() {
        let ring = generate_random_instance(InstanceKind::FerroRing, 5, 0);
        assert_eq!(ring.coupling_count(), 5);
        assert!(ring.couplings().all(|(_, _, v)| v == -1.0));
        assert_eq!(generate_random_instance(InstanceKind::FerroRing, 2, 0).coupling_count(), 1);

        let a = generate_random_instance(InstanceKind::SpinGlass, 10, 1);
        assert_eq!(a, generate_random_instance(InstanceKind::SpinGlass, 10, 1));
        assert_ne!(a, generate_random_instance(InstanceKind::SpinGlass, 10, 2));
        assert_eq!(a.coupling_count(), 45);
        assert_eq!(a.metadata().label, "spin_glass_n10_s1");

        assert_eq!(generate_random_instance(InstanceKind::FerroComplete, 6, 0).coupling_count(), 15);
        assert_eq!("ferro_ring".parse::<InstanceKind>().unwrap(), InstanceKind::FerroRing);
        assert!("ring".parse::<InstanceKind>().is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.json"), b"x").is_err());
    }
}
