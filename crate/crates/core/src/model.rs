//! Ising problem representation.
//!
//! The energy of a spin configuration `z ∈ {-1, +1}^n` is
//!
//! ```text
//! E(z) = offset + Σ_i h_i z_i + Σ_{i<j} J_ij z_i z_j
//! ```
//!
//! Couplings are stored once per unordered pair (upper triangle) and mirrored
//! into a compressed row layout so the dynamics and the local-search code can
//! evaluate symmetric products `(J v)_i = Σ_{j≠i} J_ij v_j` in `O(nnz)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("configuration has {found} spins, instance has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spin index {index} out of range for {n} spins")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("spin value {value} at position {index} is not ±1")]
    InvalidSpin { index: usize, value: i8 },
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("QUBO matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("QUBO entry ({row}, {col}) is not finite")]
    NonFiniteQubo { row: usize, col: usize },
    #[error("QUBO constant is not finite")]
    NonFiniteConstant,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// A single broken instance invariant, as reported by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    FieldLength { expected: usize, found: usize },
    NonFiniteField { index: usize },
    DiagonalCoupling { entry: usize, index: usize },
    CouplingOutOfRange { entry: usize, i: usize, j: usize },
    DuplicatePair { entry: usize, i: usize, j: usize },
    NonFiniteCoupling { entry: usize },
    NonFiniteOffset,
    InvalidR { entry_r: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FieldLength { expected, found } => {
                write!(f, "field vector has length {found}, expected {expected}")
            }
            Violation::NonFiniteField { index } => write!(f, "non-finite field at index {index}"),
            Violation::DiagonalCoupling { entry, index } => {
                write!(f, "diagonal coupling at entry {entry} (spin {index})")
            }
            Violation::CouplingOutOfRange { entry, i, j } => {
                write!(f, "coupling index out of range at entry {entry} ({i}, {j})")
            }
            Violation::DuplicatePair { entry, i, j } => {
                write!(f, "duplicate coupling pair at entry {entry} ({i}, {j})")
            }
            Violation::NonFiniteCoupling { entry } => {
                write!(f, "non-finite coupling at entry {entry}")
            }
            Violation::NonFiniteOffset => write!(f, "non-finite offset"),
            Violation::InvalidR { entry_r } => write!(f, "metadata r = {entry_r} must be >= 1"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceMetadata {
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond_length: Option<f64>,
    /// Variational expansion parameter of the fermion-to-spin mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissociation_limit: Option<f64>,
}

/// Unvalidated instance parts, the form instances take before [`validate`].
///
/// Couplings are `(i, j, J_ij)` triples; `(j, i)` with `j > i` is accepted and
/// normalized, but an unordered pair may appear only once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawInstance {
    pub n: usize,
    pub h: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    pub offset: f64,
    pub metadata: InstanceMetadata,
}

/// Reports every invariant violation of `raw`.
pub fn validate(raw: &RawInstance) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if raw.h.len() != raw.n {
        out.push(Violation::FieldLength { expected: raw.n, found: raw.h.len() });
    }
    for (index, v) in raw.h.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFiniteField { index });
        }
    }
    let mut seen = BTreeMap::new();
    for (entry, &(i, j, v)) in raw.couplings.iter().enumerate() {
        if !v.is_finite() {
            out.push(Violation::NonFiniteCoupling { entry });
        }
        if i == j {
            out.push(Violation::DiagonalCoupling { entry, index: i });
            continue;
        }
        if i >= raw.n || j >= raw.n {
            out.push(Violation::CouplingOutOfRange { entry, i, j });
            continue;
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key, entry).is_some() {
            out.push(Violation::DuplicatePair { entry, i: key.0, j: key.1 });
        }
    }
    if !raw.offset.is_finite() {
        out.push(Violation::NonFiniteOffset);
    }
    if let Some(r) = raw.metadata.r {
        if r == 0 {
            out.push(Violation::InvalidR { entry_r: r });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// A ±1 spin assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self, ModelError> {
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, s)| s.abs() != 1) {
            return Err(ModelError::InvalidSpin { index, value });
        }
        Ok(SpinConfig(spins))
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfig(vec![1; n])
    }

    /// Bit `i` of `bits` set means spin `i` is `-1`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        SpinConfig((0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn to_bits(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < 0)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip(i);
        out
    }

    pub fn negated(&self) -> Self {
        SpinConfig(self.0.iter().map(|s| -s).collect())
    }

    /// `out[perm[i]] = self[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = vec![0; self.0.len()];
        for (i, &p) in perm.iter().enumerate() {
            out[p] = self.0[i];
        }
        SpinConfig(out)
    }
}

impl TryFrom<Vec<i8>> for SpinConfig {
    type Error = ModelError;
    fn try_from(v: Vec<i8>) -> Result<Self, Self::Error> {
        SpinConfig::new(v)
    }
}

impl From<SpinConfig> for Vec<i8> {
    fn from(c: SpinConfig) -> Self {
        c.0
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Symmetric coupling rows in compressed layout: row `i` lists `(j, J_ij)` for
/// every `j` coupled to `i`, both triangle halves included.
#[derive(Debug, Clone, PartialEq)]
struct Rows {
    start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Rows {
    fn build(n: usize, upper: &BTreeMap<(usize, usize), f64>) -> Self {
        let mut degree = vec![0usize; n];
        for &(i, j) in upper.keys() {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for d in &degree {
            start.push(start.last().unwrap() + d);
        }
        let nnz = start[n];
        let mut cols = vec![0; nnz];
        let mut vals = vec![0.0; nnz];
        let mut fill = start[..n].to_vec();
        // Upper keys arrive sorted by (i, j), so rows fill in column order.
        for (&(i, j), &v) in upper {
            cols[fill[j]] = i;
            vals[fill[j]] = v;
            fill[j] += 1;
        }
        for (&(i, j), &v) in upper {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        Rows { start, cols, vals }
    }
}

/// A validated Ising instance. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    h: Vec<f64>,
    upper: BTreeMap<(usize, usize), f64>,
    offset: f64,
    metadata: InstanceMetadata,
    rows: Rows,
}

impl IsingInstance {
    pub fn new(
        h: Vec<f64>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self, ModelError> {
        let n = h.len();
        Self::from_raw(RawInstance {
            n,
            h,
            couplings: couplings.into_iter().collect(),
            offset,
            metadata: InstanceMetadata::default(),
        })
    }

    pub fn from_raw(raw: RawInstance) -> Result<Self, ModelError> {
        validate(&raw).map_err(ModelError::Invalid)?;
        let upper: BTreeMap<_, _> = raw
            .couplings
            .into_iter()
            .map(|(i, j, v)| ((i.min(j), i.max(j)), v))
            .collect();
        let rows = Rows::build(raw.n, &upper);
        Ok(IsingInstance { h: raw.h, upper, offset: raw.offset, metadata: raw.metadata, rows })
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            n: self.n(),
            h: self.h.clone(),
            couplings: self.couplings().collect(),
            offset: self.offset,
            metadata: self.metadata.clone(),
        }
    }

    pub fn with_metadata(mut self, metadata: InstanceMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn n(&self) -> usize {
        self.h.len()
    }

    pub fn fields(&self) -> &[f64] {
        &self.h
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn metadata(&self) -> &InstanceMetadata {
        &self.metadata
    }

    /// Couplings as `(i, j, J_ij)` with `i < j`, sorted by `(i, j)`.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn coupling_count(&self) -> usize {
        self.upper.len()
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.upper.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Neighbors of spin `i` with their coupling values.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.rows.start[i], self.rows.start[i + 1]);
        self.rows.cols[a..b].iter().copied().zip(self.rows.vals[a..b].iter().copied())
    }

    /// Root-mean-square of the nonzero coupling magnitudes, 1 when there are none.
    pub fn coupling_rms(&self) -> f64 {
        let (sum, count) = self
            .upper
            .values()
            .filter(|v| **v != 0.0)
            .fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
        if count == 0 {
            1.0
        } else {
            (sum / count as f64).sqrt()
        }
    }

    /// Largest possible `|h_i| + Σ_j |J_ij|`, a bound on any local field.
    pub fn field_scale(&self) -> f64 {
        (0..self.n())
            .map(|i| self.h[i].abs() + self.neighbors(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `out_i = Σ_{j≠i} J_ij v_j`.
    pub fn coupling_product(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n());
        debug_assert_eq!(out.len(), self.n());
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.rows.start[i], self.rows.start[i + 1]);
            let mut acc = 0.0;
            for k in a..b {
                acc += self.rows.vals[k] * v[self.rows.cols[k]];
            }
            *o = acc;
        }
    }

    fn check(&self, cfg: &SpinConfig) -> Result<(), ModelError> {
        if cfg.len() != self.n() {
            return Err(ModelError::DimensionMismatch { expected: self.n(), found: cfg.len() });
        }
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<(), ModelError> {
        if i >= self.n() {
            return Err(ModelError::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    pub fn energy(&self, cfg: &SpinConfig) -> Result<f64, ModelError> {
        self.check(cfg)?;
        Ok(self.energy_unchecked(cfg.spins()))
    }

    pub(crate) fn energy_unchecked(&self, z: &[i8]) -> f64 {
        let linear: f64 = self.h.iter().zip(z).map(|(h, &s)| h * f64::from(s)).sum();
        let quadratic: f64 = self
            .upper
            .iter()
            .map(|(&(i, j), v)| v * f64::from(z[i] * z[j]))
            .sum();
        self.offset + linear + quadratic
    }

    /// `h_i + Σ_{j≠i} J_ij z_j`.
    pub fn local_field(&self, cfg: &SpinConfig, i: usize) -> Result<f64, ModelError> {
        self.check(cfg)?;
        self.check_index(i)?;
        Ok(self.local_field_unchecked(cfg.spins(), i))
    }

    pub(crate) fn local_field_unchecked(&self, z: &[i8], i: usize) -> f64 {
        self.h[i] + self.neighbors(i).map(|(j, v)| v * f64::from(z[j])).sum::<f64>()
    }

    /// Energy change `E(z with spin i flipped) - E(z) = -2 z_i · local_field_i`.
    pub fn flip_delta(&self, cfg: &SpinConfig, i: usize) -> Result<f64, ModelError> {
        Ok(-2.0 * f64::from(cfg.get_checked(self, i)?) * self.local_field(cfg, i)?)
    }

    /// Relabels spin `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let n = self.n();
        let mut h = vec![0.0; n];
        for (i, &p) in perm.iter().enumerate() {
            h[p] = self.h[i];
        }
        let couplings = self.couplings().map(|(i, j, v)| (perm[i], perm[j], v));
        Ok(IsingInstance::new(h, couplings, self.offset)?.with_metadata(self.metadata.clone()))
    }
}

impl SpinConfig {
    fn get_checked(&self, inst: &IsingInstance, i: usize) -> Result<i8, ModelError> {
        inst.check(self)?;
        inst.check_index(i)?;
        Ok(self.0[i])
    }
}

/// Maps `xᵀQx + constant` over `x ∈ {0,1}^n` to an Ising instance under
/// `x_i = (1 + z_i) / 2`. `Q` need not be symmetric.
pub fn qubo_to_ising(q: &[Vec<f64>], constant: f64) -> Result<IsingInstance, ModelError> {
    let n = q.len();
    for (row, r) in q.iter().enumerate() {
        if r.len() != n {
            return Err(ModelError::NonSquare { row, len: r.len(), expected: n });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteQubo { row, col });
        }
    }
    if !constant.is_finite() {
        return Err(ModelError::NonFiniteConstant);
    }
    let mut h = vec![0.0; n];
    let mut offset = constant;
    let mut couplings = Vec::new();
    for i in 0..n {
        // x_i² = x_i = (1 + z_i) / 2
        h[i] += q[i][i] / 2.0;
        offset += q[i][i] / 2.0;
        for j in i + 1..n {
            // x_i x_j = (1 + z_i + z_j + z_i z_j) / 4
            let w = (q[i][j] + q[j][i]) / 4.0;
            if w != 0.0 {
                h[i] += w;
                h[j] += w;
                offset += w;
                couplings.push((i, j, w));
            }
        }
    }
    IsingInstance::new(h, couplings, offset)
}
