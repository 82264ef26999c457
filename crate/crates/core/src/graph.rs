//! The asymmetric migration matrix Γ and its spectral structure.
//!
//! Orientation: entry `(i, j)` is γ_ij, the flux **into** patch `i` **from**
//! patch `j`. The diagonal is forced to γ_jj = −Σ_{i≠j} γ_ij, so every
//! *column* of Γ sums to zero (the SIS literature often stores the
//! transpose). The support digraph has an edge `j → i` whenever γ_ij > 0.
//!
//! Indices are 0-based in the Rust API and 1-based in the JSON form.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex};

/// A single off-diagonal rate, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flux {
    pub to: usize,
    pub from: usize,
    pub rate: f64,
}

impl Flux {
    pub fn new(to: usize, from: usize, rate: f64) -> Self {
        Self { to, from, rate }
    }
}

/// Column-sum-zero migration matrix with an irreducible support graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MigrationSpec", into = "MigrationSpec")]
pub struct MigrationMatrix {
    n: usize,
    /// Row-major, diagonal included.
    entries: Vec<f64>,
}

impl MigrationMatrix {
    /// Builds Γ from off-diagonal fluxes, fills the diagonal and rejects
    /// reducible support graphs.
    pub fn new(n: usize, fluxes: &[Flux]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMigration(format!(
                "a migration matrix needs at least 2 patches, got {n}"
            )));
        }
        let m = Self::new_unchecked(n, fluxes)?;
        let unreachable = m.unreachable_patches();
        if !unreachable.is_empty() {
            return Err(Error::Reducible {
                unreachable: unreachable.into_iter().map(|i| i + 1).collect(),
            });
        }
        Ok(m)
    }

    /// Same as [`MigrationMatrix::new`] without the irreducibility check.
    /// Negative rates and malformed indices are still rejected.
    pub fn new_unchecked(n: usize, fluxes: &[Flux]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMigration("zero patches".into()));
        }
        let mut entries = vec![0.0; n * n];
        let mut seen = vec![false; n * n];
        for f in fluxes {
            if f.to >= n || f.from >= n {
                return Err(Error::InvalidMigration(format!(
                    "flux index ({}, {}) out of range for {n} patches",
                    f.to + 1,
                    f.from + 1
                )));
            }
            if f.to == f.from {
                return Err(Error::InvalidMigration(format!(
                    "self-flux on patch {} (diagonal is derived)",
                    f.to + 1
                )));
            }
            if !f.rate.is_finite() {
                return Err(Error::InvalidMigration(format!(
                    "non-finite flux into {} from {}",
                    f.to + 1,
                    f.from + 1
                )));
            }
            if f.rate < 0.0 {
                return Err(Error::NegativeFlux {
                    to: f.to + 1,
                    from: f.from + 1,
                    rate: f.rate,
                });
            }
            let k = f.to * n + f.from;
            if seen[k] {
                return Err(Error::InvalidMigration(format!(
                    "duplicate flux into {} from {}",
                    f.to + 1,
                    f.from + 1
                )));
            }
            seen[k] = true;
            entries[k] = f.rate;
        }
        for j in 0..n {
            let out: f64 = (0..n).filter(|&i| i != j).map(|i| entries[i * n + j]).sum();
            entries[j * n + j] = -out;
        }
        Ok(Self { n, entries })
    }

    /// Builds Γ from a dense matrix; supplied diagonal entries are ignored.
    pub fn from_offdiagonal(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut fluxes = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMigration(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if i != j && v != 0.0 {
                    fluxes.push(Flux::new(i, j, v));
                }
            }
        }
        Self::new(n, &fluxes)
    }

    /// The 1×1 zero matrix: a single patch without migration.
    pub fn isolated() -> Self {
        Self {
            n: 1,
            entries: vec![0.0],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Nonzero off-diagonal fluxes in row-major order.
    pub fn fluxes(&self) -> Vec<Flux> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j);
                if i != j && v > 0.0 {
                    out.push(Flux::new(i, j, v));
                }
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// Γx.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(g, v)| g * v).sum())
            .collect()
    }

    /// uᵀΓ with u the all-ones vector (column sums).
    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Multiplies every rate by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v * c).collect(),
        }
    }

    /// True iff the support digraph is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        self.unreachable_patches().is_empty()
    }

    /// Patches (0-based) that are not both reachable from and able to
    /// reach patch 0.
    pub fn unreachable_patches(&self) -> Vec<usize> {
        let n = self.n;
        // forward: j -> i when γ_ij > 0
        let fwd = self.reach(0, |from, to| self.get(to, from) > 0.0);
        let bwd = self.reach(0, |from, to| self.get(from, to) > 0.0);
        (0..n).filter(|&i| !(fwd[i] && bwd[i])).collect()
    }

    fn reach(&self, start: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..self.n {
                if v != u && !seen[v] && edge(u, v) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Positive generator of ker Γ: diagonal cofactors first, constrained
    /// linear solve as fallback.
    pub fn kernel_vector(&self) -> Result<KernelVector> {
        let tol = 1e-10 * self.inf_norm().max(f64::MIN_POSITIVE);
        if let Some(k) = self.kernel_by_cofactors() {
            if k.residual(self) <= tol {
                return Ok(k);
            }
        }
        let k = self.kernel_by_constrained_solve()?;
        if let Some(index) = k.raw.iter().position(|&d| d <= 0.0) {
            return Err(Error::ZeroKernelComponent { index: index + 1 });
        }
        let residual = k.residual(self);
        if residual > tol {
            return Err(Error::SingularBeyondRankOne { residual });
        }
        Ok(k)
    }

    /// δ_i = (−1)^{n−1} det(Γ with row i and column i removed). Returns
    /// `None` unless every component is finite and strictly positive.
    pub fn kernel_by_cofactors(&self) -> Option<KernelVector> {
        let n = self.n;
        if n == 1 {
            return Some(KernelVector::from_raw(vec![1.0], KernelSource::Cofactor));
        }
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let minor = DMatrix::from_fn(n - 1, n - 1, |r, c| {
                let r = if r >= i { r + 1 } else { r };
                let c = if c >= i { c + 1 } else { c };
                self.get(r, c)
            });
            raw.push(sign * linalg::determinant(&minor));
        }
        if raw.iter().all(|d| d.is_finite() && *d > 0.0) {
            Some(KernelVector::from_raw(raw, KernelSource::Cofactor))
        } else {
            None
        }
    }

    /// Solves Γx = 0 with the last equation replaced by Σx_i = 1.
    pub fn kernel_by_constrained_solve(&self) -> Result<KernelVector> {
        let n = self.n;
        let mut a = self.to_dmatrix();
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let x = linalg::solve(&a, &b).ok_or(Error::SingularBeyondRankOne {
            residual: f64::INFINITY,
        })?;
        Ok(KernelVector::from_raw(x, KernelSource::ConstrainedSolve))
    }

    /// The (n−1)×(n−1) matrix L − U of the fast dynamics: L drops the last
    /// row and column of Γ, U repeats the column V = (γ_in).
    pub fn fast_subsystem_matrix(&self) -> DMatrix<f64> {
        let m = self.n - 1;
        DMatrix::from_fn(m, m, |i, k| self.get(i, k) - self.get(i, m))
    }

    /// V = (γ_1n, …, γ_{n−1,n}).
    pub fn fast_subsystem_forcing(&self) -> Vec<f64> {
        let m = self.n - 1;
        (0..m).map(|i| self.get(i, m)).collect()
    }

    pub fn spectral_check(&self) -> SpectralReport {
        let eig = linalg::eigenvalues(&self.to_dmatrix());
        let zero_tol = 1e-9 * self.inf_norm().max(f64::MIN_POSITIVE);
        let zero_multiplicity = eig.iter().filter(|l| l.norm() < zero_tol).count();
        let mut nonzero = eig.clone();
        if let Some(k) = nonzero
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, _)| k)
        {
            nonzero.remove(k);
        }
        let max_nonzero_real_part = nonzero
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let fast = if self.n > 1 {
            linalg::eigenvalues(&self.fast_subsystem_matrix())
        } else {
            Vec::new()
        };
        let conjugacy_error = linalg::match_spectra(&fast, &nonzero);
        SpectralReport {
            eigenvalues: eig,
            fast_eigenvalues: fast,
            zero_multiplicity,
            max_nonzero_real_part,
            conjugacy_error,
            zero_tolerance: zero_tol,
        }
    }
}

/// Which route produced a [`KernelVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSource {
    Cofactor,
    ConstrainedSolve,
    ClosedForm,
}

/// Positive generator δ of ker Γ, stored normalized to Σδ_i = 1 with the
/// unnormalized values kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelVector {
    delta: Vec<f64>,
    raw: Vec<f64>,
    source: KernelSource,
}

impl KernelVector {
    pub(crate) fn from_raw(raw: Vec<f64>, source: KernelSource) -> Self {
        let s: f64 = raw.iter().sum();
        let delta = raw.iter().map(|d| d / s).collect();
        Self { delta, raw, source }
    }

    /// Canonical form, Σδ_i = 1.
    pub fn normalized(&self) -> &[f64] {
        &self.delta
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn source(&self) -> KernelSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    /// ‖Γδ‖∞ for the normalized vector.
    pub fn residual(&self, gamma: &MigrationMatrix) -> f64 {
        linalg::max_abs(&gamma.apply(&self.delta))
    }
}

/// Eigenstructure of Γ plus the conjugacy check against L − U.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex>,
    /// Eigenvalues of L − U.
    pub fast_eigenvalues: Vec<Complex>,
    pub zero_multiplicity: usize,
    pub max_nonzero_real_part: f64,
    /// Worst distance between the spectrum of L − U and the nonzero
    /// spectrum of Γ.
    pub conjugacy_error: f64,
    pub zero_tolerance: f64,
}

impl SpectralReport {
    pub fn zero_is_simple(&self) -> bool {
        self.zero_multiplicity == 1
    }

    pub fn is_stable_off_kernel(&self) -> bool {
        self.max_nonzero_real_part < 0.0
    }

    pub fn conjugacy_holds(&self, tol: f64) -> bool {
        self.conjugacy_error <= tol
    }

    pub fn passes(&self) -> bool {
        self.zero_is_simple() && self.is_stable_off_kernel() && self.conjugacy_holds(1e-8)
    }

    /// Largest real part among eigenvalues of L − U (negative when stable).
    pub fn fast_spectral_abscissa(&self) -> f64 {
        self.fast_eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Named fluxes of a 3-patch system, γ_ij = flux into i from j.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThreePatchFluxes {
    pub g12: f64,
    pub g13: f64,
    pub g21: f64,
    pub g23: f64,
    pub g31: f64,
    pub g32: f64,
}

impl ThreePatchFluxes {
    /// Flat ordering (γ21, γ12, γ31, γ13, γ32, γ23).
    pub fn from_flat(v: [f64; 6]) -> Self {
        Self {
            g21: v[0],
            g12: v[1],
            g31: v[2],
            g13: v[3],
            g32: v[4],
            g23: v[5],
        }
    }

    pub fn to_table_order(&self) -> [f64; 6] {
        [self.g21, self.g12, self.g31, self.g13, self.g32, self.g23]
    }

    pub fn fluxes(&self) -> Vec<Flux> {
        [
            (0, 1, self.g12),
            (0, 2, self.g13),
            (1, 0, self.g21),
            (1, 2, self.g23),
            (2, 0, self.g31),
            (2, 1, self.g32),
        ]
        .into_iter()
        .filter(|&(_, _, r)| r != 0.0)
        .map(|(i, j, r)| Flux::new(i, j, r))
        .collect()
    }

    pub fn to_matrix(&self) -> Result<MigrationMatrix> {
        MigrationMatrix::new(3, &self.fluxes())
    }

    /// The three cofactor products of the 3-patch kernel.
    pub fn closed_form_raw(&self) -> [f64; 3] {
        let Self {
            g12,
            g13,
            g21,
            g23,
            g31,
            g32,
        } = *self;
        [
            g12 * g13 + g12 * g23 + g32 * g13,
            g21 * g13 + g21 * g23 + g31 * g23,
            g21 * g32 + g31 * g12 + g31 * g32,
        ]
    }

    pub fn closed_form_kernel(&self) -> Result<KernelVector> {
        let raw = self.closed_form_raw();
        if let Some(i) = raw.iter().position(|&d| d <= 0.0) {
            return Err(Error::ZeroKernelComponent { index: i + 1 });
        }
        Ok(KernelVector::from_raw(
            raw.to_vec(),
            KernelSource::ClosedForm,
        ))
    }
}

/// The five irreducible 3-patch support patterns (up to relabeling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThreePatchGraph {
    /// All six fluxes present.
    G1,
    /// γ23 = γ32 = 0.
    G2,
    /// γ23 = 0.
    G3,
    /// γ12 = γ31 = 0.
    G4,
    /// Only the cycle 1→2→3→1: γ21, γ32, γ13.
    G5,
}

impl ThreePatchGraph {
    pub const ALL: [ThreePatchGraph; 5] = [Self::G1, Self::G2, Self::G3, Self::G4, Self::G5];

    /// Exact support match in the canonical labeling, if any.
    pub fn of(f: &ThreePatchFluxes) -> Option<Self> {
        let p = |v: f64| v > 0.0;
        let pattern = [p(f.g12), p(f.g13), p(f.g21), p(f.g23), p(f.g31), p(f.g32)];
        match pattern {
            [true, true, true, true, true, true] => Some(Self::G1),
            [true, true, true, false, true, false] => Some(Self::G2),
            [true, true, true, false, true, true] => Some(Self::G3),
            [false, true, true, true, false, true] => Some(Self::G4),
            [false, true, true, false, false, true] => Some(Self::G5),
            _ => None,
        }
    }

    /// Zeroes the fluxes this graph does not carry.
    pub fn restrict(&self, f: &ThreePatchFluxes) -> ThreePatchFluxes {
        let mut g = *f;
        match self {
            Self::G1 => {}
            Self::G2 => {
                g.g23 = 0.0;
                g.g32 = 0.0;
            }
            Self::G3 => g.g23 = 0.0,
            Self::G4 => {
                g.g12 = 0.0;
                g.g31 = 0.0;
            }
            Self::G5 => {
                g.g12 = 0.0;
                g.g23 = 0.0;
                g.g31 = 0.0;
            }
        }
        g
    }

    /// Reduced kernel products for this support pattern.
    pub fn kernel_raw(&self, f: &ThreePatchFluxes) -> [f64; 3] {
        let ThreePatchFluxes {
            g12,
            g13,
            g21,
            g23,
            g31,
            g32,
        } = *f;
        match self {
            Self::G1 => f.closed_form_raw(),
            Self::G2 => [g12 * g13, g21 * g13, g12 * g31],
            Self::G3 => [
                g12 * g13 + g32 * g13,
                g21 * g13,
                g21 * g32 + g31 * g12 + g31 * g32,
            ],
            Self::G4 => [g32 * g13, g21 * g13 + g21 * g23 + g31 * g23, g21 * g32],
            Self::G5 => [g32 * g13, g21 * g13, g21 * g32],
        }
    }
}

/// JSON form: `{"n": 3, "fluxes": [{"to": 1, "from": 2, "rate": 3.0}, ...]}`
/// with 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MigrationSpec {
    pub n: usize,
    #[serde(default)]
    pub fluxes: Vec<FluxSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub to: usize,
    pub from: usize,
    pub rate: f64,
}

impl MigrationSpec {
    pub fn to_fluxes(&self) -> Result<Vec<Flux>> {
        self.fluxes
            .iter()
            .map(|f| {
                if f.to == 0 || f.from == 0 {
                    Err(Error::InvalidMigration(
                        "patch indices are 1-based".to_string(),
                    ))
                } else {
                    Ok(Flux::new(f.to - 1, f.from - 1, f.rate))
                }
            })
            .collect()
    }
}

impl TryFrom<MigrationSpec> for MigrationMatrix {
    type Error = Error;

    fn try_from(spec: MigrationSpec) -> Result<Self> {
        let fluxes = spec.to_fluxes()?;
        if spec.n == 1 && fluxes.is_empty() {
            return Ok(MigrationMatrix::isolated());
        }
        MigrationMatrix::new(spec.n, &fluxes)
    }
}

impl From<MigrationMatrix> for MigrationSpec {
    fn from(m: MigrationMatrix) -> Self {
        MigrationSpec {
            n: m.n,
            fluxes: m
                .fluxes()
                .into_iter()
                .map(|f| FluxSpec {
                    to: f.to + 1,
                    from: f.from + 1,
                    rate: f.rate,
                })
                .collect(),
        }
    }
}
