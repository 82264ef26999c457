//! Reduction of a model made of two blocks of identical patches with
//! matching migration to an equivalent two-patch model.

use serde::{Deserialize, Serialize};

use super::two_patch::{beta0, classify_two_patch, Region, RegionVerdict};
use crate::error::{Error, Result};
use crate::graph::{Flux, MigrationMatrix};
use crate::model::PatchModel;

const MIGRATION_TOL: f64 = 1e-12;

/// Patches split into blocks I and J (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockPartition {
    pub block_i: Vec<usize>,
    pub block_j: Vec<usize>,
    /// Σ_{i∈I, j∈J} γ_ij, flux from block J into block I.
    pub gamma_ij: f64,
    /// Σ_{i∈I, j∈J} γ_ji, flux from block I into block J.
    pub gamma_ji: f64,
    /// γ_iJ = Σ_{j∈J} γ_ij for each i ∈ I.
    pub per_patch_from_j: Vec<f64>,
    /// γ_jI = Σ_{i∈I} γ_ji for each j ∈ J.
    pub per_patch_from_i: Vec<f64>,
    /// Net outflow coefficient T_k for every patch, indexed by patch.
    pub t: Vec<f64>,
}

impl TwoBlockPartition {
    /// Validates within-block equality of (r, K) and of the migration sums.
    pub fn new(model: &PatchModel, block_i: &[usize]) -> Result<Self> {
        let n = model.n();
        let mut in_i = vec![false; n];
        for &i in block_i {
            if i >= n {
                return Err(Error::PartitionInvalid(format!(
                    "patch {} out of range",
                    i + 1
                )));
            }
            if in_i[i] {
                return Err(Error::PartitionInvalid(format!(
                    "patch {} listed twice",
                    i + 1
                )));
            }
            in_i[i] = true;
        }
        let mut bi: Vec<usize> = block_i.to_vec();
        bi.sort_unstable();
        let bj: Vec<usize> = (0..n).filter(|k| !in_i[*k]).collect();
        if bi.is_empty() || bj.is_empty() {
            return Err(Error::PartitionInvalid(
                "both blocks must be nonempty".into(),
            ));
        }

        for block in [&bi, &bj] {
            let f = block[0];
            for &k in &block[1..] {
                if model.r()[k] != model.r()[f] || model.k()[k] != model.k()[f] {
                    return Err(Error::PartitionInvalid(format!(
                        "patches {} and {} differ in (r, K)",
                        f + 1,
                        k + 1
                    )));
                }
            }
        }

        let g = model.gamma();
        let per_from_j: Vec<f64> = bi
            .iter()
            .map(|&i| bj.iter().map(|&j| g.get(i, j)).sum())
            .collect();
        let per_from_i: Vec<f64> = bj
            .iter()
            .map(|&j| bi.iter().map(|&i| g.get(j, i)).sum())
            .collect();
        let mut t = vec![0.0; n];
        for (own, other) in [(&bi, &bj), (&bj, &bi)] {
            for &a in own {
                let out: f64 = other.iter().map(|&b| g.get(b, a)).sum();
                let inner: f64 = own
                    .iter()
                    .filter(|&&k| k != a)
                    .map(|&k| g.get(k, a) - g.get(a, k))
                    .sum();
                t[a] = out + inner;
            }
        }

        let scale = g.inf_norm().max(1.0);
        let check = |vals: &[f64], idx: &[usize], what: &str| -> Result<()> {
            for (pos, &v) in vals.iter().enumerate().skip(1) {
                if (v - vals[0]).abs() > MIGRATION_TOL * scale {
                    return Err(Error::PartitionInvalid(format!(
                        "{what} differs between patches {} and {} ({} vs {})",
                        idx[0] + 1,
                        idx[pos] + 1,
                        vals[0],
                        v
                    )));
                }
            }
            Ok(())
        };
        check(&per_from_j, &bi, "flux from block J")?;
        check(&per_from_i, &bj, "flux from block I")?;
        let ti: Vec<f64> = bi.iter().map(|&i| t[i]).collect();
        let tj: Vec<f64> = bj.iter().map(|&j| t[j]).collect();
        check(&ti, &bi, "net outflow T")?;
        check(&tj, &bj, "net outflow T")?;

        Ok(Self {
            gamma_ij: per_from_j.iter().sum(),
            gamma_ji: per_from_i.iter().sum(),
            block_i: bi,
            block_j: bj,
            per_patch_from_j: per_from_j,
            per_patch_from_i: per_from_i,
            t,
        })
    }

    pub fn p(&self) -> usize {
        self.block_i.len()
    }

    pub fn q(&self) -> usize {
        self.block_j.len()
    }

    /// Spreads a two-patch state (y1, y2) evenly over the blocks.
    pub fn lift(&self, y: [f64; 2]) -> Vec<f64> {
        let n = self.p() + self.q();
        let mut x = vec![0.0; n];
        for &i in &self.block_i {
            x[i] = y[0] / self.p() as f64;
        }
        for &j in &self.block_j {
            x[j] = y[1] / self.q() as f64;
        }
        x
    }
}

/// The two-patch model with r = (r_I, r_J), K = (p K_I, q K_J),
/// γ̃12 = γ_IJ/q and γ̃21 = γ_JI/p. Its equilibrium (y1, y2) lifts to the
/// full equilibrium through [`TwoBlockPartition::lift`].
pub fn two_block_reduce(model: &PatchModel, partition: &TwoBlockPartition) -> Result<PatchModel> {
    let (p, q) = (partition.p() as f64, partition.q() as f64);
    let (i0, j0) = (partition.block_i[0], partition.block_j[0]);
    let gamma = MigrationMatrix::new(
        2,
        &[
            Flux::new(0, 1, partition.gamma_ij / q),
            Flux::new(1, 0, partition.gamma_ji / p),
        ],
    )?;
    PatchModel::new(
        vec![model.r()[i0], model.r()[j0]],
        vec![p * model.k()[i0], q * model.k()[j0]],
        gamma,
    )
}

/// Region of a reduced two-block model. γ_IJ/γ_JI is compared with
/// α_J/α_I and K_I/K_J of the original patches.
pub fn classify_two_block(reduced: &PatchModel, p: usize, q: usize) -> Result<RegionVerdict> {
    if reduced.n() != 2 || p == 0 || q == 0 {
        return Err(Error::PreconditionViolated(
            "expected a reduced two-patch model and positive block sizes".into(),
        ));
    }
    let (pf, qf) = (p as f64, q as f64);
    let g = reduced.gamma();
    let (g_ij, g_ji) = (g.get(0, 1) * qf, g.get(1, 0) * pf);
    let (r1, rn) = (reduced.r()[0], reduced.r()[1]);
    let (k1, kn) = (reduced.k()[0] / pf, reduced.k()[1] / qf);

    let v = classify_two_patch(r1, rn, k1, kn, g_ij, g_ji)?;
    match v.region {
        Region::AlwaysDetrimental => Err(Error::EqualGrowthRates),
        Region::J1 => {
            let (a1, an) = (r1 / k1, rn / kn);
            Ok(RegionVerdict {
                region: Region::J1,
                beta0: Some(beta0(r1, rn, a1, an, g_ij, g_ji, pf, qf)),
            })
        }
        _ => Ok(v),
    }
}
