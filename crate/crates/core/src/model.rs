use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FluxSpec, MigrationMatrix, MigrationSpec};

/// Per-patch logistic parameters coupled through a migration matrix:
///
/// dx_i/dt = r_i x_i (1 − x_i/K_i) + β Σ_{j≠i} (γ_ij x_j − γ_ji x_i)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct PatchModel {
    r: Vec<f64>,
    k: Vec<f64>,
    alpha: Vec<f64>,
    gamma: MigrationMatrix,
}

impl PatchModel {
    pub fn new(r: Vec<f64>, k: Vec<f64>, gamma: MigrationMatrix) -> Result<Self> {
        let n = gamma.n();
        if r.len() != n || k.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} growth rates and capacities, got {} and {}",
                r.len(),
                k.len()
            )));
        }
        for (i, (&ri, &ki)) in r.iter().zip(&k).enumerate() {
            if !(ri > 0.0 && ri.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "growth rate r_{} = {ri} must be positive",
                    i + 1
                )));
            }
            if !(ki > 0.0 && ki.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "carrying capacity K_{} = {ki} must be positive",
                    i + 1
                )));
            }
        }
        if n > 1 && !gamma.is_irreducible() {
            let unreachable = gamma
                .unreachable_patches()
                .into_iter()
                .map(|i| i + 1)
                .collect();
            return Err(Error::Reducible { unreachable });
        }
        let alpha = r.iter().zip(&k).map(|(r, k)| r / k).collect();
        Ok(Self { r, k, alpha, gamma })
    }

    /// A single isolated patch (plain logistic growth).
    pub fn single(r: f64, k: f64) -> Result<Self> {
        Self::new(vec![r], vec![k], MigrationMatrix::isolated())
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// α_i = r_i / K_i.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> &MigrationMatrix {
        &self.gamma
    }

    /// ΣK_i, the total population at β = 0.
    pub fn sum_k(&self) -> f64 {
        self.k.iter().sum()
    }

    /// Analyses comparing coupled and uncoupled totals need n ≥ 2.
    pub fn require_migration(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::PreconditionViolated(
                "analysis requires at least two coupled patches".into(),
            ));
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: MigrationMatrix) -> Result<Self> {
        Self::new(self.r.clone(), self.k.clone(), gamma)
    }

    pub fn with_capacities(&self, k: Vec<f64>) -> Result<Self> {
        Self::new(self.r.clone(), k, self.gamma.clone())
    }
}

/// JSON form: the migration object plus `r` and `K` arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub fluxes: Vec<FluxSpec>,
    pub r: Vec<f64>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
}

impl TryFrom<ModelSpec> for PatchModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        let gamma = MigrationMatrix::try_from(MigrationSpec {
            n: spec.n,
            fluxes: spec.fluxes,
        })?;
        PatchModel::new(spec.r, spec.k, gamma)
    }
}

impl From<PatchModel> for ModelSpec {
    fn from(m: PatchModel) -> Self {
        let mig = MigrationSpec::from(m.gamma);
        ModelSpec {
            name: None,
            n: mig.n,
            fluxes: mig.fluxes,
            r: m.r,
            k: m.k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Flux;

    #[test]
    fn rejects_nonpositive_parameters() {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 1.0), Flux::new(1, 0, 1.0)]).unwrap();
        assert!(PatchModel::new(vec![1.0, 0.0], vec![1.0, 1.0], g.clone()).is_err());
        assert!(PatchModel::new(vec![1.0, 1.0], vec![-1.0, 1.0], g.clone()).is_err());
        assert!(PatchModel::new(vec![1.0], vec![1.0], g).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n": 2, "fluxes": [{"to": 1, "from": 2, "rate": 3.0},
            {"to": 2, "from": 1, "rate": 0.15}], "r": [1.0, 2.0], "K": [1.0, 4.0]}"#;
        let m: PatchModel = serde_json::from_str(text).unwrap();
        assert_eq!(m.alpha(), &[1.0, 0.5]);
        let again: PatchModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn single_patch_has_no_migration() {
        let m = PatchModel::single(1.0, 3.0).unwrap();
        assert_eq!(m.n(), 1);
        assert!(m.require_migration().is_err());
    }
}
