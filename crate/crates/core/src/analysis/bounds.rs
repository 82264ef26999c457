//! Grid checks of the sign of X_T*(β) − ΣK under structural hypotheses.

use serde::{Deserialize, Serialize};

use super::verdict::{balanced_violation, has_equal_growth_rates, lies_in_kernel};
use crate::dynamics::{Equilibrium, EquilibriumSolver};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::PatchModel;

const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub passed: bool,
    /// Smallest signed distance to the violating side over the grid.
    pub worst_margin: f64,
    pub worst_beta: f64,
    /// For the balanced check with distinct growth rates: whether
    /// X_T > ΣK held at every positive grid point.
    pub strict: Option<bool>,
}

fn solve_grid(model: &PatchModel, betas: &[f64]) -> Result<Vec<Equilibrium>> {
    EquilibriumSolver::default()
        .solve_path(model, betas)
        .into_iter()
        .collect()
}

fn margins<F: Fn(f64) -> f64>(eqs: &[Equilibrium], margin: F) -> (f64, f64) {
    eqs.iter()
        .map(|e| (margin(e.total_population()), e.beta))
        .fold(
            (f64::INFINITY, f64::NAN),
            |acc, m| if m.0 < acc.0 { m } else { acc },
        )
}

/// With equal growth rates, X_T*(β) ≤ ΣK + 1e−9 on the grid.
pub fn check_equal_growth_bound(model: &PatchModel, betas: &[f64]) -> Result<BoundCheck> {
    model.require_migration()?;
    if !has_equal_growth_rates(model) {
        return Err(Error::PreconditionViolated("growth rates differ".into()));
    }
    let eqs = solve_grid(model, betas)?;
    let sum_k = model.sum_k();
    let (worst_margin, worst_beta) = margins(&eqs, |x| sum_k - x);
    Ok(BoundCheck {
        passed: worst_margin >= -SLACK,
        worst_margin,
        worst_beta,
        strict: None,
    })
}

/// With α_i γ_ij = α_j γ_ji for all pairs, X_T*(β) ≥ ΣK − 1e−9 on the grid,
/// strictly above ΣK for β > 0 when growth rates are not all equal.
pub fn check_balanced_dispersal(model: &PatchModel, betas: &[f64]) -> Result<BoundCheck> {
    model.require_migration()?;
    if let Some(why) = balanced_violation(model) {
        return Err(Error::PreconditionViolated(format!(
            "dispersal not balanced: {why}"
        )));
    }
    let eqs = solve_grid(model, betas)?;
    let sum_k = model.sum_k();
    let (worst_margin, worst_beta) = margins(&eqs, |x| x - sum_k);
    let strict = if has_equal_growth_rates(model) {
        None
    } else {
        Some(
            eqs.iter()
                .filter(|e| e.beta > 0.0)
                .all(|e| e.total_population() > sum_k),
        )
    };
    Ok(BoundCheck {
        passed: worst_margin >= -SLACK && strict.unwrap_or(true),
        worst_margin,
        worst_beta,
        strict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstancyCheck {
    pub capacity_in_kernel: bool,
    /// max over the grid of ‖E*(β) − K‖∞.
    pub max_deviation: f64,
    pub passed: bool,
}

/// E*(β) ≡ K exactly when K ∈ ker Γ: checks E* = K to 1e−8 on the grid in
/// that case, and that E* moves away from K somewhere on the grid otherwise.
pub fn check_constant_equilibrium(model: &PatchModel, betas: &[f64]) -> Result<ConstancyCheck> {
    model.require_migration()?;
    let in_kernel = lies_in_kernel(model.gamma(), model.k());
    let eqs = solve_grid(model, betas)?;
    let max_deviation = eqs
        .iter()
        .map(|e| linalg::max_abs_diff(&e.x, model.k()))
        .fold(0.0, f64::max);
    let passed = if in_kernel {
        max_deviation <= 1e-8
    } else {
        max_deviation > 1e-8
    };
    Ok(ConstancyCheck {
        capacity_in_kernel: in_kernel,
        max_deviation,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Flux, MigrationMatrix, ThreePatchFluxes};

    fn grid() -> Vec<f64> {
        crate::random::geometric_grid(1e-3, 1e3, 25)
    }

    #[test]
    fn equal_rates_pair_is_below() {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 1.0), Flux::new(1, 0, 1.0)]).unwrap();
        let m = PatchModel::new(vec![1.0, 1.0], vec![1.0, 3.0], g).unwrap();
        let c = check_equal_growth_bound(&m, &grid()).unwrap();
        assert!(c.passed);
        assert!(c.worst_margin > 0.0);
    }

    #[test]
    fn unequal_rates_rejected() {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 1.0), Flux::new(1, 0, 1.0)]).unwrap();
        let m = PatchModel::new(vec![1.0, 2.0], vec![1.0, 3.0], g).unwrap();
        assert!(matches!(
            check_equal_growth_bound(&m, &grid()),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn balanced_pair_gains() {
        // α = (1, 2), γ12/γ21 = α2/α1.
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 2.0), Flux::new(1, 0, 1.0)]).unwrap();
        let m = PatchModel::new(vec![1.0, 4.0], vec![1.0, 2.0], g).unwrap();
        let c = check_balanced_dispersal(&m, &grid()).unwrap();
        assert!(c.passed);
        assert_eq!(c.strict, Some(true));
    }

    #[test]
    fn one_sided_flux_rejected() {
        let f = ThreePatchFluxes::from_flat([1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let m = PatchModel::new(vec![1.0; 3], vec![1.0; 3], f.to_matrix().unwrap()).unwrap();
        assert!(check_balanced_dispersal(&m, &grid()).is_err());
    }

    #[test]
    fn proportional_pair_is_constant() {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 3.0), Flux::new(1, 0, 1.5)]).unwrap();
        let m = PatchModel::new(vec![1.0, 5.0], vec![2.0, 1.0], g).unwrap();
        let c = check_constant_equilibrium(&m, &grid()).unwrap();
        assert!(c.capacity_in_kernel && c.passed);
    }

    #[test]
    fn g1_is_not_constant() {
        let g = ThreePatchFluxes::from_flat([0.15, 3.0, 0.2, 0.04, 11.0, 0.1])
            .to_matrix()
            .unwrap();
        let m = PatchModel::new(vec![4.0, 0.7, 0.6], vec![5.0, 1.0, 4.0], g).unwrap();
        let c = check_constant_equilibrium(&m, &[1.0]).unwrap();
        assert!(!c.capacity_in_kernel && c.passed);
    }
}
