use crate::dynamics::EquilibriumSolver;
use crate::error::Result;
use crate::model::PatchModel;

/// dX_T*/dβ at β = 0: Σ_i (1/r_i) Σ_j γ_ij K_j, diagonal included.
pub fn derivative_at_zero(model: &PatchModel) -> Result<f64> {
    model.require_migration()?;
    let gk = model.gamma().apply(model.k());
    Ok(gk.iter().zip(model.r()).map(|(g, r)| g / r).sum())
}

/// One-sided second-order difference (−3X(0) + 4X(h) − X(2h)) / 2h with
/// h = 1e−5, from full equilibrium solves.
pub fn derivative_at_zero_fd(model: &PatchModel) -> Result<f64> {
    derivative_at_zero_fd_step(model, 1e-5)
}

pub fn derivative_at_zero_fd_step(model: &PatchModel, h: f64) -> Result<f64> {
    model.require_migration()?;
    let solver = EquilibriumSolver::default();
    let x0 = model.sum_k();
    let x1 = solver.solve(model, h)?.total_population();
    let x2 = solver.solve(model, 2.0 * h)?.total_population();
    Ok((-3.0 * x0 + 4.0 * x1 - x2) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Flux, MigrationMatrix, ThreePatchFluxes};

    fn table_model(f: [f64; 6]) -> PatchModel {
        let g = ThreePatchFluxes::from_flat(f).to_matrix().unwrap();
        PatchModel::new(vec![4.0, 0.7, 0.6], vec![5.0, 1.0, 4.0], g).unwrap()
    }

    #[test]
    fn g1_hand_sum() {
        let m = table_model([0.15, 3.0, 0.2, 0.04, 11.0, 0.1]);
        // Row terms (ΓK)_i / r_i evaluated by hand.
        let hand = (-0.35 * 5.0 + 3.0 * 1.0 + 0.04 * 4.0) / 4.0
            + (0.15 * 5.0 - 14.0 * 1.0 + 0.1 * 4.0) / 0.7
            + (0.2 * 5.0 + 11.0 * 1.0 - 0.14 * 4.0) / 0.6;
        let d = derivative_at_zero(&m).unwrap();
        assert!((d - hand).abs() < 1e-12);
        assert!((d - 1.062_0).abs() < 1e-4);
    }

    #[test]
    fn g2_value() {
        let m = table_model([14.9, 10.0, 0.2, 0.04, 0.0, 0.0]);
        assert!((derivative_at_zero(&m).unwrap() - 77.2079).abs() < 1e-3);
    }

    #[test]
    fn finite_difference_agrees() {
        let m = table_model([0.15, 3.0, 0.2, 0.04, 11.0, 0.1]);
        let exact = derivative_at_zero(&m).unwrap();
        let fd = derivative_at_zero_fd(&m).unwrap();
        assert!((fd - exact).abs() <= 1e-3 * exact.abs());
    }

    #[test]
    fn equal_rates_vanish_and_sign_follows_rates() {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, 1.0), Flux::new(1, 0, 1.0)]).unwrap();
        let m = PatchModel::new(vec![1.0, 1.0], vec![1.0, 3.0], g.clone()).unwrap();
        assert!(derivative_at_zero(&m).unwrap().abs() < 1e-15);
        // Flow towards the slow patch: (2/2 − 2/1) = −1.
        let m = PatchModel::new(vec![2.0, 1.0], vec![1.0, 3.0], g).unwrap();
        assert!((derivative_at_zero(&m).unwrap() + 1.0).abs() < 1e-15);
        assert!(derivative_at_zero_fd(&m).unwrap() < 0.0);
    }
}
