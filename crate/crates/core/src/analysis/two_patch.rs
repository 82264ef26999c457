//! Region map for the two-patch model
//!
//! x1' = r1 x1 (1 − x1/L1) + β(γ12 x2 − γ21 x1)
//! x2' = r2 x2 (1 − x2/L2) + β(γ21 x1 − γ12 x2)

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// Beneficial for every β > 0.
    J0,
    /// Beneficial below β0, detrimental above.
    J1,
    /// Detrimental for every β > 0.
    J2,
    /// γ12/γ21 = L1/L2: the equilibrium is (L1, L2) for every β.
    Identity,
    /// r1 = r2: X_T ≤ L1 + L2 for every β.
    AlwaysDetrimental,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionVerdict {
    pub region: Region,
    pub beta0: Option<f64>,
}

const RATIO_TOL: f64 = 1e-12;

fn same_ratio(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATIO_TOL * a.abs().max(b.abs())
}

/// The identity case is tested first: with r1 = r2 and γ12/γ21 = L1/L2 the
/// total is constant rather than strictly detrimental.
pub fn classify_two_patch(
    r1: f64,
    r2: f64,
    l1: f64,
    l2: f64,
    g12: f64,
    g21: f64,
) -> Result<RegionVerdict> {
    for (name, v) in [
        ("r1", r1),
        ("r2", r2),
        ("L1", l1),
        ("L2", l2),
        ("gamma12", g12),
        ("gamma21", g21),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::PreconditionViolated(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    let (a1, a2) = (r1 / l1, r2 / l2);
    let rho = g12 / g21;
    let a = a2 / a1;
    let l = l1 / l2;

    if same_ratio(rho, l) {
        return Ok(RegionVerdict {
            region: Region::Identity,
            beta0: None,
        });
    }
    if r1 == r2 {
        return Ok(RegionVerdict {
            region: Region::AlwaysDetrimental,
            beta0: None,
        });
    }
    let region = if r2 > r1 {
        if rho > a {
            Region::J1
        } else if rho > l {
            Region::J0
        } else {
            Region::J2
        }
    } else if rho < a {
        Region::J1
    } else if rho < l {
        Region::J0
    } else {
        Region::J2
    };
    let beta0 = (region == Region::J1).then(|| beta0(r1, r2, a1, a2, g12, g21, 1.0, 1.0));
    Ok(RegionVerdict { region, beta0 })
}

/// (r2 − r1) / (γ12/α2 − γ21/α1) · 1/(α1/p + α2/q).
#[allow(clippy::too_many_arguments)]
pub(crate) fn beta0(r1: f64, r2: f64, a1: f64, a2: f64, g12: f64, g21: f64, p: f64, q: f64) -> f64 {
    (r2 - r1) / (g12 / a2 - g21 / a1) / (a1 / p + a2 / q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::equilibrium;
    use crate::graph::{Flux, MigrationMatrix};
    use crate::model::PatchModel;

    fn total(r: [f64; 2], l: [f64; 2], g12: f64, g21: f64, beta: f64) -> f64 {
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, g12), Flux::new(1, 0, g21)]).unwrap();
        let m = PatchModel::new(r.to_vec(), l.to_vec(), g).unwrap();
        equilibrium(&m, beta).unwrap().total_population()
    }

    #[test]
    fn documented_j0_example() {
        let v = classify_two_patch(1.0, 2.0, 1.0, 1.0, 1.5, 1.0).unwrap();
        assert_eq!(v.region, Region::J0);
        for beta in [0.1, 1.0, 10.0, 100.0] {
            assert!(total([1.0, 2.0], [1.0, 1.0], 1.5, 1.0, beta) > 2.0);
        }
    }

    #[test]
    fn equal_rates_and_identity() {
        assert_eq!(
            classify_two_patch(1.0, 1.0, 1.0, 2.0, 1.0, 1.0)
                .unwrap()
                .region,
            Region::AlwaysDetrimental
        );
        assert_eq!(
            classify_two_patch(1.0, 3.0, 1.0, 2.0, 0.5, 1.0)
                .unwrap()
                .region,
            Region::Identity
        );
    }

    #[test]
    fn beta0_is_where_the_total_returns_to_the_sum() {
        // r2 > r1 and γ12/γ21 = 5 > α2/α1 = 2: region J1.
        let (r, l, g12, g21) = ([1.0, 2.0], [1.0, 1.0], 5.0, 1.0);
        let v = classify_two_patch(r[0], r[1], l[0], l[1], g12, g21).unwrap();
        assert_eq!(v.region, Region::J1);
        let b0 = v.beta0.unwrap();
        // At β0 both patches share α_i x_i = c with c = (L1+L2)/(1/α1 + 1/α2).
        let c = 2.0 / (1.0 + 0.5);
        let x = [c / 1.0, c / 2.0];
        let f1 = r[0] * x[0] * (1.0 - x[0] / l[0]) + b0 * (g12 * x[1] - g21 * x[0]);
        assert!(f1.abs() < 1e-12);
        assert!((total(r, l, g12, g21, b0) - 2.0).abs() < 1e-10);
        assert!(total(r, l, g12, g21, b0 / 2.0) > 2.0);
        assert!(total(r, l, g12, g21, 2.0 * b0) < 2.0);
    }

    #[test]
    fn mirrored_case() {
        // r2 < r1: J1 when γ12/γ21 < α2/α1.
        let v = classify_two_patch(2.0, 1.0, 1.0, 1.0, 0.2, 1.0).unwrap();
        assert_eq!(v.region, Region::J1);
        assert!(v.beta0.unwrap() > 0.0);
        let v = classify_two_patch(2.0, 1.0, 1.0, 1.0, 3.0, 1.0).unwrap();
        assert_eq!(v.region, Region::J2);
    }
}
