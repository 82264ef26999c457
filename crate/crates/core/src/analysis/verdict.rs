//! Compare the perfect-mixing total X_T*(∞) with ΣK.

use serde::{Deserialize, Serialize};

use super::derivative::derivative_at_zero;
use crate::error::{Error, Result};
use crate::graph::MigrationMatrix;
use crate::linalg;
use crate::mixing::limit_from_kernel;
use crate::model::PatchModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    Greater,
    GreaterOrEqual,
    Equal,
    LessOrEqual,
    Less,
    Undetermined,
}

impl Relation {
    // Allowed signs of X − ΣK as bits: 1 = negative, 2 = zero, 4 = positive.
    fn mask(self) -> u8 {
        match self {
            Relation::Greater => 4,
            Relation::GreaterOrEqual => 6,
            Relation::Equal => 2,
            Relation::LessOrEqual => 3,
            Relation::Less => 1,
            Relation::Undetermined => 7,
        }
    }

    fn from_mask(m: u8) -> Option<Self> {
        Some(match m {
            4 => Relation::Greater,
            6 => Relation::GreaterOrEqual,
            2 => Relation::Equal,
            3 => Relation::LessOrEqual,
            1 => Relation::Less,
            7 | 5 => Relation::Undetermined,
            _ => return None,
        })
    }

    /// Both relations at once; `None` if they exclude each other.
    pub fn intersect(self, other: Relation) -> Option<Relation> {
        Relation::from_mask(self.mask() & other.mask())
    }

    /// Whether an observed relation is consistent with this one.
    pub fn admits(self, observed: Relation) -> bool {
        observed.mask() & self.mask() == observed.mask()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Greater => ">",
            Relation::GreaterOrEqual => ">=",
            Relation::Equal => "=",
            Relation::LessOrEqual => "<=",
            Relation::Less => "<",
            Relation::Undetermined => "?",
        }
    }
}

/// Structural conditions that fix the sign of X_T*(∞) − ΣK.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// (1/α_1, …, 1/α_n) ∈ ker Γ.
    ReciprocalAlphaInKernel,
    /// K_i/δ_i and δ_i α_i monotone in the same direction.
    ChainsAligned,
    /// K_i/δ_i and δ_i α_i monotone in opposite directions.
    ChainsOpposed,
    /// r_1 = … = r_n.
    EqualGrowthRates,
    /// α_i γ_ij = α_j γ_ji for all pairs.
    BalancedDispersal,
    /// K ∈ ker Γ.
    CapacityInKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersalVerdict {
    /// Relation implied by the matched hypotheses.
    pub relation_at_infinity: Relation,
    /// Relation observed by evaluating the limit.
    pub numerical_relation: Relation,
    pub conditions_matched: Vec<Hypothesis>,
    pub derivative_at_zero: f64,
    pub x_t_infinity: f64,
    pub sum_k: f64,
}

impl DispersalVerdict {
    pub fn is_consistent(&self) -> bool {
        self.relation_at_infinity.admits(self.numerical_relation)
    }
}

const KERNEL_TOL: f64 = 1e-10;
const TIE_TOL: f64 = 1e-12;

/// ‖Γv‖∞ ≤ 1e−10 ‖Γ‖∞ ‖v‖∞.
pub fn lies_in_kernel(gamma: &MigrationMatrix, v: &[f64]) -> bool {
    let res = linalg::max_abs(&gamma.apply(v));
    res <= KERNEL_TOL * gamma.inf_norm() * linalg::max_abs(v)
}

pub fn has_equal_growth_rates(model: &PatchModel) -> bool {
    let r0 = model.r()[0];
    model.r().iter().all(|r| (r - r0).abs() <= TIE_TOL * r0)
}

/// Checks α_i γ_ij = α_j γ_ji (absolute 1e−12) and γ_ij = 0 ⇔ γ_ji = 0.
pub fn balanced_violation(model: &PatchModel) -> Option<String> {
    let a = model.alpha();
    let g = model.gamma();
    for i in 0..model.n() {
        for j in 0..i {
            let (gij, gji) = (g.get(i, j), g.get(j, i));
            if (gij == 0.0) != (gji == 0.0) {
                return Some(format!(
                    "one-sided flux between patches {} and {}",
                    j + 1,
                    i + 1
                ));
            }
            let d = a[i] * gij - a[j] * gji;
            if d.abs() > 1e-12 {
                return Some(format!(
                    "alpha_{i1}*gamma_{i1}{j1} - alpha_{j1}*gamma_{j1}{i1} = {d:e}",
                    i1 = i + 1,
                    j1 = j + 1
                ));
            }
        }
    }
    None
}

/// Monotone-chain test after sorting patches by u (ties grouped). Returns
/// (aligned, opposed, strict).
fn chains(u: &[f64], v: &[f64]) -> (bool, bool, bool) {
    let n = u.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut last_u = f64::NAN;
    for &k in &idx {
        let tie =
            !last_u.is_nan() && (u[k] - last_u).abs() <= TIE_TOL * u[k].abs().max(last_u.abs());
        if tie {
            let g = groups.last_mut().expect("group exists");
            g.0 = g.0.min(v[k]);
            g.1 = g.1.max(v[k]);
        } else {
            groups.push((v[k], v[k]));
            last_u = u[k];
        }
    }
    let le = |a: f64, b: f64| a <= b + TIE_TOL * a.abs().max(b.abs());
    let aligned = groups.windows(2).all(|w| le(w[0].1, w[1].0));
    let opposed = groups.windows(2).all(|w| le(w[1].1, w[0].0));

    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v_constant = vmax - vmin <= TIE_TOL * vmax.abs();
    let strict = groups.len() > 1 && !v_constant;
    (aligned, opposed, strict)
}

pub fn compare_infinity_vs_zero(model: &PatchModel) -> Result<DispersalVerdict> {
    model.require_migration()?;
    let gamma = model.gamma();
    let delta = gamma.kernel_vector()?.normalized().to_vec();
    let limit = limit_from_kernel(model, &delta);
    let sum_k = model.sum_k();

    let mut matched = Vec::new();
    let mut implied = Relation::Undetermined;
    let mut add = |h: Hypothesis, rel: Relation, implied: &mut Relation| -> Result<()> {
        matched.push(h);
        *implied = implied.intersect(rel).ok_or_else(|| {
            Error::ContradictoryHypotheses(format!(
                "{h:?} implies {} against {}",
                rel.symbol(),
                implied.symbol()
            ))
        })?;
        Ok(())
    };

    let inv_alpha: Vec<f64> = model.alpha().iter().map(|a| 1.0 / a).collect();
    if lies_in_kernel(gamma, &inv_alpha) {
        add(
            Hypothesis::ReciprocalAlphaInKernel,
            Relation::Equal,
            &mut implied,
        )?;
    }
    if lies_in_kernel(gamma, model.k()) {
        add(Hypothesis::CapacityInKernel, Relation::Equal, &mut implied)?;
    }

    let u: Vec<f64> = model.k().iter().zip(&delta).map(|(k, d)| k / d).collect();
    let v: Vec<f64> = delta
        .iter()
        .zip(model.alpha())
        .map(|(d, a)| d * a)
        .collect();
    let (aligned, opposed, strict) = chains(&u, &v);
    if aligned {
        let rel = if strict {
            Relation::Greater
        } else {
            Relation::GreaterOrEqual
        };
        add(Hypothesis::ChainsAligned, rel, &mut implied)?;
    }
    if opposed {
        let rel = if strict {
            Relation::Less
        } else {
            Relation::LessOrEqual
        };
        add(Hypothesis::ChainsOpposed, rel, &mut implied)?;
    }
    if has_equal_growth_rates(model) {
        add(
            Hypothesis::EqualGrowthRates,
            Relation::LessOrEqual,
            &mut implied,
        )?;
    }
    if balanced_violation(model).is_none() {
        add(
            Hypothesis::BalancedDispersal,
            Relation::GreaterOrEqual,
            &mut implied,
        )?;
    }

    let gap = limit.x_t_infinity - sum_k;
    let numerical = if gap.abs() <= 1e-9 * sum_k {
        Relation::Equal
    } else if gap > 0.0 {
        Relation::Greater
    } else {
        Relation::Less
    };

    Ok(DispersalVerdict {
        relation_at_infinity: implied,
        numerical_relation: numerical,
        conditions_matched: matched,
        derivative_at_zero: derivative_at_zero(model)?,
        x_t_infinity: limit.x_t_infinity,
        sum_k,
    })
}
