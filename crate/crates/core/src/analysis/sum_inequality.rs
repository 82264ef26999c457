//! Weighted Chebyshev sum inequality for monotone sequences:
//!
//! (Σw)(Σwuv) − (Σwu)(Σwv) ≥ 0 when u and v are monotone in the same
//! direction, ≤ 0 when in opposite directions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monotone {
    Constant,
    NonDecreasing,
    NonIncreasing,
    Neither,
}

impl Monotone {
    pub fn of(s: &[f64]) -> Self {
        let up = s.windows(2).all(|w| w[0] <= w[1]);
        let down = s.windows(2).all(|w| w[0] >= w[1]);
        match (up, down) {
            (true, true) => Monotone::Constant,
            (true, false) => Monotone::NonDecreasing,
            (false, true) => Monotone::NonIncreasing,
            (false, false) => Monotone::Neither,
        }
    }

    fn is_non_decreasing(self) -> bool {
        matches!(self, Monotone::Constant | Monotone::NonDecreasing)
    }

    fn is_non_increasing(self) -> bool {
        matches!(self, Monotone::Constant | Monotone::NonIncreasing)
    }
}

/// (Σw)(Σwuv) − (Σwu)(Σwv).
pub fn chebyshev_gap(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mut suv = 0.0;
    let mut su = 0.0;
    let mut sv = 0.0;
    for k in 0..w.len() {
        suv += w[k] * u[k] * v[k];
        su += w[k] * u[k];
        sv += w[k] * v[k];
    }
    sw * suv - su * sv
}

/// The same quantity as a double sum ½ Σ_m Σ_n w_m w_n (u_m − u_n)(v_m − v_n).
pub fn pairwise_gap(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    let mut acc = 0.0;
    for m in 0..w.len() {
        for n in 0..w.len() {
            acc += w[m] * w[n] * (u[m] - u[n]) * (v[m] - v[n]);
        }
    }
    0.5 * acc
}

/// Sign of the gap predicted from the monotonicity of u and v.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSign {
    NonNegative,
    NonPositive,
    Zero,
}

/// `None` when either sequence is not monotone or they have no common
/// direction.
pub fn predicted_sign(u: &[f64], v: &[f64]) -> Option<GapSign> {
    let (mu, mv) = (Monotone::of(u), Monotone::of(v));
    if mu == Monotone::Constant || mv == Monotone::Constant {
        return Some(GapSign::Zero);
    }
    let same = (mu.is_non_decreasing() && mv.is_non_decreasing())
        || (mu.is_non_increasing() && mv.is_non_increasing());
    let opposite = (mu.is_non_decreasing() && mv.is_non_increasing())
        || (mu.is_non_increasing() && mv.is_non_decreasing());
    match (same, opposite) {
        (true, _) => Some(GapSign::NonNegative),
        (_, true) => Some(GapSign::NonPositive),
        _ => None,
    }
}

/// Whether the gap is strictly nonzero for monotone u, v and positive w:
/// exactly when neither sequence is constant.
pub fn is_strict(u: &[f64], v: &[f64]) -> bool {
    Monotone::of(u) != Monotone::Constant && Monotone::of(v) != Monotone::Constant
}
