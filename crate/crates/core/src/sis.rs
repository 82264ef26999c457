//! SIS epidemic on patches with migration, its limit system and the exact
//! correspondence with the logistic patch model.
//!
//! Full system, with N_i = S_i + I_i:
//!
//! S_i' = −β_i S_i I_i / N_i + γ_i I_i + ε (ΓS)_i
//! I_i' =  β_i S_i I_i / N_i − γ_i I_i + ε (ΓI)_i
//!
//! N(t) → N* ∝ δ, and the infected compartment then follows
//! I_i' = β_i I_i (1 − I_i/N_i*) − γ_i I_i + ε (ΓI)_i.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Quadratic, SolverOptions};
use crate::error::{Error, Result};
use crate::graph::{FluxSpec, MigrationMatrix, MigrationSpec};
use crate::linalg;
use crate::model::PatchModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SisSpec", into = "SisSpec")]
pub struct SisModel {
    beta_rates: Vec<f64>,
    gamma_rates: Vec<f64>,
    gamma: MigrationMatrix,
    total_n: f64,
    epsilon: Option<f64>,
    delta: Vec<f64>,
}

impl SisModel {
    pub fn new(
        beta_rates: Vec<f64>,
        gamma_rates: Vec<f64>,
        gamma: MigrationMatrix,
        total_n: f64,
    ) -> Result<Self> {
        let n = gamma.n();
        if beta_rates.len() != n || gamma_rates.len() != n {
            return Err(Error::InvalidModel(format!(
                "expected {n} transmission and recovery rates, got {} and {}",
                beta_rates.len(),
                gamma_rates.len()
            )));
        }
        for (i, (&b, &g)) in beta_rates.iter().zip(&gamma_rates).enumerate() {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "beta_rates[{}] = {b} must be positive",
                    i + 1
                )));
            }
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "gamma_rates[{}] = {g} must be nonnegative",
                    i + 1
                )));
            }
        }
        if !(total_n > 0.0 && total_n.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "N = {total_n} must be positive"
            )));
        }
        let delta = if n == 1 {
            vec![1.0]
        } else {
            gamma.kernel_vector()?.normalized().to_vec()
        };
        Ok(Self {
            beta_rates,
            gamma_rates,
            gamma,
            total_n,
            epsilon: None,
            delta,
        })
    }

    /// Default diffusion coefficient carried by the JSON form.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "epsilon = {epsilon} must be >= 0"
            )));
        }
        self.epsilon = Some(epsilon);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.gamma.n()
    }

    pub fn beta_rates(&self) -> &[f64] {
        &self.beta_rates
    }

    pub fn gamma_rates(&self) -> &[f64] {
        &self.gamma_rates
    }

    pub fn gamma(&self) -> &MigrationMatrix {
        &self.gamma
    }

    pub fn total_n(&self) -> f64 {
        self.total_n
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Normalized kernel vector of Γ.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// N_i* = N δ_i / Σδ.
    pub fn n_star(&self) -> Vec<f64> {
        self.delta.iter().map(|d| self.total_n * d).collect()
    }

    /// Spectral radius of F V⁻¹ with F = diag(β), V = diag(γ) − εΓ.
    pub fn r0(&self, epsilon: f64) -> Result<f64> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "epsilon = {epsilon} must be >= 0"
            )));
        }
        let n = self.n();
        let any_zero = self.gamma_rates.contains(&0.0);
        let all_zero = self.gamma_rates.iter().all(|g| *g == 0.0);
        if (epsilon == 0.0 || n == 1) && any_zero || all_zero {
            return Err(Error::SingularV);
        }
        if epsilon == 0.0 {
            return Ok(self
                .beta_rates
                .iter()
                .zip(&self.gamma_rates)
                .map(|(b, g)| b / g)
                .fold(0.0, f64::max));
        }
        let v = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { self.gamma_rates[i] } else { 0.0 };
            d - epsilon * self.gamma.get(i, j)
        });
        let vinv = v.try_inverse().ok_or(Error::SingularV)?;
        let fv = DMatrix::from_fn(n, n, |i, j| self.beta_rates[i] * vinv[(i, j)]);
        Ok(linalg::eigenvalues(&fv)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max))
    }

    /// R0(+∞) = Σβδ / Σγδ.
    pub fn r0_infinity(&self) -> f64 {
        let num: f64 = self
            .beta_rates
            .iter()
            .zip(&self.delta)
            .map(|(b, d)| b * d)
            .sum();
        let den: f64 = self
            .gamma_rates
            .iter()
            .zip(&self.delta)
            .map(|(g, d)| g * d)
            .sum();
        num / den
    }

    pub fn total_infection_at_infinity(&self) -> InfectionAtInfinity {
        let r0 = self.r0_infinity();
        if r0 > 1.0 {
            InfectionAtInfinity {
                r0_infinity: r0,
                total: (1.0 - 1.0 / r0) * self.total_n,
                disease_free: false,
            }
        } else {
            InfectionAtInfinity {
                r0_infinity: r0,
                total: 0.0,
                disease_free: true,
            }
        }
    }

    /// I_i*(0) = ((β_i − γ_i)/β_i) N_i*.
    pub fn infected_at_zero(&self) -> Vec<f64> {
        self.n_star()
            .iter()
            .zip(self.beta_rates.iter().zip(&self.gamma_rates))
            .map(|(ns, (b, g))| (b - g) / b * ns)
            .collect()
    }

    /// dT_n/dε at ε = 0: Σ_i (1/|β_i − γ_i|) Σ_j γ_ij I_j*(0).
    pub fn derivative_at_zero(&self) -> Result<f64> {
        if let Some(i) = self
            .beta_rates
            .iter()
            .zip(&self.gamma_rates)
            .position(|(b, g)| b == g)
        {
            return Err(Error::DegenerateRates { patch: i + 1 });
        }
        let flow = self.gamma.apply(&self.infected_at_zero());
        Ok(flow
            .iter()
            .zip(self.beta_rates.iter().zip(&self.gamma_rates))
            .map(|(f, (b, g))| f / (b - g).abs())
            .sum())
    }

    /// Positive equilibrium of the limit system at diffusion ε, or the
    /// disease-free state when R0(ε) ≤ 1.
    pub fn endemic_equilibrium(&self, epsilon: f64) -> Result<EndemicState> {
        let n_star = self.n_star();
        if epsilon == 0.0 || self.n() == 1 {
            let i0: Vec<f64> = self.infected_at_zero().iter().map(|v| v.max(0.0)).collect();
            return Ok(if i0.iter().all(|v| *v == 0.0) {
                EndemicState::DiseaseFree
            } else {
                EndemicState::Endemic(i0)
            });
        }
        let below = match self.r0(epsilon) {
            Ok(r0) => r0 <= 1.0,
            // All recovery rates zero: every patch is a source.
            Err(Error::SingularV) => false,
            Err(e) => return Err(e),
        };
        if below {
            return Ok(EndemicState::DiseaseFree);
        }

        let a: Vec<f64> = self
            .beta_rates
            .iter()
            .zip(&self.gamma_rates)
            .map(|(b, g)| b - g)
            .collect();
        let b: Vec<f64> = self
            .beta_rates
            .iter()
            .zip(&n_star)
            .map(|(b, ns)| b / ns)
            .collect();
        let sys = Quadratic {
            a: &a,
            b: &b,
            gamma: &self.gamma,
        };
        let opts = SolverOptions::default();
        let accept = |x: &[f64]| {
            x.iter()
                .zip(&n_star)
                .all(|(x, ns)| *x > 0.0 && *x <= ns * (1.0 + 1e-9))
        };

        let floor: Vec<f64> = self
            .infected_at_zero()
            .iter()
            .zip(&n_star)
            .map(|(i, ns)| i.max(1e-3 * ns))
            .collect();
        let spread = self.total_infection_at_infinity().total;
        let mut seeds = vec![floor];
        if spread > 0.0 {
            seeds.push(self.delta.iter().map(|d| spread * d).collect());
        }
        seeds.push(n_star.iter().map(|v| 0.5 * v).collect());
        for seed in &seeds {
            if let Ok((x, _)) = sys.newton(epsilon, seed, &opts) {
                if accept(&x) {
                    return Ok(EndemicState::Endemic(x));
                }
            }
        }
        // N* is an upper solution; the trajectory from it decreases to the
        // endemic state.
        let (x, _) = sys.relax(epsilon, &n_star, &opts)?;
        if accept(&x) {
            Ok(EndemicState::Endemic(x))
        } else {
            Err(Error::ConvergenceFailure {
                beta: epsilon,
                reason: "endemic candidate outside (0, N*]".into(),
            })
        }
    }

    pub fn limit(&self, epsilon: f64) -> Result<SisLimit> {
        let r0 = self.r0(epsilon)?;
        let endemic = match self.endemic_equilibrium(epsilon)? {
            EndemicState::Endemic(x) => Some(x),
            EndemicState::DiseaseFree => None,
        };
        Ok(SisLimit {
            n_star: self.n_star(),
            r0,
            endemic,
        })
    }

    /// Limit-system vector field for I.
    pub fn limit_field(&self, epsilon: f64, i: &[f64], out: &mut [f64]) {
        let n_star = self.n_star();
        let mig = self.gamma.apply(i);
        for k in 0..self.n() {
            out[k] = self.beta_rates[k] * i[k] * (1.0 - i[k] / n_star[k])
                - self.gamma_rates[k] * i[k]
                + epsilon * mig[k];
        }
    }

    /// Full 2n-dimensional vector field; `state` holds S followed by I.
    pub fn full_field(&self, epsilon: f64, state: &[f64], out: &mut [f64]) {
        let n = self.n();
        let (s, i) = state.split_at(n);
        let ms = self.gamma.apply(s);
        let mi = self.gamma.apply(i);
        for k in 0..n {
            let total = s[k] + i[k];
            let inc = if total > 0.0 {
                self.beta_rates[k] * s[k] * i[k] / total
            } else {
                0.0
            };
            let rec = self.gamma_rates[k] * i[k];
            out[k] = -inc + rec + epsilon * ms[k];
            out[n + k] = inc - rec + epsilon * mi[k];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EndemicState {
    DiseaseFree,
    Endemic(Vec<f64>),
}

impl EndemicState {
    pub fn total(&self) -> f64 {
        match self {
            EndemicState::DiseaseFree => 0.0,
            EndemicState::Endemic(x) => x.iter().sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisLimit {
    pub n_star: Vec<f64>,
    pub r0: f64,
    pub endemic: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfectionAtInfinity {
    pub r0_infinity: f64,
    /// (1 − 1/R0(+∞)) N, or 0 when disease-free.
    pub total: f64,
    pub disease_free: bool,
}

/// N δ / Σδ.
pub fn sis_limit_populations(total_n: f64, gamma: &MigrationMatrix) -> Result<Vec<f64>> {
    if !(total_n > 0.0 && total_n.is_finite()) {
        return Err(Error::InvalidModel(format!(
            "N = {total_n} must be positive"
        )));
    }
    if gamma.n() == 1 {
        return Ok(vec![total_n]);
    }
    Ok(gamma
        .kernel_vector()?
        .normalized()
        .iter()
        .map(|d| total_n * d)
        .collect())
}

/// Smallest N for which every N_i* exceeds K_i: max_i (Σδ/δ_i) K_i.
pub fn minimal_total_population(model: &PatchModel) -> Result<f64> {
    let delta = if model.n() == 1 {
        vec![1.0]
    } else {
        model.gamma().kernel_vector()?.normalized().to_vec()
    };
    Ok(delta
        .iter()
        .zip(model.k())
        .map(|(d, k)| k / d)
        .fold(0.0, f64::max))
}

/// β_i = N_i* α_i, γ_i = (N_i* − K_i) α_i, so that
/// r_i x (1 − x/K_i) = β_i x (1 − x/N_i*) − γ_i x for every x.
/// `total_n = None` picks twice the minimal admissible N.
pub fn logistic_to_sis(model: &PatchModel, total_n: Option<f64>) -> Result<SisModel> {
    let minimal = minimal_total_population(model)?;
    let total_n = match total_n {
        None => 2.0 * minimal,
        Some(v) if v > minimal => v,
        Some(v) => return Err(Error::NTooSmall { given: v, minimal }),
    };
    let n_star = sis_limit_populations(total_n, model.gamma())?;
    let beta: Vec<f64> = n_star
        .iter()
        .zip(model.alpha())
        .map(|(ns, a)| ns * a)
        .collect();
    let gamma: Vec<f64> = n_star
        .iter()
        .zip(model.k().iter().zip(model.alpha()))
        .map(|(ns, (k, a))| (ns - k) * a)
        .collect();
    SisModel::new(beta, gamma, model.gamma().clone(), total_n)
}

/// JSON form: the migration object plus `beta_rates`, `gamma_rates`, `N`
/// and an optional `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SisSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default)]
    pub fluxes: Vec<FluxSpec>,
    pub beta_rates: Vec<f64>,
    pub gamma_rates: Vec<f64>,
    #[serde(rename = "N")]
    pub total_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl TryFrom<SisSpec> for SisModel {
    type Error = Error;

    fn try_from(spec: SisSpec) -> Result<Self> {
        let gamma = MigrationMatrix::try_from(MigrationSpec {
            n: spec.n,
            fluxes: spec.fluxes,
        })?;
        let m = SisModel::new(spec.beta_rates, spec.gamma_rates, gamma, spec.total_n)?;
        match spec.epsilon {
            Some(e) => m.with_epsilon(e),
            None => Ok(m),
        }
    }
}

impl From<SisModel> for SisSpec {
    fn from(m: SisModel) -> Self {
        let mig = MigrationSpec::from(m.gamma);
        SisSpec {
            name: None,
            n: mig.n,
            fluxes: mig.fluxes,
            beta_rates: m.beta_rates,
            gamma_rates: m.gamma_rates,
            total_n: m.total_n,
            epsilon: m.epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::equilibrium;
    use crate::graph::{Flux, ThreePatchFluxes};

    fn pair(g12: f64, g21: f64) -> MigrationMatrix {
        MigrationMatrix::new(2, &[Flux::new(0, 1, g12), Flux::new(1, 0, g21)]).unwrap()
    }

    fn g1_model() -> PatchModel {
        let g = ThreePatchFluxes::from_flat([0.15, 3.0, 0.2, 0.04, 11.0, 0.1])
            .to_matrix()
            .unwrap();
        PatchModel::new(vec![4.0, 0.7, 0.6], vec![5.0, 1.0, 4.0], g).unwrap()
    }

    #[test]
    fn limit_populations() {
        let ns = sis_limit_populations(4.0, &pair(3.0, 1.0)).unwrap();
        assert!((ns[0] - 3.0).abs() < 1e-14 && (ns[1] - 1.0).abs() < 1e-14);
        let ns = sis_limit_populations(2.0, &pair(0.4, 0.4)).unwrap();
        assert!(ns.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn r0_special_cases() {
        let m = SisModel::new(vec![2.0, 3.0], vec![1.0, 2.0], pair(1.0, 2.0), 5.0).unwrap();
        assert!((m.r0(0.0).unwrap() - 2.0).abs() < 1e-14);
        let big = m.r0(1e6).unwrap();
        assert!((big - m.r0_infinity()).abs() <= 1e-3 * m.r0_infinity());
        let single = SisModel::new(vec![3.0], vec![1.5], MigrationMatrix::isolated(), 1.0).unwrap();
        assert!((single.r0(0.7).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_v_reported() {
        let m = SisModel::new(vec![2.0, 3.0], vec![0.0, 2.0], pair(1.0, 2.0), 5.0).unwrap();
        assert_eq!(m.r0(0.0), Err(Error::SingularV));
        assert!(m.r0(1.0).is_ok());
    }

    #[test]
    fn uniform_ratio_halves_population() {
        let m = SisModel::new(vec![2.0, 4.0], vec![1.0, 2.0], pair(1.0, 2.0), 6.0).unwrap();
        let inf = m.total_infection_at_infinity();
        assert!(!inf.disease_free);
        assert!((inf.total - 3.0).abs() < 1e-13);
        // Uniform (β − γ)/β keeps I(0) in the kernel.
        assert!(m.derivative_at_zero().unwrap().abs() < 1e-13);
    }

    #[test]
    fn degenerate_rates_rejected() {
        let m = SisModel::new(vec![2.0, 4.0], vec![2.0, 1.0], pair(1.0, 2.0), 6.0).unwrap();
        assert_eq!(
            m.derivative_at_zero(),
            Err(Error::DegenerateRates { patch: 1 })
        );
    }

    #[test]
    fn correspondence_identity_and_rates() {
        let model = g1_model();
        let sis = logistic_to_sis(&model, None).unwrap();
        let ns = sis.n_star();
        assert!(sis.gamma_rates().iter().all(|g| *g > 0.0));
        for i in 0..3 {
            for x in [0.0, 0.3, model.k()[i], 7.5] {
                let lhs = model.r()[i] * x * (1.0 - x / model.k()[i]);
                let rhs = sis.beta_rates()[i] * x * (1.0 - x / ns[i]) - sis.gamma_rates()[i] * x;
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn n_too_small() {
        let model = g1_model();
        let min = minimal_total_population(&model).unwrap();
        assert_eq!(
            logistic_to_sis(&model, Some(min)),
            Err(Error::NTooSmall {
                given: min,
                minimal: min
            })
        );
    }

    #[test]
    fn mapped_endemic_matches_logistic() {
        let model = g1_model();
        let sis = logistic_to_sis(&model, None).unwrap();
        for eps in [0.0, 1.0, 10.0] {
            let e = sis.endemic_equilibrium(eps).unwrap();
            let x = equilibrium(&model, eps).unwrap();
            let EndemicState::Endemic(i) = e else {
                panic!("disease-free at {eps}");
            };
            assert!(linalg::max_abs_diff(&i, &x.x) < 1e-9);
        }
        let d = crate::analysis::derivative_at_zero(&model).unwrap();
        assert!((sis.derivative_at_zero().unwrap() - d).abs() < 1e-10);
    }

    #[test]
    fn decoupled_endemic_with_sink() {
        let m = SisModel::new(vec![2.0, 1.0], vec![1.0, 2.0], pair(1.0, 1.0), 2.0).unwrap();
        let EndemicState::Endemic(i) = m.endemic_equilibrium(0.0).unwrap() else {
            panic!("expected endemic");
        };
        assert_eq!(i, vec![0.5, 0.0]);
        let EndemicState::Endemic(i) = m.endemic_equilibrium(0.5).unwrap() else {
            panic!("expected endemic");
        };
        let mut f = vec![0.0; 2];
        m.limit_field(0.5, &i, &mut f);
        assert!(linalg::max_abs(&f) < 1e-12);
        assert!(i.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn disease_free_below_threshold() {
        let m = SisModel::new(vec![1.0, 1.0], vec![2.0, 3.0], pair(1.0, 1.0), 2.0).unwrap();
        assert_eq!(
            m.endemic_equilibrium(1.0).unwrap(),
            EndemicState::DiseaseFree
        );
        assert!(m.total_infection_at_infinity().disease_free);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n": 2, "fluxes": [{"to": 1, "from": 2, "rate": 3.0},
            {"to": 2, "from": 1, "rate": 1.0}], "beta_rates": [2.0, 3.0],
            "gamma_rates": [1.0, 1.0], "N": 4.0, "epsilon": 2.5}"#;
        let m: SisModel = serde_json::from_str(text).unwrap();
        assert_eq!(m.epsilon(), Some(2.5));
        assert!((m.n_star()[0] - 3.0).abs() < 1e-14);
        let again: SisModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(m, again);
    }
}
