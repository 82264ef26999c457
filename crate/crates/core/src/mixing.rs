//! The β → ∞ limit: equilibrium on the kernel of Γ, the reduced logistic
//! equation for the total population, and a comparison of full and reduced
//! trajectories at finite β.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, fmt_real};
use crate::error::{Error, Result};
use crate::graph::KernelVector;
use crate::linalg;
use crate::model::PatchModel;
use crate::ode::OdeOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingLimit {
    /// lim E*(β), proportional to δ.
    pub e_infinity: Vec<f64>,
    pub x_t_infinity: f64,
    /// Σδr / Σδ
    pub r_eff: f64,
    /// Σδr / Σδ²α
    pub k_eff: f64,
    /// (Σδ) k_eff
    pub capacity_total: f64,
}

fn kernel(model: &PatchModel) -> Result<Vec<f64>> {
    if model.n() == 1 {
        return Ok(vec![1.0]);
    }
    Ok(model.gamma().kernel_vector()?.normalized().to_vec())
}

pub fn limit_equilibrium(model: &PatchModel) -> Result<MixingLimit> {
    let delta = kernel(model)?;
    Ok(limit_from_kernel(model, &delta))
}

/// The limit computed from any positive multiple of δ.
pub fn limit_from_kernel(model: &PatchModel, delta: &[f64]) -> MixingLimit {
    let sd: f64 = delta.iter().sum();
    let sdr: f64 = delta.iter().zip(model.r()).map(|(d, r)| d * r).sum();
    let sdda: f64 = delta
        .iter()
        .zip(model.alpha())
        .map(|(d, a)| d * d * a)
        .sum();
    let k_eff = sdr / sdda;
    let e_infinity = delta.iter().map(|d| d * k_eff).collect();
    MixingLimit {
        e_infinity,
        x_t_infinity: sd * k_eff,
        r_eff: sdr / sd,
        k_eff,
        capacity_total: sd * k_eff,
    }
}

/// One-dimensional logistic equation Y' = r Y (1 − Y/C) for the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedLogistic {
    pub r_eff: f64,
    pub carrying: f64,
}

impl ReducedLogistic {
    pub fn solution(&self, y0: f64, t: f64) -> f64 {
        if y0 == 0.0 {
            return 0.0;
        }
        let c = self.carrying;
        c * y0 / (y0 + (c - y0) * (-self.r_eff * t).exp())
    }
}

pub fn reduced_logistic(model: &PatchModel) -> Result<ReducedLogistic> {
    let l = limit_equilibrium(model)?;
    Ok(ReducedLogistic {
        r_eff: l.r_eff,
        carrying: l.capacity_total,
    })
}

/// The point δ X / Σδ of the slow manifold with total X.
pub fn slow_manifold(model: &PatchModel, total: f64) -> Result<Vec<f64>> {
    if !(total >= 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "total {total} must be >= 0"
        )));
    }
    let delta = kernel(model)?;
    Ok(slow_point(&delta, total))
}

fn slow_point(delta: &[f64], total: f64) -> Vec<f64> {
    let sd: f64 = delta.iter().sum();
    delta.iter().map(|d| d * total / sd).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovSample {
    pub t: f64,
    pub x_full: f64,
    pub y_reduced: f64,
    pub err_slow: f64,
    pub err_fast_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovReport {
    pub beta: f64,
    pub horizon: f64,
    /// Boundary-layer cutoff for the fast error.
    pub t0: f64,
    /// sup over [0, horizon] of |Σx_i − Y|.
    pub slow_error: f64,
    /// sup over [t0, horizon] of max_i |x_i − δ_i Y/Σδ|.
    pub fast_error: f64,
    pub samples: Vec<TikhonovSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TikhonovOptions {
    /// Defaults to 5 / (β |λ₂|), λ₂ the spectral abscissa of L − U.
    pub t0: Option<f64>,
    pub max_samples: usize,
    pub ode: OdeOptions,
}

impl Default for TikhonovOptions {
    fn default() -> Self {
        Self {
            t0: None,
            max_samples: 2000,
            ode: OdeOptions::default(),
        }
    }
}

pub fn tikhonov_compare(
    model: &PatchModel,
    beta: f64,
    x0: &[f64],
    horizon: f64,
    opts: &TikhonovOptions,
) -> Result<TikhonovReport> {
    model.require_migration()?;
    if !(beta > 0.0) {
        return Err(Error::PreconditionViolated("beta must be positive".into()));
    }
    let delta = kernel(model)?;
    let reduced = reduced_logistic(model)?;
    let t0 = match opts.t0 {
        Some(t0) => t0,
        None => {
            let abscissa = model.gamma().spectral_check().fast_spectral_abscissa();
            5.0 / (beta * abscissa.abs())
        }
    };
    let y0: f64 = x0.iter().sum();
    let every = horizon / opts.max_samples.max(1) as f64;
    let mut next_record = 0.0;
    let mut slow: f64 = 0.0;
    let mut fast: f64 = 0.0;
    let mut samples = Vec::new();
    let mut last: Option<TikhonovSample> = None;

    dynamics::integrate_observed(model, beta, x0, horizon, &opts.ode, |t, x| {
        let total: f64 = x.iter().sum();
        let y = reduced.solution(y0, t);
        let es = (total - y).abs();
        let ef = linalg::max_abs_diff(x, &slow_point(&delta, y));
        slow = slow.max(es);
        if t >= t0 {
            fast = fast.max(ef);
        }
        let s = TikhonovSample {
            t,
            x_full: total,
            y_reduced: y,
            err_slow: es,
            err_fast_max: ef,
        };
        if t >= next_record {
            samples.push(s.clone());
            next_record = t + every;
            last = None;
        } else {
            last = Some(s);
        }
    })?;
    if let Some(s) = last {
        samples.push(s);
    }

    Ok(TikhonovReport {
        beta,
        horizon,
        t0,
        slow_error: slow,
        fast_error: fast,
        samples,
    })
}

/// CSV with columns `t,X_full,Y_reduced,err_slow,err_fast_max`.
pub fn write_tikhonov_csv<W: Write>(w: W, report: &TikhonovReport) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidModel(format!("csv output failed: {e}"));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "X_full", "Y_reduced", "err_slow", "err_fast_max"])
        .map_err(io)?;
    for s in &report.samples {
        wr.write_record([
            fmt_real(s.t),
            fmt_real(s.x_full),
            fmt_real(s.y_reduced),
            fmt_real(s.err_slow),
            fmt_real(s.err_fast_max),
        ])
        .map_err(io)?;
    }
    wr.flush()
        .map_err(|e| Error::InvalidModel(format!("csv output failed: {e}")))?;
    Ok(())
}

/// Convenience for callers that already hold δ.
pub fn limit_from_kernel_vector(model: &PatchModel, k: &KernelVector) -> MixingLimit {
    limit_from_kernel(model, k.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Flux, MigrationMatrix, ThreePatchFluxes};

    fn g1_model() -> PatchModel {
        let g = ThreePatchFluxes::from_flat([0.15, 3.0, 0.2, 0.04, 11.0, 0.1])
            .to_matrix()
            .unwrap();
        PatchModel::new(vec![4.0, 0.7, 0.6], vec![5.0, 1.0, 4.0], g).unwrap()
    }

    #[test]
    fn g1_limit_total() {
        let l = limit_equilibrium(&g1_model()).unwrap();
        // Hand evaluation with raw δ = (0.86, 0.041, 4.45).
        let d = [0.86, 0.041, 4.45];
        let sdr = 0.86 * 4.0 + 0.041 * 0.7 + 4.45 * 0.6;
        let sdda = 0.86f64.powi(2) * 0.8 + 0.041f64.powi(2) * 0.7 + 4.45f64.powi(2) * 0.15;
        let hand = d.iter().sum::<f64>() * sdr / sdda;
        assert!((sdr - 6.1387).abs() < 1e-12);
        assert!((sdda - 3.5632).abs() < 1e-4);
        assert!((l.x_t_infinity - hand).abs() < 1e-12);
        assert!((l.x_t_infinity - 9.218_6).abs() < 1e-4);
        assert_eq!(l.capacity_total, l.x_t_infinity);
    }

    #[test]
    fn two_patch_limit_formula() {
        let (g12, g21) = (3.0, 0.15);
        let g = MigrationMatrix::new(2, &[Flux::new(0, 1, g12), Flux::new(1, 0, g21)]).unwrap();
        let m = PatchModel::new(vec![1.0, 2.0], vec![1.5, 4.0], g).unwrap();
        let a = m.alpha();
        let expect = (g12 + g21) * (g12 * 1.0 + g21 * 2.0) / (g12 * g12 * a[0] + g21 * g21 * a[1]);
        let l = limit_equilibrium(&m).unwrap();
        assert!((l.x_t_infinity - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn capacities_on_kernel_give_sum() {
        let m0 = g1_model();
        let delta = m0.gamma().kernel_vector().unwrap();
        let k: Vec<f64> = delta.normalized().iter().map(|d| 7.0 * d).collect();
        let m = m0.with_capacities(k.clone()).unwrap();
        let l = limit_equilibrium(&m).unwrap();
        assert!((l.x_t_infinity - k.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_migration_gives_harmonic_form() {
        let g = MigrationMatrix::from_offdiagonal(&[
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 0.5],
            vec![2.0, 0.5, 0.0],
        ])
        .unwrap();
        let m = PatchModel::new(vec![1.0, 2.0, 3.0], vec![2.0, 1.0, 6.0], g).unwrap();
        let red = reduced_logistic(&m).unwrap();
        let sa: f64 = m.alpha().iter().sum();
        assert!((red.r_eff - 2.0).abs() < 1e-12);
        assert!((red.carrying - 3.0 * 6.0 / sa).abs() < 1e-12);
    }

    #[test]
    fn scaling_delta_by_powers_of_two_is_exact() {
        let m = g1_model();
        let d = m.gamma().kernel_vector().unwrap().normalized().to_vec();
        let base = limit_from_kernel(&m, &d);
        for c in [0.25, 2.0, 1024.0] {
            let scaled: Vec<f64> = d.iter().map(|v| v * c).collect();
            let l = limit_from_kernel(&m, &scaled);
            assert_eq!(l.e_infinity, base.e_infinity);
            assert_eq!(l.x_t_infinity, base.x_t_infinity);
            assert_eq!(l.r_eff, base.r_eff);
        }
    }

    #[test]
    fn slow_manifold_solves_fast_equilibrium() {
        let m = g1_model();
        let z = slow_manifold(&m, 3.7).unwrap();
        let lu = m.gamma().fast_subsystem_matrix();
        let v = m.gamma().fast_subsystem_forcing();
        let total = 3.7;
        for i in 0..2 {
            let mut s = total * v[i];
            for k in 0..2 {
                s += lu[(i, k)] * z[k];
            }
            assert!(s.abs() < 1e-12);
        }
        assert_eq!(slow_manifold(&m, 0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn tikhonov_errors_shrink_with_beta() {
        let m = g1_model();
        let opts = TikhonovOptions::default();
        let lo = tikhonov_compare(&m, 1e2, m.k(), 5.0, &opts).unwrap();
        let hi = tikhonov_compare(&m, 1e4, m.k(), 5.0, &opts).unwrap();
        assert!(hi.slow_error < lo.slow_error);
        assert!(hi.fast_error < lo.fast_error);
        assert!(hi.samples.len() <= opts.max_samples + 2);
    }
}
