//! The coupled logistic system, its Jacobian, trajectories and the positive
//! equilibrium E*(β).

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MigrationMatrix;
use crate::linalg;
use crate::model::PatchModel;
use crate::ode::{self, EquilibriumStop, OdeOptions};

/// dx/dt for the coupled system at migration rate `beta`.
pub fn vector_field(model: &PatchModel, beta: f64, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    Quadratic::logistic(model).field(beta, x, &mut out);
    out
}

/// ∂(field_i)/∂x_j.
pub fn jacobian(model: &PatchModel, beta: f64, x: &[f64]) -> DMatrix<f64> {
    Quadratic::logistic(model).jacobian(beta, x)
}

/// Σ r_i x_i (1 − x_i/K_i): the total growth, which migration does not change.
pub fn total_growth(model: &PatchModel, x: &[f64]) -> f64 {
    model
        .r()
        .iter()
        .zip(model.k())
        .zip(x)
        .map(|((r, k), x)| r * x * (1.0 - x / k))
        .sum()
}

/// Sampled solution of the coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub beta: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Local error estimate of the last accepted step.
    pub error_estimate: f64,
    pub reached_equilibrium: bool,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn totals(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.iter().sum()).collect()
    }
}

/// Integrates from `x0` over `[0, horizon]`, keeping every accepted step.
pub fn integrate(
    model: &PatchModel,
    beta: f64,
    x0: &[f64],
    horizon: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let out = integrate_observed(model, beta, x0, horizon, opts, |t, x| {
        times.push(t);
        states.push(x.to_vec());
    })?;
    Ok(Trajectory {
        beta,
        times,
        states,
        error_estimate: out.error_estimate,
        reached_equilibrium: out.reached_equilibrium,
    })
}

/// Like [`integrate`] but streams accepted steps to `observer` instead of
/// storing them.
pub fn integrate_observed<O: FnMut(f64, &[f64])>(
    model: &PatchModel,
    beta: f64,
    x0: &[f64],
    horizon: f64,
    opts: &OdeOptions,
    observer: O,
) -> Result<ode::OdeOutcome> {
    check_state(model.n(), x0)?;
    let sys = Quadratic::logistic(model);
    ode::integrate(
        |_, x, dx| sys.field(beta, x, dx),
        x0,
        horizon,
        opts,
        observer,
    )
}

fn check_state(n: usize, x: &[f64]) -> Result<()> {
    if x.len() != n {
        return Err(Error::InvalidModel(format!(
            "state has {} components, model has {n} patches",
            x.len()
        )));
    }
    if x.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidModel(
            "initial state must be nonnegative".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NewtonContinuation,
    OdeRelaxation,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::NewtonContinuation => "newton-continuation",
            Method::OdeRelaxation => "ode-relaxation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub beta: f64,
    pub x: Vec<f64>,
    /// max_i |f_i(x) + β(Γx)_i|
    pub residual: f64,
    pub method: Method,
}

impl Equilibrium {
    pub fn total_population(&self) -> f64 {
        self.x.iter().sum()
    }
}

pub fn total_population(e: &Equilibrium) -> f64 {
    e.total_population()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Newton stops once ‖F‖∞ ≤ tol · (magnitude of the terms of F).
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: u32,
    pub continuation_ratio: f64,
    /// Above this β the residual is divided by β.
    pub rescale_beta: f64,
    /// From this β on, Newton is seeded with the perfect-mixing limit.
    pub limit_seed_beta: f64,
    pub ode_fallback: bool,
    pub relax_horizon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
            max_halvings: 30,
            continuation_ratio: 1.05,
            rescale_beta: 1e4,
            limit_seed_beta: 1e3,
            ode_fallback: true,
            relax_horizon: 1e6,
        }
    }
}

/// Damped Newton with continuation in β and an ODE fallback.
#[derive(Debug, Clone, Default)]
pub struct EquilibriumSolver {
    pub options: SolverOptions,
}

impl EquilibriumSolver {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }

    pub fn solve(&self, model: &PatchModel, beta: f64) -> Result<Equilibrium> {
        check_beta(beta)?;
        if beta == 0.0 || model.n() == 1 {
            return Ok(Equilibrium {
                beta,
                x: model.k().to_vec(),
                residual: 0.0,
                method: Method::NewtonContinuation,
            });
        }
        let sys = Quadratic::logistic(model);
        let opts = &self.options;

        let limit_seed = crate::mixing::limit_equilibrium(model)
            .ok()
            .map(|l| l.e_infinity);
        let mut seeds: Vec<Vec<f64>> = Vec::with_capacity(2);
        match (&limit_seed, beta >= opts.limit_seed_beta) {
            (Some(e), true) => {
                seeds.push(e.clone());
                seeds.push(model.k().to_vec());
            }
            (Some(e), false) => {
                seeds.push(model.k().to_vec());
                seeds.push(e.clone());
            }
            (None, _) => seeds.push(model.k().to_vec()),
        }

        for seed in &seeds {
            if let Ok((x, residual)) = sys.newton(beta, seed, opts) {
                if let Ok(e) = self.finish(model, beta, x, residual, Method::NewtonContinuation) {
                    return Ok(e);
                }
            }
        }

        let cont = self.continuation(&sys, beta).and_then(|(x, residual)| {
            self.finish(model, beta, x, residual, Method::NewtonContinuation)
        });
        match cont {
            Ok(e) => Ok(e),
            Err(_) if opts.ode_fallback => {
                let (x, residual) = sys.relax(beta, model.k(), opts)?;
                self.finish(model, beta, x, residual, Method::OdeRelaxation)
            }
            Err(e) => Err(e),
        }
    }

    /// Newton from `seed` first, then the full strategy of [`Self::solve`].
    pub fn solve_from(&self, model: &PatchModel, beta: f64, seed: &[f64]) -> Result<Equilibrium> {
        check_beta(beta)?;
        if beta > 0.0 && model.n() > 1 && seed.len() == model.n() {
            let sys = Quadratic::logistic(model);
            if let Ok((x, r)) = sys.newton(beta, seed, &self.options) {
                if let Ok(e) = self.finish(model, beta, x, r, Method::NewtonContinuation) {
                    return Ok(e);
                }
            }
        }
        self.solve(model, beta)
    }

    /// Solves along `betas` in the given order, seeding each point with the
    /// previous solution. Points that fail on the path are retried with
    /// [`EquilibriumSolver::solve`].
    pub fn solve_path(&self, model: &PatchModel, betas: &[f64]) -> Vec<Result<Equilibrium>> {
        let sys = Quadratic::logistic(model);
        let mut prev: Option<Vec<f64>> = None;
        let mut out = Vec::with_capacity(betas.len());
        for &beta in betas {
            let res = match (&prev, check_beta(beta)) {
                (_, Err(e)) => Err(e),
                (Some(seed), Ok(())) if beta > 0.0 && model.n() > 1 => {
                    match sys.newton(beta, seed, &self.options) {
                        Ok((x, r)) => self
                            .finish(model, beta, x, r, Method::NewtonContinuation)
                            .or_else(|_| self.solve(model, beta)),
                        Err(_) => self.solve(model, beta),
                    }
                }
                _ => self.solve(model, beta),
            };
            if let Ok(e) = &res {
                prev = Some(e.x.clone());
            }
            out.push(res);
        }
        out
    }

    fn continuation(&self, sys: &Quadratic<'_>, beta: f64) -> Result<(Vec<f64>, f64)> {
        let min_rate = sys.a.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let norm = sys.gamma.inf_norm().max(f64::MIN_POSITIVE);
        let start = (1e-4 * min_rate / norm).min(beta);
        let base: Vec<f64> = sys.a.iter().zip(sys.b).map(|(a, b)| a / b).collect();
        let (mut x, _) = sys.newton(start, &base, &self.options)?;
        let mut b = start;
        let mut ratio = self.options.continuation_ratio;
        while b < beta {
            let next = (b * ratio).min(beta);
            match sys.newton(next, &x, &self.options) {
                Ok((y, _)) => {
                    x = y;
                    b = next;
                }
                Err(e) => {
                    ratio = 1.0 + (ratio - 1.0) / 2.0;
                    if ratio < 1.0 + 1e-6 {
                        return Err(e);
                    }
                }
            }
        }
        let (x, r) = sys.newton(beta, &x, &self.options)?;
        Ok((x, r))
    }

    fn finish(
        &self,
        model: &PatchModel,
        beta: f64,
        x: Vec<f64>,
        residual: f64,
        method: Method,
    ) -> Result<Equilibrium> {
        let above = x
            .iter()
            .zip(model.k())
            .any(|(x, k)| *x >= k - 1e-9 * k.max(1.0));
        if !above {
            return Err(Error::ConvergenceFailure {
                beta,
                reason: "candidate has every patch below capacity".into(),
            });
        }
        Ok(Equilibrium {
            beta,
            x,
            residual,
            method,
        })
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidModel(format!(
            "beta = {beta} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// E*(β) with default solver options.
pub fn equilibrium(model: &PatchModel, beta: f64) -> Result<Equilibrium> {
    EquilibriumSolver::default().solve(model, beta)
}

/// dx*/dβ at an equilibrium, from J · dx/dβ = −Γx.
pub fn beta_sensitivity(model: &PatchModel, eq: &Equilibrium) -> Result<Vec<f64>> {
    let j = jacobian(model, eq.beta, &eq.x);
    let rhs: Vec<f64> = model.gamma().apply(&eq.x).iter().map(|v| -v).collect();
    linalg::solve(&j, &rhs).ok_or(Error::ConvergenceFailure {
        beta: eq.beta,
        reason: "singular Jacobian at equilibrium".into(),
    })
}

/// CSV with columns `beta,x_1..x_n,X_T,residual,method`.
pub fn write_equilibria_csv<W: Write>(w: W, rows: &[Equilibrium]) -> Result<()> {
    let n = rows.first().map_or(0, |e| e.x.len());
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["beta".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["X_T", "residual", "method"].map(String::from));
    let io = |e: csv::Error| Error::InvalidModel(format!("csv output failed: {e}"));
    wr.write_record(&header).map_err(io)?;
    for e in rows {
        let mut rec = vec![fmt_real(e.beta)];
        rec.extend(e.x.iter().map(|v| fmt_real(*v)));
        rec.push(fmt_real(e.total_population()));
        rec.push(fmt_real(e.residual));
        rec.push(e.method.as_str().to_string());
        wr.write_record(&rec).map_err(io)?;
    }
    wr.flush()
        .map_err(|e| Error::InvalidModel(format!("csv output failed: {e}")))?;
    Ok(())
}

/// Round-trippable formatting shared by all CSV outputs.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// dx_i/dt = a_i x_i − b_i x_i² + c (Γx)_i
///
/// The logistic model has a = r, b = α, c = β. The SIS limit reuses it with
/// a_i of either sign.
pub(crate) struct Quadratic<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub gamma: &'a MigrationMatrix,
}

impl<'a> Quadratic<'a> {
    pub fn logistic(model: &'a PatchModel) -> Self {
        Self {
            a: model.r(),
            b: model.alpha(),
            gamma: model.gamma(),
        }
    }

    pub fn field(&self, c: f64, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let row = self.gamma.row(i);
            let mut mig = 0.0;
            for j in 0..n {
                mig += row[j] * x[j];
            }
            out[i] = self.a[i] * x[i] - self.b[i] * x[i] * x[i] + c * mig;
        }
    }

    fn scale(&self, c: f64, x: &[f64]) -> f64 {
        let n = x.len();
        let mut s: f64 = 0.0;
        for i in 0..n {
            let row = self.gamma.row(i);
            let mig: f64 = (0..n).map(|j| (row[j] * x[j]).abs()).sum();
            s = s.max((self.a[i] * x[i]).abs() + self.b[i] * x[i] * x[i] + c * mig);
        }
        s
    }

    pub fn jacobian(&self, c: f64, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::from_fn(n, n, |i, j| {
            let g = c * self.gamma.get(i, j);
            if i == j {
                self.a[i] - 2.0 * self.b[i] * x[i] + g
            } else {
                g
            }
        })
    }

    /// Damped Newton from `seed`. Iterates stay strictly positive; Armijo
    /// backtracking on ‖F‖². Returns the solution and its unscaled residual.
    pub fn newton(&self, c: f64, seed: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, f64)> {
        let n = seed.len();
        if seed.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::ConvergenceFailure {
                beta: c,
                reason: "seed is not strictly positive".into(),
            });
        }
        let unit = if c > opts.rescale_beta { 1.0 / c } else { 1.0 };
        let mut x = seed.to_vec();
        let mut f = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut ft = vec![0.0; n];

        self.field(c, &x, &mut f);
        let mut merit = sq_norm(&f) * unit * unit;
        let mut converged_at: Option<usize> = None;
        let seed_max = linalg::max_abs(seed);

        for iter in 0..opts.max_iter {
            let fmax = linalg::max_abs(&f);
            if fmax <= opts.tol * self.scale(c, &x) {
                converged_at.get_or_insert(iter);
            }
            // A couple of extra steps after convergence polish the last digits.
            if let Some(k) = converged_at {
                if iter >= k + 2 || fmax == 0.0 {
                    break;
                }
            }

            let j = self.jacobian(c, &x) * unit;
            let rhs: Vec<f64> = f.iter().map(|v| -v * unit).collect();
            let Some(dx) = linalg::solve(&j, &rhs) else {
                if converged_at.is_some() {
                    break;
                }
                return Err(Error::ConvergenceFailure {
                    beta: c,
                    reason: "singular Jacobian".into(),
                });
            };

            let mut lambda = 1.0;
            let mut accepted = false;
            let mut hit_boundary = false;
            for _ in 0..=opts.max_halvings {
                for i in 0..n {
                    trial[i] = x[i] + lambda * dx[i];
                }
                if trial.iter().all(|v| *v > 0.0) {
                    self.field(c, &trial, &mut ft);
                    let m = sq_norm(&ft) * unit * unit;
                    if m <= (1.0 - 1e-4 * lambda) * merit || (converged_at.is_some() && m <= merit)
                    {
                        accepted = true;
                        break;
                    }
                } else {
                    hit_boundary = true;
                }
                lambda *= 0.5;
            }
            if !accepted {
                if converged_at.is_some() {
                    break;
                }
                if hit_boundary {
                    return Err(Error::NonPositiveSolution { beta: c });
                }
                return Err(Error::ConvergenceFailure {
                    beta: c,
                    reason: format!("line search stalled with residual {fmax:e}"),
                });
            }
            std::mem::swap(&mut x, &mut trial);
            std::mem::swap(&mut f, &mut ft);
            merit = sq_norm(&f) * unit * unit;
        }

        let fmax = linalg::max_abs(&f);
        if converged_at.is_none() && fmax > opts.tol * self.scale(c, &x) {
            return Err(Error::ConvergenceFailure {
                beta: c,
                reason: format!("no convergence in {} iterations", opts.max_iter),
            });
        }
        if x.iter().any(|v| !(*v > 0.0)) || linalg::max_abs(&x) < 1e-8 * seed_max {
            return Err(Error::NonPositiveSolution { beta: c });
        }
        Ok((x, fmax))
    }

    /// Integrates to rest from `x0`, then polishes with Newton.
    pub fn relax(&self, c: f64, x0: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, f64)> {
        let ode_opts = OdeOptions {
            stop_at_equilibrium: Some(EquilibriumStop {
                tol: 1e-7,
                consecutive: 3,
            }),
            max_steps: 5_000_000,
            ..Default::default()
        };
        let out = ode::integrate(
            |_, x, dx| self.field(c, x, dx),
            x0,
            opts.relax_horizon,
            &ode_opts,
            |_, _| {},
        )?;
        if !out.reached_equilibrium {
            return Err(Error::ConvergenceFailure {
                beta: c,
                reason: "trajectory did not settle within the relaxation horizon".into(),
            });
        }
        self.newton(c, &out.y, opts)
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
