//! Roots of β ↦ X_T*(β) − ΣK on a geometric grid.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::verdict::{compare_infinity_vs_zero, DispersalVerdict};
use crate::dynamics::{beta_sensitivity, fmt_real, Equilibrium, EquilibriumSolver};
use crate::error::{Error, Result};
use crate::model::PatchModel;
use crate::random::geometric_grid;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub beta_min: f64,
    pub beta_max: f64,
    pub points: usize,
    /// Required |gap| at a refined root, relative to ΣK.
    pub refine_tol: f64,
    /// Interior local minima of |gap| below this (relative to ΣK) without a
    /// sign change are re-sampled and, failing that, flagged as tangencies.
    pub tangency_threshold: f64,
    /// Solve grid points independently in parallel instead of by continuation.
    pub parallel: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            beta_min: 1e-6,
            beta_max: 1e4,
            points: 2000,
            refine_tol: 1e-9,
            tangency_threshold: 1e-6,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub beta: f64,
    /// Grid interval in which the sign change was detected.
    pub bracket: [f64; 2],
    /// X_T*(β) − ΣK at the refined root.
    pub gap: f64,
    /// Whether |gap| reached the refinement tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub beta: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaScan {
    pub betas: Vec<f64>,
    /// X_T*(β) per grid point, `None` where the solver failed.
    pub totals: Vec<Option<f64>>,
    pub level: f64,
    pub crossings: Vec<Crossing>,
    pub failures: Vec<ScanFailure>,
    /// The curve stays within 1e−9 ΣK of the level on the whole grid.
    pub degenerate_constant: bool,
    pub tangency_suspected: Vec<[f64; 2]>,
}

impl BetaScan {
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.totals
            .iter()
            .map(|t| t.map(|t| t - self.level))
            .collect()
    }

    /// Sign of the gap on each interval between consecutive crossings,
    /// read from the largest grid value inside the interval.
    pub fn sign_pattern(&self) -> Vec<char> {
        let mut edges = vec![0.0];
        edges.extend(self.crossings.iter().map(|c| c.beta));
        edges.push(f64::INFINITY);
        let gaps = self.gaps();
        edges
            .windows(2)
            .map(|w| {
                let mut best: Option<f64> = None;
                for (b, g) in self.betas.iter().zip(&gaps) {
                    if let Some(g) = g {
                        if *b > w[0] && *b < w[1] && best.is_none_or(|x| g.abs() > x.abs()) {
                            best = Some(*g);
                        }
                    }
                }
                match best {
                    Some(g) if g > 0.0 => '>',
                    Some(g) if g < 0.0 => '<',
                    _ => '?',
                }
            })
            .collect()
    }

    pub fn sign_pattern_string(&self) -> String {
        self.sign_pattern()
            .iter()
            .map(char::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// CSV with columns `beta,X_T,gap`; failed points have empty fields.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidModel(format!("csv output failed: {e}"));
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["beta", "X_T", "gap"]).map_err(io)?;
        for (b, t) in self.betas.iter().zip(&self.totals) {
            let (x, g) = match t {
                Some(t) => (fmt_real(*t), fmt_real(t - self.level)),
                None => (String::new(), String::new()),
            };
            wr.write_record([fmt_real(*b), x, g]).map_err(io)?;
        }
        wr.flush()
            .map_err(|e| Error::InvalidModel(format!("csv output failed: {e}")))?;
        Ok(())
    }

    pub fn summary(&self, model: &PatchModel) -> ScanSummary {
        ScanSummary {
            level: self.level,
            crossings: self.crossings.clone(),
            sign_pattern: self.sign_pattern_string(),
            degenerate_constant: self.degenerate_constant,
            tangency_suspected: self.tangency_suspected.clone(),
            failures: self.failures.clone(),
            verdicts: compare_infinity_vs_zero(model).ok(),
        }
    }
}

/// JSON summary of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub level: f64,
    pub crossings: Vec<Crossing>,
    pub sign_pattern: String,
    pub degenerate_constant: bool,
    pub tangency_suspected: Vec<[f64; 2]>,
    pub failures: Vec<ScanFailure>,
    pub verdicts: Option<DispersalVerdict>,
}

pub fn find_crossings(model: &PatchModel, beta_max: f64, grid_points: usize) -> Result<BetaScan> {
    find_crossings_with(
        model,
        &ScanOptions {
            beta_max,
            points: grid_points,
            ..Default::default()
        },
    )
}

pub fn find_crossings_with(model: &PatchModel, opts: &ScanOptions) -> Result<BetaScan> {
    model.require_migration()?;
    if !(opts.beta_max > 0.0) || !opts.beta_max.is_finite() {
        return Err(Error::PreconditionViolated(
            "beta_max must be positive".into(),
        ));
    }
    if opts.points < 10 {
        return Err(Error::PreconditionViolated(
            "at least 10 grid points required".into(),
        ));
    }
    let beta_min = if opts.beta_min > 0.0 && opts.beta_min < opts.beta_max {
        opts.beta_min
    } else {
        opts.beta_max * 1e-10
    };
    let betas = geometric_grid(beta_min, opts.beta_max, opts.points);
    let solver = EquilibriumSolver::default();
    let solved: Vec<Result<Equilibrium>> = if opts.parallel {
        betas.par_iter().map(|&b| solver.solve(model, b)).collect()
    } else {
        solver.solve_path(model, &betas)
    };

    let level = model.sum_k();
    let mut failures = Vec::new();
    let mut eqs: Vec<Option<Equilibrium>> = Vec::with_capacity(betas.len());
    for (b, r) in betas.iter().zip(solved) {
        match r {
            Ok(e) => eqs.push(Some(e)),
            Err(e) => {
                failures.push(ScanFailure {
                    beta: *b,
                    error: e.to_string(),
                });
                eqs.push(None);
            }
        }
    }
    let totals: Vec<Option<f64>> = eqs
        .iter()
        .map(|e| e.as_ref().map(Equilibrium::total_population))
        .collect();

    let mut scan = BetaScan {
        betas: betas.clone(),
        totals,
        level,
        crossings: Vec::new(),
        failures,
        degenerate_constant: false,
        tangency_suspected: Vec::new(),
    };

    let max_gap = scan
        .gaps()
        .iter()
        .flatten()
        .fold(0.0f64, |m, g| m.max(g.abs()));
    if max_gap <= 1e-9 * level {
        scan.degenerate_constant = true;
        return Ok(scan);
    }

    let refiner = Refiner {
        model,
        solver: &solver,
        level,
        tol: opts.refine_tol * level,
    };

    // Sign changes between consecutive successful, nonzero grid values.
    let mut brackets: Vec<(usize, usize)> = Vec::new();
    let mut prev: Option<usize> = None;
    for k in 0..betas.len() {
        let Some(g) = scan.totals[k].map(|t| t - level) else {
            continue;
        };
        if g == 0.0 {
            continue;
        }
        if let Some(p) = prev {
            let gp = scan.totals[p].expect("successful point") - level;
            if gp.signum() != g.signum() {
                brackets.push((p, k));
            }
        }
        prev = Some(k);
    }

    let mut found: Vec<Crossing> = Vec::new();
    for (a, b) in brackets {
        let ea = eqs[a].as_ref().expect("successful point");
        let eb = eqs[b].as_ref().expect("successful point");
        found.push(refiner.refine(ea, eb, [betas[a], betas[b]]));
    }

    // Near-touching local minima without a sign change.
    let gaps = scan.gaps();
    for k in 1..betas.len() - 1 {
        let (Some(gl), Some(g), Some(gr)) = (gaps[k - 1], gaps[k], gaps[k + 1]) else {
            continue;
        };
        let same_sign = gl.signum() == g.signum() && g.signum() == gr.signum();
        let local_min = g.abs() <= gl.abs() && g.abs() <= gr.abs();
        if !(same_sign && local_min && g.abs() <= opts.tangency_threshold * level) {
            continue;
        }
        let (lo, hi) = (betas[k - 1], betas[k + 1]);
        let seed = eqs[k].as_ref().expect("successful point");
        let sub = geometric_grid(lo, hi, 9);
        let mut sub_eqs = Vec::new();
        for &b in &sub {
            if let Ok(e) = solver.solve_from(model, b, &seed.x) {
                sub_eqs.push(e);
            }
        }
        let mut split = false;
        for w in sub_eqs.windows(2) {
            let (g0, g1) = (
                w[0].total_population() - level,
                w[1].total_population() - level,
            );
            if g0 != 0.0 && g1 != 0.0 && g0.signum() != g1.signum() {
                found.push(refiner.refine(&w[0], &w[1], [w[0].beta, w[1].beta]));
                split = true;
            }
        }
        if !split {
            scan.tangency_suspected.push([lo, hi]);
        }
    }

    found.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    found.dedup_by(|a, b| (a.beta - b.beta).abs() <= 1e-12 * b.beta);
    scan.crossings = found;
    Ok(scan)
}

struct Refiner<'a> {
    model: &'a PatchModel,
    solver: &'a EquilibriumSolver,
    level: f64,
    tol: f64,
}

impl Refiner<'_> {
    fn gap(&self, e: &Equilibrium) -> f64 {
        e.total_population() - self.level
    }

    /// Safeguarded Newton on the gap, with bisection whenever the Newton
    /// step leaves the bracket or fails to halve it.
    fn refine(&self, lo: &Equilibrium, hi: &Equilibrium, bracket: [f64; 2]) -> Crossing {
        let mut a = lo.clone();
        let mut b = hi.clone();
        let mut ga = self.gap(&a);
        let mut gb = self.gap(&b);
        let mut best = if ga.abs() < gb.abs() {
            a.clone()
        } else {
            b.clone()
        };
        let mut width = b.beta - a.beta;

        for _ in 0..200 {
            let gbest = self.gap(&best);
            if gbest.abs() <= 1e-3 * self.tol || (b.beta - a.beta) <= 4.0 * f64::EPSILON * b.beta {
                break;
            }
            let newton = beta_sensitivity(self.model, &best)
                .ok()
                .map(|s| best.beta - gbest / s.iter().sum::<f64>())
                .filter(|c| c.is_finite() && *c > a.beta && *c < b.beta);
            let mid = if a.beta > 0.0 && b.beta / a.beta > 4.0 {
                (a.beta * b.beta).sqrt()
            } else {
                0.5 * (a.beta + b.beta)
            };
            let cand = match newton {
                Some(c) if (b.beta - a.beta) <= 0.5 * width => c,
                Some(c) if width == b.beta - a.beta => c,
                _ => mid,
            };
            width = b.beta - a.beta;
            let seed = if (cand - a.beta).abs() < (b.beta - cand).abs() {
                &a.x
            } else {
                &b.x
            };
            let e = match self.solver.solve_from(self.model, cand, seed) {
                Ok(e) => e,
                Err(_) => match self.solver.solve(self.model, mid) {
                    Ok(e) => e,
                    Err(_) => break,
                },
            };
            let g = self.gap(&e);
            if g == 0.0 {
                best = e;
                break;
            }
            if g.signum() == ga.signum() {
                a = e.clone();
                ga = g;
            } else {
                b = e.clone();
                gb = g;
            }
            if g.abs() < self.gap(&best).abs() {
                best = e;
            }
        }
        let _ = gb;
        let gap = self.gap(&best);
        Crossing {
            beta: best.beta,
            bracket,
            gap,
            converged: gap.abs() <= self.tol,
        }
    }
}
