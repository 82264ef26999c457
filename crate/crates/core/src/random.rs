//! Seeded generators for random model instances with prescribed structure.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Flux, MigrationMatrix};
use crate::model::PatchModel;

/// Deterministic RNG for sample `index` of a run seeded with `seed`.
pub fn rng_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Random irreducible migration matrix: a directed Hamiltonian cycle on a
/// shuffled patch order plus each remaining edge with probability `density`.
pub fn irreducible_migration<R: Rng>(rng: &mut R, n: usize, density: f64) -> MigrationMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut rates = vec![vec![0.0; n]; n];
    for k in 0..n {
        let from = order[k];
        let to = order[(k + 1) % n];
        rates[to][from] = log_uniform(rng, 0.05, 5.0);
    }
    for (to, row) in rates.iter_mut().enumerate() {
        for (from, v) in row.iter_mut().enumerate() {
            if to != from && *v == 0.0 && rng.random::<f64>() < density {
                *v = log_uniform(rng, 0.05, 5.0);
            }
        }
    }
    from_rates(n, &rates)
}

/// Random irreducible matrix whose support is symmetric (γ_ij > 0 ⇔ γ_ji > 0);
/// the rates themselves are not symmetric.
pub fn symmetric_support_migration<R: Rng>(rng: &mut R, n: usize, density: f64) -> MigrationMatrix {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut rates = vec![vec![0.0; n]; n];
    for w in order.windows(2) {
        rates[w[0]][w[1]] = log_uniform(rng, 0.05, 5.0);
        rates[w[1]][w[0]] = log_uniform(rng, 0.05, 5.0);
    }
    for i in 0..n {
        for j in 0..i {
            if rates[i][j] == 0.0 && rng.random::<f64>() < density {
                rates[i][j] = log_uniform(rng, 0.05, 5.0);
                rates[j][i] = log_uniform(rng, 0.05, 5.0);
            }
        }
    }
    from_rates(n, &rates)
}

fn from_rates(n: usize, rates: &[Vec<f64>]) -> MigrationMatrix {
    let mut fluxes = Vec::new();
    for (to, row) in rates.iter().enumerate() {
        for (from, &v) in row.iter().enumerate() {
            if v > 0.0 {
                fluxes.push(Flux::new(to, from, v));
            }
        }
    }
    MigrationMatrix::new(n, &fluxes).expect("generator builds irreducible matrices")
}

fn growth_rates<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, 0.2, 4.0)).collect()
}

fn capacities<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| log_uniform(rng, 0.5, 6.0)).collect()
}

/// Unconstrained random model.
pub fn random_model<R: Rng>(rng: &mut R, n: usize) -> PatchModel {
    let gamma = irreducible_migration(rng, n, 0.4);
    PatchModel::new(growth_rates(rng, n), capacities(rng, n), gamma).expect("valid parameters")
}

/// All growth rates equal.
pub fn equal_growth_model<R: Rng>(rng: &mut R, n: usize) -> PatchModel {
    let gamma = irreducible_migration(rng, n, 0.4);
    let r = log_uniform(rng, 0.2, 4.0);
    PatchModel::new(vec![r; n], capacities(rng, n), gamma).expect("valid parameters")
}

/// α_i γ_ij = α_j γ_ji for every pair. α and the lower triangle of Γ are
/// drawn at random, the upper triangle follows. When `equal_r` is set all
/// growth rates coincide, otherwise they are drawn independently.
pub fn balanced_model<R: Rng>(rng: &mut R, n: usize, equal_r: bool) -> PatchModel {
    let shape = symmetric_support_migration(rng, n, 0.5);
    let alpha: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.1, 3.0)).collect();
    let mut rates = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let g = shape.get(i, j);
            if g > 0.0 {
                rates[i][j] = g;
                rates[j][i] = alpha[i] * g / alpha[j];
            }
        }
    }
    let gamma = from_rates(n, &rates);
    let r = if equal_r {
        vec![log_uniform(rng, 0.2, 4.0); n]
    } else {
        growth_rates(rng, n)
    };
    let k = r.iter().zip(&alpha).map(|(r, a)| r / a).collect();
    PatchModel::new(r, k, gamma).expect("valid parameters")
}

/// K = λδ, so K lies in the kernel of Γ.
pub fn kernel_capacity_model<R: Rng>(rng: &mut R, n: usize) -> PatchModel {
    let gamma = irreducible_migration(rng, n, 0.4);
    let delta = gamma.kernel_vector().expect("irreducible");
    let lambda = log_uniform(rng, 1.0, 10.0) * n as f64;
    let k = delta.normalized().iter().map(|d| lambda * d).collect();
    PatchModel::new(growth_rates(rng, n), k, gamma).expect("valid parameters")
}

/// (1/α_1, …, 1/α_n) = cδ lies in the kernel of Γ; r is random and K = r/α.
pub fn reciprocal_alpha_model<R: Rng>(rng: &mut R, n: usize) -> PatchModel {
    let gamma = irreducible_migration(rng, n, 0.4);
    reciprocal_alpha_with(rng, gamma)
}

pub(crate) fn reciprocal_alpha_with<R: Rng>(rng: &mut R, gamma: MigrationMatrix) -> PatchModel {
    let n = gamma.n();
    let delta = gamma.kernel_vector().expect("irreducible");
    let c = log_uniform(rng, 0.5, 5.0) * n as f64;
    let alpha: Vec<f64> = delta.normalized().iter().map(|d| 1.0 / (c * d)).collect();
    let r = growth_rates(rng, n);
    let k = r.iter().zip(&alpha).map(|(r, a)| r / a).collect();
    PatchModel::new(r, k, gamma).expect("valid parameters")
}

/// Geometric grid of `points` values from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| {
            if k == 0 {
                lo
            } else if k + 1 == points {
                hi
            } else {
                (a + (b - a) * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = random_model(&mut rng_for(7, 3), 5);
        let b = random_model(&mut rng_for(7, 3), 5);
        let c = random_model(&mut rng_for(7, 4), 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn balanced_model_satisfies_pair_identity() {
        let m = balanced_model(&mut rng_for(1, 0), 5, false);
        let a = m.alpha();
        for i in 0..5 {
            for j in 0..i {
                let lhs = a[i] * m.gamma().get(i, j);
                let rhs = a[j] * m.gamma().get(j, i);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reciprocal_alpha_lies_in_kernel() {
        let m = reciprocal_alpha_model(&mut rng_for(2, 0), 6);
        let inv: Vec<f64> = m.alpha().iter().map(|a| 1.0 / a).collect();
        let res = m.gamma().apply(&inv);
        let scale = m.gamma().inf_norm() * linalg_max(&inv);
        assert!(res.iter().all(|v| v.abs() <= 1e-12 * scale));
    }

    fn linalg_max(v: &[f64]) -> f64 {
        crate::linalg::max_abs(v)
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = geometric_grid(1e-6, 1e4, 2000);
        assert_eq!(g.len(), 2000);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[1999], 1e4);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
