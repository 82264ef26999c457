use crate::dynamics::Equilibrium;
use crate::model::PatchModel;

/// ΣK + β Σ_{j<i} (γ_ij x_j − γ_ji x_i)(α_j x_j − α_i x_i) / (α_i α_j x_i x_j).
///
/// Equals X_T at any positive equilibrium.
pub fn sum_decomposition(model: &PatchModel, eq: &Equilibrium) -> f64 {
    let a = model.alpha();
    let g = model.gamma();
    let x = &eq.x;
    let mut acc = 0.0;
    for i in 0..model.n() {
        for j in 0..i {
            let flow = g.get(i, j) * x[j] - g.get(j, i) * x[i];
            acc += flow * (a[j] * x[j] - a[i] * x[i]) / (a[i] * a[j] * x[i] * x[j]);
        }
    }
    model.sum_k() + eq.beta * acc
}
