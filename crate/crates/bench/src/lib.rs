//! Fixtures shared by the benchmarks.

use patchdyn_core::reference::reference_set;
use patchdyn_core::PatchModel;

/// First built-in reference configuration (three patches, all fluxes).
pub fn reference_model() -> PatchModel {
    let set = reference_set();
    set.model(&set.rows[0]).expect("valid reference row")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_builds() {
        assert_eq!(super::reference_model().n(), 3);
    }
}
