//! Shared fixtures for the benchmarks.

use qdecoh::lattice::resolve_trap;
use qdecoh::oracle::{trial_models, DenseModel};
use qdecoh::{LatticeSpec, PhysicalParams};

/// Default 4x4x4 lattice with its trap frequency already calibrated.
pub fn calibrated_cube() -> LatticeSpec {
    resolve_trap(&LatticeSpec::default(), PhysicalParams::default().nu_max).expect("default lattice calibrates")
}

/// One random dense model of each dimension in `dims`.
pub fn models(dims: &[usize]) -> Vec<DenseModel> {
    let pool = trial_models(7, 200);
    dims.iter()
        .map(|d| pool.iter().find(|m| m.dim() == *d).cloned().expect("dimension present in the pool"))
        .collect()
}
