//! Conjugate operator, commutators and the virial identity.

use std::sync::Arc;

use proptest::prelude::*;

use nelsonlab_core::eigen::SolverOptions;
use nelsonlab_core::fock::{build_basis, ModeGrid, OccupationBasis};
use nelsonlab_core::model::{DispersionLaw, FormFactor, ModelSpec};
use nelsonlab_core::mourre::{build_position_op, mourre_scan, virial_check, Sector};
use nelsonlab_core::C64;

fn setup(m: usize, n_max: usize, g: f64) -> (ModelSpec, OccupationBasis) {
    let grid = Arc::new(ModeGrid::line(m, 2.0, 0.2).unwrap());
    let basis = build_basis(grid.clone(), n_max, None).unwrap();
    let ff = FormFactor::new(1.0, 1.5, 0.2).unwrap();
    (ModelSpec::new(DispersionLaw::NonRelativistic { mass: 1.0 }, ff, grid, g, true).unwrap(), basis)
}

/// `y = i d/dk` on a plane wave `exp(-i k x0)` returns `x0` times it, up to O(h^2).
#[test]
fn position_recovers_plane_wave_offset() {
    for (m, tol) in [(64usize, 2e-2), (128, 5e-3)] {
        let grid = ModeGrid::line(m, 2.0, 0.2).unwrap();
        let y = build_position_op(&grid).unwrap();
        let x0 = 1.5;
        let c: Vec<C64> = (0..m)
            .map(|j| C64::from_polar(grid.weights()[j].sqrt(), -grid.point(j)[0] * x0))
            .collect();
        let yc = &y * nalgebra::DVector::from_column_slice(&c);
        let worst = (1..m - 1).map(|j| (yc[j] - c[j] * x0).norm() / c[j].norm()).fold(0.0, f64::max);
        assert!(worst < tol, "M = {m}: {worst}");
    }
}

/// The continuum commutator differs from the truncated one at second order in the mesh.
#[test]
fn virial_scale_is_mesh_independent() {
    let (ms, b16) = setup(16, 2, 0.05);
    let (ms32, b32) = setup(32, 2, 0.05);
    let opts = SolverOptions::default();
    let v16 = virial_check(&ms, &[0.0; 3], &b16, &opts).unwrap();
    let v32 = virial_check(&ms32, &[0.0; 3], &b32, &opts).unwrap();
    assert!(v16.residual_discrete < 1e-10 && v32.residual_discrete < 1e-10);
    assert!((v16.scale / v32.scale - 1.0).abs() < 0.25, "{} vs {}", v16.scale, v32.scale);
    assert!(v32.residual < v16.residual);
    assert!(v16.within(10.0) && v32.within(10.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Without coupling the Mourre form is non-negative for every sample seed.
    #[test]
    fn free_mourre_form_is_nonnegative(seed in 0u64..10_000) {
        let (ms, basis) = setup(8, 2, 0.0);
        let r = mourre_scan(&ms, &[0.0; 3], &basis, Sector::Full, 1.0, 16, seed).unwrap();
        prop_assert!(r.min_r >= -1e-10);
        prop_assert!(r.deficit == 0.0);
    }
}
