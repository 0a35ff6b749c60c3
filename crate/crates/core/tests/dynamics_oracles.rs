//! Time evolution and phase-space observables against independent references.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use nelsonlab_core::cutoff::{fall, Switch};
use nelsonlab_core::dynamics::{
    dressed_packet, electron_velocity_probe, evolve, geometric_times, one_boson_packet, w_estimate, KrylovOptions,
    Propagation, Thresholds,
};
use nelsonlab_core::fock::{build_basis, ModeGrid, OccupationBasis};
use nelsonlab_core::linalg;
use nelsonlab_core::model::{build_fiber_h, build_full_h, DispersionLaw, FormFactor, ModelSpec};
use nelsonlab_core::{sample, SparseOperator, C64};

fn fiber(m: usize, n_max: usize, g: f64) -> (SparseOperator, OccupationBasis) {
    let grid = Arc::new(ModeGrid::line(m, 2.0, 0.2).unwrap());
    let basis = build_basis(grid.clone(), n_max, None).unwrap();
    let ff = FormFactor::new(1.0, 1.5, 0.2).unwrap();
    let ms = ModelSpec::new(DispersionLaw::NonRelativistic { mass: 1.0 }, ff, grid, g, true).unwrap();
    (build_fiber_h(&ms, &[0.1, 0.0, 0.0], &basis).unwrap(), basis)
}

/// `exp(-i H t)` by scaling and squaring of a Taylor series.
fn taylor_expm(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = h.nrows();
    let a = h * C64::new(0.0, -t);
    let norm1 = (0..n).map(|c| a.column(c).iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = (norm1.max(1.0).log2().ceil() as i32 + 2).max(0);
    let a = a / C64::new(2f64.powi(squarings), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &a / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn krylov_matches_taylor_reference() {
    let (h, basis) = fiber(6, 3, 0.1);
    assert!(basis.dim() <= 400);
    let mut rng = sample::rng(3);
    let v = sample::unit_vector(&mut rng, basis.dim());
    for t in [0.5, 7.0, 40.0] {
        let (k, _) = evolve(&h, &v, t, &KrylovOptions::default()).unwrap();
        let reference = taylor_expm(&h.to_dense(), t) * DVector::from_column_slice(&v);
        let err: f64 = k.iter().zip(reference.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-8, "t = {t}: {err}");
    }
}

#[test]
fn conservation_to_long_times() {
    let (h, basis) = fiber(8, 3, 0.05);
    let v = one_boson_packet(&basis, 0.6, 0.15, 0.0).unwrap();
    let mut prop = Propagation::new(h, v, KrylovOptions::default()).unwrap();
    prop.advance_to(100.0).unwrap();
    assert!(prop.norm_drift() <= 1e-10);
    assert!(prop.energy_drift() <= 1e-8 * 100.0);
}

#[test]
fn free_boson_is_counted_and_ground_state_is_not() {
    // Group speed 1 beats gamma = 0.4: the counter approaches 1.
    let (h, basis) = fiber(80, 1, 0.0);
    let v = one_boson_packet(&basis, 0.8, 0.1, 0.0).unwrap();
    let times = geometric_times(1.0, 1.5, 8.0).unwrap();
    let th = Thresholds::default();
    let tr = w_estimate(&h, &basis, &v, None, &th, &times, &KrylovOptions::default()).unwrap();
    assert!((tr.final_value() - 1.0).abs() < 0.05, "{}", tr.final_value());

    let mut vac = vec![C64::new(0.0, 0.0); basis.dim()];
    vac[0] = C64::new(1.0, 0.0);
    let tr = w_estimate(&h, &basis, &vac, None, &th, &times, &KrylovOptions::default()).unwrap();
    assert!(tr.final_value().abs() < 1e-14);
}

#[test]
fn slow_dressed_packet_leaves_the_fast_cone() {
    let sigma = 0.2;
    let grid = Arc::new(ModeGrid::lattice(48, 1.0, 1.2, sigma).unwrap());
    let basis = Arc::new(build_basis(grid.clone(), 1, None).unwrap());
    let ff = FormFactor::new(1.0, 1.5, sigma).unwrap();
    let ms = ModelSpec::new(DispersionLaw::NonRelativistic { mass: 1.0 }, ff, grid, 0.05, false).unwrap();
    let fm = build_full_h(&ms, 48, basis).unwrap();
    let pk = dressed_packet(&fm, |p| p.abs(), |p| C64::new(if p.abs() < 0.3 { fall(p.abs() / 0.3, 0.0, 1.0) } else { 0.0 }, 0.0))
        .unwrap();
    assert!((linalg::norm(&pk.state) - 1.0).abs() < 1e-12);
    assert!(pk.velocity_bound < 0.3);
    let mut prop = Propagation::new(fm.h.clone(), pk.state, KrylovOptions::default()).unwrap();
    let times = geometric_times(1.0, 1.5, 20.0).unwrap();
    let tr = electron_velocity_probe(&mut prop, &fm, Switch::new(0.4, 0.5), &times).unwrap();
    assert!(tr.values().iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    // The chain is short, so only the trend is checked here.
    assert!(tr.decreasing_tail(6, 1e-12));
    assert!(tr.final_value() < 0.5 * tr.values()[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Forward then backward evolution returns the initial state, with its norm kept.
    #[test]
    fn evolution_is_unitary_and_invertible(seed in 0u64..1000, t in 0.1f64..30.0) {
        let (h, basis) = fiber(6, 2, 0.2);
        let mut rng = sample::rng(seed);
        let v = sample::unit_vector(&mut rng, basis.dim());
        let (f, _) = evolve(&h, &v, t, &KrylovOptions::default()).unwrap();
        prop_assert!((linalg::norm(&f) - 1.0).abs() < 1e-11);
        let (b, _) = evolve(&h, &f, -t, &KrylovOptions::default()).unwrap();
        prop_assert!(linalg::norm(&linalg::sub(&b, &v)) < 1e-9);
    }
}
