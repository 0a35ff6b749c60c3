//! Fock-space operators against formulas written out independently here.

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use nelsonlab_core::fock::{
    build_basis, creation_op, dgamma, field_op, gamma, number_op, ModeGrid, OccupationBasis,
};
use nelsonlab_core::sample;
use nelsonlab_core::split::{breve_gamma, SplitPair, TensorBasis};
use nelsonlab_core::C64;

fn basis(m: usize, n_max: usize) -> OccupationBasis {
    let grid = Arc::new(ModeGrid::line(m, 2.0, 0.2).unwrap());
    build_basis(grid, n_max, None).unwrap()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Permanent by expansion over permutations; fine for the sizes used here.
fn permanent(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for c in 0..n {
        let minor = m.clone().remove_row(0).remove_column(c);
        total += m[(0, c)] * permanent(&minor);
    }
    total
}

/// Mode list of an occupation, each mode repeated by its count.
fn modes_of(occ: &[u8]) -> Vec<usize> {
    occ.iter()
        .enumerate()
        .flat_map(|(j, &n)| std::iter::repeat(j).take(n as usize))
        .collect()
}

/// `<m| Gamma(U) |n> = perm(U[m, n]) / sqrt(prod m_j! prod n_j!)` on equal-number states.
fn gamma_element(u: &DMatrix<C64>, m: &[u8], n: &[u8]) -> C64 {
    let rows = modes_of(m);
    let cols = modes_of(n);
    if rows.len() != cols.len() {
        return C64::new(0.0, 0.0);
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| u[(rows[r], cols[c])]);
    let norm: f64 = m.iter().chain(n).map(|&k| factorial(k as usize)).product();
    permanent(&sub) / norm.sqrt()
}

#[test]
fn creation_matches_ladder_elements() {
    let b = basis(4, 3);
    let w = b.grid().weights()[0];
    for j in 0..4 {
        let mut h = vec![C64::new(0.0, 0.0); 4];
        h[j] = C64::new(1.0, 0.0);
        let a = creation_op(&b, &h).unwrap();
        for col in 0..b.dim() {
            let occ = b.occupation(col).to_vec();
            let mut up = occ.clone();
            up[j] += 1;
            for row in 0..b.dim() {
                let expected = if b.occupation(row) == up.as_slice() {
                    (w * (occ[j] as f64 + 1.0)).sqrt()
                } else {
                    0.0
                };
                assert!((a.get(row, col) - expected).norm() < 1e-14, "mode {j} row {row} col {col}");
            }
        }
    }
}

#[test]
fn gamma_matches_permanent_formula() {
    let b = basis(4, 3);
    let mut rng = sample::rng(11);
    let u = sample::unitary(&mut rng, 4);
    let g = gamma(&b, &u).unwrap();
    for row in 0..b.dim() {
        for col in 0..b.dim() {
            let e = gamma_element(&u, b.occupation(row), b.occupation(col));
            assert!((g.get(row, col) - e).norm() < 1e-12, "row {row} col {col}");
        }
    }
}

#[test]
fn dgamma_on_one_boson_sector_is_the_mode_operator() {
    let b = basis(4, 2);
    let mut rng = sample::rng(5);
    let m = sample::hermitian(&mut rng, 4);
    let d = dgamma(&b, &m).unwrap();
    let one: Vec<usize> = b.sector(1).collect();
    let mode = |i: usize| b.occupation(i).iter().position(|&n| n == 1).unwrap();
    for &r in &one {
        for &c in &one {
            assert!((d.get(r, c) - m[(mode(r), mode(c))]).norm() < 1e-14);
        }
    }
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `[a(g), a*(h)] = <g, h>` on states with `N <= n_max - 1`.
    #[test]
    fn ccr_on_guarded_states(g in complex_vec(4), h in complex_vec(4), psi in complex_vec(35)) {
        let b = basis(4, 3);
        let ag = creation_op(&b, &g).unwrap().adjoint();
        let ah = creation_op(&b, &h).unwrap();
        let inner: C64 = g.iter().zip(h.iter()).zip(b.grid().weights())
            .map(|((x, y), w)| x.conj() * y * *w).sum();
        let mut v = psi.clone();
        for (i, x) in v.iter_mut().enumerate() {
            if b.total(i) >= b.n_max() {
                *x = C64::new(0.0, 0.0);
            }
        }
        let lhs: Vec<C64> = ag.matvec(&ah.matvec(&v)).iter().zip(ah.matvec(&ag.matvec(&v)))
            .map(|(p, q)| p - q).collect();
        for (l, x) in lhs.iter().zip(&v) {
            prop_assert!((l - inner * x).norm() < 1e-12);
        }
    }

    /// The field is Hermitian and changes the boson number by exactly one.
    #[test]
    fn field_is_hermitian_and_odd(h in complex_vec(4)) {
        let b = basis(4, 3);
        let f = field_op(&b, &h).unwrap();
        prop_assert!(f.hermitian_defect() < 1e-15);
        for (r, c, _) in f.triplets() {
            prop_assert_eq!((b.total(r) as i64 - b.total(c) as i64).abs(), 1);
        }
    }

    /// `Gamma(U) Gamma(V) = Gamma(UV)` and `Gamma` commutes with `N`.
    #[test]
    fn gamma_is_multiplicative(seed in 0u64..1000) {
        let b = basis(4, 3);
        let mut rng = sample::rng(seed);
        let u = sample::contraction(&mut rng, 4);
        let v = sample::contraction(&mut rng, 4);
        let lhs = gamma(&b, &u).unwrap().matmul(&gamma(&b, &v).unwrap());
        let rhs = gamma(&b, &(&u * &v)).unwrap();
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-12);
        let n = number_op(&b);
        prop_assert!(n.commutator(&rhs).max_abs() < 1e-12);
    }

    /// An isometric split preserves norms when the two-factor cap admits every image.
    #[test]
    fn isometric_split_preserves_norm(seed in 0u64..1000, psi in complex_vec(35)) {
        let b = Arc::new(basis(4, 3));
        let mut rng = sample::rng(seed);
        let (j0, jinf) = sample::isometric_split(&mut rng, 4);
        let sp = SplitPair::new(j0, jinf).unwrap();
        let tb = TensorBasis::new(b.clone(), b.clone(), 3).unwrap();
        let op = breve_gamma(&sp, &b, &tb).unwrap();
        let out = op.matvec(&psi);
        let n0: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
        let n1: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((n0 - n1).abs() < 1e-12 * n0.max(1.0));
    }
}
