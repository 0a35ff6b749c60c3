//! Second-quantized operators on truncated occupation bases.
//!
//! Conventions: the discrete ladder operators `a_j` are orthonormal
//! (`[a_i, a_j^*] = delta_ij`), and the smeared operators absorb the
//! quadrature weight, `a^*(h) = sum_j sqrt(w_j) h_j a_j^*`. States that a
//! creation operator would push outside the basis are dropped, so
//! `a(h) = a^*(h)^dagger` holds exactly and the canonical identities hold on
//! the guarded sector `N <= n_max - 1`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::fock::basis::OccupationBasis;
use crate::sparse::{SparseOperator, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Calls `f(row, col, sqrt(n_j + 1), j)` for every in-basis transition
/// `|n> -> |n + e_j>`.
fn for_each_raise(basis: &OccupationBasis, mut f: impl FnMut(usize, usize, f64, usize)) {
    let m = basis.n_modes();
    let mut scratch = vec![0u8; m];
    for col in 0..basis.dim() {
        if basis.total(col) >= basis.n_max() {
            continue;
        }
        scratch.copy_from_slice(basis.occupation(col));
        for j in 0..m {
            let nj = scratch[j];
            scratch[j] = nj + 1;
            if let Some(row) = basis.index_of(&scratch) {
                f(row, col, ((nj as f64) + 1.0).sqrt(), j);
            }
            scratch[j] = nj;
        }
    }
}

/// Creation operator from orthonormal coordinates `c_j` (no weight factor).
pub fn creation_from_coords(basis: &OccupationBasis, c: &[C64]) -> Result<SparseOperator> {
    check_len(basis.n_modes(), c.len())?;
    let mut t = Vec::new();
    for_each_raise(basis, |row, col, amp, j| {
        if c[j] != ZERO {
            t.push((row, col, c[j] * amp));
        }
    });
    Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), t, false))
}

/// `a^*(h)` for a sampled function `h`.
pub fn creation_op(basis: &OccupationBasis, h: &[C64]) -> Result<SparseOperator> {
    let c = basis.grid().coords(h)?;
    creation_from_coords(basis, &c)
}

/// `a(h)`, the exact adjoint of [`creation_op`]; antilinear in `h`.
pub fn annihilation_op(basis: &OccupationBasis, h: &[C64]) -> Result<SparseOperator> {
    Ok(creation_op(basis, h)?.adjoint())
}

/// `phi(h) = (a(h) + a^*(h)) / sqrt(2)`, flagged Hermitian.
pub fn field_op(basis: &OccupationBasis, h: &[C64]) -> Result<SparseOperator> {
    let c = basis.grid().coords(h)?;
    field_from_coords(basis, &c)
}

pub fn field_from_coords(basis: &OccupationBasis, c: &[C64]) -> Result<SparseOperator> {
    check_len(basis.n_modes(), c.len())?;
    let mut t = Vec::new();
    for_each_raise(basis, |row, col, amp, j| {
        if c[j] != ZERO {
            let v = c[j] * (amp * FRAC_1_SQRT_2);
            t.push((row, col, v));
            t.push((col, row, v.conj()));
        }
    });
    Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), t, true))
}

/// The number operator `N = dGamma(1)`.
pub fn number_op(basis: &OccupationBasis) -> SparseOperator {
    let d: Vec<f64> = (0..basis.dim()).map(|i| basis.total(i) as f64).collect();
    SparseOperator::diagonal(&d)
}

/// `dGamma(diag(d))`: diagonal with entries `sum_j n_j d_j`.
pub fn dgamma_diag(basis: &OccupationBasis, d: &[f64]) -> Result<SparseOperator> {
    check_len(basis.n_modes(), d.len())?;
    let vals: Vec<f64> = (0..basis.dim())
        .map(|i| {
            basis
                .occupation(i)
                .iter()
                .zip(d)
                .filter(|(n, _)| **n > 0)
                .map(|(&n, &x)| n as f64 * x)
                .sum()
        })
        .collect();
    Ok(SparseOperator::diagonal(&vals))
}

fn check_square(b: &DMatrix<C64>, m: usize) -> Result<()> {
    check_len(m, b.nrows())?;
    check_len(m, b.ncols())
}

fn is_diagonal(b: &DMatrix<C64>) -> bool {
    for c in 0..b.ncols() {
        for r in 0..b.nrows() {
            if r != c && b[(r, c)] != ZERO {
                return false;
            }
        }
    }
    true
}

/// `dGamma(b) = sum_{ij} b_ij a_i^* a_j` for an `M x M` mode operator.
///
/// Number preserving; Hermitian `b` gives an exactly conjugate-symmetric
/// matrix, flagged Hermitian.
pub fn dgamma(basis: &OccupationBasis, b: &DMatrix<C64>) -> Result<SparseOperator> {
    let m = basis.n_modes();
    check_square(b, m)?;
    let hermitian = (0..m).all(|i| (0..m).all(|j| b[(i, j)] == b[(j, i)].conj()));
    let mut t = Vec::new();
    let mut scratch = vec![0u8; m];
    for col in 0..basis.dim() {
        scratch.copy_from_slice(basis.occupation(col));
        for j in 0..m {
            let nj = scratch[j];
            if nj == 0 {
                continue;
            }
            for i in 0..m {
                let bij = b[(i, j)];
                if bij == ZERO {
                    continue;
                }
                if i == j {
                    t.push((col, col, bij * nj as f64));
                    continue;
                }
                let ni = scratch[i];
                scratch[j] = nj - 1;
                scratch[i] = ni + 1;
                if let Some(row) = basis.index_of(&scratch) {
                    let f = ((nj as u32 * (ni as u32 + 1)) as f64).sqrt();
                    t.push((row, col, bij * f));
                }
                scratch[i] = ni;
                scratch[j] = nj;
            }
        }
    }
    Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), t, hermitian))
}

/// Expands `prod_f a^*(v_f) |0>` over unrestricted occupations.
/// Each factor is a coordinate vector over the target modes.
fn creation_monomial(n_modes: usize, factors: &[&[C64]]) -> BTreeMap<Vec<u8>, C64> {
    let mut state: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
    state.insert(vec![0u8; n_modes], C64::new(1.0, 0.0));
    for v in factors {
        let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (occ, amp) in &state {
            for (i, vi) in v.iter().enumerate() {
                if *vi == ZERO {
                    continue;
                }
                let mut o = occ.clone();
                let f = ((o[i] as f64) + 1.0).sqrt();
                o[i] += 1;
                *next.entry(o).or_insert(ZERO) += amp * vi * f;
            }
        }
        state = next;
    }
    state
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(|x| x as f64).product()
}

fn occ_norm(occ: &[u8]) -> f64 {
    occ.iter().map(|&n| factorial(n)).product::<f64>().sqrt()
}

fn column(b: &DMatrix<C64>, j: usize) -> Vec<C64> {
    b.column(j).iter().copied().collect()
}

/// Amplitude discarded because it landed outside the target basis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overflow {
    /// Number of (column, target occupation) terms dropped.
    pub terms: usize,
    /// Sum of squared moduli of the dropped matrix entries.
    pub weight: f64,
}

/// `Gamma(b)` from `src` to `dst` for a `dst_modes x src_modes` operator.
pub fn gamma_between(
    src: &OccupationBasis,
    dst: &OccupationBasis,
    b: &DMatrix<C64>,
) -> Result<SparseOperator> {
    Ok(gamma_between_counted(src, dst, b)?.0)
}

/// [`gamma_between`], also reporting what the target caps cut off.
pub fn gamma_between_counted(
    src: &OccupationBasis,
    dst: &OccupationBasis,
    b: &DMatrix<C64>,
) -> Result<(SparseOperator, Overflow)> {
    check_len(src.n_modes(), b.ncols())?;
    check_len(dst.n_modes(), b.nrows())?;
    let cols: Vec<Vec<C64>> = (0..b.ncols()).map(|j| column(b, j)).collect();
    let mut t = Vec::new();
    let mut overflow = Overflow::default();
    for col in 0..src.dim() {
        let occ = src.occupation(col);
        let mut factors: Vec<&[C64]> = Vec::with_capacity(src.total(col));
        for (j, &n) in occ.iter().enumerate() {
            for _ in 0..n {
                factors.push(&cols[j]);
            }
        }
        let norm = occ_norm(occ);
        for (target, amp) in creation_monomial(dst.n_modes(), &factors) {
            let v = amp / norm;
            match dst.index_of(&target) {
                Some(row) => t.push((row, col, v)),
                None if v != ZERO => {
                    overflow.terms += 1;
                    overflow.weight += v.norm_sqr();
                }
                None => {}
            }
        }
    }
    let op = SparseOperator::from_triplets(dst.dim(), src.dim(), t, false);
    Ok((op, overflow))
}

/// `Gamma(b)` on a single basis; diagonal `b` takes a direct path.
pub fn gamma(basis: &OccupationBasis, b: &DMatrix<C64>) -> Result<SparseOperator> {
    check_square(b, basis.n_modes())?;
    if is_diagonal(b) {
        let d: Vec<C64> = (0..basis.n_modes()).map(|j| b[(j, j)]).collect();
        let t = (0..basis.dim())
            .map(|i| {
                let v = basis
                    .occupation(i)
                    .iter()
                    .zip(&d)
                    .fold(C64::new(1.0, 0.0), |acc, (&n, &x)| acc * x.powu(n as u32));
                (i, i, v)
            })
            .collect();
        let herm = d.iter().all(|x| x.im == 0.0);
        return Ok(SparseOperator::from_triplets(basis.dim(), basis.dim(), t, herm));
    }
    gamma_between(basis, basis, b)
}

/// `dGamma(a, b) = sum_j a (x) ... b (j-th) ... (x) a` from `src` to `dst`.
pub fn dgamma2_between(
    src: &OccupationBasis,
    dst: &OccupationBasis,
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
) -> Result<SparseOperator> {
    for mat in [a, b] {
        check_len(src.n_modes(), mat.ncols())?;
        check_len(dst.n_modes(), mat.nrows())?;
    }
    let acols: Vec<Vec<C64>> = (0..a.ncols()).map(|j| column(a, j)).collect();
    let bcols: Vec<Vec<C64>> = (0..b.ncols()).map(|j| column(b, j)).collect();
    let mut t = Vec::new();
    for col in 0..src.dim() {
        let occ = src.occupation(col);
        let norm = occ_norm(occ);
        for (j, &nj) in occ.iter().enumerate() {
            if nj == 0 {
                continue;
            }
            let mut factors: Vec<&[C64]> = vec![&bcols[j]];
            for (l, &nl) in occ.iter().enumerate() {
                let reps = if l == j { nl - 1 } else { nl };
                for _ in 0..reps {
                    factors.push(&acols[l]);
                }
            }
            for (target, amp) in creation_monomial(dst.n_modes(), &factors) {
                if let Some(row) = dst.index_of(&target) {
                    t.push((row, col, amp * (nj as f64 / norm)));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(dst.dim(), src.dim(), t, false))
}

/// `dGamma(a, b)` on a single basis.
pub fn dgamma2(basis: &OccupationBasis, a: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<SparseOperator> {
    check_square(a, basis.n_modes())?;
    check_square(b, basis.n_modes())?;
    dgamma2_between(basis, basis, a, b)
}

/// Projection onto states without soft bosons, `Gamma(chi_i)`.
pub fn soft_free_projector(basis: &OccupationBasis) -> SparseOperator {
    let keep = basis.soft_free_indices();
    let t = keep.iter().map(|&i| (i, i, C64::new(1.0, 0.0))).collect();
    SparseOperator::from_triplets(basis.dim(), basis.dim(), t, true)
}

/// Diagonal projector onto the guarded sector `N <= n_max - 1`.
pub fn guarded_projector(basis: &OccupationBasis) -> SparseOperator {
    let d: Vec<f64> = basis
        .guarded_mask()
        .iter()
        .map(|&g| if g { 1.0 } else { 0.0 })
        .collect();
    SparseOperator::diagonal(&d)
}

/// Rejects mode operators whose shape does not match the basis.
pub fn check_mode_op(basis: &OccupationBasis, b: &DMatrix<C64>) -> Result<()> {
    if b.nrows() != basis.n_modes() || b.ncols() != basis.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_modes(),
            got: b.nrows().max(b.ncols()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fock::basis::build_basis;
    use crate::fock::grid::{GridLayout, ModeGrid};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small_basis(m: usize, n_max: usize) -> OccupationBasis {
        let grid = ModeGrid::line(m, 1.0, 0.1).unwrap();
        build_basis(Arc::new(grid), n_max, None).unwrap()
    }

    #[test]
    fn single_mode_ladder() {
        let grid = ModeGrid::from_parts(1, vec![[1.0, 0.0, 0.0]], vec![1.0], 0.0, GridLayout::Custom)
            .unwrap();
        let b = build_basis(Arc::new(grid), 2, None).unwrap();
        let ad = creation_op(&b, &[c(1.0, 0.0)]).unwrap().to_dense();
        assert_eq!(ad[(1, 0)], c(1.0, 0.0));
        assert!((ad[(2, 1)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ad[(0, 0)], c(0.0, 0.0));
        let phi = field_op(&b, &[c(1.0, 0.0)]).unwrap();
        assert!(phi.is_hermitian());
        assert_eq!(phi.hermitian_defect(), 0.0);
        // <0|phi^2|0> = 1/2 for h of unit norm.
        let v = phi.matmul(&phi).get(0, 0);
        assert!((v.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn annihilation_is_antilinear_adjoint() {
        let b = small_basis(2, 2);
        let h = vec![c(0.3, -0.2), c(-1.0, 0.5)];
        let a = annihilation_op(&b, &h).unwrap();
        let ad = creation_op(&b, &h).unwrap();
        assert_eq!(a.to_dense(), ad.to_dense().adjoint());
        let vac = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        assert!(a.matvec(&vac).iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn number_operator_is_dgamma_of_identity() {
        let b = small_basis(4, 3);
        let id = DMatrix::<C64>::identity(4, 4);
        assert_eq!(dgamma(&b, &id).unwrap().to_dense(), number_op(&b).to_dense());
        let d = [0.5, -1.0, 2.0, 0.25];
        let diag = crate::fock::grid::diag_op(&d);
        assert_eq!(dgamma(&b, &diag).unwrap().to_dense(), dgamma_diag(&b, &d).unwrap().to_dense());
    }

    #[test]
    fn gamma_of_identity_and_diagonal_path() {
        let b = small_basis(2, 3);
        let id = DMatrix::<C64>::identity(2, 2);
        assert_eq!(gamma(&b, &id).unwrap().to_dense(), DMatrix::identity(b.dim(), b.dim()));
        // Off-diagonal-free matrix through both paths.
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = c(0.5, 0.1);
        m[(1, 1)] = c(-2.0, 0.0);
        let fast = gamma(&b, &m).unwrap().to_dense();
        let slow = gamma_between(&b, &b, &m).unwrap().to_dense();
        assert!((fast - slow).norm() < 1e-14);
    }

    #[test]
    fn dgamma2_collapses_to_dgamma() {
        let b = small_basis(2, 3);
        let id = DMatrix::<C64>::identity(2, 2);
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.3), c(-0.4, 0.0), c(0.0, 1.0)]);
        let lhs = dgamma2(&b, &id, &m).unwrap().to_dense();
        let rhs = dgamma(&b, &m).unwrap().to_dense();
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn soft_projector_keeps_hard_states() {
        let grid = ModeGrid::line(4, 1.0, 0.6).unwrap();
        let b = build_basis(Arc::new(grid), 2, None).unwrap();
        let p = soft_free_projector(&b);
        let pd = p.to_dense();
        assert!((&pd * &pd - &pd).norm() == 0.0);
        let soft = b.grid().soft_mask();
        for i in 0..b.dim() {
            let has_soft = b.occupation(i).iter().zip(&soft).any(|(&n, &s)| n > 0 && s);
            assert_eq!(pd[(i, i)].re, if has_soft { 0.0 } else { 1.0 });
        }
    }
}
