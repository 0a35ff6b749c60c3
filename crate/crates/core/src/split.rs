//! Fock space of a direct sum as a tensor product: the isomorphism `U`,
//! the splitting map `Gamma_breve(j) = U Gamma(j)` and the scattering
//! identification `I = Gamma(iota) U^*`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::fock::basis::{build_basis, OccupationBasis};
use crate::fock::grid::{GridLayout, ModeGrid};
use crate::fock::ops::{dgamma2_between, gamma_between, gamma_between_counted, Overflow};
use crate::linalg;
use crate::sparse::{SparseOperator, C64};

/// Which algebraic relation a split `j = (j0, jinf)` satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitKind {
    /// `j0^* j0 + jinf^* jinf = 1`
    pub isometric: bool,
    /// `j0 + jinf = 1`
    pub partition: bool,
}

/// A pair of mode operators `j0, jinf`, viewed as `j: h -> h (+) h`.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub j0: DMatrix<C64>,
    pub jinf: DMatrix<C64>,
    kind: SplitKind,
}

const KIND_TOL: f64 = 1e-12;

impl SplitPair {
    pub fn new(j0: DMatrix<C64>, jinf: DMatrix<C64>) -> Result<Self> {
        let m = j0.nrows();
        for mat in [&j0, &jinf] {
            check_len(m, mat.nrows())?;
            check_len(m, mat.ncols())?;
        }
        let id = DMatrix::<C64>::identity(m, m);
        let iso = (j0.adjoint() * &j0 + jinf.adjoint() * &jinf - &id).norm();
        let part = (&j0 + &jinf - &id).norm();
        let kind = SplitKind {
            isometric: iso <= KIND_TOL,
            partition: part <= KIND_TOL,
        };
        Ok(SplitPair { j0, jinf, kind })
    }

    /// Diagonal split from per-mode multipliers.
    pub fn diagonal(j0: &[f64], jinf: &[f64]) -> Result<Self> {
        check_len(j0.len(), jinf.len())?;
        let d = |v: &[f64]| crate::fock::grid::diag_op(v);
        Self::new(d(j0), d(jinf))
    }

    pub fn kind(&self) -> SplitKind {
        self.kind
    }

    pub fn n_modes(&self) -> usize {
        self.j0.nrows()
    }

    /// `j` as a `2M x M` matrix `[j0; jinf]`.
    pub fn stacked(&self) -> DMatrix<C64> {
        stack(&self.j0, &self.jinf)
    }
}

/// Vertical block `[top; bottom]`.
pub fn stack(top: &DMatrix<C64>, bottom: &DMatrix<C64>) -> DMatrix<C64> {
    let (m, n) = (top.nrows(), top.ncols());
    let mut out = DMatrix::<C64>::zeros(m + bottom.nrows(), n);
    out.view_mut((0, 0), (m, n)).copy_from(top);
    out.view_mut((m, 0), (bottom.nrows(), n)).copy_from(bottom);
    out
}

/// Block diagonal `b0 (+) binf`.
pub fn direct_sum(b0: &DMatrix<C64>, binf: &DMatrix<C64>) -> DMatrix<C64> {
    let (m0, n0) = b0.shape();
    let (m1, n1) = binf.shape();
    let mut out = DMatrix::<C64>::zeros(m0 + m1, n0 + n1);
    out.view_mut((0, 0), (m0, n0)).copy_from(b0);
    out.view_mut((m0, n0), (m1, n1)).copy_from(binf);
    out
}

/// Truncated `F (x) F`: pairs of left/right basis states whose total boson
/// number is at most `n_joint`.
///
/// Pairs are ordered by joint boson number, then left index, then right
/// index. The basis also carries the matching truncation of `F(h (+) h)`
/// (cap `n_joint`), which `U` maps onto it.
#[derive(Debug, Clone)]
pub struct TensorBasis {
    left: Arc<OccupationBasis>,
    right: Arc<OccupationBasis>,
    n_joint: usize,
    pairs: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
    sum_basis: Arc<OccupationBasis>,
}

impl TensorBasis {
    pub fn new(left: Arc<OccupationBasis>, right: Arc<OccupationBasis>, n_joint: usize) -> Result<Self> {
        let union = ModeGrid::disjoint_union(left.grid(), right.grid())?;
        let sum_basis = Arc::new(build_basis(Arc::new(union), n_joint, None)?);
        let mut pairs = Vec::new();
        for n in 0..=n_joint {
            for l in 0..left.dim() {
                let nl = left.total(l);
                if nl > n {
                    break;
                }
                for r in right.sector(n - nl) {
                    pairs.push((l, r));
                }
            }
        }
        let index = pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        Ok(TensorBasis {
            left,
            right,
            n_joint,
            pairs,
            index,
            sum_basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn left(&self) -> &Arc<OccupationBasis> {
        &self.left
    }

    pub fn right(&self) -> &Arc<OccupationBasis> {
        &self.right
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    /// The truncated Fock space over `h (+) h` matched to this basis.
    pub fn sum_basis(&self) -> &Arc<OccupationBasis> {
        &self.sum_basis
    }

    pub fn pair(&self, i: usize) -> (usize, usize) {
        self.pairs[i]
    }

    pub fn index_of(&self, left: usize, right: usize) -> Option<usize> {
        self.index.get(&(left, right)).copied()
    }

    /// Joint boson number `N_0 + N_inf` of pair `i`.
    pub fn total(&self, i: usize) -> usize {
        let (l, r) = self.pairs[i];
        self.left.total(l) + self.right.total(r)
    }

    /// Pairs strictly inside every cap, where lifted identities are exact.
    pub fn guarded_mask(&self) -> Vec<bool> {
        self.pairs
            .iter()
            .map(|&(l, r)| {
                let (nl, nr) = (self.left.total(l), self.right.total(r));
                nl + nr < self.n_joint && nl < self.left.n_max() && nr < self.right.n_max()
            })
            .collect()
    }

    pub fn guarded_indices(&self) -> Vec<usize> {
        let mask = self.guarded_mask();
        (0..self.dim()).filter(|&i| mask[i]).collect()
    }

    /// Index of `Omega (x) Omega`.
    pub fn vacuum(&self) -> usize {
        0
    }

    /// `op (x) 1`.
    pub fn lift_left(&self, op: &SparseOperator) -> Result<SparseOperator> {
        check_len(self.left.dim(), op.cols())?;
        check_len(self.left.dim(), op.rows())?;
        let mut by_left: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.left.dim()];
        for (i, &(l, r)) in self.pairs.iter().enumerate() {
            by_left[l].push((r, i));
        }
        let mut t = Vec::new();
        for (row_l, col_l, v) in op.triplets() {
            for &(r, col) in &by_left[col_l] {
                if let Some(row) = self.index_of(row_l, r) {
                    t.push((row, col, v));
                }
            }
        }
        Ok(SparseOperator::from_triplets(self.dim(), self.dim(), t, op.is_hermitian()))
    }

    /// `1 (x) op`.
    pub fn lift_right(&self, op: &SparseOperator) -> Result<SparseOperator> {
        check_len(self.right.dim(), op.cols())?;
        check_len(self.right.dim(), op.rows())?;
        let mut by_right: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.right.dim()];
        for (i, &(l, r)) in self.pairs.iter().enumerate() {
            by_right[r].push((l, i));
        }
        let mut t = Vec::new();
        for (row_r, col_r, v) in op.triplets() {
            for &(l, col) in &by_right[col_r] {
                if let Some(row) = self.index_of(l, row_r) {
                    t.push((row, col, v));
                }
            }
        }
        Ok(SparseOperator::from_triplets(self.dim(), self.dim(), t, op.is_hermitian()))
    }

    /// Diagonal operator `f(N_0, N_inf)`.
    pub fn number_function(&self, f: impl Fn(usize, usize) -> f64) -> SparseOperator {
        let d: Vec<f64> = self
            .pairs
            .iter()
            .map(|&(l, r)| f(self.left.total(l), self.right.total(r)))
            .collect();
        SparseOperator::diagonal(&d)
    }

    /// Projection `1 (x) |Omega><Omega|` onto an empty right factor.
    pub fn right_vacuum_projector(&self) -> SparseOperator {
        self.number_function(|_, nr| if nr == 0 { 1.0 } else { 0.0 })
    }

    /// CSV dump: `index,left,right` with occupations joined by `;`.
    pub fn to_csv(&self) -> String {
        let join = |o: &[u8]| o.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
        let mut s = String::from("index,left,right\n");
        for (i, &(l, r)) in self.pairs.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", i, join(self.left.occupation(l)), join(self.right.occupation(r)));
        }
        s
    }
}

fn check_union(basis_sum: &OccupationBasis, tb: &TensorBasis) -> Result<()> {
    let split = tb.left.n_modes();
    match basis_sum.grid().layout() {
        GridLayout::Union { split: s } if *s == split => {}
        _ => {
            return Err(Error::IncompatibleGrid(
                "U needs a basis over the disjoint union of the tensor factors' grids".into(),
            ))
        }
    }
    check_len(split + tb.right.n_modes(), basis_sum.n_modes())?;
    if basis_sum.n_max() != tb.n_joint {
        return Err(Error::IncompatibleCaps(format!(
            "sum basis n_max = {} but joint tensor cap = {}",
            basis_sum.n_max(),
            tb.n_joint
        )));
    }
    Ok(())
}

/// `U: F(h1 (+) h2) -> F(h1) (x) F(h2)`.
///
/// In occupation coordinates `U` only relabels `|n_0, n_inf> -> |n_0> (x) |n_inf>`;
/// the binomial factors of the tensor-power picture are absorbed by the
/// symmetric-state normalization.
pub fn tensor_iso_u(basis_sum: &OccupationBasis, tb: &TensorBasis) -> Result<SparseOperator> {
    check_union(basis_sum, tb)?;
    let split = tb.left.n_modes();
    let mut t = Vec::new();
    for col in 0..basis_sum.dim() {
        let occ = basis_sum.occupation(col);
        let (Some(l), Some(r)) = (tb.left.index_of(&occ[..split]), tb.right.index_of(&occ[split..])) else {
            continue;
        };
        if let Some(row) = tb.index_of(l, r) {
            t.push((row, col, C64::new(1.0, 0.0)));
        }
    }
    Ok(SparseOperator::from_triplets(tb.dim(), basis_sum.dim(), t, false))
}

/// `Gamma_breve(j) = U Gamma(j): F -> F (x) F`.
pub fn breve_gamma(sp: &SplitPair, src: &OccupationBasis, tb: &TensorBasis) -> Result<SparseOperator> {
    check_len(src.n_modes(), sp.n_modes())?;
    let g = gamma_between(src, &tb.sum_basis, &sp.stacked())?;
    Ok(tensor_iso_u(&tb.sum_basis, tb)?.matmul(&g))
}

/// `dGamma_breve(a, b) = U dGamma(a, b)` for `a = j` and `b = (b0, binf)`.
pub fn dbreve_gamma2(
    sp: &SplitPair,
    b: (&DMatrix<C64>, &DMatrix<C64>),
    src: &OccupationBasis,
    tb: &TensorBasis,
) -> Result<SparseOperator> {
    check_len(src.n_modes(), sp.n_modes())?;
    let bb = stack(b.0, b.1);
    let d = dgamma2_between(src, &tb.sum_basis, &sp.stacked(), &bb)?;
    Ok(tensor_iso_u(&tb.sum_basis, tb)?.matmul(&d))
}

/// `I = Gamma(iota) U^*: F (x) F -> F`, with `iota(h0, hinf) = h0 + hinf`.
///
/// Images beyond the target caps are projected out and reported.
pub fn scattering_ident(tb: &TensorBasis, target: &OccupationBasis) -> Result<(SparseOperator, Overflow)> {
    let m = target.n_modes();
    check_len(m, tb.left.n_modes())?;
    check_len(m, tb.right.n_modes())?;
    let id = DMatrix::<C64>::identity(m, m);
    let mut iota = DMatrix::<C64>::zeros(m, 2 * m);
    iota.view_mut((0, 0), (m, m)).copy_from(&id);
    iota.view_mut((0, m), (m, m)).copy_from(&id);
    let (g, overflow) = gamma_between_counted(&tb.sum_basis, target, &iota)?;
    let u = tensor_iso_u(&tb.sum_basis, tb)?;
    Ok((g.matmul(&u.adjoint()), overflow))
}

/// `|| I (N+1)^{-k} (x) chi(N <= k) ||` on the truncated space.
///
/// Every operator here is bounded; the value depends on the caps.
pub fn i_bound_norm(tb: &TensorBasis, target: &OccupationBasis, k: u32) -> Result<f64> {
    let (i_op, _) = scattering_ident(tb, target)?;
    let d = tb.number_function(|nl, nr| {
        if nr as u32 <= k {
            (nl as f64 + 1.0).powi(-(k as i32))
        } else {
            0.0
        }
    });
    Ok(linalg::spectral_norm(&i_op.matmul(&d).to_dense()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Arc<ModeGrid> {
        Arc::new(ModeGrid::line(m, 1.0, 0.1).unwrap())
    }

    #[test]
    fn tensor_dimension_counts_pairs() {
        let g = grid(2);
        let b = Arc::new(build_basis(g, 2, None).unwrap());
        let tb = TensorBasis::new(b.clone(), b.clone(), 2).unwrap();
        // sum over n <= 2 of binomial(n + 3, 3) = 1 + 4 + 10
        assert_eq!(tb.dim(), 15);
        assert_eq!(tb.dim(), tb.sum_basis().dim());
        assert_eq!(tb.pair(tb.vacuum()), (0, 0));
    }

    #[test]
    fn u_is_a_permutation_when_caps_match() {
        let g = grid(2);
        let b = Arc::new(build_basis(g, 3, None).unwrap());
        let tb = TensorBasis::new(b.clone(), b.clone(), 3).unwrap();
        let u = tensor_iso_u(tb.sum_basis(), &tb).unwrap().to_dense();
        let id = DMatrix::<C64>::identity(tb.dim(), tb.dim());
        assert!((u.adjoint() * &u - &id).norm() == 0.0);
    }

    #[test]
    fn mismatched_cap_is_rejected() {
        let g = grid(2);
        let b = Arc::new(build_basis(g.clone(), 2, None).unwrap());
        let tb = TensorBasis::new(b.clone(), b.clone(), 2).unwrap();
        let union = Arc::new(ModeGrid::disjoint_union(&g, &g).unwrap());
        let other = build_basis(union, 3, None).unwrap();
        assert!(matches!(tensor_iso_u(&other, &tb), Err(Error::IncompatibleCaps(_))));
    }

    #[test]
    fn split_kind_detection() {
        let s = SplitPair::diagonal(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(s.kind().isometric && s.kind().partition);
        let c = 0.6f64;
        let s = SplitPair::diagonal(&[c, c], &[0.8, 0.8]).unwrap();
        assert!(s.kind().isometric && !s.kind().partition);
    }
}
