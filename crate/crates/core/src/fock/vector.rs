use std::sync::Arc;

use crate::error::{check_len, Result};
use crate::fock::basis::OccupationBasis;
use crate::linalg;
use crate::sparse::{SparseOperator, C64};

/// A state in a truncated Fock space.
#[derive(Debug, Clone)]
pub struct FockVector {
    basis: Arc<OccupationBasis>,
    amps: Vec<C64>,
}

impl FockVector {
    pub fn new(basis: Arc<OccupationBasis>, amps: Vec<C64>) -> Result<Self> {
        check_len(basis.dim(), amps.len())?;
        Ok(FockVector { basis, amps })
    }

    /// The vacuum `(1, 0, 0, ...)`.
    pub fn vacuum(basis: Arc<OccupationBasis>) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[0] = C64::new(1.0, 0.0);
        FockVector { basis, amps }
    }

    /// Basis vector for a given occupation, if it is in the basis.
    pub fn occupation_state(basis: Arc<OccupationBasis>, occ: &[u8]) -> Option<Self> {
        let i = basis.index_of(occ)?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[i] = C64::new(1.0, 0.0);
        Some(FockVector { basis, amps })
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        linalg::dot(&self.amps, &other.amps)
    }

    pub fn apply(&self, op: &SparseOperator) -> Result<FockVector> {
        let amps = op.try_matvec(&self.amps)?;
        FockVector::new(Arc::clone(&self.basis), amps)
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// Probability mass in the `n`-boson sector.
    pub fn sector_weight(&self, n: usize) -> f64 {
        self.basis.sector(n).map(|i| self.amps[i].norm_sqr()).sum()
    }
}
