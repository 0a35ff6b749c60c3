use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::grid::ModeGrid;

/// Enumerated occupation-number states under a boson-number cap and an
/// optional energy cap.
///
/// States are ordered by total boson number, then in descending
/// lexicographic order of the occupation vector (so the one-boson sector
/// lists modes in grid order).
#[derive(Debug, Clone)]
pub struct OccupationBasis {
    grid: Arc<ModeGrid>,
    n_max: usize,
    e_cap: Option<f64>,
    n_modes: usize,
    occ: Vec<u8>,
    totals: Vec<usize>,
    energies: Vec<f64>,
    sector_start: Vec<usize>,
    index: HashMap<Box<[u8]>, usize>,
}

impl PartialEq for OccupationBasis {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.n_max == other.n_max
            && self.e_cap.map(f64::to_bits) == other.e_cap.map(f64::to_bits)
            && self.occ == other.occ
    }
}

/// Enumerates the basis. Fails if the caps exclude even the vacuum.
pub fn build_basis(grid: Arc<ModeGrid>, n_max: usize, e_cap: Option<f64>) -> Result<OccupationBasis> {
    OccupationBasis::new(grid, n_max, e_cap)
}

impl OccupationBasis {
    pub fn new(grid: Arc<ModeGrid>, n_max: usize, e_cap: Option<f64>) -> Result<Self> {
        if n_max > u8::MAX as usize {
            return Err(Error::InvalidConfig(format!("n_max = {n_max} exceeds 255")));
        }
        if let Some(cap) = e_cap {
            if cap.is_nan() || cap < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "energy cap {cap} excludes the vacuum"
                )));
            }
        }
        let m = grid.n_modes();
        let omega = grid.omega_mod().to_vec();
        // suffix_min[j] = min omega over modes j.. (for energy pruning)
        let mut suffix_min = vec![f64::INFINITY; m + 1];
        for j in (0..m).rev() {
            suffix_min[j] = suffix_min[j + 1].min(omega[j]);
        }
        let cap = e_cap.unwrap_or(f64::INFINITY);

        let mut occ: Vec<u8> = Vec::new();
        let mut totals = Vec::new();
        let mut energies = Vec::new();
        let mut sector_start = Vec::with_capacity(n_max + 2);
        let mut cur = vec![0u8; m];

        #[allow(clippy::too_many_arguments)]
        fn rec(
            j: usize,
            remaining: usize,
            energy: f64,
            cur: &mut Vec<u8>,
            omega: &[f64],
            suffix_min: &[f64],
            cap: f64,
            out: &mut Vec<(Vec<u8>, f64)>,
        ) {
            let m = omega.len();
            if remaining == 0 {
                out.push((cur.clone(), energy));
                return;
            }
            if j == m {
                return;
            }
            for n in (0..=remaining).rev() {
                let e = energy + n as f64 * omega[j];
                let rest = remaining - n;
                let lower = if rest > 0 { e + rest as f64 * suffix_min[j + 1] } else { e };
                if lower > cap {
                    continue;
                }
                if rest > 0 && j + 1 == m {
                    continue;
                }
                cur[j] = n as u8;
                rec(j + 1, rest, e, cur, omega, suffix_min, cap, out);
                cur[j] = 0;
            }
        }

        for total in 0..=n_max {
            sector_start.push(totals.len());
            let mut states = Vec::new();
            rec(0, total, 0.0, &mut cur, &omega, &suffix_min, cap, &mut states);
            for (s, e) in states {
                occ.extend_from_slice(&s);
                totals.push(total);
                energies.push(e);
            }
        }
        sector_start.push(totals.len());

        let mut index = HashMap::with_capacity(totals.len());
        for i in 0..totals.len() {
            index.insert(occ[i * m..(i + 1) * m].to_vec().into_boxed_slice(), i);
        }
        Ok(OccupationBasis {
            grid,
            n_max,
            e_cap,
            n_modes: m,
            occ,
            totals,
            energies,
            sector_start,
            index,
        })
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<ModeGrid> {
        Arc::clone(&self.grid)
    }

    pub fn dim(&self) -> usize {
        self.totals.len()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn e_cap(&self) -> Option<f64> {
        self.e_cap
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.occ[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn total(&self, i: usize) -> usize {
        self.totals[i]
    }

    /// `sum_j n_j omega_mod(k_j)`.
    pub fn energy(&self, i: usize) -> f64 {
        self.energies[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Index range of the `n`-boson sector.
    pub fn sector(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.n_max {
            return self.dim()..self.dim();
        }
        self.sector_start[n]..self.sector_start[n + 1]
    }

    /// States with `N <= n_max - 1`, on which truncated identities are exact.
    pub fn guarded_mask(&self) -> Vec<bool> {
        self.totals.iter().map(|&n| n < self.n_max).collect()
    }

    pub fn guarded_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.totals[i] < self.n_max).collect()
    }

    /// States with no soft boson (the range of `Gamma(chi_i)`).
    pub fn soft_free_indices(&self) -> Vec<usize> {
        let soft = self.grid.soft_mask();
        (0..self.dim())
            .filter(|&i| {
                self.occupation(i)
                    .iter()
                    .zip(&soft)
                    .all(|(&n, &s)| n == 0 || !s)
            })
            .collect()
    }

    /// Total boson momentum `sum_j n_j k_j` of state `i`.
    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (j, &n) in self.occupation(i).iter().enumerate() {
            if n > 0 {
                let k = self.grid.point(j);
                for a in 0..3 {
                    p[a] += n as f64 * k[a];
                }
            }
        }
        p
    }

    /// CSV dump: `index,occupation,total,energy`, occupations joined by `;`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,occupation,total,energy\n");
        for i in 0..self.dim() {
            let occ: Vec<String> = self.occupation(i).iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{},{},{},{:e}", i, occ.join(";"), self.totals[i], self.energies[i]);
        }
        s
    }
}

/// `binomial(n, k)` as `f64` (exact for the small arguments used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::grid::GridLayout;

    fn grid(m: usize) -> Arc<ModeGrid> {
        Arc::new(ModeGrid::line(m, 1.0, 0.1).unwrap_or_else(|_| {
            let pts = (0..m).map(|j| [0.3 + j as f64 * 0.2, 0.0, 0.0]).collect();
            ModeGrid::from_parts(1, pts, vec![0.2; m], 0.1, GridLayout::Custom).unwrap()
        }))
    }

    #[test]
    fn stars_and_bars_count() {
        let b = build_basis(grid(3), 2, None).unwrap();
        assert_eq!(b.dim(), 10);
        for m in 1..6 {
            for n in 0..4 {
                let b = build_basis(grid(m), n, None).unwrap();
                assert_eq!(b.dim() as f64, binomial(m + n, n));
            }
        }
    }

    #[test]
    fn vacuum_only_cases() {
        let b = build_basis(grid(5), 0, None).unwrap();
        assert_eq!(b.dim(), 1);
        let g = grid(2);
        let wmin = g.omega_mod().iter().cloned().fold(f64::INFINITY, f64::min);
        let b = build_basis(g, 2, Some(0.5 * wmin)).unwrap();
        assert_eq!(b.dim(), 1);
        assert!(b.occupation(0).iter().all(|&n| n == 0));
        assert!(build_basis(grid(2), 2, Some(-1.0)).is_err());
    }

    #[test]
    fn graded_descending_lex_order() {
        let b = build_basis(grid(3), 2, None).unwrap();
        let got: Vec<Vec<u8>> = (0..b.dim()).map(|i| b.occupation(i).to_vec()).collect();
        let want: Vec<Vec<u8>> = vec![
            vec![0, 0, 0],
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(got, want);
        for i in 0..b.dim() {
            assert_eq!(b.index_of(b.occupation(i)), Some(i));
        }
    }

    #[test]
    fn energy_cap_prunes_exactly() {
        let g = grid(4);
        let full = build_basis(g.clone(), 3, None).unwrap();
        let cap = 1.1;
        let capped = build_basis(g, 3, Some(cap)).unwrap();
        let expect: Vec<&[u8]> = (0..full.dim())
            .filter(|&i| full.energy(i) <= cap)
            .map(|i| full.occupation(i))
            .collect();
        let got: Vec<&[u8]> = (0..capped.dim()).map(|i| capped.occupation(i)).collect();
        assert_eq!(expect, got);
    }

    #[test]
    fn csv_dump_is_deterministic() {
        let a = build_basis(grid(4), 3, Some(2.0)).unwrap().to_csv();
        let b = build_basis(grid(4), 3, Some(2.0)).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("index,occupation,total,energy\n0,0;0;0;0,0,0e0\n"));
    }
}
