//! Exact self-energy of a semi-infinite empty channel attached to an end column.

use faer::{Mat, Side};

use super::{Polarization, SiteLattice};
use crate::error::{Error, Result};
use crate::C64;

/// Σ = −t² g_s, added to the end column's diagonal block; g_s is the surface
/// Green's function of the channel (eliminating the lead gives D₀ − C g_s C).
#[derive(Clone, Debug)]
pub struct SelfEnergy {
    matrix: Mat<C64>,
}

impl SelfEnergy {
    /// Builds the lead for `col`'s cross-section. Each transverse mode of the
    /// channel is a uniform chain with on-site a = λ − k² and hopping t = −1/h²;
    /// its surface Green's function solves t²g² − a g + 1 = 0, and the root with
    /// |t g| < 1 is the one that decays into the lead.
    pub fn new(lattice: &SiteLattice, col: usize, h: f64, k2: C64) -> Result<Self> {
        let range = lattice.column_range(col);
        let n = range.len();
        let inv_h2 = 1.0 / (h * h);
        let rows: Vec<usize> = range.clone().map(|u| lattice.row_of(u)).collect();
        let mut t = Mat::<f64>::zeros(n, n);
        for a in 0..n {
            let r = rows[a] as i64;
            let mut diag = 2.0 * inv_h2;
            for dr in [-1i64, 1] {
                match lattice.site(col as i64, r + dr) {
                    Some(v) => {
                        diag += inv_h2;
                        let b = v - range.start;
                        t[(a, b)] = -inv_h2;
                    }
                    None if lattice.pol == Polarization::Tm => diag += inv_h2,
                    None => {}
                }
            }
            t[(a, a)] = diag;
        }
        let eig = t
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::InvalidInput(format!("lead eigendecomposition failed: {e:?}")))?;
        let lambda = eig.S().column_vector();
        let v = eig.U();
        let hop2 = inv_h2 * inv_h2;
        let g: Vec<C64> = (0..n)
            .map(|k| {
                let a = C64::new(lambda[k], 0.0) - k2;
                let disc = (a * a - 4.0 * hop2).sqrt();
                let (p, m) = (a + disc, a - disc);
                // 2/(a ± disc) with the larger denominator is the decaying root
                let den = if p.norm() > m.norm() {
                    p
                } else if m.norm() > p.norm() {
                    m
                } else if (2.0 / p).im >= (2.0 / m).im {
                    p
                } else {
                    m
                };
                2.0 / den
            })
            .collect();
        let mut matrix = Mat::<C64>::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += g[k] * (v[(a, k)] * v[(b, k)]);
                }
                matrix[(a, b)] = -acc * hop2;
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::geometry::{Boundary, Grid, MaterialMap};

    /// A long closed channel approaches the open one far from its ends.
    #[test]
    fn open_end_matches_long_channel() {
        let fp = FrequencyPoint::at_omega(C64::new(0.8, 1.1));
        for pol in [Polarization::Tm, Polarization::Te] {
            let short = Grid::new(2, 12, 6, 8, Boundary::OpenChannel).unwrap();
            let long = Grid::new(2, 12 + 2 * 160, 6, 8, Boundary::MetalBox).unwrap();
            let a = assemble_operator(&short, &MaterialMap::vacuum(12, 6), pol, &fp).unwrap();
            let b = assemble_operator(&long, &MaterialMap::vacuum(12 + 320, 6), pol, &fp).unwrap();
            let fa = BlockFactorization::new(&a, None).unwrap();
            let fb = BlockFactorization::new(&b, None).unwrap();
            let ga = solve_point_source(&a, &fa, (6, 3)).unwrap();
            let gb = solve_point_source(&b, &fb, (166, 3)).unwrap();
            for c in 0..a.lattice.cols as i64 {
                let (x, y) = (ga.at(c, 3), gb.at(c + 160, 3));
                assert!((x - y).norm() < 1e-9 * y.norm().max(1e-6), "{pol:?} col {c}: {x} vs {y}");
            }
        }
    }
}
