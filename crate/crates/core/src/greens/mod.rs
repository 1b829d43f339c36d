//! Discretized Green's-function solves at complex frequency.
//!
//! In a z-invariant 2D cross-section the field splits into two scalar
//! problems: out-of-plane E (Dirichlet on metal, unknowns on cell corners)
//! and out-of-plane H (Neumann on metal, unknowns at cell centres). Both use
//! the operator −∇² − εω², whose only frequency dependence is through the
//! product k² = εω²; that is the matrix-level form of the contour/medium
//! correspondence.

mod blocks;
mod correlations;
mod free;
mod lead;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::contour::{Contour, Permittivity};
use crate::error::{Error, Result};
use crate::geometry::{Boundary, Grid, MaterialMap};
use crate::C64;

pub use blocks::{BlockFactorization, SelectedInverse};
pub use correlations::{
    field_correlations, scalar_correlations, CorrelationBundle, PointStencils, ScalarCorrelations,
};
pub use free::{FreeLattice, Subtracted};

/// Largest residual ‖Ax − b‖/‖b‖ accepted from a point-source solve.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Block inverses with a condition estimate above this are treated as breakdown.
pub const CONDITION_LIMIT: f64 = 1e13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    /// Out-of-plane electric field (E_z), Dirichlet on perfect metal.
    Tm,
    /// Out-of-plane magnetic field (H_z), Neumann on perfect metal.
    Te,
}

impl Polarization {
    /// Offset of the unknowns from the cell-corner lattice, in cells.
    pub fn site_offset(self) -> f64 {
        match self {
            Polarization::Tm => 0.0,
            Polarization::Te => 0.5,
        }
    }
}

/// A point on the contour: real parameter ξ, complex ω, and the ambient
/// permittivity evaluated there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub xi: f64,
    pub omega: C64,
    pub eps: C64,
    pub k2: C64,
}

impl FrequencyPoint {
    pub fn on_contour(contour: &Contour, ambient: &Permittivity, xi: f64) -> Result<Self> {
        let omega = contour.omega(xi)?;
        let eps = ambient.at_omega(omega)?;
        Ok(Self {
            xi,
            omega,
            eps,
            k2: eps * omega * omega,
        })
    }

    /// The same physics viewed at real frequency ξ in the medium ε_c.
    pub fn equivalent_medium(xi: f64, eps_c: C64) -> Self {
        Self {
            xi,
            omega: C64::new(xi, 0.0),
            eps: eps_c,
            k2: eps_c * xi * xi,
        }
    }

    /// A bare complex frequency in vacuum (used for ω-plane scans).
    pub fn at_omega(omega: C64) -> Self {
        Self {
            xi: omega.norm(),
            omega,
            eps: C64::new(1.0, 0.0),
            k2: omega * omega,
        }
    }
}

/// Unknown numbering for one polarization: lattice columns along x, rows
/// along y, column-major, metal/boundary sites removed.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteLattice {
    pub pol: Polarization,
    pub cols: usize,
    pub rows: usize,
    index: Vec<Option<usize>>,
    col_start: Vec<usize>,
    site_row: Vec<usize>,
    pub open_ends: bool,
    pub one_dimensional: bool,
}

impl SiteLattice {
    pub fn new(grid: &Grid, mat: &MaterialMap, pol: Polarization) -> Result<Self> {
        let (nx, ny) = (grid.nx, grid.ny);
        let one_d = grid.dimension == 1;
        if one_d && pol == Polarization::Te {
            return Err(Error::InvalidInput(
                "the 1D line carries a single scalar polarization; use tm".into(),
            ));
        }
        let open = grid.boundary == Boundary::OpenChannel;
        let metal = |i: i64, j: i64| -> bool {
            if i < 0 || j < 0 || i >= nx as i64 || j >= ny as i64 {
                false
            } else {
                mat.is_metal(i as usize, j as usize)
            }
        };
        let (cols, rows) = match (pol, one_d) {
            (Polarization::Tm, false) => (nx + 1, ny + 1),
            (Polarization::Tm, true) => (nx + 1, 1),
            (Polarization::Te, _) => (nx, ny),
        };
        let mut index = vec![None; cols * rows];
        let mut col_start = Vec::with_capacity(cols + 1);
        let mut site_row = Vec::new();
        let mut n = 0;
        for i in 0..cols {
            col_start.push(n);
            for j in 0..rows {
                let active = match pol {
                    Polarization::Tm => {
                        let (ii, jj) = (i as i64, j as i64);
                        let on_x_edge = i == 0 || i == cols - 1;
                        let on_y_edge = !one_d && (j == 0 || j == rows - 1);
                        let touches = if one_d {
                            metal(ii - 1, 0) || metal(ii, 0)
                        } else {
                            metal(ii - 1, jj - 1) || metal(ii, jj - 1) || metal(ii - 1, jj) || metal(ii, jj)
                        };
                        !touches && !on_y_edge && (open || !on_x_edge)
                    }
                    Polarization::Te => !mat.is_metal(i, j),
                };
                if active {
                    index[i * rows + j] = Some(n);
                    site_row.push(j);
                    n += 1;
                }
            }
        }
        col_start.push(n);
        if n == 0 {
            return Err(Error::InvalidGeometry("no field unknowns outside metal".into()));
        }
        Ok(Self {
            pol,
            cols,
            rows,
            index,
            col_start,
            site_row,
            open_ends: open,
            one_dimensional: one_d,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.site_row.len()
    }

    pub fn site(&self, col: i64, row: i64) -> Option<usize> {
        if col < 0 || row < 0 || col >= self.cols as i64 || row >= self.rows as i64 {
            return None;
        }
        self.index[col as usize * self.rows + row as usize]
    }

    pub fn column_of(&self, unknown: usize) -> usize {
        self.col_start.partition_point(|&s| s <= unknown) - 1
    }

    pub fn row_of(&self, unknown: usize) -> usize {
        self.site_row[unknown]
    }

    pub fn column_range(&self, col: usize) -> std::ops::Range<usize> {
        self.col_start[col]..self.col_start[col + 1]
    }

    /// Physical position (units of the cell size Δ) of a lattice site.
    pub fn position(&self, col: usize, row: usize) -> (f64, f64) {
        let o = self.pol.site_offset();
        (col as f64 + o, if self.one_dimensional { 0.0 } else { row as f64 + o })
    }
}

/// Compressed-row sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .position(|&k| k == c)
            .map(|p| self.values[span.start + p])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut m = vec![vec![C64::new(0.0, 0.0); self.n]; self.n];
        for (r, row) in m.iter_mut().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row[self.col_idx[k]] += self.values[k];
            }
        }
        m
    }
}

/// The assembled operator −∇² − k² for one polarization, with the open-channel
/// lead self-energy (if any) kept separately so the sparse part is exactly
/// the lattice stencil.
#[derive(Clone, Debug)]
pub struct ScalarOperator {
    pub lattice: SiteLattice,
    pub matrix: CsrMatrix,
    pub k2: C64,
    pub spacing: f64,
    pub omega: C64,
    /// Self-energies attached to the first and last columns, if the ends are open.
    pub leads: Option<(lead::SelfEnergy, lead::SelfEnergy)>,
}

impl ScalarOperator {
    pub fn unknowns(&self) -> usize {
        self.lattice.unknowns()
    }

    /// Weight of the discrete δ-function: one over the cell measure.
    pub fn source_strength(&self) -> f64 {
        if self.lattice.one_dimensional {
            1.0 / self.spacing
        } else {
            1.0 / (self.spacing * self.spacing)
        }
    }

    /// y = A x including lead self-energies.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.matrix.mul_vec(x);
        if let Some((left, right)) = &self.leads {
            let last = self.lattice.cols - 1;
            for (se, col) in [(left, 0usize), (right, last)] {
                let r = self.lattice.column_range(col);
                let m = se.matrix();
                for a in 0..r.len() {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..r.len() {
                        acc += m[(a, b)] * x[r.start + b];
                    }
                    y[r.start + a] += acc;
                }
            }
        }
        y
    }
}

/// Assembles the discrete curl-curl-minus-εω² operator for one polarization.
pub fn assemble_operator(grid: &Grid, mat: &MaterialMap, pol: Polarization, fp: &FrequencyPoint) -> Result<ScalarOperator> {
    let lattice = SiteLattice::new(grid, mat, pol)?;
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let k2 = fp.k2;
    let n = lattice.unknowns();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    let dirs: &[(i64, i64)] = if lattice.one_dimensional {
        &[(-1, 0), (1, 0)]
    } else {
        &[(-1, 0), (0, -1), (0, 1), (1, 0)]
    };
    for col in 0..lattice.cols {
        for u in lattice.column_range(col) {
            let row = lattice.row_of(u) as i64;
            let c = col as i64;
            let mut diag = -k2;
            let mut offs: Vec<(usize, C64)> = Vec::with_capacity(4);
            for &(dc, dr) in dirs {
                let (cc, rr) = (c + dc, row + dr);
                let outside_x = cc < 0 || cc >= lattice.cols as i64;
                match lattice.site(cc, rr) {
                    Some(v) => {
                        diag += inv_h2;
                        offs.push((v, C64::new(-inv_h2, 0.0)));
                    }
                    None => {
                        let counts = match pol {
                            // Dirichlet: the pinned neighbour still enters the Laplacian
                            Polarization::Tm => true,
                            // Neumann at metal; an open end continues into the lead
                            Polarization::Te => outside_x && lattice.open_ends,
                        };
                        if counts {
                            diag += inv_h2;
                        }
                    }
                }
            }
            // keep column indices sorted within the row
            let mut entries = offs;
            entries.push((u, diag));
            entries.sort_by_key(|e| e.0);
            for (v, val) in entries {
                col_idx.push(v);
                values.push(val);
            }
            row_ptr.push(col_idx.len());
        }
    }
    let matrix = CsrMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    };
    let leads = if lattice.open_ends && !lattice.one_dimensional {
        let left = lead::SelfEnergy::new(&lattice, 0, h, k2)?;
        let right = lead::SelfEnergy::new(&lattice, lattice.cols - 1, h, k2)?;
        Some((left, right))
    } else {
        None
    };
    Ok(ScalarOperator {
        lattice,
        matrix,
        k2,
        spacing: h,
        omega: fp.omega,
        leads,
    })
}

/// Field response to a unit point source at one lattice site.
#[derive(Clone, Debug)]
pub struct GreensField {
    pub pol: Polarization,
    pub source: (usize, usize),
    /// Values indexed by unknown; pinned sites are zero.
    pub values: Vec<C64>,
    pub residual: f64,
    lattice: SiteLattice,
    spacing: f64,
}

impl GreensField {
    pub fn at(&self, col: i64, row: i64) -> C64 {
        self.lattice
            .site(col, row)
            .map(|u| self.values[u])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// CSV rows `x,y,re,im` (physical coordinates) for every lattice site.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,y,re,im")?;
        for col in 0..self.lattice.cols {
            for row in 0..self.lattice.rows {
                let (x, y) = self.lattice.position(col, row);
                let v = self.at(col as i64, row as i64);
                writeln!(out, "{},{},{:e},{:e}", x * self.spacing, y * self.spacing, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Solves A G = δ_source with the block factorization and verifies the residual.
pub fn solve_point_source(op: &ScalarOperator, fac: &BlockFactorization, source: (usize, usize)) -> Result<GreensField> {
    let Some(s) = op.lattice.site(source.0 as i64, source.1 as i64) else {
        return Err(Error::InsideMetal {
            x: op.lattice.position(source.0, source.1).0 * op.spacing,
            y: op.lattice.position(source.0, source.1).1 * op.spacing,
        });
    };
    let mut b = vec![C64::new(0.0, 0.0); op.unknowns()];
    b[s] = C64::new(op.source_strength(), 0.0);
    let x = fac.solve(&b)?;
    let ax = op.apply(&x);
    let num: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let residual = num / op.source_strength();
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::SolverBreakdown {
            omega: op.omega,
            detail: format!("point-source residual {residual:.3e} exceeds {RESIDUAL_TOL:e}"),
            condition: f64::NAN,
        });
    }
    Ok(GreensField {
        pol: op.lattice.pol,
        source,
        values: x,
        residual,
        lattice: op.lattice.clone(),
        spacing: op.spacing,
    })
}

/// Read access to G(a, b) between lattice sites given as (column, row).
pub trait GreenAccess {
    fn g(&self, a: (i64, i64), b: (i64, i64)) -> C64;
}
