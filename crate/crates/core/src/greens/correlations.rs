//! Field correlations at a surface point from scalar Green's functions.
//!
//! Each scalar quantity has a natural position on the lattice: the field at
//! the sites, ∂x halfway between sites along x, ∂y halfway along y. A quantity
//! requested elsewhere is linearly interpolated between its natural positions;
//! self-correlations are taken at coincident natural positions (the lattice is
//! the regulator), cross-correlations over all interpolation pairs.

use serde::Serialize;

use super::{FrequencyPoint, GreenAccess, Polarization, SiteLattice};
use crate::C64;

type Stencil = Vec<((i64, i64), f64)>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ScalarCorrelations {
    /// ⟨u u′⟩
    pub g: C64,
    /// ⟨∂x u ∂x′ u′⟩
    pub dxx: C64,
    /// ⟨∂y u ∂y′ u′⟩
    pub dyy: C64,
    /// ⟨∂x u ∂y′ u′⟩
    pub dxy: C64,
}

#[derive(Clone, Debug)]
pub struct PointStencils {
    u: Vec<(f64, Stencil)>,
    dx: Vec<(f64, Stencil)>,
    dy: Vec<(f64, Stencil)>,
}

fn interpolate(t: f64, offset: f64) -> Vec<(i64, f64)> {
    let s = t - offset;
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        vec![(r as i64, 1.0)]
    } else {
        let f = s.floor();
        let w = s - f;
        vec![(f as i64, 1.0 - w), (f as i64 + 1, w)]
    }
}

impl PointStencils {
    /// Stencils for a point at physical (x, y), in units of d.
    pub fn new(lattice: &SiteLattice, h: f64, x: f64, y: f64) -> Self {
        let o = lattice.pol.site_offset();
        let (u, v) = (x / h, y / h);
        let inv_h = 1.0 / h;
        let build = |ox: f64, oy: f64, expand: &dyn Fn(i64, i64) -> Stencil| -> Vec<(f64, Stencil)> {
            let ys = if lattice.one_dimensional { vec![(0, 1.0)] } else { interpolate(v, oy) };
            let mut out = Vec::new();
            for (a, wa) in interpolate(u, ox) {
                for &(b, wb) in &ys {
                    out.push((wa * wb, expand(a, b)));
                }
            }
            out
        };
        let u_st = build(o, o, &|a, b| vec![((a, b), 1.0)]);
        let dx_st = build(o + 0.5, o, &|a, b| vec![((a + 1, b), inv_h), ((a, b), -inv_h)]);
        let dy_st = if lattice.one_dimensional {
            Vec::new()
        } else {
            build(o, o + 0.5, &|a, b| vec![((a, b + 1), inv_h), ((a, b), -inv_h)])
        };
        Self {
            u: u_st,
            dx: dx_st,
            dy: dy_st,
        }
    }

    /// Smallest and largest lattice column referenced.
    pub fn column_span(&self) -> (i64, i64) {
        let cols = self
            .u
            .iter()
            .chain(&self.dx)
            .chain(&self.dy)
            .flat_map(|(_, s)| s.iter().map(|((c, _), _)| *c));
        cols.fold((i64::MAX, i64::MIN), |(lo, hi), c| (lo.min(c), hi.max(c)))
    }
}

fn bilinear<A: GreenAccess + ?Sized>(g: &A, s: &Stencil, t: &Stencil) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for &(a, ca) in s {
        for &(b, cb) in t {
            acc += ca * cb * g.g(a, b);
        }
    }
    acc
}

fn coincident<A: GreenAccess + ?Sized>(g: &A, list: &[(f64, Stencil)]) -> C64 {
    list.iter().map(|(w, s)| *w * bilinear(g, s, s)).sum()
}

pub fn scalar_correlations<A: GreenAccess + ?Sized>(st: &PointStencils, g: &A) -> ScalarCorrelations {
    let mut dxy = C64::new(0.0, 0.0);
    for (wa, sa) in &st.dx {
        for (wb, sb) in &st.dy {
            dxy += wa * wb * bilinear(g, sa, sb);
        }
    }
    ScalarCorrelations {
        g: coincident(g, &st.u),
        dxx: coincident(g, &st.dx),
        dyy: coincident(g, &st.dy),
        dxy,
    }
}

/// ⟨E_iE_j⟩ and ⟨H_iH_j⟩ (ħ = 1), indices x, y, z.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct CorrelationBundle {
    pub ee: [[C64; 3]; 3],
    pub hh: [[C64; 3]; 3],
}

impl CorrelationBundle {
    pub fn add(&mut self, other: &CorrelationBundle) {
        for i in 0..3 {
            for j in 0..3 {
                self.ee[i][j] += other.ee[i][j];
                self.hh[i][j] += other.hh[i][j];
            }
        }
    }

    /// Adds a constant to every diagonal correlation.
    pub fn offset_diagonal(&mut self, c0: C64) {
        for i in 0..3 {
            self.ee[i][i] += c0;
            self.hh[i][i] += c0;
        }
    }
}

/// Fluctuation–dissipation correlations from the scalar Green's function:
/// ⟨EE⟩ = ω²G/π and ⟨HH⟩ = (∇×)(∇′×)G/π, with the scalar field being E_z
/// (out-of-plane E) or H_z (out-of-plane H, where the in-plane E carries 1/ε).
pub fn field_correlations(sc: &ScalarCorrelations, pol: Polarization, fp: &FrequencyPoint) -> CorrelationBundle {
    let pi = std::f64::consts::PI;
    let mut b = CorrelationBundle::default();
    match pol {
        Polarization::Tm => {
            b.ee[2][2] = fp.omega * fp.omega * sc.g / pi;
            b.hh[0][0] = sc.dyy / pi;
            b.hh[1][1] = sc.dxx / pi;
            b.hh[0][1] = -sc.dxy / pi;
            b.hh[1][0] = -sc.dxy / pi;
        }
        Polarization::Te => {
            let s = 1.0 / (pi * fp.eps);
            b.hh[2][2] = fp.k2 * sc.g / pi;
            b.ee[0][0] = sc.dyy * s;
            b.ee[1][1] = sc.dxx * s;
            b.ee[0][1] = -sc.dxy * s;
            b.ee[1][0] = -sc.dxy * s;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_weights() {
        assert_eq!(interpolate(3.0, 0.0), vec![(3, 1.0)]);
        assert_eq!(interpolate(3.5, 0.0), vec![(3, 0.5), (4, 0.5)]);
        assert_eq!(interpolate(3.5, 0.5), vec![(3, 1.0)]);
        assert_eq!(interpolate(3.25, 0.0), vec![(3, 0.75), (4, 0.25)]);
    }

    #[test]
    fn bundle_is_index_symmetric() {
        let sc = ScalarCorrelations {
            g: C64::new(0.3, 0.1),
            dxx: C64::new(2.0, -1.0),
            dyy: C64::new(1.0, 0.5),
            dxy: C64::new(-0.7, 0.2),
        };
        let fp = FrequencyPoint::at_omega(C64::new(0.5, 1.0));
        for pol in [Polarization::Tm, Polarization::Te] {
            let b = field_correlations(&sc, pol, &fp);
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(b.ee[i][j], b.ee[j][i]);
                    assert_eq!(b.hh[i][j], b.hh[j][i]);
                }
            }
        }
    }
}
