//! Mean Maxwell stress tensor from the field correlations, and its closed
//! surface integral: the force integrand dF/dω at one contour point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::greens::{
    assemble_operator, field_correlations, scalar_correlations, BlockFactorization, CorrelationBundle,
    FreeLattice, FrequencyPoint, GreenAccess, PointStencils, Polarization, Subtracted,
};
use crate::C64;

/// How the 2D cross-section is lifted to a force per unit length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrusion {
    /// Fields strictly z-independent (k_z = 0): the 2D problem taken as is.
    #[default]
    Planar,
    /// z-invariant geometry with the k_z integral done in closed form, which
    /// for a scalar problem multiplies dF/dω by ω/(2i).
    ZInvariant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StressOptions {
    pub polarizations: Vec<Polarization>,
    pub extrusion: Extrusion,
    /// Subtract the free-lattice Green's function at coincidence.
    pub vacuum_subtraction: bool,
    /// Constant added to every diagonal correlation (closure test only).
    #[serde(skip)]
    pub diagonal_offset: C64,
}

impl Default for StressOptions {
    fn default() -> Self {
        Self {
            polarizations: vec![Polarization::Tm],
            extrusion: Extrusion::Planar,
            vacuum_subtraction: false,
            diagonal_offset: C64::new(0.0, 0.0),
        }
    }
}

impl StressOptions {
    pub fn both_polarizations() -> Self {
        Self {
            polarizations: vec![Polarization::Tm, Polarization::Te],
            ..Self::default()
        }
    }
}

/// T_ij = ⟨H_iH_j⟩ − ½δ_ij Σ⟨H_kH_k⟩ + ε(⟨E_iE_j⟩ − ½δ_ij Σ⟨E_kE_k⟩), μ = 1.
pub fn stress_at_point(b: &CorrelationBundle, eps: C64) -> [[C64; 3]; 3] {
    let tr_h: C64 = (0..3).map(|k| b.hh[k][k]).sum();
    let tr_e: C64 = (0..3).map(|k| b.ee[k][k]).sum();
    let mut t = [[C64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = b.hh[i][j] + eps * b.ee[i][j];
            if i == j {
                v -= 0.5 * (tr_h + eps * tr_e);
            }
            t[i][j] = v;
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointContribution {
    pub x: f64,
    pub y: f64,
    /// w Σ_j T_xj n_j
    pub fx: C64,
    pub fy: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StressSample {
    pub xi: f64,
    pub omega: C64,
    pub df_x: C64,
    pub df_y: C64,
    pub points: Vec<PointContribution>,
}

/// G = (source strength)·A⁻¹, i.e. the response to a unit δ-source.
struct Scaled<'a, A: ?Sized> {
    inner: &'a A,
    s: f64,
}

impl<A: GreenAccess + ?Sized> GreenAccess for Scaled<'_, A> {
    fn g(&self, a: (i64, i64), b: (i64, i64)) -> C64 {
        self.s * self.inner.g(a, b)
    }
}

fn contract(t: &[[C64; 3]; 3], nx: f64, ny: f64, w: f64) -> (C64, C64) {
    (w * (t[0][0] * nx + t[0][1] * ny), w * (t[1][0] * nx + t[1][1] * ny))
}

/// Correlation bundles (summed over polarizations) at every surface point.
pub fn surface_correlations(geometry: &Geometry, fp: &FrequencyPoint, opts: &StressOptions) -> Result<Vec<CorrelationBundle>> {
    let grid = &geometry.grid;
    let h = grid.spacing();
    let one_d = grid.dimension == 1;
    let pts = &geometry.surface.points;
    let mut bundles = vec![CorrelationBundle::default(); pts.len()];
    let free = if opts.vacuum_subtraction {
        Some(FreeLattice::new(fp.k2, h, one_d))
    } else {
        None
    };
    for &pol in &opts.polarizations {
        let op = assemble_operator(grid, &geometry.materials, pol, fp)?;
        let lattice = &op.lattice;
        let stencils: Vec<PointStencils> = pts.iter().map(|p| PointStencils::new(lattice, h, p.x, p.y)).collect();
        for p in pts {
            let (x, y) = (p.x / h - pol.site_offset(), p.y / h - pol.site_offset());
            let (c, r) = (x.round() as i64, if one_d { 0 } else { y.round() as i64 });
            if lattice.site(c, r).is_none() {
                return Err(Error::InsideMetal { x: p.x, y: p.y });
            }
        }
        let last = lattice.cols as i64 - 1;
        let (lo, hi) = stencils.iter().map(|s| s.column_span()).fold((i64::MAX, i64::MIN), |(a, b), (c, d)| (a.min(c), b.max(d)));
        let (cmin, cmax) = (lo.clamp(0, last) as usize, hi.clamp(0, last) as usize);
        let fac = BlockFactorization::new(&op, Some(cmax))?;
        let sel = fac.selected_inverse(cmin, cmax)?;
        let g = Scaled {
            inner: &sel,
            s: op.source_strength(),
        };
        for (st, bundle) in stencils.iter().zip(bundles.iter_mut()) {
            let sc = match &free {
                Some(f) => scalar_correlations(st, &Subtracted { inner: &g, free: f }),
                None => scalar_correlations(st, &g),
            };
            bundle.add(&field_correlations(&sc, pol, fp));
        }
    }
    Ok(bundles)
}

/// dF/dω = ∮ Σ_j T_ij n_j dS at one contour point.
///
/// In 1D the single gap point is paired with the exterior face of the mirror,
/// where the field is that of the free half-line (free lattice); the result is
/// the force on the right-hand mirror.
pub fn force_integrand(geometry: &Geometry, fp: &FrequencyPoint, opts: &StressOptions) -> Result<StressSample> {
    if opts.polarizations.is_empty() {
        return Err(Error::InvalidInput("no polarization selected".into()));
    }
    let bundles = surface_correlations(geometry, fp, opts)?;
    let weight = match opts.extrusion {
        Extrusion::Planar => C64::new(1.0, 0.0),
        Extrusion::ZInvariant => fp.omega / C64::new(0.0, 2.0),
    };
    let mut points = Vec::with_capacity(bundles.len() + 1);
    for (p, mut b) in geometry.surface.points.iter().zip(bundles) {
        b.offset_diagonal(opts.diagonal_offset);
        let t = stress_at_point(&b, fp.eps);
        let (fx, fy) = contract(&t, p.nx, p.ny, p.w);
        points.push(PointContribution {
            x: p.x,
            y: p.y,
            fx: weight * fx,
            fy: weight * fy,
        });
    }
    if geometry.grid.dimension == 1 {
        let h = geometry.grid.spacing();
        let free = FreeLattice::new(fp.k2, h, true);
        let op_lattice = crate::greens::SiteLattice::new(&geometry.grid, &geometry.materials, Polarization::Tm)?;
        let p = &geometry.surface.points[0];
        let st = PointStencils::new(&op_lattice, h, p.x, 0.0);
        let sc = if opts.vacuum_subtraction {
            Default::default()
        } else {
            scalar_correlations(&st, &free)
        };
        let mut b = field_correlations(&sc, Polarization::Tm, fp);
        b.offset_diagonal(opts.diagonal_offset);
        let t = stress_at_point(&b, fp.eps);
        let (fx, fy) = contract(&t, -p.nx, -p.ny, p.w);
        let (lx, _) = geometry.grid.extents();
        points.push(PointContribution {
            x: lx,
            y: 0.0,
            fx: weight * fx,
            fy: weight * fy,
        });
    }
    let mut df_x = C64::new(0.0, 0.0);
    let mut df_y = C64::new(0.0, 0.0);
    for c in &points {
        df_x += c.fx;
        df_y += c.fy;
    }
    Ok(StressSample {
        xi: fp.xi,
        omega: fp.omega,
        df_x,
        df_y,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{Contour, Permittivity};
    use crate::geometry::{build_parallel_plates_1d, build_piston, single_block, Enclosed, PistonGeometry};
    use crate::greens::solve_point_source;
    use std::collections::HashMap;

    fn point(xi: f64, sigma: f64) -> FrequencyPoint {
        FrequencyPoint::on_contour(&Contour::conductive(sigma).unwrap(), &Permittivity::vacuum(), xi).unwrap()
    }

    #[test]
    fn isotropic_and_zero_correlations() {
        let (a, b, eps) = (C64::new(0.3, -0.2), C64::new(1.1, 0.4), C64::new(2.0, 0.5));
        let mut c = CorrelationBundle::default();
        for i in 0..3 {
            c.ee[i][i] = a;
            c.hh[i][i] = b;
        }
        let t = stress_at_point(&c, eps);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -0.5 * (b + eps * a) } else { C64::new(0.0, 0.0) };
                assert!((t[i][j] - want).norm() < 1e-15);
            }
        }
        let z = stress_at_point(&CorrelationBundle::default(), eps);
        assert!(z.iter().flatten().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn one_dimensional_integrand_matches_closed_form() {
        // continuum: dF/dω along ω = iξ is i·ξ/(π(e^{2ξd} − 1)) → F = Im ∫ i(...)
        let g = build_parallel_plates_1d(1.0, 64).unwrap();
        for xi in [0.3, 1.0, 2.5] {
            let fp = FrequencyPoint::on_contour(&Contour::Wick, &Permittivity::vacuum(), xi).unwrap();
            let s = force_integrand(&g, &fp, &StressOptions::default()).unwrap();
            // dω/dξ = i, and Im(i · dF/dω) = Re dF/dω
            let exact = -xi / (std::f64::consts::PI * ((2.0 * xi).exp() - 1.0));
            assert!((s.df_x.re - exact).abs() < 0.02 * exact.abs(), "xi={xi}: {} vs {exact}", s.df_x);
        }
    }

    #[test]
    fn one_dimensional_integrand_is_position_independent() {
        let mut g = build_parallel_plates_1d(1.0, 32).unwrap();
        let fp = FrequencyPoint::on_contour(&Contour::Wick, &Permittivity::vacuum(), 1.0).unwrap();
        let mut vals = Vec::new();
        // lattice sites at 10, 16 and 24 cells into the gap
        for cells in [10.0, 16.0, 24.0] {
            g.surface.points[0].x = (1.0 + cells) / 32.0;
            vals.push(force_integrand(&g, &fp, &StressOptions::default()).unwrap().df_x);
        }
        for v in &vals[1..] {
            assert!((v - vals[0]).norm() < 5e-3 * vals[0].norm(), "{vals:?}");
        }
    }

    #[test]
    fn reassembly_is_bit_exact() {
        let g = build_piston(&PistonGeometry::default(), 16).unwrap();
        let s = force_integrand(&g, &point(0.7, 100.0), &StressOptions::both_polarizations()).unwrap();
        let mut acc = C64::new(0.0, 0.0);
        for p in &s.points {
            acc += p.fx;
        }
        assert_eq!(acc, s.df_x);
    }

    #[test]
    fn diagonal_offset_cancels_on_closed_surface() {
        let g = build_piston(&PistonGeometry::default(), 16).unwrap();
        let fp = point(0.5, 10.0);
        let base = force_integrand(&g, &fp, &StressOptions::both_polarizations()).unwrap();
        let mut o = StressOptions::both_polarizations();
        o.diagonal_offset = C64::new(3.7, -1.2);
        let off = force_integrand(&g, &fp, &o).unwrap();
        assert!((off.df_x - base.df_x).norm() < 1e-10 * base.df_x.norm().max(1e-3));
    }

    #[test]
    fn centred_block_has_no_net_force() {
        let g = single_block(&PistonGeometry::default(), 16).unwrap();
        let pist = build_piston(&PistonGeometry::default(), 16).unwrap();
        let fp = point(0.5, 100.0);
        let o = StressOptions::both_polarizations();
        let scale = force_integrand(&pist, &fp, &o).unwrap().df_x.norm();
        let s = force_integrand(&g, &fp, &o).unwrap();
        assert!(s.df_x.norm() < 1e-6 * scale, "{} vs {scale}", s.df_x);
    }

    #[test]
    fn opposite_block_feels_opposite_force() {
        let fp = point(0.8, 100.0);
        let mut p = PistonGeometry::default();
        let left = force_integrand(&build_piston(&p, 16).unwrap(), &fp, &StressOptions::default()).unwrap();
        p.enclosed = Enclosed::Right;
        let right = force_integrand(&build_piston(&p, 16).unwrap(), &fp, &StressOptions::default()).unwrap();
        assert!((left.df_x + right.df_x).norm() < 1e-6 * left.df_x.norm(), "{} {}", left.df_x, right.df_x);
    }

    #[test]
    fn vacuum_subtraction_changes_little() {
        let g = build_piston(&PistonGeometry::default(), 16).unwrap();
        let fp = point(1.0, 100.0);
        let a = force_integrand(&g, &fp, &StressOptions::default()).unwrap();
        let mut o = StressOptions::default();
        o.vacuum_subtraction = true;
        let b = force_integrand(&g, &fp, &o).unwrap();
        assert!((a.df_x - b.df_x).norm() < 5e-3 * a.df_x.norm(), "{} {}", a.df_x, b.df_x);
    }

    #[test]
    fn equivalent_medium_gives_identical_integrand() {
        let g = build_piston(&PistonGeometry::default(), 12).unwrap();
        let c = Contour::conductive(10.0).unwrap();
        let xi = 0.6;
        let a = FrequencyPoint::on_contour(&c, &Permittivity::vacuum(), xi).unwrap();
        let b = FrequencyPoint::equivalent_medium(xi, C64::new(1.0, 10.0 / xi));
        let o = StressOptions::both_polarizations();
        let fa = force_integrand(&g, &a, &o).unwrap().df_x;
        let fb = force_integrand(&g, &b, &o).unwrap().df_x;
        assert!((fa - fb).norm() < 1e-12 * fa.norm());
    }

    /// Same correlations from full point solves instead of the selected inverse.
    struct Columns(HashMap<(i64, i64), crate::greens::GreensField>);

    impl GreenAccess for Columns {
        fn g(&self, a: (i64, i64), b: (i64, i64)) -> C64 {
            self.0.get(&b).map(|f| f.at(a.0, a.1)).unwrap_or_default()
        }
    }

    #[test]
    fn selected_inverse_and_point_solves_agree() {
        let g = build_piston(&PistonGeometry::default(), 8).unwrap();
        let fp = point(0.9, 100.0);
        let h = g.grid.spacing();
        for pol in [Polarization::Tm, Polarization::Te] {
            let op = assemble_operator(&g.grid, &g.materials, pol, &fp).unwrap();
            let fac = BlockFactorization::new(&op, None).unwrap();
            let sel = fac.selected_inverse(0, op.lattice.cols - 1).unwrap();
            let scaled = Scaled {
                inner: &sel,
                s: op.source_strength(),
            };
            for p in g.surface.points.iter().step_by(5) {
                let st = PointStencils::new(&op.lattice, h, p.x, p.y);
                let (c0, c1) = st.column_span();
                let y0 = p.y / h;
                let mut cols = HashMap::new();
                for c in c0..=c1 {
                    for r in (y0 as i64 - 2)..=(y0 as i64 + 2) {
                        if op.lattice.site(c, r).is_some() {
                            cols.insert((c, r), solve_point_source(&op, &fac, (c as usize, r as usize)).unwrap());
                        }
                    }
                }
                let a = scalar_correlations(&st, &scaled);
                let b = scalar_correlations(&st, &Columns(cols));
                for (u, v) in [(a.g, b.g), (a.dxx, b.dxx), (a.dyy, b.dyy), (a.dxy, b.dxy)] {
                    assert!((u - v).norm() <= 1e-9 * u.norm().max(1e-6), "{pol:?}: {u} vs {v}");
                }
            }
        }
    }
}
