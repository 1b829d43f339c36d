//! Independent references for the engine.
//!
//! Nothing here calls the engine's solver or stencil code. The 1D force has
//! two analytic routes (imaginary-frequency integral and regularized mode
//! sum); the dense Green's function enumerates its own lattice and inverts
//! with nalgebra. The frozen constants below were computed separately, in
//! extended precision, before the engine existed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::contour::{contour_of_material, Contour, EquivalentMaterial, Permittivity};
use crate::error::{Error, Result};
use crate::experiment::{fluid_eps, FluidModel};
use crate::geometry::{build_parallel_plates_1d, Boundary, Grid, MaterialMap};
use crate::greens::{assemble_operator, solve_point_source, BlockFactorization, FrequencyPoint, Polarization};
use crate::quadrature::{integrate_geometry_force, QuadratureSpec};
use crate::stress::{surface_correlations, StressOptions};
use crate::C64;

/// √(1+i), 20 digits.
pub const SQRT_ONE_PLUS_I: (f64, f64) = (1.098_684_113_467_809_966_04, 0.455_089_860_562_227_341_30);
/// √(80 + 89.93i).
pub const SQRT_SALINE_1GHZ: (f64, f64) = (10.009_086_774_5, 4.492_417_841_2);
/// |dω/dξ| of the σ = 100 conductive contour at ξ = 10⁻⁴.
pub const JACOBIAN_SIGMA100_XI1EM4: f64 = 500.000_000_000_875;
/// Saline (ε_s = 80, σ = 5 S/m) at 1 GHz: 5/(ε₀·2π·10⁹).
pub const SALINE_1GHZ: (f64, f64) = (80.0, 89.8755);
/// π/24.
pub const PI_OVER_24: f64 = 0.130_899_693_899_574_72;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub engine: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub method: String,
    pub pass: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

impl OracleReport {
    pub fn new(quantity: &str, oracle: f64, engine: f64, tolerance: f64, method: &str) -> Self {
        let rel_error = relative_error(oracle, engine);
        Self {
            quantity: quantity.into(),
            oracle,
            engine,
            rel_error,
            tolerance,
            method: method.into(),
            pass: rel_error <= tolerance,
        }
    }

    /// For quantities whose oracle value is zero, compare an absolute error.
    pub fn absolute(quantity: &str, error: f64, tolerance: f64, method: &str) -> Self {
        Self {
            quantity: quantity.into(),
            oracle: 0.0,
            engine: error,
            rel_error: error,
            tolerance,
            method: method.into(),
            pass: error <= tolerance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lifshitz1D {
    pub separation: f64,
    /// −∫₀^∞ ξ/(π(e^{2ξd} − 1)) dξ
    pub integral: f64,
    /// −∂E/∂d of the cutoff-regularized zero-point energy, λ → 0
    pub mode_sum: f64,
}

impl Lifshitz1D {
    pub fn force(&self) -> f64 {
        self.integral
    }
}

fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Force on the right mirror of a 1D perfect-mirror cavity (one scalar
/// polarization), ℏ = c = 1: −π/(24d²).
pub fn lifshitz_1d_force(d: f64) -> Result<Lifshitz1D> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("separation must be positive, got {d}")));
    }
    // ξ/(e^{2ξd} − 1) → 1/(2d) at ξ = 0; written with expm1 to stay accurate there
    let f = |xi: f64| {
        if xi == 0.0 {
            1.0 / (2.0 * d)
        } else {
            xi / (2.0 * xi * d).exp_m1()
        }
    };
    let top = 40.0 / d;
    let integral = -composite_simpson(f, 0.0, top, 40_000) / PI;

    // modes k_n = nπ/d with cutoff e^{−λk}: E = (π/2d)·S(a), S = e^{−a}/(1 − e^{−a})²,
    // a = λπ/d, minus the bulk term d/(2πλ²)
    let force_at = |lam: f64| {
        let a = lam * PI / d;
        let q = (-a).exp();
        let s = q / (1.0 - q).powi(2);
        let ds = -s * (1.0 + q) / (1.0 - q);
        let de_dd = -PI / (2.0 * d * d) * s + PI / (2.0 * d) * ds * (-lam * PI / (d * d));
        let bulk = 1.0 / (2.0 * PI * lam * lam);
        -(de_dd - bulk)
    };
    // two Richardson steps in λ² remove the λ² and λ⁴ terms
    let l = 0.02 * d;
    let (f1, f2, f3) = (force_at(l), force_at(l / 2.0), force_at(l / 4.0));
    let r1 = (4.0 * f2 - f1) / 3.0;
    let r2 = (4.0 * f3 - f2) / 3.0;
    let mode_sum = (16.0 * r2 - r1) / 15.0;
    Ok(Lifshitz1D {
        separation: d,
        integral,
        mode_sum,
    })
}

/// Analytic vacuum-subtracted correlations in the 1D gap at ω = iξ, for the
/// field pinned to zero at x = 0 and x = d: (G − G_free, ∂x∂x′(G − G_free)).
pub fn cavity_1d_subtracted(d: f64, xi: f64, x: f64) -> (f64, f64) {
    let s = (xi * d).sinh();
    let c2 = (xi * (2.0 * x - d)).cosh();
    let coth = 1.0 / (xi * d).tanh();
    let g = ((xi * d).cosh() - c2) / (2.0 * xi * s) - 1.0 / (2.0 * xi);
    let dxx = -0.5 * xi * (coth - 1.0) - xi * c2 / (2.0 * s);
    (g, dxx)
}

/// Dense Green's function on a small closed box.
#[derive(Clone, Debug)]
pub struct DenseGreens {
    /// (column, row) of every unknown, in matrix order.
    pub sites: Vec<(usize, usize)>,
    /// A, the discretized operator.
    pub operator: DMatrix<C64>,
    /// G = A⁻¹ / (cell measure): the response to a unit δ-source.
    pub greens: DMatrix<C64>,
}

impl DenseGreens {
    pub fn index(&self, site: (usize, usize)) -> Option<usize> {
        self.sites.iter().position(|&s| s == site)
    }

    pub fn at(&self, a: (usize, usize), b: (usize, usize)) -> Option<C64> {
        Some(self.greens[(self.index(a)?, self.index(b)?)])
    }
}

/// Dense inversion on a closed perfect-metal box of at most 12×12 cells.
///
/// Own enumeration: out-of-plane E lives on cell corners and vanishes on any
/// corner touching metal or the box; out-of-plane H lives on cell centres with
/// zero normal derivative at metal. 1D grids carry corners only.
pub fn dense_greens(grid: &Grid, mat: &MaterialMap, pol: Polarization, k2: C64) -> Result<DenseGreens> {
    if grid.boundary != Boundary::MetalBox {
        return Err(Error::InvalidInput("the dense oracle models closed boxes only".into()));
    }
    if grid.nx > 12 || grid.ny > 12 {
        return Err(Error::InvalidInput(format!("dense oracle is for grids up to 12x12, got {}x{}", grid.nx, grid.ny)));
    }
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let one_d = grid.dimension == 1;
    let h = 1.0 / grid.resolution as f64;
    let metal_cell = |i: i64, j: i64| i >= 0 && j >= 0 && i < nx && j < ny && mat.is_metal(i as usize, j as usize);
    let inside_cell = |i: i64, j: i64| i >= 0 && j >= 0 && i < nx && j < ny;

    let mut sites = Vec::new();
    match (pol, one_d) {
        (Polarization::Te, true) => {
            return Err(Error::InvalidInput("1D line has no out-of-plane H problem".into()));
        }
        (Polarization::Tm, true) => {
            for i in 1..nx {
                if !metal_cell(i - 1, 0) && !metal_cell(i, 0) {
                    sites.push((i as usize, 0));
                }
            }
        }
        (Polarization::Tm, false) => {
            for i in 1..nx {
                for j in 1..ny {
                    let touches = metal_cell(i - 1, j - 1) || metal_cell(i, j - 1) || metal_cell(i - 1, j) || metal_cell(i, j);
                    if !touches {
                        sites.push((i as usize, j as usize));
                    }
                }
            }
        }
        (Polarization::Te, false) => {
            for i in 0..nx {
                for j in 0..ny {
                    if !metal_cell(i, j) {
                        sites.push((i as usize, j as usize));
                    }
                }
            }
        }
    }
    let n = sites.len();
    if n == 0 {
        return Err(Error::InvalidGeometry("no unknowns".into()));
    }
    let find = |s: (i64, i64)| -> Option<usize> {
        if s.0 < 0 || s.1 < 0 {
            return None;
        }
        sites.iter().position(|&t| t == (s.0 as usize, s.1 as usize))
    };
    let inv_h2 = 1.0 / (h * h);
    let mut a = DMatrix::<C64>::zeros(n, n);
    for (r, &(i, j)) in sites.iter().enumerate() {
        let (i, j) = (i as i64, j as i64);
        let nbrs: Vec<(i64, i64)> = if one_d {
            vec![(i - 1, j), (i + 1, j)]
        } else {
            vec![(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
        };
        let mut diag = -k2;
        for nb in nbrs {
            match pol {
                Polarization::Tm => {
                    // pinned neighbours still contribute to the second difference
                    diag += inv_h2;
                    if let Some(c) = find(nb) {
                        a[(r, c)] -= inv_h2;
                    }
                }
                Polarization::Te => {
                    if inside_cell(nb.0, nb.1) && !metal_cell(nb.0, nb.1) {
                        diag += inv_h2;
                        a[(r, find(nb).expect("active cell"))] -= inv_h2;
                    }
                }
            }
        }
        a[(r, r)] += diag;
    }
    let measure = if one_d { h } else { h * h };
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SolverBreakdown {
            omega: k2.sqrt(),
            detail: "dense operator is singular".into(),
            condition: f64::INFINITY,
        })?;
    Ok(DenseGreens {
        sites,
        operator: a,
        greens: inv / C64::new(measure, 0.0),
    })
}

/// Smallest eigenvalue of the (real symmetric) 1D operator at ω = iξ.
pub fn min_eigenvalue_1d_wick(cells: usize, resolution: usize, xi: f64) -> Result<f64> {
    let grid = Grid::new(1, cells, 1, resolution, Boundary::MetalBox)?;
    let mat = MaterialMap::vacuum(cells, 1);
    let dg = dense_greens(&grid, &mat, Polarization::Tm, C64::new(-xi * xi, 0.0))?;
    if dg.operator.iter().any(|v| v.im != 0.0) {
        return Err(Error::InvalidInput("Wick operator should be real".into()));
    }
    let re = DMatrix::<f64>::from_fn(dg.operator.nrows(), dg.operator.ncols(), |i, j| dg.operator[(i, j)].re);
    let eig = nalgebra::SymmetricEigen::new(re);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Largest relative deviation between the engine's point-source solves and
/// the dense oracle over all sources and probes of a small box.
pub fn engine_vs_dense(grid: &Grid, mat: &MaterialMap, pol: Polarization, omega: C64) -> Result<f64> {
    let fp = FrequencyPoint::at_omega(omega);
    let dense = dense_greens(grid, mat, pol, fp.k2)?;
    let op = assemble_operator(grid, mat, pol, &fp)?;
    let fac = BlockFactorization::new(&op, None)?;
    let scale = dense.greens.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for &src in &dense.sites {
        let field = solve_point_source(&op, &fac, src)?;
        for &probe in &dense.sites {
            let e = field.at(probe.0 as i64, probe.1 as i64);
            let o = dense.at(probe, src).expect("site");
            worst = worst.max((e - o).norm() / scale);
        }
    }
    Ok(worst)
}

/// max |G_ab − G_ba| / max |G| of the dense oracle.
pub fn dense_reciprocity(dg: &DenseGreens) -> f64 {
    let g = &dg.greens;
    let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..i {
            worst = worst.max((g[(i, j)] - g[(j, i)]).norm() / scale);
        }
    }
    worst
}

/// max |A G − I/measure| relative to 1/measure: residual of the oracle itself.
fn dense_self_residual(dg: &DenseGreens) -> f64 {
    let p = &dg.operator * &dg.greens;
    let unit = p[(0, 0)];
    let mut worst: f64 = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let want = if i == j { unit } else { C64::new(0.0, 0.0) };
            worst = worst.max((p[(i, j)] - want).norm());
        }
    }
    worst / unit.norm()
}

/// The full oracle suite: frozen constants against the engine, the two 1D
/// analytic routes against each other and against the engine's 1D pipeline,
/// and the dense inversion against the sparse solver.
pub fn run_oracle_suite() -> Result<Vec<OracleReport>> {
    let mut out = Vec::new();

    let c1 = Contour::conductive(1.0)?;
    let w = c1.omega(1.0)?;
    out.push(OracleReport::absolute(
        "omega(conductive sigma=1, xi=1) = sqrt(1+i)",
        (w - C64::new(SQRT_ONE_PLUS_I.0, SQRT_ONE_PLUS_I.1)).norm() / w.norm(),
        1e-12,
        "frozen 20-digit polar-form value",
    ));

    let c100 = Contour::conductive(100.0)?;
    let jac = c100.jacobian(1e-4)?.norm();
    out.push(OracleReport::new(
        "|jacobian(conductive sigma=100, xi=1e-4)|",
        JACOBIAN_SIGMA100_XI1EM4,
        jac,
        1e-10,
        "frozen extended-precision value",
    ));
    let h = 1e-8 * 1e-4;
    let fd = (c100.omega(1e-4 + h)? - c100.omega(1e-4 - h)?) / (2.0 * h);
    out.push(OracleReport::new(
        "|jacobian| vs central difference (sigma=100, xi=1e-4)",
        fd.norm(),
        jac,
        1e-6,
        "central difference of omega(xi)",
    ));
    out.push(OracleReport::new(
        "|jacobian| vs asymptote sqrt(sigma/xi)/2",
        0.5 * (100.0f64 / 1e-4).sqrt(),
        jac,
        1e-3,
        "small-xi asymptote",
    ));

    let saline = EquivalentMaterial::new(Permittivity::Constant(C64::new(80.0, 89.93)), "saline at 1 GHz");
    let r = contour_of_material(&saline, 1.0)?;
    out.push(OracleReport::absolute(
        "omega/xi for eps_c = 80 + 89.93i",
        (r - C64::new(SQRT_SALINE_1GHZ.0, SQRT_SALINE_1GHZ.1)).norm() / r.norm(),
        1e-10,
        "frozen extended-precision square root",
    ));

    let e = fluid_eps(&FluidModel::saline(), 1e9)?.value;
    out.push(OracleReport::new(
        "Im fluid_eps(saline, 1 GHz)",
        SALINE_1GHZ.1,
        e.im,
        1e-3,
        "hand arithmetic 5/(eps0 2pi 1e9)",
    ));

    let l1 = lifshitz_1d_force(1.0)?;
    out.push(OracleReport::new(
        "1D force: mode sum vs imaginary-frequency integral",
        l1.mode_sum,
        l1.integral,
        1e-8,
        "cutoff-regularized mode sum, Richardson in lambda",
    ));
    out.push(OracleReport::new(
        "1D force: integral vs -pi/24",
        -PI_OVER_24,
        l1.integral,
        1e-10,
        "closed form",
    ));
    let l2 = lifshitz_1d_force(2.0)?;
    out.push(OracleReport::new("1D force: F(2d)/F(d) = 1/4", 0.25, l2.integral / l1.integral, 1e-10, "1/d^2 scaling"));

    let plates = build_parallel_plates_1d(1.0, 64)?;
    let spec = QuadratureSpec::default_for(&Contour::Wick);
    let f1d = integrate_geometry_force(&plates, &Contour::Wick, &spec, &StressOptions::default())?;
    out.push(OracleReport::new(
        "engine 1D pipeline (R=64, Wick) vs 1D force",
        l1.integral,
        f1d.force,
        1e-2,
        "analytic 1D integral",
    ));

    // ⟨H_yH_y⟩ in the gap, vacuum-subtracted, at ω = i
    let fp = FrequencyPoint::on_contour(&Contour::Wick, &Permittivity::vacuum(), 1.0)?;
    let opts = StressOptions {
        vacuum_subtraction: true,
        ..StressOptions::default()
    };
    let b = surface_correlations(&plates, &fp, &opts)?;
    let x = plates.surface.points[0].x - plates.grid.spacing();
    let (_, dxx) = cavity_1d_subtracted(1.0, 1.0, x);
    out.push(OracleReport::new(
        "1D <HyHy> (vacuum-subtracted, R=64, xi=1)",
        dxx / PI,
        b[0].hh[1][1].re,
        2e-2,
        "analytic cavity Green's function",
    ));

    for pol in [Polarization::Tm, Polarization::Te] {
        let grid = Grid::new(2, 5, 5, 8, Boundary::MetalBox)?;
        let mat = MaterialMap::vacuum(5, 5);
        let err = engine_vs_dense(&grid, &mat, pol, C64::new(0.0, 1.0))?;
        out.push(OracleReport::absolute(
            &format!("sparse vs dense G, 5x5 vacuum box, omega = i, {pol:?}"),
            err,
            1e-10,
            "nalgebra dense inverse, independent stencil",
        ));
        let dg = dense_greens(&grid, &mat, pol, C64::new(-1.0, 0.0))?;
        out.push(OracleReport::absolute(
            &format!("dense reciprocity, {pol:?}"),
            dense_reciprocity(&dg),
            1e-12,
            "G_ab = G_ba",
        ));
        out.push(OracleReport::absolute(
            &format!("dense oracle self-residual, {pol:?}"),
            dense_self_residual(&dg),
            1e-10,
            "A G = I / cell measure",
        ));
    }
    let lam = min_eigenvalue_1d_wick(12, 8, 0.5)?;
    out.push(OracleReport {
        quantity: "min eigenvalue of 1D Wick operator (> 0)".into(),
        oracle: 0.0,
        engine: lam,
        rel_error: 0.0,
        tolerance: 0.0,
        method: "symmetric eigensolver".into(),
        pass: lam > 0.0,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_routes_agree() {
        for d in [0.5, 1.0, 3.0] {
            let l = lifshitz_1d_force(d).unwrap();
            let exact = -PI / (24.0 * d * d);
            assert!(relative_error(l.integral, exact) < 1e-10, "{} {exact}", l.integral);
            assert!(relative_error(l.mode_sum, exact) < 1e-8, "{} {exact}", l.mode_sum);
        }
        assert!((PI_OVER_24 - PI / 24.0).abs() < 1e-16);
        assert!(lifshitz_1d_force(0.0).is_err());
    }

    #[test]
    fn cavity_stress_reproduces_the_integrand() {
        // −(1/2π)(∂x∂x′ − ξ²)G_sub is independent of x and equals ξ/(π(e^{2ξd}−1))
        let (d, xi) = (1.0, 0.8);
        for x in [0.2, 0.5, 0.9] {
            let (g, dxx) = cavity_1d_subtracted(d, xi, x);
            let t = -(dxx - xi * xi * g) / (2.0 * PI);
            let want = xi / (PI * ((2.0 * xi * d).exp() - 1.0));
            assert!((t - want).abs() < 1e-12, "{t} {want}");
        }
    }

    #[test]
    fn dense_oracle_rejects_large_or_open_grids() {
        let g = Grid::new(2, 13, 5, 8, Boundary::MetalBox).unwrap();
        assert!(dense_greens(&g, &MaterialMap::vacuum(13, 5), Polarization::Tm, C64::new(-1.0, 0.0)).is_err());
        let g = Grid::new(2, 5, 5, 8, Boundary::OpenChannel).unwrap();
        assert!(dense_greens(&g, &MaterialMap::vacuum(5, 5), Polarization::Tm, C64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn dense_oracle_with_metal_inclusion() {
        let g = Grid::new(2, 8, 7, 8, Boundary::MetalBox).unwrap();
        let mut mask = vec![false; 56];
        for (i, j) in [(3, 3), (4, 3), (3, 4)] {
            mask[i * 7 + j] = true;
        }
        let mat = MaterialMap::from_mask(8, 7, mask).unwrap();
        for pol in [Polarization::Tm, Polarization::Te] {
            let err = engine_vs_dense(&g, &mat, pol, C64::new(0.7, 0.9)).unwrap();
            assert!(err < 1e-10, "{pol:?}: {err}");
        }
    }

    #[test]
    fn wick_operator_is_positive_definite() {
        assert!(min_eigenvalue_1d_wick(12, 8, 1e-3).unwrap() > 0.0);
        assert!(min_eigenvalue_1d_wick(12, 8, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn suite_passes() {
        let reports = run_oracle_suite().unwrap();
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }
}
