//! Forward model of the tabletop measurement: a conducting fluid realizes a
//! complex-frequency contour at real (microwave) frequencies, and antennas
//! on the stress surface read the Green's function as S-parameters,
//! G_ij = (α/iξ) S^E_ij.
//!
//! SI quantities appear only here. Frequencies cross the boundary in Hz and
//! are converted to angular code frequency ξ = 2πf·d/c exactly once.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::contour::{Contour, EquivalentMaterial, Permittivity};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::greens::FrequencyPoint;
use crate::quadrature::{xi_fraction, ForceResult};
use crate::stress::{surface_correlations, StressOptions};
use crate::C64;

pub const EPSILON_0: f64 = 8.8541878128e-12;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const HBAR: f64 = 1.054571817e-34;

pub const PERFECT_METAL_NOTE: &str =
    "metals are modeled as perfect conductors, which holds at microwave and longer wavelengths";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidModel {
    pub eps_s: f64,
    /// S/m
    pub sigma_si: f64,
    /// Hz; above this the simple conductor model ignores salt dispersion.
    #[serde(default = "default_ceiling")]
    pub ceiling_hz: f64,
}

fn default_ceiling() -> f64 {
    10e9
}

impl FluidModel {
    pub fn saline() -> Self {
        Self {
            eps_s: 80.0,
            sigma_si: 5.0,
            ceiling_hz: default_ceiling(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_s >= 1.0) || !(self.sigma_si > 0.0) || !(self.ceiling_hz > 0.0) {
            return Err(Error::InvalidInput(format!(
                "fluid needs eps_s >= 1, sigma > 0 and a positive ceiling, got {self:?}"
            )));
        }
        Ok(())
    }

    /// ε_c in code units for separation d_si: ε_s + iσ_code/ξ.
    pub fn code_permittivity(&self, d_si: f64) -> Permittivity {
        Permittivity::Conductor {
            eps_s: self.eps_s,
            sigma: sigma_to_code(self.sigma_si, d_si),
        }
    }

    /// The contour ω = ξ√ε_c(ξ) that this fluid realizes.
    pub fn contour(&self, d_si: f64) -> Result<Contour> {
        self.validate()?;
        Ok(Contour::Material(EquivalentMaterial::new(
            self.code_permittivity(d_si),
            format!("fluid eps_s = {}, sigma = {} S/m at d = {} m", self.eps_s, self.sigma_si, d_si),
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluidEps {
    pub value: C64,
    pub above_ceiling: bool,
}

/// ε_c = ε_s + iσ/(ε₀·2πf).
pub fn fluid_eps(fluid: &FluidModel, f_hz: f64) -> Result<FluidEps> {
    if !(f_hz > 0.0) {
        return Err(Error::NonPositiveFrequency(f_hz));
    }
    let omega = 2.0 * std::f64::consts::PI * f_hz;
    Ok(FluidEps {
        value: C64::new(fluid.eps_s, fluid.sigma_si / (EPSILON_0 * omega)),
        above_ceiling: f_hz > fluid.ceiling_hz,
    })
}

/// σ_code = σ_SI·d/(ε₀c), so that σ_SI/(ε₀ω_SI) = σ_code/ξ.
pub fn sigma_to_code(sigma_si: f64, d_si: f64) -> f64 {
    sigma_si * d_si / (EPSILON_0 * SPEED_OF_LIGHT)
}

pub fn xi_to_hz(xi: f64, d_si: f64) -> f64 {
    xi * SPEED_OF_LIGHT / (2.0 * std::f64::consts::PI * d_si)
}

pub fn hz_to_xi(f_hz: f64, d_si: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz * d_si / SPEED_OF_LIGHT
}

fn check_alpha(alpha: C64) -> Result<()> {
    if alpha.norm() == 0.0 || !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidInput(format!("antenna factor alpha must be finite and nonzero, got {alpha}")));
    }
    Ok(())
}

fn check_grid(xi: &[f64], n: usize) -> Result<()> {
    if xi.len() != n {
        return Err(Error::InvalidInput(format!("{} frequencies for {n} values", xi.len())));
    }
    if let Some(&x) = xi.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::NonPositiveFrequency(x));
    }
    Ok(())
}

/// S^E(ξ) = (iξ/α)·G(ω(ξ)).
pub fn smatrix_from_greens(g: &[C64], xi: &[f64], alpha: C64) -> Result<Vec<C64>> {
    check_alpha(alpha)?;
    check_grid(xi, g.len())?;
    Ok(g.iter().zip(xi).map(|(g, &x)| C64::new(0.0, x) * g / alpha).collect())
}

/// G(ω(ξ)) = (α/iξ)·S^E(ξ).
pub fn greens_from_smatrix(s: &[C64], xi: &[f64], alpha: C64) -> Result<Vec<C64>> {
    check_alpha(alpha)?;
    check_grid(xi, s.len())?;
    Ok(s.iter().zip(xi).map(|(s, &x)| alpha * s / C64::new(0.0, x)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    X,
    Y,
    Z,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::X, Orientation::Y, Orientation::Z];

    fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::X => "x",
            Orientation::Y => "y",
            Orientation::Z => "z",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Antenna {
    pub x_m: f64,
    pub y_m: f64,
    pub normal: (f64, f64),
    /// Surface-quadrature weight, meters.
    pub weight_m: f64,
    pub alpha: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AntennaPlan {
    pub d_si: f64,
    pub antennas: Vec<Antenna>,
    pub orientations: Vec<Orientation>,
}

impl AntennaPlan {
    /// Antennas at the stress-surface quadrature points, scaled by d_si.
    pub fn from_surface(geometry: &Geometry, d_si: f64, alpha: C64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(d_si > 0.0) {
            return Err(Error::InvalidInput(format!("d_si must be positive, got {d_si}")));
        }
        let antennas = geometry
            .surface
            .points
            .iter()
            .map(|p| Antenna {
                x_m: p.x * d_si,
                y_m: p.y * d_si,
                normal: (p.nx, p.ny),
                weight_m: p.w * d_si,
                alpha,
            })
            .collect();
        Ok(Self {
            d_si,
            antennas,
            orientations: Orientation::ALL.to_vec(),
        })
    }

    /// Measurement channels: positions × orientations.
    pub fn count(&self) -> usize {
        self.antennas.len() * self.orientations.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SMatrixEntry {
    pub antenna_i: usize,
    pub antenna_j: usize,
    pub orient_i: Orientation,
    pub orient_j: Orientation,
    pub values: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SMatrixSpectrum {
    pub freqs_hz: Vec<f64>,
    pub entries: Vec<SMatrixEntry>,
}

impl SMatrixSpectrum {
    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.windows(2).any(|w| !(w[1] > w[0])) || self.freqs_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::InvalidInput("S-matrix frequency grid must be positive and strictly increasing".into()));
        }
        for e in &self.entries {
            if e.values.len() != self.freqs_hz.len() || e.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "S-matrix entry ({}, {}) has missing or non-finite values",
                    e.antenna_i, e.antenna_j
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["f_hz", "antenna_i", "antenna_j", "orient_i", "orient_j", "re_s", "im_s"])?;
        for e in &self.entries {
            for (f, v) in self.freqs_hz.iter().zip(&e.values) {
                w.write_record([
                    format!("{f:.9e}"),
                    e.antenna_i.to_string(),
                    e.antenna_j.to_string(),
                    e.orient_i.label().to_string(),
                    e.orient_j.label().to_string(),
                    format!("{:.12e}", v.re),
                    format!("{:.12e}", v.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Synthetic network-analyzer reading: the coincident electric Green's
/// function G_ij = π⟨E_iE_j⟩/ω² at each antenna, over the given ξ grid
/// (code units) of the fluid contour, converted to S^E.
pub fn synthetic_smatrix(
    geometry: &Geometry,
    contour: &Contour,
    plan: &AntennaPlan,
    xi_grid: &[f64],
    opts: &StressOptions,
) -> Result<SMatrixSpectrum> {
    if plan.antennas.len() != geometry.surface.points.len() {
        return Err(Error::InvalidInput("antenna plan does not match the geometry's surface".into()));
    }
    let mut g = vec![vec![vec![C64::new(0.0, 0.0); xi_grid.len()]; 9]; plan.antennas.len()];
    for (k, &xi) in xi_grid.iter().enumerate() {
        let fp = FrequencyPoint::on_contour(contour, &geometry.materials.ambient, xi)?;
        let bundles = surface_correlations(geometry, &fp, opts).map_err(|e| e.at_xi(xi))?;
        let scale = std::f64::consts::PI / (fp.omega * fp.omega);
        for (a, b) in bundles.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    g[a][3 * i + j][k] = scale * b.ee[i][j];
                }
            }
        }
    }
    let mut entries = Vec::new();
    for (a, ant) in plan.antennas.iter().enumerate() {
        for &oi in &plan.orientations {
            for &oj in &plan.orientations {
                let values = smatrix_from_greens(&g[a][3 * oi.index() + oj.index()], xi_grid, ant.alpha)?;
                entries.push(SMatrixEntry {
                    antenna_i: a,
                    antenna_j: a,
                    orient_i: oi,
                    orient_j: oj,
                    values,
                });
            }
        }
    }
    let spectrum = SMatrixSpectrum {
        freqs_hz: xi_grid.iter().map(|&x| xi_to_hz(x, plan.d_si)).collect(),
        entries,
    };
    spectrum.validate()?;
    Ok(spectrum)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandwidthReport {
    pub d_si: f64,
    pub fluid: FluidModel,
    pub sigma_code: f64,
    pub fraction: f64,
    /// ℏc/d³ per unit length
    pub force_code: f64,
    /// N/m
    pub force_per_length_si: f64,
    pub xi_fraction_code: f64,
    pub xi_fraction_hz: f64,
    pub xi_max_hz: f64,
    pub antenna_positions: usize,
    pub orientations: usize,
    pub antenna_count: usize,
    /// Quadrature nodes in Hz: where the spectrum has to be measured.
    pub frequency_grid_hz: Vec<f64>,
    pub above_ceiling: bool,
    pub notes: Vec<String>,
}

/// Turns a converged engine run on the fluid's contour into a measurement
/// requirement. `force` must have been computed on `fluid.contour(d_si)`.
pub fn bandwidth_report(
    force: &ForceResult,
    plan: &AntennaPlan,
    fluid: &FluidModel,
    fraction: f64,
) -> Result<BandwidthReport> {
    fluid.validate()?;
    let d_si = plan.d_si;
    let xi_f = xi_fraction(force, fraction)?;
    let xi_f_hz = xi_to_hz(xi_f, d_si);
    let grid: Vec<f64> = force.nodes.iter().map(|n| xi_to_hz(n.xi, d_si)).collect();
    let needed_top = grid.iter().copied().filter(|&f| f <= xi_f_hz).fold(xi_f_hz, f64::max);
    let above = needed_top > fluid.ceiling_hz;
    let mut notes = vec![PERFECT_METAL_NOTE.to_string()];
    if above {
        notes.push(format!(
            "required band reaches {:.3e} Hz, above the {:.3e} Hz validity ceiling of the fluid model; \
             additional salt dispersion is not modeled",
            needed_top, fluid.ceiling_hz
        ));
    }
    Ok(BandwidthReport {
        d_si,
        fluid: fluid.clone(),
        sigma_code: sigma_to_code(fluid.sigma_si, d_si),
        fraction,
        force_code: force.force,
        force_per_length_si: force.force * HBAR * SPEED_OF_LIGHT / d_si.powi(3),
        xi_fraction_code: xi_f,
        xi_fraction_hz: xi_f_hz,
        xi_max_hz: xi_to_hz(force.xi_max, d_si),
        antenna_positions: plan.antennas.len(),
        orientations: plan.orientations.len(),
        antenna_count: plan.count(),
        frequency_grid_hz: grid,
        above_ceiling: above,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{check_physicality, log_probes, TabulatedPermittivity};
    use crate::geometry::{build_piston, PistonGeometry};
    use crate::quadrature::{integrate_geometry_force, QuadratureSpec};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn saline_at_one_gigahertz() {
        let e = fluid_eps(&FluidModel::saline(), 1e9).unwrap();
        // 5 / (8.8541878128e-12 · 2π · 1e9) = 89.8755...
        assert!((e.value - C64::new(80.0, 89.8755)).norm() < 1e-3 * e.value.norm());
        assert!(!e.above_ceiling);
        assert!(fluid_eps(&FluidModel::saline(), 20e9).unwrap().above_ceiling);
        assert!(fluid_eps(&FluidModel::saline(), 0.0).is_err());
        let mut f = FluidModel::saline();
        f.sigma_si = 1e-30;
        assert!(fluid_eps(&f, 1e9).unwrap().value.im.abs() < 1e-15);
    }

    #[test]
    fn code_units_reproduce_si_permittivity() {
        let fluid = FluidModel::saline();
        let d = 0.3;
        assert!((sigma_to_code(5.0, d) - 565.0955).abs() < 1e-3);
        for f in [1e6, 3.3e8, 2e9] {
            let si = fluid_eps(&fluid, f).unwrap().value;
            let code = fluid.code_permittivity(d).at_xi(hz_to_xi(f, d)).unwrap();
            assert!((si - code).norm() < 1e-12 * si.norm());
            assert!((xi_to_hz(hz_to_xi(f, d), d) - f).abs() < 1e-6);
        }
    }

    #[test]
    fn s_equals_i_for_unit_inputs() {
        let s = smatrix_from_greens(&[C64::new(1.0, 0.0)], &[1.0], C64::new(1.0, 0.0)).unwrap();
        assert_eq!(s[0], C64::new(0.0, 1.0));
        assert!(smatrix_from_greens(&[C64::new(1.0, 0.0)], &[1.0], C64::new(0.0, 0.0)).is_err());
        assert!(greens_from_smatrix(&[C64::new(1.0, 0.0)], &[0.0], C64::new(1.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn s_and_g_round_trip(re in -1e3f64..1e3, im in -1e3f64..1e3, ar in 0.1f64..10.0, ai in -10.0f64..10.0, xi in 1e-3f64..1e3) {
            let g = [C64::new(re, im)];
            let alpha = C64::new(ar, ai);
            let s = smatrix_from_greens(&g, &[xi], alpha).unwrap();
            let back = greens_from_smatrix(&s, &[xi], alpha).unwrap();
            prop_assert!((back[0] - g[0]).norm() <= 1e-12 * g[0].norm().max(1e-300));
        }
    }

    #[test]
    fn tabulated_saline_is_physical() {
        let fluid = FluidModel::saline();
        let samples: Vec<(f64, C64)> = log_probes(1e5, 1e10, 60)
            .into_iter()
            .map(|f| (hz_to_xi(f, 0.3), fluid_eps(&fluid, f).unwrap().value))
            .collect();
        let tab = TabulatedPermittivity::new(&samples, true).unwrap();
        let m = EquivalentMaterial::new(Permittivity::Tabulated(Arc::new(tab)), "saline samples");
        let (lo, hi) = (samples[0].0, samples.last().unwrap().0);
        assert!(check_physicality(&m, &log_probes(lo, hi, 25)).unwrap().physical);
    }

    #[test]
    fn plan_scales_the_surface() {
        let g = build_piston(&PistonGeometry::default(), 8).unwrap();
        let plan = AntennaPlan::from_surface(&g, 0.3, C64::new(1.0, 0.0)).unwrap();
        assert_eq!(plan.count(), 3 * g.surface.points.len());
        for (a, p) in plan.antennas.iter().zip(&g.surface.points) {
            assert_eq!(a.x_m, p.x * 0.3);
            assert_eq!(a.y_m, p.y * 0.3);
        }
    }

    #[test]
    fn si_rescaling_commutes_with_code_units() {
        // (σ, d) and (2σ, d/2) map to the same code-unit contour
        let g = build_piston(&PistonGeometry::default(), 8).unwrap();
        let a = FluidModel::saline();
        let b = FluidModel {
            sigma_si: 2.0 * a.sigma_si,
            ..a.clone()
        };
        let ca = a.contour(0.3).unwrap();
        let cb = b.contour(0.15).unwrap();
        let opts = StressOptions::default();
        let xi = 0.05;
        let fa = crate::stress::force_integrand(&g, &FrequencyPoint::on_contour(&ca, &Permittivity::vacuum(), xi).unwrap(), &opts).unwrap();
        let fb = crate::stress::force_integrand(&g, &FrequencyPoint::on_contour(&cb, &Permittivity::vacuum(), xi).unwrap(), &opts).unwrap();
        assert!((fa.df_x - fb.df_x).norm() <= 1e-12 * fa.df_x.norm());
    }

    #[test]
    fn saline_bandwidth_at_thirty_centimeters() {
        let g = build_piston(&PistonGeometry::default(), 8).unwrap();
        let fluid = FluidModel::saline();
        let mut xi90 = Vec::new();
        for d in [0.3, 0.6] {
            let c = fluid.contour(d).unwrap();
            let spec = QuadratureSpec::default_for(&c);
            let r = integrate_geometry_force(&g, &c, &spec, &StressOptions::default()).unwrap();
            let plan = AntennaPlan::from_surface(&g, d, C64::new(1.0, 0.0)).unwrap();
            let rep = bandwidth_report(&r, &plan, &fluid, 0.9).unwrap();
            assert!(rep.xi_fraction_hz < 2e9, "{}", rep.xi_fraction_hz);
            assert!(rep.notes[0].contains("microwave"));
            xi90.push(rep.xi_fraction_hz);
        }
        assert!(xi90[1] < xi90[0], "{xi90:?}");
    }

    #[test]
    fn synthetic_spectrum_is_consistent() {
        let g = build_piston(&PistonGeometry::default(), 8).unwrap();
        let fluid = FluidModel::saline();
        let c = fluid.contour(0.3).unwrap();
        let plan = AntennaPlan::from_surface(&g, 0.3, C64::new(1.0, 0.0)).unwrap();
        let xi = [0.01, 0.05, 0.2];
        let opts = StressOptions::both_polarizations();
        let s = synthetic_smatrix(&g, &c, &plan, &xi, &opts).unwrap();
        assert_eq!(s.entries.len(), 9 * plan.antennas.len());
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("f_hz,antenna_i,antenna_j,orient_i,orient_j,re_s,im_s"));
        // in-plane/out-of-plane cross terms vanish for the split polarizations
        let xz = s.entries.iter().find(|e| e.orient_i == Orientation::X && e.orient_j == Orientation::Z).unwrap();
        assert!(xz.values.iter().all(|v| v.norm() == 0.0));
    }
}
