//! The JSON run configuration. Every section has defaults, so `{}` is a valid
//! config describing the reference piston on the σ = 100 contour.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cac_core::contour::{Contour, EquivalentMaterial, Permittivity, TabulatedPermittivity};
use cac_core::experiment::FluidModel;
use cac_core::geometry::{self, Boundary, Geometry, PistonGeometry};
use cac_core::quadrature::QuadratureSpec;
use cac_core::stress::StressOptions;
use cac_core::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default = "default_contours")]
    pub contours: Vec<ContourSpec>,
    #[serde(default)]
    pub quadrature: QuadratureOverrides,
    #[serde(default)]
    pub stress: StressOptions,
    /// One resolution gives a single run; two give a Richardson estimate.
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
    #[serde(default = "default_order")]
    pub richardson_order: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    /// Directory that relative paths inside the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Whether the file named its contours (rather than taking the default).
    #[serde(skip)]
    pub explicit_contours: bool,
}

fn default_contours() -> Vec<ContourSpec> {
    vec![ContourSpec::Conductive { sigma: 100.0 }]
}

fn default_resolutions() -> Vec<usize> {
    vec![32]
}

fn default_order() -> f64 {
    2.0
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySpec {
    Piston(PistonGeometry),
    SingleBlock(PistonGeometry),
    #[serde(rename = "parallel_plates_1d")]
    ParallelPlates1d {
        #[serde(default = "unit")]
        separation: f64,
    },
    Mask {
        path: PathBuf,
        #[serde(default = "open_channel")]
        boundary: Boundary,
        /// Stress surface [x0, x1, y0, y1] in units of d.
        rect: [f64; 4],
        #[serde(default = "one")]
        points_per_cell: usize,
    },
}

fn unit() -> f64 {
    1.0
}
fn one() -> usize {
    1
}
fn open_channel() -> Boundary {
    Boundary::OpenChannel
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec::Piston(PistonGeometry::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContourSpec {
    Wick,
    Rotation {
        phi: f64,
    },
    Conductive {
        sigma: f64,
    },
    /// The contour realized by a conducting fluid at separation `d_si` meters.
    Fluid {
        eps_s: f64,
        sigma_si: f64,
        d_si: f64,
    },
    /// ε_c(ξ) from a `xi, re, im` CSV.
    Tabulated {
        path: PathBuf,
        #[serde(default = "yes")]
        conjugate_extension: bool,
    },
    /// A constant equivalent medium; `re = 1, im = 0` is plain vacuum.
    Constant {
        re: f64,
        #[serde(default)]
        im: f64,
    },
}

fn yes() -> bool {
    true
}

impl ContourSpec {
    pub fn build(&self, base_dir: &Path) -> Result<Contour> {
        Ok(match self {
            ContourSpec::Wick => Contour::Wick,
            ContourSpec::Rotation { phi } => Contour::rotation(*phi)?,
            ContourSpec::Conductive { sigma } => Contour::conductive(*sigma)?,
            ContourSpec::Fluid { eps_s, sigma_si, d_si } => FluidModel {
                eps_s: *eps_s,
                sigma_si: *sigma_si,
                ceiling_hz: FluidModel::saline().ceiling_hz,
            }
            .contour(*d_si)?,
            ContourSpec::Tabulated {
                path,
                conjugate_extension,
            } => {
                let full = base_dir.join(path);
                let table = TabulatedPermittivity::from_csv(&full, *conjugate_extension)
                    .with_context(|| format!("loading permittivity table {}", full.display()))?;
                Contour::Material(EquivalentMaterial::new(
                    Permittivity::Tabulated(Arc::new(table)),
                    format!("table {}", path.display()),
                ))
            }
            ContourSpec::Constant { re, im } => Contour::Material(EquivalentMaterial::new(
                Permittivity::Constant(C64::new(*re, *im)),
                format!("constant eps_c = {re}{im:+}i"),
            )),
        })
    }
}

/// Any field left out keeps the contour-dependent default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub xi_max: Option<f64>,
    pub xi_switch: Option<f64>,
    pub u_panels: Option<usize>,
    pub u_nodes: Option<usize>,
    pub panel_ratio: Option<f64>,
    pub log_nodes: Option<usize>,
    pub max_panel_width: Option<f64>,
    pub tolerance: Option<f64>,
}

impl QuadratureOverrides {
    pub fn apply(&self, contour: &Contour) -> QuadratureSpec {
        let mut q = QuadratureSpec::default_for(contour);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { q.$f = v; } )* };
        }
        take!(xi_max, xi_switch, u_panels, u_nodes, panel_ratio, log_nodes, max_panel_width, tolerance);
        q
    }
}

/// A coarse rectangle of the complex ω plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSpec {
    pub resolution: usize,
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            resolution: 16,
            re_min: 0.0,
            re_max: 6.0,
            im_min: 0.0,
            im_max: 3.0,
            n_re: 25,
            n_im: 13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub fluid: FluidModel,
    pub d_si: f64,
    pub fraction: f64,
    /// Antenna coupling α as [re, im]; frequency independent.
    pub alpha: [f64; 2],
    pub spectrum_points: usize,
    pub resolution: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            fluid: FluidModel::saline(),
            d_si: 0.3,
            fraction: 0.9,
            alpha: [1.0, 0.0],
            spectrum_points: 32,
            resolution: 16,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text)?;
        cfg.explicit_contours = serde_json::from_str::<serde_json::Value>(text)?.get("contours").is_some();
        Ok(cfg)
    }

    /// Checks everything that can be checked without running a solve.
    pub fn validate(&self) -> Result<()> {
        if self.contours.is_empty() {
            bail!("config lists no contours");
        }
        match self.resolutions.as_slice() {
            [r] if *r > 0 => {}
            [a, b] if *a > 0 && b > a => {}
            other => bail!("resolutions must be [R] or [R1, R2] with R1 < R2, got {other:?}"),
        }
        if matches!(self.geometry, GeometrySpec::Mask { .. }) && self.resolutions.len() > 1 {
            bail!("a mask geometry has a fixed resolution; Richardson extrapolation needs a builder");
        }
        if !(self.richardson_order > 0.0) {
            bail!("richardson_order must be positive");
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        for c in &self.contours {
            let contour = c.build(&self.base_dir)?;
            self.quadrature.apply(&contour).validate()?;
        }
        let s = &self.scan;
        if s.n_re < 1 || s.n_im < 1 || !(s.re_max >= s.re_min) || !(s.im_max >= s.im_min) || s.im_min < 0.0 {
            bail!("scan needs a non-empty rectangle in the upper half plane");
        }
        let e = &self.experiment;
        e.fluid.validate()?;
        if !(e.d_si > 0.0) || !(e.fraction > 0.0 && e.fraction <= 1.0) || e.spectrum_points < 2 {
            bail!("experiment needs d_si > 0, fraction in (0, 1] and at least two spectrum points");
        }
        Ok(())
    }

    pub fn build_geometry(&self, resolution: usize) -> Result<Geometry> {
        Ok(match &self.geometry {
            GeometrySpec::Piston(p) => geometry::build_piston(p, resolution)?,
            GeometrySpec::SingleBlock(p) => geometry::single_block(p, resolution)?,
            GeometrySpec::ParallelPlates1d { separation } => geometry::build_parallel_plates_1d(*separation, resolution)?,
            GeometrySpec::Mask {
                path,
                boundary,
                rect,
                points_per_cell,
            } => geometry::geometry_from_mask(&self.base_dir.join(path), *boundary, *rect, *points_per_cell)?,
        })
    }

    /// SHA-256 of the canonical JSON of everything that can change a result.
    /// Output location and thread count are excluded on purpose.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.jobs = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference_piston() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.geometry, GeometrySpec::Piston(PistonGeometry::default()));
        assert_eq!(c.contours, vec![ContourSpec::Conductive { sigma: 100.0 }]);
        assert_eq!(c.resolutions, vec![32]);
    }

    #[test]
    fn unknown_keys_rejected() {
        for bad in [
            r#"{"geometry": {"kind": "piston", "s": 1.0, "wall": 2}}"#,
            r#"{"contours": [{"kind": "conductive", "sigma": 10, "x": 1}]}"#,
            r#"{"quadrature": {"nodes": 4}}"#,
            r#"{"stress": {"polarisation": ["tm"]}}"#,
            r#"{"resolution": 32}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn partial_piston_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"geometry": {"kind": "piston", "h": null}}"#).unwrap();
        let GeometrySpec::Piston(p) = c.geometry else { panic!() };
        assert_eq!(p.h, None);
        assert_eq!(p.s, 1.0);
    }

    #[test]
    fn bad_resolutions_rejected() {
        for r in ["[]", "[0]", "[64, 32]", "[16, 32, 64]"] {
            let c: RunConfig = serde_json::from_str(&format!(r#"{{"resolutions": {r}}}"#)).unwrap();
            assert!(c.validate().is_err(), "{r}");
        }
    }

    #[test]
    fn hash_ignores_output_and_jobs() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.jobs = Some(7);
        b.output = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.resolutions = vec![16];
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn overrides_apply_over_contour_defaults() {
        let o = QuadratureOverrides {
            tolerance: Some(0.05),
            ..Default::default()
        };
        let q = o.apply(&Contour::Wick);
        assert_eq!(q.tolerance, 0.05);
        assert_eq!(q.xi_max, QuadratureSpec::default_for(&Contour::Wick).xi_max);
    }
}
