//! Complex-frequency contours ω(ξ), their Jacobians, and the real-frequency
//! media ε_c(ξ) = ε(ω)ω²/ξ² that reproduce the same Green's function.
//!
//! Everything here is a pure function of its inputs. All square roots are
//! principal-branch, which keeps Im ω ≥ 0 whenever ε_c is passive.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::C64;

/// Relative tolerance used by the conjugate-symmetry and passivity checks.
pub const PHYSICALITY_TOL: f64 = 1e-12;

fn require_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveFrequency(xi))
    }
}

/// A permittivity model. It is used both as a base material ε(ω), evaluated
/// at complex ω by analytic continuation, and as an equivalent medium ε_c(ξ)
/// on the positive real axis.
#[derive(Clone, Debug, PartialEq)]
pub enum Permittivity {
    Constant(C64),
    /// ε = ε_s + iσ/ω; σ in units of c/d.
    Conductor { eps_s: f64, sigma: f64 },
    Tabulated(Arc<TabulatedPermittivity>),
}

impl Permittivity {
    pub fn vacuum() -> Self {
        Permittivity::Constant(C64::new(1.0, 0.0))
    }

    /// Value at real ξ > 0.
    pub fn at_xi(&self, xi: f64) -> Result<C64> {
        require_xi(xi)?;
        match self {
            Permittivity::Constant(c) => Ok(*c),
            Permittivity::Conductor { eps_s, sigma } => Ok(C64::new(*eps_s, sigma / xi)),
            Permittivity::Tabulated(t) => t.eval(xi),
        }
    }

    /// dε/dξ at real ξ > 0.
    pub fn derivative_at_xi(&self, xi: f64) -> Result<C64> {
        require_xi(xi)?;
        match self {
            Permittivity::Constant(_) => Ok(C64::new(0.0, 0.0)),
            Permittivity::Conductor { sigma, .. } => Ok(C64::new(0.0, -sigma / (xi * xi))),
            Permittivity::Tabulated(t) => t.derivative(xi),
        }
    }

    /// Value at −ξ, if the model exposes its extension to negative frequency.
    pub fn at_negative_xi(&self, xi: f64) -> Option<C64> {
        match self {
            Permittivity::Constant(c) => Some(*c),
            Permittivity::Conductor { eps_s, sigma } => Some(C64::new(*eps_s, -sigma / xi)),
            Permittivity::Tabulated(t) => {
                if t.conjugate_extension {
                    t.eval(xi).ok().map(|v| v.conj())
                } else {
                    None
                }
            }
        }
    }

    /// Analytic continuation to complex ω. Tabulated data has none.
    pub fn at_omega(&self, omega: C64) -> Result<C64> {
        match self {
            Permittivity::Constant(c) => Ok(*c),
            Permittivity::Conductor { eps_s, sigma } => {
                if omega.norm() == 0.0 {
                    return Err(Error::InvalidInput("conductor evaluated at omega = 0".into()));
                }
                Ok(C64::new(*eps_s, 0.0) + C64::i() * *sigma / omega)
            }
            Permittivity::Tabulated(_) => Err(Error::InvalidInput(
                "tabulated permittivity has no continuation off the real axis".into(),
            )),
        }
    }
}

/// A real-frequency medium ε_c(ξ) together with a note on where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentMaterial {
    pub eps: Permittivity,
    pub provenance: String,
}

impl EquivalentMaterial {
    pub fn new(eps: Permittivity, provenance: impl Into<String>) -> Self {
        Self {
            eps,
            provenance: provenance.into(),
        }
    }

    pub fn eval(&self, xi: f64) -> Result<C64> {
        self.eps.at_xi(xi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Contour {
    Wick,
    Rotation { phi: f64 },
    Conductive { sigma: f64 },
    Material(EquivalentMaterial),
}

impl Contour {
    pub fn rotation(phi: f64) -> Result<Self> {
        if phi > 0.0 && phi <= std::f64::consts::FRAC_PI_2 {
            Ok(Contour::Rotation { phi })
        } else {
            Err(Error::InvalidContour(format!(
                "rotation angle must lie in (0, pi/2], got {phi}"
            )))
        }
    }

    pub fn conductive(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Contour::Conductive { sigma })
        } else {
            Err(Error::InvalidContour(format!(
                "conductivity must be positive, got {sigma}"
            )))
        }
    }

    pub fn label(&self) -> String {
        match self {
            Contour::Wick => "wick".into(),
            Contour::Rotation { phi } => format!("rotation(phi={phi})"),
            Contour::Conductive { sigma } => format!("conductive(sigma={sigma})"),
            Contour::Material(m) => format!("material({})", m.provenance),
        }
    }

    /// The effective low-frequency conductivity, if the contour has one.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            Contour::Conductive { sigma } => Some(*sigma),
            Contour::Material(EquivalentMaterial {
                eps: Permittivity::Conductor { sigma, .. },
                ..
            }) => Some(*sigma),
            _ => None,
        }
    }

    pub fn omega(&self, xi: f64) -> Result<C64> {
        omega_of_xi(self, xi)
    }

    pub fn jacobian(&self, xi: f64) -> Result<C64> {
        jacobian(self, xi)
    }

    /// The vacuum equivalent medium ε_c(ξ) = ω(ξ)²/ξ² in closed form.
    pub fn equivalent_material(&self) -> EquivalentMaterial {
        match self {
            Contour::Wick => EquivalentMaterial::new(
                Permittivity::Constant(C64::new(-1.0, 0.0)),
                "wick contour",
            ),
            Contour::Rotation { phi } => EquivalentMaterial::new(
                Permittivity::Constant(C64::from_polar(1.0, 2.0 * phi)),
                format!("rotation contour phi={phi}"),
            ),
            Contour::Conductive { sigma } => EquivalentMaterial::new(
                Permittivity::Conductor {
                    eps_s: 1.0,
                    sigma: *sigma,
                },
                format!("conductive contour sigma={sigma}"),
            ),
            Contour::Material(m) => m.clone(),
        }
    }
}

pub fn omega_of_xi(contour: &Contour, xi: f64) -> Result<C64> {
    require_xi(xi)?;
    Ok(match contour {
        Contour::Wick => C64::new(0.0, xi),
        Contour::Rotation { phi } => C64::from_polar(xi, *phi),
        Contour::Conductive { sigma } => xi * C64::new(1.0, sigma / xi).sqrt(),
        Contour::Material(m) => return contour_of_material(m, xi),
    })
}

pub fn jacobian(contour: &Contour, xi: f64) -> Result<C64> {
    require_xi(xi)?;
    Ok(match contour {
        Contour::Wick => C64::i(),
        Contour::Rotation { phi } => C64::from_polar(1.0, *phi),
        Contour::Conductive { sigma } => {
            let s = sigma / xi;
            0.5 * C64::new(2.0, s) / C64::new(1.0, s).sqrt()
        }
        Contour::Material(m) => {
            let eps = m.eval(xi)?;
            let root = eps.sqrt();
            if root.norm() == 0.0 {
                return Err(Error::MaterialUndefined {
                    xi,
                    reason: "eps_c vanishes; contour has a branch point".into(),
                });
            }
            root + xi * m.eps.derivative_at_xi(xi)? / (2.0 * root)
        }
    })
}

/// ε_c = ε(ω(ξ))·ω(ξ)²/ξ² for a base material evaluated on the contour.
pub fn eps_c_of_contour(contour: &Contour, base: &Permittivity, xi: f64) -> Result<C64> {
    let omega = omega_of_xi(contour, xi)?;
    let ratio = omega / xi;
    Ok(base.at_omega(omega)? * ratio * ratio)
}

/// The complex frequency ω = ξ√ε_c(ξ) at which vacuum reproduces the medium.
pub fn contour_of_material(material: &EquivalentMaterial, xi: f64) -> Result<C64> {
    let eps = material.eval(xi)?;
    if !(eps.re.is_finite() && eps.im.is_finite()) {
        return Err(Error::MaterialUndefined {
            xi,
            reason: format!("non-finite permittivity {eps}"),
        });
    }
    Ok(xi * eps.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub check: &'static str,
    pub xi: f64,
    pub eps_re: f64,
    pub eps_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhysicalityReport {
    pub conjugate_symmetric: bool,
    pub passive: bool,
    pub physical: bool,
    pub witness: Option<Witness>,
}

/// Checks ε_c(−ξ) = ε_c(ξ)* and absence of gain on the probe set.
///
/// Passivity fails on Im ε_c < 0 anywhere, and also when the medium is
/// lossless at the lowest probe with Re ε_c < 1: a dissipative medium has
/// ε_c real and ≥ 1 in the static limit, so a lossless value below one there
/// can only come from gain (this is what flags ε_c = −1).
pub fn check_physicality(material: &EquivalentMaterial, probes: &[f64]) -> Result<PhysicalityReport> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("physicality probe set is empty".into()));
    }
    let mut conj_ok = true;
    let mut passive = true;
    let mut witness = None;
    let record = |check: &'static str, xi: f64, e: C64, w: &mut Option<Witness>| {
        if w.is_none() {
            *w = Some(Witness {
                check,
                xi,
                eps_re: e.re,
                eps_im: e.im,
            });
        }
    };

    let mut lowest = f64::INFINITY;
    for &xi in probes {
        require_xi(xi)?;
        lowest = lowest.min(xi);
        let e = material.eval(xi)?;
        let scale = e.norm().max(1.0);
        let Some(reflected) = material.eps.at_negative_xi(xi) else {
            return Err(Error::InvalidInput(format!(
                "material '{}' does not declare its extension to negative frequency",
                material.provenance
            )));
        };
        if conj_ok && (reflected - e.conj()).norm() > PHYSICALITY_TOL * scale {
            conj_ok = false;
            record("conjugate_symmetry", xi, e, &mut witness);
        }
        if passive && e.im < -PHYSICALITY_TOL * scale {
            passive = false;
            record("gain", xi, e, &mut witness);
        }
    }

    let e0 = material.eval(lowest)?;
    if passive && e0.im.abs() <= PHYSICALITY_TOL * e0.norm().max(1.0) && e0.re < 1.0 {
        passive = false;
        record("static_limit", lowest, e0, &mut witness);
    }

    Ok(PhysicalityReport {
        conjugate_symmetric: conj_ok,
        passive,
        physical: conj_ok && passive,
        witness,
    })
}

/// Logarithmically spaced probes on [lo, hi].
pub fn log_probes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InvalidInput("interpolation needs at least two points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("abscissae must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    fn locate(&self, t: f64) -> Option<usize> {
        let n = self.x.len();
        if !(t >= self.x[0] && t <= self.x[n - 1]) {
            return None;
        }
        let k = self.x.partition_point(|&v| v <= t);
        Some(k.clamp(1, n - 1) - 1)
    }

    pub fn eval(&self, t: f64) -> Option<f64> {
        let k = self.locate(t)?;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s);
        let (h01, h11) = (-2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        Some(h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1])
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        let k = self.locate(t)?;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let dh00 = (6.0 * s * s - 6.0 * s) / h;
        let dh10 = 3.0 * s * s - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s * s + 6.0 * s) / h;
        let dh11 = 3.0 * s * s - 2.0 * s;
        Some(dh00 * self.y[k] + dh10 * self.d[k] + dh01 * self.y[k + 1] + dh11 * self.d[k + 1])
    }
}

// Three-point end slope, clipped so the end interval stays monotone.
fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// ε_c(ξ) from a table, interpolated in log ξ. Values outside the table
/// range are reported as undefined rather than extrapolated.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedPermittivity {
    re: Pchip,
    im: Pchip,
    xi_min: f64,
    xi_max: f64,
    /// Whether ε_c(−ξ) = ε_c(ξ)* is asserted by the data's source.
    pub conjugate_extension: bool,
}

impl TabulatedPermittivity {
    pub fn new(samples: &[(f64, C64)], conjugate_extension: bool) -> Result<Self> {
        if samples.iter().any(|(xi, _)| !(*xi > 0.0)) {
            return Err(Error::InvalidInput("tabulated xi values must be positive".into()));
        }
        let lx: Vec<f64> = samples.iter().map(|(xi, _)| xi.ln()).collect();
        let re = Pchip::new(lx.clone(), samples.iter().map(|(_, e)| e.re).collect())?;
        let im = Pchip::new(lx, samples.iter().map(|(_, e)| e.im).collect())?;
        Ok(Self {
            re,
            im,
            xi_min: samples[0].0,
            xi_max: samples[samples.len() - 1].0,
            conjugate_extension,
        })
    }

    /// Reads `xi, re, im` rows; `#` lines and a non-numeric header are skipped.
    pub fn from_csv(path: &Path, conjugate_extension: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut samples = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "{}: row {} has {} columns, expected xi,re,im",
                    path.display(),
                    line + 1,
                    rec.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => samples.push((v[0], C64::new(v[1], v[2]))),
                Err(_) if samples.is_empty() && line == 0 => continue,
                Err(e) => {
                    return Err(Error::InvalidInput(format!(
                        "{}: row {}: {e}",
                        path.display(),
                        line + 1
                    )))
                }
            }
        }
        Self::new(&samples, conjugate_extension)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xi_min, self.xi_max)
    }

    pub fn eval(&self, xi: f64) -> Result<C64> {
        let t = xi.ln();
        match (self.re.eval(t), self.im.eval(t)) {
            (Some(a), Some(b)) => Ok(C64::new(a, b)),
            _ => Err(Error::MaterialUndefined {
                xi,
                reason: format!("outside tabulated range [{}, {}]", self.xi_min, self.xi_max),
            }),
        }
    }

    pub fn derivative(&self, xi: f64) -> Result<C64> {
        let t = xi.ln();
        match (self.re.derivative(t), self.im.derivative(t)) {
            (Some(a), Some(b)) => Ok(C64::new(a, b) / xi),
            _ => Err(Error::MaterialUndefined {
                xi,
                reason: "outside tabulated range".into(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn wick_is_the_imaginary_axis() {
        assert_eq!(omega_of_xi(&Contour::Wick, 1.0).unwrap(), C64::new(0.0, 1.0));
        assert_eq!(jacobian(&Contour::Wick, 3.7).unwrap(), C64::i());
        let v = eps_c_of_contour(&Contour::Wick, &Permittivity::vacuum(), 2.5).unwrap();
        assert_eq!(v, C64::new(-1.0, 0.0));
    }

    #[test]
    fn conductive_contour_at_unit_sigma() {
        // sqrt(1+i) in polar form: 2^(1/4) e^{i pi/8}, evaluated to 20 digits offline.
        let expect = C64::new(1.098_684_113_467_809_966_04, 0.455_089_860_562_227_341_30);
        let w = omega_of_xi(&Contour::conductive(1.0).unwrap(), 1.0).unwrap();
        assert!(close(w, expect, 1e-12), "{w}");
    }

    #[test]
    fn vacuum_limits() {
        let tiny = Contour::conductive(1e-14).unwrap();
        for xi in [1e-3, 1.0, 40.0] {
            assert!(close(tiny.omega(xi).unwrap(), C64::new(xi, 0.0), 1e-10));
            assert!(close(tiny.jacobian(xi).unwrap(), C64::new(1.0, 0.0), 1e-10));
        }
        let identity = EquivalentMaterial::new(Permittivity::vacuum(), "vacuum");
        assert_eq!(contour_of_material(&identity, 2.0).unwrap(), C64::new(2.0, 0.0));
    }

    #[test]
    fn jacobian_near_zero_has_square_root_growth() {
        let c = Contour::conductive(100.0).unwrap();
        let xi = 1e-4;
        let j = c.jacobian(xi).unwrap();
        // 0.5 |2 + 1e6 i| / |1 + 1e6 i|^(1/2), frozen from an independent evaluation
        assert_relative_eq!(j.norm(), 500.000_000_000_875, max_relative = 1e-12);
        assert_relative_eq!(j.norm(), 0.5 * (100.0f64 / xi).sqrt(), max_relative = 1e-3);
        let h = 1e-8;
        let fd = (c.omega(xi + h).unwrap() - c.omega(xi - h).unwrap()) / (2.0 * h);
        assert!(close(fd, j, 1e-3));
    }

    #[test]
    fn canonical_equivalent_materials() {
        let vac = Permittivity::vacuum();
        let phi = 0.3;
        let r = eps_c_of_contour(&Contour::rotation(phi).unwrap(), &vac, 1.7).unwrap();
        assert!(close(r, C64::from_polar(1.0, 2.0 * phi), 1e-14));
        let s = 7.0;
        let xi = 0.4;
        let c = eps_c_of_contour(&Contour::conductive(s).unwrap(), &vac, xi).unwrap();
        assert!(close(c, C64::new(1.0, s / xi), 1e-14));
    }

    #[test]
    fn saline_square_root() {
        let m = EquivalentMaterial::new(Permittivity::Constant(C64::new(80.0, 89.93)), "saline");
        let w = contour_of_material(&m, 1.0).unwrap();
        // principal root of 80 + 89.93i, evaluated at 30 digits offline
        assert!(close(w, C64::new(10.009_086_774_5, 4.492_417_841_2), 1e-10), "{w}");
    }

    #[test]
    fn round_trip_through_material() {
        let c = Contour::conductive(3.0).unwrap();
        let m = c.equivalent_material();
        for xi in [1e-3, 0.5, 2.0, 90.0] {
            let a = c.omega(xi).unwrap();
            let b = contour_of_material(&m, xi).unwrap();
            assert!(close(a, b, 1e-15), "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Contour::Wick.omega(0.0).is_err());
        assert!(Contour::Wick.jacobian(-1.0).is_err());
        assert!(Contour::conductive(0.0).is_err());
        assert!(Contour::rotation(0.0).is_err());
        assert!(Contour::rotation(2.0).is_err());
        assert!(Contour::rotation(FRAC_PI_2).is_ok());
    }

    #[test]
    fn asymptotics_of_conductive_contour() {
        let s = 10.0;
        let c = Contour::conductive(s).unwrap();
        let big = c.omega(1e4 * s).unwrap() / (1e4 * s);
        assert!((big - 1.0).norm() < 1e-3);
        let small = c.omega(1e-6 * s).unwrap();
        assert!((small.arg() - FRAC_PI_4).abs() < 1e-3);
    }

    #[test]
    fn physicality_table() {
        let probes = log_probes(1e-3, 10.0, 9);
        let wick = check_physicality(&Contour::Wick.equivalent_material(), &probes).unwrap();
        assert!(!wick.physical && !wick.passive && wick.conjugate_symmetric);
        let rot = Contour::rotation(FRAC_PI_4).unwrap().equivalent_material();
        let rot = check_physicality(&rot, &probes).unwrap();
        assert!(!rot.physical && !rot.conjugate_symmetric);
        assert_eq!(rot.witness.as_ref().unwrap().check, "conjugate_symmetry");
        let cond = Contour::conductive(10.0).unwrap().equivalent_material();
        let cond = check_physicality(&cond, &probes).unwrap();
        assert!(cond.physical && cond.witness.is_none());
        let vac = EquivalentMaterial::new(Permittivity::vacuum(), "vacuum");
        assert!(check_physicality(&vac, &probes).unwrap().physical);
    }

    #[test]
    fn gain_material_is_flagged() {
        let m = EquivalentMaterial::new(
            Permittivity::Conductor {
                eps_s: 2.0,
                sigma: -1.0,
            },
            "gain",
        );
        let r = check_physicality(&m, &[0.5, 1.0]).unwrap();
        assert!(!r.passive && r.conjugate_symmetric);
        assert_eq!(r.witness.unwrap().check, "gain");
    }

    #[test]
    fn undeclared_extension_is_a_precondition_error() {
        let t = TabulatedPermittivity::new(&[(1.0, C64::new(2.0, 1.0)), (2.0, C64::new(2.0, 0.5))], false)
            .unwrap();
        let m = EquivalentMaterial::new(Permittivity::Tabulated(Arc::new(t)), "table");
        assert!(check_physicality(&m, &[1.5]).is_err());
    }

    #[test]
    fn tabulated_conductor_reproduces_closed_form() {
        let samples: Vec<(f64, C64)> = log_probes(1e-3, 1e2, 61)
            .into_iter()
            .map(|xi| (xi, C64::new(80.0, 30.0 / xi)))
            .collect();
        let t = TabulatedPermittivity::new(&samples, true).unwrap();
        for xi in [2e-3, 0.05, 1.3, 77.0] {
            let v = t.eval(xi).unwrap();
            assert!(close(v, C64::new(80.0, 30.0 / xi), 2e-3), "{xi}: {v}");
        }
        assert!(t.eval(1e-4).is_err());
        let m = EquivalentMaterial::new(Permittivity::Tabulated(Arc::new(t)), "saline table");
        assert!(check_physicality(&m, &log_probes(1e-3, 1e2, 20)).unwrap().physical);
        let c = Contour::Material(m);
        let xi = 0.7;
        let h = 1e-6 * xi;
        let fd = (c.omega(xi + h).unwrap() - c.omega(xi - h).unwrap()) / (2.0 * h);
        assert!(close(c.jacobian(xi).unwrap(), fd, 1e-6));
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.11, 2.0, 2.0];
        let p = Pchip::new(x, y).unwrap();
        let mut last = -1.0;
        for k in 0..=400 {
            let v = p.eval(k as f64 / 100.0).unwrap();
            assert!(v >= last - 1e-15);
            last = v;
        }
        assert!(p.eval(4.5).is_none());
    }

    #[test]
    fn tabulated_csv_loader() {
        let dir = std::env::temp_dir().join(format!("cac-eps-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("eps.csv");
        std::fs::write(&path, "# saline\nxi,re,im\n0.1,80,50\n1,80,5\n10,80,0.5\n").unwrap();
        let t = TabulatedPermittivity::from_csv(&path, true).unwrap();
        assert!(close(t.eval(1.0).unwrap(), C64::new(80.0, 5.0), 1e-14));
        std::fs::write(&path, "0.1,80\n").unwrap();
        assert!(TabulatedPermittivity::from_csv(&path, true).is_err());
    }

    fn contour_strategy() -> impl Strategy<Value = Contour> {
        prop_oneof![
            Just(Contour::Wick),
            (0.01f64..FRAC_PI_2).prop_map(|phi| Contour::Rotation { phi }),
            (0.01f64..2000.0).prop_map(|sigma| Contour::Conductive { sigma }),
            (1.0f64..90.0, 0.1f64..500.0).prop_map(|(eps_s, sigma)| Contour::Material(
                EquivalentMaterial::new(Permittivity::Conductor { eps_s, sigma }, "fluid")
            )),
        ]
    }

    proptest! {
        #[test]
        fn branch_consistency(c in contour_strategy(), lx in -3.0f64..3.0) {
            let xi = 10f64.powf(lx);
            let w = c.omega(xi).unwrap();
            prop_assert!(w.im >= 0.0);
            let eps = c.equivalent_material().eval(xi).unwrap();
            prop_assert!(close((w / xi) * (w / xi), eps, 1e-12));
        }

        #[test]
        fn jacobian_matches_finite_difference(c in contour_strategy(), lx in -2.0f64..2.0) {
            let xi = 10f64.powf(lx);
            let h = 1e-6 * xi;
            let fd = (c.omega(xi + h).unwrap() - c.omega(xi - h).unwrap()) / (2.0 * h);
            let j = c.jacobian(xi).unwrap();
            prop_assert!((fd - j).norm() / j.norm() <= 1e-6);
        }
    }
}
