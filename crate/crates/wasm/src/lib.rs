//! WebAssembly entry points for the static page in `www/`.
//!
//! Every export returns a JSON string: the page parses it with `JSON.parse`
//! and needs no generated bindings beyond the three functions.

use cac_core::contour::{check_physicality, log_probes, Contour, PhysicalityReport};
use cac_core::experiment::FluidModel;
use cac_core::geometry::{build_parallel_plates_1d, build_piston, Geometry, PistonGeometry};
use cac_core::oracle::lifshitz_1d_force;
use cac_core::quadrature::{integrate_geometry_force, QuadratureSpec};
use cac_core::stress::StressOptions;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Extrapolated piston force at s = d, h = 0.5d, in ħc/d³.
const PISTON_REFERENCE: f64 = 0.0335;

/// `kind` is one of wick, rotation (param = φ in radians), conductive
/// (param = σ in c/d) or saline (param = separation in meters).
fn contour(kind: &str, param: f64) -> Result<Contour, String> {
    let c = match kind {
        "wick" => Ok(Contour::Wick),
        "rotation" => Contour::rotation(param),
        "conductive" => Contour::conductive(param),
        "saline" => FluidModel::saline().contour(param),
        other => return Err(format!("unknown contour kind '{other}'")),
    };
    c.map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct ContourView {
    label: String,
    physicality: PhysicalityReport,
    xi: Vec<f64>,
    omega_re: Vec<f64>,
    omega_im: Vec<f64>,
    eps_re: Vec<f64>,
    eps_im: Vec<f64>,
}

pub fn contour_view(kind: &str, param: f64, points: usize) -> Result<String, String> {
    let c = contour(kind, param)?;
    let m = c.equivalent_material();
    let physicality = check_physicality(&m, &log_probes(1e-3, 1e3, 61)).map_err(|e| e.to_string())?;
    let xi = log_probes(1e-3, 1e2, points.clamp(2, 2000));
    let mut v = ContourView {
        label: c.label(),
        physicality,
        xi: xi.clone(),
        omega_re: Vec::new(),
        omega_im: Vec::new(),
        eps_re: Vec::new(),
        eps_im: Vec::new(),
    };
    for &x in &xi {
        let w = c.omega(x).map_err(|e| e.to_string())?;
        let e = m.eval(x).map_err(|e| e.to_string())?;
        v.omega_re.push(w.re);
        v.omega_im.push(w.im);
        v.eps_re.push(e.re);
        v.eps_im.push(e.im);
    }
    serde_json::to_string(&v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct IntegrandView {
    label: String,
    geometry: String,
    resolution: usize,
    xi: Vec<f64>,
    /// Im(dω/dξ · dF/dω) at each node.
    integrand: Vec<f64>,
    partial: Vec<f64>,
    force: f64,
    tail: f64,
    converged: bool,
    xi50: Option<f64>,
    xi90: Option<f64>,
    reference: f64,
}

fn integrand_view(g: &Geometry, c: &Contour, resolution: usize, reference: f64) -> Result<String, String> {
    let spec = QuadratureSpec::default_for(c);
    let r = integrate_geometry_force(g, c, &spec, &StressOptions::default()).map_err(|e| e.to_string())?;
    let v = IntegrandView {
        label: c.label(),
        geometry: g.name.clone(),
        resolution,
        xi: r.nodes.iter().map(|n| n.xi).collect(),
        integrand: r.nodes.iter().map(|n| (n.jacobian * n.df_x).im).collect(),
        partial: r.nodes.iter().map(|n| n.partial).collect(),
        force: r.force,
        tail: r.tail,
        converged: r.converged,
        xi50: r.xi50,
        xi90: r.xi90,
        reference,
    };
    serde_json::to_string(&v).map_err(|e| e.to_string())
}

pub fn plates_view(kind: &str, param: f64, resolution: usize) -> Result<String, String> {
    let res = resolution.clamp(8, 256);
    let g = build_parallel_plates_1d(1.0, res).map_err(|e| e.to_string())?;
    let exact = lifshitz_1d_force(1.0).map_err(|e| e.to_string())?.force();
    integrand_view(&g, &contour(kind, param)?, res, exact)
}

/// Kept coarse: the page runs single-threaded.
pub fn piston_view(kind: &str, param: f64, resolution: usize) -> Result<String, String> {
    let res = resolution.clamp(8, 24);
    let g = build_piston(&PistonGeometry::default(), res).map_err(|e| e.to_string())?;
    integrand_view(&g, &contour(kind, param)?, res, PISTON_REFERENCE)
}

#[wasm_bindgen]
pub fn contour_json(kind: &str, param: f64, points: usize) -> Result<String, JsError> {
    contour_view(kind, param, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn plates_json(kind: &str, param: f64, resolution: usize) -> Result<String, JsError> {
    plates_view(kind, param, resolution).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn piston_json(kind: &str, param: f64, resolution: usize) -> Result<String, JsError> {
    piston_view(kind, param, resolution).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn contour_views_carry_physicality() {
        let wick: Value = serde_json::from_str(&contour_view("wick", 0.0, 20).unwrap()).unwrap();
        assert_eq!(wick["physicality"]["physical"], false);
        assert_eq!(wick["xi"].as_array().unwrap().len(), 20);
        let cond: Value = serde_json::from_str(&contour_view("conductive", 10.0, 5).unwrap()).unwrap();
        assert_eq!(cond["physicality"]["physical"], true);
        assert!(contour_view("spiral", 1.0, 5).is_err());
        assert!(contour_view("rotation", 3.0, 5).is_err());
    }

    #[test]
    fn plates_view_close_to_exact() {
        let v: Value = serde_json::from_str(&plates_view("conductive", 10.0, 32).unwrap()).unwrap();
        let (f, exact) = (v["force"].as_f64().unwrap(), v["reference"].as_f64().unwrap());
        assert!(((f - exact) / exact).abs() < 0.05, "{f} vs {exact}");
        assert_eq!(v["xi"].as_array().unwrap().len(), v["integrand"].as_array().unwrap().len());
    }

    #[test]
    fn piston_view_is_coarse_and_converged() {
        let v: Value = serde_json::from_str(&piston_view("wick", 0.0, 100).unwrap()).unwrap();
        assert_eq!(v["resolution"], 24);
        assert_eq!(v["converged"], true);
        assert!(v["force"].as_f64().unwrap() > 0.0);
    }
}
