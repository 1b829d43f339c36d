//! Outer ξ-integration of the force: F = Im ∫ dξ (dω/dξ) dF/dω.
//!
//! Nodes: Gauss–Legendre panels in u = √ξ on (0, ξ_switch], which absorbs the
//! √(σ/ξ) growth of the conductive Jacobian, followed by Gauss–Legendre panels
//! in log ξ up to ξ_max, each panel additionally capped in linear width so
//! that slow oscillations at large ξ stay resolved.

use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::greens::FrequencyPoint;
use crate::stress::{force_integrand, StressOptions};
use crate::C64;

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl_panel(f: &dyn Fn(f64) -> C64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> C64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| *w * r * f(c + r * x))
        .sum()
}

/// Adaptive bisection with a 10-point Gauss–Legendre rule.
pub fn adaptive_gauss_legendre(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> C64 {
    let rule = gauss_legendre(10);
    let whole = gl_panel(f, a, b, &rule);
    let mut stack = vec![(a, b, whole, 0u32)];
    let mut total = C64::new(0.0, 0.0);
    let mut scale = whole.norm();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl_panel(f, lo, mid, &rule);
        let right = gl_panel(f, mid, hi, &rule);
        let refined = left + right;
        scale = scale.max(refined.norm());
        let width_share = (hi - lo) / (b - a);
        if (refined - est).norm() <= tol * scale * width_share.max(1e-3) || depth > 60 {
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

/// F_ext = F2 + (F2 − F1)/((R2/R1)^p − 1).
pub fn richardson(f1: f64, r1: f64, f2: f64, r2: f64, order: f64) -> f64 {
    f2 + (f2 - f1) / ((r2 / r1).powf(order) - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub xi_max: f64,
    pub xi_switch: f64,
    /// Panels in u = √ξ on (0, ξ_switch].
    pub u_panels: usize,
    pub u_nodes: usize,
    /// Growth factor of successive log-ξ panels.
    pub panel_ratio: f64,
    pub log_nodes: usize,
    /// Largest linear width of any panel above ξ_switch.
    pub max_panel_width: f64,
    pub tolerance: f64,
}

/// |ω| spanned by one u-panel.
const OMEGA_PER_U_PANEL: f64 = 2.5;
/// |ω| at which the default ξ_max is placed for material-defined contours.
const OMEGA_CUTOFF: f64 = 30.0;
/// Tails below this fraction of the integrated magnitude scale are rounding noise.
const ROUNDOFF_FLOOR: f64 = 1e-10;

impl QuadratureSpec {
    pub fn default_for(contour: &Contour) -> Self {
        let sigma = contour.sigma();
        let xi_switch = 0.1 * sigma.unwrap_or(1.0).min(1.0);
        let xi_max = match contour {
            Contour::Wick | Contour::Rotation { .. } => 30.0,
            Contour::Conductive { sigma } => {
                if *sigma >= 100.0 {
                    10.0
                } else {
                    30.0
                }
            }
            Contour::Material(_) => {
                // smallest ξ with |ω(ξ)| ≥ OMEGA_CUTOFF, by bisection on [ξ_switch, 30]
                let reach = |xi: f64| contour.omega(xi).map(|w| w.norm()).unwrap_or(f64::INFINITY);
                let (mut lo, mut hi) = (xi_switch, 30.0);
                if reach(hi) <= OMEGA_CUTOFF {
                    hi
                } else {
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if reach(mid) >= OMEGA_CUTOFF {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    hi.max(10.0 * xi_switch)
                }
            }
        };
        let reach = contour.omega(xi_switch).map(|w| w.norm()).unwrap_or(1.0);
        Self {
            xi_max,
            xi_switch,
            u_panels: ((reach / OMEGA_PER_U_PANEL).ceil() as usize).max(1),
            u_nodes: 8,
            panel_ratio: 2.5,
            log_nodes: 6,
            max_panel_width: 4.0,
            tolerance: 1e-2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidQuadrature(m));
        if !(self.xi_switch > 0.0 && self.xi_max > self.xi_switch) {
            return bad(format!(
                "need xi_max > xi_switch > 0, got xi_max = {}, xi_switch = {}",
                self.xi_max, self.xi_switch
            ));
        }
        if !(self.tolerance > 1e-10 && self.tolerance < 1e-1) {
            return bad(format!("tolerance {} outside (1e-10, 1e-1)", self.tolerance));
        }
        if self.u_panels == 0 || self.u_nodes == 0 || self.log_nodes == 0 {
            return bad("node counts must be positive".into());
        }
        if !(self.panel_ratio > 1.0 && self.max_panel_width > 0.0) {
            return bad("panel ratio must exceed 1 and panel width must be positive".into());
        }
        Ok(())
    }

    /// Panel boundaries in ξ, starting at 0.
    pub fn panels(&self) -> Vec<(f64, f64, bool)> {
        let mut out = Vec::new();
        let us = self.xi_switch.sqrt();
        for k in 0..self.u_panels {
            let a = us * k as f64 / self.u_panels as f64;
            let b = us * (k + 1) as f64 / self.u_panels as f64;
            out.push((a * a, b * b, true));
        }
        let mut t = self.xi_switch;
        while t < self.xi_max * (1.0 - 1e-12) {
            let next = (t * self.panel_ratio).min(t + self.max_panel_width).min(self.xi_max);
            out.push((t, next, false));
            t = next;
        }
        out
    }

    /// (ξ, weight, panel index) in increasing ξ.
    pub fn nodes(&self) -> Vec<(f64, f64, usize)> {
        let ru = gauss_legendre(self.u_nodes);
        let rl = gauss_legendre(self.log_nodes);
        let mut out = Vec::new();
        for (p, (a, b, sub)) in self.panels().into_iter().enumerate() {
            if sub {
                let (ua, ub) = (a.sqrt(), b.sqrt());
                let (c, r) = (0.5 * (ua + ub), 0.5 * (ub - ua));
                for (x, w) in ru.0.iter().zip(&ru.1) {
                    let u = c + r * x;
                    out.push((u * u, w * r * 2.0 * u, p));
                }
            } else {
                let (la, lb) = (a.ln(), b.ln());
                let (c, r) = (0.5 * (la + lb), 0.5 * (lb - la));
                for (x, w) in rl.0.iter().zip(&rl.1) {
                    let xi = (c + r * x).exp();
                    out.push((xi, w * r * xi, p));
                }
            }
        }
        out
    }

    /// Σ w f(ξ) over the node set.
    pub fn integrate(&self, f: &dyn Fn(f64) -> C64) -> C64 {
        self.nodes().into_iter().map(|(xi, w, _)| w * f(xi)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeRecord {
    pub xi: f64,
    pub weight: f64,
    pub panel: usize,
    pub omega: C64,
    pub jacobian: C64,
    /// Surface-integrated dF_x/dω.
    pub df_x: C64,
    pub df_y: C64,
    /// w · Im(dω/dξ · dF_x/dω)
    pub contribution: f64,
    /// Running sum of contributions through this node.
    pub partial: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForceResult {
    pub contour: String,
    pub force: f64,
    pub force_y: f64,
    pub nodes: Vec<NodeRecord>,
    pub xi_max: f64,
    pub tail: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub xi50: Option<f64>,
    pub xi90: Option<f64>,
}

impl ForceResult {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Partial-integral table (ξ_k, ∫₀^{ξ_k}), ending at (ξ_max, F).
    pub fn partial_table(&self) -> Vec<(f64, f64)> {
        let mut t: Vec<(f64, f64)> = self.nodes.iter().map(|n| (n.xi, n.partial)).collect();
        t.push((self.xi_max, self.force));
        t
    }
}

/// Integrates Im(dω/dξ · dF/dω) with `integrand` returning (dF_x/dω, dF_y/dω)
/// at a node. Nodes are evaluated in parallel when enabled; the reduction is
/// always the ordered sum, so results do not depend on the thread count.
pub fn integrate_force<F>(contour: &Contour, spec: &QuadratureSpec, integrand: F) -> Result<ForceResult>
where
    F: Fn(f64) -> Result<(C64, C64)> + Sync,
{
    integrate_force_scaled(contour, spec, |xi| integrand(xi).map(|(fx, fy)| (fx, fy, fx.norm())))
}

/// As [`integrate_force`], with the integrand also returning a magnitude
/// scale for dF/dω (e.g. Σ|per-point contributions|). A tail at roundoff
/// level of the integrated scale counts as converged, so a force that
/// vanishes by symmetry is not reported as a convergence failure.
pub fn integrate_force_scaled<F>(contour: &Contour, spec: &QuadratureSpec, integrand: F) -> Result<ForceResult>
where
    F: Fn(f64) -> Result<(C64, C64, f64)> + Sync,
{
    spec.validate()?;
    let nodes = spec.nodes();
    for &(xi, _, _) in &nodes {
        let w = contour.omega(xi)?;
        if w.im < 0.0 {
            return Err(Error::InvalidContour(format!(
                "Im omega < 0 at xi = {xi}: contour would admit growing fields"
            )));
        }
    }
    let eval = |&(xi, _, _): &(f64, f64, usize)| -> Result<(C64, C64, C64, C64, f64)> {
        let omega = contour.omega(xi)?;
        let jac = contour.jacobian(xi)?;
        let (fx, fy, mag) = integrand(xi).map_err(|e| e.at_xi(xi))?;
        Ok((omega, jac, fx, fy, mag))
    };
    #[cfg(feature = "parallel")]
    let values: Vec<Result<_>> = {
        use rayon::prelude::*;
        nodes.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Result<_>> = nodes.iter().map(eval).collect();

    let mut records = Vec::with_capacity(nodes.len());
    let (mut fx_sum, mut fy_sum) = (0.0, 0.0);
    let mut scale = 0.0;
    for (&(xi, weight, panel), v) in nodes.iter().zip(values) {
        let (omega, jacobian, df_x, df_y, mag) = v?;
        scale += weight * jacobian.norm() * mag;
        let contribution = weight * (jacobian * df_x).im;
        fx_sum += contribution;
        fy_sum += weight * (jacobian * df_y).im;
        records.push(NodeRecord {
            xi,
            weight,
            panel,
            omega,
            jacobian,
            df_x,
            df_y,
            contribution,
            partial: fx_sum,
        });
    }
    let last_panel = records.last().map(|r| r.panel).unwrap_or(0);
    let tail = records
        .iter()
        .filter(|r| r.panel == last_panel)
        .map(|r| r.contribution)
        .sum::<f64>()
        .abs();
    let converged = tail <= spec.tolerance * fx_sum.abs() || tail <= ROUNDOFF_FLOOR * scale;
    let mut result = ForceResult {
        contour: contour.label(),
        force: fx_sum,
        force_y: fy_sum,
        nodes: records,
        xi_max: spec.xi_max,
        tail,
        tolerance: spec.tolerance,
        converged,
        xi50: None,
        xi90: None,
    };
    if converged {
        result.xi50 = xi_fraction(&result, 0.5).ok();
        result.xi90 = xi_fraction(&result, 0.9).ok();
    }
    Ok(result)
}

/// The force on the geometry's enclosed body along `contour`.
pub fn integrate_geometry_force(
    geometry: &Geometry,
    contour: &Contour,
    spec: &QuadratureSpec,
    opts: &StressOptions,
) -> Result<ForceResult> {
    geometry.validate()?;
    integrate_force_scaled(contour, spec, |xi| {
        let fp = FrequencyPoint::on_contour(contour, &geometry.materials.ambient, xi)?;
        let s = force_integrand(geometry, &fp, opts)?;
        let mag = s.points.iter().map(|p| p.fx.norm()).sum();
        Ok((s.df_x, s.df_y, mag))
    })
}

/// Smallest tabulated ξ beyond which the partial integral stays within
/// 1 − f of the total. f = 1 returns ξ_max.
pub fn xi_fraction(result: &ForceResult, f: f64) -> Result<f64> {
    if !result.converged {
        return Err(Error::NotConverged {
            tail: result.tail,
            bound: result.tolerance * result.force.abs(),
        });
    }
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidInput(format!("fraction must lie in (0, 1], got {f}")));
    }
    if f == 1.0 || result.force == 0.0 {
        return Ok(result.xi_max);
    }
    let table = result.partial_table();
    let band = 1.0 - f;
    let mut answer = result.xi_max;
    for &(xi, p) in table.iter().rev() {
        if (p / result.force - 1.0).abs() <= band {
            answer = xi;
        } else {
            break;
        }
    }
    Ok(answer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 10, 20] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn square_root_endpoint_singularity() {
        // ∫₀^∞ √(σ/ξ) e^{−ξ} dξ = √(πσ)
        let sigma = 1.0;
        let spec = QuadratureSpec::default_for(&Contour::conductive(sigma).unwrap());
        let v = spec.integrate(&|xi| C64::new((sigma / xi).sqrt() * (-xi).exp(), 0.0));
        let exact = (std::f64::consts::PI * sigma).sqrt();
        assert!((v.re - exact).abs() / exact < 1e-6, "{} vs {exact}", v.re);
    }

    #[test]
    fn adaptive_rule_handles_log_peaks() {
        let k = 1e-4;
        let v = adaptive_gauss_legendre(&|x| C64::new(1.0 / (x * x + k * k).sqrt(), 0.0), 0.0, 1.0, 1e-12);
        let exact = (1.0 / k + (1.0 / (k * k) + 1.0).sqrt()).ln();
        assert!((v.re - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn default_node_budgets() {
        for (c, xmax) in [
            (Contour::Wick, 30.0),
            (Contour::conductive(10.0).unwrap(), 30.0),
            (Contour::conductive(100.0).unwrap(), 10.0),
            (Contour::conductive(1000.0).unwrap(), 10.0),
        ] {
            let s = QuadratureSpec::default_for(&c);
            s.validate().unwrap();
            assert_eq!(s.xi_max, xmax);
            let nodes = s.nodes();
            assert!(nodes.windows(2).all(|w| w[1].0 > w[0].0));
            assert!(nodes.len() <= 80, "{} nodes", nodes.len());
            let p = s.panels();
            assert!(p.iter().all(|(a, b, _)| b - a <= s.max_panel_width + 1e-12));
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = QuadratureSpec::default_for(&Contour::Wick);
        s.tolerance = 0.5;
        assert!(s.validate().is_err());
        let mut s = QuadratureSpec::default_for(&Contour::Wick);
        s.xi_max = 0.05;
        assert!(s.validate().is_err());
    }

    #[test]
    fn synthetic_force_and_fractions() {
        // dF/dω = e^{−ξ} on the Wick contour: F = Im ∫ i e^{−ξ} dξ = 1
        let c = Contour::Wick;
        let spec = QuadratureSpec::default_for(&c);
        let r = integrate_force(&c, &spec, |xi| Ok((C64::new((-xi).exp(), 0.0), C64::new(0.0, 0.0)))).unwrap();
        assert!((r.force - 1.0).abs() < 1e-8);
        assert!(r.converged);
        assert_eq!(r.partial_table().last().unwrap().1, r.force);
        let x50 = xi_fraction(&r, 0.5).unwrap();
        let x90 = xi_fraction(&r, 0.9).unwrap();
        assert!(x50 < x90 && x90 < 4.0);
        assert!((x90 - 10f64.ln()).abs() < 0.5);
        assert_eq!(xi_fraction(&r, 1.0).unwrap(), spec.xi_max);
    }

    #[test]
    fn unconverged_results_are_flagged() {
        let c = Contour::Wick;
        let spec = QuadratureSpec::default_for(&c);
        let r = integrate_force(&c, &spec, |_| Ok((C64::new(1.0, 0.0), C64::new(0.0, 0.0)))).unwrap();
        assert!(!r.converged);
        assert!(matches!(xi_fraction(&r, 0.9), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn vanishing_force_converges_against_its_scale() {
        let c = Contour::conductive(100.0).unwrap();
        let spec = QuadratureSpec::default_for(&c);
        // net integrand is rounding noise on top of unit one-sided contributions
        let noise = |xi: f64| C64::new(1e-17 * (7.0 * xi).sin(), 1e-17 * (3.0 * xi).cos());
        let r = integrate_force_scaled(&c, &spec, |xi| Ok((noise(xi), C64::new(0.0, 0.0), (-xi).exp()))).unwrap();
        assert!(r.force.abs() < 1e-15);
        assert!(r.converged);
        let bare = integrate_force(&c, &spec, |xi| Ok((noise(xi), C64::new(0.0, 0.0)))).unwrap();
        assert!(!bare.converged);
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |r: f64| 2.0 + 3.0 / (r * r);
        assert!((richardson(f(32.0), 32.0, f(64.0), 64.0, 2.0) - 2.0).abs() < 1e-14);
    }
}
