//! One function per subcommand. Each writes its artifacts through a [`Sink`]
//! and returns a summary the binary turns into an exit status.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cac_core::contour::{check_physicality, log_probes, Contour, EquivalentMaterial, Permittivity, TabulatedPermittivity};
use cac_core::experiment::{
    bandwidth_report, fluid_eps, hz_to_xi, synthetic_smatrix, AntennaPlan, BandwidthReport, FluidModel,
};
use cac_core::greens::FrequencyPoint;
use cac_core::oracle::{run_oracle_suite, OracleReport};
use cac_core::quadrature::{integrate_geometry_force, richardson, ForceResult};
use cac_core::stress::{force_integrand, StressOptions};
use cac_core::C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ContourSpec, RunConfig};
use crate::output::{e, slug, Sink, VERSION};

/// Runs `f` on a pool of `jobs` threads. Results do not depend on `jobs`.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    Ok(b.build().context("starting worker pool")?.install(f))
}

#[derive(Debug, Serialize)]
pub struct ResolutionRun {
    pub resolution: usize,
    pub result: ForceResult,
}

#[derive(Debug, Serialize)]
pub struct Extrapolated {
    pub resolutions: [usize; 2],
    pub order: f64,
    pub force: f64,
}

#[derive(Debug, Serialize)]
pub struct ContourForce {
    pub contour: String,
    pub runs: Vec<ResolutionRun>,
    pub extrapolated: Option<Extrapolated>,
}

impl ContourForce {
    /// Extrapolated force if available, else the finest run.
    pub fn best(&self) -> f64 {
        self.extrapolated
            .as_ref()
            .map(|x| x.force)
            .unwrap_or_else(|| self.runs.last().map(|r| r.result.force).unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Serialize)]
pub struct ForceReport {
    pub version: &'static str,
    pub config_sha256: String,
    pub geometry: String,
    pub stress: StressOptions,
    pub contours: Vec<ContourForce>,
}

impl ForceReport {
    pub fn converged(&self) -> bool {
        self.contours.iter().flat_map(|c| &c.runs).all(|r| r.result.converged)
    }

    /// One line per unconverged run, for stderr.
    pub fn diagnostics(&self) -> Vec<String> {
        self.contours
            .iter()
            .flat_map(|c| &c.runs)
            .filter(|r| !r.result.converged)
            .map(|r| {
                let res = &r.result;
                format!(
                    "{} at resolution {}: tail {:.3e} > {:.1e} x |F| = {:.3e} (xi_max = {})",
                    res.contour,
                    r.resolution,
                    res.tail,
                    res.tolerance,
                    res.tolerance * res.force.abs(),
                    res.xi_max
                )
            })
            .collect()
    }
}

fn write_force_tables(sink: &Sink, stem: &str, result: &ForceResult) -> Result<()> {
    let mut w = sink.csv(
        &format!("integrand_{stem}.csv"),
        &[&format!("contour {}", result.contour)],
        &[
            "xi", "weight", "panel", "re_omega", "im_omega", "re_jacobian", "im_jacobian", "re_dfdw_x", "im_dfdw_x",
            "re_dfdw_y", "im_dfdw_y", "contribution", "partial",
        ],
    )?;
    for n in &result.nodes {
        w.write_record([
            e(n.xi),
            e(n.weight),
            n.panel.to_string(),
            e(n.omega.re),
            e(n.omega.im),
            e(n.jacobian.re),
            e(n.jacobian.im),
            e(n.df_x.re),
            e(n.df_x.im),
            e(n.df_y.re),
            e(n.df_y.im),
            e(n.contribution),
            e(n.partial),
        ])?;
    }
    w.flush()?;

    let mut w = sink.csv(
        &format!("partial_{stem}.csv"),
        &[&format!("contour {}; last row is (xi_max, F)", result.contour)],
        &["xi", "partial", "fraction"],
    )?;
    for (xi, p) in result.partial_table() {
        let frac = if result.force != 0.0 { p / result.force } else { f64::NAN };
        w.write_record([e(xi), e(p), e(frac)])?;
    }
    w.flush()?;
    Ok(())
}

/// Force on the configured geometry for every contour and resolution.
/// Writes `force.json` plus integrand and partial-integral CSVs per run.
pub fn run_force(config: &RunConfig, out: &Path) -> Result<ForceReport> {
    config.validate()?;
    let sink = Sink::new(out, config.hash())?;
    let geometries = config
        .resolutions
        .iter()
        .map(|&r| config.build_geometry(r).with_context(|| format!("building geometry at resolution {r}")))
        .collect::<Result<Vec<_>>>()?;

    let mut contours = Vec::new();
    for spec in &config.contours {
        let contour = spec.build(&config.base_dir)?;
        let q = config.quadrature.apply(&contour);
        let mut runs = Vec::new();
        for (g, &r) in geometries.iter().zip(&config.resolutions) {
            let result = integrate_geometry_force(g, &contour, &q, &config.stress)
                .with_context(|| format!("{} at resolution {r}", contour.label()))?;
            write_force_tables(&sink, &format!("{}_r{r}", slug(&contour.label())), &result)?;
            runs.push(ResolutionRun { resolution: r, result });
        }
        let extrapolated = match runs.as_slice() {
            [a, b] => Some(Extrapolated {
                resolutions: [a.resolution, b.resolution],
                order: config.richardson_order,
                force: richardson(
                    a.result.force,
                    a.resolution as f64,
                    b.result.force,
                    b.resolution as f64,
                    config.richardson_order,
                ),
            }),
            _ => None,
        };
        contours.push(ContourForce {
            contour: contour.label(),
            runs,
            extrapolated,
        });
    }
    let report = ForceReport {
        version: VERSION,
        config_sha256: sink.config_hash.clone(),
        geometry: geometries[0].name.clone(),
        stress: config.stress.clone(),
        contours,
    };
    sink.json("force.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhysicalityRow {
    pub contour: String,
    pub conjugate_symmetric: Option<bool>,
    pub passive: Option<bool>,
    pub physical: Option<bool>,
    pub witness: String,
}

/// The canonical rows: Wick, a rotation, a conductive contour, plain vacuum
/// and a tabulated saline medium sampled from the fluid model.
pub fn canonical_contours(fluid: &FluidModel, d_si: f64) -> Result<Vec<Contour>> {
    let freqs = log_probes(1e6, fluid.ceiling_hz, 41);
    let samples = freqs
        .iter()
        .map(|&f| Ok((hz_to_xi(f, d_si), fluid_eps(fluid, f)?.value)))
        .collect::<cac_core::Result<Vec<(f64, C64)>>>()?;
    let saline = TabulatedPermittivity::new(&samples, true)?;
    Ok(vec![
        Contour::Wick,
        Contour::rotation(std::f64::consts::FRAC_PI_4)?,
        Contour::conductive(1.0)?,
        Contour::Material(EquivalentMaterial::new(Permittivity::vacuum(), "vacuum identity eps_c = 1")),
        Contour::Material(EquivalentMaterial::new(
            Permittivity::Tabulated(std::sync::Arc::new(saline)),
            format!("tabulated saline at d = {d_si} m"),
        )),
    ])
}

/// Probes spanning 10⁻³..10³, clipped to the table range for tabulated media.
fn probes_for(m: &EquivalentMaterial) -> Vec<f64> {
    let (lo, hi) = match &m.eps {
        Permittivity::Tabulated(t) => {
            let (a, b) = t.range();
            (a.max(1e-3), b.min(1e3))
        }
        _ => (1e-3, 1e3),
    };
    // exp(ln hi) can overshoot the table edge by an ulp
    log_probes(lo, hi, 61).into_iter().map(|x| x.clamp(lo, hi)).collect()
}

pub fn physicality_rows(contours: &[Contour]) -> Vec<PhysicalityRow> {
    contours
        .iter()
        .map(|c| {
            let m = c.equivalent_material();
            match check_physicality(&m, &probes_for(&m)) {
                Ok(r) => PhysicalityRow {
                    contour: c.label(),
                    conjugate_symmetric: Some(r.conjugate_symmetric),
                    passive: Some(r.passive),
                    physical: Some(r.physical),
                    witness: r
                        .witness
                        .map(|w| format!("{} at xi={:.4e}: eps_c={:.6e}{:+.6e}i", w.check, w.xi, w.eps_re, w.eps_im))
                        .unwrap_or_default(),
                },
                Err(err) => PhysicalityRow {
                    contour: c.label(),
                    conjugate_symmetric: None,
                    passive: None,
                    physical: None,
                    witness: format!("not evaluated: {err}"),
                },
            }
        })
        .collect()
}

/// Physicality of the configured contours, or of the canonical set when the
/// config leaves `contours` at its default.
pub fn run_contour_table(config: &RunConfig, out: &Path) -> Result<Vec<PhysicalityRow>> {
    let sink = Sink::new(out, config.hash())?;
    let contours = if config.explicit_contours {
        config
            .contours
            .iter()
            .map(|s: &ContourSpec| s.build(&config.base_dir))
            .collect::<Result<Vec<_>>>()?
    } else {
        canonical_contours(&config.experiment.fluid, config.experiment.d_si)?
    };
    let rows = physicality_rows(&contours);
    let mut w = sink.csv(
        "contour_table.csv",
        &[],
        &["contour", "conjugate_symmetric", "passive", "physical", "witness"],
    )?;
    let b = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_else(|| "na".into());
    for r in &rows {
        w.write_record([r.contour.clone(), b(r.conjugate_symmetric), b(r.passive), b(r.physical), r.witness.clone()])?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct ScanPoint {
    pub omega: C64,
    pub df: Option<C64>,
    pub status: String,
}

pub const SCAN_WARNING: &str = "real-axis rows (im_omega = 0) are qualitative: the integrand there is highly \
                                oscillatory and the coarse grid only partially resolves it";

/// dF/dω on a coarse rectangle of the ω plane in vacuum, at reduced resolution.
pub fn run_omega_scan(config: &RunConfig, out: &Path) -> Result<Vec<ScanPoint>> {
    config.validate()?;
    let sink = Sink::new(out, config.hash())?;
    let s = &config.scan;
    let g = config.build_geometry(s.resolution)?;
    let step = |lo: f64, hi: f64, n: usize, k: usize| if n > 1 { lo + (hi - lo) * k as f64 / (n - 1) as f64 } else { lo };
    let grid: Vec<C64> = (0..s.n_im)
        .flat_map(|j| (0..s.n_re).map(move |i| (i, j)))
        .map(|(i, j)| C64::new(step(s.re_min, s.re_max, s.n_re, i), step(s.im_min, s.im_max, s.n_im, j)))
        .collect();
    let points: Vec<ScanPoint> = grid
        .par_iter()
        .map(|&omega| {
            if omega.norm() == 0.0 {
                return ScanPoint {
                    omega,
                    df: None,
                    status: "skipped: omega = 0".into(),
                };
            }
            match force_integrand(&g, &FrequencyPoint::at_omega(omega), &config.stress) {
                Ok(sample) => ScanPoint {
                    omega,
                    df: Some(sample.df_x),
                    status: if omega.im == 0.0 { "real_axis".into() } else { "ok".into() },
                },
                Err(err) => ScanPoint {
                    omega,
                    df: None,
                    status: format!("failed: {err}"),
                },
            }
        })
        .collect();
    let mut w = sink.csv(
        "omega_scan.csv",
        &[SCAN_WARNING, &format!("geometry {} at resolution {}", g.name, s.resolution)],
        &["re_omega", "im_omega", "re_dfdw", "im_dfdw", "status"],
    )?;
    for p in &points {
        let (re, im) = p.df.map(|d| (e(d.re), e(d.im))).unwrap_or_else(|| ("nan".into(), "nan".into()));
        w.write_record([e(p.omega.re), e(p.omega.im), re, im, p.status.clone()])?;
    }
    w.flush()?;
    Ok(points)
}

/// Bandwidth report and synthetic S-matrix for the configured fluid.
pub fn run_experiment_plan(config: &RunConfig, out: &Path) -> Result<BandwidthReport> {
    config.validate()?;
    let sink = Sink::new(out, config.hash())?;
    let x = &config.experiment;
    let g = config.build_geometry(x.resolution)?;
    let contour = x.fluid.contour(x.d_si)?;
    let q = config.quadrature.apply(&contour);
    let force = integrate_geometry_force(&g, &contour, &q, &config.stress)?;
    write_force_tables(&sink, &format!("fluid_r{}", x.resolution), &force)?;
    if !force.converged {
        bail!(
            "force on the fluid contour did not converge: tail {:.3e} > {:.1e} x |F|; no bandwidth can be quoted",
            force.tail,
            force.tolerance
        );
    }
    let alpha = C64::new(x.alpha[0], x.alpha[1]);
    let plan = AntennaPlan::from_surface(&g, x.d_si, alpha)?;
    let report = bandwidth_report(&force, &plan, &x.fluid, x.fraction)?;
    sink.json("bandwidth_report.json", &report)?;

    let mut w = sink.csv(
        "antenna_plan.csv",
        &[&format!("{} positions x {} orientations", plan.antennas.len(), plan.orientations.len())],
        &["antenna", "x_m", "y_m", "nx", "ny", "weight_m"],
    )?;
    for (k, a) in plan.antennas.iter().enumerate() {
        w.write_record([k.to_string(), e(a.x_m), e(a.y_m), e(a.normal.0), e(a.normal.1), e(a.weight_m)])?;
    }
    w.flush()?;

    let lo = force.nodes.first().map(|n| n.xi).unwrap_or(1e-3);
    let xi_grid = log_probes(lo, force.xi_max, x.spectrum_points);
    let opts = StressOptions {
        vacuum_subtraction: config.stress.vacuum_subtraction,
        ..StressOptions::both_polarizations()
    };
    let spectrum = synthetic_smatrix(&g, &contour, &plan, &xi_grid, &opts)?;
    let path = sink.dir.join("smatrix.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "{}", sink.stamp())?;
    writeln!(f, "# S = i xi G / alpha with G_ij = pi <E_i E_j> / omega^2 at each antenna, alpha = {alpha}")?;
    spectrum.write_csv(&mut f)?;
    f.flush()?;
    Ok(report)
}

/// The full oracle suite as `oracles.csv`.
pub fn run_oracles(config: &RunConfig, out: &Path) -> Result<Vec<OracleReport>> {
    let sink = Sink::new(out, config.hash())?;
    let reports = run_oracle_suite()?;
    let mut w = sink.csv(
        "oracles.csv",
        &[],
        &["quantity", "oracle", "engine", "rel_error", "tolerance", "method", "pass"],
    )?;
    for r in &reports {
        w.write_record([
            r.quantity.clone(),
            e(r.oracle),
            e(r.engine),
            format!("{:.3e}", r.rel_error),
            format!("{:.1e}", r.tolerance),
            r.method.clone(),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_table_matches_expected_booleans() {
        let contours = canonical_contours(&FluidModel::saline(), 0.3).unwrap();
        let rows = physicality_rows(&contours);
        let physical: Vec<Option<bool>> = rows.iter().map(|r| r.physical).collect();
        assert_eq!(physical, [Some(false), Some(false), Some(true), Some(true), Some(true)]);
        assert_eq!(rows[0].passive, Some(false));
        assert_eq!(rows[1].conjugate_symmetric, Some(false));
        assert!(rows[0].witness.starts_with("static_limit"));
    }
}
