//! Discretized domains: grids, perfect-metal masks, and the closed surfaces
//! over which the stress tensor is integrated.
//!
//! Coordinates are physical (units of d) with the origin at the lower-left
//! corner of the domain. Cell (i, j) covers [iΔ, (i+1)Δ] × [jΔ, (j+1)Δ].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contour::Permittivity;
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 8;
/// Minimum distance, in cells, between a surface point and metal or the domain edge.
pub const MIN_CLEARANCE_CELLS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Perfect metal on all four sides of the domain.
    MetalBox,
    /// Perfect metal along y; the x ends continue as semi-infinite empty
    /// channels of the same cross-section (attached exactly, not truncated).
    OpenChannel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub dimension: u8,
    pub nx: usize,
    pub ny: usize,
    pub resolution: usize,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(dimension: u8, nx: usize, ny: usize, resolution: usize, boundary: Boundary) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::InvalidGeometry(format!(
                "resolution {resolution} is below the minimum of {MIN_RESOLUTION} points per d"
            )));
        }
        if nx == 0 || ny == 0 || (dimension == 1 && ny != 1) || !(1..=2).contains(&dimension) {
            return Err(Error::InvalidGeometry(format!(
                "bad grid shape {nx}x{ny} for dimension {dimension}"
            )));
        }
        Ok(Self {
            dimension,
            nx,
            ny,
            resolution,
            boundary,
        })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn extents(&self) -> (f64, f64) {
        let h = self.spacing();
        (self.nx as f64 * h, self.ny as f64 * h)
    }
}

/// Perfect-metal mask plus the ambient medium filling every non-metal cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialMap {
    nx: usize,
    ny: usize,
    metal: Vec<bool>,
    pub ambient: Permittivity,
}

impl MaterialMap {
    pub fn vacuum(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            metal: vec![false; nx * ny],
            ambient: Permittivity::vacuum(),
        }
    }

    pub fn from_mask(nx: usize, ny: usize, metal: Vec<bool>) -> Result<Self> {
        if metal.len() != nx * ny {
            return Err(Error::InvalidGeometry(format!(
                "mask has {} cells, expected {}",
                metal.len(),
                nx * ny
            )));
        }
        Ok(Self {
            nx,
            ny,
            metal,
            ambient: Permittivity::vacuum(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn is_metal(&self, i: usize, j: usize) -> bool {
        self.metal[i * self.ny + j]
    }

    pub fn set_metal(&mut self, r: CellRect) {
        for i in r.i0..r.i1 {
            for j in r.j0..r.j1 {
                self.metal[i * self.ny + j] = true;
            }
        }
    }

    pub fn metal_count(&self) -> usize {
        self.metal.iter().filter(|&&m| m).count()
    }

    /// Reflection x → −x about the domain center.
    pub fn mirrored_x(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.nx {
            for j in 0..self.ny {
                out.metal[i * self.ny + j] = self.metal[(self.nx - 1 - i) * self.ny + j];
            }
        }
        out
    }

    /// Connected metal regions (4-neighbour connectivity).
    pub fn metal_regions(&self) -> usize {
        let mut seen = vec![false; self.metal.len()];
        let mut count = 0;
        for start in 0..self.metal.len() {
            if !self.metal[start] || seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(k) = stack.pop() {
                let (i, j) = (k / self.ny, k % self.ny);
                let mut push = |ii: usize, jj: usize| {
                    let q = ii * self.ny + jj;
                    if self.metal[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                };
                if i > 0 {
                    push(i - 1, j);
                }
                if i + 1 < self.nx {
                    push(i + 1, j);
                }
                if j > 0 {
                    push(i, j - 1);
                }
                if j + 1 < self.ny {
                    push(i, j + 1);
                }
            }
        }
        count
    }
}

/// Half-open cell rectangle [i0, i1) × [j0, j1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CellRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub nx: f64,
    pub ny: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegrationSurface {
    pub points: Vec<SurfacePoint>,
    /// Index into the geometry's body list of the enclosed object.
    pub body: usize,
}

impl IntegrationSurface {
    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.w).sum()
    }

    pub fn closure_residual(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.w * p.nx, b + p.w * p.ny))
    }
}

/// Midpoint-rule quadrature along a closed polygon. Each edge is split into
/// pieces no longer than `max_step`; the polygon is closed when its last
/// vertex repeats the first.
pub fn build_surface_quadrature(vertices: &[(f64, f64)], max_step: f64, body: usize) -> Result<IntegrationSurface> {
    if vertices.len() < 4 || vertices.first() != vertices.last() {
        return Err(Error::SurfaceClearance(
            "integration surface must be a closed polygon (last vertex = first)".into(),
        ));
    }
    if !(max_step > 0.0) {
        return Err(Error::InvalidInput("surface step must be positive".into()));
    }
    let area2: f64 = vertices
        .windows(2)
        .map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1)
        .sum();
    if area2 == 0.0 {
        return Err(Error::SurfaceClearance("degenerate surface polygon".into()));
    }
    let orient = area2.signum();
    let mut points = Vec::new();
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let n = (len / max_step - 1e-9).ceil().max(1.0) as usize;
        let (nx, ny) = (orient * dy / len, -orient * dx / len);
        let wt = len / n as f64;
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64;
            points.push(SurfacePoint {
                x: a.0 + t * dx,
                y: a.1 + t * dy,
                nx,
                ny,
                w: wt,
            });
        }
    }
    Ok(IntegrationSurface { points, body })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub grid: Grid,
    pub materials: MaterialMap,
    pub surface: IntegrationSurface,
    pub bodies: Vec<CellRect>,
    pub name: String,
}

impl Geometry {
    /// Asserts the closure and clearance invariants of the surface.
    pub fn validate(&self) -> Result<()> {
        if self.grid.dimension == 1 {
            // the gap point is paired with the mirror's exterior face by the stress module
            return match self.surface.points.as_slice() {
                [p] if p.nx.abs() == 1.0 && p.ny == 0.0 => Ok(()),
                _ => Err(Error::SurfaceClearance(
                    "a 1D surface is a single gap point with normal along x".into(),
                )),
            };
        }
        let (cx, cy) = self.surface.closure_residual();
        let scale = self.surface.total_weight();
        if cx.abs() > 1e-12 * scale || cy.abs() > 1e-12 * scale {
            return Err(Error::SurfaceClearance(format!(
                "surface is not closed: sum w n = ({cx:.3e}, {cy:.3e})"
            )));
        }
        let r = self.grid.resolution as f64;
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let need = MIN_CLEARANCE_CELLS - 1e-9;
        for p in &self.surface.points {
            let (u, v) = (p.x * r, p.y * r);
            let edge = [u, v, nx as f64 - u, ny as f64 - v]
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if edge < need {
                return Err(Error::SurfaceClearance(format!(
                    "point ({:.4}, {:.4}) is {:.2} cells from the domain edge",
                    p.x, p.y, edge
                )));
            }
            let i_lo = (u - 3.0).floor().max(0.0) as usize;
            let i_hi = ((u + 3.0).ceil() as usize).min(nx);
            let j_lo = (v - 3.0).floor().max(0.0) as usize;
            let j_hi = ((v + 3.0).ceil() as usize).min(ny);
            for i in i_lo..i_hi {
                for j in j_lo..j_hi {
                    if !self.materials.is_metal(i, j) {
                        continue;
                    }
                    let du = (i as f64 - u).max(u - (i + 1) as f64).max(0.0);
                    let dv = (j as f64 - v).max(v - (j + 1) as f64).max(0.0);
                    if du.max(dv) < need {
                        return Err(Error::SurfaceClearance(format!(
                            "point ({:.4}, {:.4}) is within {:.2} cells of metal cell ({i}, {j}); \
                             at least {MIN_CLEARANCE_CELLS} required",
                            p.x,
                            p.y,
                            du.max(dv)
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

fn cells(len: f64, resolution: usize, what: &str) -> Result<usize> {
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::InvalidGeometry(format!("{what} must be positive, got {len}")));
    }
    let n = (len * resolution as f64).round();
    if n < 1.0 {
        return Err(Error::InvalidGeometry(format!(
            "{what} = {len} is below one cell at resolution {resolution}"
        )));
    }
    Ok(n as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enclosed {
    Left,
    Right,
}

/// Two square blocks of side `s` separated by d = 1, between sidewalls at gap `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PistonGeometry {
    pub s: f64,
    /// Block-to-sidewall gap; `None` removes the sidewalls.
    pub h: Option<f64>,
    pub sidewall_thickness: f64,
    /// Empty space between the blocks and the x ends of the domain.
    pub margin: f64,
    /// Vertical clearance used in place of the sidewalls when they are removed.
    pub open_margin: f64,
    pub surface_offset: f64,
    pub points_per_cell: usize,
    pub boundary: Boundary,
    pub enclosed: Enclosed,
}

impl Default for PistonGeometry {
    fn default() -> Self {
        Self {
            s: 1.0,
            h: Some(0.5),
            sidewall_thickness: 0.25,
            margin: 0.75,
            open_margin: 1.0,
            surface_offset: 0.25,
            points_per_cell: 1,
            boundary: Boundary::OpenChannel,
            enclosed: Enclosed::Left,
        }
    }
}

struct Layout {
    nx: usize,
    ny: usize,
    metal: Vec<CellRect>,
    bodies: Vec<CellRect>,
}

fn rectangle_surface(
    body: CellRect,
    body_index: usize,
    offset: f64,
    resolution: usize,
    points_per_cell: usize,
) -> Result<IntegrationSurface> {
    if points_per_cell == 0 || points_per_cell > 2 {
        return Err(Error::InvalidInput("points_per_cell must be 1 or 2".into()));
    }
    let off = cells(offset, resolution, "surface offset")? as f64;
    let h = 1.0 / resolution as f64;
    let x0 = (body.i0 as f64 - off) * h;
    let x1 = (body.i1 as f64 + off) * h;
    let y0 = (body.j0 as f64 - off) * h;
    let y1 = (body.j1 as f64 + off) * h;
    let verts = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)];
    build_surface_quadrature(&verts, h / points_per_cell as f64, body_index)
}

fn assemble(layout: Layout, grid: Grid, surface: IntegrationSurface, name: String) -> Result<Geometry> {
    let mut materials = MaterialMap::vacuum(layout.nx, layout.ny);
    for r in &layout.metal {
        materials.set_metal(*r);
    }
    let g = Geometry {
        grid,
        materials,
        surface,
        bodies: layout.bodies,
        name,
    };
    g.validate()?;
    Ok(g)
}

pub fn build_piston(params: &PistonGeometry, resolution: usize) -> Result<Geometry> {
    piston_like(params, resolution, false)
}

/// One block of the piston's size, centred in a mirror-symmetric domain.
pub fn single_block(params: &PistonGeometry, resolution: usize) -> Result<Geometry> {
    piston_like(params, resolution, true)
}

fn piston_like(p: &PistonGeometry, resolution: usize, single: bool) -> Result<Geometry> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::InvalidGeometry(format!(
            "resolution {resolution} is below the minimum of {MIN_RESOLUTION} points per d"
        )));
    }
    let s = cells(p.s, resolution, "block side s")?;
    let d = resolution;
    let m = cells(p.margin, resolution, "margin")?;
    if p.margin + 1e-12 < p.surface_offset + 0.5 {
        return Err(Error::InvalidGeometry(format!(
            "margin {} must leave 0.5d beyond the surface offset {}",
            p.margin, p.surface_offset
        )));
    }
    let (wall, gap) = match p.h {
        Some(h) => (cells(p.sidewall_thickness, resolution, "sidewall thickness")?, cells(h, resolution, "gap h")?),
        None => (0, cells(p.open_margin, resolution, "open margin")?),
    };
    let nx = if single { 2 * m + 2 * s + d } else { 2 * m + 2 * s + d };
    let ny = 2 * wall + 2 * gap + s;
    let (j0, j1) = (wall + gap, wall + gap + s);
    let mut bodies = Vec::new();
    if single {
        let i0 = (nx - s) / 2;
        if (nx - s) % 2 != 0 {
            return Err(Error::InvalidGeometry("single block cannot be centred on this grid".into()));
        }
        bodies.push(CellRect { i0, i1: i0 + s, j0, j1 });
    } else {
        bodies.push(CellRect { i0: m, i1: m + s, j0, j1 });
        bodies.push(CellRect {
            i0: m + s + d,
            i1: m + 2 * s + d,
            j0,
            j1,
        });
    }
    let mut metal = bodies.clone();
    if wall > 0 {
        metal.push(CellRect { i0: 0, i1: nx, j0: 0, j1: wall });
        metal.push(CellRect {
            i0: 0,
            i1: nx,
            j0: ny - wall,
            j1: ny,
        });
    }
    let body_index = match (single, p.enclosed) {
        (true, _) | (false, Enclosed::Left) => 0,
        (false, Enclosed::Right) => 1,
    };
    let surface = rectangle_surface(bodies[body_index], body_index, p.surface_offset, resolution, p.points_per_cell)?;
    let grid = Grid::new(2, nx, ny, resolution, p.boundary)?;
    let name = if single { "single_block" } else { "piston" };
    assemble(
        Layout {
            nx,
            ny,
            metal,
            bodies,
        },
        grid,
        surface,
        name.into(),
    )
}

/// A vacuum gap of width `separation` between two perfect mirrors, one cell each.
/// The surface is a single point at the gap centre with normal −x̂, i.e. the
/// gap-side face of a box around the right mirror.
pub fn build_parallel_plates_1d(separation: f64, resolution: usize) -> Result<Geometry> {
    let n = cells(separation, resolution, "separation")?;
    let grid = Grid::new(1, n + 2, 1, resolution, Boundary::MetalBox)?;
    let mut materials = MaterialMap::vacuum(n + 2, 1);
    let left = CellRect { i0: 0, i1: 1, j0: 0, j1: 1 };
    let right = CellRect {
        i0: n + 1,
        i1: n + 2,
        j0: 0,
        j1: 1,
    };
    materials.set_metal(left);
    materials.set_metal(right);
    let h = grid.spacing();
    let surface = IntegrationSurface {
        points: vec![SurfacePoint {
            x: (1.0 + n as f64 / 2.0) * h,
            y: 0.0,
            nx: -1.0,
            ny: 0.0,
            w: 1.0,
        }],
        body: 1,
    };
    Ok(Geometry {
        grid,
        materials,
        surface,
        bodies: vec![left, right],
        name: "parallel_plates_1d".into(),
    })
}

/// Loads a metal mask. Layout: `#` comments; one row `extent_x,extent_y,resolution`;
/// then `ny` rows of `nx` 0/1 entries, the first row being the bottom (j = 0).
pub fn load_mask_csv(path: &Path) -> Result<(usize, usize, usize, Vec<bool>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::InvalidGeometry(format!("{}: empty mask file", path.display())))??;
    let nums: std::result::Result<Vec<f64>, _> = header.iter().map(str::parse::<f64>).collect();
    let nums = nums.map_err(|e| Error::InvalidGeometry(format!("{}: bad header: {e}", path.display())))?;
    if nums.len() != 3 {
        return Err(Error::InvalidGeometry(format!(
            "{}: header must be extent_x,extent_y,resolution",
            path.display()
        )));
    }
    let res = nums[2] as usize;
    let nx = (nums[0] * res as f64).round() as usize;
    let ny = (nums[1] * res as f64).round() as usize;
    let mut by_row = Vec::with_capacity(ny);
    for rec in rows {
        let rec = rec?;
        if rec.len() != nx {
            return Err(Error::InvalidGeometry(format!(
                "{}: mask row {} has {} entries, expected {nx}",
                path.display(),
                by_row.len(),
                rec.len()
            )));
        }
        let row: std::result::Result<Vec<bool>, Error> = rec
            .iter()
            .map(|v| match v {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::InvalidGeometry(format!("mask entry '{other}' is not 0/1"))),
            })
            .collect();
        by_row.push(row?);
    }
    if by_row.len() != ny {
        return Err(Error::InvalidGeometry(format!(
            "{}: mask has {} rows, expected {ny}",
            path.display(),
            by_row.len()
        )));
    }
    let mut metal = vec![false; nx * ny];
    for (j, row) in by_row.iter().enumerate() {
        for (i, &m) in row.iter().enumerate() {
            metal[i * ny + j] = m;
        }
    }
    Ok((nx, ny, res, metal))
}

/// A geometry from a metal mask with a rectangular surface `[x0,x1]×[y0,y1]`
/// (units of d) around the body of interest.
pub fn geometry_from_mask(
    path: &Path,
    boundary: Boundary,
    rect: [f64; 4],
    points_per_cell: usize,
) -> Result<Geometry> {
    let (nx, ny, res, metal) = load_mask_csv(path)?;
    let grid = Grid::new(2, nx, ny, res, boundary)?;
    let materials = MaterialMap::from_mask(nx, ny, metal)?;
    let [x0, x1, y0, y1] = rect;
    let h = grid.spacing();
    let snap = |v: f64| (v / h).round() * h;
    let verts = [
        (snap(x0), snap(y0)),
        (snap(x1), snap(y0)),
        (snap(x1), snap(y1)),
        (snap(x0), snap(y1)),
        (snap(x0), snap(y0)),
    ];
    let surface = build_surface_quadrature(&verts, h / points_per_cell.max(1) as f64, 0)?;
    let g = Geometry {
        grid,
        materials,
        surface,
        bodies: Vec::new(),
        name: format!("mask:{}", path.display()),
    };
    g.validate()?;
    Ok(g)
}
