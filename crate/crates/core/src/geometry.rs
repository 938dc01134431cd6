//! Discretized lakes: a bounded domain on a uniform Cartesian grid, the depth
//! field `b`, the weighted measure `dν = b dm`, and the analytic unit-disk
//! Green's function used to validate the elliptic solver.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Smallest resolution accepted by [`build_lake`].
pub const MIN_RESOLUTION: usize = 16;

/// Lower clamp applied to depth values on faces touching the boundary.
pub const DEPTH_FLOOR: f64 = 1e-8;

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Uniform cell-centred grid. Cell `(i, j)` has centre
/// `origin + ((i + 1/2) h, (j + 1/2) h)` and flat index `j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn center_ij(&self, i: isize, j: isize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    #[inline]
    pub fn center(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        self.center_ij(i as isize, j as isize)
    }

    /// Grid index of the cell containing `p`, if it lies on the grid.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fi = ((p[0] - self.origin[0]) / self.h).floor();
        let fj = ((p[1] - self.origin[1]) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }
}

/// The four stencil directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    East,
    North,
    West,
    South,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::East, Dir::North, Dir::West, Dir::South];

    pub fn offset(self) -> (isize, isize) {
        match self {
            Dir::East => (1, 0),
            Dir::North => (0, 1),
            Dir::West => (-1, 0),
            Dir::South => (0, -1),
        }
    }
}

/// Continuum shape of the lake.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Disk { center: Point, radius: f64 },
    Rect { min: Point, max: Point },
}

impl Domain {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Domain::Disk { center, radius } => dist(p, center) < radius,
            Domain::Rect { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
        }
    }

    pub fn center(&self) -> Point {
        match *self {
            Domain::Disk { center, .. } => center,
            Domain::Rect { min, max } => [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0],
        }
    }

    /// Distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        match *self {
            Domain::Disk { center, radius } => (radius - dist(p, center)).max(0.0),
            Domain::Rect { min, max } => (p[0] - min[0])
                .min(max[0] - p[0])
                .min(p[1] - min[1])
                .min(max[1] - p[1])
                .max(0.0),
        }
    }

    /// Fraction `t ∈ (0, 1]` along the segment `inside → outside` at which
    /// the boundary is crossed.
    pub fn crossing(&self, inside: Point, outside: Point) -> f64 {
        let d = [outside[0] - inside[0], outside[1] - inside[1]];
        let t = match *self {
            Domain::Disk { center, radius } => {
                let p = [inside[0] - center[0], inside[1] - center[1]];
                let a = d[0] * d[0] + d[1] * d[1];
                let b = 2.0 * (p[0] * d[0] + p[1] * d[1]);
                let c = p[0] * p[0] + p[1] * p[1] - radius * radius;
                let disc = (b * b - 4.0 * a * c).max(0.0);
                // c < 0 so the positive root is well conditioned in this form.
                (2.0 * -c) / (b + disc.sqrt())
            }
            Domain::Rect { min, max } => {
                let mut t: f64 = 1.0;
                for ax in 0..2 {
                    if d[ax] > 0.0 {
                        t = t.min((max[ax] - inside[ax]) / d[ax]);
                    } else if d[ax] < 0.0 {
                        t = t.min((min[ax] - inside[ax]) / d[ax]);
                    }
                }
                t
            }
        };
        t.clamp(1e-12, 1.0)
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            Domain::Disk { radius, .. } => 2.0 * PI * radius,
            Domain::Rect { min, max } => 2.0 * ((max[0] - min[0]) + (max[1] - min[1])),
        }
    }

    /// Counterclockwise arclength coordinate of a boundary point, measured from
    /// the boundary point at polar angle 0 about the domain centre.
    pub fn arclength(&self, p: Point) -> f64 {
        match *self {
            Domain::Disk { center, radius } => {
                let a = (p[1] - center[1]).atan2(p[0] - center[0]);
                let a = if a < 0.0 { a + 2.0 * PI } else { a };
                a * radius
            }
            Domain::Rect { min, max } => {
                let (w, hgt) = (max[0] - min[0], max[1] - min[1]);
                let cy = (min[1] + max[1]) / 2.0;
                let per = self.perimeter();
                // Nearest side decides the parametrization.
                let dr = (p[0] - max[0]).abs();
                let dt = (p[1] - max[1]).abs();
                let dl = (p[0] - min[0]).abs();
                let db = (p[1] - min[1]).abs();
                let m = dr.min(dt).min(dl).min(db);
                let s = if m == dr {
                    let s = p[1] - cy;
                    if s < 0.0 {
                        s + per
                    } else {
                        s
                    }
                } else if m == dt {
                    hgt / 2.0 + (max[0] - p[0])
                } else if m == dl {
                    hgt / 2.0 + w + (max[1] - p[1])
                } else {
                    1.5 * hgt + w + (p[0] - min[0])
                };
                s.rem_euclid(per)
            }
        }
    }

    /// Inverse of [`Domain::arclength`].
    pub fn point_at(&self, s: f64) -> Point {
        match *self {
            Domain::Disk { center, radius } => {
                let a = s / radius;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            Domain::Rect { min, max } => {
                let (w, hgt) = (max[0] - min[0], max[1] - min[1]);
                let cy = (min[1] + max[1]) / 2.0;
                let s = s.rem_euclid(self.perimeter());
                if s < hgt / 2.0 {
                    [max[0], cy + s]
                } else if s < hgt / 2.0 + w {
                    [max[0] - (s - hgt / 2.0), max[1]]
                } else if s < 1.5 * hgt + w {
                    [min[0], max[1] - (s - hgt / 2.0 - w)]
                } else if s < 1.5 * hgt + 2.0 * w {
                    [min[0] + (s - 1.5 * hgt - w), min[1]]
                } else {
                    [max[0], min[1] + (s - 1.5 * hgt - 2.0 * w)]
                }
            }
        }
    }

    /// Polar angle (in `[0, 2π)`) of a point about the domain centre.
    pub fn angle(&self, p: Point) -> f64 {
        let c = self.center();
        let a = (p[1] - c[1]).atan2(p[0] - c[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    pub fn outward_normal(&self, p: Point) -> Point {
        match *self {
            Domain::Disk { center, .. } => {
                let v = [p[0] - center[0], p[1] - center[1]];
                let n = norm(v);
                [v[0] / n, v[1] / n]
            }
            Domain::Rect { min, max } => {
                let d = [
                    ((p[0] - max[0]).abs(), [1.0, 0.0]),
                    ((p[1] - max[1]).abs(), [0.0, 1.0]),
                    ((p[0] - min[0]).abs(), [-1.0, 0.0]),
                    ((p[1] - min[1]).abs(), [0.0, -1.0]),
                ];
                d.iter().min_by(|a, b| a.0.total_cmp(&b.0)).map(|x| x.1).unwrap()
            }
        }
    }
}

/// Depth field presets.
#[derive(Debug, Clone, PartialEq)]
pub enum DepthProfile {
    /// `b(x) = 1 − |x|²/2`, deepest at the centre.
    InteriorMax,
    /// `b(x) = 1 + x₁`, deepest at `(1, 0)` on the boundary.
    BoundaryMax,
    Constant,
    /// `b(x) = (1 − |x|²)^{1/2}`, vanishing on the rim.
    Degenerate,
    /// Per-cell values (tiny fixture lakes); boundary points take the value of
    /// the nearest cell.
    Cells(Vec<f64>),
}

impl DepthProfile {
    fn analytic(&self, p: Point) -> Option<f64> {
        let r2 = p[0] * p[0] + p[1] * p[1];
        match self {
            DepthProfile::InteriorMax => Some(1.0 - r2 / 2.0),
            DepthProfile::BoundaryMax => Some((1.0 + p[0]).max(0.0)),
            DepthProfile::Constant => Some(1.0),
            DepthProfile::Degenerate => Some((1.0 - r2).max(0.0).sqrt()),
            DepthProfile::Cells(_) => None,
        }
    }
}

/// Point where a stencil arm of an interior cell crosses `∂D`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryNode {
    /// Grid index of the interior cell owning the arm.
    pub cell: usize,
    pub dir: Dir,
    /// Crossing distance as a fraction of `h`.
    pub theta: f64,
    pub point: Point,
    pub normal: Point,
    /// Counterclockwise arclength coordinate.
    pub arclength: f64,
    /// Trapezoid arclength weight along the ordered trace.
    pub weight: f64,
}

/// A discretized lake `(D, b)`.
#[derive(Debug, Clone)]
pub struct Lake {
    pub grid: Grid,
    pub domain: Domain,
    pub profile: DepthProfile,
    /// Depth per grid cell, zero off the mask.
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
    /// Grid indices of interior cells in row-major order.
    pub interior: Vec<usize>,
    /// Grid index → position in `interior` (`usize::MAX` off the mask).
    pub slot: Vec<usize>,
    pub cell_area: f64,
    pub diameter: f64,
    /// Boundary trace ordered counterclockwise from angle 0.
    pub boundary: Vec<BoundaryNode>,
    pub preset_id: String,
}

pub const PRESETS: [&str; 5] = [
    "disk_interior_max_b",
    "disk_boundary_max_b",
    "disk_constant_b",
    "disk_degenerate_b",
    "rect_constant_b",
];

/// Builds one of the named lakes with `resolution` cells across the
/// square `[-1, 1]` extent of the domain.
pub fn build_lake(preset: &str, resolution: usize) -> Result<Lake> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "resolution {resolution} is below the minimum {MIN_RESOLUTION}"
        )));
    }
    let unit_disk = Domain::Disk { center: [0.0, 0.0], radius: 1.0 };
    let h = 2.0 / resolution as f64;
    let square = Grid { nx: resolution, ny: resolution, h, origin: [-1.0, -1.0] };
    let (grid, domain, profile) = match preset {
        "disk_interior_max_b" => (square, unit_disk, DepthProfile::InteriorMax),
        "disk_boundary_max_b" => (square, unit_disk, DepthProfile::BoundaryMax),
        "disk_constant_b" => (square, unit_disk, DepthProfile::Constant),
        "disk_degenerate_b" => (square, unit_disk, DepthProfile::Degenerate),
        "rect_constant_b" => {
            let ny = resolution / 2;
            let half = ny as f64 * h / 2.0;
            (
                Grid { nx: resolution, ny, h, origin: [-1.0, -half] },
                Domain::Rect { min: [-1.0, -half], max: [1.0, half] },
                DepthProfile::Constant,
            )
        }
        other => return Err(Error::Config(format!("unknown lake preset `{other}`"))),
    };
    Lake::new(grid, domain, profile, preset)
}

impl Lake {
    /// Rectangular lake made of exactly `nx × ny` cells of side `spacing`
    /// (used for the exhaustive-enumeration fixtures).
    pub fn tiny_rect(nx: usize, ny: usize, spacing: f64, depth: Option<Vec<f64>>) -> Result<Lake> {
        if nx == 0 || ny == 0 || !(spacing > 0.0) {
            return Err(Error::Config("tiny lake needs nx, ny ≥ 1 and spacing > 0".into()));
        }
        let profile = match depth {
            Some(d) => {
                if d.len() != nx * ny {
                    return Err(Error::Config(format!(
                        "tiny lake depth has {} values, expected {}",
                        d.len(),
                        nx * ny
                    )));
                }
                DepthProfile::Cells(d)
            }
            None => DepthProfile::Cells(vec![1.0; nx * ny]),
        };
        let grid = Grid { nx, ny, h: spacing, origin: [0.0, 0.0] };
        let domain = Domain::Rect { min: [0.0, 0.0], max: [nx as f64 * spacing, ny as f64 * spacing] };
        Lake::new(grid, domain, profile, "tiny_rect")
    }

    fn new(grid: Grid, domain: Domain, profile: DepthProfile, preset: &str) -> Result<Lake> {
        let n = grid.len();
        let mut mask = vec![false; n];
        let mut depth = vec![0.0; n];
        for (k, m) in mask.iter_mut().enumerate() {
            let c = grid.center(k);
            if domain.contains(c) {
                *m = true;
                depth[k] = match &profile {
                    DepthProfile::Cells(v) => v[k],
                    p => p.analytic(c).unwrap(),
                };
            }
        }
        let interior: Vec<usize> = (0..n).filter(|&k| mask[k]).collect();
        if interior.is_empty() {
            return Err(Error::Config("lake has no interior cell at this resolution".into()));
        }
        if let Some(&k) = interior.iter().find(|&&k| !(depth[k] > 0.0)) {
            return Err(Error::Config(format!("depth must be positive inside D (cell {k})")));
        }
        let mut slot = vec![usize::MAX; n];
        for (s, &k) in interior.iter().enumerate() {
            slot[k] = s;
        }

        let mut lake = Lake {
            grid,
            domain,
            profile,
            depth,
            mask,
            interior,
            slot,
            cell_area: 0.0,
            diameter: 0.0,
            boundary: Vec::new(),
            preset_id: preset.to_string(),
        };
        lake.cell_area = lake.grid.h * lake.grid.h;
        lake.boundary = lake.trace_boundary();
        lake.diameter = lake.compute_diameter();
        Ok(lake)
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.mask[k]
    }

    /// Neighbouring grid index in direction `dir`, `None` if off the grid.
    pub fn neighbor(&self, k: usize, dir: Dir) -> Option<usize> {
        let (i, j) = self.grid.coords(k);
        let (di, dj) = dir.offset();
        let (ni, nj) = (i as isize + di, j as isize + dj);
        if ni < 0 || nj < 0 || ni >= self.grid.nx as isize || nj >= self.grid.ny as isize {
            None
        } else {
            Some(self.grid.index(ni as usize, nj as usize))
        }
    }

    /// Depth at an arbitrary point of `D̄`.
    pub fn depth_at(&self, p: Point) -> f64 {
        match &self.profile {
            DepthProfile::Cells(v) => {
                let k = self
                    .interior
                    .iter()
                    .copied()
                    .min_by(|&a, &b| dist(self.grid.center(a), p).total_cmp(&dist(self.grid.center(b), p)))
                    .unwrap();
                v[k]
            }
            prof => prof.analytic(p).unwrap(),
        }
    }

    /// `|D|_ν = Σ b h²`.
    pub fn weighted_area(&self) -> f64 {
        self.interior.iter().map(|&k| self.depth[k]).sum::<f64>() * self.cell_area
    }

    pub fn max_depth(&self) -> f64 {
        self.interior.iter().map(|&k| self.depth[k]).fold(f64::MIN, f64::max)
    }

    /// Interior cells with at least one stencil arm crossing `∂D`.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let mut cells: Vec<usize> = self.boundary.iter().map(|n| n.cell).collect();
        cells.sort_unstable();
        cells.dedup();
        cells
    }

    pub fn dist_to_boundary(&self, p: Point) -> f64 {
        self.domain.dist_to_boundary(p)
    }

    fn trace_boundary(&self) -> Vec<BoundaryNode> {
        let g = &self.grid;
        let mut nodes = Vec::new();
        for &k in &self.interior {
            let (i, j) = g.coords(k);
            for dir in Dir::ALL {
                let outside = match self.neighbor(k, dir) {
                    Some(nk) => !self.mask[nk],
                    None => true,
                };
                if !outside {
                    continue;
                }
                let (di, dj) = dir.offset();
                let pin = g.center(k);
                let pout = g.center_ij(i as isize + di, j as isize + dj);
                let theta = self.domain.crossing(pin, pout);
                let point = [pin[0] + theta * (pout[0] - pin[0]), pin[1] + theta * (pout[1] - pin[1])];
                nodes.push(BoundaryNode {
                    cell: k,
                    dir,
                    theta,
                    point,
                    normal: self.domain.outward_normal(point),
                    arclength: self.domain.arclength(point),
                    weight: 0.0,
                });
            }
        }
        nodes.sort_by(|a, b| a.arclength.total_cmp(&b.arclength).then(a.cell.cmp(&b.cell)));
        let per = self.domain.perimeter();
        let m = nodes.len();
        let s: Vec<f64> = nodes.iter().map(|n| n.arclength).collect();
        for (idx, node) in nodes.iter_mut().enumerate() {
            let prev = if idx == 0 { s[m - 1] - per } else { s[idx - 1] };
            let next = if idx + 1 == m { s[0] + per } else { s[idx + 1] };
            node.weight = (next - prev) / 2.0;
        }
        nodes
    }

    fn compute_diameter(&self) -> f64 {
        let mut pts: Vec<Point> = self.boundary_cells().iter().map(|&k| self.grid.center(k)).collect();
        if pts.is_empty() {
            pts = self.interior.iter().map(|&k| self.grid.center(k)).collect();
        }
        let mut d: f64 = 0.0;
        for (a, pa) in pts.iter().enumerate() {
            for pb in &pts[a + 1..] {
                d = d.max(dist(*pa, *pb));
            }
        }
        d
    }

    /// Flood fill of the interior mask from its first cell, and of the
    /// exterior from the grid rim; both must cover their sets for `D` to be a
    /// discrete simply connected region.
    pub fn is_simply_connected(&self) -> bool {
        let n = self.grid.len();
        let fill = |start: &[usize], inside: bool| -> usize {
            let mut seen = vec![false; n];
            let mut queue: VecDeque<usize> = VecDeque::new();
            for &s in start {
                if self.mask[s] == inside && !seen[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
            let mut count = 0;
            while let Some(k) = queue.pop_front() {
                count += 1;
                for dir in Dir::ALL {
                    if let Some(nk) = self.neighbor(k, dir) {
                        if self.mask[nk] == inside && !seen[nk] {
                            seen[nk] = true;
                            queue.push_back(nk);
                        }
                    }
                }
            }
            count
        };
        if fill(&self.interior[..1], true) != self.interior.len() {
            return false;
        }
        let exterior = n - self.interior.len();
        if exterior == 0 {
            return true;
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let rim: Vec<usize> = (0..n)
            .filter(|&k| {
                let (i, j) = self.grid.coords(k);
                i == 0 || j == 0 || i + 1 == nx || j + 1 == ny
            })
            .collect();
        fill(&rim, false) == exterior
    }

    /// Grid index of the interior cell whose centre is nearest to `p`.
    pub fn nearest_interior(&self, p: Point) -> usize {
        if let Some(k) = self.grid.locate(p) {
            if self.mask[k] {
                return k;
            }
        }
        self.interior
            .iter()
            .copied()
            .min_by(|&a, &b| dist(self.grid.center(a), p).total_cmp(&dist(self.grid.center(b), p)))
            .unwrap()
    }
}

fn require_unit_disk_point(p: Point) -> Result<()> {
    if !(norm(p) < 1.0) {
        return Err(Error::Domain(format!("point ({}, {}) is not strictly inside the unit disk", p[0], p[1])));
    }
    Ok(())
}

/// Dirichlet Green's function of `−Δ` on the unit disk,
/// `G(x, y) = (1/2π) ln(|x − y*| |y| / |x − y|)` with `y* = y/|y|²`.
pub fn green_disk(x: Point, y: Point) -> Result<f64> {
    require_unit_disk_point(x)?;
    require_unit_disk_point(y)?;
    let r = dist(x, y);
    if r == 0.0 {
        return Err(Error::Domain("green_disk: coincident points".into()));
    }
    Ok(green_disk_unchecked(x, y))
}

pub(crate) fn green_disk_unchecked(x: Point, y: Point) -> f64 {
    let ry = norm(y);
    let inner = if ry == 0.0 {
        1.0
    } else {
        // |x − y*| |y| = | |y| x − y/|y| |
        let v = [ry * x[0] - y[0] / ry, ry * x[1] - y[1] / ry];
        norm(v)
    };
    (inner / dist(x, y)).ln() / (2.0 * PI)
}

/// Mean of `G(x_c, ·)` over the square cell of side `h` centred at `x_c`.
/// The logarithmic singularity is averaged exactly; the image part is taken at
/// the centre.
pub(crate) fn green_disk_self_cell(xc: Point, h: f64) -> f64 {
    let a = h / 2.0;
    let mean_ln_r = a.ln() + std::f64::consts::LN_2 / 2.0 - 1.5 + PI / 4.0;
    let r2 = xc[0] * xc[0] + xc[1] * xc[1];
    (-mean_ln_r + (1.0 - r2).ln()) / (2.0 * PI)
}

fn require_disk(lake: &Lake) -> Result<()> {
    match lake.domain {
        Domain::Disk { center, radius } if center == [0.0, 0.0] && radius == 1.0 => Ok(()),
        _ => Err(Error::Domain(format!(
            "lake `{}` is not the unit disk; no analytic Green's function",
            lake.preset_id
        ))),
    }
}

/// `H(x, y) = (1/2π) ln(diam(D)/|x − y|) − G(x, y)` on a unit-disk lake.
pub fn h_kernel(lake: &Lake, x: Point, y: Point) -> Result<f64> {
    require_disk(lake)?;
    let g = green_disk(x, y)?;
    Ok((lake.diameter / dist(x, y)).ln() / (2.0 * PI) - g)
}

/// Upper and lower bounds on `H` for the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    pub upper: f64,
    pub lower: f64,
}

pub fn h_kernel_bounds(lake: &Lake, x: Point, y: Point) -> KernelBounds {
    let dx = lake.dist_to_boundary(x);
    let dy = lake.dist_to_boundary(y);
    let m = dist(x, y).max(dx).max(dy);
    let plus = norm([x[0] + y[0], x[1] + y[1]]);
    KernelBounds {
        upper: (lake.diameter / m).ln() / (2.0 * PI),
        lower: (lake.diameter / (plus + 2.0 * dx.max(dy))).ln() / (2.0 * PI),
    }
}
