//! Weighted elliptic operator `𝓛 = −(1/b) div(b⁻¹ ∇·)` on a lake, its inverse
//! `𝒦`, and the irrotational background flow `q`.
//!
//! The strong form `−div(b⁻¹∇ψ) = b ζ` is discretized with the 5-point
//! stencil. Interior faces use the harmonic mean of the adjacent `1/b`
//! values; arms that leave `D` end on the boundary crossing point at distance
//! `θh` (symmetric Shortley–Weller treatment), which keeps the matrix
//! symmetric and second-order accurate on curved boundaries.

mod cholesky;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cholesky::EnvelopeCholesky;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::{Domain, Lake, DEPTH_FLOOR};

/// Default relative residual required of every solve.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Compatibility tolerance on `∫_{∂D} ν dσ`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

const MAX_REFINEMENTS: usize = 3;

/// Assembled operator with a cached factorization; immutable and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    lake: Arc<Lake>,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    /// Coupling of each boundary node (in trace order) to its row.
    boundary_coef: Vec<f64>,
    boundary_row: Vec<usize>,
    factor: EnvelopeCholesky,
    tolerance: f64,
}

/// Face coefficient for `b⁻¹`: harmonic mean of `1/b_p` and `1/b_q`.
#[inline]
fn face_coefficient(bp: f64, bq: f64) -> f64 {
    2.0 / (bp + bq)
}

pub fn assemble_operator(lake: Arc<Lake>) -> Result<OperatorHandle> {
    let n = lake.n_interior();
    if n == 0 {
        return Err(Error::Domain("operator has no unknowns".into()));
    }
    let h2 = lake.grid.h * lake.grid.h;
    let mut diag = vec![0.0; n];
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(4 * n);
    let mut vals = Vec::with_capacity(4 * n);
    row_ptr.push(0);
    for (i, &k) in lake.interior.iter().enumerate() {
        for dir in crate::geometry::Dir::ALL {
            if let Some(nk) = lake.neighbor(k, dir) {
                if lake.mask[nk] {
                    let c = face_coefficient(lake.depth[k], lake.depth[nk]) / h2;
                    diag[i] += c;
                    cols.push(lake.slot[nk]);
                    vals.push(-c);
                }
            }
        }
        row_ptr.push(cols.len());
    }
    let mut boundary_coef = Vec::with_capacity(lake.boundary.len());
    let mut boundary_row = Vec::with_capacity(lake.boundary.len());
    for node in &lake.boundary {
        let i = lake.slot[node.cell];
        let bg = lake.depth_at(node.point).max(DEPTH_FLOOR);
        let bp = lake.depth[node.cell].max(DEPTH_FLOOR);
        let c = face_coefficient(bp, bg) / (node.theta * h2);
        diag[i] += c;
        boundary_coef.push(c);
        boundary_row.push(i);
    }

    let mut lower = Vec::with_capacity(n + 2 * n);
    for i in 0..n {
        lower.push((i, i, diag[i]));
        for p in row_ptr[i]..row_ptr[i + 1] {
            if cols[p] < i {
                lower.push((i, cols[p], vals[p]));
            }
        }
    }
    let factor = EnvelopeCholesky::factor(n, &lower)?;
    Ok(OperatorHandle {
        lake,
        diag,
        row_ptr,
        cols,
        vals,
        boundary_coef,
        boundary_row,
        factor,
        tolerance: DEFAULT_TOLERANCE,
    })
}

impl OperatorHandle {
    pub fn lake(&self) -> &Lake {
        &self.lake
    }

    pub fn lake_arc(&self) -> Arc<Lake> {
        Arc::clone(&self.lake)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal entry and off-diagonal couplings `(grid index, value)` of the
    /// row belonging to grid cell `k`.
    pub fn stencil_row(&self, k: usize) -> Option<(f64, Vec<(usize, f64)>)> {
        let i = *self.lake.slot.get(k)?;
        if i == usize::MAX {
            return None;
        }
        let offs = (self.row_ptr[i]..self.row_ptr[i + 1])
            .map(|p| (self.lake.interior[self.cols[p]], self.vals[p]))
            .collect();
        Some((self.diag[i], offs))
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dim() {
            let mut s = self.diag[i] * x[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p]];
            }
            out[i] = s;
        }
    }

    /// Dense copy of the interior matrix (small lakes only).
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[p])] = self.vals[p];
            }
        }
        m
    }

    fn gather(&self, f: &Field) -> Vec<f64> {
        self.lake.interior.iter().map(|&k| f[k]).collect()
    }

    fn scatter(&self, x: &[f64]) -> Field {
        let mut f = Field::zeros(&self.lake);
        for (i, &k) in self.lake.interior.iter().enumerate() {
            f[k] = x[i];
        }
        f
    }

    /// Applies the discrete operator `−div(b⁻¹∇·)` with zero boundary values.
    pub fn apply_operator(&self, u: &Field) -> Field {
        let x = self.gather(u);
        let mut y = vec![0.0; x.len()];
        self.matvec(&x, &mut y);
        self.scatter(&y)
    }

    /// Discrete form `a(u, v) = Σ b⁻¹ ∇u·∇v h²` for fields vanishing on `∂D`.
    pub fn bilinear_form(&self, u: &Field, v: &Field) -> f64 {
        let av = self.apply_operator(v);
        self.lake.interior.iter().map(|&k| u[k] * av[k]).sum::<f64>() * self.lake.cell_area
    }

    /// Solves `A x = rhs` with iterative refinement until the relative
    /// residual meets the handle's tolerance.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        if !rhs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("right-hand side of the elliptic solve".into()));
        }
        let mut x = rhs.to_vec();
        self.factor.solve_in_place(&mut x);
        let mut r = vec![0.0; rhs.len()];
        for step in 0..=MAX_REFINEMENTS {
            self.matvec(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(rhs) {
                *ri = bi - *ri;
            }
            let rel = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if rel <= self.tolerance {
                return Ok(x);
            }
            if step == MAX_REFINEMENTS {
                return Err(Error::LinearSolve { iterations: step, residual: rel });
            }
            self.factor.solve_in_place(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        unreachable!()
    }

    /// `𝒦ζ`: solves `−div(b⁻¹∇ψ) = b ζ` with `ψ = 0` on `∂D`.
    pub fn apply_k(&self, zeta: &Field) -> Result<Field> {
        let rhs: Vec<f64> = self.lake.interior.iter().map(|&k| self.lake.depth[k] * zeta[k]).collect();
        let x = self.solve(&rhs)?;
        Ok(self.scatter(&x))
    }

    /// Irrotational background flow for the boundary flux `ν`.
    pub fn solve_background(&self, flux: &BoundaryFlux) -> Result<Field> {
        let data = boundary_potential(&self.lake, flux)?;
        let mut rhs = vec![0.0; self.dim()];
        for ((c, &row), g) in self.boundary_coef.iter().zip(&self.boundary_row).zip(&data) {
            rhs[row] += c * g;
        }
        let x = self.solve(&rhs)?;
        Ok(self.scatter(&x))
    }
}

/// Normal flux `ν` prescribed on `∂D`, as a function of the polar angle of
/// the boundary point about the domain centre.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryFlux {
    #[default]
    Zero,
    /// `ν(θ) = amplitude · cos θ`.
    Cosine {
        #[serde(default = "unit")]
        amplitude: f64,
    },
    Constant { value: f64 },
    /// Periodic piecewise-linear `(angle, value)` table minus `offset`.
    Table {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        offset: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl BoundaryFlux {
    pub fn value_at_angle(&self, theta: f64) -> f64 {
        match self {
            BoundaryFlux::Zero => 0.0,
            BoundaryFlux::Cosine { amplitude } => amplitude * theta.cos(),
            BoundaryFlux::Constant { value } => *value,
            BoundaryFlux::Table { points, offset } => periodic_interp(points, theta) - offset,
        }
    }

    fn value_at(&self, domain: &Domain, s: f64) -> f64 {
        match self {
            BoundaryFlux::Zero => 0.0,
            _ => self.value_at_angle(domain.angle(domain.point_at(s))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryFlux::Table { points, .. } = self {
            if points.len() < 2 {
                return Err(Error::Config("flux table needs at least two (angle, value) pairs".into()));
            }
            if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                return Err(Error::Config("flux table contains non-finite entries".into()));
            }
            if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return Err(Error::Config("flux table angles must be strictly increasing".into()));
            }
        }
        Ok(())
    }

    /// `∫_{∂D} ν dσ`.
    pub fn total_integral(&self, domain: &Domain) -> f64 {
        let per = domain.perimeter();
        integrate(|s| self.value_at(domain, s), 0.0, per, 2048)
    }

    /// Returns a copy of a tabulated flux shifted by its boundary mean so that
    /// it integrates to zero, together with the subtracted mean.
    pub fn mean_corrected(&self, domain: &Domain) -> (BoundaryFlux, f64) {
        match self {
            BoundaryFlux::Table { points, offset } => {
                let mean = self.total_integral(domain) / domain.perimeter();
                (BoundaryFlux::Table { points: points.clone(), offset: offset + mean }, mean)
            }
            other => (other.clone(), 0.0),
        }
    }
}

fn periodic_interp(points: &[[f64; 2]], theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let t0 = points[0][0];
    let t = t0 + (theta - t0).rem_euclid(two_pi);
    let n = points.len();
    for w in points.windows(2) {
        if t >= w[0][0] && t <= w[1][0] {
            let a = (t - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + a * (w[1][1] - w[0][1]);
        }
    }
    // wrap segment from the last node back to the first
    let (last, first) = (points[n - 1], points[0]);
    let span = first[0] + two_pi - last[0];
    let a = (t - last[0]) / span;
    last[1] + a * (first[1] - last[1])
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite 5-point Gauss–Legendre rule on `panels` equal panels.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        let part: f64 = GL5_NODES.iter().zip(&GL5_WEIGHTS).map(|(x, wt)| wt * f(mid + 0.5 * w * x)).sum();
        total += 0.5 * w * part;
    }
    total
}

/// Dirichlet data `Q(s) = ∫₀^s ν dσ` at the boundary trace, after checking
/// compatibility.
pub fn boundary_potential(lake: &Lake, flux: &BoundaryFlux) -> Result<Vec<f64>> {
    flux.validate()?;
    let dom = &lake.domain;
    let per = dom.perimeter();
    let nu = |s: f64| flux.value_at(dom, s);
    let mut q = Vec::with_capacity(lake.boundary.len());
    let mut acc = 0.0;
    let mut prev = 0.0;
    for node in &lake.boundary {
        acc += integrate(nu, prev, node.arclength, 2);
        prev = node.arclength;
        q.push(acc);
    }
    let total = acc + integrate(nu, prev, per, 2);
    if !total.is_finite() || total.abs() > COMPATIBILITY_TOLERANCE {
        return Err(Error::Compatibility { integral: total });
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_lake;

    fn disk(res: usize) -> Arc<Lake> {
        Arc::new(build_lake("disk_constant_b", res).unwrap())
    }

    #[test]
    fn constant_depth_interior_rows_are_the_five_point_laplacian() {
        let lake = disk(32);
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let h2 = lake.grid.h * lake.grid.h;
        let k = lake.grid.index(16, 16);
        let (d, offs) = op.stencil_row(k).unwrap();
        assert!((d - 4.0 / h2).abs() < 1e-9);
        assert_eq!(offs.len(), 4);
        assert!(offs.iter().all(|&(_, v)| (v + 1.0 / h2).abs() < 1e-9));
    }

    #[test]
    fn zero_source_gives_zero() {
        let lake = disk(32);
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let psi = op.apply_k(&Field::zeros(&lake)).unwrap();
        assert!(psi.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kzeta_positive_for_nonnegative_source() {
        let lake = Arc::new(build_lake("disk_interior_max_b", 32).unwrap());
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let mut z = Field::zeros(&lake);
        let k = lake.nearest_interior([0.3, -0.2]);
        z[k] = 1.0;
        let psi = op.apply_k(&z).unwrap();
        assert!(lake.interior.iter().all(|&c| psi[c] > 0.0));
    }

    #[test]
    fn background_zero_and_constant_flux() {
        let lake = disk(32);
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let q = op.solve_background(&BoundaryFlux::Zero).unwrap();
        assert!(q.0.iter().all(|&v| v == 0.0));
        match op.solve_background(&BoundaryFlux::Constant { value: 1.0 }) {
            Err(Error::Compatibility { integral }) => assert!((integral - 2.0 * PI).abs() < 1e-9),
            other => panic!("expected compatibility rejection, got {other:?}"),
        }
    }

    #[test]
    fn cosine_flux_gives_linear_background() {
        let lake = disk(48);
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 1.0 }).unwrap();
        let err = lake
            .interior
            .iter()
            .map(|&k| (q[k] - lake.grid.center(k)[1]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!((q.sample(&lake, [0.0, 0.5]) - 0.5).abs() < lake.grid.h);
    }

    #[test]
    fn table_flux_is_mean_corrected() {
        let lake = disk(32);
        let flux = BoundaryFlux::Table { points: vec![[0.0, 1.0], [PI, 0.0], [1.5 * PI, 0.5]], offset: 0.0 };
        assert!(boundary_potential(&lake, &flux).is_err());
        let (fixed, mean) = flux.mean_corrected(&lake.domain);
        assert!(mean > 0.0);
        assert!(fixed.total_integral(&lake.domain).abs() < 1e-9);
        assert!(boundary_potential(&lake, &fixed).is_ok());
    }

    #[test]
    fn rect_background_is_linear_too() {
        let lake = Arc::new(build_lake("rect_constant_b", 32).unwrap());
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 1.0 }).unwrap();
        let lap = op.apply_operator(&q);
        let interior_rows: Vec<usize> = lake
            .interior
            .iter()
            .copied()
            .filter(|&k| !lake.boundary.iter().any(|n| n.cell == k))
            .collect();
        assert!(interior_rows.iter().all(|&k| lap[k].abs() < 1e-6));
    }

    #[test]
    fn k_matches_dense_inverse_and_is_self_adjoint() {
        let depth: Vec<f64> = (0..64).map(|k| 1.0 + 0.5 * ((k * 7 % 11) as f64 / 11.0)).collect();
        let lake = Arc::new(Lake::tiny_rect(8, 8, 0.125, Some(depth)).unwrap());
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let dense = op.dense_matrix();
        assert!((&dense - dense.transpose()).abs().max() < 1e-12);
        let inv = dense.clone().try_inverse().unwrap();
        let z1 = Field::from_fn(&lake, |p| (3.0 * p[0]).sin() + p[1]);
        let z2 = Field::from_fn(&lake, |p| (p[0] * p[1] * 5.0).cos());
        let k1 = op.apply_k(&z1).unwrap();
        let k2 = op.apply_k(&z2).unwrap();
        let rhs = nalgebra::DVector::from_iterator(64, lake.interior.iter().map(|&k| lake.depth[k] * z1[k]));
        let want = &inv * rhs;
        for (i, &k) in lake.interior.iter().enumerate() {
            assert!((k1[k] - want[i]).abs() < 1e-12 * want.amax());
        }
        let a = z1.dot_nu(&k2, &lake);
        let b = z2.dot_nu(&k1, &lake);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        // a(Kζ, v) = ⟨ζ, v⟩_ν
        assert!((op.bilinear_form(&k1, &z2) - z1.dot_nu(&z2, &lake)).abs() < 1e-10);
    }
}
