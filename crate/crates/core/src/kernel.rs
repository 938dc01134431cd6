//! Validation of the disk kernel bounds and of the Green's-function
//! representation of `𝒦`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::elliptic::OperatorHandle;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::geometry::{dist, green_disk_self_cell, green_disk_unchecked, h_kernel, h_kernel_bounds, Lake, Point};

/// Allowed floating-point slack on the upper bound.
pub const UPPER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelTestConfig {
    pub pairs: usize,
    pub seed: u64,
    /// Patch radii for the boundedness sweep of the correction term.
    pub radii: [f64; 4],
}

impl Default for KernelTestConfig {
    fn default() -> Self {
        KernelTestConfig { pairs: 1000, seed: 1, radii: [0.2, 0.1, 0.05, 0.025] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub pairs: usize,
    pub violations: usize,
    /// `min (upper − H)` over the sample; must be ≥ −1e-12.
    pub worst_slack: f64,
    /// Pairs where the lower bound fails (logged only).
    pub lower_bound_failures: usize,
}

/// Samples `pairs` seeded point pairs uniformly in the unit disk and compares
/// `H` with its upper bound.
pub fn upper_bound_test(lake: &Lake, cfg: &KernelTestConfig, exec: Exec) -> Result<UpperBoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut point = || loop {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if p[0] * p[0] + p[1] * p[1] < 1.0 {
            break p;
        }
    };
    let mut pairs = Vec::with_capacity(cfg.pairs);
    while pairs.len() < cfg.pairs {
        let (x, y): (Point, Point) = (point(), point());
        if dist(x, y) > 0.0 {
            pairs.push((x, y));
        }
    }
    let evals: Vec<Result<(f64, bool)>> = exec.map(&pairs, |&(x, y)| {
        let hv = h_kernel(lake, x, y)?;
        let b = h_kernel_bounds(lake, x, y);
        Ok((b.upper - hv, hv >= b.lower))
    });
    let mut worst = f64::INFINITY;
    let (mut violations, mut lower_fail) = (0, 0);
    for e in evals {
        let (slack, lower_ok) = e?;
        worst = worst.min(slack);
        violations += (slack < -UPPER_SLACK) as usize;
        lower_fail += (!lower_ok) as usize;
    }
    Ok(UpperBoundReport { pairs: cfg.pairs, violations, worst_slack: worst, lower_bound_failures: lower_fail })
}

/// `b(x) Σ_y G(x, y) ζ(y) b(y) h²` at every interior cell, the self cell
/// taken as the exact cell average of `G`.
pub fn green_representation(lake: &Lake, zeta: &Field, exec: Exec) -> Field {
    let h = lake.grid.h;
    let support: Vec<(usize, Point)> =
        lake.interior.iter().filter(|&&k| zeta[k] != 0.0).map(|&k| (k, lake.grid.center(k))).collect();
    let vals: Vec<f64> = exec.map(&lake.interior, |&kx| {
        let x = lake.grid.center(kx);
        let s: f64 = support
            .iter()
            .map(|&(ky, y)| {
                let g = if ky == kx { green_disk_self_cell(x, h) } else { green_disk_unchecked(x, y) };
                g * zeta[ky] * lake.depth[ky]
            })
            .sum();
        lake.depth[kx] * s * lake.cell_area
    });
    let mut out = Field::zeros(lake);
    for (&k, v) in lake.interior.iter().zip(vals) {
        out[k] = v;
    }
    out
}

fn nu_l1(lake: &Lake, zeta: &Field) -> f64 {
    lake.interior.iter().map(|&k| zeta[k].abs() * lake.depth[k]).sum::<f64>() * lake.cell_area
}

fn max_abs_diff(lake: &Lake, a: &Field, b: &Field) -> f64 {
    lake.interior.iter().map(|&k| (a[k] - b[k]).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub h: f64,
    /// `‖𝒦ζ − Σ G ζ h²‖_∞` for the smooth test field on the constant-depth disk.
    pub residual: f64,
    /// `5h‖ζ‖_{L¹(ν)}`.
    pub bound: f64,
}

/// Smooth test field `(1 − |x − c|²/r²)²₊`.
pub fn smooth_bump(lake: &Lake, c: Point, r: f64) -> Field {
    Field::from_fn(lake, |p| {
        let t = 1.0 - (dist(p, c) / r).powi(2);
        if t > 0.0 {
            t * t
        } else {
            0.0
        }
    })
}

/// On a constant-depth disk the correction term vanishes, so `𝒦ζ` must match
/// the Green's-function quadrature up to discretization error.
pub fn constant_depth_representation(op: &OperatorHandle, exec: Exec) -> Result<RepresentationReport> {
    let lake = op.lake();
    if lake.interior.iter().any(|&k| lake.depth[k] != 1.0) {
        return Err(Error::Domain("representation test needs a constant unit depth".into()));
    }
    let zeta = smooth_bump(lake, [0.2, -0.1], 0.4);
    let kz = op.apply_k(&zeta)?;
    let gz = green_representation(lake, &zeta, exec);
    let h = lake.grid.h;
    Ok(RepresentationReport { h, residual: max_abs_diff(lake, &kz, &gz), bound: 5.0 * h * nu_l1(lake, &zeta) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub radii: Vec<f64>,
    /// `‖𝒦ζ − b Σ G ζ b h²‖_∞` for unit-`ν`-mass uniform patches.
    pub residuals: Vec<f64>,
    /// Largest residual over the residual at the largest radius; stays O(1)
    /// when the correction is bounded.
    pub growth: f64,
}

/// Correction residual for unit-mass patches of shrinking radius at `c`.
pub fn correction_boundedness(op: &OperatorHandle, c: Point, radii: &[f64], exec: Exec) -> Result<CorrectionReport> {
    let lake = op.lake();
    let mut residuals = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut zeta = Field::from_fn(lake, |p| if dist(p, c) <= r { 1.0 } else { 0.0 });
        let m = nu_l1(lake, &zeta);
        if m == 0.0 {
            return Err(Error::Domain(format!("patch of radius {r} contains no cell")));
        }
        for &k in &lake.interior {
            zeta[k] /= m;
        }
        let kz = op.apply_k(&zeta)?;
        let gz = green_representation(lake, &zeta, exec);
        residuals.push(max_abs_diff(lake, &kz, &gz));
    }
    let first = residuals.first().copied().unwrap_or(0.0);
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let growth = if first > 0.0 { worst / first } else { 0.0 };
    Ok(CorrectionReport { radii: radii.to_vec(), residuals, growth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub upper_bound: UpperBoundReport,
    pub representation: RepresentationReport,
    pub correction: CorrectionReport,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.upper_bound.violations == 0 && self.representation.residual <= self.representation.bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::assemble_operator;
    use crate::geometry::build_lake;
    use std::sync::Arc;

    #[test]
    fn upper_bound_holds_on_samples_and_is_seeded() {
        let lake = build_lake("disk_constant_b", 32).unwrap();
        let cfg = KernelTestConfig { pairs: 200, ..Default::default() };
        let a = upper_bound_test(&lake, &cfg, Exec::Sequential).unwrap();
        let b = upper_bound_test(&lake, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations, 0);
        assert!(a.worst_slack >= -UPPER_SLACK);
    }

    #[test]
    fn representation_residual_is_small_for_constant_depth() {
        let lake = Arc::new(build_lake("disk_constant_b", 64).unwrap());
        let op = assemble_operator(lake).unwrap();
        let r = constant_depth_representation(&op, Exec::default()).unwrap();
        assert!(r.residual <= r.bound, "{r:?}");
    }

    #[test]
    fn non_constant_depth_is_rejected_for_representation() {
        let lake = Arc::new(build_lake("disk_interior_max_b", 32).unwrap());
        let op = assemble_operator(lake).unwrap();
        assert!(constant_depth_representation(&op, Exec::Sequential).is_err());
    }
}
