//! Exhaustive enumeration of quantized vorticity fields on tiny lakes.
//!
//! Energies are evaluated through a dense inverse of the assembled matrix, so
//! this path shares the discretization with the solver but none of its
//! linear algebra or rearrangement logic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::variational::Problem;

pub const MAX_CELLS: usize = 6;
pub const MAX_LEVELS: usize = 12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleResult {
    pub zeta: Field,
    pub energy: f64,
    /// Number of enumerated fields meeting the mass window.
    pub feasible: usize,
    /// Upper bound on the energy lost to quantization.
    pub gap: f64,
}

struct Dense {
    /// `𝒦` as a dense matrix on interior slots.
    k: DMatrix<f64>,
    w: Vec<f64>,
    q: Vec<f64>,
}

impl Dense {
    fn new(problem: &Problem) -> Result<Self> {
        let lake = problem.lake();
        let a = problem.op.dense_matrix();
        let inv = a.try_inverse().ok_or_else(|| Error::Domain("dense operator is singular".into()))?;
        let b = DVector::from_iterator(lake.n_interior(), lake.interior.iter().map(|&k| lake.depth[k]));
        let k = inv * DMatrix::from_diagonal(&b);
        let w = lake.interior.iter().map(|&k| lake.depth[k] * lake.cell_area).collect();
        let q = lake.interior.iter().map(|&k| problem.q[k]).collect();
        Ok(Dense { k, w, q })
    }

    fn energy(&self, problem: &Problem, z: &[f64]) -> f64 {
        let p = &problem.params;
        let n = z.len();
        let scale = p.eps * p.eps / p.delta;
        let mut e = 0.0;
        for i in 0..n {
            let kz: f64 = (0..n).map(|j| self.k[(i, j)] * z[j]).sum();
            e += self.w[i] * (0.5 * z[i] * kz + self.q[i] * z[i] - p.amplitude() * problem.vf.conjugate(scale * z[i]));
        }
        e
    }
}

/// Maximizes the energy over fields with per-cell values in
/// `{Λδ/ε² · k/m : k = 0..m}` whose mass is within half a quantum of `κ₀δ`.
pub fn brute_force_oracle(problem: &Problem, m: usize, exec: Exec) -> Result<OracleResult> {
    let lake = problem.lake();
    let n = lake.n_interior();
    if n > MAX_CELLS {
        return Err(Error::Config(format!("oracle supports at most {MAX_CELLS} cells, lake has {n}")));
    }
    if m == 0 || m > MAX_LEVELS {
        return Err(Error::Config(format!("oracle levels must be in 1..={MAX_LEVELS}, got {m}")));
    }
    let dense = Dense::new(problem)?;
    let p = &problem.params;
    let step = p.cap() / m as f64;
    let wmax = dense.w.iter().cloned().fold(0.0, f64::max);
    let quantum = step * wmax;
    let target = p.target_mass();
    let base = m + 1;
    let total = base.pow(n as u32);

    let decode = |mut idx: usize| -> Vec<f64> {
        let mut z = vec![0.0; n];
        for v in z.iter_mut() {
            *v = (idx % base) as f64 * step;
            idx /= base;
        }
        z
    };
    // split the index range into contiguous chunks; each returns its best
    let chunks = base.min(total);
    let per = total.div_ceil(chunks);
    let partial: Vec<(Option<(usize, f64)>, usize)> = exec.map_range(chunks, |c| {
        let mut best: Option<(usize, f64)> = None;
        let mut feasible = 0;
        for idx in c * per..((c + 1) * per).min(total) {
            let z = decode(idx);
            let mass: f64 = z.iter().zip(&dense.w).map(|(a, b)| a * b).sum();
            if (mass - target).abs() > 0.5 * quantum * (1.0 + 1e-12) {
                continue;
            }
            feasible += 1;
            let e = dense.energy(problem, &z);
            if best.is_none_or(|(_, eb)| e > eb) {
                best = Some((idx, e));
            }
        }
        (best, feasible)
    });
    let mut best: Option<(usize, f64)> = None;
    let mut feasible = 0;
    for (b, f) in partial {
        feasible += f;
        if let Some((idx, e)) = b {
            if best.is_none_or(|(_, eb)| e > eb) {
                best = Some((idx, e));
            }
        }
    }
    let (idx, e) = best.ok_or_else(|| Error::Infeasible("no quantized field meets the mass window".into()))?;
    let mut zeta = Field::zeros(lake);
    for (v, &k) in decode(idx).into_iter().zip(&lake.interior) {
        zeta[k] = v;
    }
    Ok(OracleResult { zeta, energy: e, feasible, gap: quantization_gap(problem, &dense, step) })
}

/// Lipschitz bound of the energy on the class, `(max 𝒦ζ + max|q| + f⁻¹(Λ))`
/// per unit of `ν`-mass, times one quantum in every cell.
fn quantization_gap(problem: &Problem, dense: &Dense, step: f64) -> f64 {
    let n = dense.w.len();
    let cap = problem.params.cap();
    let kmax = (0..n).map(|i| (0..n).map(|j| dense.k[(i, j)].abs()).sum::<f64>() * cap).fold(0.0, f64::max);
    let qmax = dense.q.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let lip = kmax + qmax + problem.vf.f_inv(problem.params.lambda);
    lip * step * dense.w.iter().sum::<f64>()
}
