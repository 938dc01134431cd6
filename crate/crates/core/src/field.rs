use serde::{Deserialize, Serialize};

use crate::geometry::{Lake, Point};

/// One value per grid cell; cells off the mask hold zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(lake: &Lake) -> Field {
        Field(vec![0.0; lake.grid.len()])
    }

    /// Samples `f` at every interior cell centre.
    pub fn from_fn(lake: &Lake, f: impl Fn(Point) -> f64) -> Field {
        let mut v = vec![0.0; lake.grid.len()];
        for &k in &lake.interior {
            v[k] = f(lake.grid.center(k));
        }
        Field(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_interior(&self, lake: &Lake) -> f64 {
        lake.interior.iter().map(|&k| self.0[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_interior(&self, lake: &Lake) -> f64 {
        lake.interior.iter().map(|&k| self.0[k]).fold(f64::INFINITY, f64::min)
    }

    /// `Σ u v b h²`.
    pub fn dot_nu(&self, other: &Field, lake: &Lake) -> f64 {
        lake.interior.iter().map(|&k| self.0[k] * other.0[k] * lake.depth[k]).sum::<f64>() * lake.cell_area
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Bilinear interpolation between cell centres, with zero off the mask.
    pub fn sample(&self, lake: &Lake, p: Point) -> f64 {
        let g = &lake.grid;
        let fx = (p[0] - g.origin[0]) / g.h - 0.5;
        let fy = (p[1] - g.origin[1]) / g.h - 0.5;
        let (i0, j0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - i0, fy - j0);
        let at = |i: f64, j: f64| -> f64 {
            if i < 0.0 || j < 0.0 || i >= g.nx as f64 || j >= g.ny as f64 {
                return 0.0;
            }
            let k = g.index(i as usize, j as usize);
            if lake.mask[k] {
                self.0[k]
            } else {
                0.0
            }
        };
        (1.0 - tx) * (1.0 - ty) * at(i0, j0)
            + tx * (1.0 - ty) * at(i0 + 1.0, j0)
            + (1.0 - tx) * ty * at(i0, j0 + 1.0)
            + tx * ty * at(i0 + 1.0, j0 + 1.0)
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl std::ops::IndexMut<usize> for Field {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}
