#![allow(dead_code)]

use lakevortex::field::Field;
use lakevortex::geometry::Lake;

/// `∫₀^x √(r² − u²) du` for `|x| ≤ r`.
fn half_chord_integral(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
}

/// Exact area of `[x0, x1] × [y0, y1] ∩ B(0, r)`.
pub fn disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let mut cuts = vec![x0, x1];
    for c in [r, (r * r - y0 * y0).max(0.0).sqrt(), (r * r - y1 * y1).max(0.0).sqrt()] {
        cuts.push(c);
        cuts.push(-c);
    }
    cuts.retain(|&c| c >= x0 && c <= x1);
    cuts.sort_by(f64::total_cmp);
    let g = |x: f64| half_chord_integral(x, r);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        if m.abs() >= r {
            continue;
        }
        let s = (r * r - m * m).sqrt();
        let top_clipped = y1 < s;
        let bottom_clipped = y0 > -s;
        if y0 >= s || y1 <= -s {
            continue;
        }
        // length = min(y1, s) − max(y0, −s) on (a, b)
        let top = if top_clipped { y1 * (b - a) } else { g(b) - g(a) };
        let bottom = if bottom_clipped { y0 * (b - a) } else { -(g(b) - g(a)) };
        area += top - bottom;
    }
    area
}

/// Cell-area fractions of the centred disk of radius `r`.
pub fn disk_indicator(lake: &Lake, r: f64) -> Field {
    let h = lake.grid.h;
    let mut z = Field::zeros(lake);
    for &k in &lake.interior {
        let c = lake.grid.center(k);
        z[k] = disk_rect_area(c[0] - 0.5 * h, c[0] + 0.5 * h, c[1] - 0.5 * h, c[1] + 0.5 * h, r) / (h * h);
    }
    z
}

/// Bilinear interpolation from cell centres.
pub fn sample_bilinear(lake: &Lake, u: &Field, p: [f64; 2]) -> f64 {
    let g = &lake.grid;
    let fx = (p[0] - g.origin[0]) / g.h - 0.5;
    let fy = (p[1] - g.origin[1]) / g.h - 0.5;
    let (i, j) = (fx.floor() as usize, fy.floor() as usize);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let v = |a: usize, b: usize| u[g.index(a, b)];
    (1.0 - tx) * (1.0 - ty) * v(i, j) + tx * (1.0 - ty) * v(i + 1, j) + (1.0 - tx) * ty * v(i, j + 1) + tx * ty * v(i + 1, j + 1)
}

/// `ψ(0)` for `−Δψ = χ_{B(0, a)}` in the unit disk.
pub fn patch_center_value(a: f64) -> f64 {
    a * a / 4.0 - a * a / 2.0 * a.ln()
}
