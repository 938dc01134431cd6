//! Vorticity functions `f`, their inverses and conjugate primitives, and
//! sampled certificates for the growth hypotheses.

use serde::{Deserialize, Serialize};

use crate::elliptic::integrate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum VorticityFunction {
    /// `f(s) = s₊^p`.
    Power { p: f64 },
    /// `f(s) = c + s` for `s > 0`.
    JumpLinear { c: f64 },
    /// Piecewise-linear `(s, f(s))` samples starting at `s = 0`; the first
    /// value is `f(0⁺)` and the last segment is extended linearly.
    Table { points: Vec<[f64; 2]> },
}

impl VorticityFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            VorticityFunction::Power { p } if !(p.is_finite() && *p > 1.0) => {
                Err(Error::Config(format!("power exponent must exceed 1, got {p}")))
            }
            VorticityFunction::JumpLinear { c } if !(c.is_finite() && *c >= 0.0) => {
                Err(Error::Config(format!("jump must be nonnegative, got {c}")))
            }
            VorticityFunction::Table { points } => {
                if points.len() < 2 {
                    return Err(Error::Config("vorticity table needs at least two points".into()));
                }
                if points[0][0] != 0.0 {
                    return Err(Error::Config("vorticity table must start at s = 0".into()));
                }
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(Error::Config("vorticity table contains non-finite entries".into()));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::Config("vorticity table abscissae must be strictly increasing".into()));
                }
                if points[0][1] < 0.0 {
                    return Err(Error::Config("vorticity table must have f(0+) >= 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `f(0⁺)`.
    pub fn jump(&self) -> f64 {
        match self {
            VorticityFunction::Power { .. } => 0.0,
            VorticityFunction::JumpLinear { c } => *c,
            VorticityFunction::Table { points } => points[0][1],
        }
    }

    /// Strictly increasing on `[0, ∞)` with `f(0⁺) ≥ 0`.
    pub fn is_monotone(&self) -> bool {
        match self {
            VorticityFunction::Table { points } => {
                points[0][1] >= 0.0 && points.windows(2).all(|w| w[1][1] > w[0][1])
            }
            _ => true,
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            VorticityFunction::Power { p } => s.powf(*p),
            VorticityFunction::JumpLinear { c } => c + s,
            VorticityFunction::Table { points } => {
                let i = segment(points, s);
                let (a, b) = (points[i], points[i + 1]);
                a[1] + (s - a[0]) * (b[1] - a[1]) / (b[0] - a[0])
            }
        }
    }

    /// `∫₀^s (f(r) − f(0⁺)) dr` in closed form, for `s ≥ 0`.
    pub fn primitive_above_jump(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            VorticityFunction::Power { p } => s.powf(p + 1.0) / (p + 1.0),
            VorticityFunction::JumpLinear { .. } => 0.5 * s * s,
            VorticityFunction::Table { points } => {
                let f0 = points[0][1];
                let mut acc = 0.0;
                let mut lo = 0.0;
                let mut flo = f0;
                while lo < s {
                    let i = segment(points, lo);
                    let hi = if i + 2 == points.len() { s } else { points[i + 1][0].min(s) };
                    let fhi = self.f(hi);
                    acc += 0.5 * (hi - lo) * (flo + fhi - 2.0 * f0);
                    lo = hi;
                    flo = fhi;
                }
                acc
            }
        }
    }

    /// `f⁻¹(t)`, zero for `t ≤ f(0⁺)`.
    pub fn f_inv(&self, t: f64) -> f64 {
        if t <= self.jump() {
            return 0.0;
        }
        match self {
            VorticityFunction::Power { p } => t.powf(1.0 / p),
            VorticityFunction::JumpLinear { c } => t - c,
            VorticityFunction::Table { points } => {
                let i = value_segment(points, t);
                let (a, b) = (points[i], points[i + 1]);
                a[0] + (t - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            }
        }
    }

    /// `F_*(t) = ∫₀^t f⁻¹`.
    pub fn conjugate(&self, t: f64) -> f64 {
        let f0 = self.jump();
        if t <= f0 {
            return 0.0;
        }
        match self {
            VorticityFunction::Power { p } => p / (p + 1.0) * t.powf((p + 1.0) / p),
            VorticityFunction::JumpLinear { c } => 0.5 * (t - c) * (t - c),
            VorticityFunction::Table { points } => {
                let mut acc = 0.0;
                let last = points.len() - 2;
                for (i, w) in points.windows(2).enumerate() {
                    let (a, b) = (w[0], w[1]);
                    if t <= a[1] {
                        return acc;
                    }
                    let top = if i == last { t } else { b[1].min(t) };
                    let s_top = a[0] + (top - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    acc += 0.5 * (top - a[1]) * (a[0] + s_top);
                }
                acc
            }
        }
    }
}

/// Segment index `i` with `points[i].s ≤ s < points[i+1].s`, clamped to the
/// last segment.
fn segment(points: &[[f64; 2]], s: f64) -> usize {
    let n = points.len();
    points[1..n - 1].iter().take_while(|p| p[0] <= s).count()
}

fn value_segment(points: &[[f64; 2]], t: f64) -> usize {
    let n = points.len();
    points[1..n - 1].iter().take_while(|p| p[1] <= t).count()
}

pub fn eval_f(vf: &VorticityFunction, s: f64) -> f64 {
    vf.f(s)
}

/// `(f⁻¹(t), F_*(t))`.
pub fn eval_conjugate(vf: &VorticityFunction, t: f64) -> (f64, f64) {
    (vf.f_inv(t), vf.conjugate(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub theta0_estimate: f64,
    pub theta1_estimate: f64,
    pub h1_monotone: bool,
    pub f0: f64,
    pub sample_grid: String,
}

/// Largest observed `∫₀^s(f − f(0⁺)) / ((f(s) − f(0⁺)) s)` and smallest
/// observed `F_*(t) / (t f⁻¹(t))` over log-spaced samples up to `s_max`.
pub fn verify_hypotheses(vf: &VorticityFunction, s_max: f64, n: usize) -> Result<HypothesisReport> {
    vf.validate()?;
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::Config(format!("s_max must be positive, got {s_max}")));
    }
    if n < 100 {
        return Err(Error::Config(format!("need at least 100 samples, got {n}")));
    }
    const DECADES: f64 = 6.0;
    let logspace = |k: usize| 10f64.powf(-DECADES * (1.0 - k as f64 / (n - 1) as f64));
    let f0 = vf.jump();
    let nonfinite = |what: &str| Error::NonFinite(format!("{what} quadrature"));

    let mut theta0 = f64::NEG_INFINITY;
    let mut acc = 0.0;
    let mut prev = 0.0;
    for k in 0..n {
        let s = s_max * logspace(k);
        acc += integrate(|r| vf.f(r) - f0, prev, s, 4);
        prev = s;
        let denom = (vf.f(s) - f0) * s;
        if !acc.is_finite() || !denom.is_finite() {
            return Err(nonfinite("(H2)"));
        }
        if denom > 0.0 {
            theta0 = theta0.max(acc / denom);
        }
    }

    let t_max = vf.f(s_max);
    let span = t_max - f0;
    let mut theta1 = f64::INFINITY;
    let mut acc = 0.0;
    let mut prev = f0;
    for k in 0..n {
        let t = f0 + span * logspace(k);
        acc += integrate(|r| vf.f_inv(r), prev, t, 4);
        prev = t;
        let denom = t * vf.f_inv(t);
        if !acc.is_finite() || !denom.is_finite() {
            return Err(nonfinite("(H2')"));
        }
        if denom > 0.0 {
            theta1 = theta1.min(acc / denom);
        }
    }

    Ok(HypothesisReport {
        theta0_estimate: theta0,
        theta1_estimate: theta1,
        h1_monotone: vf.is_monotone(),
        f0,
        sample_grid: format!("{n} log-spaced samples over [{:e}, {s_max}] in s and above f(0+) in t", s_max * 1e-6),
    })
}
