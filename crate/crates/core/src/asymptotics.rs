//! ε-sweeps under the three vanishing-circulation regimes and the
//! concentration diagnostics computed along them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::elliptic::OperatorHandle;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::geometry::{dist, Lake, Point};
use crate::nonlinearity::VorticityFunction;
use crate::variational::{
    check_optimality, patch_measure, solve_vortex, AdmissibleParams, Energy, Init, Problem, SolveOptions, SolveState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// `δ = (ln 1/ε)^{-1/2}`.
    AboveCritical,
    /// `δ = (ln 1/ε)^{-1}`.
    Critical,
    /// `δ = (ln 1/ε)^{-2}`.
    BelowCritical,
}

impl DeltaSchedule {
    pub fn name(self) -> &'static str {
        match self {
            DeltaSchedule::AboveCritical => "above_critical",
            DeltaSchedule::Critical => "critical",
            DeltaSchedule::BelowCritical => "below_critical",
        }
    }
}

pub fn delta_of_eps(schedule: DeltaSchedule, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < (-1.0f64).exp()) {
        return Err(Error::Config(format!("eps must lie in (0, 1/e), got {eps}")));
    }
    let l = (1.0 / eps).ln();
    Ok(match schedule {
        DeltaSchedule::AboveCritical => 1.0 / l.sqrt(),
        DeltaSchedule::Critical => 1.0 / l,
        DeltaSchedule::BelowCritical => 1.0 / (l * l),
    })
}

fn active_cells(lake: &Lake, zeta: &Field, rel_threshold: f64) -> Vec<usize> {
    let zmax = zeta.max_interior(lake);
    if !(zmax > 0.0) {
        return Vec::new();
    }
    lake.interior.iter().copied().filter(|&k| zeta[k] > rel_threshold * zmax).collect()
}

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-12;

/// Largest distance between centres of cells with `ζ > rel_threshold·max ζ`.
pub fn support_diameter(lake: &Lake, zeta: &Field, rel_threshold: f64) -> f64 {
    let cells = active_cells(lake, zeta, rel_threshold);
    if cells.len() <= 1 {
        return 0.0;
    }
    // only cells on the rim of the active set can realize the diameter
    let mut on = vec![false; lake.grid.len()];
    for &k in &cells {
        on[k] = true;
    }
    let rim: Vec<Point> = cells
        .iter()
        .copied()
        .filter(|&k| {
            crate::geometry::Dir::ALL.iter().any(|&d| lake.neighbor(k, d).is_none_or(|n| !on[n]))
        })
        .map(|k| lake.grid.center(k))
        .collect();
    let mut d: f64 = 0.0;
    for (i, a) in rim.iter().enumerate() {
        for b in &rim[i + 1..] {
            d = d.max(dist(*a, *b));
        }
    }
    d
}

/// Area-weighted centre `Σ x ζ h² / Σ ζ h²`.
pub fn vorticity_center(lake: &Lake, zeta: &Field) -> Result<Point> {
    let (mut m, mut x, mut y) = (0.0, 0.0, 0.0);
    for &k in &lake.interior {
        let c = lake.grid.center(k);
        m += zeta[k];
        x += zeta[k] * c[0];
        y += zeta[k] * c[1];
    }
    if !(m > 0.0) {
        return Err(Error::Domain("vorticity centre of a zero field".into()));
    }
    Ok([x / m, y / m])
}

/// `min dist(x, ∂D)` over active cell centres.
pub fn support_distance_to_boundary(lake: &Lake, zeta: &Field, rel_threshold: f64) -> f64 {
    active_cells(lake, zeta, rel_threshold)
        .iter()
        .map(|&k| lake.dist_to_boundary(lake.grid.center(k)))
        .fold(f64::INFINITY, f64::min)
}

pub const PROFILE_GRID: usize = 64;
pub const PROFILE_BINS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// Half-width of the local grid in rescaled units.
    pub half_width: f64,
    /// `ξ(x) = (ε²/δ) ζ(X + εx)` on the local grid, row-major.
    pub xi: Vec<f64>,
    /// Bin averages of `ξ` over `PROFILE_BINS` rings out to `half_width`;
    /// `NaN` for empty bins.
    pub bins: Vec<f64>,
    /// `Σ ξ b(X + εx) Δx²`, which should be close to `κ₀`.
    pub mass: f64,
}

/// Rescaled profile about `center`, sampled bilinearly on a local grid of
/// half-width 1.5 support radii.
pub fn rescale_profile(lake: &Lake, zeta: &Field, params: &AdmissibleParams, center: Point) -> Result<Profile> {
    let diam = support_diameter(lake, zeta, DEFAULT_SUPPORT_THRESHOLD);
    let h = lake.grid.h;
    if diam < 4.0 * h {
        return Err(Error::Infeasible(format!(
            "support diameter {diam:.4e} spans {:.1} cells; at least 4 are needed to resolve the profile",
            diam / h
        )));
    }
    let eps = params.eps;
    let half_width = 1.5 * 0.5 * diam / eps;
    let n = PROFILE_GRID;
    let dx = 2.0 * half_width / n as f64;
    let scale = eps * eps / params.delta;
    let mut xi = vec![0.0; n * n];
    let mut sums = [0.0; PROFILE_BINS];
    let mut counts = vec![0usize; PROFILE_BINS];
    let mut mass = 0.0;
    for j in 0..n {
        for i in 0..n {
            let x = [-half_width + (i as f64 + 0.5) * dx, -half_width + (j as f64 + 0.5) * dx];
            let p = [center[0] + eps * x[0], center[1] + eps * x[1]];
            let v = scale * zeta.sample(lake, p);
            xi[j * n + i] = v;
            if v != 0.0 {
                mass += v * lake.depth_at(p) * dx * dx;
            }
            let r = x[0].hypot(x[1]);
            let bin = (r / half_width * PROFILE_BINS as f64) as usize;
            if bin < PROFILE_BINS {
                sums[bin] += v;
                counts[bin] += 1;
            }
        }
    }
    let bins = sums.iter().zip(&counts).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect();
    Ok(Profile { half_width, xi, bins, mass })
}

/// `1 − (Σ positive increments)/(total variation)` over consecutive
/// nonempty bins; 1 for a flat profile.
pub fn radial_monotonicity_score(profile: &Profile) -> f64 {
    score_bins(&profile.bins)
}

pub fn score_bins(bins: &[f64]) -> f64 {
    let vals: Vec<f64> = bins.iter().copied().filter(|v| v.is_finite()).collect();
    let (mut up, mut tv) = (0.0, 0.0);
    for w in vals.windows(2) {
        let d = w[1] - w[0];
        up += d.max(0.0);
        tv += d.abs();
    }
    if tv == 0.0 {
        1.0
    } else {
        1.0 - up / tv
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub point: Point,
    /// All cell centres within 1e-10 of the maximum.
    pub ties: Vec<Point>,
    /// Whether the argmax cell touches the mask boundary.
    pub touches_boundary: bool,
    pub value: f64,
}

impl Target {
    pub fn distance(&self, p: Point) -> f64 {
        self.ties.iter().map(|&t| dist(t, p)).fold(f64::INFINITY, f64::min)
    }
}

/// Concentration target: argmax of `b`, of `φ = κ₀b/4π + q`, or of `q`.
pub fn predicted_target(lake: &Lake, q: &Field, kappa0: f64, regime: DeltaSchedule) -> Target {
    let value = |k: usize| match regime {
        DeltaSchedule::AboveCritical => lake.depth[k],
        DeltaSchedule::Critical => kappa0 * lake.depth[k] / (4.0 * PI) + q[k],
        DeltaSchedule::BelowCritical => q[k],
    };
    let mut best = lake.interior[0];
    for &k in &lake.interior {
        if value(k) > value(best) {
            best = k;
        }
    }
    let vmax = value(best);
    let tol = 1e-10 * vmax.abs().max(1.0);
    let ties = lake.interior.iter().copied().filter(|&k| value(k) >= vmax - tol).map(|k| lake.grid.center(k)).collect();
    let rim = lake.boundary_cells();
    Target { point: lake.grid.center(best), ties, touches_boundary: rim.binary_search(&best).is_ok(), value: vmax }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub eps: f64,
    pub delta: f64,
    pub diam_supp: f64,
    pub xc: f64,
    pub yc: f64,
    pub dist_boundary: f64,
    pub mu: f64,
    pub sup_k: f64,
    pub energy: Energy,
    pub mass_frac: f64,
    pub radial_score: f64,
    pub target_distance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub ascent_violations: usize,
    pub patch_measure: f64,
    pub mass_error: f64,
    pub mu_lower_bound: f64,
    pub optimality_violation: f64,
}

/// Fraction of `ν`-mass within distance `l` of the target set.
pub fn mass_fraction_near(lake: &Lake, zeta: &Field, target: &Target, l: f64) -> f64 {
    let (mut near, mut total) = (0.0, 0.0);
    for &k in &lake.interior {
        let w = zeta[k] * lake.depth[k];
        total += w;
        if target.distance(lake.grid.center(k)) <= l {
            near += w;
        }
    }
    if total > 0.0 {
        (near / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn diagnose(problem: &Problem, state: &SolveState, target: &Target, l: f64) -> Result<Diagnostics> {
    let lake = problem.lake();
    let p = &problem.params;
    let x = vorticity_center(lake, &state.zeta)?;
    let radial_score = match rescale_profile(lake, &state.zeta, p, x) {
        Ok(prof) => radial_monotonicity_score(&prof),
        Err(_) => f64::NAN,
    };
    let opt = check_optimality(problem, state);
    Ok(Diagnostics {
        eps: p.eps,
        delta: p.delta,
        diam_supp: support_diameter(lake, &state.zeta, DEFAULT_SUPPORT_THRESHOLD),
        xc: x[0],
        yc: x[1],
        dist_boundary: support_distance_to_boundary(lake, &state.zeta, DEFAULT_SUPPORT_THRESHOLD),
        mu: state.mu,
        sup_k: state.kzeta().max_interior(lake),
        energy: state.energy,
        mass_frac: mass_fraction_near(lake, &state.zeta, target, l),
        radial_score,
        target_distance: target.distance(x),
        converged: state.converged,
        iterations: state.iterations,
        ascent_violations: state.ascent_violations,
        patch_measure: patch_measure(lake, state, p),
        mass_error: opt.mass_error,
        mu_lower_bound: opt.mu_lower_bound,
        optimality_violation: opt.max_violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schedule: DeltaSchedule,
    pub eps: Vec<f64>,
    #[serde(default = "default_kappa0")]
    pub kappa0: f64,
    pub lambda: f64,
    /// Radius of the target neighbourhood for mass fractions and support
    /// containment.
    #[serde(default = "default_target_radius")]
    pub target_radius: f64,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub options: SolveOptions,
}

fn default_kappa0() -> f64 {
    1.0
}

fn default_target_radius() -> f64 {
    0.2
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Config("eps list is empty".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps list must be strictly decreasing".into()));
        }
        for &e in &self.eps {
            delta_of_eps(self.schedule, e)?;
        }
        if !(self.target_radius > 0.0) {
            return Err(Error::Config("target_radius must be positive".into()));
        }
        self.options.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub delta: f64,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    /// Least-squares slope of `ln diam` against `ln ε`.
    pub diameter_slope: Option<f64>,
    pub target_distances: Vec<f64>,
    /// Distances never grow by more than one cell between points.
    pub target_distance_nonincreasing: bool,
    /// `μ` over `(κ₀ max b/2π) δ ln(1/ε)` (above critical).
    pub mu_ratio: Vec<f64>,
    /// Expected limit of `μ` (critical: `κ₀b(x̂)/2π + q(x̂)`, below: `max q`).
    pub mu_target: Option<f64>,
    /// Expected limit of `sup 𝒦ζ` (critical: `κ₀b(x̂)/2π`, below: 0).
    pub sup_k_target: Option<f64>,
    pub mu_deviation: Vec<f64>,
    pub sup_k_deviation: Vec<f64>,
    pub mass_fraction: Vec<f64>,
    pub mass_fraction_nondecreasing: bool,
    /// Smallest support-to-boundary distance along the sweep.
    pub eta_estimate: f64,
    /// Slope of `ln dist(supp, ∂D)` against `ln ln(1/ε)`.
    pub boundary_decay_exponent: Option<f64>,
    /// `(sup 𝒦ζ − (max b/2π) κ₀ δ ln(1/ε)) / δ` per point.
    pub sup_k_constant: Vec<f64>,
    pub failed_points: usize,
    /// [`support_excess`] of the last solved point at the target radius.
    pub final_support_excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub regime: DeltaSchedule,
    pub h: f64,
    pub target: Target,
    pub max_b: f64,
    pub max_q: f64,
    pub kappa0: f64,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
    #[serde(skip)]
    pub states: Vec<Option<SolveState>>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "eps", "delta", "diam_supp", "xc", "yc", "dist_boundary", "mu", "sup_K", "E_q", "F_eps", "E_total", "mass_frac",
    "radial_score",
];

impl Diagnostics {
    /// Values in [`CSV_COLUMNS`] order.
    pub fn csv_values(&self) -> [f64; 13] {
        [
            self.eps,
            self.delta,
            self.diam_supp,
            self.xc,
            self.yc,
            self.dist_boundary,
            self.mu,
            self.sup_k,
            self.energy.e_q,
            self.energy.f_eps,
            self.energy.total,
            self.mass_frac,
            self.radial_score,
        ]
    }
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for row in &self.rows {
            let vals: Vec<f64> = match &row.diagnostics {
                Some(d) => d.csv_values().to_vec(),
                None => {
                    let mut v = vec![f64::NAN; CSV_COLUMNS.len()];
                    v[0] = row.eps;
                    v[1] = row.delta;
                    v
                }
            };
            let cells: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &Diagnostics> {
        self.rows.iter().filter_map(|r| r.diagnostics.as_ref())
    }

    pub fn last(&self) -> Option<&Diagnostics> {
        self.diagnostics().last()
    }
}

/// Least-squares slope of `y` against `x`; `None` with fewer than two points.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

pub fn run_sweep(
    op: &OperatorHandle,
    q: &Field,
    vf: &VorticityFunction,
    cfg: &SweepConfig,
    exec: Exec,
) -> Result<SweepReport> {
    cfg.validate()?;
    vf.validate()?;
    let lake = op.lake();
    let target = predicted_target(lake, q, cfg.kappa0, cfg.schedule);
    let opts = SolveOptions { exec, ..cfg.options };
    let solved: Vec<(SweepRow, Option<SolveState>)> = exec.map(&cfg.eps, |&eps| {
        let delta = delta_of_eps(cfg.schedule, eps).expect("validated");
        let params = AdmissibleParams { eps, delta, kappa0: cfg.kappa0, lambda: cfg.lambda };
        let outcome = Problem::new(op, q, params, vf).and_then(|pr| {
            let st = solve_vortex(&pr, &cfg.init, &opts)?;
            let d = diagnose(&pr, &st, &target, cfg.target_radius)?;
            Ok((d, st))
        });
        match outcome {
            Ok((d, st)) => (SweepRow { eps, delta, diagnostics: Some(d), error: None }, Some(st)),
            Err(e) => (SweepRow { eps, delta, diagnostics: None, error: Some(e.to_string()) }, None),
        }
    });
    let (rows, states): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let mut report = SweepReport {
        regime: cfg.schedule,
        h: lake.grid.h,
        max_b: lake.max_depth(),
        max_q: q.max_interior(lake),
        kappa0: cfg.kappa0,
        target,
        rows,
        summary: SweepSummary::default(),
        states,
    };
    report.summary = summarize(lake, q, &report, cfg.target_radius);
    Ok(report)
}

fn nonincreasing(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn summarize(lake: &Lake, q: &Field, report: &SweepReport, l: f64) -> SweepSummary {
    let d: Vec<&Diagnostics> = report.diagnostics().collect();
    let h = report.h;
    let k0 = report.kappa0;
    let log_pairs: Vec<(f64, f64)> = d.iter().filter(|r| r.diam_supp > 0.0).map(|r| (r.eps.ln(), r.diam_supp.ln())).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = log_pairs.into_iter().unzip();
    let target_distances: Vec<f64> = d.iter().map(|r| r.target_distance).collect();
    let mass_fraction: Vec<f64> = d.iter().map(|r| r.mass_frac).collect();
    let mut s = SweepSummary {
        diameter_slope: fit_slope(&lx, &ly),
        target_distance_nonincreasing: nonincreasing(&target_distances, h),
        target_distances,
        mass_fraction_nondecreasing: mass_fraction.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        mass_fraction,
        eta_estimate: d.iter().map(|r| r.dist_boundary).fold(f64::INFINITY, f64::min),
        failed_points: report.rows.len() - d.len(),
        ..Default::default()
    };
    let ln_inv = |e: f64| (1.0 / e).ln();
    let bmax = report.max_b;
    let tk = lake.nearest_interior(report.target.point);
    match report.regime {
        DeltaSchedule::AboveCritical => {
            s.mu_ratio = d.iter().map(|r| r.mu / (k0 * bmax / (2.0 * PI) * r.delta * ln_inv(r.eps))).collect();
        }
        DeltaSchedule::Critical => {
            let kb = k0 * lake.depth[tk] / (2.0 * PI);
            let mu_t = kb + q[tk];
            s.mu_target = Some(mu_t);
            s.sup_k_target = Some(kb);
            s.mu_deviation = d.iter().map(|r| (r.mu - mu_t).abs() / mu_t.abs()).collect();
            s.sup_k_deviation = d.iter().map(|r| (r.sup_k - kb).abs() / kb.abs()).collect();
        }
        DeltaSchedule::BelowCritical => {
            let qm = report.max_q;
            s.mu_target = Some(qm);
            s.sup_k_target = Some(0.0);
            s.mu_deviation = d.iter().map(|r| (r.mu - qm).abs() / qm.abs()).collect();
            s.sup_k_deviation = d.iter().map(|r| r.sup_k / qm.abs()).collect();
        }
    }
    s.sup_k_constant =
        d.iter().map(|r| (r.sup_k - bmax / (2.0 * PI) * k0 * r.delta * ln_inv(r.eps)) / r.delta).collect();
    let bd: Vec<(f64, f64)> =
        d.iter().filter(|r| r.dist_boundary > 0.0).map(|r| (ln_inv(r.eps).ln(), r.dist_boundary.ln())).collect();
    let (bx, by): (Vec<f64>, Vec<f64>) = bd.into_iter().unzip();
    s.boundary_decay_exponent = fit_slope(&bx, &by).map(|v| -v);
    s.final_support_excess = report
        .states
        .iter()
        .rev()
        .flatten()
        .next()
        .map(|st| support_excess(lake, &st.zeta, &report.target, l))
        .unwrap_or(f64::INFINITY);
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value, threshold, pass: value >= threshold }
    }

    fn flag(name: &str, ok: bool) -> Check {
        Check { name: name.into(), value: ok as u8 as f64, threshold: 1.0, pass: ok }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckThresholds {
    pub center_distance: f64,
    pub eta: f64,
    pub critical_relative: f64,
    pub below_relative: f64,
    pub target_radius: f64,
}

impl Default for CheckThresholds {
    fn default() -> Self {
        CheckThresholds { center_distance: 0.1, eta: 0.25, critical_relative: 0.25, below_relative: 0.1, target_radius: 0.2 }
    }
}

/// Endpoint and trend checks for the regime of `report`.
pub fn regime_checks(report: &SweepReport, t: &CheckThresholds) -> Vec<Check> {
    let s = &report.summary;
    let mut out = vec![Check::flag("all points solved", s.failed_points == 0)];
    let Some(last) = report.last() else { return out };
    let first = report.diagnostics().next().unwrap();
    match report.regime {
        DeltaSchedule::AboveCritical => {
            out.push(Check::at_most("final |X - argmax b|", last.target_distance, t.center_distance));
            out.push(Check::flag(
                "|X - argmax b| decreasing",
                s.target_distance_nonincreasing && last.target_distance < first.target_distance + report.h,
            ));
            out.push(Check::at_least("min dist(supp, boundary)", s.eta_estimate, t.eta));
        }
        DeltaSchedule::Critical => {
            out.push(Check::at_most("final |X - argmax phi|", last.target_distance, t.center_distance));
            out.push(Check::at_most(
                "final |mu - target|/target",
                s.mu_deviation.last().copied().unwrap_or(f64::NAN),
                t.critical_relative,
            ));
            out.push(Check::at_most(
                "final |sup K - target|/target",
                s.sup_k_deviation.last().copied().unwrap_or(f64::NAN),
                t.critical_relative,
            ));
        }
        DeltaSchedule::BelowCritical => {
            out.push(Check::at_most(
                "final |mu - max q|/max q",
                s.mu_deviation.last().copied().unwrap_or(f64::NAN),
                t.below_relative,
            ));
            out.push(Check::at_most(
                "final sup K / max q",
                s.sup_k_deviation.last().copied().unwrap_or(f64::NAN),
                t.below_relative,
            ));
            out.push(Check::at_most("final support distance beyond l", s.final_support_excess, 0.0));
        }
    }
    out
}

/// Largest amount by which an active cell lies farther than `l` from the
/// target set (0 when the support is inside the neighbourhood).
pub fn support_excess(lake: &Lake, zeta: &Field, target: &Target, l: f64) -> f64 {
    active_cells(lake, zeta, DEFAULT_SUPPORT_THRESHOLD)
        .iter()
        .map(|&k| target.distance(lake.grid.center(k)) - l)
        .fold(0.0, f64::max)
}
