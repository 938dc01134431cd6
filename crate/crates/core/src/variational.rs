//! Energy maximization over the admissible class by the
//! linearize-and-rearrange fixed point.
//!
//! Each step freezes `ψ_free = 𝒦ζ + q`, picks the multiplier `μ` that makes
//! `min((δ/ε²) f(ψ_free − μ), Λδ/ε²)` carry the prescribed mass, and takes that
//! truncated field as the next iterate.

use serde::{Deserialize, Serialize};

use crate::elliptic::OperatorHandle;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Field;
use crate::geometry::{dist, Lake, Point};
use crate::nonlinearity::VorticityFunction;

pub type VorticityField = Field;

/// Relative slack below the cap at which a cell counts as patch.
pub const PATCH_TIE: f64 = 1e-9;
/// Relative energy slack granted to the ascent check.
pub const ASCENT_SLACK: f64 = 1e-10;

const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleParams {
    pub eps: f64,
    pub delta: f64,
    pub kappa0: f64,
    pub lambda: f64,
}

impl AdmissibleParams {
    /// Pointwise upper bound `Λδ/ε²`.
    pub fn cap(&self) -> f64 {
        self.lambda * self.delta / (self.eps * self.eps)
    }

    /// `δ/ε²`.
    pub fn amplitude(&self) -> f64 {
        self.delta / (self.eps * self.eps)
    }

    /// Prescribed mass `κ₀δ`.
    pub fn target_mass(&self) -> f64 {
        self.kappa0 * self.delta
    }

    pub fn validate(&self, lake: &Lake, vf: &VorticityFunction) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("delta", self.delta), ("kappa0", self.kappa0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let floor = vf.jump() + 1.0;
        if !(self.lambda.is_finite() && self.lambda > floor) {
            return Err(Error::Config(format!("lambda must exceed f(0+) + 1 = {floor}, got {}", self.lambda)));
        }
        let capacity = self.cap() * lake.weighted_area();
        if capacity < self.target_mass() {
            return Err(Error::Unattainable { target: self.target_mass(), capacity });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energy {
    pub e_q: f64,
    pub f_eps: f64,
    pub total: f64,
}

/// Everything a solve needs, borrowed from the caller.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub op: &'a OperatorHandle,
    pub q: &'a Field,
    pub params: AdmissibleParams,
    pub vf: &'a VorticityFunction,
}

impl<'a> Problem<'a> {
    pub fn new(op: &'a OperatorHandle, q: &'a Field, params: AdmissibleParams, vf: &'a VorticityFunction) -> Result<Self> {
        vf.validate()?;
        if !vf.is_monotone() {
            return Err(Error::Config("vorticity function must be strictly increasing on [0, inf)".into()));
        }
        params.validate(op.lake(), vf)?;
        Ok(Problem { op, q, params, vf })
    }

    pub fn lake(&self) -> &'a Lake {
        self.op.lake()
    }
}

pub fn mass(lake: &Lake, zeta: &Field) -> f64 {
    lake.interior.iter().map(|&k| zeta[k] * lake.depth[k]).sum::<f64>() * lake.cell_area
}

fn l1_nu_diff(lake: &Lake, a: &Field, b: &Field) -> f64 {
    lake.interior.iter().map(|&k| (a[k] - b[k]).abs() * lake.depth[k]).sum::<f64>() * lake.cell_area
}

/// Energy of `ζ` given `𝒦ζ` already computed.
pub fn energy_with_k(problem: &Problem, zeta: &Field, kzeta: &Field) -> Energy {
    let lake = problem.lake();
    let p = &problem.params;
    let scale = p.eps * p.eps / p.delta;
    let (mut quad, mut lin, mut pen) = (0.0, 0.0, 0.0);
    for &k in &lake.interior {
        let w = lake.depth[k];
        quad += zeta[k] * kzeta[k] * w;
        lin += problem.q[k] * zeta[k] * w;
        pen += problem.vf.conjugate(scale * zeta[k]) * w;
    }
    let e_q = (0.5 * quad + lin) * lake.cell_area;
    let f_eps = p.amplitude() * pen * lake.cell_area;
    Energy { e_q, f_eps, total: e_q - f_eps }
}

pub fn energy(problem: &Problem, zeta: &Field) -> Result<Energy> {
    let kz = problem.op.apply_k(zeta)?;
    Ok(energy_with_k(problem, zeta, &kz))
}

/// Result of the bathtub rearrangement of a frozen stream function.
#[derive(Debug, Clone)]
pub struct Bathtub {
    pub mu: f64,
    pub zeta: Field,
}

/// Mass-constrained truncation `min((δ/ε²) f(ψ_free − μ), Λδ/ε²)`; `μ` by
/// bisection on the nonincreasing mass map, ties resolved toward larger `μ`.
pub fn bathtub(lake: &Lake, params: &AdmissibleParams, vf: &VorticityFunction, psi_free: &Field) -> Result<Bathtub> {
    if !psi_free.is_finite() {
        return Err(Error::NonFinite("stream function passed to the multiplier search".into()));
    }
    let a = params.amplitude();
    let cap = params.cap();
    let target = params.target_mass();
    let s_cap = vf.f_inv(params.lambda);
    let cell = |psi: f64, mu: f64| (a * vf.f(psi - mu)).min(cap);
    let capacity = cap * lake.weighted_area();
    if capacity < target {
        return Err(Error::Unattainable { target, capacity });
    }

    let mut lo = psi_free.min_interior(lake) - s_cap - 1.0;
    let mut hi = psi_free.max_interior(lake);
    let mut active: Vec<usize> = lake.interior.clone();
    let mut base = 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let m = base + active.iter().map(|&k| cell(psi_free[k], mid) * lake.depth[k]).sum::<f64>() * lake.cell_area;
        if m >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        // cells at or below lo never switch on; those saturated at hi stay capped
        let mut moved = 0.0;
        active.retain(|&k| {
            let psi = psi_free[k];
            if psi <= lo {
                false
            } else if psi - hi >= s_cap {
                moved += cap * lake.depth[k];
                false
            } else {
                true
            }
        });
        base += moved * lake.cell_area;
    }

    let mut z_lo = Field::zeros(lake);
    let mut z_hi = Field::zeros(lake);
    for &k in &lake.interior {
        z_lo[k] = cell(psi_free[k], lo);
        z_hi[k] = cell(psi_free[k], hi);
    }
    let (m_lo, m_hi) = (mass(lake, &z_lo), mass(lake, &z_hi));
    let theta = if m_lo > m_hi { ((target - m_hi) / (m_lo - m_hi)).clamp(0.0, 1.0) } else { 0.0 };
    let mut zeta = z_hi;
    for &k in &lake.interior {
        zeta[k] += theta * (z_lo[k] - zeta[k]);
    }
    Ok(Bathtub { mu: hi, zeta })
}

/// Multiplier that makes the truncated field carry mass `κ₀δ`.
pub fn mu_from_mass(lake: &Lake, params: &AdmissibleParams, vf: &VorticityFunction, psi_free: &Field) -> Result<f64> {
    Ok(bathtub(lake, params, vf, psi_free)?.mu)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveState {
    pub zeta: Field,
    /// `𝒦ζ + q − μ`.
    pub psi: Field,
    pub mu: f64,
    pub energy: Energy,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Last `‖ζ_{k+1} − ζ_k‖_{L¹(ν)}`.
    pub last_change: f64,
    pub ascent_violations: usize,
    #[serde(skip)]
    kzeta: Field,
}

impl SolveState {
    /// State for an admissible starting field.
    pub fn from_field(problem: &Problem, zeta: Field) -> Result<SolveState> {
        let lake = problem.lake();
        check_admissible(problem, &zeta)?;
        let kzeta = problem.op.apply_k(&zeta)?;
        let energy = energy_with_k(problem, &zeta, &kzeta);
        let psi_free = add(&kzeta, problem.q, lake);
        let mu = mu_from_mass(lake, &problem.params, problem.vf, &psi_free)?;
        Ok(SolveState {
            psi: shift(&psi_free, mu, lake),
            zeta,
            mu,
            energy,
            energy_trace: vec![energy.total],
            iterations: 0,
            converged: false,
            last_change: f64::INFINITY,
            ascent_violations: 0,
            kzeta,
        })
    }

    pub fn kzeta(&self) -> &Field {
        &self.kzeta
    }

    /// `ψ_free = 𝒦ζ + q`.
    pub fn psi_free(&self, problem: &Problem) -> Field {
        add(&self.kzeta, problem.q, problem.lake())
    }

    pub fn to_json(&self, lake: &Lake) -> serde_json::Value {
        serde_json::json!({
            "grid": {
                "nx": lake.grid.nx,
                "ny": lake.grid.ny,
                "h": lake.grid.h,
                "origin": lake.grid.origin,
                "preset": lake.preset_id,
                "layout": "row-major, x fastest",
            },
            "zeta": self.zeta,
            "mu": self.mu,
            "energy": self.energy,
            "energy_trace": self.energy_trace,
            "iterations": self.iterations,
            "converged": self.converged,
            "last_change": self.last_change,
            "ascent_violations": self.ascent_violations,
        })
    }
}

fn add(a: &Field, b: &Field, lake: &Lake) -> Field {
    let mut out = Field::zeros(lake);
    for &k in &lake.interior {
        out[k] = a[k] + b[k];
    }
    out
}

fn shift(a: &Field, mu: f64, lake: &Lake) -> Field {
    let mut out = Field::zeros(lake);
    for &k in &lake.interior {
        out[k] = a[k] - mu;
    }
    out
}

fn check_admissible(problem: &Problem, zeta: &Field) -> Result<()> {
    let lake = problem.lake();
    let cap = problem.params.cap();
    let target = problem.params.target_mass();
    if lake.interior.iter().any(|&k| !(zeta[k] >= 0.0 && zeta[k] <= cap * (1.0 + 1e-12))) {
        return Err(Error::Infeasible(format!("initial field violates 0 <= zeta <= {cap:e}")));
    }
    let m = mass(lake, zeta);
    if (m - target).abs() > 1e-8 * target {
        return Err(Error::Infeasible(format!("initial field has mass {m:e}, expected {target:e}")));
    }
    Ok(())
}

/// One fixed-point step; costs a single elliptic solve.
pub fn iterate_step(problem: &Problem, state: &SolveState) -> Result<SolveState> {
    let lake = problem.lake();
    let psi_free = state.psi_free(problem);
    let bt = bathtub(lake, &problem.params, problem.vf, &psi_free)?;
    let kzeta = problem.op.apply_k(&bt.zeta)?;
    let energy = energy_with_k(problem, &bt.zeta, &kzeta);
    let change = l1_nu_diff(lake, &bt.zeta, &state.zeta);
    let mut trace = state.energy_trace.clone();
    trace.push(energy.total);
    let violated = energy.total < state.energy.total - ASCENT_SLACK * state.energy.total.abs();
    Ok(SolveState {
        psi: shift(&psi_free, bt.mu, lake),
        zeta: bt.zeta,
        mu: bt.mu,
        energy,
        energy_trace: trace,
        iterations: state.iterations + 1,
        converged: false,
        last_change: change,
        ascent_violations: state.ascent_violations + violated as usize,
        kzeta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Uniform test patch centred at the point.
    Point { at: Point },
    /// Pattern search for the best test-patch centre from these starts
    /// (defaults when empty).
    Search {
        #[serde(default)]
        starts: Vec<Point>,
    },
    Field { zeta: Field },
}

impl Default for Init {
    fn default() -> Self {
        Init::Search { starts: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iterations: usize,
    /// Convergence when `‖Δζ‖_{L¹(ν)} ≤ tolerance·κ₀δ`.
    pub tolerance: f64,
    /// Try whole-cell translations of the converged field and keep those
    /// that raise the energy.
    pub polish: bool,
    pub max_polish_moves: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iterations: 500, tolerance: 1e-8, polish: false, max_polish_moves: 64, exec: Exec::default() }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Runs the fixed point from `start` to convergence or the iteration cap.
pub fn iterate_to_convergence(problem: &Problem, start: SolveState, opts: &SolveOptions) -> Result<SolveState> {
    let tol = opts.tolerance * problem.params.target_mass();
    let mut state = start;
    let mut steps = 0;
    while steps < opts.max_iterations {
        let next = iterate_step(problem, &state)?;
        steps += 1;
        state = next;
        if state.last_change <= tol {
            state.converged = true;
            break;
        }
    }
    if state.converged {
        // multiplier and stream function of the final field itself
        let psi_free = state.psi_free(problem);
        let mu = mu_from_mass(problem.lake(), &problem.params, problem.vf, &psi_free)?;
        state.mu = mu;
        state.psi = shift(&psi_free, mu, problem.lake());
    }
    Ok(state)
}

pub fn solve_vortex(problem: &Problem, init: &Init, opts: &SolveOptions) -> Result<SolveState> {
    opts.validate()?;
    let zeta0 = match init {
        Init::Point { at } => test_patch(problem.lake(), &problem.params, *at)?,
        Init::Field { zeta } => zeta.clone(),
        Init::Search { starts } => {
            let starts = if starts.is_empty() { default_starts(problem) } else { starts.clone() };
            let at = seed_search(problem, &starts, opts.exec)?;
            test_patch(problem.lake(), &problem.params, at)?
        }
    };
    let start = SolveState::from_field(problem, zeta0)?;
    let mut state = iterate_to_convergence(problem, start, opts)?;
    if opts.polish && state.converged {
        state = translation_polish(problem, state, opts)?;
    }
    Ok(state)
}

/// Radius `ε√(κ₀/(π b₀))` of the test patch centred where `b = b₀`.
pub fn test_patch_radius(params: &AdmissibleParams, b0: f64) -> f64 {
    params.eps * (params.kappa0 / (std::f64::consts::PI * b0)).sqrt()
}

/// Uniform-vortex test field `(δ b₀/(ε² b)) χ_{B(x₀, r)}`, rescaled to the exact
/// discrete mass; falls back to filling cells by distance at the cap when the
/// ball is too small to hold the mass.
pub fn test_patch(lake: &Lake, params: &AdmissibleParams, center: Point) -> Result<Field> {
    if !lake.domain.contains(center) {
        return Err(Error::Domain(format!("patch centre ({}, {}) lies outside the lake", center[0], center[1])));
    }
    let b0 = lake.depth_at(center).max(crate::geometry::DEPTH_FLOOR);
    let r = test_patch_radius(params, b0);
    let cap = params.cap();
    let target = params.target_mass();
    let mut zeta = Field::zeros(lake);
    let mut any = false;
    for &k in &lake.interior {
        if dist(lake.grid.center(k), center) <= r {
            zeta[k] = params.amplitude() * b0 / lake.depth[k];
            any = true;
        }
    }
    if !any {
        let k = lake.nearest_interior(center);
        zeta[k] = 1.0;
    }
    let m = mass(lake, &zeta);
    let scale = target / m;
    let fits = lake.interior.iter().all(|&k| zeta[k] * scale <= cap);
    if fits {
        for &k in &lake.interior {
            zeta[k] *= scale;
        }
        return Ok(zeta);
    }
    let mut order = lake.interior.clone();
    order.sort_by(|&a, &b| {
        dist(lake.grid.center(a), center).total_cmp(&dist(lake.grid.center(b), center)).then(a.cmp(&b))
    });
    let mut zeta = Field::zeros(lake);
    let mut left = target;
    for k in order {
        let w = lake.depth[k] * lake.cell_area;
        let v = (left / w).min(cap);
        zeta[k] = v;
        left -= v * w;
        if left <= 0.0 {
            break;
        }
    }
    Ok(zeta)
}

/// Seed objective: energy after one fixed-point step from the test patch.
/// The raw patch energy is dominated by the conjugate penalty of its level,
/// which jitters with the cell count when `f` jumps at zero.
fn patch_energy(problem: &Problem, center: Point) -> Result<f64> {
    let lake = problem.lake();
    let b0 = lake.depth_at(center).max(crate::geometry::DEPTH_FLOOR);
    if lake.dist_to_boundary(center) < test_patch_radius(&problem.params, b0) + lake.grid.h {
        return Ok(f64::NEG_INFINITY);
    }
    one_step_energy(problem, center)
}

fn one_step_energy(problem: &Problem, center: Point) -> Result<f64> {
    let lake = problem.lake();
    let z = test_patch(lake, &problem.params, center)?;
    let s0 = SolveState::from_field(problem, z)?;
    Ok(iterate_step(problem, &s0)?.energy.total)
}

/// Candidate starts: the domain centre, the argmax cells of `b`, `q` and
/// `κ₀b/4π + q`, and four points halfway to the boundary.
pub fn default_starts(problem: &Problem) -> Vec<Point> {
    let lake = problem.lake();
    let c = lake.domain.center();
    let argmax = |g: &dyn Fn(usize) -> f64| -> Point {
        let mut best = lake.interior[0];
        for &k in &lake.interior {
            if g(k) > g(best) {
                best = k;
            }
        }
        lake.grid.center(best)
    };
    let kappa = problem.params.kappa0;
    let mut starts = vec![
        c,
        argmax(&|k| lake.depth[k]),
        argmax(&|k| problem.q[k]),
        argmax(&|k| kappa * lake.depth[k] / (4.0 * std::f64::consts::PI) + problem.q[k]),
    ];
    let reach = 0.5 * lake.dist_to_boundary(c);
    for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
        starts.push([c[0] + reach * dx, c[1] + reach * dy]);
    }
    starts
}

/// Moves `p` toward the domain centre until a test patch of the local
/// radius fits a cell away from the boundary.
fn pull_inside(problem: &Problem, p: Point) -> Point {
    let lake = problem.lake();
    let c = lake.domain.center();
    let mut p = p;
    for _ in 0..64 {
        let fits = lake.domain.contains(p) && {
            let b0 = lake.depth_at(p).max(crate::geometry::DEPTH_FLOOR);
            lake.dist_to_boundary(p) >= test_patch_radius(&problem.params, b0) + lake.grid.h
        };
        if fits {
            return p;
        }
        p = [c[0] + 0.9 * (p[0] - c[0]), c[1] + 0.9 * (p[1] - c[1])];
    }
    c
}

/// Compass search over patch centres from each start; returns the centre
/// with the largest test-patch energy (earliest start wins ties).
pub fn seed_search(problem: &Problem, starts: &[Point], exec: Exec) -> Result<Point> {
    let h = problem.lake().grid.h;
    let runs: Vec<Result<(Point, f64)>> = exec.map(starts, |&s| {
        let mut x = pull_inside(problem, s);
        let mut ex = patch_energy(problem, x)?;
        let mut step = 0.1f64.max(h);
        while step >= h {
            let mut best: Option<(Point, f64)> = None;
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let y = [x[0] + step * dx, x[1] + step * dy];
                let ey = patch_energy(problem, y)?;
                if ey > ex && best.is_none_or(|(_, eb)| ey > eb) {
                    best = Some((y, ey));
                }
            }
            match best {
                Some((y, ey)) => {
                    x = y;
                    ex = ey;
                }
                None => step *= 0.5,
            }
        }
        Ok((x, ex))
    });
    let mut best: Option<(Point, f64)> = None;
    for r in runs {
        let (x, e) = r?;
        if best.is_none_or(|(_, eb)| e > eb) {
            best = Some((x, e));
        }
    }
    match best {
        Some((x, e)) if e.is_finite() => return Ok(x),
        _ => {}
    }
    // lakes only a few cells wide: no patch clears the boundary, so rank the
    // starts themselves
    let lake = problem.lake();
    let mut best: Option<(Point, f64)> = None;
    for &s in starts.iter().filter(|&&s| lake.domain.contains(s)) {
        let e = one_step_energy(problem, s)?;
        if best.is_none_or(|(_, eb)| e > eb) {
            best = Some((s, e));
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| Error::Infeasible("no seed admits a test patch inside the lake".into()))
}

fn translate(problem: &Problem, zeta: &Field, di: isize, dj: isize) -> Option<Field> {
    let lake = problem.lake();
    let g = &lake.grid;
    let mut out = Field::zeros(lake);
    for &k in &lake.interior {
        if zeta[k] == 0.0 {
            continue;
        }
        let (i, j) = g.coords(k);
        let (ni, nj) = (i as isize + di, j as isize + dj);
        if ni < 0 || nj < 0 || ni >= g.nx as isize || nj >= g.ny as isize {
            return None;
        }
        let nk = g.index(ni as usize, nj as usize);
        if !lake.mask[nk] {
            return None;
        }
        out[nk] = zeta[k];
    }
    let scale = problem.params.target_mass() / mass(lake, &out);
    let cap = problem.params.cap();
    for &k in &lake.interior {
        out[k] *= scale;
        if out[k] > cap {
            return None;
        }
    }
    Some(out)
}

/// Greedy whole-cell translations of a converged state, each re-converged
/// and kept only when the final energy increases.
fn translation_polish(problem: &Problem, mut state: SolveState, opts: &SolveOptions) -> Result<SolveState> {
    const MOVES: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    for _ in 0..opts.max_polish_moves {
        let candidates: Vec<Option<(Field, f64)>> = opts.exec.map(&MOVES, |&(di, dj)| {
            let z = translate(problem, &state.zeta, di, dj)?;
            let e = energy(problem, &z).ok()?.total;
            Some((z, e))
        });
        let mut best: Option<(Field, f64)> = None;
        for c in candidates.into_iter().flatten() {
            if best.as_ref().is_none_or(|(_, eb)| c.1 > *eb) {
                best = Some(c);
            }
        }
        let Some((z, e)) = best else { break };
        if e <= state.energy.total {
            break;
        }
        let moved = iterate_to_convergence(problem, SolveState::from_field(problem, z)?, opts)?;
        if !moved.converged || moved.energy.total <= state.energy.total {
            break;
        }
        let mut trace = std::mem::take(&mut state.energy_trace);
        trace.extend_from_slice(&moved.energy_trace);
        let iterations = state.iterations + moved.iterations;
        let violations = state.ascent_violations + moved.ascent_violations;
        state = moved;
        state.energy_trace = trace;
        state.iterations = iterations;
        state.ascent_violations = violations;
    }
    Ok(state)
}

/// `ν`-measure of the cells where `ζ` sits at the cap.
pub fn patch_measure(lake: &Lake, state: &SolveState, params: &AdmissibleParams) -> f64 {
    let level = (1.0 - PATCH_TIE) * params.cap();
    let w = lake.interior.iter().filter(|&&k| state.zeta[k] >= level).fold(0.0, |acc, &k| acc + lake.depth[k]);
    w * lake.cell_area
}

/// Lower bound `−f⁻¹(f(0⁺) + 1) + min q − 1` on the multiplier.
pub fn mu_lower_bound(problem: &Problem) -> f64 {
    -problem.vf.f_inv(problem.vf.jump() + 1.0) + problem.q.min_interior(problem.lake()) - 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Worst cell-wise violation of the three-case conditions, in units of
    /// the cap for `ζ` and of `1 + ‖ψ‖_∞` for `ψ`.
    pub max_violation: f64,
    pub mass_error: f64,
    pub mu: f64,
    pub mu_lower_bound: f64,
    pub patch_measure: f64,
}

impl OptimalityReport {
    pub fn holds(&self, tolerance: f64, target_mass: f64) -> bool {
        self.max_violation <= tolerance && self.mass_error <= 1e-8 * target_mass && self.mu >= self.mu_lower_bound
    }
}

/// Checks `ζ = 0 ⇒ ψ ≤ 0`, `ζ = Λδ/ε² ⇒ ψ ≥ f⁻¹(Λ)`, and
/// `0 < ζ < Λδ/ε² ⇒ ζ = (δ/ε²) f(ψ)` (or `ψ = 0` with `ζ ≤ (δ/ε²) f(0⁺)`)
/// cell by cell.
pub fn check_optimality(problem: &Problem, state: &SolveState) -> OptimalityReport {
    let lake = problem.lake();
    let p = &problem.params;
    let cap = p.cap();
    let a = p.amplitude();
    let s_cap = problem.vf.f_inv(p.lambda);
    let psi_scale = 1.0 + lake.interior.iter().map(|&k| state.psi[k].abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for &k in &lake.interior {
        let z = state.zeta[k];
        let psi = state.psi[k];
        let v = if z <= 0.0 {
            psi.max(0.0) / psi_scale
        } else if z >= (1.0 - PATCH_TIE) * cap {
            (s_cap - psi).max(0.0) / psi_scale
        } else {
            let smooth = (z - a * problem.vf.f(psi)).abs() / cap;
            let jump = (psi.abs() / psi_scale).max((z - a * problem.vf.jump()).max(0.0) / cap);
            smooth.min(jump)
        };
        worst = worst.max(v);
    }
    OptimalityReport {
        max_violation: worst,
        mass_error: (mass(lake, &state.zeta) - p.target_mass()).abs(),
        mu: state.mu,
        mu_lower_bound: mu_lower_bound(problem),
        patch_measure: patch_measure(lake, state, p),
    }
}

/// Smooth bump `exp(1 − 1/(1 − ρ²))` of radius `r` about `c`, with its gradient.
fn bump(c: Point, r: f64, x: Point) -> (f64, [f64; 2]) {
    let d = [x[0] - c[0], x[1] - c[1]];
    let rho2 = (d[0] * d[0] + d[1] * d[1]) / (r * r);
    if rho2 >= 1.0 {
        return (0.0, [0.0, 0.0]);
    }
    let t = 1.0 - rho2;
    let v = (1.0 - 1.0 / t).exp();
    let g = -2.0 * v / (t * t * r * r);
    (v, [g * d[0], g * d[1]])
}

/// Fixed family of bumps: centres on a 7×7 lattice over `[-0.75, 0.75]²`
/// about the domain centre, radii 0.25 and 0.5, kept when the support lies
/// inside `D`.
pub fn steady_test_family(lake: &Lake) -> Vec<(Point, f64)> {
    let c = lake.domain.center();
    let mut out = Vec::new();
    for r in [0.25, 0.5] {
        for j in 0..7 {
            for i in 0..7 {
                let p = [c[0] - 0.75 + 0.25 * i as f64, c[1] - 0.75 + 0.25 * j as f64];
                if lake.domain.contains(p) && lake.dist_to_boundary(p) > r {
                    out.push((p, r));
                }
            }
        }
    }
    out
}

/// Centred-difference `∇⊥ψ = (∂₂ψ, −∂₁ψ)` at an interior cell; one-sided
/// where a neighbour is outside the mask.
fn perp_grad(lake: &Lake, psi: &Field, k: usize) -> [f64; 2] {
    use crate::geometry::Dir;
    let h = lake.grid.h;
    let val = |d: Dir| lake.neighbor(k, d).filter(|&n| lake.mask[n]).map(|n| psi[n]);
    let diff = |plus: Dir, minus: Dir| match (val(plus), val(minus)) {
        (Some(p), Some(m)) => (p - m) / (2.0 * h),
        (Some(p), None) => (p - psi[k]) / h,
        (None, Some(m)) => (psi[k] - m) / h,
        (None, None) => 0.0,
    };
    let d1 = diff(Dir::East, Dir::West);
    let d2 = diff(Dir::North, Dir::South);
    [d2, -d1]
}

/// `max_φ |Σ ζ ∇⊥ψ·∇φ h²| / (‖ζ‖_{L¹} ‖∇φ‖_∞)` over [`steady_test_family`].
pub fn steady_residual(lake: &Lake, zeta: &Field, psi: &Field) -> f64 {
    let l1: f64 = lake.interior.iter().map(|&k| zeta[k].abs()).sum::<f64>() * lake.cell_area;
    if l1 == 0.0 {
        return 0.0;
    }
    let support: Vec<(usize, [f64; 2])> =
        lake.interior.iter().filter(|&&k| zeta[k] != 0.0).map(|&k| (k, perp_grad(lake, psi, k))).collect();
    let mut worst: f64 = 0.0;
    for (c, r) in steady_test_family(lake) {
        let mut acc = 0.0;
        for &(k, v) in &support {
            let (_, g) = bump(c, r, lake.grid.center(k));
            acc += zeta[k] * (v[0] * g[0] + v[1] * g[1]);
        }
        let gmax = lake
            .interior
            .iter()
            .map(|&k| {
                let (_, g) = bump(c, r, lake.grid.center(k));
                g[0].hypot(g[1])
            })
            .fold(0.0, f64::max);
        if gmax > 0.0 {
            worst = worst.max((acc * lake.cell_area).abs() / (l1 * gmax));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{assemble_operator, BoundaryFlux};
    use crate::geometry::build_lake;
    use std::sync::Arc;

    fn setup(preset: &str, res: usize) -> (OperatorHandle, Field) {
        let lake = Arc::new(build_lake(preset, res).unwrap());
        let op = assemble_operator(lake).unwrap();
        let q = op.solve_background(&BoundaryFlux::Zero).unwrap();
        (op, q)
    }

    #[test]
    fn zero_field_has_zero_energy_and_mass() {
        let (op, q) = setup("disk_constant_b", 32);
        let vf = VorticityFunction::Power { p: 2.0 };
        let params = AdmissibleParams { eps: 0.2, delta: 0.3, kappa0: 1.0, lambda: 50.0 };
        let pr = Problem::new(&op, &q, params, &vf).unwrap();
        let z = Field::zeros(op.lake());
        assert_eq!(energy(&pr, &z).unwrap(), Energy::default());
        assert_eq!(mass(op.lake(), &z), 0.0);
    }

    #[test]
    fn uniform_field_mass_is_disk_area() {
        let (op, _) = setup("disk_constant_b", 128);
        let lake = op.lake();
        let one = Field::from_fn(lake, |_| 1.0);
        assert!((mass(lake, &one) - std::f64::consts::PI).abs() < 4.0 * lake.grid.h);
    }

    #[test]
    fn mu_closed_form_without_truncation() {
        let (op, _) = setup("disk_constant_b", 32);
        let lake = op.lake();
        let vf = VorticityFunction::JumpLinear { c: 0.0 };
        let params = AdmissibleParams { eps: 0.3, delta: 0.2, kappa0: 1.0, lambda: 1e6 };
        let c = 2.0;
        let psi = Field::from_fn(lake, |_| c);
        let mu = mu_from_mass(lake, &params, &vf, &psi).unwrap();
        let want = c - params.kappa0 * params.eps * params.eps / lake.weighted_area();
        assert!((mu - want).abs() < 1e-9, "{mu} vs {want}");
    }

    #[test]
    fn mass_is_nonincreasing_in_mu_and_met_exactly() {
        let (op, _) = setup("disk_interior_max_b", 32);
        let lake = op.lake();
        let vf = VorticityFunction::JumpLinear { c: 1.0 };
        let params = AdmissibleParams { eps: 0.2, delta: 0.3, kappa0: 1.0, lambda: 50.0 };
        let psi = Field::from_fn(lake, |p| 1.0 - p[0] * p[0] - 2.0 * p[1] * p[1]);
        let bt = bathtub(lake, &params, &vf, &psi).unwrap();
        assert!((mass(lake, &bt.zeta) - params.target_mass()).abs() <= 1e-8 * params.target_mass());
        let m = |mu: f64| mass(lake, &Field::from_fn(lake, |p| {
            let v = 1.0 - p[0] * p[0] - 2.0 * p[1] * p[1];
            (params.amplitude() * vf.f(v - mu)).min(params.cap())
        }));
        assert!(m(bt.mu - 0.1) >= m(bt.mu + 0.1));
    }

    #[test]
    fn unattainable_mass_is_rejected() {
        let (op, q) = setup("disk_constant_b", 32);
        let vf = VorticityFunction::Power { p: 2.0 };
        let params = AdmissibleParams { eps: 3.0, delta: 1.0, kappa0: 100.0, lambda: 2.0 };
        assert!(matches!(Problem::new(&op, &q, params, &vf), Err(Error::Unattainable { .. })));
    }

    #[test]
    fn test_patch_has_exact_mass_and_respects_cap() {
        let (op, _) = setup("disk_interior_max_b", 64);
        let lake = op.lake();
        let params = AdmissibleParams { eps: 0.2, delta: 0.3, kappa0: 1.0, lambda: 50.0 };
        let z = test_patch(lake, &params, [0.1, -0.2]).unwrap();
        assert!((mass(lake, &z) - params.target_mass()).abs() < 1e-12);
        assert!(lake.interior.iter().all(|&k| z[k] <= params.cap()));
        let tiny = AdmissibleParams { eps: 0.001, ..params };
        let z = test_patch(lake, &tiny, [0.0, 0.0]).unwrap();
        assert!((mass(lake, &z) - tiny.target_mass()).abs() < 1e-12);
        assert!(lake.interior.iter().all(|&k| z[k] <= tiny.cap()));
    }

    #[test]
    fn solve_ascends_and_satisfies_optimality() {
        let (op, q) = setup("disk_interior_max_b", 48);
        let vf = VorticityFunction::Power { p: 2.0 };
        let params = AdmissibleParams { eps: 0.1, delta: 0.3, kappa0: 1.0, lambda: 50.0 };
        let pr = Problem::new(&op, &q, params, &vf).unwrap();
        let st = solve_vortex(&pr, &Init::Point { at: [0.0, 0.0] }, &SolveOptions::default()).unwrap();
        assert!(st.converged);
        assert_eq!(st.ascent_violations, 0);
        assert!(st.energy_trace.windows(2).all(|w| w[1] >= w[0] - ASCENT_SLACK * w[0].abs()));
        let rep = check_optimality(&pr, &st);
        assert!(rep.holds(1e-6, params.target_mass()), "{rep:?}");
        assert_eq!(rep.patch_measure, 0.0);
        let again = iterate_step(&pr, &st).unwrap();
        assert!(again.last_change <= 1e-8 * params.target_mass() * 10.0);
    }

    #[test]
    fn starved_truncation_fills_patch() {
        let (op, q) = setup("disk_interior_max_b", 32);
        let vf = VorticityFunction::Power { p: 2.0 };
        let params = AdmissibleParams { eps: 1.545, delta: 0.3, kappa0: 1.0, lambda: 1.01 };
        let pr = Problem::new(&op, &q, params, &vf).unwrap();
        let st = solve_vortex(&pr, &Init::Point { at: [0.0, 0.0] }, &SolveOptions::default()).unwrap();
        assert!(patch_measure(op.lake(), &st, &params) > 0.0);
    }

    #[test]
    fn radial_state_is_nearly_steady() {
        let (op, q) = setup("disk_constant_b", 64);
        let lake = op.lake();
        let zeta = Field::from_fn(lake, |p| (1.0 - 4.0 * (p[0] * p[0] + p[1] * p[1])).max(0.0));
        let psi = op.apply_k(&zeta).unwrap();
        let r = steady_residual(lake, &zeta, &psi);
        assert!(r <= 10.0 * lake.grid.h, "{r}");
        let _ = q;
    }
}
