//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lakevortex::asymptotics::{
    fit_slope, regime_checks, run_sweep, CheckThresholds, DeltaSchedule, SweepConfig, SweepReport,
};
use lakevortex::elliptic::{assemble_operator, BoundaryFlux, OperatorHandle};
use lakevortex::error::Error;
use lakevortex::exec::Exec;
use lakevortex::field::Field;
use lakevortex::geometry::{build_lake, Lake};
use lakevortex::kernel::{constant_depth_representation, upper_bound_test, KernelTestConfig};
use lakevortex::nonlinearity::VorticityFunction;
use lakevortex::oracle::brute_force_oracle;
use lakevortex::variational::{
    check_optimality, solve_vortex, steady_residual, AdmissibleParams, Init, Problem, SolveOptions, SolveState,
};

use common::{disk_indicator, patch_center_value, sample_bilinear};

const OPTIMALITY_TOLERANCE: f64 = 1e-6;
const FIXTURE_RESOLUTION: usize = 257;
const REFINED_PAIR: (usize, usize) = (129, 257);
const FIXTURE_AMPLITUDE: f64 = 0.015;
const FIXTURE_LAMBDA: f64 = 50.0;
const FIXTURE_EPS: [f64; 7] = [0.2, 0.14, 0.1, 0.07, 0.05, 0.035, 0.025];

struct Outcome {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn line(id: &'static str, name: &'static str, pass: bool, detail: String) -> Outcome {
    let o = Outcome { id, name, pass, detail };
    println!("{} [{}] {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    o
}

/// Every converged state checked under the optimality and ascent criteria.
struct Regression<'a> {
    label: String,
    problem: Problem<'a>,
    state: &'a SolveState,
}

fn fixture_vf() -> VorticityFunction {
    VorticityFunction::JumpLinear { c: 0.5 }
}

fn fixture_operator(resolution: usize) -> (OperatorHandle, Field) {
    let lake = Arc::new(build_lake("disk_interior_max_b", resolution).expect("fixture lake"));
    let op = assemble_operator(lake).expect("fixture operator");
    let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: FIXTURE_AMPLITUDE }).expect("background");
    (op, q)
}

struct Tiny {
    op: OperatorHandle,
    q: Field,
    params: AdmissibleParams,
}

fn tiny_lakes() -> Vec<(&'static str, Tiny)> {
    let params = AdmissibleParams { eps: 1.0, delta: 1.0, kappa0: 1.0, lambda: 4.0 };
    let specs: [(&str, usize, usize, f64, Option<Vec<f64>>); 3] = [
        ("1 cell", 1, 1, 1.0, None),
        ("2 cells", 2, 1, 0.5, None),
        ("4 cells", 2, 2, 0.5, Some(vec![1.0, 0.8, 0.9, 1.2])),
    ];
    specs
        .into_iter()
        .map(|(name, nx, ny, h, depth)| {
            let op = assemble_operator(Arc::new(Lake::tiny_rect(nx, ny, h, depth).unwrap())).unwrap();
            let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 0.2 }).unwrap();
            (name, Tiny { op, q, params })
        })
        .collect()
}

fn criterion_oracle(tiny: &[(&str, Tiny)], vf: &VorticityFunction, states: &mut Vec<SolveState>) -> Outcome {
    let t0 = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t) in tiny {
        let pr = Problem::new(&t.op, &t.q, t.params, vf).unwrap();
        let oracle = brute_force_oracle(&pr, 8, Exec::default()).unwrap();
        let st = solve_vortex(&pr, &Init::default(), &SolveOptions::default()).unwrap();
        let margin = st.energy.total - (oracle.energy - oracle.gap);
        pass &= margin >= 0.0;
        parts.push(format!("{name}: E={:.6} oracle={:.6} gap={:.3}", st.energy.total, oracle.energy, oracle.gap));
        states.push(st);
    }
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    line("1", "oracle equivalence", pass, format!("{}; {:.1}s", parts.join("; "), elapsed.as_secs_f64()))
}

fn criterion_elliptic() -> Outcome {
    let t0 = Instant::now();
    let want = patch_center_value(0.5);
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    let mut adj: f64 = 0.0;
    for n in [64, 128, 256] {
        let lake = Arc::new(build_lake("disk_constant_b", n).unwrap());
        let op = assemble_operator(Arc::clone(&lake)).unwrap();
        let z = disk_indicator(&lake, 0.5);
        let kz = op.apply_k(&z).unwrap();
        errs.push((sample_bilinear(&lake, &kz, [0.0, 0.0]) - want).abs());
        hs.push(lake.grid.h);
        let u = Field::from_fn(&lake, |p| (2.0 * p[0]).sin() + p[1] * p[1]);
        let ku = op.apply_k(&u).unwrap();
        let a = u.dot_nu(&kz, &lake);
        let b = z.dot_nu(&ku, &lake);
        adj = adj.max((a - b).abs() / a.abs().max(b.abs()));
    }
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let order = fit_slope(&lx, &ly).unwrap_or(f64::NAN);
    let elapsed = t0.elapsed();
    let pass = order >= 1.8 && adj <= 1e-9 && elapsed < Duration::from_secs(120);
    line(
        "2",
        "elliptic correctness",
        pass,
        format!(
            "psi(0) ref {want:.7}, errors {:.2e} {:.2e} {:.2e}, order {order:.2}, adjointness {adj:.1e}; {:.1}s",
            errs[0],
            errs[1],
            errs[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_background() -> Outcome {
    let lake = Arc::new(build_lake("disk_constant_b", 128).unwrap());
    let op = assemble_operator(Arc::clone(&lake)).unwrap();
    let q = op.solve_background(&BoundaryFlux::Cosine { amplitude: 1.0 }).unwrap();
    let err = lake.interior.iter().map(|&k| (q[k] - lake.grid.center(k)[1]).abs()).fold(0.0, f64::max);
    let bound = 5.0 * lake.grid.h;
    let rejected = matches!(op.solve_background(&BoundaryFlux::Constant { value: 1.0 }), Err(Error::Compatibility { .. }));
    line(
        "3",
        "background flow",
        err <= bound && rejected,
        format!("|q - x2|_inf = {err:.2e} (bound {bound:.2e}), constant flux rejected: {rejected}"),
    )
}

fn criterion_optimality(runs: &[Regression]) -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for r in runs {
        let rep = check_optimality(&r.problem, r.state);
        worst = worst.max(rep.max_violation);
        let ok = r.state.converged
            && rep.holds(OPTIMALITY_TOLERANCE, r.problem.params.target_mass())
            && rep.patch_measure == 0.0;
        if !ok {
            failures.push(format!("{} (violation {:.1e}, patch {:.1e})", r.label, rep.max_violation, rep.patch_measure));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} states, worst violation {worst:.1e}", runs.len())
    } else {
        format!("{} of {} states fail: {}", failures.len(), runs.len(), failures.join(", "))
    };
    line("4", "optimality structure", failures.is_empty(), detail)
}

fn criterion_ascent(runs: &[Regression]) -> Outcome {
    let v: usize = runs.iter().map(|r| r.state.ascent_violations).sum();
    line("5", "monotone ascent", v == 0, format!("{v} violations over {} runs", runs.len()))
}

fn sweep(op: &OperatorHandle, q: &Field, vf: &VorticityFunction, schedule: DeltaSchedule) -> (SweepReport, Duration) {
    let cfg = SweepConfig {
        schedule,
        eps: FIXTURE_EPS.to_vec(),
        kappa0: 1.0,
        lambda: FIXTURE_LAMBDA,
        target_radius: 0.2,
        init: Init::default(),
        options: SolveOptions::default(),
    };
    let t0 = Instant::now();
    let r = run_sweep(op, q, vf, &cfg, Exec::default()).expect("sweep config is valid");
    (r, t0.elapsed())
}

fn criterion_regime(id: &'static str, name: &'static str, report: &SweepReport) -> Outcome {
    let checks = regime_checks(report, &CheckThresholds::default());
    let pass = checks.iter().all(|c| c.pass);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| format!("{} {:.4} vs {} {}", c.name, c.value, c.threshold, if c.pass { "ok" } else { "MISS" }))
        .collect();
    line(id, name, pass, detail.join("; "))
}

fn main() -> ExitCode {
    let t_all = Instant::now();
    let vf = fixture_vf();
    let tiny_vf = VorticityFunction::Power { p: 2.0 };
    let mut outcomes = Vec::new();

    let tiny = tiny_lakes();
    let mut tiny_states = Vec::new();
    outcomes.push(criterion_oracle(&tiny, &tiny_vf, &mut tiny_states));
    outcomes.push(criterion_elliptic());
    outcomes.push(criterion_background());

    let (op, q) = fixture_operator(FIXTURE_RESOLUTION);
    let schedules = [DeltaSchedule::AboveCritical, DeltaSchedule::Critical, DeltaSchedule::BelowCritical];
    let mut reports = Vec::new();
    let mut sweep_time = Duration::ZERO;
    for s in schedules {
        let (r, t) = sweep(&op, &q, &vf, s);
        println!("  sweep {} finished in {:.0}s", s.name(), t.as_secs_f64());
        sweep_time += t;
        reports.push(r);
    }

    let (coarse_op, coarse_q) = fixture_operator(REFINED_PAIR.0);
    let eps = 0.1;
    let critical_params = AdmissibleParams {
        eps,
        delta: 1.0 / (1.0 / eps).ln(),
        kappa0: 1.0,
        lambda: FIXTURE_LAMBDA,
    };
    let coarse_pr = Problem::new(&coarse_op, &coarse_q, critical_params, &vf).unwrap();
    let coarse = solve_vortex(&coarse_pr, &Init::default(), &SolveOptions::default()).unwrap();

    let mut runs = Vec::new();
    for ((name, t), st) in tiny.iter().zip(&tiny_states) {
        runs.push(Regression {
            label: format!("tiny {name}"),
            problem: Problem::new(&t.op, &t.q, t.params, &tiny_vf).unwrap(),
            state: st,
        });
    }
    for r in &reports {
        for (row, st) in r.rows.iter().zip(&r.states) {
            if let Some(st) = st {
                let params =
                    AdmissibleParams { eps: row.eps, delta: row.delta, kappa0: 1.0, lambda: FIXTURE_LAMBDA };
                runs.push(Regression {
                    label: format!("{} eps={}", r.regime.name(), row.eps),
                    problem: Problem::new(&op, &q, params, &vf).unwrap(),
                    state: st,
                });
            }
        }
    }
    runs.push(Regression { label: format!("critical {}^2 eps=0.1", REFINED_PAIR.0), problem: coarse_pr, state: &coarse });
    outcomes.push(criterion_optimality(&runs));
    outcomes.push(criterion_ascent(&runs));

    let names = ["regime (a) above critical", "regime (b) critical", "regime (c) below critical"];
    let ids = ["6a", "6b", "6c"];
    for ((id, name), r) in ids.into_iter().zip(names).zip(&reports) {
        outcomes.push(criterion_regime(id, name, r));
    }
    outcomes.push(line(
        "6",
        "sweep runtime",
        sweep_time <= Duration::from_secs(30 * 60),
        format!("{:.0}s for three sweeps at {FIXTURE_RESOLUTION}^2", sweep_time.as_secs_f64()),
    ));

    let slopes: Vec<Option<f64>> = reports.iter().map(|r| r.summary.diameter_slope).collect();
    let slopes_ok = slopes.iter().all(|s| s.is_some_and(|v| (0.8..=1.2).contains(&v)));
    let fmt = |v: &[Option<f64>]| v.iter().map(|s| s.map_or("n/a".into(), |v| format!("{v:.3}"))).collect::<Vec<String>>();
    outcomes.push(line("7", "support scaling", slopes_ok, format!("slopes (a, b, c) = {}", fmt(&slopes).join(", "))));

    let scores: Vec<Option<f64>> = reports.iter().map(|r| r.last().map(|d| d.radial_score)).collect();
    let scores_ok = scores.iter().all(|s| s.is_some_and(|v| v >= 0.9));
    outcomes.push(line(
        "8",
        "profile shape",
        scores_ok,
        format!("scores at eps = {} (a, b, c) = {}", FIXTURE_EPS[6], fmt(&scores).join(", ")),
    ));

    let crit = &reports[1];
    let fine_state = crit.rows.iter().zip(&crit.states).find(|(row, _)| row.eps == eps).and_then(|(_, s)| s.as_ref());
    let fine_l = op.lake();
    let r_coarse = steady_residual(coarse_op.lake(), &coarse.zeta, &coarse.psi);
    let (pass, detail) = match fine_state {
        Some(st) => {
            let r_fine = steady_residual(fine_l, &st.zeta, &st.psi);
            let ratio = r_coarse / r_fine;
            (
                ratio >= 1.5,
                format!(
                    "residual {r_coarse:.3e} at {}^2, {r_fine:.3e} at {}^2, ratio {ratio:.2}",
                    REFINED_PAIR.0, REFINED_PAIR.1
                ),
            )
        }
        None => (false, format!("critical sweep has no converged state at eps = {eps}")),
    };
    outcomes.push(line("9", "steadiness", pass, detail));

    let disk = Arc::new(build_lake("disk_constant_b", 128).unwrap());
    let disk_op = assemble_operator(Arc::clone(&disk)).unwrap();
    let ub = upper_bound_test(&disk, &KernelTestConfig::default(), Exec::default()).unwrap();
    let rep = constant_depth_representation(&disk_op, Exec::default()).unwrap();
    outcomes.push(line(
        "10",
        "kernel validation",
        ub.violations == 0 && rep.residual <= rep.bound,
        format!(
            "{} of {} pairs violate the upper bound (worst slack {:.1e}); residual {:.2e} vs 5h|zeta| = {:.2e}",
            ub.violations, ub.pairs, ub.worst_slack, rep.residual, rep.bound
        ),
    ));

    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!(
        "{} of {} criteria passed in {:.0}s",
        outcomes.len() - failed,
        outcomes.len(),
        t_all.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
