use std::sync::Arc;

use lakevortex::asymptotics::{diagnose, predicted_target, regime_checks, run_sweep, CSV_COLUMNS};
use lakevortex::elliptic::{assemble_operator, BoundaryFlux, OperatorHandle};
use lakevortex::exec::Exec;
use lakevortex::field::Field;
use lakevortex::geometry::{build_lake, Lake};
use lakevortex::kernel::{constant_depth_representation, correction_boundedness, upper_bound_test, KernelReport};
use lakevortex::nonlinearity::verify_hypotheses;
use lakevortex::oracle::brute_force_oracle;
use lakevortex::variational::{check_optimality, solve_vortex, steady_residual, Problem};
use lakevortex::error::Error;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Compatibility { .. } | Error::Unattainable { .. } => {
                Failure::Config(ConfigError { key: None, message: e.to_string() })
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Files to write plus whether the run met its own pass criteria.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub ok: bool,
}

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub hash: &'a str,
    pub exec: Exec,
}

impl Ctx<'_> {
    fn stamp(&self, command: &str, body: Value) -> String {
        let mut v = json!({ "version": VERSION, "config_hash": self.hash, "command": command });
        if let (Value::Object(out), Value::Object(b)) = (&mut v, body) {
            out.extend(b);
        }
        let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
        s.push('\n');
        s
    }

    fn csv_header(&self) -> String {
        format!("# lakevortex {VERSION} config {}\n", self.hash)
    }

    /// The configured flux, table fluxes shifted to zero mean.
    fn flux(&self, lake: &Lake) -> (BoundaryFlux, f64) {
        match &self.config.flux {
            f @ BoundaryFlux::Table { .. } => {
                let (g, mean) = f.mean_corrected(&lake.domain);
                eprintln!("flux table mean correction: {mean:e}");
                (g, mean)
            }
            f => (f.clone(), 0.0),
        }
    }

    fn operator(&self, lake: Lake) -> Result<OperatorHandle, Failure> {
        Ok(assemble_operator(Arc::new(lake))?.with_tolerance(self.config.solver.linear_tolerance))
    }

    fn options(&self) -> lakevortex::variational::SolveOptions {
        lakevortex::variational::SolveOptions { exec: self.exec, ..self.config.solver.options }
    }
}

pub fn solve(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = ctx.config;
    let spec = cfg.lake()?;
    let vf = cfg.nonlinearity()?;
    let params = cfg.params.ok_or(ConfigError { key: None, message: "missing `params` section".into() })?;
    let op = ctx.operator(build_lake(&spec.preset, spec.resolution)?)?;
    let lake = op.lake();
    let (flux, correction) = ctx.flux(lake);
    let q = op.solve_background(&flux)?;
    let pr = Problem::new(&op, &q, params, vf)?;
    let st = solve_vortex(&pr, &cfg.init, &ctx.options())?;
    let target = predicted_target(lake, &q, params.kappa0, cfg.target_regime);
    let d = diagnose(&pr, &st, &target, cfg.target_radius)?;
    let opt = check_optimality(&pr, &st);
    let state = ctx.stamp(
        "solve",
        json!({
            "params": params,
            "nonlinearity": vf,
            "flux": flux,
            "flux_mean_correction": correction,
            "state": st.to_json(lake),
            "diagnostics": d,
            "optimality": opt,
            "steady_residual": steady_residual(lake, &st.zeta, &st.psi),
            "target": target,
        }),
    );
    let cells: Vec<String> = d.csv_values().iter().map(|v| format!("{v}")).collect();
    let diag = format!("{}{}\n{}\n", ctx.csv_header(), CSV_COLUMNS.join(","), cells.join(","));
    Ok(Outcome { files: vec![("state.json".into(), state), ("diag.csv".into(), diag)], ok: st.converged })
}

pub fn sweep(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = ctx.config;
    let spec = cfg.lake()?;
    let vf = cfg.nonlinearity()?;
    let sw = cfg.sweep.as_ref().ok_or(ConfigError { key: None, message: "missing `sweep` section".into() })?;
    let op = ctx.operator(build_lake(&spec.preset, spec.resolution)?)?;
    let (flux, correction) = ctx.flux(op.lake());
    let q = op.solve_background(&flux)?;
    let report = run_sweep(&op, &q, vf, sw, ctx.exec)?;
    let checks = regime_checks(&report, &cfg.checks);
    let csv = format!("{}{}", ctx.csv_header(), report.to_csv());
    let summary = ctx.stamp(
        "sweep",
        json!({
            "flux_mean_correction": correction,
            "report": report,
            "checks": checks,
        }),
    );
    let ok = report.summary.failed_points == 0;
    Ok(Outcome { files: vec![("sweep.csv".into(), csv), ("summary.json".into(), summary)], ok })
}

pub fn oracle_test(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = ctx.config;
    let vf = cfg.nonlinearity()?;
    let spec = cfg.oracle.as_ref().ok_or(ConfigError { key: None, message: "missing `oracle` section".into() })?;
    let mut rows = Vec::new();
    let mut ok = true;
    for fx in &spec.fixtures {
        let op = ctx.operator(Lake::tiny_rect(fx.nx, fx.ny, fx.spacing, fx.depth.clone())?)?;
        let lake = op.lake();
        let (flux, _) = ctx.flux(lake);
        let q = op.solve_background(&flux)?;
        let pr = Problem::new(&op, &q, spec.params, vf)?;
        let oracle = brute_force_oracle(&pr, spec.levels, ctx.exec)?;
        let st = solve_vortex(&pr, &cfg.init, &ctx.options())?;
        let pass = st.energy.total >= oracle.energy - oracle.gap;
        ok &= pass;
        let interior = |z: &Field| -> Vec<f64> { lake.interior.iter().map(|&k| z[k]).collect() };
        rows.push(json!({
            "name": fx.name,
            "cells": lake.n_interior(),
            "levels": spec.levels,
            "feasible": oracle.feasible,
            "oracle_energy": oracle.energy,
            "gap": oracle.gap,
            "solver_energy": st.energy.total,
            "margin": st.energy.total - (oracle.energy - oracle.gap),
            "oracle_zeta": interior(&oracle.zeta),
            "solver_zeta": interior(&st.zeta),
            "pass": pass,
        }));
    }
    let body = ctx.stamp("oracle-test", json!({ "params": spec.params, "fixtures": rows, "pass": ok }));
    Ok(Outcome { files: vec![("oracle.json".into(), body)], ok })
}

pub fn check_hypotheses(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = ctx.config;
    let spec =
        cfg.hypotheses.as_ref().ok_or(ConfigError { key: None, message: "missing `hypotheses` section".into() })?;
    let functions = match &spec.functions {
        Some(v) => v.clone(),
        None => vec![cfg.nonlinearity()?.clone()],
    };
    let mut rows = Vec::new();
    for vf in &functions {
        let r = verify_hypotheses(vf, spec.s_max, spec.n)?;
        rows.push(json!({ "function": vf, "monotone": vf.is_monotone(), "report": r }));
    }
    let body = ctx.stamp("check-hypotheses", json!({ "s_max": spec.s_max, "n": spec.n, "functions": rows }));
    Ok(Outcome { files: vec![("hypotheses.json".into(), body)], ok: true })
}

pub fn kernel_test(ctx: &Ctx) -> Result<Outcome, Failure> {
    let spec =
        ctx.config.kernel.as_ref().ok_or(ConfigError { key: None, message: "missing `kernel` section".into() })?;
    let flat = ctx.operator(build_lake("disk_constant_b", spec.resolution)?)?;
    let upper_bound = upper_bound_test(flat.lake(), &spec.test, ctx.exec)?;
    let representation = constant_depth_representation(&flat, ctx.exec)?;
    let varying = ctx.operator(build_lake("disk_interior_max_b", spec.resolution)?)?;
    let correction = correction_boundedness(&varying, spec.patch_center, &spec.test.radii, ctx.exec)?;
    let report = KernelReport { upper_bound, representation, correction };
    let ok = report.passed();
    let body = ctx.stamp(
        "kernel-test",
        json!({ "resolution": spec.resolution, "seed": spec.test.seed, "report": report, "pass": ok }),
    );
    Ok(Outcome { files: vec![("kernel.json".into(), body)], ok })
}
