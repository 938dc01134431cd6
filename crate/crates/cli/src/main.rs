//! `lakevortex` command-line runner.
//!
//! Exit status: 0 on success, 1 on numerical failure or a failed validation
//! report, 2 on a missing or invalid config.

mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lakevortex::exec::{with_jobs, Exec};

use commands::{Ctx, Failure, Outcome};
use config::{hash_bytes, line_of, parse, ConfigError, Loaded};

#[derive(Parser)]
#[command(name = "lakevortex", version, about = "Steady vortices in lakes: solves, sweeps and validation reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one variational problem; writes state.json and diag.csv.
    Solve(Common),
    /// Run an ε sweep; writes sweep.csv and summary.json.
    Sweep(Common),
    /// Compare the solver against exhaustive enumeration on tiny lakes.
    OracleTest(Common),
    /// Estimate the growth constants of the vorticity functions.
    CheckHypotheses(Common),
    /// Validate the disk kernel bound and the Green's-function representation.
    KernelTest(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long)]
    jobs: Option<usize>,
}

type Runner = fn(&Ctx) -> Result<Outcome, Failure>;

fn load(path: &Path) -> Result<Loaded, String> {
    let bytes = fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = String::from_utf8(bytes).map_err(|e| format!("{}: not UTF-8: {e}", path.display()))?;
    let config = parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Loaded { hash: hash_bytes(text.as_bytes()), config, text })
}

fn config_message(path: &Path, text: &str, e: &ConfigError) -> String {
    match e.key.and_then(|k| line_of(text, k)) {
        Some(line) => format!("{}: line {line}: {}", path.display(), e.message),
        None => format!("{}: {}", path.display(), e.message),
    }
}

fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (Runner, &Common) = match &cli.command {
        Command::Solve(c) => (commands::solve, c),
        Command::Sweep(c) => (commands::sweep, c),
        Command::OracleTest(c) => (commands::oracle_test, c),
        Command::CheckHypotheses(c) => (commands::check_hypotheses, c),
        Command::KernelTest(c) => (commands::kernel_test, c),
    };
    let loaded = match load(&common.config) {
        Ok(l) => l,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = loaded.config.validate() {
        eprintln!("error: {}", config_message(&common.config, &loaded.text, &e));
        return ExitCode::from(2);
    }
    let exec = if common.jobs == Some(1) { Exec::Sequential } else { Exec::Parallel };
    let ctx = Ctx { config: &loaded.config, hash: &loaded.hash, exec };
    let result = with_jobs(common.jobs, || run(&ctx));
    let outcome = match result {
        Ok(o) => o,
        Err(Failure::Config(e)) => {
            eprintln!("error: {}", config_message(&common.config, &loaded.text, &e));
            return ExitCode::from(2);
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let dir = common.out.clone().or_else(|| loaded.config.output_dir.clone()).unwrap_or_else(|| "out".into());
    if let Err(e) = write_all(&dir, &outcome.files) {
        eprintln!("error: writing {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    for (name, _) in &outcome.files {
        eprintln!("wrote {}", dir.join(name).display());
    }
    if outcome.ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("run completed but did not pass its checks");
        ExitCode::from(1)
    }
}
