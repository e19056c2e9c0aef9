//! Manifest-driven experiment runner for the `strata-core` toolkit.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails, 3 for an
//! invalid manifest or invocation, 1 for runtime errors.

// `!(a < b)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod manifest;
pub mod report;

use manifest::{Command, Format, Manifest, ManifestError};
use report::{write_atomic, CheckResult, Metadata, RunReport, Status};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_MANIFEST: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "STRATA_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "strata",
    version,
    about = "Isotropy strata, critical orbits and lattice gauge stabilizers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Tabulate isotropy fingerprints of random unit points.
    Strata(RunArgs),
    /// Compare criticality with isolation on a panel of points.
    MichelVerify(RunArgs),
    /// Gauge stabilizer, holonomy and covariant matter on a lattice.
    Lattice(RunArgs),
    /// Locate the destabilization point and follow the bifurcating branch.
    Bifurcate(RunArgs),
    /// Summarize run reports (JSON) and tables (CSV).
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Replaces the manifest's seed (and its seed list).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub verbose: bool,
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_MANIFEST
            } else {
                EXIT_PASS
            };
        }
    };
    init_threads();
    match cli.command {
        Sub::Strata(a) => run_command(Command::Strata, &a),
        Sub::MichelVerify(a) => run_command(Command::MichelVerify, &a),
        Sub::Lattice(a) => run_command(Command::Lattice, &a),
        Sub::Bifurcate(a) => run_command(Command::Bifurcate, &a),
        Sub::Report { files } => summarize(&files),
    }
}

fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Loads a manifest and applies command-line overrides.
pub fn prepare(command: Command, args: &RunArgs) -> Result<Manifest, ManifestError> {
    let mut m = Manifest::load(&args.manifest)?;
    if m.command != command {
        return Err(ManifestError::single(
            "command",
            format!(
                "manifest is for '{}', not '{}'",
                m.command.name(),
                command.name()
            ),
        ));
    }
    if let Some(seed) = args.seed {
        m.seed = seed;
        m.seeds.clear();
    }
    if let Some(out) = &args.out {
        m.output.dir = out.to_string_lossy().into_owned();
    }
    if let Some(f) = args.format {
        m.output.format = f;
    }
    m.validate()?;
    Ok(m)
}

/// Runs a prepared manifest and assembles its report (nothing is written).
pub fn execute(m: &Manifest, base_dir: &Path) -> strata_core::Result<(RunReport, Option<String>)> {
    let start = Instant::now();
    let out_dir = PathBuf::from(&m.output.dir);
    let ctx = commands::Context {
        base_dir,
        out_dir: &out_dir,
    };
    let outcome = commands::execute(m, &ctx)?;
    let checks: Vec<CheckResult> = m
        .selected_checks()
        .iter()
        .map(|name| {
            outcome
                .checks
                .iter()
                .find(|c| &c.name == name)
                .cloned()
                .unwrap_or_else(|| panic!("command did not produce check '{name}'"))
        })
        .collect();
    let exit_status = if checks.iter().all(CheckResult::passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    let report = RunReport {
        tool: report::TOOL.into(),
        version: report::VERSION.into(),
        command: m.command.name().into(),
        manifest: serde_json::to_value(m).expect("manifest serializes"),
        checks,
        results: outcome.results,
        exit_status,
        metadata: Metadata {
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    };
    Ok((report, outcome.csv))
}

fn run_command(command: Command, args: &RunArgs) -> i32 {
    let m = match prepare(command, args) {
        Ok(m) => m,
        Err(e) => {
            eprint!("{e}");
            return EXIT_MANIFEST;
        }
    };
    let base_dir = args.manifest.parent().unwrap_or(Path::new("."));
    if args.verbose {
        eprintln!("manifest {}:\n{}", args.manifest.display(), m.to_text());
    }
    let (report, csv) = match execute(&m, base_dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {} failed: {e}", command.name());
            return EXIT_RUNTIME;
        }
    };
    let out_dir = PathBuf::from(&m.output.dir);
    let mut written = Vec::new();
    if m.output.format.json() {
        written.push((
            out_dir.join(format!("{}.json", command.name())),
            report.to_json(),
        ));
    }
    if m.output.format.csv() {
        if let Some(csv) = csv {
            written.push((out_dir.join(format!("{}.csv", command.name())), csv));
        }
    }
    for (path, text) in &written {
        if let Err(e) = write_atomic(path, text) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
        if args.verbose {
            eprintln!("wrote {}", path.display());
        }
    }
    for c in &report.checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        match c.residual {
            Some(r) => println!("{status} {} (residual {r:e})", c.name),
            None => println!("{status} {}", c.name),
        }
    }
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn summarize(files: &[PathBuf]) -> i32 {
    let mut failed = false;
    for path in files {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_RUNTIME;
            }
        };
        let is_csv = path.extension().is_some_and(|e| e == "csv");
        if is_csv {
            let mut lines = text.lines();
            let header = lines.next().unwrap_or("");
            println!(
                "{}: table, {} rows, columns {header}",
                path.display(),
                lines.count()
            );
            continue;
        }
        let report: RunReport = match serde_json::from_str(&text) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {} is not a run report: {e}", path.display());
                return EXIT_RUNTIME;
            }
        };
        let passed = report.checks.iter().filter(|c| c.passed()).count();
        println!(
            "{}: {} {} ({}/{} checks pass)",
            path.display(),
            report.command,
            if report.passed() { "pass" } else { "fail" },
            passed,
            report.checks.len()
        );
        for c in report.checks.iter().filter(|c| !c.passed()) {
            println!("  failing: {}", c.name);
        }
        failed |= !report.passed();
    }
    if failed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    }
}
