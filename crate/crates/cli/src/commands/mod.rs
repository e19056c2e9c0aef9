//! One module per subcommand. Each computes every check applicable to its
//! manifest; the runner keeps the ones selected.

use std::path::Path;

use serde_json::Value;
use strata_core::Result;

use crate::manifest::{Command, Manifest};
use crate::report::CheckResult;

pub mod bifurcate;
pub mod lattice;
pub mod michel;
pub mod strata;

/// What a command produced, before it is wrapped into a run report.
pub struct Outcome {
    pub checks: Vec<CheckResult>,
    pub results: Value,
    pub csv: Option<String>,
}

/// Paths a command may read from or write to.
pub struct Context<'a> {
    /// Directory holding the manifest; relative inputs resolve against it.
    pub base_dir: &'a Path,
    pub out_dir: &'a Path,
}

pub fn execute(m: &Manifest, ctx: &Context<'_>) -> Result<Outcome> {
    match m.command {
        Command::Strata => strata::run(m),
        Command::MichelVerify => michel::run(m),
        Command::Lattice => lattice::run(m, ctx),
        Command::Bifurcate => bifurcate::run(m),
    }
}

fn csv_float(x: f64) -> String {
    format!("{x:e}")
}
