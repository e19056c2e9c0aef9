//! Experiment manifests: TOML files naming a command and its parameters.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use strata_core::action::{RepKind, Representation};
use strata_core::bifurcation::{PotentialFamily, SHIPPED_FAMILIES};
use strata_core::lattice::LatticeSpec;
use strata_core::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Strata,
    MichelVerify,
    Lattice,
    Bifurcate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Strata => "strata",
            Command::MichelVerify => "michel-verify",
            Command::Lattice => "lattice",
            Command::Bifurcate => "bifurcate",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

/// Overrides for module tolerances; unset fields use the module defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noncritical_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub isolation_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariant_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub section_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersection_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrt_law: Option<f64>,
}

impl Tolerances {
    fn is_default(&self) -> bool {
        self == &Self::default()
    }

    pub fn critical_threshold(&self) -> f64 {
        self.critical_threshold.unwrap_or(tol::CRITICAL)
    }

    pub fn noncritical_floor(&self) -> f64 {
        self.noncritical_floor.unwrap_or(tol::NON_CRITICAL)
    }

    pub fn isolation_radius(&self) -> f64 {
        self.isolation_radius.unwrap_or(tol::ISOLATION_RADIUS)
    }

    pub fn isolation_samples(&self) -> usize {
        self.isolation_samples.unwrap_or(tol::ISOLATION_SAMPLES)
    }

    pub fn orbit_starts(&self) -> usize {
        self.orbit_starts.unwrap_or(tol::ORBIT_STARTS)
    }

    pub fn covariant_residual(&self) -> f64 {
        self.covariant_residual.unwrap_or(1e-9)
    }

    pub fn section_residual(&self) -> f64 {
        self.section_residual.unwrap_or(tol::STRUCTURAL)
    }

    pub fn intersection_distance(&self) -> f64 {
        self.intersection_distance.unwrap_or(1e-9)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0.unwrap_or(1e-8)
    }

    pub fn sqrt_law(&self) -> f64 {
        self.sqrt_law.unwrap_or(0.02)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrataParams {
    pub samples: usize,
    /// Smallest acceptable population share of the most common fingerprint.
    #[serde(default = "default_dominant_fraction")]
    pub min_dominant_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_fingerprint: Option<[usize; 3]>,
}

fn default_dominant_fraction() -> f64 {
    0.99
}

impl Default for StrataParams {
    fn default() -> Self {
        Self {
            samples: 10_000,
            min_dominant_fraction: default_dominant_fraction(),
            expected_fingerprint: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MichelParams {
    pub n_potentials: usize,
    pub degree: u32,
    /// Conjugates of the extremal diagonal direction (adjoint carriers only).
    pub octet_points: usize,
    /// Octet points pushed off their stratum by `near_octet_offset`.
    pub near_octet_points: usize,
    pub near_octet_offset: f64,
    pub random_points: usize,
}

impl Default for MichelParams {
    fn default() -> Self {
        Self {
            n_potentials: 100,
            degree: 6,
            octet_points: 5,
            near_octet_points: 5,
            near_octet_offset: 0.01,
            random_points: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatterParams {
    /// Fiber representation, e.g. `fundamental(3)`.
    pub rep: String,
    /// Seed vector in real carrier coordinates (interleaved re/im for
    /// fundamental blocks).
    pub m0: Vec<f64>,
    /// Parameter of the `landau` potential used for the potential term.
    #[serde(default = "one")]
    pub potential_lambda: f64,
    #[serde(default)]
    pub expect_obstruction: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    pub d: usize,
    pub l: usize,
    /// N of SU(N) on the links.
    pub n: usize,
    /// `null`, `pure-gauge`, `random`, `defect`, `random-defect` or `file`.
    pub connection: String,
    /// Diagonal phases of the defect link for `defect` and `random-defect`
    /// (the latter applies a random gauge transformation afterwards).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defect_phases: Option<Vec<f64>>,
    /// Configuration to load for `file`, relative to the manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// File name (inside the output directory) to save the configuration to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_stabilizer_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matter: Option<MatterParams>,
}

pub const CONNECTION_KINDS: [&str; 6] = [
    "null",
    "pure-gauge",
    "random",
    "defect",
    "random-defect",
    "file",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcateParams {
    pub family: String,
    /// The sweep grid has `points` evenly spaced values in `(lambda_min, lambda_max]`.
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// Parameter range searched for the destabilization point.
    #[serde(default = "default_range")]
    pub detect_range: [f64; 2],
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_fingerprint: Option<[usize; 3]>,
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

fn default_starts() -> usize {
    16
}

impl BifurcateParams {
    pub fn grid(&self) -> Vec<f64> {
        let h = (self.lambda_max - self.lambda_min) / self.points as f64;
        (1..=self.points)
            .map(|i| self.lambda_min + i as f64 * h)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: Format::Both,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: Command,
    pub representation: String,
    #[serde(default)]
    pub seed: u64,
    /// Extra seeds for commands that repeat their experiment.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Checks to run; empty means every check applicable to the command.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Tolerances::is_default")]
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strata: Option<StrataParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub michel: Option<MichelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bifurcate: Option<BifurcateParams>,
    #[serde(default)]
    pub output: Output,
}

/// Problems found in a manifest, each tied to the offending field.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestError {
    pub problems: Vec<(String, String)>,
}

impl ManifestError {
    pub fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            problems: vec![(field.into(), message.into())],
        }
    }
}

impl fmt::Display for ManifestError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid manifest:")?;
        for (field, msg) in &self.problems {
            writeln!(f, "  {field}: {msg}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ManifestError {}

impl Manifest {
    pub fn from_text(text: &str) -> Result<Self, ManifestError> {
        let m: Manifest =
            toml::from_str(text).map_err(|e| ManifestError::single("<toml>", e.message()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ManifestError::single("<file>", format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Canonical text form; loading it back gives the same manifest and the
    /// same text.
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn rep(&self) -> Representation {
        Representation::new(self.representation.parse().expect("validated")).expect("validated")
    }

    /// Seeds to run: the explicit list, or the single `seed`.
    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn strata_params(&self) -> StrataParams {
        self.strata.clone().unwrap_or_default()
    }

    pub fn michel_params(&self) -> MichelParams {
        self.michel.clone().unwrap_or_default()
    }

    /// Checks applicable to this manifest, in report order.
    pub fn available_checks(&self) -> Vec<&'static str> {
        match self.command {
            Command::Strata => {
                let mut c = vec!["dominant-stratum"];
                if self.strata_params().expected_fingerprint.is_some() {
                    c.push("expected-fingerprint");
                }
                c
            }
            Command::MichelVerify => {
                let p = self.michel_params();
                let mut c = vec!["all-consistent"];
                if p.octet_points > 0 {
                    c.push("octet-critical");
                }
                if p.random_points > 0 {
                    c.push("generic-noncritical");
                }
                if self.seed_list().len() > 1 {
                    c.push("seed-stable-verdicts");
                }
                c
            }
            Command::Lattice => {
                let mut c = vec!["stabilizer-sections"];
                if let Some(p) = &self.lattice {
                    if p.expected_stabilizer_dim.is_some() {
                        c.push("expected-stabilizer-dim");
                    }
                    if let Some(m) = &p.matter {
                        c.push("matter-holonomy");
                        if !m.expect_obstruction {
                            c.push("covariant-residual");
                            c.push("intersection-law");
                        }
                    }
                }
                c
            }
            Command::Bifurcate => {
                let mut c = vec!["lambda0", "branch-continuity", "fingerprint-constant"];
                if let Some(p) = &self.bifurcate {
                    if p.expected_fingerprint.is_some() {
                        c.push("expected-fingerprint");
                    }
                    if p.family == "landau" {
                        c.push("branch-limit");
                        c.push("sqrt-law");
                    }
                }
                c
            }
        }
    }

    /// Checks to run, in the order listed (or the default order).
    pub fn selected_checks(&self) -> Vec<String> {
        if self.checks.is_empty() {
            self.available_checks()
                .into_iter()
                .map(String::from)
                .collect()
        } else {
            self.checks.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut problems = Vec::new();
        let mut bad = |field: &str, msg: String| problems.push((field.to_string(), msg));

        let rep = match self.representation.parse::<RepKind>() {
            Ok(kind) => match Representation::new(kind) {
                Ok(r) => Some(r),
                Err(e) => {
                    bad("representation", e.to_string());
                    None
                }
            },
            Err(e) => {
                bad("representation", e.to_string());
                None
            }
        };

        let available = self.available_checks();
        for (i, c) in self.checks.iter().enumerate() {
            if !available.contains(&c.as_str()) {
                bad(
                    &format!("checks[{i}]"),
                    format!(
                        "'{c}' is not available for this manifest (available: {})",
                        available.join(", ")
                    ),
                );
            }
            if self.checks[..i].contains(c) {
                bad(&format!("checks[{i}]"), format!("'{c}' is listed twice"));
            }
        }

        let t = &self.tolerances;
        for (name, v) in [
            ("critical_threshold", t.critical_threshold),
            ("noncritical_floor", t.noncritical_floor),
            ("isolation_radius", t.isolation_radius),
            ("covariant_residual", t.covariant_residual),
            ("section_residual", t.section_residual),
            ("intersection_distance", t.intersection_distance),
            ("lambda0", t.lambda0),
            ("sqrt_law", t.sqrt_law),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bad(
                        &format!("tolerances.{name}"),
                        format!("must be positive, got {v}"),
                    );
                }
            }
        }
        if t.isolation_samples() < 100 {
            bad(
                "tolerances.isolation_samples",
                "must be at least 100".into(),
            );
        }
        if t.orbit_starts() == 0 {
            bad("tolerances.orbit_starts", "must be positive".into());
        }

        let sections = [
            ("strata", self.strata.is_some(), Command::Strata),
            ("michel", self.michel.is_some(), Command::MichelVerify),
            ("lattice", self.lattice.is_some(), Command::Lattice),
            ("bifurcate", self.bifurcate.is_some(), Command::Bifurcate),
        ];
        for (name, present, cmd) in sections {
            if present && cmd != self.command {
                bad(
                    name,
                    format!(
                        "section does not apply to command '{}'",
                        self.command.name()
                    ),
                );
            }
        }

        match self.command {
            Command::Strata => {
                let p = self.strata_params();
                if p.samples == 0 {
                    bad("strata.samples", "sample size must be positive".into());
                }
                if !(0.0..=1.0).contains(&p.min_dominant_fraction) {
                    bad("strata.min_dominant_fraction", "must lie in [0, 1]".into());
                }
            }
            Command::MichelVerify => {
                let p = self.michel_params();
                if p.n_potentials == 0 {
                    bad("michel.n_potentials", "must be positive".into());
                }
                if !(1..=6).contains(&p.degree) {
                    bad("michel.degree", format!("{} not in 1..=6", p.degree));
                }
                if p.octet_points + p.near_octet_points + p.random_points == 0 {
                    bad("michel", "panel is empty".into());
                }
                if let Some(r) = &rep {
                    let octet_ok = matches!(r.kind(), RepKind::Adjoint(n) if *n >= 3);
                    if !octet_ok && p.octet_points + p.near_octet_points > 0 {
                        bad(
                            "michel.octet_points",
                            format!(
                                "octet directions need an adjoint su(n), n >= 3 carrier, not {}",
                                r.kind()
                            ),
                        );
                    }
                }
                if !(p.near_octet_offset > 0.0 && p.near_octet_offset < 1.0) {
                    bad("michel.near_octet_offset", "must lie in (0, 1)".into());
                }
            }
            Command::Lattice => match &self.lattice {
                None => bad(
                    "lattice",
                    "section is required for the lattice command".into(),
                ),
                Some(p) => {
                    if let Err(e) = LatticeSpec::new(p.d, p.l) {
                        bad("lattice.d/l", e.to_string());
                    }
                    if p.n < 2 {
                        bad("lattice.n", "must be at least 2".into());
                    }
                    if !CONNECTION_KINDS.contains(&p.connection.as_str()) {
                        bad(
                            "lattice.connection",
                            format!(
                                "unknown kind '{}' (expected one of {})",
                                p.connection,
                                CONNECTION_KINDS.join(", ")
                            ),
                        );
                    }
                    if p.connection == "defect" || p.connection == "random-defect" {
                        match &p.defect_phases {
                            None => bad(
                                "lattice.defect_phases",
                                "required for a defect connection".into(),
                            ),
                            Some(ph) if ph.len() != p.n => {
                                bad("lattice.defect_phases", format!("expected {} phases", p.n))
                            }
                            Some(ph) if ph.iter().sum::<f64>().abs() > 1e-12 => {
                                bad("lattice.defect_phases", "phases must sum to zero".into())
                            }
                            _ => {}
                        }
                    }
                    if p.connection == "file" && p.file.is_none() {
                        bad("lattice.file", "required for a file connection".into());
                    }
                    if let Some(m) = &p.matter {
                        match m.rep.parse::<RepKind>().and_then(Representation::new) {
                            Ok(r) => {
                                if r.n() != p.n {
                                    bad(
                                        "lattice.matter.rep",
                                        format!(
                                            "acts through SU({}), links are SU({})",
                                            r.n(),
                                            p.n
                                        ),
                                    );
                                }
                                if r.carrier_dim() != m.m0.len() {
                                    bad(
                                        "lattice.matter.m0",
                                        format!("expected {} carrier coordinates", r.carrier_dim()),
                                    );
                                }
                            }
                            Err(e) => bad("lattice.matter.rep", e.to_string()),
                        }
                    }
                }
            },
            Command::Bifurcate => match &self.bifurcate {
                None => bad(
                    "bifurcate",
                    "section is required for the bifurcate command".into(),
                ),
                Some(p) => {
                    if !SHIPPED_FAMILIES.contains(&p.family.as_str()) {
                        bad(
                            "bifurcate.family",
                            format!(
                                "unknown family '{}' (expected one of {})",
                                p.family,
                                SHIPPED_FAMILIES.join(", ")
                            ),
                        );
                    } else if let Some(r) = &rep {
                        if let Err(e) = PotentialFamily::shipped(&p.family, r) {
                            bad("bifurcate.family", e.to_string());
                        }
                    }
                    if !(p.lambda_min < p.lambda_max) {
                        bad("bifurcate.lambda_max", "must exceed lambda_min".into());
                    }
                    if p.points < 2 {
                        bad("bifurcate.points", "need at least two grid points".into());
                    }
                    if !(p.detect_range[0] < p.detect_range[1]) {
                        bad(
                            "bifurcate.detect_range",
                            "must be an increasing pair".into(),
                        );
                    }
                    if p.starts == 0 {
                        bad("bifurcate.starts", "must be positive".into());
                    }
                }
            },
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ManifestError { problems })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "command = \"strata\"\nrepresentation = \"adjoint(3)\"\n";

    #[test]
    fn canonical_text_round_trips() {
        let m = Manifest::from_text(MINIMAL).unwrap();
        let text = m.to_text();
        let back = Manifest::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn defaults_apply() {
        let m = Manifest::from_text(MINIMAL).unwrap();
        assert_eq!(m.seed, 0);
        assert_eq!(m.output.format, Format::Both);
        assert_eq!(m.strata_params().samples, 10_000);
        assert_eq!(m.selected_checks(), vec!["dominant-stratum"]);
    }

    #[test]
    fn empty_sample_size_is_rejected() {
        let text = format!("{MINIMAL}[strata]\nsamples = 0\n");
        let err = Manifest::from_text(&text).unwrap_err();
        assert_eq!(err.problems[0].0, "strata.samples");
    }

    #[test]
    fn unknown_family_is_rejected() {
        let text = "command = \"bifurcate\"\nrepresentation = \"adjoint(3)\"\n\
                    [bifurcate]\nfamily = \"nope\"\nlambda_min = 0.0\nlambda_max = 1.0\npoints = 5\n";
        let err = Manifest::from_text(text).unwrap_err();
        assert!(err.problems.iter().any(|(f, _)| f == "bifurcate.family"));
    }

    #[test]
    fn unknown_fields_and_checks_are_rejected() {
        assert!(Manifest::from_text(&format!("{MINIMAL}colour = 3\n")).is_err());
        let err = Manifest::from_text(&format!("checks = [\"sqrt-law\"]\n{MINIMAL}")).unwrap_err();
        assert_eq!(err.problems[0].0, "checks[0]");
    }

    #[test]
    fn mismatched_section_is_rejected() {
        let text = format!("{MINIMAL}[michel]\nn_potentials = 3\n");
        assert!(Manifest::from_text(&text).is_err());
    }

    #[test]
    fn grid_excludes_left_end() {
        let p = BifurcateParams {
            family: "landau".into(),
            lambda_min: 0.0,
            lambda_max: 1.0,
            points: 4,
            detect_range: default_range(),
            starts: 4,
            expected_lambda0: None,
            expected_fingerprint: None,
        };
        assert_eq!(p.grid(), vec![0.25, 0.5, 0.75, 1.0]);
    }
}
