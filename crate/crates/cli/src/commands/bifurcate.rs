use serde_json::{json, Value};
use strata_core::action::IsotropyFingerprint;
use strata_core::bifurcation::{
    branch_csv, check_branch_limit, detect_lambda0, sweep_branch_with, BranchPoint,
    PotentialFamily, SweepConfig,
};
use strata_core::{Error, Result};

use super::Outcome;
use crate::manifest::Manifest;
use crate::report::CheckResult;

fn error_evidence(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

/// Destabilization point and branch continuation for a shipped family.
pub fn run(m: &Manifest) -> Result<Outcome> {
    let p = m.bifurcate.as_ref().expect("validated bifurcate section");
    let t = &m.tolerances;
    let rep = m.rep();
    let family = PotentialFamily::shipped(&p.family, &rep)?
        .with_range(p.detect_range[0], p.detect_range[1])?;
    let trivial = family.trivial_point();
    let mut checks = Vec::new();

    let lambda0 = detect_lambda0(&family, &trivial);
    checks.push(match (&lambda0, p.expected_lambda0) {
        (Ok(l0), Some(expected)) => CheckResult::new(
            "lambda0",
            (l0 - expected).abs() <= t.lambda0(),
            Some((l0 - expected).abs()),
            json!({ "lambda0": l0, "expected": expected, "tolerance": t.lambda0() }),
        ),
        (Ok(l0), None) => CheckResult::new("lambda0", true, None, json!({ "lambda0": l0 })),
        (Err(e), _) => CheckResult::new("lambda0", false, None, error_evidence(e)),
    });

    let grid = p.grid();
    let config = SweepConfig {
        starts: p.starts,
        seed: m.seed,
        ..SweepConfig::default()
    };
    let sweep = sweep_branch_with(&family, &grid, &config);
    let points: &[BranchPoint] = sweep.as_deref().unwrap_or(&[]);
    let branch: Vec<&BranchPoint> = points.iter().filter(|q| q.branch_id == 1).collect();
    let fps: Vec<IsotropyFingerprint> = {
        let mut v: Vec<_> = branch.iter().map(|q| q.fingerprint).collect();
        v.dedup();
        v
    };

    checks.push(match &sweep {
        Ok(_) => CheckResult::new(
            "branch-continuity",
            true,
            None,
            json!({ "grid_points": grid.len(), "branch_points": branch.len() }),
        ),
        Err(e @ Error::BranchJump { distance, .. }) => CheckResult::new(
            "branch-continuity",
            false,
            Some(*distance),
            error_evidence(e),
        ),
        Err(e) => CheckResult::new("branch-continuity", false, None, error_evidence(e)),
    });
    checks.push(CheckResult::new(
        "fingerprint-constant",
        sweep.is_ok() && fps.len() <= 1,
        None,
        json!({ "fingerprints": fps }),
    ));
    if let Some([s, c, f]) = p.expected_fingerprint {
        let expected = IsotropyFingerprint::new(s, c, f);
        checks.push(CheckResult::new(
            "expected-fingerprint",
            !branch.is_empty() && fps == [expected],
            None,
            json!({ "expected": expected, "found": fps }),
        ));
    }
    if family.second_order() && p.family == "landau" {
        checks.push(match &lambda0 {
            Ok(l0) => match check_branch_limit(points, *l0) {
                Ok(limit) => CheckResult::new(
                    "branch-limit",
                    true,
                    Some(limit),
                    json!({ "extrapolated_norm": limit }),
                ),
                Err(e) => CheckResult::new("branch-limit", false, None, error_evidence(&e)),
            },
            Err(e) => CheckResult::new("branch-limit", false, None, error_evidence(e)),
        });
        // Landau minimum: I2 = (lambda - lambda0) / 2.
        let l0 = lambda0.as_ref().copied().unwrap_or(f64::NAN);
        let rel: Vec<f64> = branch
            .iter()
            .map(|q| {
                let predicted = ((q.lambda - l0) / 2.0).sqrt();
                (q.amplitude - predicted).abs() / predicted
            })
            .collect();
        let worst = rel.iter().copied().fold(0.0, f64::max);
        checks.push(CheckResult::new(
            "sqrt-law",
            lambda0.is_ok() && !rel.is_empty() && rel.iter().all(|r| *r <= t.sqrt_law()),
            Some(worst),
            json!({ "points": rel.len(), "tolerance": t.sqrt_law() }),
        ));
    }

    let summary = json!({
        "family": family.label(),
        "representation": rep.kind().to_string(),
        "lambda0": lambda0.as_ref().ok(),
        "grid": { "min": p.lambda_min, "max": p.lambda_max, "points": p.points },
        "trivial_points": points.len() - branch.len(),
        "branch_points": branch.len(),
        "branch_fingerprints": fps,
        "first_branch_lambda": branch.first().map(|q| q.lambda),
        "max_gradient_norm": points.iter().map(|q| q.gradient_norm).fold(0.0, f64::max),
        "sweep_error": sweep.as_ref().err().map(|e| e.to_string()),
    });
    Ok(Outcome {
        checks,
        results: summary,
        csv: Some(branch_csv(points)),
    })
}
