use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;
use strata_core::action::{fingerprint, IsotropyFingerprint};
use strata_core::rng::stream;
use strata_core::Result;

use super::Outcome;
use crate::manifest::Manifest;
use crate::report::CheckResult;

/// Fingerprint census of random unit points.
pub fn run(m: &Manifest) -> Result<Outcome> {
    let rep = m.rep();
    let p = m.strata_params();
    let fps = (0..p.samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = rep.random_unit_vector(&mut stream(m.seed, i));
            fingerprint(&rep, &v)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<IsotropyFingerprint, usize> = BTreeMap::new();
    for f in fps {
        *counts.entry(f).or_default() += 1;
    }
    let total = p.samples as f64;
    let (dominant, dominant_count) =
        counts.iter().fold(
            (None, 0),
            |acc, (f, &c)| if c > acc.1 { (Some(*f), c) } else { acc },
        );
    let dominant = dominant.expect("at least one sample");
    let share = dominant_count as f64 / total;

    let populations: Vec<_> = counts
        .iter()
        .map(|(f, &c)| {
            json!({
                "fingerprint": f,
                "label": f.label(),
                "count": c,
                "fraction": c as f64 / total,
            })
        })
        .collect();
    let mut csv = String::from("stab,center,fix,count,fraction\n");
    for (f, &c) in &counts {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            f.stab_dim,
            f.center_dim,
            f.fix_dim,
            c,
            c as f64 / total
        ));
    }

    let mut checks = vec![CheckResult::new(
        "dominant-stratum",
        share >= p.min_dominant_fraction,
        Some(1.0 - share),
        json!({ "fingerprint": dominant, "fraction": share, "required": p.min_dominant_fraction }),
    )];
    if let Some([s, c, f]) = p.expected_fingerprint {
        let expected = IsotropyFingerprint::new(s, c, f);
        checks.push(CheckResult::new(
            "expected-fingerprint",
            dominant == expected,
            None,
            json!({ "expected": expected, "dominant": dominant }),
        ));
    }
    Ok(Outcome {
        checks,
        results: json!({
            "representation": rep.kind().to_string(),
            "samples": p.samples,
            "strata": counts.len(),
            "dominant": dominant,
            "populations": populations,
        }),
        csv: Some(csv),
    })
}
