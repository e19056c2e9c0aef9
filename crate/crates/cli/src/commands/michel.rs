use nalgebra::DVector;
use serde_json::{json, Value};
use strata_core::action::{IsolationConfig, Representation};
use strata_core::algebra::haar_sample;
use strata_core::critical::{michel_test_with, CriticalReport, MichelConfig, Verdict};
use strata_core::rng::{derive_seed, stream};
use strata_core::Result;

use super::{csv_float, Outcome};
use crate::manifest::{Manifest, MichelParams};
use crate::report::CheckResult;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Octet,
    NearOctet,
    Random,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Octet => "octet",
            Kind::NearOctet => "near-octet",
            Kind::Random => "random",
        }
    }
}

/// Conjugate of the last diagonal generator, `diag(1, .., 1, -(n-1))` up to
/// scale, whose stabilizer is `su(n-1) + u(1)`.
fn octet_point(rep: &Representation, seed: u64, index: usize) -> DVector<f64> {
    let basis = rep.basis();
    let mut e = DVector::zeros(basis.dim());
    e[basis.dim() - 1] = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
    let g = haar_sample(rep.n(), derive_seed(seed, 1_000 + index as u64));
    let v = basis.adjoint_matrix(&g) * e;
    let n = v.norm();
    v / n
}

fn panel(rep: &Representation, p: &MichelParams, seed: u64) -> Vec<(Kind, DVector<f64>)> {
    let mut out = Vec::new();
    for i in 0..p.octet_points {
        out.push((Kind::Octet, octet_point(rep, seed, i)));
    }
    for i in 0..p.near_octet_points {
        let base = octet_point(rep, seed, p.octet_points + i);
        let push = rep.random_unit_vector(&mut stream(seed, 2_000 + i as u64));
        let v = base + push * p.near_octet_offset;
        let n = v.norm();
        out.push((Kind::NearOctet, v / n));
    }
    for i in 0..p.random_points {
        out.push((
            Kind::Random,
            rep.random_unit_vector(&mut stream(seed, 3_000 + i as u64)),
        ));
    }
    out
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Critical => "critical",
        Verdict::NonCritical => "non_critical",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Criticality against isolation over the point panel, once per seed.
pub fn run(m: &Manifest) -> Result<Outcome> {
    let rep = m.rep();
    let p = m.michel_params();
    let t = &m.tolerances;
    let seeds = m.seed_list();

    let mut runs: Vec<(u64, Vec<(Kind, CriticalReport)>)> = Vec::new();
    for &seed in &seeds {
        let config = MichelConfig {
            n_potentials: p.n_potentials,
            degree: p.degree,
            critical_threshold: t.critical_threshold(),
            noncritical_floor: t.noncritical_floor(),
            isolation: IsolationConfig {
                radius: t.isolation_radius(),
                samples: t.isolation_samples(),
                orbit_starts: t.orbit_starts(),
                ..IsolationConfig::default()
            },
            seed,
        };
        let reports = panel(&rep, &p, seed)
            .into_iter()
            .map(|(kind, v)| Ok((kind, michel_test_with(&rep, &v, &config)?)))
            .collect::<Result<Vec<_>>>()?;
        runs.push((seed, reports));
    }

    let all = || runs.iter().flat_map(|(_, r)| r.iter());
    let mut rows = Vec::new();
    let mut csv =
        String::from("seed,kind,index,stab,center,fix,sup_grad_norm,isolated,verdict,consistent\n");
    for (seed, reports) in &runs {
        for (i, (kind, r)) in reports.iter().enumerate() {
            let f = r.fingerprint;
            rows.push(json!({
                "seed": seed,
                "kind": kind.name(),
                "index": i,
                "fingerprint": f,
                "sup_grad_norm": r.sup_grad_norm,
                "worst_potential": r.worst_potential,
                "isolated": r.isolated,
                "verdict": r.verdict,
                "consistent": r.verdict_consistent,
            }));
            csv.push_str(&format!(
                "{seed},{},{i},{},{},{},{},{},{},{}\n",
                kind.name(),
                f.stab_dim,
                f.center_dim,
                f.fix_dim,
                csv_float(r.sup_grad_norm),
                r.isolated,
                verdict_name(r.verdict),
                r.verdict_consistent
            ));
        }
    }

    let inconsistent: Vec<Value> = rows
        .iter()
        .filter(|r| r["consistent"] == false)
        .cloned()
        .collect();
    let total = rows.len();
    let mut checks = vec![CheckResult::new(
        "all-consistent",
        inconsistent.is_empty(),
        Some(inconsistent.len() as f64),
        json!({ "points": total, "inconsistent": inconsistent }),
    )];

    let octet: Vec<&CriticalReport> = all()
        .filter(|(k, _)| *k == Kind::Octet)
        .map(|(_, r)| r)
        .collect();
    if !octet.is_empty() {
        let worst = octet.iter().map(|r| r.sup_grad_norm).fold(0.0, f64::max);
        let ok = octet
            .iter()
            .all(|r| r.verdict == Verdict::Critical && r.isolated);
        checks.push(CheckResult::new(
            "octet-critical",
            ok,
            Some(worst),
            json!({
                "points": octet.len(),
                "threshold": t.critical_threshold(),
                "fingerprints": octet.iter().map(|r| r.fingerprint).collect::<Vec<_>>(),
                "all_isolated": octet.iter().all(|r| r.isolated),
            }),
        ));
    }
    let generic: Vec<&CriticalReport> = all()
        .filter(|(k, _)| *k == Kind::Random)
        .map(|(_, r)| r)
        .collect();
    if !generic.is_empty() {
        let weakest = generic
            .iter()
            .map(|r| r.sup_grad_norm)
            .fold(f64::INFINITY, f64::min);
        let ok = generic
            .iter()
            .all(|r| r.verdict == Verdict::NonCritical && !r.isolated);
        checks.push(CheckResult::new(
            "generic-noncritical",
            ok,
            Some(weakest),
            json!({
                "points": generic.len(),
                "floor": t.noncritical_floor(),
                "none_isolated": generic.iter().all(|r| !r.isolated),
            }),
        ));
    }
    if seeds.len() > 1 {
        // Panel positions carry the same kind of point under every seed.
        let verdicts: Vec<Vec<Verdict>> = runs
            .iter()
            .map(|(_, r)| r.iter().map(|(_, c)| c.verdict).collect())
            .collect();
        let unstable: Vec<usize> = (0..verdicts[0].len())
            .filter(|&i| verdicts.iter().any(|v| v[i] != verdicts[0][i]))
            .collect();
        checks.push(CheckResult::new(
            "seed-stable-verdicts",
            unstable.is_empty(),
            Some(unstable.len() as f64),
            json!({ "seeds": seeds, "unstable_positions": unstable }),
        ));
    }

    Ok(Outcome {
        checks,
        results: json!({
            "representation": rep.kind().to_string(),
            "n_potentials": p.n_potentials,
            "degree": p.degree,
            "seeds": seeds,
            "points": rows,
        }),
        csv: Some(csv),
    })
}
