use nalgebra::DVector;
use serde_json::{json, Value};
use strata_core::action::{RepKind, Representation};
use strata_core::algebra::{exp_map, AlgebraElement, GroupElement};
use strata_core::bifurcation::PotentialFamily;
use strata_core::lattice::{
    build_covariant_matter, combined_isotropy, covariant_residuals, gauge_stabilizer,
    holonomy_generators, total_lagrangian, wilson_action, GaugeSection, LatticeConfig,
    LatticeConnection, LatticeSpec,
};
use strata_core::{Error, Result};

use super::{csv_float, Context, Outcome};
use crate::manifest::{LatticeParams, Manifest, MatterParams};
use crate::report::{write_atomic, CheckResult};

fn connection(p: &LatticeParams, seed: u64, ctx: &Context<'_>) -> Result<LatticeConnection> {
    let spec = LatticeSpec::new(p.d, p.l)?;
    let defect = || -> Result<LatticeConnection> {
        let phases = p.defect_phases.as_deref().unwrap_or_default();
        let h = exp_map(&AlgebraElement::diagonal(phases)?, 1.0);
        Ok(LatticeConnection::link_defect(spec, &h))
    };
    let a = match p.connection.as_str() {
        "null" => LatticeConnection::null(spec, p.n),
        "pure-gauge" => LatticeConnection::pure_gauge(spec, p.n, seed),
        "random" => LatticeConnection::random(spec, p.n, seed),
        "defect" => defect()?,
        "random-defect" => strata_core::lattice::gauge_transform(
            &GaugeSection::random(spec, p.n, seed),
            &defect()?,
        )?,
        "file" => {
            let path = ctx.base_dir.join(p.file.as_deref().unwrap_or_default());
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))?;
            let cfg = LatticeConfig::from_text(&text)?;
            if cfg.connection.spec().d() != p.d
                || cfg.connection.spec().l() != p.l
                || cfg.connection.n() != p.n
            {
                return Err(Error::SpecMismatch(format!(
                    "{} holds a d={} L={} SU({}) configuration",
                    path.display(),
                    cfg.connection.spec().d(),
                    cfg.connection.spec().l(),
                    cfg.connection.n()
                )));
            }
            cfg.connection
        }
        other => unreachable!("validated connection kind {other}"),
    };
    Ok(a)
}

/// Generator table rows: plaquettes in (site, mu < nu) order, then one torus
/// cycle per axis, as in [`holonomy_generators`].
fn generator_csv(a: &LatticeConnection, gens: &[GroupElement]) -> String {
    let spec = a.spec();
    let id = GroupElement::identity(a.n());
    let mut labels = Vec::with_capacity(gens.len());
    for x in 0..spec.sites() {
        for mu in 0..spec.d() {
            for nu in mu + 1..spec.d() {
                labels.push(format!("plaquette,{x},{mu},{nu}"));
            }
        }
    }
    for axis in 0..spec.d() {
        labels.push(format!("torus,0,{axis},"));
    }
    let mut out = String::from("generator,kind,site,mu,nu,deviation\n");
    for (i, (g, label)) in gens.iter().zip(labels).enumerate() {
        out.push_str(&format!("{i},{label},{}\n", csv_float(g.max_abs_diff(&id))));
    }
    out
}

struct MatterRun {
    checks: Vec<CheckResult>,
    results: Value,
    lagrangian: Option<Value>,
}

fn matter(a: &LatticeConnection, mp: &MatterParams, m: &Manifest) -> Result<MatterRun> {
    let t = &m.tolerances;
    let rep = Representation::new(mp.rep.parse::<RepKind>()?)?;
    let m0 = rep.to_complex(&DVector::from_column_slice(&mp.m0))?;
    let mut checks = Vec::new();
    match build_covariant_matter(a, &m0, &rep) {
        Err(Error::HolonomyObstruction {
            generator,
            residual,
        }) => {
            checks.push(CheckResult::new(
                "matter-holonomy",
                mp.expect_obstruction && residual > 1e-3,
                Some(residual),
                json!({ "obstructed": true, "generator": generator, "expected_obstruction": mp.expect_obstruction }),
            ));
            Ok(MatterRun {
                checks,
                results: json!({ "rep": rep.kind().to_string(), "obstructed": true, "generator": generator, "residual": residual }),
                lagrangian: None,
            })
        }
        Err(e) => Err(e),
        Ok(f) => {
            checks.push(CheckResult::new(
                "matter-holonomy",
                !mp.expect_obstruction,
                None,
                json!({ "obstructed": false, "expected_obstruction": mp.expect_obstruction }),
            ));
            let residuals = covariant_residuals(a, &f, &rep)?;
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            let lg: f64 = residuals.iter().map(|r| r * r).sum();
            let links = a.spec().links();
            checks.push(CheckResult::new(
                "covariant-residual",
                worst < t.covariant_residual() && lg < 1e-16 * links as f64,
                Some(worst),
                json!({ "links": links, "gauge_term": lg, "tolerance": t.covariant_residual() }),
            ));
            let iso = combined_isotropy(a, &f, &rep)?;
            checks.push(CheckResult::new(
                "intersection-law",
                iso.intersection_distance < t.intersection_distance()
                    && iso.intersection.len() == iso.dim(),
                Some(iso.intersection_distance),
                json!({ "combined_dim": iso.dim(), "intersection_dim": iso.intersection.len() }),
            ));
            let pot = PotentialFamily::landau(&rep)?.potential(mp.potential_lambda)?;
            let l = total_lagrangian(a, &f, &pot)?;
            let (lo, hi) = f.norm_profile();
            Ok(MatterRun {
                checks,
                results: json!({
                    "rep": rep.kind().to_string(),
                    "obstructed": false,
                    "norm_range": [lo, hi],
                    "combined_fingerprint": iso.fingerprint,
                    "gauge_dim": iso.gauge_dim,
                    "matter_dim": iso.matter_dim,
                }),
                lagrangian: Some(json!({
                    "gauge": l.gauge,
                    "potential": l.potential,
                    "yang_mills": l.yang_mills,
                    "total": l.total(),
                })),
            })
        }
    }
}

/// Gauge stabilizer of a configured connection, with optional matter.
pub fn run(m: &Manifest, ctx: &Context<'_>) -> Result<Outcome> {
    let p = m.lattice.as_ref().expect("validated lattice section");
    let t = &m.tolerances;
    let a = connection(p, m.seed, ctx)?;
    if let Some(name) = &p.save {
        let cfg = LatticeConfig {
            connection: a.clone(),
            matter: None,
        };
        write_atomic(&ctx.out_dir.join(name), &cfg.to_text())
            .map_err(|e| Error::Precondition(format!("cannot save configuration: {e}")))?;
    }

    let gens = holonomy_generators(&a);
    let mut checks = Vec::new();
    let stabilizer = match gauge_stabilizer(&a) {
        Ok(s) => {
            checks.push(CheckResult::new(
                "stabilizer-sections",
                s.max_section_residual <= t.section_residual(),
                Some(s.max_section_residual),
                json!({ "sections": s.sections.len() }),
            ));
            Some(s)
        }
        Err(Error::StabilizerMismatch { residual }) => {
            checks.push(CheckResult::new(
                "stabilizer-sections",
                false,
                Some(residual),
                json!({ "error": "a stabilizer section moves the connection" }),
            ));
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(expected) = p.expected_stabilizer_dim {
        let found = stabilizer.as_ref().map(|s| s.dim());
        checks.push(CheckResult::new(
            "expected-stabilizer-dim",
            found == Some(expected),
            None,
            json!({ "expected": expected, "found": found }),
        ));
    }

    let mut results = json!({
        "d": p.d,
        "l": p.l,
        "n": p.n,
        "sites": a.spec().sites(),
        "links": a.spec().links(),
        "wilson_action": wilson_action(&a),
        "generator_count": gens.len(),
        "stabilizer": stabilizer.as_ref().map(|s| json!({
            "fingerprint": s.fingerprint,
            "dim": s.dim(),
            "plaquette_only_dim": s.plaquette_only_dim,
            "max_generator_deviation": s.max_generator_deviation,
            "max_section_residual": s.max_section_residual,
        })),
    });
    let mut lagrangian = json!({ "yang_mills": wilson_action(&a) });
    if let Some(mp) = &p.matter {
        let run = matter(&a, mp, m)?;
        checks.extend(run.checks);
        results["matter"] = run.results;
        if let Some(l) = run.lagrangian {
            lagrangian = l;
        }
    }
    results["lagrangian"] = lagrangian;

    Ok(Outcome {
        checks,
        results,
        csv: Some(generator_csv(&a, &gens)),
    })
}
