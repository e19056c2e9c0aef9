//! Critical points on the unit sphere, the all-potentials criticality test
//! and equivariant flow checks.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{
    fingerprint, fixed_space, is_isolated_in_stratum, stabilizer_algebra, IsolationConfig,
    IsolationEvidence, IsotropyFingerprint, Representation,
};
use crate::algebra::haar_sample_with;
use crate::error::{check_dim, Error, Result};
use crate::invariants::{random_invariant_potential, InvariantPotential};
use crate::linalg;
use crate::rng::{derive_seed, stream};
use crate::tol;

fn require_unit(v: &DVector<f64>) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > tol::STRUCTURAL {
        return Err(Error::DegenerateInput(format!(
            "point must lie on the unit sphere, |v| = {n}"
        )));
    }
    Ok(())
}

/// Gradient of `pot` minus its radial component at a unit vector.
pub fn sphere_gradient(pot: &InvariantPotential, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(pot.rep().carrier_dim(), v.len())?;
    require_unit(v)?;
    let g = pot.gradient(v)?;
    let radial = g.dot(v);
    Ok(g - v * radial)
}

/// Result of a projected descent on the sphere.
#[derive(Clone, Debug)]
pub struct CriticalSearch {
    pub point: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Potential values at the accepted iterates, starting point first.
    /// Non-increasing up to rounding.
    pub values: Vec<f64>,
}

const ARMIJO_C: f64 = 1e-4;
const INITIAL_STEP: f64 = 0.1;
const BACKTRACK: f64 = 0.5;

fn descend_on_sphere(
    pot: &InvariantPotential,
    start: &DVector<f64>,
    projector: Option<&DMatrix<f64>>,
    tolerance: f64,
    max_iter: usize,
) -> Result<CriticalSearch> {
    check_dim(pot.rep().carrier_dim(), start.len())?;
    if !(tolerance > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let n0 = start.norm();
    if n0 < 1e-12 {
        return Err(Error::DegenerateInput("start vector is zero".into()));
    }
    let mut v = match projector {
        Some(p) => p * start,
        None => start.clone(),
    };
    let nv = v.norm();
    if nv < 1e-12 {
        return Err(Error::DegenerateInput(
            "start vector has no component in the search subspace".into(),
        ));
    }
    v /= nv;
    let direction = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let mut g = pot.gradient(v)?;
        if let Some(p) = projector {
            g = p * g;
        }
        let r = g.dot(v);
        Ok(g - v * r)
    };
    let mut f = pot.evaluate(&v)?;
    let mut g = direction(&v)?;
    let mut values = vec![f];
    let mut iterations = 0;
    while iterations < max_iter {
        let gn = g.norm();
        if gn < tolerance {
            return Ok(CriticalSearch {
                point: v,
                residual: gn,
                iterations,
                values,
            });
        }
        iterations += 1;
        // Once the Armijo decrease drops below the rounding level of V, a step
        // is accepted if V stays within that level and the gradient shrinks.
        let slack = 8.0 * f64::EPSILON * f.abs().max(1.0);
        let mut step = INITIAL_STEP;
        let mut accepted = None;
        while step > 1e-16 {
            let mut cand = &v - &g * step;
            cand /= cand.norm();
            let fc = pot.evaluate(&cand)?;
            let decrease = ARMIJO_C * step * gn * gn;
            if fc <= f - decrease {
                accepted = Some((cand, fc, None));
                break;
            }
            if decrease < slack && fc <= f + slack {
                let gc = direction(&cand)?;
                if gc.norm() < gn {
                    accepted = Some((cand, fc, Some(gc)));
                    break;
                }
            }
            step *= BACKTRACK;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        v = cand;
        f = fc;
        values.push(f);
        g = match gc {
            Some(gc) => gc,
            None => direction(&v)?,
        };
    }
    let residual = g.norm();
    if residual < tolerance {
        Ok(CriticalSearch {
            point: v,
            residual,
            iterations,
            values,
        })
    } else {
        Err(Error::NonConvergence {
            best: v,
            residual,
            iterations,
        })
    }
}

/// Projected gradient descent with Armijo backtracking on the unit sphere.
pub fn find_critical(
    pot: &InvariantPotential,
    start: &DVector<f64>,
    tolerance: f64,
    max_iter: usize,
) -> Result<CriticalSearch> {
    descend_on_sphere(pot, start, None, tolerance, max_iter)
}

/// Descent on the unit sphere of a subspace given by an orthonormal basis.
pub fn find_critical_in_subspace(
    pot: &InvariantPotential,
    subspace: &linalg::Subspace,
    start: &DVector<f64>,
    tolerance: f64,
    max_iter: usize,
) -> Result<CriticalSearch> {
    let p = linalg::projector(subspace, pot.rep().carrier_dim());
    descend_on_sphere(pot, start, Some(&p), tolerance, max_iter)
}

/// Outcome of comparing the sup gradient norm with the two thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Critical,
    NonCritical,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MichelConfig {
    pub n_potentials: usize,
    pub degree: u32,
    pub critical_threshold: f64,
    pub noncritical_floor: f64,
    pub isolation: IsolationConfig,
    pub seed: u64,
}

impl Default for MichelConfig {
    fn default() -> Self {
        Self {
            n_potentials: 100,
            degree: 6,
            critical_threshold: tol::CRITICAL,
            noncritical_floor: tol::NON_CRITICAL,
            isolation: IsolationConfig::default(),
            seed: 0,
        }
    }
}

/// Criticality for a sampled family of invariant potentials, set against the
/// isolated-in-stratum evidence at the same point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalReport {
    pub point: Vec<f64>,
    pub fingerprint: IsotropyFingerprint,
    pub sup_grad_norm: f64,
    pub worst_potential: usize,
    pub n_potentials: usize,
    pub isolated: bool,
    pub verdict: Verdict,
    pub verdict_consistent: bool,
    pub isolation: IsolationEvidence,
}

impl CriticalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// The potentials drawn by [`michel_test`] for a given seed.
pub fn potential_panel(
    rep: &Representation,
    count: usize,
    degree: u32,
    seed: u64,
) -> Result<Vec<InvariantPotential>> {
    (0..count as u64)
        .map(|i| random_invariant_potential(rep, degree, derive_seed(seed, i)))
        .collect()
}

pub fn michel_test(
    rep: &Representation,
    v: &DVector<f64>,
    n_potentials: usize,
    seed: u64,
) -> Result<CriticalReport> {
    let config = MichelConfig {
        n_potentials,
        seed,
        ..MichelConfig::default()
    };
    michel_test_with(rep, v, &config)
}

pub fn michel_test_with(
    rep: &Representation,
    v: &DVector<f64>,
    config: &MichelConfig,
) -> Result<CriticalReport> {
    check_dim(rep.carrier_dim(), v.len())?;
    require_unit(v)?;
    let panel = potential_panel(rep, config.n_potentials, config.degree, config.seed)?;
    let norms = panel
        .par_iter()
        .map(|p| sphere_gradient(p, v).map(|g| g.norm()))
        .collect::<Result<Vec<_>>>()?;
    let (worst_potential, sup_grad_norm) = norms
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, x)| if x > acc.1 { (i, x) } else { acc });
    let isolation_config = IsolationConfig {
        constrain_to_sphere: true,
        seed: derive_seed(config.seed, u32::MAX as u64),
        ..config.isolation.clone()
    };
    let isolation = is_isolated_in_stratum(rep, v, &isolation_config)?;
    let verdict = if sup_grad_norm < config.critical_threshold {
        Verdict::Critical
    } else if sup_grad_norm > config.noncritical_floor {
        Verdict::NonCritical
    } else {
        Verdict::Inconclusive
    };
    let verdict_consistent = match verdict {
        Verdict::Critical => isolation.isolated,
        Verdict::NonCritical => !isolation.isolated,
        Verdict::Inconclusive => false,
    };
    Ok(CriticalReport {
        point: v.iter().copied().collect(),
        fingerprint: isolation.fingerprint,
        sup_grad_norm,
        worst_potential,
        n_potentials: config.n_potentials,
        isolated: isolation.isolated,
        verdict,
        verdict_consistent,
        isolation,
    })
}

/// Residuals of an equivariant flow started at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowReport {
    pub equivariance_residual: f64,
    pub tangency_residual: f64,
    pub initial_fingerprint: IsotropyFingerprint,
    pub fingerprint_constant: bool,
    /// First step at which the fingerprint changed, if any.
    pub fingerprint_break: Option<usize>,
    pub steps: usize,
    pub final_point: Vec<f64>,
}

impl FlowReport {
    pub fn passed(&self) -> bool {
        self.tangency_residual < 1e-8 && self.fingerprint_constant
    }
}

fn rk4_step(
    field: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = field(x);
    let k2 = field(&(x + &k1 * (h / 2.0)));
    let k3 = field(&(x + &k2 * (h / 2.0)));
    let k4 = field(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Checks that `field` is equivariant, that `field(v)` lies in the fixed space
/// of the stabilizer of `v`, and that the RK4 flow from `v` keeps its
/// fingerprint for `steps` steps of size `step`.
pub fn equivariant_flow_check(
    rep: &Representation,
    field: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    v: &DVector<f64>,
    steps: usize,
    step: f64,
    seed: u64,
) -> Result<FlowReport> {
    check_dim(rep.carrier_dim(), v.len())?;
    let mut rng = stream(seed, 0);
    let scale = v.norm().max(1.0);
    let mut probes = vec![v.clone()];
    for _ in 0..3 {
        probes.push(rep.random_unit_vector(&mut rng) * (scale * rng.random_range(0.5..1.0)));
    }
    let mut equivariance_residual = 0.0_f64;
    for _ in 0..8 {
        let r = rep.group_matrix(&haar_sample_with(rep.n(), &mut rng))?;
        for w in &probes {
            let fw = field(w);
            check_dim(rep.carrier_dim(), fw.len())?;
            let lhs = field(&(&r * w));
            let res = (lhs - &r * &fw).norm() / fw.norm().max(1.0);
            equivariance_residual = equivariance_residual.max(res);
        }
    }
    if equivariance_residual > 1e-8 {
        return Err(Error::NotEquivariant {
            residual: equivariance_residual,
        });
    }
    let fix = fixed_space(rep, &stabilizer_algebra(rep, v)?)?;
    let fv = field(v);
    let tangency_residual = linalg::residual_from(&fix, &fv) / fv.norm().max(1.0);
    let initial_fingerprint = fingerprint(rep, v)?;
    let mut x = v.clone();
    let mut fingerprint_break = None;
    for k in 1..=steps {
        x = rk4_step(field, &x, step);
        if fingerprint(rep, &x)? != initial_fingerprint {
            fingerprint_break = Some(k);
            break;
        }
    }
    Ok(FlowReport {
        equivariance_residual,
        tangency_residual,
        initial_fingerprint,
        fingerprint_constant: fingerprint_break.is_none(),
        fingerprint_break,
        steps,
        final_point: x.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::finite_difference_gradient;

    fn su3() -> Representation {
        Representation::adjoint(3).unwrap()
    }

    fn unit(i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(8);
        v[i] = 1.0;
        v
    }

    #[test]
    fn sphere_gradient_examples() {
        let rep = su3();
        let i2 = InvariantPotential::generator(&rep, 0).unwrap();
        let i3 = InvariantPotential::generator(&rep, 1).unwrap();
        let mut rng = stream(1, 1);
        let v = rep.random_unit_vector(&mut rng);
        assert!(sphere_gradient(&i2, &v).unwrap().norm() < 1e-14);
        assert!(sphere_gradient(&i3, &unit(7)).unwrap().norm() < 1e-10);
        let mix = (unit(2) + unit(7)).normalize();
        let g = sphere_gradient(&i3, &mix).unwrap();
        // Oracle: finite differences of I3 along the sphere tangent.
        let fd = finite_difference_gradient(|w| i3.evaluate(w).unwrap(), &mix, 1e-6);
        let fd_t = &fd - &mix * fd.dot(&mix);
        assert!((&g - &fd_t).norm() < 1e-7);
        assert!(g.norm() > 0.1);
        assert!(matches!(
            sphere_gradient(&i3, &(unit(0) * 2.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn find_critical_fixed_point_and_monotone() {
        let rep = su3();
        let i3 = InvariantPotential::generator(&rep, 1).unwrap();
        let s = find_critical(&i3, &unit(7), 1e-10, 100).unwrap();
        assert_eq!(s.iterations, 0);
        assert_eq!(s.point, unit(7));
        let mut rng = stream(2, 0);
        let start = rep.random_unit_vector(&mut rng);
        let s = find_critical(&i3, &start, 1e-12, 20_000).unwrap();
        // Monotone up to the rounding level of V.
        assert!(s.values.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        assert_eq!(
            fingerprint(&rep, &s.point).unwrap(),
            IsotropyFingerprint::new(4, 1, 1)
        );
    }

    #[test]
    fn opposite_potentials_reach_opposite_cubic_signs() {
        let rep = su3();
        let i3 = InvariantPotential::generator(&rep, 1).unwrap();
        let neg = InvariantPotential::from_terms(&rep, &[(-1.0, vec![0, 1])]).unwrap();
        let mut rng = stream(3, 0);
        let start = rep.random_unit_vector(&mut rng);
        let a = find_critical(&i3, &start, 1e-12, 20_000).unwrap();
        let b = find_critical(&neg, &start, 1e-12, 20_000).unwrap();
        let ia = i3.evaluate(&a.point).unwrap();
        let ib = i3.evaluate(&b.point).unwrap();
        assert!(ia < 0.0 && ib > 0.0);
        assert!((ia + ib).abs() < 1e-9);
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let rep = su3();
        let i3 = InvariantPotential::generator(&rep, 1).unwrap();
        let start = (unit(0) + unit(2) * 0.3 + unit(7) * 0.1).normalize();
        match find_critical(&i3, &start, 1e-12, 2) {
            Err(Error::NonConvergence {
                best, iterations, ..
            }) => {
                assert_eq!(iterations, 2);
                assert!((best.norm() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn flow_checks() {
        let rep = su3();
        let pot = random_invariant_potential(&rep, 6, 4).unwrap();
        let neg_grad = |x: &DVector<f64>| -pot.gradient(x).unwrap();
        let report = equivariant_flow_check(&rep, &neg_grad, &unit(7), 100, 1e-3, 1).unwrap();
        assert!(report.tangency_residual < 1e-8);
        assert!(report.fingerprint_constant);
        assert_eq!(
            report.initial_fingerprint,
            IsotropyFingerprint::new(4, 1, 1)
        );

        let identity = |x: &DVector<f64>| x.clone();
        let r = equivariant_flow_check(&rep, &identity, &unit(7), 50, 1e-2, 2).unwrap();
        assert!(r.passed());
        let end = DVector::from_vec(r.final_point.clone());
        assert!((end.normalize() - unit(7)).norm() < 1e-12);

        let skew = DMatrix::from_fn(8, 8, |i, j| if i == j { (i + 1) as f64 } else { 0.0 });
        let linear = move |x: &DVector<f64>| &skew * x;
        assert!(matches!(
            equivariant_flow_check(&rep, &linear, &unit(7), 10, 1e-2, 3),
            Err(Error::NotEquivariant { .. })
        ));
    }
}
