//! One-parameter families of invariant potentials: the loss of stability of
//! the trivial point, continuation of the bifurcating branch, and reduction
//! to a ray inside a one-dimensional fixed space.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{fingerprint, slice_basis, IsotropyFingerprint, Representation};
use crate::algebra::haar_sample_with;
use crate::error::{check_dim, Error, Result};
use crate::invariants::{default_generators, BasisInvariant, InvariantPotential};
use crate::rng::stream;

/// Finite-difference step for Hessians.
pub const HESSIAN_STEP: f64 = 1e-4;
/// Width of the final bisection bracket around the destabilization point.
pub const LAMBDA_TOLERANCE: f64 = 1e-10;

type Builder = dyn Fn(f64) -> Result<InvariantPotential> + Send + Sync;

/// A potential depending on a real parameter `lambda`.
#[derive(Clone)]
pub struct PotentialFamily {
    rep: Representation,
    label: String,
    range: (f64, f64),
    second_order: bool,
    builder: Arc<Builder>,
}

impl fmt::Debug for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialFamily")
            .field("rep", &self.rep.kind().to_string())
            .field("label", &self.label)
            .field("range", &self.range)
            .field("second_order", &self.second_order)
            .finish()
    }
}

/// Names accepted by [`PotentialFamily::shipped`].
pub const SHIPPED_FAMILIES: [&str; 2] = ["landau", "landau-cubic"];

/// Coefficient of the cubic invariant in the `landau-cubic` family.
pub const CUBIC_COUPLING: f64 = 0.3;

impl PotentialFamily {
    pub fn new(
        rep: Representation,
        label: impl Into<String>,
        range: (f64, f64),
        second_order: bool,
        builder: impl Fn(f64) -> Result<InvariantPotential> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(range.0 < range.1) {
            return Err(Error::Precondition(format!(
                "empty parameter range [{}, {}]",
                range.0, range.1
            )));
        }
        Ok(Self {
            rep,
            label: label.into(),
            range,
            second_order,
            builder: Arc::new(builder),
        })
    }

    /// `-lambda I2 + I2^2`, whose branch leaves the origin continuously.
    pub fn landau(rep: &Representation) -> Result<Self> {
        Self::new(rep.clone(), "landau", (-1.0, 1.0), true, {
            let rep = rep.clone();
            move |l| InvariantPotential::from_terms(&rep, &landau_terms(&rep, l, 0.0))
        })
    }

    /// `-lambda I2 + I2^2 + c I3`. The cubic term makes the nontrivial minimum
    /// appear at finite amplitude, so no limit check is made.
    pub fn landau_cubic(rep: &Representation, c: f64) -> Result<Self> {
        let gens = default_generators(rep);
        if !matches!(gens.get(1), Some(BasisInvariant::TracePower { k: 3, .. })) {
            return Err(Error::Precondition(format!(
                "{} has no cubic invariant",
                rep.kind()
            )));
        }
        Self::new(rep.clone(), "landau-cubic", (-1.0, 1.0), false, {
            let rep = rep.clone();
            move |l| InvariantPotential::from_terms(&rep, &landau_terms(&rep, l, c))
        })
    }

    /// A shipped family by name.
    pub fn shipped(name: &str, rep: &Representation) -> Result<Self> {
        match name {
            "landau" => Self::landau(rep),
            "landau-cubic" => Self::landau_cubic(rep, CUBIC_COUPLING),
            _ => Err(Error::Precondition(format!(
                "unknown family '{name}' (expected one of {})",
                SHIPPED_FAMILIES.join(", ")
            ))),
        }
    }

    /// The family `lambda -> self(lambda - c)`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.builder.clone();
        Self {
            rep: self.rep.clone(),
            label: format!("{}@{c}", self.label),
            range: (self.range.0 + c, self.range.1 + c),
            second_order: self.second_order,
            builder: Arc::new(move |l| inner(l - c)),
        }
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Precondition(format!(
                "empty parameter range [{lo}, {hi}]"
            )));
        }
        self.range = (lo, hi);
        Ok(self)
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn second_order(&self) -> bool {
        self.second_order
    }

    pub fn potential(&self, lambda: f64) -> Result<InvariantPotential> {
        (self.builder)(lambda)
    }

    /// Largest `|V(g v) - V(v)|` over Haar-random `g` and Gaussian `v`.
    pub fn invariance_residual(&self, lambda: f64, samples: usize, seed: u64) -> Result<f64> {
        let pot = self.potential(lambda)?;
        let mut worst = 0.0_f64;
        for i in 0..samples {
            let mut rng = stream(seed, i as u64);
            let v = self.rep.random_vector(&mut rng);
            let g = haar_sample_with(self.rep.n(), &mut rng);
            let gv = self.rep.act_group(&g, &v)?;
            let scale = pot.evaluate(&v)?.abs().max(1.0);
            worst = worst.max((pot.evaluate(&gv)? - pot.evaluate(&v)?).abs() / scale);
        }
        Ok(worst)
    }

    pub fn trivial_point(&self) -> DVector<f64> {
        DVector::zeros(self.rep.carrier_dim())
    }
}

fn landau_terms(rep: &Representation, lambda: f64, cubic: f64) -> Vec<(f64, Vec<u32>)> {
    let k = default_generators(rep).len();
    let unit = |i: usize, p: u32| {
        let mut v = vec![0; k];
        v[i] = p;
        v
    };
    let mut terms = vec![(-lambda, unit(0, 1)), (1.0, unit(0, 2))];
    if cubic != 0.0 {
        terms.push((cubic, unit(1, 1)));
    }
    terms
}

/// Hessian of `pot` in the directions `basis` (orthonormal columns), from
/// central differences of the gradient with one Richardson step.
pub fn hessian_on(
    pot: &InvariantPotential,
    v: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dim(pot.rep().carrier_dim(), v.len())?;
    let k = basis.ncols();
    let mut h = DMatrix::zeros(k, k);
    let diff = |dir: &DVector<f64>, s: f64| -> Result<DVector<f64>> {
        Ok((pot.gradient(&(v + dir * s))? - pot.gradient(&(v - dir * s))?) / (2.0 * s))
    };
    for j in 0..k {
        let b = basis.column(j).into_owned();
        let coarse = diff(&b, HESSIAN_STEP)?;
        let fine = diff(&b, HESSIAN_STEP / 2.0)?;
        let col = basis.transpose() * ((fine * 4.0 - coarse) / 3.0);
        h.set_column(j, &col);
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Smallest eigenvalue of the Hessian restricted to the slice at `v`
/// (the orbit directions are flat for every invariant potential).
pub fn min_hess_eig(pot: &InvariantPotential, v: &DVector<f64>) -> Result<f64> {
    let slice = slice_basis(pot.rep(), v)?;
    if slice.ncols() == 0 {
        return Ok(0.0);
    }
    let h = hessian_on(pot, v, &slice)?;
    Ok(SymmetricEigen::new(h).eigenvalues.min())
}

fn require_critical(family: &PotentialFamily, trivial: &DVector<f64>) -> Result<()> {
    let (lo, hi) = family.range;
    for l in [lo, 0.5 * (lo + hi), hi] {
        let g = family.potential(l)?.gradient(trivial)?.norm();
        if g > 1e-10 {
            return Err(Error::Precondition(format!(
                "trivial point is not critical at lambda = {l} (gradient {g:e})"
            )));
        }
    }
    Ok(())
}

/// Parameter value where the trivial point stops being a local minimum,
/// located by bisection on the sign of [`min_hess_eig`].
pub fn detect_lambda0(family: &PotentialFamily, trivial: &DVector<f64>) -> Result<f64> {
    check_dim(family.rep.carrier_dim(), trivial.len())?;
    require_critical(family, trivial)?;
    let indicator = |l: f64| -> Result<f64> { min_hess_eig(&family.potential(l)?, trivial) };
    let (mut lo, mut hi) = family.range;
    let (s_lo, s_hi) = (indicator(lo)?, indicator(hi)?);
    if (s_lo > 0.0) == (s_hi > 0.0) {
        return Err(Error::NoSignChange { lo, hi });
    }
    let lo_stable = s_lo > 0.0;
    while hi - lo > LAMBDA_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if (indicator(mid)? > 0.0) == lo_stable {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Minimum of `V` along the line through the origin in a fixed direction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reduced1d {
    /// Signed coordinate `t*` of the minimizer `t* d`.
    pub radius: f64,
    pub value: f64,
    pub fingerprint: IsotropyFingerprint,
    /// Full carrier gradient norm at `t* d`.
    pub gradient_norm: f64,
}

/// Minimizes `t -> V(t d; lambda)` over `0 < |t| <= t_max` by a grid scan,
/// golden-section refinement and a Newton polish.
pub fn reduced_1d_solve(
    family: &PotentialFamily,
    lambda: f64,
    direction: &DVector<f64>,
) -> Result<Reduced1d> {
    reduced_1d_solve_with(family, lambda, direction, 10.0)
}

pub fn reduced_1d_solve_with(
    family: &PotentialFamily,
    lambda: f64,
    direction: &DVector<f64>,
    t_max: f64,
) -> Result<Reduced1d> {
    let rep = &family.rep;
    check_dim(rep.carrier_dim(), direction.len())?;
    if (direction.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(
            "ray direction must be a unit vector".into(),
        ));
    }
    let fp = fingerprint(rep, direction)?;
    for r in [0.1, 1.0, t_max] {
        let other = fingerprint(rep, &(direction * r))?;
        if other != fp {
            return Err(Error::Precondition(format!(
                "fingerprint changes along the ray: {fp} at 1, {other} at {r}"
            )));
        }
    }
    let pot = family.potential(lambda)?;
    let f = |t: f64| pot.evaluate(&(direction * t));
    let df = |t: f64| -> Result<f64> { Ok(pot.gradient(&(direction * t))?.dot(direction)) };

    const GRID: usize = 400;
    let h = 2.0 * t_max / GRID as f64;
    let ts: Vec<f64> = (0..=GRID).map(|i| -t_max + i as f64 * h).collect();
    let vals = ts.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let f0 = f(0.0)?;
    // Ties between mirror images go to the positive side.
    let mut best = GRID / 2;
    for i in (0..=GRID).rev() {
        if vals[i] < vals[best] - 1e-15 * vals[best].abs().max(1.0) {
            best = i;
        }
    }
    if best == GRID / 2 || vals[best] >= f0 {
        return Err(Error::NoInteriorMinimum { t: 0.0, value: f0 });
    }
    if best == 0 || best == GRID {
        return Err(Error::NoInteriorMinimum {
            t: ts[best],
            value: vals[best],
        });
    }

    // Golden section on the bracketing cells.
    let (mut a, mut b) = (ts[best - 1], ts[best + 1]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut t = 0.5 * (a + b);

    // Newton on the directional derivative.
    for _ in 0..20 {
        let g = df(t)?;
        let s = 1e-6 * t.abs().max(1e-3);
        let curv = (df(t + s)? - df(t - s)?) / (2.0 * s);
        if !(curv > 0.0) {
            break;
        }
        let step = g / curv;
        t -= step;
        if step.abs() < 1e-15 * t.abs().max(1.0) {
            break;
        }
    }
    let point = direction * t;
    Ok(Reduced1d {
        radius: t,
        value: pot.evaluate(&point)?,
        fingerprint: fp,
        gradient_norm: pot.gradient(&point)?.norm(),
    })
}

/// One recorded point of a parameter sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub point: Vec<f64>,
    pub fingerprint: IsotropyFingerprint,
    pub min_hess_eig: f64,
    /// 0 for the trivial solution, 1 for the bifurcating branch.
    pub branch_id: usize,
    pub gradient_norm: f64,
    /// Square root of the first (quadratic) generator: `sqrt(Tr M^2)` on an
    /// adjoint carrier, the vector norm on a fundamental one.
    pub amplitude: f64,
}

impl BranchPoint {
    /// Carrier norm of the point.
    pub fn norm(&self) -> f64 {
        self.point.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Tuning for [`sweep_branch_with`].
#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Random starts used to find the first nontrivial point.
    pub starts: usize,
    pub seed: u64,
    /// Gradient norm accepted as critical.
    pub tolerance: f64,
    /// Multiple of `grid spacing x slope estimate` allowed between
    /// consecutive branch points.
    pub continuity_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            seed: 0,
            tolerance: 1e-10,
            continuity_factor: 10.0,
        }
    }
}

/// Free descent on the carrier: Armijo gradient steps, then Newton steps with
/// a finite-difference Hessian pseudo-inverse (orbit directions are flat).
pub fn minimize_potential(
    pot: &InvariantPotential,
    start: &DVector<f64>,
    tolerance: f64,
    max_iter: usize,
) -> Result<DVector<f64>> {
    check_dim(pot.rep().carrier_dim(), start.len())?;
    let mut v = start.clone();
    let mut f = pot.evaluate(&v)?;
    let mut g = pot.gradient(&v)?;
    let mut step = 0.1;
    let mut iterations = 0;
    while iterations < max_iter && g.norm() > 1e-6_f64.max(tolerance) {
        iterations += 1;
        let gn2 = g.norm_squared();
        let mut accepted = false;
        while step > 1e-14 {
            let cand = &v - &g * step;
            let fc = pot.evaluate(&cand)?;
            if fc <= f - 1e-4 * step * gn2 {
                v = cand;
                f = fc;
                g = pot.gradient(&v)?;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let m = v.len();
    let eye = DMatrix::identity(m, m);
    for _ in 0..30 {
        if g.norm() <= tolerance.min(1e-13) {
            break;
        }
        let h = hessian_on(pot, &v, &eye)?;
        let svd = h.svd(true, true);
        let smax = svd.singular_values.max();
        let delta = svd
            .solve(&g, 1e-8 * smax.max(1e-300))
            .map_err(|e| Error::Precondition(e.to_string()))?;
        let cand = &v - &delta;
        let gc = pot.gradient(&cand)?;
        if gc.norm() >= g.norm() {
            break;
        }
        v = cand;
        g = gc;
    }
    let residual = g.norm();
    if residual <= tolerance {
        Ok(v)
    } else {
        Err(Error::NonConvergence {
            best: v,
            residual,
            iterations,
        })
    }
}

fn branch_point(
    pot: &InvariantPotential,
    lambda: f64,
    v: &DVector<f64>,
    branch_id: usize,
) -> Result<BranchPoint> {
    Ok(BranchPoint {
        lambda,
        point: v.iter().copied().collect(),
        fingerprint: fingerprint(pot.rep(), v)?,
        min_hess_eig: min_hess_eig(pot, v)?,
        branch_id,
        gradient_norm: pot.gradient(v)?.norm(),
        amplitude: pot
            .invariant_values(v)?
            .first()
            .map_or(0.0, |x| x.max(0.0).sqrt()),
    })
}

pub fn sweep_branch(family: &PotentialFamily, grid: &[f64]) -> Result<Vec<BranchPoint>> {
    sweep_branch_with(family, grid, &SweepConfig::default())
}

/// Continuation along an ascending grid. Points where the trivial solution is
/// stable are recorded as trivial; elsewhere the previous branch point is the
/// warm start (random multi-start for the first one).
pub fn sweep_branch_with(
    family: &PotentialFamily,
    grid: &[f64],
    config: &SweepConfig,
) -> Result<Vec<BranchPoint>> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition(
            "grid must be strictly ascending".into(),
        ));
    }
    let rep = &family.rep;
    let trivial = family.trivial_point();
    let mut out: Vec<BranchPoint> = Vec::with_capacity(grid.len());
    let mut prev: Option<(f64, DVector<f64>)> = None;
    let mut slope: Option<f64> = None;
    for &lambda in grid {
        let pot = family.potential(lambda)?;
        if min_hess_eig(&pot, &trivial)? > -1e-10 && prev.is_none() {
            out.push(branch_point(&pot, lambda, &trivial, 0)?);
            continue;
        }
        let candidate = match &prev {
            Some((_, p)) => minimize_potential(&pot, p, config.tolerance, 200_000)?,
            None => multi_start(&pot, rep, config)?,
        };
        if let Some((l_prev, p)) = &prev {
            let dist = (&candidate - p).norm();
            let dl = lambda - l_prev;
            if let Some(s) = slope {
                let bound = config.continuity_factor * dl * s + 1e-9;
                if dist > bound {
                    return Err(Error::BranchJump {
                        lambda,
                        previous: p.clone(),
                        candidate,
                        distance: dist,
                        bound,
                    });
                }
            }
            slope = Some(dist / dl);
        }
        out.push(branch_point(&pot, lambda, &candidate, 1)?);
        prev = Some((lambda, candidate));
    }
    Ok(out)
}

fn multi_start(
    pot: &InvariantPotential,
    rep: &Representation,
    config: &SweepConfig,
) -> Result<DVector<f64>> {
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut last_err = None;
    for i in 0..config.starts.max(1) {
        let mut rng = stream(config.seed, i as u64);
        let radius = rng.random_range(0.05..2.0);
        let start = rep.random_unit_vector(&mut rng) * radius;
        match minimize_potential(pot, &start, config.tolerance, 200_000) {
            Ok(v) => {
                let f = pot.evaluate(&v)?;
                if v.norm() > 1e-6 && best.as_ref().is_none_or(|(fb, _)| f < *fb) {
                    best = Some((f, v));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((_, v)), _) => Ok(v),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::DegenerateInput(
            "every start collapsed to the trivial point".into(),
        )),
    }
}

/// Checks that a second-order branch shrinks to the trivial point: norms
/// increase with `lambda`, and extrapolating the squared norm linearly from
/// the two points closest to `lambda0` gives a norm below `1e-3` there.
pub fn check_branch_limit(points: &[BranchPoint], lambda0: f64) -> Result<f64> {
    let branch: Vec<&BranchPoint> = points.iter().filter(|p| p.branch_id == 1).collect();
    if branch.len() < 2 {
        return Err(Error::BranchLimit("fewer than two branch points".into()));
    }
    for w in branch.windows(2) {
        if w[1].norm() < w[0].norm() {
            return Err(Error::BranchLimit(format!(
                "norm decreases between lambda = {} and {}",
                w[0].lambda, w[1].lambda
            )));
        }
    }
    let (a, b) = (branch[0], branch[1]);
    let (na, nb) = (a.norm().powi(2), b.norm().powi(2));
    let slope = (nb - na) / (b.lambda - a.lambda);
    let at = na + slope * (lambda0 - a.lambda);
    let limit = at.max(0.0).sqrt();
    if limit > 1e-3 {
        return Err(Error::BranchLimit(format!(
            "extrapolated norm {limit:e} at lambda0 = {lambda0}"
        )));
    }
    Ok(limit)
}

/// Branch table: `branch,lambda,v0..,stab,center,fix,min_hess_eig`.
pub fn branch_csv(points: &[BranchPoint]) -> String {
    let m = points.first().map_or(0, |p| p.point.len());
    let mut out = String::from("branch,lambda");
    for i in 0..m {
        write!(out, ",v{i}").unwrap();
    }
    out.push_str(",stab,center,fix,min_hess_eig\n");
    for p in points {
        write!(out, "{},{}", p.branch_id, p.lambda).unwrap();
        for x in &p.point {
            write!(out, ",{x}").unwrap();
        }
        let f = p.fingerprint;
        writeln!(
            out,
            ",{},{},{},{}",
            f.stab_dim, f.center_dim, f.fix_dim, p.min_hess_eig
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn su3() -> Representation {
        Representation::adjoint(3).unwrap()
    }

    fn lambda8(rep: &Representation) -> DVector<f64> {
        let mut v = DVector::zeros(rep.carrier_dim());
        v[7] = 1.0;
        v
    }

    #[test]
    fn hessian_at_origin_is_scalar() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let pot = fam.potential(0.7).unwrap();
        let eye = DMatrix::identity(8, 8);
        let h = hessian_on(&pot, &fam.trivial_point(), &eye).unwrap();
        // V = -2 lambda |v|^2 + 4 |v|^4 near the origin.
        assert!((h - eye * (-4.0 * 0.7)).amax() < 1e-12);
    }

    #[test]
    fn lambda0_of_landau_family() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let l0 = detect_lambda0(&fam, &fam.trivial_point()).unwrap();
        assert!(l0.abs() < 1e-8, "lambda0 = {l0}");
        let cubic = PotentialFamily::landau_cubic(&su3(), 0.3).unwrap();
        let l0 = detect_lambda0(&cubic, &cubic.trivial_point()).unwrap();
        assert!(l0.abs() < 1e-8);
    }

    #[test]
    fn shifted_family_moves_lambda0() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let l0 = detect_lambda0(&fam, &fam.trivial_point()).unwrap();
        let shifted = fam.shifted(0.37);
        let l1 = detect_lambda0(&shifted, &shifted.trivial_point()).unwrap();
        assert!((l1 - l0 - 0.37).abs() < 1e-9);
    }

    #[test]
    fn stable_family_has_no_sign_change() {
        let rep = su3();
        let fam = PotentialFamily::new(rep.clone(), "bowl", (-1.0, 1.0), true, move |_| {
            InvariantPotential::from_terms(&rep, &[(1.0, vec![1, 0])])
        })
        .unwrap();
        assert!(matches!(
            detect_lambda0(&fam, &fam.trivial_point()),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn trivial_point_must_be_critical() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let off = lambda8(fam.rep()) * 0.3;
        assert!(matches!(
            detect_lambda0(&fam, &off),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn cubic_family_needs_cubic_invariant() {
        let su2 = Representation::adjoint(2).unwrap();
        assert!(PotentialFamily::landau_cubic(&su2, 0.3).is_err());
        assert!(PotentialFamily::shipped("landau", &su2).is_ok());
        assert!(PotentialFamily::shipped("mexican-hat", &su2).is_err());
    }

    #[test]
    fn families_are_invariant() {
        let fam = PotentialFamily::landau_cubic(&su3(), 0.3).unwrap();
        assert!(fam.invariance_residual(0.4, 8, 1).unwrap() < 1e-12);
    }

    #[test]
    fn reduced_solve_on_octet_ray() {
        let rep = su3();
        let fam = PotentialFamily::landau(&rep).unwrap();
        let d = lambda8(&rep);
        for lambda in [0.25, 1.0, 2.0] {
            let r = reduced_1d_solve(&fam, lambda, &d).unwrap();
            // I2(d) = 2, so -lambda I2 + I2^2 = -2 lambda t^2 + 4 t^4.
            assert!((r.radius - lambda.sqrt() / 2.0).abs() < 1e-12, "{r:?}");
            assert!(r.gradient_norm < 1e-7);
            assert_eq!(r.fingerprint, IsotropyFingerprint::new(4, 1, 1));
        }
    }

    #[test]
    fn reduced_solve_below_lambda0_has_no_minimum() {
        let rep = su3();
        let fam = PotentialFamily::landau(&rep).unwrap();
        assert!(matches!(
            reduced_1d_solve(&fam, -0.5, &lambda8(&rep)),
            Err(Error::NoInteriorMinimum { .. })
        ));
    }

    #[test]
    fn cubic_term_picks_the_sign() {
        let rep = su3();
        let d = lambda8(&rep);
        let plus = PotentialFamily::landau_cubic(&rep, 0.1).unwrap();
        let minus = PotentialFamily::landau_cubic(&rep, -0.1).unwrap();
        let rp = reduced_1d_solve(&plus, 1.0, &d).unwrap();
        let rm = reduced_1d_solve(&minus, 1.0, &d).unwrap();
        assert!(rp.radius * rm.radius < 0.0);
        assert!((rp.radius + rm.radius).abs() < 1e-10);
        assert!(rp.gradient_norm < 1e-7 && rm.gradient_norm < 1e-7);
    }

    #[test]
    fn reduced_solve_checks_the_ray() {
        let rep = su3();
        let fam = PotentialFamily::landau(&rep).unwrap();
        let mut d = lambda8(&rep);
        d *= 2.0;
        assert!(matches!(
            reduced_1d_solve(&fam, 1.0, &d),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn landau_branch_follows_square_root() {
        let rep = su3();
        let fam = PotentialFamily::landau(&rep).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let pts = sweep_branch(&fam, &grid).unwrap();
        for p in &pts {
            assert_eq!(p.branch_id, 1);
            let expect = (p.lambda / 2.0).sqrt();
            assert!((p.amplitude / expect - 1.0).abs() < 1e-6, "{p:?}");
        }
        assert!(check_branch_limit(&pts, 0.0).unwrap() < 1e-3);
    }

    #[test]
    fn cubic_branch_is_octet() {
        let rep = su3();
        let fam = PotentialFamily::landau_cubic(&rep, 0.3).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let pts = sweep_branch(&fam, &grid).unwrap();
        for p in &pts {
            assert_eq!(p.fingerprint, IsotropyFingerprint::new(4, 1, 1), "{p:?}");
            assert!(p.gradient_norm < 1e-10);
        }
    }

    #[test]
    fn sweep_below_lambda0_stays_trivial() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let grid = [-0.9, -0.5, -0.1];
        let pts = sweep_branch(&fam, &grid).unwrap();
        for p in &pts {
            assert_eq!(p.branch_id, 0);
            assert_eq!(p.fingerprint, IsotropyFingerprint::new(8, 0, 0));
            assert!(p.min_hess_eig > 0.0);
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        assert!(sweep_branch(&fam, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn branch_jump_is_detected() {
        // The quadratic coefficient jumps tenfold at lambda = 0.5.
        let rep = su3();
        let fam = PotentialFamily::new(rep.clone(), "jump", (0.0, 1.0), false, move |l| {
            let a = if l < 0.5 { l } else { 10.0 * l };
            InvariantPotential::from_terms(&rep, &landau_terms(&rep, a, 0.0))
        })
        .unwrap();
        let grid: Vec<f64> = (1..=8).map(|i| i as f64 / 10.0).collect();
        match sweep_branch(&fam, &grid) {
            Err(Error::BranchJump { lambda, .. }) => assert!((lambda - 0.5).abs() < 1e-12),
            other => panic!("expected a branch jump, got {other:?}"),
        }
    }

    #[test]
    fn csv_has_one_row_per_point() {
        let fam = PotentialFamily::landau(&su3()).unwrap();
        let pts = sweep_branch(&fam, &[-0.2, 0.3]).unwrap();
        let csv = branch_csv(&pts);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("branch,lambda,v0,"));
        assert!(lines[0].ends_with("stab,center,fix,min_hess_eig"));
        assert!(lines[1].starts_with("0,-0.2,"));
        assert_eq!(lines[2].split(',').count(), 2 + 8 + 4);
    }
}
