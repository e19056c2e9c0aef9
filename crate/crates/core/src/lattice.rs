//! Gauge fields on a small periodic hypercubic lattice.
//!
//! Link variables `U_mu(x)` transport from `x + e_mu` back to `x`; gauge
//! sections act as `U_mu(x) -> g(x) U_mu(x) g(x + e_mu)^-1` and on matter as
//! `phi(x) -> g(x) phi(x)`. Transports from the basepoint (the origin) follow
//! staircase paths: all steps along axis 0 first, then axis 1, and so on.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::action::{self, IsotropyFingerprint, RepKind, Representation};
use crate::algebra::{
    exp_map, haar_sample, random_algebra_with, AlgebraBasis, AlgebraElement, CMatrix, GroupElement,
};
use crate::error::{check_dim, Error, Result};
use crate::invariants::InvariantPotential;
use crate::linalg::{self, Subspace};
use crate::rng::{derive_seed, stream};
use crate::tol;

/// Lattice geometry: `L^d` sites with periodic boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeSpec {
    d: usize,
    l: usize,
}

/// One step along a lattice axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub axis: usize,
    pub forward: bool,
}

impl LatticeSpec {
    pub const MAX_SITES: usize = 4096;

    pub fn new(d: usize, l: usize) -> Result<Self> {
        if !(2..=4).contains(&d) {
            return Err(Error::InvalidSpec(format!("dimension {d} not in 2..=4")));
        }
        if !(2..=8).contains(&l) {
            return Err(Error::InvalidSpec(format!("extent {l} not in 2..=8")));
        }
        let sites = l.pow(d as u32);
        if sites > Self::MAX_SITES {
            return Err(Error::InvalidSpec(format!(
                "{sites} sites exceed the limit of {}",
                Self::MAX_SITES
            )));
        }
        Ok(Self { d, l })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    pub fn links(&self) -> usize {
        self.sites() * self.d
    }

    pub fn plaquettes(&self) -> usize {
        self.sites() * self.d * (self.d - 1) / 2
    }

    fn stride(&self, axis: usize) -> usize {
        self.l.pow((self.d - 1 - axis) as u32)
    }

    /// Row-major coordinates (last axis fastest).
    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.d)
            .map(|k| (site / self.stride(k)) % self.l)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(k, &x)| (x % self.l) * self.stride(k))
            .sum()
    }

    /// Neighbor of `site` one step along `axis`.
    pub fn shift(&self, site: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let x = (site / s) % self.l;
        let y = if forward {
            (x + 1) % self.l
        } else {
            (x + self.l - 1) % self.l
        };
        site - x * s + y * s
    }

    pub fn link_index(&self, site: usize, axis: usize) -> usize {
        site * self.d + axis
    }

    /// Staircase path from the origin to `site`.
    pub fn staircase(&self, site: usize) -> Vec<Step> {
        let mut steps = Vec::new();
        for (axis, &x) in self.coords(site).iter().enumerate() {
            steps.extend((0..x).map(|_| Step {
                axis,
                forward: true,
            }));
        }
        steps
    }

    /// The step joining two sites; forward steps win when `L = 2` makes both
    /// directions land on the same neighbor.
    pub fn step_between(&self, from: usize, to: usize) -> Option<Step> {
        for axis in 0..self.d {
            if self.shift(from, axis, true) == to {
                return Some(Step {
                    axis,
                    forward: true,
                });
            }
        }
        (0..self.d)
            .find(|&axis| self.shift(from, axis, false) == to)
            .map(|axis| Step {
                axis,
                forward: false,
            })
    }

    fn check_same(&self, other: &LatticeSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpecMismatch(format!(
                "{}^{} lattice vs {}^{} lattice",
                self.l, self.d, other.l, other.d
            )))
        }
    }
}

/// Link variables on every edge, with an optional algebra form.
#[derive(Clone, Debug)]
pub struct LatticeConnection {
    spec: LatticeSpec,
    n: usize,
    links: Vec<GroupElement>,
    algebra: Option<Vec<AlgebraElement>>,
}

impl LatticeConnection {
    /// The null connection: every link is the identity.
    pub fn null(spec: LatticeSpec, n: usize) -> Self {
        Self {
            spec,
            n,
            links: vec![GroupElement::identity(n); spec.links()],
            algebra: None,
        }
    }

    /// Links indexed by `site * d + axis`.
    pub fn from_links(spec: LatticeSpec, n: usize, links: Vec<GroupElement>) -> Result<Self> {
        check_dim(spec.links(), links.len())?;
        for g in &links {
            check_dim(n, g.n())?;
        }
        Ok(Self {
            spec,
            n,
            links,
            algebra: None,
        })
    }

    /// Links `U = exp(i A)` from algebra-valued fields.
    pub fn from_algebra(spec: LatticeSpec, fields: Vec<AlgebraElement>) -> Result<Self> {
        check_dim(spec.links(), fields.len())?;
        let n = fields.first().map(AlgebraElement::n).unwrap_or(2);
        for a in &fields {
            check_dim(n, a.n())?;
        }
        let links = fields.iter().map(|a| exp_map(a, 1.0)).collect();
        Ok(Self {
            spec,
            n,
            links,
            algebra: Some(fields),
        })
    }

    /// Independent Haar-random links.
    pub fn random(spec: LatticeSpec, n: usize, seed: u64) -> Self {
        let links = (0..spec.links())
            .into_par_iter()
            .map(|i| haar_sample(n, derive_seed(seed, i as u64)))
            .collect();
        Self {
            spec,
            n,
            links,
            algebra: None,
        }
    }

    /// Links `exp(i A)` with Gaussian algebra fields of the given amplitude.
    pub fn random_near_identity(
        spec: LatticeSpec,
        n: usize,
        amplitude: f64,
        seed: u64,
    ) -> Result<Self> {
        let basis = AlgebraBasis::new(n)?;
        let fields = (0..spec.links())
            .map(|i| random_algebra_with(&basis, &mut stream(seed, i as u64)).scale(amplitude))
            .collect();
        Self::from_algebra(spec, fields)
    }

    /// Gauge transform of the null connection by a Haar-random section.
    pub fn pure_gauge(spec: LatticeSpec, n: usize, seed: u64) -> Self {
        let gamma = GaugeSection::random(spec, n, seed);
        gauge_transform(&gamma, &Self::null(spec, n)).expect("specs agree")
    }

    /// Null connection with `U_0(origin) = h`. Every holonomy generator is then
    /// `h`, `h^-1` or the identity.
    pub fn link_defect(spec: LatticeSpec, h: &GroupElement) -> Self {
        let mut a = Self::null(spec, h.n());
        a.links[0] = h.clone();
        a
    }

    /// Copy with one link replaced; drops the algebra form.
    pub fn with_link(&self, site: usize, axis: usize, g: GroupElement) -> Result<Self> {
        check_dim(self.n, g.n())?;
        let mut out = self.clone();
        out.links[self.spec.link_index(site, axis)] = g;
        out.algebra = None;
        Ok(out)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn links(&self) -> &[GroupElement] {
        &self.links
    }

    pub fn link(&self, site: usize, axis: usize) -> &GroupElement {
        &self.links[self.spec.link_index(site, axis)]
    }

    pub fn algebra(&self) -> Option<&[AlgebraElement]> {
        self.algebra.as_deref()
    }

    /// Largest entry difference between `exp(i A)` and the stored links.
    pub fn exp_consistency_residual(&self) -> Option<f64> {
        self.algebra.as_ref().map(|fields| {
            fields
                .iter()
                .zip(&self.links)
                .map(|(a, u)| exp_map(a, 1.0).max_abs_diff(u))
                .fold(0.0, f64::max)
        })
    }

    /// Largest entry deviation of any link from the identity.
    pub fn max_link_deviation(&self) -> f64 {
        let id = GroupElement::identity(self.n);
        self.links
            .iter()
            .map(|u| u.max_abs_diff(&id))
            .fold(0.0, f64::max)
    }

    /// Largest entry difference between corresponding links.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.spec.check_same(&other.spec)?;
        check_dim(self.n, other.n)?;
        Ok(self
            .links
            .iter()
            .zip(&other.links)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }
}

/// A gauge transformation: one group element per site.
#[derive(Clone, Debug)]
pub struct GaugeSection {
    spec: LatticeSpec,
    n: usize,
    values: Vec<GroupElement>,
}

impl GaugeSection {
    pub fn identity(spec: LatticeSpec, n: usize) -> Self {
        Self::constant(spec, &GroupElement::identity(n))
    }

    pub fn constant(spec: LatticeSpec, g: &GroupElement) -> Self {
        Self {
            spec,
            n: g.n(),
            values: vec![g.clone(); spec.sites()],
        }
    }

    pub fn from_values(spec: LatticeSpec, n: usize, values: Vec<GroupElement>) -> Result<Self> {
        check_dim(spec.sites(), values.len())?;
        for g in &values {
            check_dim(n, g.n())?;
        }
        Ok(Self { spec, n, values })
    }

    pub fn random(spec: LatticeSpec, n: usize, seed: u64) -> Self {
        let values = (0..spec.sites())
            .into_par_iter()
            .map(|i| haar_sample(n, derive_seed(seed, i as u64)))
            .collect();
        Self { spec, n, values }
    }

    /// `g(x) = exp(i eps eta(x))` with Gaussian algebra fields `eta`.
    pub fn near_identity(spec: LatticeSpec, n: usize, eps: f64, seed: u64) -> Result<Self> {
        let basis = AlgebraBasis::new(n)?;
        let values = (0..spec.sites())
            .map(|i| {
                exp_map(
                    &random_algebra_with(&basis, &mut stream(seed, i as u64)),
                    eps,
                )
            })
            .collect();
        Ok(Self { spec, n, values })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[GroupElement] {
        &self.values
    }

    pub fn at(&self, site: usize) -> &GroupElement {
        &self.values[site]
    }

    /// Pointwise product `(self * other)(x) = self(x) other(x)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        check_dim(self.n, other.n)?;
        Ok(Self {
            spec: self.spec,
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.mul(b))
                .collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        Self {
            spec: self.spec,
            n: self.n,
            values: self.values.iter().map(GroupElement::inverse).collect(),
        }
    }
}

/// A complex `q`-vector per site.
#[derive(Clone, Debug, PartialEq)]
pub struct MatterField {
    spec: LatticeSpec,
    q: usize,
    values: Vec<DVector<Complex64>>,
}

impl MatterField {
    pub fn zero(spec: LatticeSpec, q: usize) -> Self {
        Self::constant(spec, &DVector::zeros(q))
    }

    pub fn constant(spec: LatticeSpec, m: &DVector<Complex64>) -> Self {
        Self {
            spec,
            q: m.len(),
            values: vec![m.clone(); spec.sites()],
        }
    }

    pub fn from_values(
        spec: LatticeSpec,
        q: usize,
        values: Vec<DVector<Complex64>>,
    ) -> Result<Self> {
        check_dim(spec.sites(), values.len())?;
        for v in &values {
            check_dim(q, v.len())?;
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidElement {
                    kind: "matter field",
                    reason: "non-finite entry".into(),
                });
            }
        }
        Ok(Self { spec, q, values })
    }

    /// Independent Gaussian carrier vectors for `rep`.
    pub fn random(spec: LatticeSpec, rep: &Representation, seed: u64) -> Result<Self> {
        let values = (0..spec.sites())
            .map(|i| rep.to_complex(&rep.random_vector(&mut stream(seed, i as u64))))
            .collect::<Result<_>>()?;
        Ok(Self {
            spec,
            q: rep.complex_dim(),
            values,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[DVector<Complex64>] {
        &self.values
    }

    pub fn at(&self, site: usize) -> &DVector<Complex64> {
        &self.values[site]
    }

    /// Smallest and largest per-site norm.
    pub fn norm_profile(&self) -> (f64, f64) {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }

    fn carrier(&self, rep: &Representation) -> Result<Vec<DVector<f64>>> {
        check_dim(rep.complex_dim(), self.q)?;
        self.values.iter().map(|v| rep.from_complex(v)).collect()
    }
}

fn check_pair(a: &LatticeConnection, spec: &LatticeSpec, n: usize) -> Result<()> {
    a.spec.check_same(spec)?;
    check_dim(a.n, n)
}

/// `U_mu(x) -> g(x) U_mu(x) g(x + e_mu)^-1`, exact on links.
pub fn gauge_transform(gamma: &GaugeSection, a: &LatticeConnection) -> Result<LatticeConnection> {
    check_pair(a, &gamma.spec, gamma.n)?;
    let spec = a.spec;
    let links = (0..spec.links())
        .into_par_iter()
        .map(|i| {
            let (x, mu) = (i / spec.d, i % spec.d);
            let y = spec.shift(x, mu, true);
            GroupElement::from_raw(
                gamma.values[x].entries()
                    * a.links[i].entries()
                    * gamma.values[y].entries().adjoint(),
            )
        })
        .collect();
    Ok(LatticeConnection {
        spec,
        n: a.n,
        links,
        algebra: None,
    })
}

/// `phi(x) -> rep(g(x)) phi(x)`.
pub fn gauge_transform_matter(
    gamma: &GaugeSection,
    f: &MatterField,
    rep: &Representation,
) -> Result<MatterField> {
    f.spec.check_same(&gamma.spec)?;
    check_dim(rep.n(), gamma.n)?;
    let carrier = f.carrier(rep)?;
    let values = carrier
        .iter()
        .zip(&gamma.values)
        .map(|(v, g)| rep.to_complex(&rep.act_group(g, v)?))
        .collect::<Result<_>>()?;
    Ok(MatterField {
        spec: f.spec,
        q: f.q,
        values,
    })
}

/// Holonomy `U_mu(x) U_nu(x+mu) U_mu(x+nu)^-1 U_nu(x)^-1` of one plaquette.
pub fn plaquette(a: &LatticeConnection, site: usize, mu: usize, nu: usize) -> GroupElement {
    let s = &a.spec;
    let xm = s.shift(site, mu, true);
    let xn = s.shift(site, nu, true);
    GroupElement::from_raw(
        a.link(site, mu).entries()
            * a.link(xm, nu).entries()
            * a.link(xn, mu).entries().adjoint()
            * a.link(site, nu).entries().adjoint(),
    )
}

/// Plaquettes in `(site, mu < nu)` order.
fn plaquette_index(spec: &LatticeSpec) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(spec.plaquettes());
    for x in 0..spec.sites() {
        for mu in 0..spec.d {
            for nu in mu + 1..spec.d {
                out.push((x, mu, nu));
            }
        }
    }
    out
}

/// `sum_P 2N (1 - Re Tr U_P / N)`, summed in plaquette order.
pub fn wilson_action(a: &LatticeConnection) -> f64 {
    let n = a.n as f64;
    let terms: Vec<f64> = plaquette_index(&a.spec)
        .into_par_iter()
        .map(|(x, mu, nu)| 2.0 * (n - plaquette(a, x, mu, nu).entries().trace().re))
        .collect();
    terms.iter().sum()
}

fn step_link(a: &LatticeConnection, at: usize, step: Step) -> (usize, CMatrix) {
    if step.forward {
        (
            a.spec.shift(at, step.axis, true),
            a.link(at, step.axis).entries().clone(),
        )
    } else {
        let prev = a.spec.shift(at, step.axis, false);
        (prev, a.link(prev, step.axis).entries().adjoint())
    }
}

/// Ordered product of links along a sequence of steps starting at `start`.
pub fn transport_steps(a: &LatticeConnection, start: usize, steps: &[Step]) -> GroupElement {
    let mut at = start;
    let mut acc = CMatrix::identity(a.n, a.n);
    for &s in steps {
        let (next, u) = step_link(a, at, s);
        acc *= u;
        at = next;
    }
    GroupElement::from_raw(acc)
}

/// Ordered product of links along a site sequence (inverse links for
/// backward steps).
pub fn parallel_transport(a: &LatticeConnection, path: &[usize]) -> Result<GroupElement> {
    let mut steps = Vec::with_capacity(path.len().saturating_sub(1));
    for (i, w) in path.windows(2).enumerate() {
        let step = a
            .spec
            .step_between(w[0], w[1])
            .ok_or(Error::NonAdjacentStep {
                index: i,
                from: w[0],
                to: w[1],
            })?;
        steps.push(step);
    }
    if let Some(&bad) = path.iter().find(|&&s| s >= a.spec.sites()) {
        return Err(Error::Dimension {
            expected: a.spec.sites(),
            found: bad,
        });
    }
    Ok(transport_steps(
        a,
        path.first().copied().unwrap_or(0),
        &steps,
    ))
}

/// Staircase transports `T(x)` from the origin to every site.
pub fn transports(a: &LatticeConnection) -> Vec<GroupElement> {
    let spec = &a.spec;
    let mut out: Vec<GroupElement> = Vec::with_capacity(spec.sites());
    out.push(GroupElement::identity(a.n));
    for x in 1..spec.sites() {
        // The staircase to x ends with a step along its last nonzero axis.
        let coords = spec.coords(x);
        let axis = (0..spec.d)
            .rev()
            .find(|&k| coords[k] > 0)
            .expect("x is not the origin");
        let parent = spec.shift(x, axis, false);
        out.push(out[parent].mul(a.link(parent, axis)));
    }
    out
}

/// Plaquette lassos `T(x) U_P T(x)^-1`, in plaquette order.
pub fn plaquette_holonomies(a: &LatticeConnection) -> Vec<GroupElement> {
    let t = transports(a);
    plaquette_index(&a.spec)
        .into_par_iter()
        .map(|(x, mu, nu)| t[x].conjugate(&plaquette(a, x, mu, nu)))
        .collect()
}

/// Wilson lines winding once around each axis through the origin.
pub fn torus_holonomies(a: &LatticeConnection) -> Vec<GroupElement> {
    (0..a.spec.d)
        .map(|axis| {
            let steps = vec![
                Step {
                    axis,
                    forward: true
                };
                a.spec.l
            ];
            transport_steps(a, 0, &steps)
        })
        .collect()
}

/// Generators of the holonomy group at the origin: plaquette lassos followed by
/// one torus cycle per axis.
pub fn holonomy_generators(a: &LatticeConnection) -> Vec<GroupElement> {
    let mut out = plaquette_holonomies(a);
    out.extend(torus_holonomies(a));
    out
}

fn centralizer_coords(basis: &AlgebraBasis, generators: &[GroupElement]) -> Result<Subspace> {
    let dim = basis.dim();
    if generators.is_empty() {
        return Ok(DMatrix::identity(dim, dim));
    }
    let blocks = generators
        .iter()
        .map(|h| {
            check_dim(basis.n(), h.n())?;
            Ok(basis.adjoint_matrix(h) - DMatrix::identity(dim, dim))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(linalg::null_space_with(
        &linalg::vstack(&blocks, dim),
        tol::RANK,
        tol::RANK,
    ))
}

/// Orthonormal basis of `{X : Ad(h) X = X for every generator h}`.
pub fn centralizer_algebra(n: usize, generators: &[GroupElement]) -> Result<Vec<AlgebraElement>> {
    let basis = AlgebraBasis::new(n)?;
    let coords = centralizer_coords(&basis, generators)?;
    Ok(coords
        .column_iter()
        .map(|c| basis.element(&c.into_owned()))
        .collect())
}

/// Infinitesimal gauge symmetries of a connection.
#[derive(Clone, Debug)]
pub struct GaugeStabilizer {
    /// Stabilizer dimension, center dimension, and fixed-space dimension in
    /// the adjoint fiber at the origin.
    pub fingerprint: IsotropyFingerprint,
    /// Basis of the stabilizer at the origin.
    pub algebra: Vec<AlgebraElement>,
    /// Covariantly constant sections `g_X(x) = T(x)^-1 exp(iX) T(x)`.
    pub sections: Vec<GaugeSection>,
    /// Dimension when the torus cycles are left out of the holonomy.
    pub plaquette_only_dim: usize,
    pub generator_count: usize,
    /// Largest link change produced by any section.
    pub max_section_residual: f64,
    /// Largest entry deviation of a holonomy generator from the identity.
    pub max_generator_deviation: f64,
}

impl GaugeStabilizer {
    pub fn dim(&self) -> usize {
        self.fingerprint.stab_dim
    }
}

fn section_for(transports: &[GroupElement], spec: LatticeSpec, x: &AlgebraElement) -> GaugeSection {
    let h = exp_map(x, 1.0);
    GaugeSection {
        spec,
        n: x.n(),
        values: transports
            .iter()
            .map(|t| t.inverse().conjugate(&h))
            .collect(),
    }
}

pub fn gauge_stabilizer(a: &LatticeConnection) -> Result<GaugeStabilizer> {
    let basis = AlgebraBasis::new(a.n)?;
    let plaq = plaquette_holonomies(a);
    let torus = torus_holonomies(a);
    let plaquette_only_dim = centralizer_coords(&basis, &plaq)?.ncols();
    let all: Vec<GroupElement> = plaq.into_iter().chain(torus).collect();
    let id = GroupElement::identity(a.n);
    let max_generator_deviation = all.iter().map(|h| h.max_abs_diff(&id)).fold(0.0, f64::max);
    let coords = centralizer_coords(&basis, &all)?;
    let algebra: Vec<AlgebraElement> = coords
        .column_iter()
        .map(|c| basis.element(&c.into_owned()))
        .collect();

    let t = transports(a);
    let sections: Vec<GaugeSection> = algebra.iter().map(|x| section_for(&t, a.spec, x)).collect();
    let mut max_section_residual = 0.0_f64;
    for s in &sections {
        let moved = gauge_transform(s, a)?;
        max_section_residual = max_section_residual.max(moved.max_abs_diff(a)?);
    }
    if max_section_residual > tol::STRUCTURAL {
        return Err(Error::StabilizerMismatch {
            residual: max_section_residual,
        });
    }

    let adjoint = Representation::adjoint(a.n)?;
    let fingerprint = IsotropyFingerprint::new(
        algebra.len(),
        action::center_dim(&basis, &algebra)?,
        action::fixed_space(&adjoint, &algebra)?.ncols(),
    );
    Ok(GaugeStabilizer {
        fingerprint,
        algebra,
        sections,
        plaquette_only_dim,
        generator_count: all.len(),
        max_section_residual,
        max_generator_deviation,
    })
}

/// Matter field `phi(x) = rep(T(x)^-1) m0`, covariantly constant along `a`.
///
/// Fails with [`Error::HolonomyObstruction`] (naming the worst generator) when
/// some holonomy generator moves `m0` by more than `1e-8`.
pub fn build_covariant_matter(
    a: &LatticeConnection,
    m0: &DVector<Complex64>,
    rep: &Representation,
) -> Result<MatterField> {
    check_dim(a.n, rep.n())?;
    let m = rep.from_complex(m0)?;
    let worst = holonomy_generators(a)
        .iter()
        .enumerate()
        .map(|(i, h)| Ok((i, (rep.act_group(h, &m)? - &m).norm())))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(
            (0, 0.0_f64),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    if worst.1 > 1e-8 {
        return Err(Error::HolonomyObstruction {
            generator: worst.0,
            residual: worst.1,
        });
    }
    let values = transports(a)
        .iter()
        .map(|t| rep.to_complex(&rep.act_group(&t.inverse(), &m)?))
        .collect::<Result<_>>()?;
    Ok(MatterField {
        spec: a.spec,
        q: m0.len(),
        values,
    })
}

/// Per-link covariant difference `|phi(x + e_mu) - rep(U_mu(x)^-1) phi(x)|`,
/// indexed like the links.
pub fn covariant_residuals(
    a: &LatticeConnection,
    f: &MatterField,
    rep: &Representation,
) -> Result<Vec<f64>> {
    check_pair(a, &f.spec, rep.n())?;
    let carrier = f.carrier(rep)?;
    let spec = a.spec;
    (0..spec.links())
        .into_par_iter()
        .map(|i| {
            let (x, mu) = (i / spec.d, i % spec.d);
            let y = spec.shift(x, mu, true);
            let moved = rep.act_group(&a.links[i].inverse(), &carrier[x])?;
            Ok((&carrier[y] - moved).norm())
        })
        .collect()
}

/// Joint infinitesimal symmetries of a connection and a matter field.
#[derive(Clone, Debug)]
pub struct CombinedIsotropy {
    /// Stabilizer dimension, center dimension, fixed-space dimension in the
    /// matter fiber at the origin.
    pub fingerprint: IsotropyFingerprint,
    /// Basis at the origin.
    pub basis: Vec<AlgebraElement>,
    pub gauge_dim: usize,
    /// Dimension of `{X : Ad(T(x)^-1) X fixes f(x) at every site}`.
    pub matter_dim: usize,
    /// Separately computed intersection of the gauge and matter stabilizers.
    pub intersection: Vec<AlgebraElement>,
    pub intersection_distance: f64,
}

impl CombinedIsotropy {
    pub fn dim(&self) -> usize {
        self.fingerprint.stab_dim
    }
}

fn to_coords(basis: &AlgebraBasis, elems: &[AlgebraElement]) -> Subspace {
    let mut m = DMatrix::zeros(basis.dim(), elems.len());
    for (j, x) in elems.iter().enumerate() {
        m.set_column(j, &basis.coords(x));
    }
    m
}

/// Stabilizer algebra elements of `a` whose induced sections also fix `f`.
pub fn combined_isotropy(
    a: &LatticeConnection,
    f: &MatterField,
    rep: &Representation,
) -> Result<CombinedIsotropy> {
    check_pair(a, &f.spec, rep.n())?;
    let carrier = f.carrier(rep)?;
    let basis = rep.basis();
    let dim = basis.dim();
    let gauge = gauge_stabilizer(a)?;
    let k = to_coords(basis, &gauge.algebra);
    let t = transports(a);

    // Direct route: kernel of X -> T_rep(Ad(T(x)^-1) X) f(x) over the gauge stabilizer.
    let combined = if k.ncols() == 0 {
        k.clone()
    } else {
        let blocks = carrier
            .par_iter()
            .zip(t.par_iter())
            .map(|(fx, tx)| Ok(rep.orbit_map(fx)? * basis.adjoint_matrix(&tx.inverse()) * &k))
            .collect::<Result<Vec<_>>>()?;
        &k * linalg::null_space(&linalg::vstack(&blocks, k.ncols()))
    };

    // Oracle route: intersect with the transported site stabilizers.
    let mut matter = DMatrix::identity(dim, dim);
    for (fx, tx) in carrier.iter().zip(&t) {
        let site = basis.adjoint_matrix(tx) * action::stabilizer_coords(rep, fx)?;
        matter = linalg::intersection(&matter, &site);
    }
    let inter = linalg::intersection(&k, &matter);

    let elems: Vec<AlgebraElement> = combined
        .column_iter()
        .map(|c| basis.element(&c.into_owned()))
        .collect();
    let fingerprint = IsotropyFingerprint::new(
        elems.len(),
        action::center_dim(basis, &elems)?,
        action::fixed_space(rep, &elems)?.ncols(),
    );
    Ok(CombinedIsotropy {
        fingerprint,
        gauge_dim: gauge.dim(),
        matter_dim: matter.ncols(),
        intersection_distance: linalg::subspace_distance(&combined, &inter),
        intersection: inter
            .column_iter()
            .map(|c| basis.element(&c.into_owned()))
            .collect(),
        basis: elems,
    })
}

/// The three parts of the lattice functional.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lagrangian {
    /// `sum_edges |phi(x + e_mu) - rep(U_mu(x)^-1) phi(x)|^2`.
    pub gauge: f64,
    /// `sum_sites V(phi(x))`.
    pub potential: f64,
    /// Wilson action.
    pub yang_mills: f64,
}

impl Lagrangian {
    pub fn total(&self) -> f64 {
        self.gauge + self.potential + self.yang_mills
    }
}

pub fn total_lagrangian(
    a: &LatticeConnection,
    f: &MatterField,
    v: &InvariantPotential,
) -> Result<Lagrangian> {
    let rep = v.rep();
    let residuals = covariant_residuals(a, f, rep)?;
    let carrier = f.carrier(rep)?;
    let potential = carrier
        .par_iter()
        .map(|x| v.evaluate(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(Lagrangian {
        gauge: residuals.iter().map(|r| r * r).sum(),
        potential: potential.iter().sum(),
        yang_mills: wilson_action(a),
    })
}

/// Sum of the staples completing each plaquette through `U_mu(x)`, so that
/// the action restricted to that link is `-2 Re Tr(U_mu(x) S) + const`.
fn staple_sum(a: &LatticeConnection, x: usize, mu: usize) -> CMatrix {
    let s = &a.spec;
    let mut out = CMatrix::zeros(a.n, a.n);
    let xm = s.shift(x, mu, true);
    for nu in (0..s.d).filter(|&nu| nu != mu) {
        let xn = s.shift(x, nu, true);
        out += a.link(xm, nu).entries()
            * a.link(xn, mu).entries().adjoint()
            * a.link(x, nu).entries().adjoint();
        let xb = s.shift(x, nu, false);
        let xmb = s.shift(xm, nu, false);
        out += a.link(xmb, nu).entries().adjoint()
            * a.link(xb, mu).entries().adjoint()
            * a.link(xb, nu).entries();
    }
    out
}

/// Wilson-action gradient per link, for variations `U -> exp(i eps X) U`.
pub fn wilson_gradient(a: &LatticeConnection) -> Result<Vec<AlgebraElement>> {
    let basis = AlgebraBasis::new(a.n)?;
    let spec = a.spec;
    let mi = Complex64::new(0.0, -1.0);
    Ok((0..spec.links())
        .into_par_iter()
        .map(|i| {
            let (x, mu) = (i / spec.d, i % spec.d);
            let w = a.links[i].entries() * staple_sum(a, x, mu);
            let h = (&w - w.adjoint()) * mi;
            basis.element(&(basis.coords_of_matrix(&h) * 2.0))
        })
        .collect())
}

/// Outcome of one Wilson-flow step.
#[derive(Clone, Debug)]
pub struct YmStep {
    pub connection: LatticeConnection,
    pub action_before: f64,
    pub action_after: f64,
    /// Step length actually taken (0 when no decrease was found).
    pub step: f64,
    pub gradient_norm: f64,
}

/// One descent step `U -> exp(-i s G) U` with backtracking until the Wilson
/// action does not increase.
pub fn ym_gradient_flow_step(a: &LatticeConnection, step: f64) -> Result<YmStep> {
    if !(step > 0.0) {
        return Err(Error::Precondition(format!("step {step} must be positive")));
    }
    let before = wilson_action(a);
    let grad = wilson_gradient(a)?;
    let gradient_norm = grad.iter().map(|g| g.norm().powi(2)).sum::<f64>().sqrt();
    let mut s = step;
    for _ in 0..40 {
        let links: Vec<GroupElement> = grad
            .par_iter()
            .zip(a.links.par_iter())
            .map(|(g, u)| exp_map(g, -s).mul(u))
            .collect();
        let cand = LatticeConnection {
            spec: a.spec,
            n: a.n,
            links,
            algebra: None,
        };
        let after = wilson_action(&cand);
        if after <= before {
            return Ok(YmStep {
                connection: cand,
                action_before: before,
                action_after: after,
                step: s,
                gradient_norm,
            });
        }
        s *= 0.5;
    }
    Ok(YmStep {
        connection: a.clone(),
        action_before: before,
        action_after: before,
        step: 0.0,
        gradient_norm,
    })
}

/// Trace of repeated Wilson-flow steps.
#[derive(Clone, Debug)]
pub struct YmFlow {
    pub actions: Vec<f64>,
    pub stabilizer_dim: usize,
    pub connection: LatticeConnection,
}

/// Runs `steps` flow steps, checking after each accepted one that the gauge
/// stabilizer keeps its dimension.
pub fn ym_gradient_flow(a: &LatticeConnection, step: f64, steps: usize) -> Result<YmFlow> {
    let dim = gauge_stabilizer(a)?.dim();
    let mut actions = vec![wilson_action(a)];
    let mut current = a.clone();
    for i in 0..steps {
        let next = ym_gradient_flow_step(&current, step)?;
        if next.step > 0.0 {
            let d = gauge_stabilizer(&next.connection)?.dim();
            if d != dim {
                return Err(Error::Precondition(format!(
                    "stabilizer dimension changed from {dim} to {d} at flow step {i}"
                )));
            }
        }
        actions.push(next.action_after);
        current = next.connection;
    }
    Ok(YmFlow {
        actions,
        stabilizer_dim: dim,
        connection: current,
    })
}

/// A connection with an optional matter field, as stored on disk.
#[derive(Clone, Debug)]
pub struct LatticeConfig {
    pub connection: LatticeConnection,
    pub matter: Option<(RepKind, MatterField)>,
}

const FORMAT_TAG: &str = "strata-lattice 1";

fn push_numbers(out: &mut String, zs: impl Iterator<Item = Complex64>) {
    let mut first = true;
    for z in zs {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{:.16e} {:.16e}", z.re, z.im).expect("string write");
    }
    out.push('\n');
}

impl LatticeConfig {
    /// Versioned text form: header, then one line per link (row-major matrix
    /// entries as `re im` pairs) and one line per site of matter.
    pub fn to_text(&self) -> String {
        let a = &self.connection;
        let mut out = String::new();
        writeln!(out, "format {FORMAT_TAG}").unwrap();
        writeln!(out, "d {}", a.spec.d).unwrap();
        writeln!(out, "L {}", a.spec.l).unwrap();
        writeln!(out, "N {}", a.n).unwrap();
        let q = self.matter.as_ref().map_or(0, |(_, f)| f.q);
        writeln!(out, "q {q}").unwrap();
        match &self.matter {
            Some((kind, _)) => writeln!(out, "rep {kind}").unwrap(),
            None => writeln!(out, "rep none").unwrap(),
        }
        writeln!(out, "links {}", a.links.len()).unwrap();
        for u in &a.links {
            let m = u.entries();
            push_numbers(
                &mut out,
                (0..a.n).flat_map(|i| (0..a.n).map(move |j| m[(i, j)])),
            );
        }
        match &self.matter {
            Some((_, f)) => {
                writeln!(out, "matter {}", f.values.len()).unwrap();
                for v in &f.values {
                    push_numbers(&mut out, v.iter().copied());
                }
            }
            None => writeln!(out, "matter 0").unwrap(),
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                reason: format!("unexpected end of input, expected {what}"),
            })
        };
        fn field<'a>(line: (usize, &'a str), key: &str) -> Result<&'a str> {
            line.1
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .map(str::trim)
                .ok_or_else(|| Error::Parse {
                    line: line.0,
                    reason: format!("expected '{key} ...'"),
                })
        }
        fn num(line: usize, s: &str) -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("'{s}' is not a count"),
            })
        }
        fn complexes(line: (usize, &str), count: usize) -> Result<Vec<Complex64>> {
            let xs = line
                .1
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: line.0,
                        reason: format!("'{t}' is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if xs.len() != 2 * count {
                return Err(Error::Parse {
                    line: line.0,
                    reason: format!("expected {} numbers, found {}", 2 * count, xs.len()),
                });
            }
            Ok(xs.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
        }

        let tag = next("format")?;
        if field(tag, "format")? != FORMAT_TAG {
            return Err(Error::Parse {
                line: tag.0,
                reason: format!("unsupported format, expected '{FORMAT_TAG}'"),
            });
        }
        let l = next("d")?;
        let d = num(l.0, field(l, "d")?)?;
        let l = next("L")?;
        let ext = num(l.0, field(l, "L")?)?;
        let l = next("N")?;
        let n = num(l.0, field(l, "N")?)?;
        let l = next("q")?;
        let q = num(l.0, field(l, "q")?)?;
        let l = next("rep")?;
        let rep_text = field(l, "rep")?;
        let kind = if rep_text == "none" {
            None
        } else {
            Some(rep_text.parse::<RepKind>().map_err(|e| Error::Parse {
                line: l.0,
                reason: e.to_string(),
            })?)
        };
        let spec = LatticeSpec::new(d, ext)?;
        let l = next("links")?;
        let count = num(l.0, field(l, "links")?)?;
        check_dim(spec.links(), count)?;
        let mut links = Vec::with_capacity(count);
        for _ in 0..count {
            let line = next("link entries")?;
            let zs = complexes(line, n * n)?;
            links.push(
                GroupElement::new(CMatrix::from_row_slice(n, n, &zs)).map_err(|e| {
                    Error::Parse {
                        line: line.0,
                        reason: e.to_string(),
                    }
                })?,
            );
        }
        let connection = LatticeConnection::from_links(spec, n, links)?;
        let l = next("matter")?;
        let sites = num(l.0, field(l, "matter")?)?;
        let matter = match kind {
            None if sites == 0 && q == 0 => None,
            Some(kind) if sites == spec.sites() => {
                let rep = Representation::new(kind.clone())?;
                check_dim(rep.complex_dim(), q)?;
                let mut values = Vec::with_capacity(sites);
                for _ in 0..sites {
                    values.push(DVector::from_vec(complexes(next("matter entries")?, q)?));
                }
                Some((kind, MatterField::from_values(spec, q, values)?))
            }
            _ => {
                return Err(Error::Parse {
                    line: l.0,
                    reason: "matter block inconsistent with header".into(),
                })
            }
        };
        let l = next("end")?;
        if l.1 != "end" {
            return Err(Error::Parse {
                line: l.0,
                reason: "expected 'end'".into(),
            });
        }
        Ok(Self { connection, matter })
    }
}
