//! Linear actions of SU(N) on real carrier spaces, isotropy data and slices.
//!
//! Every carrier is a real inner-product space with the standard dot product:
//! adjoint carriers use coordinates in the orthonormal [`AlgebraBasis`], and a
//! fundamental carrier `C^N` is realified with interleaved `(re, im)` pairs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{
    exp_map, haar_sample_with, AlgebraBasis, AlgebraElement, CMatrix, GroupElement,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Subspace};
use crate::rng::stream;
use crate::tol;

/// Which representation of SU(N) a carrier space holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RepKind {
    Adjoint(usize),
    Fundamental(usize),
    DirectSum(Vec<RepKind>),
}

impl RepKind {
    fn group_n(&self) -> Option<usize> {
        match self {
            RepKind::Adjoint(n) | RepKind::Fundamental(n) => Some(*n),
            RepKind::DirectSum(parts) => {
                let n = parts.first()?.group_n()?;
                parts.iter().all(|p| p.group_n() == Some(n)).then_some(n)
            }
        }
    }

    fn carrier_dim(&self) -> usize {
        match self {
            RepKind::Adjoint(n) => n * n - 1,
            RepKind::Fundamental(n) => 2 * n,
            RepKind::DirectSum(parts) => parts.iter().map(RepKind::carrier_dim).sum(),
        }
    }

    fn complex_dim(&self) -> usize {
        match self {
            RepKind::Adjoint(n) => n * n - 1,
            RepKind::Fundamental(n) => *n,
            RepKind::DirectSum(parts) => parts.iter().map(RepKind::complex_dim).sum(),
        }
    }

    fn leaves(&self) -> Vec<&RepKind> {
        match self {
            RepKind::DirectSum(parts) => parts.iter().flat_map(RepKind::leaves).collect(),
            other => vec![other],
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepKind::Adjoint(n) => write!(f, "adjoint({n})"),
            RepKind::Fundamental(n) => write!(f, "fundamental({n})"),
            RepKind::DirectSum(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        let parse_one = |p: &str| -> Result<RepKind> {
            let bad = || Error::Parse {
                line: 0,
                reason: format!("unknown representation '{p}'"),
            };
            let (name, rest) = p.split_once('(').ok_or_else(bad)?;
            let n: usize = rest
                .strip_suffix(')')
                .ok_or_else(bad)?
                .trim()
                .parse()
                .map_err(|_| bad())?;
            match name.trim() {
                "adjoint" => Ok(RepKind::Adjoint(n)),
                "fundamental" => Ok(RepKind::Fundamental(n)),
                _ => Err(bad()),
            }
        };
        if parts.len() == 1 {
            parse_one(parts[0])
        } else {
            Ok(RepKind::DirectSum(
                parts.into_iter().map(parse_one).collect::<Result<_>>()?,
            ))
        }
    }
}

/// Real `2n x 2n` matrix of a complex `n x n` matrix on interleaved coordinates.
pub(crate) fn realify(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// A unitary representation of SU(N) on a real carrier space.
#[derive(Clone, Debug)]
pub struct Representation {
    kind: RepKind,
    basis: Arc<AlgebraBasis>,
    carrier_dim: usize,
    generators: Arc<Vec<DMatrix<f64>>>,
}

impl Representation {
    pub fn new(kind: RepKind) -> Result<Self> {
        let n = kind.group_n().ok_or_else(|| Error::InvalidElement {
            kind: "representation",
            reason: format!("summands of {kind} act through different groups"),
        })?;
        let basis = Arc::new(AlgebraBasis::new(n)?);
        let carrier_dim = kind.carrier_dim();
        let mut rep = Self {
            kind,
            basis,
            carrier_dim,
            generators: Arc::new(Vec::new()),
        };
        let gens = rep
            .basis
            .generators()
            .iter()
            .map(|x| rep.algebra_matrix_uncached(x))
            .collect();
        rep.generators = Arc::new(gens);
        Ok(rep)
    }

    pub fn adjoint(n: usize) -> Result<Self> {
        Self::new(RepKind::Adjoint(n))
    }

    pub fn fundamental(n: usize) -> Result<Self> {
        Self::new(RepKind::Fundamental(n))
    }

    pub fn kind(&self) -> &RepKind {
        &self.kind
    }

    /// N of SU(N).
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn basis(&self) -> &AlgebraBasis {
        &self.basis
    }

    pub fn group_dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn carrier_dim(&self) -> usize {
        self.carrier_dim
    }

    /// Number of complex fiber components (adjoint coordinates count as
    /// complex numbers with zero imaginary part).
    pub fn complex_dim(&self) -> usize {
        self.kind.complex_dim()
    }

    /// Matrices `T(lambda_a)` of the basis generators.
    pub fn generator_matrices(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    fn algebra_matrix_uncached(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let blocks: Vec<DMatrix<f64>> = self
            .kind
            .leaves()
            .into_iter()
            .map(|leaf| match leaf {
                // d/dt Ad(exp(itX)) v = i[X, v] = -commutator(X, v)
                RepKind::Adjoint(_) => -self.basis.ad_matrix(x),
                RepKind::Fundamental(_) => realify(&(x.entries() * Complex64::new(0.0, 1.0))),
                RepKind::DirectSum(_) => unreachable!("leaves are flattened"),
            })
            .collect();
        block_diagonal(&blocks)
    }

    /// Matrix of the infinitesimal action `v -> T(X) v`.
    pub fn algebra_matrix(&self, x: &AlgebraElement) -> Result<DMatrix<f64>> {
        check_dim(self.n(), x.n())?;
        let coords = self.basis.coords(x);
        let mut out = DMatrix::zeros(self.carrier_dim, self.carrier_dim);
        for (c, t) in coords.iter().zip(self.generators.iter()) {
            if *c != 0.0 {
                out += t * *c;
            }
        }
        Ok(out)
    }

    /// Orthogonal matrix of the group action.
    pub fn group_matrix(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        check_dim(self.n(), g.n())?;
        let blocks: Vec<DMatrix<f64>> = self
            .kind
            .leaves()
            .into_iter()
            .map(|leaf| match leaf {
                RepKind::Adjoint(_) => self.basis.adjoint_matrix(g),
                RepKind::Fundamental(_) => realify(g.entries()),
                RepKind::DirectSum(_) => unreachable!("leaves are flattened"),
            })
            .collect();
        Ok(block_diagonal(&blocks))
    }

    pub fn act_algebra(&self, x: &AlgebraElement, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.carrier_dim, v.len())?;
        Ok(self.algebra_matrix(x)? * v)
    }

    pub fn act_group(&self, g: &GroupElement, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.carrier_dim, v.len())?;
        Ok(self.group_matrix(g)? * v)
    }

    /// `m x dimG` matrix whose columns are `T(lambda_a) v`.
    pub fn orbit_map(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.carrier_dim, v.len())?;
        let mut out = DMatrix::zeros(self.carrier_dim, self.group_dim());
        for (a, t) in self.generators.iter().enumerate() {
            out.set_column(a, &(t * v));
        }
        Ok(out)
    }

    /// Carrier vector from complex fiber components.
    pub fn from_complex(&self, c: &DVector<Complex64>) -> Result<DVector<f64>> {
        check_dim(self.complex_dim(), c.len())?;
        let mut out = DVector::zeros(self.carrier_dim);
        let (mut ci, mut ri) = (0, 0);
        for leaf in self.kind.leaves() {
            match leaf {
                RepKind::Adjoint(n) => {
                    for _ in 0..n * n - 1 {
                        if c[ci].im.abs() > tol::ALGEBRAIC * c[ci].norm().max(1.0) {
                            return Err(Error::InvalidElement {
                                kind: "adjoint fiber vector",
                                reason: format!("component {ci} has imaginary part"),
                            });
                        }
                        out[ri] = c[ci].re;
                        ci += 1;
                        ri += 1;
                    }
                }
                RepKind::Fundamental(n) => {
                    for _ in 0..*n {
                        out[ri] = c[ci].re;
                        out[ri + 1] = c[ci].im;
                        ci += 1;
                        ri += 2;
                    }
                }
                RepKind::DirectSum(_) => unreachable!("leaves are flattened"),
            }
        }
        Ok(out)
    }

    /// Complex fiber components of a carrier vector.
    pub fn to_complex(&self, v: &DVector<f64>) -> Result<DVector<Complex64>> {
        check_dim(self.carrier_dim, v.len())?;
        let mut out = Vec::with_capacity(self.complex_dim());
        let mut ri = 0;
        for leaf in self.kind.leaves() {
            match leaf {
                RepKind::Adjoint(n) => {
                    for _ in 0..n * n - 1 {
                        out.push(Complex64::new(v[ri], 0.0));
                        ri += 1;
                    }
                }
                RepKind::Fundamental(n) => {
                    for _ in 0..*n {
                        out.push(Complex64::new(v[ri], v[ri + 1]));
                        ri += 2;
                    }
                }
                RepKind::DirectSum(_) => unreachable!("leaves are flattened"),
            }
        }
        Ok(DVector::from_vec(out))
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.carrier_dim, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        })
    }

    pub fn random_unit_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        loop {
            let v = self.random_vector(rng);
            let n = v.norm();
            if n > 1e-8 {
                return v / n;
            }
        }
    }
}

fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    if blocks.len() == 1 {
        return blocks[0].clone();
    }
    let m: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(m, m);
    let mut o = 0;
    for b in blocks {
        out.view_mut((o, o), b.shape()).copy_from(b);
        o += b.nrows();
    }
    out
}

/// Computable isotropy label: dimensions of the stabilizer subalgebra, of its
/// center, and of its fixed space in the carrier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IsotropyFingerprint {
    pub stab_dim: usize,
    pub center_dim: usize,
    pub fix_dim: usize,
}

impl IsotropyFingerprint {
    pub fn new(stab_dim: usize, center_dim: usize, fix_dim: usize) -> Self {
        Self {
            stab_dim,
            center_dim,
            fix_dim,
        }
    }

    /// Stable text key, e.g. `s4-c1-f1`.
    pub fn label(&self) -> String {
        format!("s{}-c{}-f{}", self.stab_dim, self.center_dim, self.fix_dim)
    }
}

impl fmt::Display for IsotropyFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})",
            self.stab_dim, self.center_dim, self.fix_dim
        )
    }
}

/// A stratum, represented by one of its points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratum {
    pub fingerprint: IsotropyFingerprint,
    pub representative: Vec<f64>,
    pub label: String,
}

impl Stratum {
    pub fn of(rep: &Representation, v: &DVector<f64>) -> Result<Self> {
        let fingerprint = fingerprint(rep, v)?;
        Ok(Self {
            fingerprint,
            representative: v.iter().copied().collect(),
            label: fingerprint.label(),
        })
    }
}

/// Kernel of `X -> T(X) v` in basis coordinates (`dimG x k`, orthonormal).
pub fn stabilizer_coords(rep: &Representation, v: &DVector<f64>) -> Result<Subspace> {
    Ok(linalg::null_space(&rep.orbit_map(v)?))
}

fn coords_to_elements(rep: &Representation, coords: &Subspace) -> Vec<AlgebraElement> {
    coords
        .column_iter()
        .map(|c| rep.basis().element(&c.into_owned()))
        .collect()
}

/// Orthonormal basis of the stabilizer subalgebra `{X : T(X) v = 0}`.
pub fn stabilizer_algebra(rep: &Representation, v: &DVector<f64>) -> Result<Vec<AlgebraElement>> {
    Ok(coords_to_elements(rep, &stabilizer_coords(rep, v)?))
}

/// Dimension of the center of the subalgebra spanned by `elements`.
pub fn center_dim(basis: &AlgebraBasis, elements: &[AlgebraElement]) -> Result<usize> {
    let k = elements.len();
    if k == 0 {
        return Ok(0);
    }
    let dim = basis.dim();
    let mut m = DMatrix::zeros(k * dim, k);
    for (i, si) in elements.iter().enumerate() {
        for (j, sj) in elements.iter().enumerate() {
            let c = basis.coords(&crate::algebra::commutator(si, sj)?);
            m.view_mut((j * dim, i), (dim, 1)).copy_from(&c);
        }
    }
    Ok(linalg::null_space_with(&m, tol::RANK, 1e-9).ncols())
}

/// Orthonormal basis of `{w : T(X) w = 0 for all X in the stabilizer}`.
pub fn fixed_space(rep: &Representation, stabilizer: &[AlgebraElement]) -> Result<Subspace> {
    let m = rep.carrier_dim();
    if stabilizer.is_empty() {
        return Ok(DMatrix::identity(m, m));
    }
    let blocks = stabilizer
        .iter()
        .map(|x| rep.algebra_matrix(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(linalg::null_space(&linalg::vstack(&blocks, m)))
}

pub fn fingerprint(rep: &Representation, v: &DVector<f64>) -> Result<IsotropyFingerprint> {
    let stab = stabilizer_algebra(rep, v)?;
    let center = center_dim(rep.basis(), &stab)?;
    let fix = fixed_space(rep, &stab)?.ncols();
    Ok(IsotropyFingerprint::new(stab.len(), center, fix))
}

/// Orthonormal basis of the tangent space to the orbit through `v`.
pub fn orbit_tangent(rep: &Representation, v: &DVector<f64>) -> Result<Subspace> {
    Ok(linalg::range(&rep.orbit_map(v)?))
}

/// Orthonormal basis of the orthogonal complement of the orbit tangent.
pub fn slice_basis(rep: &Representation, v: &DVector<f64>) -> Result<Subspace> {
    let t = orbit_tangent(rep, v)?;
    Ok(linalg::complement(&t, rep.carrier_dim()))
}

/// Result of minimizing `|g.v - w|` over the group.
#[derive(Clone, Debug)]
pub struct OrbitDistance {
    pub distance: f64,
    pub best: GroupElement,
}

fn descend_orbit(
    rep: &Representation,
    v: &DVector<f64>,
    w: &DVector<f64>,
    mut g: GroupElement,
    max_iter: usize,
) -> Result<(f64, GroupElement)> {
    let objective = |g: &GroupElement| -> Result<(f64, DVector<f64>)> {
        let u = rep.act_group(g, v)?;
        let d = &u - w;
        Ok((d.norm_squared(), u))
    };
    let (mut f, mut u) = objective(&g)?;
    let mut step = 1.0;
    for _ in 0..max_iter {
        let r = &u - w;
        let grad = DVector::from_iterator(
            rep.group_dim(),
            rep.generator_matrices()
                .iter()
                .map(|t| 2.0 * r.dot(&(t * &u))),
        );
        let gn2 = grad.norm_squared();
        if gn2.sqrt() < 1e-13 || f < 1e-28 {
            break;
        }
        let dir = rep.basis().element(&grad);
        let mut accepted = false;
        while step > 1e-12 {
            let cand = exp_map(&dir, -step).mul(&g);
            let (fc, uc) = objective(&cand)?;
            if fc <= f - 1e-4 * step * gn2 {
                g = cand;
                f = fc;
                u = uc;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((f.max(0.0).sqrt(), g))
}

/// Distance from `w` to the orbit of `v`, by Riemannian descent over the group
/// from `starts` Haar-random initial elements.
pub fn orbit_distance(
    rep: &Representation,
    v: &DVector<f64>,
    w: &DVector<f64>,
    starts: usize,
    seed: u64,
) -> Result<OrbitDistance> {
    check_dim(rep.carrier_dim(), v.len())?;
    check_dim(rep.carrier_dim(), w.len())?;
    let results = (0..starts.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let g0 = haar_sample_with(rep.n(), &mut rng);
            descend_orbit(rep, v, w, g0, 2000)
        })
        .collect::<Result<Vec<_>>>()?;
    let (distance, best) = results
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one start");
    Ok(OrbitDistance { distance, best })
}

/// Parameters of the sampled isolated-in-stratum test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsolationConfig {
    pub constrain_to_sphere: bool,
    pub radius: f64,
    pub samples: usize,
    pub orbit_starts: usize,
    pub seed: u64,
}

impl Default for IsolationConfig {
    fn default() -> Self {
        Self {
            constrain_to_sphere: true,
            radius: tol::ISOLATION_RADIUS,
            samples: tol::ISOLATION_SAMPLES,
            orbit_starts: tol::ORBIT_STARTS,
            seed: 0,
        }
    }
}

/// A perturbed point with the same fingerprint that lies off the orbit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Counterexample {
    pub sample: usize,
    pub direction: Vec<f64>,
    pub perturbed: Vec<f64>,
    pub orbit_distance: f64,
}

/// Evidence gathered by [`is_isolated_in_stratum`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsolationEvidence {
    pub isolated: bool,
    pub fingerprint: IsotropyFingerprint,
    pub slice_dim: usize,
    pub samples_drawn: usize,
    pub degenerate_directions: usize,
    pub same_fingerprint: usize,
    pub max_on_orbit_distance: f64,
    pub counterexample: Option<Counterexample>,
}

/// Sampling test of whether the orbit of `v` is isolated in its stratum.
///
/// Perturbs `v` by `radius` along random slice directions (tangent to the
/// unit sphere when constrained) and looks for a perturbed point that has the
/// same fingerprint but sits farther than `radius / 10` from the orbit of `v`.
pub fn is_isolated_in_stratum(
    rep: &Representation,
    v: &DVector<f64>,
    config: &IsolationConfig,
) -> Result<IsolationEvidence> {
    check_dim(rep.carrier_dim(), v.len())?;
    if !(config.radius > 0.0) {
        return Err(Error::Precondition(format!(
            "isolation radius must be positive, got {}",
            config.radius
        )));
    }
    if config.samples < 100 {
        return Err(Error::Precondition(format!(
            "at least 100 samples required, got {}",
            config.samples
        )));
    }
    let norm = v.norm();
    if config.constrain_to_sphere {
        if norm < 1e-12 {
            return Err(Error::DegenerateInput(
                "the zero vector has no direction on the sphere".into(),
            ));
        }
        if (norm - 1.0).abs() > tol::STRUCTURAL {
            return Err(Error::Precondition(format!(
                "point must lie on the unit sphere, |v| = {norm}"
            )));
        }
    }
    let base = fingerprint(rep, v)?;
    let slice = slice_basis(rep, v)?;
    let threshold = config.radius / 10.0;

    // Fingerprints of all perturbations are independent work items.
    type Candidate = Option<(DVector<f64>, DVector<f64>, bool)>;
    let candidates: Vec<Candidate> = (0..config.samples)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let mut rng = stream(config.seed, i as u64);
            let coeffs =
                DVector::from_fn(slice.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut d = &slice * coeffs;
            if config.constrain_to_sphere {
                d -= v * d.dot(v);
            }
            let dn = d.norm();
            if dn < 1e-12 {
                return Ok(None);
            }
            d /= dn;
            let mut w = v + &d * config.radius;
            if config.constrain_to_sphere {
                w /= w.norm();
            }
            let same = fingerprint(rep, &w)? == base;
            Ok(Some((d, w, same)))
        })
        .collect::<Result<_>>()?;

    let mut evidence = IsolationEvidence {
        isolated: true,
        fingerprint: base,
        slice_dim: slice.ncols(),
        samples_drawn: config.samples,
        degenerate_directions: candidates.iter().filter(|c| c.is_none()).count(),
        same_fingerprint: 0,
        max_on_orbit_distance: 0.0,
        counterexample: None,
    };
    for (i, cand) in candidates.into_iter().enumerate() {
        let Some((d, w, same)) = cand else { continue };
        if !same {
            continue;
        }
        evidence.same_fingerprint += 1;
        let od = orbit_distance(
            rep,
            v,
            &w,
            config.orbit_starts,
            crate::rng::derive_seed(config.seed ^ 0x5eed, i as u64),
        )?;
        if od.distance > threshold {
            evidence.isolated = false;
            evidence.counterexample = Some(Counterexample {
                sample: i,
                direction: d.iter().copied().collect(),
                perturbed: w.iter().copied().collect(),
                orbit_distance: od.distance,
            });
            break;
        }
        evidence.max_on_orbit_distance = evidence.max_on_orbit_distance.max(od.distance);
    }
    Ok(evidence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{adjoint_action, haar_sample};

    fn su3() -> Representation {
        Representation::adjoint(3).unwrap()
    }

    fn e(m: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        v
    }

    /// Brute-force kernel of `X -> [X, V]` on the real 16-dimensional space of
    /// all complex 3x3 matrices, then restricted to Hermitian traceless ones.
    fn commutant_dim_oracle(v: &CMatrix) -> usize {
        // Unknowns: real and imaginary parts of the 9 entries.
        let n = 3;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                // [X, V]_{ij} = sum_k X_ik V_kj - V_ik X_kj
                let mut re = vec![0.0; 18];
                let mut im = vec![0.0; 18];
                for k in 0..n {
                    let (a, b) = (v[(k, j)], v[(i, k)]);
                    // X_ik * a
                    let p = 2 * (i * n + k);
                    re[p] += a.re;
                    re[p + 1] -= a.im;
                    im[p] += a.im;
                    im[p + 1] += a.re;
                    // - b * X_kj
                    let q = 2 * (k * n + j);
                    re[q] -= b.re;
                    re[q + 1] += b.im;
                    im[q] -= b.im;
                    im[q + 1] -= b.re;
                }
                rows.push(re);
                rows.push(im);
            }
        }
        // Hermitian: X_ij - conj(X_ji) = 0; traceless: sum X_ii = 0.
        for i in 0..n {
            for j in 0..n {
                let mut re = vec![0.0; 18];
                let mut im = vec![0.0; 18];
                re[2 * (i * n + j)] += 1.0;
                re[2 * (j * n + i)] -= 1.0;
                im[2 * (i * n + j) + 1] += 1.0;
                im[2 * (j * n + i) + 1] += 1.0;
                rows.push(re);
                rows.push(im);
            }
        }
        let mut tr = vec![0.0; 18];
        for i in 0..n {
            tr[2 * (i * n + i)] = 1.0;
        }
        rows.push(tr);
        let m = DMatrix::from_fn(rows.len(), 18, |r, c| rows[r][c]);
        let svd = m.svd(false, false);
        svd.singular_values.iter().filter(|&&s| s < 1e-9).count()
            + 18usize.saturating_sub(svd.singular_values.len())
    }

    #[test]
    fn stabilizer_dimensions_match_oracle() {
        let rep = su3();
        let b = rep.basis();
        let l3 = b.generator(2).clone();
        let l8 = b.generator(7).clone();
        assert_eq!(commutant_dim_oracle(l3.entries()), 2);
        assert_eq!(commutant_dim_oracle(l8.entries()), 4);
        assert_eq!(stabilizer_algebra(&rep, &b.coords(&l3)).unwrap().len(), 2);
        assert_eq!(stabilizer_algebra(&rep, &b.coords(&l8)).unwrap().len(), 4);
        assert_eq!(
            stabilizer_algebra(&rep, &DVector::zeros(8)).unwrap().len(),
            8
        );
    }

    #[test]
    fn fingerprints_of_named_points() {
        let rep = su3();
        let generic = DVector::from_vec(vec![0.1, -0.3, 0.7, 0.2, 0.05, -0.4, 0.3, 0.6]);
        assert_eq!(
            fingerprint(&rep, &generic).unwrap(),
            IsotropyFingerprint::new(2, 2, 2)
        );
        assert_eq!(
            fingerprint(&rep, &e(8, 7)).unwrap(),
            IsotropyFingerprint::new(4, 1, 1)
        );
        assert_eq!(
            fingerprint(&rep, &DVector::zeros(8)).unwrap(),
            IsotropyFingerprint::new(8, 0, 0)
        );
        assert_eq!(IsotropyFingerprint::new(4, 1, 1).label(), "s4-c1-f1");
        let su2 = Representation::adjoint(2).unwrap();
        assert_eq!(
            fingerprint(&su2, &DVector::from_vec(vec![0.3, -0.2, 0.9])).unwrap(),
            IsotropyFingerprint::new(1, 1, 1)
        );
    }

    #[test]
    fn fixed_space_cases() {
        let rep = su3();
        assert_eq!(fixed_space(&rep, &[]).unwrap().ncols(), 8);
        let generic = DVector::from_vec(vec![0.1, -0.3, 0.7, 0.2, 0.05, -0.4, 0.3, 0.6]);
        let stab = stabilizer_algebra(&rep, &generic).unwrap();
        let fix = fixed_space(&rep, &stab).unwrap();
        assert_eq!(fix.ncols(), 2);
        assert!(linalg::residual_from(&fix, &generic) < 1e-10);
    }

    #[test]
    fn tangent_and_slice() {
        let rep = su3();
        assert_eq!(orbit_tangent(&rep, &DVector::zeros(8)).unwrap().ncols(), 0);
        assert_eq!(slice_basis(&rep, &DVector::zeros(8)).unwrap().ncols(), 8);
        let l8 = e(8, 7);
        assert_eq!(orbit_tangent(&rep, &l8).unwrap().ncols(), 4);
        let s = slice_basis(&rep, &l8).unwrap();
        assert_eq!(s.ncols(), 4);
        assert!(linalg::residual_from(&s, &l8) < 1e-12);
        // The su(2) directions commute with lambda_8.
        for i in 0..3 {
            assert!(linalg::residual_from(&s, &e(8, i)) < 1e-12);
        }
    }

    #[test]
    fn infinitesimal_consistency() {
        for kind in [
            RepKind::Adjoint(3),
            RepKind::Fundamental(3),
            RepKind::DirectSum(vec![RepKind::Adjoint(2), RepKind::Fundamental(2)]),
        ] {
            let rep = Representation::new(kind).unwrap();
            let mut rng = stream(1, 0);
            let x = crate::algebra::random_algebra_with(rep.basis(), &mut rng);
            let v = rep.random_vector(&mut rng);
            let t = 1e-4;
            let moved = rep.act_group(&exp_map(&x, t), &v).unwrap();
            let lin = &v + rep.act_algebra(&x, &v).unwrap() * t;
            assert!((moved - lin).norm() < 1e-6);
        }
    }

    #[test]
    fn adjoint_group_matrix_matches_conjugation() {
        let rep = su3();
        let g = haar_sample(3, 9);
        let x = rep.basis().generator(5).clone();
        let moved = rep.act_group(&g, &rep.basis().coords(&x)).unwrap();
        let direct = rep.basis().coords(&adjoint_action(&g, &x).unwrap());
        assert!((moved - direct).norm() < 1e-13);
    }

    #[test]
    fn rep_kind_text_round_trip() {
        for s in ["adjoint(3)", "fundamental(2)", "adjoint(3)+fundamental(3)"] {
            let k: RepKind = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
        }
        assert!("spinor(3)".parse::<RepKind>().is_err());
        assert!(Representation::new(RepKind::DirectSum(vec![
            RepKind::Adjoint(2),
            RepKind::Adjoint(3)
        ]))
        .is_err());
    }

    #[test]
    fn complex_view_round_trip() {
        let rep = Representation::new(RepKind::DirectSum(vec![
            RepKind::Fundamental(3),
            RepKind::Adjoint(3),
        ]))
        .unwrap();
        let mut rng = stream(4, 0);
        let v = rep.random_vector(&mut rng);
        let c = rep.to_complex(&v).unwrap();
        assert_eq!(c.len(), 11);
        assert_eq!(rep.from_complex(&c).unwrap(), v);
    }

    #[test]
    fn fundamental_vector_stabilizer_is_su2() {
        let rep = Representation::fundamental(3).unwrap();
        let mut v = DVector::zeros(6);
        v[4] = 1.0;
        let fp = fingerprint(&rep, &v).unwrap();
        assert_eq!(fp.stab_dim, 3);
        assert_eq!(fp.center_dim, 0);
    }

    #[test]
    fn orbit_distance_matches_eigenvalue_oracle() {
        // For Hermitian matrices the distance between conjugacy orbits is the
        // distance between sorted spectra (Hoffman-Wielandt).
        let rep = su3();
        let b = rep.basis();
        let mut rng = stream(42, 0);
        for k in 0..3u64 {
            let v = rep.random_unit_vector(&mut rng);
            let w = rep.random_unit_vector(&mut rng);
            let spec = |x: &DVector<f64>| {
                let m = b.element(x);
                let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(m.entries().clone())
                    .eigenvalues
                    .iter()
                    .copied()
                    .collect();
                ev.sort_by(f64::total_cmp);
                ev
            };
            let (sv, sw) = (spec(&v), spec(&w));
            let frob: f64 = sv
                .iter()
                .zip(&sw)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
            // carrier norm is the Frobenius norm / sqrt(2)
            let oracle = (frob / 2.0).sqrt();
            let got = orbit_distance(&rep, &v, &w, 20, k).unwrap().distance;
            assert!((got - oracle).abs() < 1e-7, "got {got}, oracle {oracle}");
        }
    }

    #[test]
    fn isolation_examples() {
        let rep = su3();
        let cfg = IsolationConfig {
            samples: 200,
            ..Default::default()
        };
        let l8 = e(8, 7);
        assert!(is_isolated_in_stratum(&rep, &l8, &cfg).unwrap().isolated);
        let mut rng = stream(5, 0);
        let generic = rep.random_unit_vector(&mut rng);
        let ev = is_isolated_in_stratum(&rep, &generic, &cfg).unwrap();
        assert!(!ev.isolated);
        assert!(ev.counterexample.unwrap().orbit_distance > cfg.radius / 10.0);
        let free = IsolationConfig {
            constrain_to_sphere: false,
            ..cfg.clone()
        };
        assert!(
            is_isolated_in_stratum(&rep, &DVector::zeros(8), &free)
                .unwrap()
                .isolated
        );
        assert!(matches!(
            is_isolated_in_stratum(&rep, &DVector::zeros(8), &cfg),
            Err(Error::DegenerateInput(_))
        ));
        let few = IsolationConfig { samples: 10, ..cfg };
        assert!(is_isolated_in_stratum(&rep, &l8, &few).is_err());
    }
}
