//! SU(N) matrices, their Hermitian Lie algebras and the invariant inner product.
//!
//! Algebra elements use the physics convention: a Hermitian traceless matrix
//! `X` stands for the anti-Hermitian generator `iX`, and `exp_map(X, t)` is
//! `exp(i t X)`. The inner product is `(X, Y) = Re Tr(XY) / 2`, under which the
//! Pauli and Gell-Mann matrices are orthonormal.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;

static VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of structural invariant violations observed on values produced by
/// operations in this process.
pub fn structural_violations() -> u64 {
    VIOLATIONS.load(Ordering::Relaxed)
}

pub(crate) fn record_violation() {
    VIOLATIONS.fetch_add(1, Ordering::Relaxed);
}

fn hermitian_residual(m: &CMatrix) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    (m.adjoint() * m - CMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Hermitian traceless `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    entries: CMatrix,
}

impl AlgebraElement {
    /// Validates Hermiticity and tracelessness at the algebraic tolerance.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 2 {
            return Err(Error::InvalidElement {
                kind: "algebra element",
                reason: format!("shape {:?} is not n x n with n >= 2", entries.shape()),
            });
        }
        let scale = entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let herm = hermitian_residual(&entries);
        if herm > tol::ALGEBRAIC * scale {
            return Err(Error::InvalidElement {
                kind: "algebra element",
                reason: format!("not Hermitian (residual {herm:e})"),
            });
        }
        let tr = entries.trace().norm();
        if tr > tol::ALGEBRAIC * scale {
            return Err(Error::InvalidElement {
                kind: "algebra element",
                reason: format!("not traceless (|tr| = {tr:e})"),
            });
        }
        Ok(Self { entries })
    }

    /// Projects an arbitrary square matrix onto the Hermitian traceless part,
    /// recording a violation if the input was far from it.
    pub(crate) fn from_raw(entries: CMatrix) -> Self {
        let n = entries.nrows();
        let scale = entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let herm = hermitian_residual(&entries);
        let tr = entries.trace();
        if herm > 1e3 * tol::ALGEBRAIC * scale || tr.norm() > 1e3 * tol::ALGEBRAIC * scale {
            record_violation();
        }
        let mut h = (&entries + entries.adjoint()) * Complex64::new(0.5, 0.0);
        let shift = h.trace() / n as f64;
        for i in 0..n {
            h[(i, i)] -= shift;
        }
        Self { entries: h }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            entries: CMatrix::zeros(n, n),
        }
    }

    /// Real diagonal element `diag(d)`; the entries must sum to zero.
    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: &self.entries * Complex64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.n(), other.n())?;
        Ok(Self {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.n(), other.n())?;
        Ok(Self {
            entries: &self.entries - &other.entries,
        })
    }

    /// Norm induced by [`inner`].
    pub fn norm(&self) -> f64 {
        (0.5 * self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Element of SU(n).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    entries: CMatrix,
}

impl GroupElement {
    /// Validates unitarity and unit determinant at the structural tolerance.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() < 2 {
            return Err(Error::InvalidElement {
                kind: "group element",
                reason: format!("shape {:?} is not n x n with n >= 2", entries.shape()),
            });
        }
        let u = unitarity_residual(&entries);
        if u > tol::STRUCTURAL {
            return Err(Error::InvalidElement {
                kind: "group element",
                reason: format!("not unitary (residual {u:e})"),
            });
        }
        let det = entries.clone().determinant();
        if (det - Complex64::new(1.0, 0.0)).norm() > tol::STRUCTURAL {
            return Err(Error::InvalidElement {
                kind: "group element",
                reason: format!("determinant {det} is not 1"),
            });
        }
        Ok(Self { entries })
    }

    /// Wraps the product of group elements, auditing the invariants.
    pub(crate) fn from_raw(entries: CMatrix) -> Self {
        if unitarity_residual(&entries) > tol::STRUCTURAL {
            record_violation();
        }
        Self { entries }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_raw(&self.entries * &other.entries)
    }

    pub fn inverse(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.entries.clone().determinant()
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.entries)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Conjugates another group element: `self * h * self^-1`.
    pub fn conjugate(&self, h: &Self) -> Self {
        Self::from_raw(&self.entries * h.entries() * self.entries.adjoint())
    }
}

/// `(a, b) = Re Tr(ab) / 2`.
pub fn inner(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    check_dim(a.n(), b.n())?;
    Ok(inner_unchecked(a.entries(), b.entries()))
}

fn inner_unchecked(a: &CMatrix, b: &CMatrix) -> f64 {
    // Re Tr(ab) without forming the product.
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    0.5 * s
}

/// `-i(ab - ba)`, Hermitian traceless again.
pub fn commutator(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    check_dim(a.n(), b.n())?;
    let c = a.entries() * b.entries() - b.entries() * a.entries();
    Ok(AlgebraElement::from_raw(c * Complex64::new(0.0, -1.0)))
}

/// `exp(i t x)` through the eigen-decomposition of the Hermitian argument.
pub fn exp_map(x: &AlgebraElement, t: f64) -> GroupElement {
    let n = x.n();
    let eig = SymmetricEigen::new(x.entries().clone());
    let v = &eig.eigenvectors;
    let mut phases = CMatrix::zeros(n, n);
    for i in 0..n {
        phases[(i, i)] = Complex64::from_polar(1.0, t * eig.eigenvalues[i]);
    }
    let u = v * phases * v.adjoint();
    let g = GroupElement::from_raw(u);
    if (g.determinant() - Complex64::new(1.0, 0.0)).norm() > tol::STRUCTURAL {
        record_violation();
    }
    g
}

/// `g x g^-1`.
pub fn adjoint_action(g: &GroupElement, x: &AlgebraElement) -> Result<AlgebraElement> {
    check_dim(g.n(), x.n())?;
    Ok(AlgebraElement::from_raw(
        g.entries() * x.entries() * g.entries().adjoint(),
    ))
}

/// Haar-distributed element of SU(n) from a seed.
pub fn haar_sample(n: usize, seed: u64) -> GroupElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_sample_with(n, &mut rng)
}

/// Haar-distributed element of SU(n): QR of a complex Gaussian matrix with the
/// diagonal of `R` made positive, then rescaled by an n-th root of the
/// determinant.
pub fn haar_sample_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> GroupElement {
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    let det = q.clone().determinant();
    let fix = Complex64::from_polar(1.0, -det.arg() / n as f64);
    GroupElement::from_raw(q * fix)
}

/// Random algebra element with standard Gaussian coordinates in the basis.
pub fn random_algebra_with<R: Rng + ?Sized>(basis: &AlgebraBasis, rng: &mut R) -> AlgebraElement {
    let c = DVector::from_fn(basis.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    basis.element(&c)
}

/// Orthonormal basis of su(n): Pauli matrices for n = 2, Gell-Mann matrices
/// for n = 3 and their generalization above.
#[derive(Clone, Debug)]
pub struct AlgebraBasis {
    n: usize,
    generators: Vec<AlgebraElement>,
    gram: DMatrix<f64>,
}

impl AlgebraBasis {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidElement {
                kind: "algebra basis",
                reason: format!("su({n}) is trivial"),
            });
        }
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut generators = Vec::with_capacity(n * n - 1);
        for j in 1..n {
            for k in 0..j {
                let mut s = CMatrix::zeros(n, n);
                s[(k, j)] = one;
                s[(j, k)] = one;
                generators.push(AlgebraElement { entries: s });
                let mut a = CMatrix::zeros(n, n);
                a[(k, j)] = -i;
                a[(j, k)] = i;
                generators.push(AlgebraElement { entries: a });
            }
            let c = (2.0 / (j * (j + 1)) as f64).sqrt();
            let mut d = CMatrix::zeros(n, n);
            for k in 0..j {
                d[(k, k)] = Complex64::new(c, 0.0);
            }
            d[(j, j)] = Complex64::new(-c * j as f64, 0.0);
            generators.push(AlgebraElement { entries: d });
        }
        let dim = generators.len();
        let gram = DMatrix::from_fn(dim, dim, |a, b| {
            inner_unchecked(generators[a].entries(), generators[b].entries())
        });
        let residual = (&gram - DMatrix::identity(dim, dim)).amax();
        if residual > tol::STRUCTURAL {
            return Err(Error::InvalidElement {
                kind: "algebra basis",
                reason: format!("gram matrix off identity by {residual:e}"),
            });
        }
        Ok(Self {
            n,
            generators,
            gram,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n^2 - 1`.
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[AlgebraElement] {
        &self.generators
    }

    /// Generator `index` (0-based, so the Gell-Mann `lambda_8` is index 7).
    pub fn generator(&self, index: usize) -> &AlgebraElement {
        &self.generators[index]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Coordinates `c_a = (lambda_a, x)`.
    pub fn coords(&self, x: &AlgebraElement) -> DVector<f64> {
        self.coords_of_matrix(x.entries())
    }

    pub(crate) fn coords_of_matrix(&self, m: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.generators
                .iter()
                .map(|g| inner_unchecked(g.entries(), m)),
        )
    }

    /// `sum_a c_a lambda_a`.
    pub fn element(&self, coords: &DVector<f64>) -> AlgebraElement {
        let mut m = CMatrix::zeros(self.n, self.n);
        for (g, &c) in self.generators.iter().zip(coords.iter()) {
            if c != 0.0 {
                m += g.entries() * Complex64::new(c, 0.0);
            }
        }
        AlgebraElement { entries: m }
    }

    /// Real orthogonal matrix of `Ad_g` in basis coordinates.
    pub fn adjoint_matrix(&self, g: &GroupElement) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (b, gen) in self.generators.iter().enumerate() {
            let conj = g.entries() * gen.entries() * g.entries().adjoint();
            out.set_column(b, &self.coords_of_matrix(&conj));
        }
        out
    }

    /// Matrix of `Y -> commutator(x, Y)` in basis coordinates.
    pub fn ad_matrix(&self, x: &AlgebraElement) -> DMatrix<f64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        let mi = Complex64::new(0.0, -1.0);
        for (b, gen) in self.generators.iter().enumerate() {
            let c = (x.entries() * gen.entries() - gen.entries() * x.entries()) * mi;
            out.set_column(b, &self.coords_of_matrix(&c));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lambda3_is_unit() {
        let b = AlgebraBasis::new(3).unwrap();
        let l3 = AlgebraElement::diagonal(&[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(b.generator(2), &l3);
        assert!((inner(&l3, &l3).unwrap() - 1.0).abs() < 1e-15);
        let z = AlgebraElement::zero(3);
        assert_eq!(inner(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn gell_mann_lambda8() {
        let b = AlgebraBasis::new(3).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let l8 = AlgebraElement::diagonal(&[s, s, -2.0 * s]).unwrap();
        assert!(b.generator(7).max_abs_diff(&l8) < 1e-15);
        assert_eq!(b.dim(), 8);
        assert_eq!(AlgebraBasis::new(2).unwrap().dim(), 3);
        assert_eq!(AlgebraBasis::new(4).unwrap().dim(), 15);
    }

    #[test]
    fn pauli_commutator() {
        let b = AlgebraBasis::new(2).unwrap();
        let (s1, s2, s3) = (b.generator(0), b.generator(1), b.generator(2));
        let k = commutator(s1, s2).unwrap();
        assert!(k.max_abs_diff(&s3.scale(2.0)) < 1e-15);
        assert!(commutator(s1, s1).unwrap().norm() == 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = AlgebraElement::zero(2);
        let b = AlgebraElement::zero(3);
        assert!(matches!(inner(&a, &b), Err(Error::Dimension { .. })));
        assert!(commutator(&a, &b).is_err());
        assert!(adjoint_action(&GroupElement::identity(3), &a).is_err());
    }

    #[test]
    fn rejects_invalid_matrices() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(AlgebraElement::new(m).is_err());
        let m = CMatrix::identity(2, 2);
        assert!(AlgebraElement::new(m.clone()).is_err());
        assert!(GroupElement::new(m * c(0.0, 1.0)).is_err()); // det = -1
        assert!(GroupElement::new(CMatrix::identity(2, 2) * c(2.0, 0.0)).is_err());
    }

    #[test]
    fn exp_of_lambda3_at_pi() {
        let l3 = AlgebraElement::diagonal(&[1.0, -1.0, 0.0]).unwrap();
        let g = exp_map(&l3, PI);
        // Oracle: the exponential of a diagonal matrix is the diagonal of exponentials.
        let want = GroupElement::new(CMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from_polar(1.0, PI),
            Complex64::from_polar(1.0, -PI),
            c(1.0, 0.0),
        ])))
        .unwrap();
        assert!(g.max_abs_diff(&want) < 1e-14);
        assert!((g.entries()[(0, 0)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!(exp_map(&l3, 0.0).max_abs_diff(&GroupElement::identity(3)) < 1e-15);
    }

    #[test]
    fn exp_inverse_pairs() {
        let b = AlgebraBasis::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let x = random_algebra_with(&b, &mut rng);
            let t: f64 = rng.random_range(-10.0..10.0);
            let prod = exp_map(&x, t).mul(&exp_map(&x, -t));
            assert!(prod.max_abs_diff(&GroupElement::identity(3)) < 1e-10);
        }
    }

    #[test]
    fn adjoint_action_first_order() {
        // Ad(exp(itz)) x = x + i t [z, x] + O(t^2) = x - t * commutator(z, x) + O(t^2).
        let b = AlgebraBasis::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = random_algebra_with(&b, &mut rng);
        let x = random_algebra_with(&b, &mut rng);
        let k = commutator(&z, &x).unwrap();
        let mut prev = f64::INFINITY;
        for &t in &[1e-2, 1e-3, 1e-4] {
            let ad = adjoint_action(&exp_map(&z, t), &x).unwrap();
            let lin = x.sub(&k.scale(t)).unwrap();
            let err = ad.sub(&lin).unwrap().norm();
            assert!(err < 10.0 * t * t * z.norm().powi(2) * x.norm());
            assert!(err < prev);
            prev = err;
        }
        assert!(
            adjoint_action(&GroupElement::identity(3), &x)
                .unwrap()
                .max_abs_diff(&x)
                < 1e-15
        );
    }

    #[test]
    fn haar_is_special_unitary() {
        for seed in 0..50 {
            for n in [2, 3, 4] {
                let g = haar_sample(n, seed);
                assert!(GroupElement::new(g.entries().clone()).is_ok());
            }
        }
        assert_eq!(haar_sample(3, 5), haar_sample(3, 5));
    }

    #[test]
    fn haar_moments() {
        // Oracle: E[U_ij] = 0 and E|U_11|^2 = 1/N under Haar measure.
        let samples = 10_000;
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(2024 + n as u64);
            let mut mean = CMatrix::zeros(n, n);
            let mut m2 = Vec::with_capacity(samples);
            for _ in 0..samples {
                let g = haar_sample_with(n, &mut rng);
                mean += g.entries();
                m2.push(g.entries()[(0, 0)].norm_sqr());
            }
            mean /= Complex64::new(samples as f64, 0.0);
            let bound = 5.0 / (samples as f64).sqrt();
            for z in mean.iter() {
                assert!(z.re.abs() < bound && z.im.abs() < bound, "mean {z}");
            }
            let mu = m2.iter().sum::<f64>() / samples as f64;
            let var = m2.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let se = (var / samples as f64).sqrt();
            assert!((mu - 1.0 / n as f64).abs() < 5.0 * se, "n={n} mu={mu}");
        }
    }

    #[test]
    fn adjoint_matrix_is_orthogonal() {
        let b = AlgebraBasis::new(3).unwrap();
        let g = haar_sample(3, 3);
        let r = b.adjoint_matrix(&g);
        assert!((r.transpose() * &r - DMatrix::identity(8, 8)).amax() < 1e-12);
        let x = b.generator(4).clone();
        let via_matrix = b.element(&(&r * b.coords(&x)));
        assert!(via_matrix.max_abs_diff(&adjoint_action(&g, &x).unwrap()) < 1e-13);
    }
}
