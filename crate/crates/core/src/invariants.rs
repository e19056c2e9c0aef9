//! Group-invariant functions on a carrier space and polynomials in them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{RepKind, Representation};
use crate::algebra::{haar_sample_with, CMatrix};
use crate::error::{check_dim, Error, Result};
use crate::rng::stream;

/// Monomial `coef * prod_i x_i^powers[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Polynomial in the carrier coordinates (not necessarily invariant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPolynomial {
    pub terms: Vec<Term>,
}

fn monomial(x: &DVector<f64>, powers: &[u32]) -> f64 {
    powers
        .iter()
        .zip(x.iter())
        .map(|(&p, &xi)| if p == 0 { 1.0 } else { xi.powi(p as i32) })
        .product()
}

fn monomial_gradient(x: &DVector<f64>, powers: &[u32], coef: f64, out: &mut DVector<f64>) {
    for i in 0..powers.len() {
        if powers[i] == 0 {
            continue;
        }
        let mut d = coef * powers[i] as f64;
        for (j, (&p, &xj)) in powers.iter().zip(x.iter()).enumerate() {
            let e = if j == i { p - 1 } else { p };
            if e > 0 {
                d *= xj.powi(e as i32);
            }
        }
        out[i] += d;
    }
}

impl RawPolynomial {
    /// A single coordinate `x_index`.
    pub fn coordinate(dim: usize, index: usize) -> Self {
        let mut powers = vec![0; dim];
        powers[index] = 1;
        Self {
            terms: vec![Term { coef: 1.0, powers }],
        }
    }

    /// `sum_i x_i^2`.
    pub fn norm_squared(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|i| {
                let mut powers = vec![0; dim];
                powers[i] = 2;
                Term { coef: 1.0, powers }
            })
            .collect();
        Self { terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.powers.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * monomial(x, &t.powers))
            .sum()
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for t in &self.terms {
            monomial_gradient(x, &t.powers, t.coef, &mut g);
        }
        g
    }

    fn check(&self, dim: usize) -> Result<()> {
        for t in &self.terms {
            check_dim(dim, t.powers.len())?;
        }
        Ok(())
    }
}

/// Monte-Carlo Haar average of a raw polynomial.
#[derive(Clone, Debug)]
pub struct ReynoldsAverage {
    raw: RawPolynomial,
    samples: usize,
    seed: u64,
    matrices: Vec<DMatrix<f64>>,
}

impl ReynoldsAverage {
    fn build(rep: &Representation, raw: RawPolynomial, samples: usize, seed: u64) -> Result<Self> {
        raw.check(rep.carrier_dim())?;
        let matrices = (0..samples as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i);
                rep.group_matrix(&haar_sample_with(rep.n(), &mut rng))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            raw,
            samples,
            seed,
            matrices,
        })
    }

    fn values(&self, v: &DVector<f64>) -> impl Iterator<Item = f64> + '_ {
        let v = v.clone();
        self.matrices
            .iter()
            .map(move |r| self.raw.evaluate(&(r * &v)))
    }

    fn evaluate(&self, v: &DVector<f64>) -> f64 {
        self.values(v).sum::<f64>() / self.samples as f64
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(v.len());
        for r in &self.matrices {
            g += r.transpose() * self.raw.gradient(&(r * v));
        }
        g / self.samples as f64
    }

    /// Standard error of the Monte-Carlo mean at `v`.
    fn standard_error(&self, v: &DVector<f64>) -> f64 {
        let vals: Vec<f64> = self.values(v).collect();
        let q = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / q;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (q - 1.0);
        (var / q).sqrt()
    }
}

/// One generator of the invariant ring used by a potential.
#[derive(Clone, Debug)]
pub enum BasisInvariant {
    /// `Tr M^k` for the adjoint block starting at carrier offset `offset`.
    TracePower {
        k: u32,
        offset: usize,
    },
    /// Squared norm of the carrier block `[offset, offset + len)`.
    NormSquared {
        offset: usize,
        len: usize,
    },
    Reynolds(Arc<ReynoldsAverage>),
}

impl BasisInvariant {
    /// Weighted degree as a polynomial in the carrier coordinates.
    pub fn weight(&self) -> u32 {
        match self {
            BasisInvariant::TracePower { k, .. } => *k,
            BasisInvariant::NormSquared { .. } => 2,
            BasisInvariant::Reynolds(r) => r.raw.degree(),
        }
    }

    fn evaluate(&self, rep: &Representation, v: &DVector<f64>) -> f64 {
        match self {
            BasisInvariant::TracePower { k, offset } => {
                let m = adjoint_block(rep, v, *offset);
                let mut p = m.clone();
                for _ in 1..*k {
                    p = &p * &m;
                }
                p.trace().re
            }
            BasisInvariant::NormSquared { offset, len } => v.rows(*offset, *len).norm_squared(),
            BasisInvariant::Reynolds(r) => r.evaluate(v),
        }
    }

    fn gradient(&self, rep: &Representation, v: &DVector<f64>) -> DVector<f64> {
        match self {
            BasisInvariant::TracePower { k, offset } => {
                // d/dv_a Tr M^k = k Tr(lambda_a M^{k-1}) = 2k (lambda_a, M^{k-1})
                let m = adjoint_block(rep, v, *offset);
                let n = m.nrows();
                let mut p = CMatrix::identity(n, n);
                for _ in 1..*k {
                    p = &p * &m;
                }
                let c = rep.basis().coords_of_matrix(&p) * (2.0 * *k as f64);
                let mut g = DVector::zeros(v.len());
                g.rows_mut(*offset, c.len()).copy_from(&c);
                g
            }
            BasisInvariant::NormSquared { offset, len } => {
                let mut g = DVector::zeros(v.len());
                g.rows_mut(*offset, *len)
                    .copy_from(&(v.rows(*offset, *len) * 2.0));
                g
            }
            BasisInvariant::Reynolds(r) => r.gradient(v),
        }
    }

    fn name(&self, single_block: bool) -> String {
        match self {
            BasisInvariant::TracePower { k, offset } if single_block => {
                let _ = offset;
                format!("I{k}")
            }
            BasisInvariant::TracePower { k, offset } => format!("I{k}@{offset}"),
            BasisInvariant::NormSquared { .. } if single_block => "N2".to_string(),
            BasisInvariant::NormSquared { offset, .. } => format!("N2@{offset}"),
            BasisInvariant::Reynolds(_) => "R".to_string(),
        }
    }
}

fn adjoint_block(rep: &Representation, v: &DVector<f64>, offset: usize) -> CMatrix {
    let dim = rep.group_dim();
    rep.basis()
        .element(&v.rows(offset, dim).into_owned())
        .entries()
        .clone()
}

/// Default generators: `{Tr M^2, Tr M^3}` (only `Tr M^2` for su(2)) on each
/// adjoint block and the squared norm on each fundamental block.
pub fn default_generators(rep: &Representation) -> Vec<BasisInvariant> {
    fn walk(kind: &RepKind, offset: &mut usize, out: &mut Vec<BasisInvariant>) {
        match kind {
            RepKind::Adjoint(n) => {
                out.push(BasisInvariant::TracePower {
                    k: 2,
                    offset: *offset,
                });
                if *n >= 3 {
                    out.push(BasisInvariant::TracePower {
                        k: 3,
                        offset: *offset,
                    });
                }
                *offset += n * n - 1;
            }
            RepKind::Fundamental(n) => {
                out.push(BasisInvariant::NormSquared {
                    offset: *offset,
                    len: 2 * n,
                });
                *offset += 2 * n;
            }
            RepKind::DirectSum(parts) => {
                for p in parts {
                    walk(p, offset, out);
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(rep.kind(), &mut 0, &mut out);
    out
}

/// A polynomial in a list of invariant generators.
#[derive(Clone, Debug)]
pub struct InvariantPotential {
    rep: Representation,
    generators: Vec<BasisInvariant>,
    terms: Vec<Term>,
    degree: u32,
}

impl InvariantPotential {
    pub fn new(
        rep: Representation,
        generators: Vec<BasisInvariant>,
        terms: Vec<Term>,
    ) -> Result<Self> {
        for t in &terms {
            check_dim(generators.len(), t.powers.len())?;
        }
        let degree = terms
            .iter()
            .map(|t| weighted_degree(&generators, &t.powers))
            .max()
            .unwrap_or(0);
        Ok(Self {
            rep,
            generators,
            terms,
            degree,
        })
    }

    /// Potential over the default generators from `(coef, powers)` pairs.
    pub fn from_terms(rep: &Representation, terms: &[(f64, Vec<u32>)]) -> Result<Self> {
        let generators = default_generators(rep);
        let terms = terms
            .iter()
            .map(|(c, p)| Term {
                coef: *c,
                powers: p.clone(),
            })
            .collect();
        Self::new(rep.clone(), generators, terms)
    }

    /// The single generator `index` of the default basis.
    pub fn generator(rep: &Representation, index: usize) -> Result<Self> {
        let k = default_generators(rep).len();
        if index >= k {
            return Err(Error::Dimension {
                expected: k,
                found: index,
            });
        }
        let mut powers = vec![0; k];
        powers[index] = 1;
        Self::from_terms(rep, &[(1.0, powers)])
    }

    pub fn zero(rep: &Representation) -> Self {
        Self::new(rep.clone(), default_generators(rep), Vec::new()).expect("no terms")
    }

    pub fn rep(&self) -> &Representation {
        &self.rep
    }

    pub fn generators(&self) -> &[BasisInvariant] {
        &self.generators
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn generator_names(&self) -> Vec<String> {
        let single = !matches!(self.rep.kind(), RepKind::DirectSum(_));
        self.generators.iter().map(|g| g.name(single)).collect()
    }

    /// Values of the generators at `v`.
    pub fn invariant_values(&self, v: &DVector<f64>) -> Result<Vec<f64>> {
        check_dim(self.rep.carrier_dim(), v.len())?;
        Ok(self
            .generators
            .iter()
            .map(|g| g.evaluate(&self.rep, v))
            .collect())
    }

    pub fn evaluate(&self, v: &DVector<f64>) -> Result<f64> {
        let b = self.invariant_values(v)?;
        Ok(self
            .terms
            .iter()
            .map(|t| t.coef * monomial(&DVector::from_column_slice(&b), &t.powers))
            .sum())
    }

    /// Inner-product representer of the differential at `v`.
    pub fn gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let b = DVector::from_vec(self.invariant_values(v)?);
        let mut outer = DVector::zeros(b.len());
        for t in &self.terms {
            monomial_gradient(&b, &t.powers, t.coef, &mut outer);
        }
        let mut g = DVector::zeros(v.len());
        for (gen, &w) in self.generators.iter().zip(outer.iter()) {
            if w != 0.0 {
                g += gen.gradient(&self.rep, v) * w;
            }
        }
        Ok(g)
    }

    /// Structured text record of the potential.
    pub fn to_record(&self) -> PotentialRecord {
        PotentialRecord {
            representation: self.rep.kind().to_string(),
            basis: self.generator_names(),
            generators: self
                .generators
                .iter()
                .map(|g| match g {
                    BasisInvariant::TracePower { k, offset } => GeneratorRecord::TracePower {
                        k: *k,
                        offset: *offset,
                    },
                    BasisInvariant::NormSquared { offset, len } => GeneratorRecord::NormSquared {
                        offset: *offset,
                        len: *len,
                    },
                    BasisInvariant::Reynolds(r) => GeneratorRecord::Reynolds {
                        raw: r.raw.clone(),
                        samples: r.samples,
                        seed: r.seed,
                    },
                })
                .collect(),
            degree: self.degree,
            terms: self.terms.clone(),
        }
    }

    pub fn from_record(record: &PotentialRecord) -> Result<Self> {
        let kind: RepKind = record.representation.parse()?;
        let rep = Representation::new(kind)?;
        let generators = record
            .generators
            .iter()
            .map(|g| {
                Ok(match g {
                    GeneratorRecord::TracePower { k, offset } => BasisInvariant::TracePower {
                        k: *k,
                        offset: *offset,
                    },
                    GeneratorRecord::NormSquared { offset, len } => BasisInvariant::NormSquared {
                        offset: *offset,
                        len: *len,
                    },
                    GeneratorRecord::Reynolds { raw, samples, seed } => BasisInvariant::Reynolds(
                        Arc::new(ReynoldsAverage::build(&rep, raw.clone(), *samples, *seed)?),
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rep, generators, record.terms.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: PotentialRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        Self::from_record(&record)
    }
}

impl fmt::Display for InvariantPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.generator_names();
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{}", t.coef)?;
            for (name, &p) in names.iter().zip(&t.powers) {
                match p {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    _ => write!(f, "*{name}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

fn weighted_degree(generators: &[BasisInvariant], powers: &[u32]) -> u32 {
    generators
        .iter()
        .zip(powers)
        .map(|(g, &p)| g.weight() * p)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorRecord {
    TracePower {
        k: u32,
        offset: usize,
    },
    NormSquared {
        offset: usize,
        len: usize,
    },
    Reynolds {
        raw: RawPolynomial,
        samples: usize,
        seed: u64,
    },
}

/// Serializable description of an [`InvariantPotential`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub representation: String,
    pub basis: Vec<String>,
    pub generators: Vec<GeneratorRecord>,
    pub degree: u32,
    pub terms: Vec<Term>,
}

/// Output of [`reynolds_average`].
#[derive(Clone, Debug)]
pub struct ReynoldsReport {
    pub potential: InvariantPotential,
    /// Largest `|V(g.v) - V(v)|` over the probe pairs.
    pub invariance_residual: f64,
    /// Largest Monte-Carlo standard error over the probe points.
    pub sampling_error: f64,
}

/// Haar average `v -> E_g raw(g.v)` with `samples` quadrature points.
pub fn reynolds_average(
    rep: &Representation,
    raw: &RawPolynomial,
    samples: usize,
    seed: u64,
) -> Result<ReynoldsReport> {
    if samples < 1000 {
        return Err(Error::Precondition(format!(
            "Reynolds quadrature needs at least 1000 samples, got {samples}"
        )));
    }
    let avg = Arc::new(ReynoldsAverage::build(rep, raw.clone(), samples, seed)?);
    let potential = InvariantPotential::new(
        rep.clone(),
        vec![BasisInvariant::Reynolds(avg.clone())],
        vec![Term {
            coef: 1.0,
            powers: vec![1],
        }],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_A5A5);
    let mut residual = 0.0_f64;
    let mut error = 0.0_f64;
    for _ in 0..8 {
        let v = rep.random_unit_vector(&mut rng) * rng.random_range(0.5..2.0);
        let h = haar_sample_with(rep.n(), &mut rng);
        let hv = rep.act_group(&h, &v)?;
        residual = residual.max((avg.evaluate(&hv) - avg.evaluate(&v)).abs());
        error = error
            .max(avg.standard_error(&v))
            .max(avg.standard_error(&hv));
    }
    Ok(ReynoldsReport {
        potential,
        invariance_residual: residual,
        sampling_error: error,
    })
}

/// Exponent vectors over `weights` with weighted degree in `1..=max_degree`.
fn monomials(weights: &[u32], max_degree: u32) -> Vec<Vec<u32>> {
    fn rec(weights: &[u32], left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == weights.len() {
            out.push(prefix.clone());
            return;
        }
        let w = weights[prefix.len()].max(1);
        for p in 0..=left / w {
            prefix.push(p);
            rec(weights, left - p * w, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(weights, max_degree, &mut Vec::new(), &mut out);
    out.retain(|p| p.iter().any(|&e| e > 0));
    out.sort_by_key(|p| {
        (
            p.iter().zip(weights).map(|(e, w)| e * w).sum::<u32>(),
            p.clone(),
        )
    });
    out
}

/// Random polynomial in the default generators with coefficients uniform in
/// `[-1, 1]` over all monomials of weighted degree `1..=degree`.
pub fn random_invariant_potential(
    rep: &Representation,
    degree: u32,
    seed: u64,
) -> Result<InvariantPotential> {
    if degree > 6 {
        return Err(Error::Precondition(format!(
            "potential degree is capped at 6, got {degree}"
        )));
    }
    let generators = default_generators(rep);
    let weights: Vec<u32> = generators.iter().map(BasisInvariant::weight).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = monomials(&weights, degree)
        .into_iter()
        .map(|powers| Term {
            coef: rng.random_range(-1.0..=1.0),
            powers,
        })
        .collect();
    InvariantPotential::new(rep.clone(), generators, terms)
}

/// Central finite-difference gradient, used as an oracle in tests and checks.
pub fn finite_difference_gradient(
    f: impl Fn(&DVector<f64>) -> f64,
    v: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    let mut g = DVector::zeros(v.len());
    let mut w = v.clone();
    for i in 0..v.len() {
        w[i] = v[i] + step;
        let fp = f(&w);
        w[i] = v[i] - step;
        let fm = f(&w);
        w[i] = v[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{fixed_space, orbit_tangent, stabilizer_algebra};
    use crate::algebra::haar_sample;
    use crate::linalg;

    fn su3() -> Representation {
        Representation::adjoint(3).unwrap()
    }

    #[test]
    fn trace_square_of_lambda3() {
        let rep = su3();
        let i2 = InvariantPotential::generator(&rep, 0).unwrap();
        let mut l3 = DVector::zeros(8);
        l3[2] = 1.0;
        assert!((i2.evaluate(&l3).unwrap() - 2.0).abs() < 1e-14);
        let i3 = InvariantPotential::generator(&rep, 1).unwrap();
        assert!(i3.evaluate(&l3).unwrap().abs() < 1e-14);
        let zero = InvariantPotential::zero(&rep);
        assert_eq!(zero.evaluate(&l3).unwrap(), 0.0);
        assert_eq!(zero.gradient(&l3).unwrap(), DVector::zeros(8));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for kind in [
            RepKind::Adjoint(3),
            RepKind::Fundamental(3),
            RepKind::DirectSum(vec![RepKind::Adjoint(3), RepKind::Fundamental(3)]),
        ] {
            let rep = Representation::new(kind).unwrap();
            for seed in 0..10 {
                let pot = random_invariant_potential(&rep, 6, seed).unwrap();
                let mut rng = stream(seed, 99);
                let v = rep.random_unit_vector(&mut rng) * 0.8;
                let g = pot.gradient(&v).unwrap();
                let fd = finite_difference_gradient(|w| pot.evaluate(w).unwrap(), &v, 1e-5);
                let rel = (&g - &fd).norm() / g.norm().max(1e-12);
                assert!(rel < 1e-5, "relative error {rel}");
            }
        }
    }

    #[test]
    fn gradient_equivariance_and_fixed_space() {
        let rep = su3();
        let pot = random_invariant_potential(&rep, 6, 3).unwrap();
        let mut rng = stream(8, 0);
        let v = rep.random_unit_vector(&mut rng);
        for s in 0..10 {
            let g = haar_sample(3, s);
            let r = rep.group_matrix(&g).unwrap();
            let lhs = pot.gradient(&(&r * &v)).unwrap();
            let rhs = &r * pot.gradient(&v).unwrap();
            assert!((lhs - rhs).norm() < 1e-8);
        }
        let mut l8 = DVector::zeros(8);
        l8[7] = 1.0;
        let fix = fixed_space(&rep, &stabilizer_algebra(&rep, &l8).unwrap()).unwrap();
        assert!(linalg::residual_from(&fix, &pot.gradient(&l8).unwrap()) < 1e-8);
        let tangent = orbit_tangent(&rep, &v).unwrap();
        assert!((tangent.transpose() * pot.gradient(&v).unwrap()).amax() < 1e-8);
    }

    #[test]
    fn random_potentials_are_deterministic() {
        let rep = su3();
        let a = random_invariant_potential(&rep, 6, 17).unwrap();
        let b = random_invariant_potential(&rep, 6, 17).unwrap();
        assert_eq!(a.terms(), b.terms());
        // I2, I3, I2^2, I2 I3, I2^3, I3^2
        assert_eq!(a.terms().len(), 6);
        assert!(random_invariant_potential(&rep, 7, 0).is_err());
    }

    #[test]
    fn cubic_term_breaks_sphere_constancy() {
        let rep = su3();
        let mut l3 = DVector::zeros(8);
        l3[2] = 1.0;
        let mut l8 = DVector::zeros(8);
        l8[7] = 1.0;
        // Weighted degree 2 admits only I2, which is constant on the sphere.
        let quad = random_invariant_potential(&rep, 2, 5).unwrap();
        assert!((quad.evaluate(&l3).unwrap() - quad.evaluate(&l8).unwrap()).abs() < 1e-14);
        let cubic = random_invariant_potential(&rep, 3, 5).unwrap();
        let c3 = cubic
            .terms()
            .iter()
            .find(|t| t.powers == vec![0, 1])
            .unwrap()
            .coef;
        assert!(c3 != 0.0);
        assert!((cubic.evaluate(&l3).unwrap() - cubic.evaluate(&l8).unwrap()).abs() > 1e-6);
    }

    #[test]
    fn record_round_trip() {
        let rep = su3();
        let pot = random_invariant_potential(&rep, 5, 2).unwrap();
        let text = pot.to_json();
        let back = InvariantPotential::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        assert_eq!(back.generator_names(), vec!["I2", "I3"]);
    }

    #[test]
    fn reynolds_of_invariant_and_odd_functions() {
        let rep = su3();
        let q = 2000;
        let bound = 5.0 / (q as f64).sqrt();
        let i2 = RawPolynomial::norm_squared(8);
        let rep_i2 = reynolds_average(&rep, &i2, q, 1).unwrap();
        let mut rng = stream(3, 3);
        let v = rep.random_unit_vector(&mut rng);
        assert!((rep_i2.potential.evaluate(&v).unwrap() - 1.0).abs() < bound);
        let coord = RawPolynomial::coordinate(8, 0);
        let rep_c = reynolds_average(&rep, &coord, q, 1).unwrap();
        assert!(rep_c.potential.evaluate(&v).unwrap().abs() < bound);
        assert!(rep_c.invariance_residual < 10.0 * rep_c.sampling_error);
        assert!(reynolds_average(&rep, &coord, 10, 1).is_err());
    }

    #[test]
    fn monomial_enumeration() {
        assert_eq!(monomials(&[2, 3], 3), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(monomials(&[2], 6).len(), 3);
    }
}
