//! Reference implementations shared by the integration tests.
//!
//! Everything here works on plain dense matrices built from scratch, so the
//! checks do not lean on the code paths they verify.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pauligeo::{HermitianCoeffs, PauliString, Phase, PhasedPauli};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub type M = DMatrix<Complex64>;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn single(ch: char) -> M {
    let (o, z, i) = (cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 1.0));
    match ch {
        'I' => M::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => M::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => M::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => M::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad Pauli letter {ch}"),
    }
}

fn kron(a: &M, b: &M) -> M {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    M::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

/// Dense Kronecker product of the letters, leftmost letter outermost.
pub fn dense_pauli(text: &str) -> M {
    text.chars().map(single).reduce(|a, b| kron(&a, &b)).expect("non-empty")
}

pub fn dense_of(h: &HermitianCoeffs) -> M {
    let d = 1usize << h.n();
    let mut out = M::zeros(d, d);
    for (p, c) in h.iter() {
        out += dense_pauli(&p.to_string()) * cx(*c, 0.0);
    }
    out
}

pub fn max_diff(a: &M, b: &M) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn random_string<R: Rng>(rng: &mut R, n: usize) -> PauliString {
    let k = rng.random_range(0..(1u64 << (2 * n)));
    PauliString::from_index(k, n).unwrap()
}

pub fn random_non_identity<R: Rng>(rng: &mut R, n: usize) -> PauliString {
    let k = rng.random_range(1..(1u64 << (2 * n)));
    PauliString::from_index(k, n).unwrap()
}

/// Gaussian coefficients on `terms` random strings.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize, terms: usize) -> HermitianCoeffs {
    let mut h = HermitianCoeffs::zero(n).unwrap();
    for _ in 0..terms {
        let p = random_non_identity(rng, n);
        h.add_term(p, rng.sample::<f64, _>(rand_distr::StandardNormal));
    }
    h
}

/// Dense traceless Hermitian with every coefficient Gaussian.
pub fn random_dense_traceless<R: Rng>(rng: &mut R, n: usize) -> HermitianCoeffs {
    let terms: Vec<(PauliString, f64)> = (1..(1u64 << (2 * n)))
        .map(|k| (PauliString::from_index(k, n).unwrap(), rng.sample(rand_distr::StandardNormal)))
        .collect();
    HermitianCoeffs::from_terms(n, terms).unwrap()
}

/// Real vector `(Re, Im)` of every entry.
fn realify(m: &M) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal real basis of a span of matrices, with double Gram-Schmidt.
pub struct DenseSpan {
    pub vectors: Vec<Vec<f64>>,
    pub matrices: Vec<M>,
}

impl DenseSpan {
    pub fn new() -> Self {
        DenseSpan {
            vectors: Vec::new(),
            matrices: Vec::new(),
        }
    }

    pub fn residual_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for b in &self.vectors {
                let c = dotv(b, &r);
                r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        r
    }

    /// Relative residual of `m` outside the span.
    pub fn residual(&self, m: &M) -> f64 {
        let v = realify(m);
        let norm = dotv(&v, &v).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let r = self.residual_vec(&v);
        dotv(&r, &r).sqrt() / norm
    }

    /// Adds `m` if it is independent; returns whether it was added.
    pub fn admit(&mut self, m: &M, tol: f64) -> bool {
        let v = realify(m);
        let norm = dotv(&v, &v).sqrt();
        if norm == 0.0 {
            return false;
        }
        let r = self.residual_vec(&v);
        let rn = dotv(&r, &r).sqrt();
        if rn / norm < tol {
            return false;
        }
        self.vectors.push(r.iter().map(|x| x / rn).collect());
        self.matrices.push(m * cx(1.0 / norm, 0.0));
        true
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// Closure of `{H_i}` under `A, B -> -i[A, B]`, by brute force on dense
/// matrices.
pub fn dense_closure(gens: &[M]) -> DenseSpan {
    let mut span = DenseSpan::new();
    for g in gens {
        span.admit(g, 1e-9);
    }
    let mut i = 0;
    while i < span.matrices.len() {
        for j in 0..span.matrices.len() {
            let (a, b) = (span.matrices[i].clone(), span.matrices[j].clone());
            let br = (&a * &b - &b * &a) * cx(0.0, -1.0);
            span.admit(&br, 1e-9);
        }
        i += 1;
    }
    span
}

/// `exp(-i t H)` by scaling and squaring a Taylor series.
pub fn expm_taylor(h: &M, t: f64) -> M {
    let d = h.nrows();
    let a = h * cx(0.0, -t);
    let norm = a.iter().fold(0.0, |m: f64, z| m.max(z.norm())) * d as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = a * cx(0.5f64.powi(s), 0.0);
    let mut term = M::identity(d, d);
    let mut sum = M::identity(d, d);
    for k in 1..30 {
        term = &term * &a * cx(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Entrywise-real `Tr(A B)`.
pub fn trace_product(a: &M, b: &M) -> Complex64 {
    (a * b).trace()
}

/// Gaussian integer `(re, im)` for a phased string coefficient.
pub fn gauss(p: &PhasedPauli) -> (i64, i64) {
    let s = p.scale as i64;
    match p.phase {
        Phase::PlusOne => (s, 0),
        Phase::PlusI => (0, s),
        Phase::MinusOne => (-s, 0),
        Phase::MinusI => (0, -s),
    }
}

fn gmul(a: (i64, i64), b: (i64, i64)) -> (i64, i64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

pub type GaussianCombination = BTreeMap<PauliString, (i64, i64)>;

pub fn single_string(p: PauliString) -> GaussianCombination {
    BTreeMap::from([(p, (1, 0))])
}

/// Commutator of Gaussian-integer combinations of strings.
pub fn bracket(a: &GaussianCombination, b: &GaussianCombination) -> GaussianCombination {
    let mut out = BTreeMap::new();
    for (p, cp) in a {
        for (q, cq) in b {
            if let Some(c) = p.commutator(q).unwrap() {
                let v = gmul(gmul(*cp, *cq), gauss(&c));
                let e = out.entry(c.string).or_insert((0, 0));
                e.0 += v.0;
                e.1 += v.1;
            }
        }
    }
    out.retain(|_, v| *v != (0, 0));
    out
}

/// `[p,[q,r]] + [q,[r,p]] + [r,[p,q]]`, empty when the identity holds.
pub fn jacobi_sum(p: PauliString, q: PauliString, r: PauliString) -> GaussianCombination {
    let (sp, sq, sr) = (single_string(p), single_string(q), single_string(r));
    let mut total = GaussianCombination::new();
    for term in [
        bracket(&bracket(&sp, &sq), &sr),
        bracket(&bracket(&sq, &sr), &sp),
        bracket(&bracket(&sr, &sp), &sq),
    ] {
        for (s, v) in term {
            let e = total.entry(s).or_insert((0, 0));
            e.0 += v.0;
            e.1 += v.1;
        }
    }
    total.retain(|_, v| *v != (0, 0));
    total
}
