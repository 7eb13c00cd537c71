//! Generalized Pauli strings in symplectic bit encoding.
//!
//! A string on `n` qubits is stored as two masks: bit `j` of `x` and `z`
//! encodes the letter on site `j + 1` (`00 = I`, `10 = X`, `11 = Y`,
//! `01 = Z`). The integer index follows `k = sum_j 4^(j-1) m_j` with
//! `m_j = 0, 1, 2, 3` for `I, X, Y, Z`, so site 1 is the least-significant
//! base-4 digit. The text form lists site 1 first: `"ZX"` is `Z ⊗ X` and has
//! index `3 + 4 * 1 = 7`.
//!
//! Dense matrices use the usual Kronecker order, `sigma_{m_1} ⊗ ... ⊗
//! sigma_{m_n}`, so site 1 is the most-significant bit of a row index.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Mul, Neg};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest supported qubit count (indices must fit in a `u64`).
pub const MAX_QUBITS: usize = 31;

/// Default guard on dense materialization.
pub const DEFAULT_DENSE_QUBITS: usize = 12;

/// Coefficients with magnitude at or below this are dropped from
/// [`HermitianCoeffs`].
pub const PRUNE_TOL: f64 = 1e-12;

const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        Err(Error::BadQubitCount(n))
    } else {
        Ok(())
    }
}

fn site_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(PauliString { n, x: 0, z: 0 })
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        check_n(n)?;
        let m = site_mask(n);
        if x & !m != 0 || z & !m != 0 {
            return Err(Error::Invalid(format!(
                "mask bits above site {n} (x={x:#x}, z={z:#x})"
            )));
        }
        Ok(PauliString { n, x, z })
    }

    /// Builds the string whose base-4 digits are `k`.
    pub fn from_index(k: u64, n: usize) -> Result<Self> {
        check_n(n)?;
        if (n as u32) < 32 && k >= 1u64 << (2 * n) {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let mut rest = k;
        let mut digits = Vec::with_capacity(n);
        for _ in 0..n {
            digits.push((rest % 4) as u8);
            rest /= 4;
        }
        Self::from_digits(&digits)
    }

    /// Builds a string from per-site digits `m_1, ..., m_n` in `{0,1,2,3}`.
    pub fn from_digits(digits: &[u8]) -> Result<Self> {
        check_n(digits.len())?;
        let (mut x, mut z) = (0u64, 0u64);
        for (j, &m) in digits.iter().enumerate() {
            let (xb, zb) = match m {
                0 => (0, 0),
                1 => (1, 0),
                2 => (1, 1),
                3 => (0, 1),
                _ => return Err(Error::Invalid(format!("Pauli digit {m} not in 0..4"))),
            };
            x |= xb << j;
            z |= zb << j;
        }
        Ok(PauliString {
            n: digits.len(),
            x,
            z,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Letter digit `m_j` for 0-based site `j`.
    pub fn digit(&self, site: usize) -> u8 {
        let xb = (self.x >> site) & 1;
        let zb = (self.z >> site) & 1;
        match (xb, zb) {
            (0, 0) => 0,
            (1, 0) => 1,
            (1, 1) => 2,
            _ => 3,
        }
    }

    pub fn digits(&self) -> Vec<u8> {
        (0..self.n).map(|j| self.digit(j)).collect()
    }

    pub fn index(&self) -> u64 {
        (0..self.n)
            .rev()
            .fold(0u64, |acc, j| acc * 4 + self.digit(j) as u64)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    fn check_same_n(&self, other: &PauliString) -> Result<()> {
        if self.n != other.n {
            Err(Error::QubitMismatch {
                left: self.n,
                right: other.n,
            })
        } else {
            Ok(())
        }
    }

    /// Product `self * other` with its exact phase.
    pub fn product(&self, other: &PauliString) -> Result<PhasedPauli> {
        self.check_same_n(other)?;
        Ok(self.product_unchecked(other))
    }

    pub(crate) fn product_unchecked(&self, other: &PauliString) -> PhasedPauli {
        // sigma = i^{x.z} X^x Z^z per site; moving Z^{z1} past X^{x2} costs (-1)^{z1.x2}.
        let string = PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        };
        let e = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones()
            + 4 * 64
            - string.y_count();
        PhasedPauli {
            phase: Phase::from_power(e),
            scale: 1,
            string,
        }
    }

    /// Commutator `self * other - other * self`.
    ///
    /// Returns `None` when the strings commute. Otherwise the result equals
    /// `2 * self * other`, reported with `scale = 2` so the factor of two is
    /// never dropped silently.
    pub fn commutator(&self, other: &PauliString) -> Result<Option<PhasedPauli>> {
        self.check_same_n(other)?;
        if self.commutes_with(other) {
            return Ok(None);
        }
        let mut p = self.product_unchecked(other);
        p.scale = 2;
        Ok(Some(p))
    }

    /// Masks re-ordered so site 1 is the most-significant bit of a dense
    /// row/column index.
    fn matrix_masks(&self) -> (u64, u64) {
        let rev = |m: u64| -> u64 {
            (0..self.n).fold(0u64, |acc, j| acc | (((m >> j) & 1) << (self.n - 1 - j)))
        };
        (rev(self.x), rev(self.z))
    }

    /// Calls `f(row, col, value)` for each non-zero entry of the dense matrix.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        let (xm, zm) = self.matrix_masks();
        let base = Phase::from_power(self.y_count()).to_complex();
        for col in 0..(1usize << self.n) {
            let sign = if (col as u64 & zm).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            f(col ^ xm as usize, col, base * sign);
        }
    }

    pub fn materialize(&self) -> Result<DMatrix<Complex64>> {
        self.materialize_with_guard(DEFAULT_DENSE_QUBITS)
    }

    pub fn materialize_with_guard(&self, max_qubits: usize) -> Result<DMatrix<Complex64>> {
        if self.n > max_qubits {
            return Err(Error::SizeGuard {
                what: "Pauli materialization",
                dim: 1usize << self.n.min(63),
                limit: 1usize << max_qubits.min(63),
            });
        }
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        self.for_each_entry(|r, c, v| m[(r, c)] = v);
        Ok(m)
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.n, self.index()).cmp(&(other.n, other.index()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.n {
            write!(f, "{}", LETTERS[self.digit(j) as usize])?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .trim()
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                _ => Err(Error::BadPauliText(s.to_string())),
            })
            .collect::<Result<Vec<u8>>>()?;
        if digits.is_empty() {
            return Err(Error::BadPauliText(s.to_string()));
        }
        Self::from_digits(&digits)
    }
}

/// Fourth root of unity, stored as a power of `i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    PlusOne,
    PlusI,
    MinusOne,
    MinusI,
}

impl Phase {
    pub fn from_power(e: u32) -> Phase {
        match e % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn power(self) -> u32 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        match self {
            Phase::PlusOne => Complex64::new(1.0, 0.0),
            Phase::PlusI => Complex64::new(0.0, 1.0),
            Phase::MinusOne => Complex64::new(-1.0, 0.0),
            Phase::MinusI => Complex64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }
}

impl Mul for Phase {
    type Output = Phase;

    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_power(self.power() + rhs.power())
    }
}

impl Neg for Phase {
    type Output = Phase;

    fn neg(self) -> Phase {
        self * Phase::MinusOne
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::PlusOne => "+1",
            Phase::PlusI => "+i",
            Phase::MinusOne => "-1",
            Phase::MinusI => "-i",
        })
    }
}

/// `scale * phase * string`. Products carry `scale = 1`, commutators
/// `scale = 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PhasedPauli {
    pub phase: Phase,
    pub scale: u8,
    pub string: PauliString,
}

impl PhasedPauli {
    pub fn coefficient(&self) -> Complex64 {
        self.phase.to_complex() * self.scale as f64
    }
}

impl fmt::Display for PhasedPauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 1 {
            write!(f, "({})·{}", self.phase, self.string)
        } else {
            write!(f, "{}({})·{}", self.scale, self.phase, self.string)
        }
    }
}

pub fn pauli_from_index(k: u64, n: usize) -> Result<PauliString> {
    PauliString::from_index(k, n)
}

pub fn pauli_product(p: &PauliString, q: &PauliString) -> Result<PhasedPauli> {
    p.product(q)
}

pub fn pauli_commutator(p: &PauliString, q: &PauliString) -> Result<Option<PhasedPauli>> {
    p.commutator(q)
}

pub fn pauli_weight(p: &PauliString) -> usize {
    p.weight()
}

pub fn materialize(p: &PauliString) -> Result<DMatrix<Complex64>> {
    p.materialize()
}

/// Real coefficients `r` of a Hermitian operator `H = sum_k r^k sigma_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianCoeffs {
    n: usize,
    coeffs: BTreeMap<PauliString, f64>,
}

impl HermitianCoeffs {
    pub fn zero(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(HermitianCoeffs {
            n,
            coeffs: BTreeMap::new(),
        })
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (PauliString, f64)>,
    {
        let mut h = Self::zero(n)?;
        for (p, c) in terms {
            if p.n() != n {
                return Err(Error::QubitMismatch {
                    left: n,
                    right: p.n(),
                });
            }
            h.add_term(p, c);
        }
        Ok(h)
    }

    /// Parses terms like `[("ZI", 3.0), ("XX", 0.5)]`.
    pub fn from_text_terms(terms: &[(&str, f64)]) -> Result<Self> {
        let parsed = terms
            .iter()
            .map(|(s, c)| Ok((s.parse::<PauliString>()?, *c)))
            .collect::<Result<Vec<_>>>()?;
        let n = parsed.first().map(|(p, _)| p.n()).ok_or(Error::NoGenerators)?;
        Self::from_terms(n, parsed)
    }

    pub fn single(p: PauliString, c: f64) -> Self {
        let mut h = HermitianCoeffs {
            n: p.n(),
            coeffs: BTreeMap::new(),
        };
        h.add_term(p, c);
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, p: PauliString, c: f64) {
        debug_assert_eq!(p.n(), self.n);
        let v = self.coeffs.entry(p).or_insert(0.0);
        *v += c;
        if v.abs() <= PRUNE_TOL {
            self.coeffs.remove(&p);
        }
    }

    pub fn get(&self, p: &PauliString) -> f64 {
        self.coeffs.get(p).copied().unwrap_or(0.0)
    }

    pub fn get_index(&self, k: u64) -> f64 {
        PauliString::from_index(k, self.n)
            .map(|p| self.get(&p))
            .unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &f64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> Vec<PauliString> {
        self.coeffs.keys().copied().collect()
    }

    /// Coefficient of the identity string.
    pub fn identity_component(&self) -> f64 {
        self.coeffs
            .iter()
            .find(|(p, _)| p.is_identity())
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }

    pub fn traceless_part(&self) -> HermitianCoeffs {
        let mut h = self.clone();
        h.coeffs.retain(|p, _| !p.is_identity());
        h
    }

    /// Normalized Hilbert-Schmidt inner product `Tr(AB) / 2^n`.
    pub fn dot(&self, other: &HermitianCoeffs) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .coeffs
            .iter()
            .fold(0.0, |acc, (p, c)| acc + c * large.get(p))
    }

    /// `sqrt(Tr(H^2) / 2^n)`, the Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.values().fold(0.0, |acc, c| acc + c * c).sqrt()
    }

    /// Plain trace `Tr(H^2) = 2^n * sum_k (r^k)^2`.
    pub fn trace_square(&self) -> f64 {
        (1u64 << self.n) as f64 * self.norm().powi(2)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> HermitianCoeffs {
        let mut out = HermitianCoeffs {
            n: self.n,
            coeffs: BTreeMap::new(),
        };
        for (p, c) in &self.coeffs {
            out.add_term(*p, c * s);
        }
        out
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &HermitianCoeffs) -> HermitianCoeffs {
        let mut out = self.clone();
        for (p, c) in &other.coeffs {
            out.add_term(*p, s * c);
        }
        out
    }

    pub fn check_same_n(&self, other: &HermitianCoeffs) -> Result<()> {
        if self.n != other.n {
            Err(Error::QubitMismatch {
                left: self.n,
                right: other.n,
            })
        } else {
            Ok(())
        }
    }

    /// Hermitian representative `-i[A, B]` of the bracket `[iA, iB] = i(-i[A, B])`.
    pub fn lie_bracket(&self, other: &HermitianCoeffs) -> HermitianCoeffs {
        let mut acc: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (p, a) in &self.coeffs {
            for (q, b) in &other.coeffs {
                if p.commutes_with(q) {
                    continue;
                }
                let prod = p.product_unchecked(q);
                // Anticommuting Hermitian strings multiply to +-i R.
                let sign = if prod.phase == Phase::PlusI { 2.0 } else { -2.0 };
                *acc.entry(prod.string).or_insert(0.0) += sign * a * b;
            }
        }
        acc.retain(|_, v| v.abs() > PRUNE_TOL);
        HermitianCoeffs {
            n: self.n,
            coeffs: acc,
        }
    }

    /// True iff every pair of support strings commutes.
    pub fn commutes_with(&self, other: &HermitianCoeffs) -> bool {
        self.lie_bracket(other).is_empty()
    }

    pub fn to_dense(&self) -> Result<DMatrix<Complex64>> {
        self.to_dense_with_guard(DEFAULT_DENSE_QUBITS)
    }

    pub fn to_dense_with_guard(&self, max_qubits: usize) -> Result<DMatrix<Complex64>> {
        if self.n > max_qubits {
            return Err(Error::SizeGuard {
                what: "Hermitian materialization",
                dim: 1usize << self.n.min(63),
                limit: 1usize << max_qubits.min(63),
            });
        }
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        for (p, c) in &self.coeffs {
            p.for_each_entry(|r, col, v| m[(r, col)] += v * *c);
        }
        Ok(m)
    }

    /// Text form such as `0.5*XX + 3*ZI`.
    pub fn to_text(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        self.coeffs
            .iter()
            .map(|(p, c)| format!("{c}*{p}"))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Maximum absolute entry of `A - A^dagger`.
pub fn hermiticity_defect(h: &DMatrix<Complex64>) -> f64 {
    let d = h.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            worst = worst.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Trace projection `r^k = Tr(H sigma_k) / 2^n` onto all `4^n` strings.
pub fn decompose_hermitian(h: &DMatrix<Complex64>) -> Result<HermitianCoeffs> {
    decompose_hermitian_with_tol(h, 1e-10)
}

pub fn decompose_hermitian_with_tol(h: &DMatrix<Complex64>, tol: f64) -> Result<HermitianCoeffs> {
    let d = h.nrows();
    if h.ncols() != d || !d.is_power_of_two() || d < 2 {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two().max(2),
            got: h.ncols(),
        });
    }
    let deviation = hermiticity_defect(h);
    if deviation > tol {
        return Err(Error::NotHermitian { deviation });
    }
    let n = d.trailing_zeros() as usize;
    let mut out = HermitianCoeffs::zero(n)?;
    for k in 0..(1u64 << (2 * n)) {
        let p = PauliString::from_index(k, n)?;
        // Tr(H P) = sum_{col} H[col, row] P[row, col].
        let mut tr = Complex64::new(0.0, 0.0);
        p.for_each_entry(|r, c, v| tr += h[(c, r)] * v);
        out.add_term(p, tr.re / d as f64);
    }
    Ok(out)
}
