//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

/// Max entrywise deviation of `U U^dagger` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.nrows();
    max_abs_diff(&(u * u.adjoint()), &CMatrix::identity(d, d))
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Eigenvalues (ascending) and unit eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let d = h.nrows();
    let mut vecs = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `V diag(f(lambda)) V^dagger` for a Hermitian matrix.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fj = f(l);
        for r in 0..scaled.nrows() {
            scaled[(r, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    hermitian_function(h, |l| Complex64::from_polar(1.0, -t * l))
}

/// Eigenphases in `[-pi, pi]` and unit eigenvectors of a unitary matrix.
///
/// Diagonalizes the Hermitian Cayley transform `i (I - U)(I + U)^-1`, whose
/// eigenvalues are `tan(theta / 2)`. An eigenvalue at `-1` makes `I + U`
/// singular and is reported as a phase of `pi`.
pub fn unitary_eigen(u: &CMatrix) -> (Vec<f64>, CMatrix) {
    let d = u.nrows();
    let id = CMatrix::identity(d, d);
    let inverse = (&id + u).lu().try_inverse();
    let cayley = match inverse {
        Some(inv) => (&id - u) * inv * I,
        None => return (vec![std::f64::consts::PI; d], id),
    };
    let (tans, vecs) = hermitian_eigen(&cayley);
    let phases = tans
        .iter()
        .map(|t| if t.is_finite() { 2.0 * t.atan() } else { std::f64::consts::PI })
        .collect();
    (phases, vecs)
}

/// Closest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(a: &CMatrix) -> CMatrix {
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("svd u requested");
    let v_t = svd.v_t.expect("svd v_t requested");
    u * v_t
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `a^{⊗k}`.
pub fn kron_power(a: &CMatrix, k: usize) -> CMatrix {
    let mut out = a.clone();
    for _ in 1..k {
        out = out.kronecker(a);
    }
    out
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Checks a square matrix of dimension `2^n` and returns `n`.
pub fn qubits_of(m: &CMatrix) -> Result<usize> {
    let d = m.nrows();
    if m.ncols() != d || d < 2 || !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two().max(2),
            got: m.ncols(),
        });
    }
    Ok(d.trailing_zeros() as usize)
}
