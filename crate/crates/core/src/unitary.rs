//! Dense SU(2^n) numerics.
//!
//! Sign convention throughout: `U = exp(-i H)`. Charts return the real
//! coefficients `r` of `exp(-i r·sigma)`, and the Hamiltonian of a curve is
//! `H(lambda) = i U'(lambda) U(lambda)^dagger`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::pauli::{decompose_hermitian_with_tol, hermiticity_defect, HermitianCoeffs};

/// Entrywise tolerance on `U U^dagger = 1`.
pub const UNITARY_TOL: f64 = 1e-10;

/// Default angular distance an eigenvalue must keep from `-1` for the
/// principal logarithm.
pub const BRANCH_GUARD: f64 = 1e-6;

/// Default truncation order of the frame-change series.
pub const BCH_DEFAULT_ORDER: usize = 20;

/// Hermiticity defect of the raw finite-difference estimate above which a
/// grid is flagged as too coarse.
pub const COARSE_GRID_DEFECT: f64 = 1e-4;

const REUNITARIZE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    n: usize,
    m: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = linalg::qubits_of(&m)?;
        let deviation = linalg::unitarity_defect(&m);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(UnitaryMatrix { n, m })
    }

    /// Wraps a matrix the caller knows to be unitary.
    pub(crate) fn from_trusted(n: usize, m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), 1 << n);
        UnitaryMatrix { n, m }
    }

    pub fn identity(n: usize) -> Self {
        let d = 1usize << n;
        UnitaryMatrix {
            n,
            m: CMatrix::identity(d, d),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dagger(&self) -> UnitaryMatrix {
        UnitaryMatrix {
            n: self.n,
            m: self.m.adjoint(),
        }
    }

    pub fn mul(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix {
            n: self.n,
            m: &self.m * &other.m,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.m.clone().determinant()
    }

    pub fn is_special(&self, tol: f64) -> bool {
        (self.determinant() - c(1.0, 0.0)).norm() < tol
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.m)
    }

    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        linalg::max_abs_diff(&self.m, &other.m)
    }
}

/// A sampled curve `lambda -> U(lambda)`.
#[derive(Clone, Debug)]
pub struct UnitaryCurve {
    grid: Vec<f64>,
    points: Vec<UnitaryMatrix>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePointRecord {
    pub lambda: f64,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

impl UnitaryCurve {
    pub fn new(grid: Vec<f64>, points: Vec<UnitaryMatrix>) -> Result<Self> {
        if grid.len() != points.len() {
            return Err(Error::BadGrid(format!(
                "{} grid values for {} points",
                grid.len(),
                points.len()
            )));
        }
        if grid.len() < 2 {
            return Err(Error::BadGrid("a curve needs at least two points".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadGrid("grid must be strictly increasing".into()));
        }
        let n = points[0].n();
        if let Some(p) = points.iter().find(|p| p.n() != n) {
            return Err(Error::QubitMismatch {
                left: n,
                right: p.n(),
            });
        }
        Ok(UnitaryCurve { grid, points })
    }

    /// Samples `f` on a uniform grid of `m + 1` points over `[a, b]`.
    pub fn sample(a: f64, b: f64, m: usize, f: impl Fn(f64) -> Result<UnitaryMatrix>) -> Result<Self> {
        if m == 0 {
            return Err(Error::BadGrid("grid size must be positive".into()));
        }
        let grid = uniform_grid(a, b, m);
        let points = grid.iter().map(|&l| f(l)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, points)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn points(&self) -> &[UnitaryMatrix] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    pub fn endpoint(&self) -> &UnitaryMatrix {
        self.points.last().expect("curve has points")
    }

    pub fn is_identity_anchored(&self, tol: f64) -> bool {
        self.grid[0] == 0.0 && self.points[0].max_abs_diff(&UnitaryMatrix::identity(self.n())) < tol
    }

    /// Right-translates every point: `U(lambda) W`.
    pub fn right_translate(&self, w: &UnitaryMatrix) -> UnitaryCurve {
        UnitaryCurve {
            grid: self.grid.clone(),
            points: self.points.iter().map(|p| p.mul(w)).collect(),
        }
    }

    pub fn to_records(&self) -> Vec<CurvePointRecord> {
        self.grid
            .iter()
            .zip(&self.points)
            .map(|(&lambda, u)| {
                let m = u.matrix();
                let d = m.nrows();
                let entries = (0..d)
                    .flat_map(|r| (0..d).map(move |col| (r, col)))
                    .map(|(r, col)| [m[(r, col)].re, m[(r, col)].im])
                    .collect();
                CurvePointRecord { lambda, entries }
            })
            .collect()
    }
}

pub fn uniform_grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..=m)
        .map(|j| if j == m { b } else { a + (b - a) * j as f64 / m as f64 })
        .collect()
}

/// `exp(-i t H)` for `H = r·sigma`.
pub fn su_exp(h: &HermitianCoeffs, t: f64) -> Result<UnitaryMatrix> {
    let dense = h.to_dense()?;
    Ok(UnitaryMatrix::from_trusted(
        h.n(),
        linalg::expm_hermitian(&dense, t),
    ))
}

/// Dense Hermitian `H` with eigenphases in `(-pi, pi)` and `U = exp(-i H)`.
pub fn principal_log_dense(u: &UnitaryMatrix, guard: f64) -> Result<CMatrix> {
    let (phases, q) = linalg::unitary_eigen(u.matrix());
    let d = u.dim();
    let mut diag = CMatrix::zeros(d, d);
    for (i, &alpha) in phases.iter().enumerate() {
        if std::f64::consts::PI - alpha.abs() < guard {
            return Err(Error::BranchViolation { phase: alpha, guard });
        }
        diag[(i, i)] = c(-alpha, 0.0);
    }
    Ok(linalg::hermitian_part(&(&q * diag * q.adjoint())))
}

/// Principal logarithm in Pauli coefficients.
pub fn su_log(u: &UnitaryMatrix) -> Result<HermitianCoeffs> {
    su_log_with_guard(u, BRANCH_GUARD)
}

pub fn su_log_with_guard(u: &UnitaryMatrix, guard: f64) -> Result<HermitianCoeffs> {
    let h = principal_log_dense(u, guard)?;
    decompose_hermitian_with_tol(&h, 1e-8)
}

/// Pauli coordinates `q` with `V = exp(-i q·sigma)`.
pub fn pauli_chart(v: &UnitaryMatrix) -> Result<HermitianCoeffs> {
    su_log(v)
}

/// `U`-adapted coordinates `r` with `V = exp(-i r·sigma) U`.
pub fn u_adapted_chart(anchor: &UnitaryMatrix, v: &UnitaryMatrix) -> Result<HermitianCoeffs> {
    if anchor.n() != v.n() {
        return Err(Error::QubitMismatch {
            left: anchor.n(),
            right: v.n(),
        });
    }
    su_log(&v.mul(&anchor.dagger()))
}

/// Derivative weights of the quadratic through `nodes` evaluated at `t`.
fn lagrange_derivative_weights(nodes: [f64; 3], t: f64) -> [f64; 3] {
    let [a, b, cc] = nodes;
    [
        (2.0 * t - b - cc) / ((a - b) * (a - cc)),
        (2.0 * t - a - cc) / ((b - a) * (b - cc)),
        (2.0 * t - a - b) / ((cc - a) * (cc - b)),
    ]
}

/// Finite-difference estimate of `i U' U^dagger` at grid position `index`,
/// Hermitian-symmetrized and with the identity component removed.
///
/// Uses the three-point Lagrange derivative (centred in the interior,
/// one-sided at the ends) so the error is `O(dlambda^2)` everywhere.
pub fn curve_hamiltonian(curve: &UnitaryCurve, index: usize) -> Result<HermitianCoeffs> {
    let m = curve.len();
    if index >= m {
        return Err(Error::BadGrid(format!("index {index} outside curve of {m} points")));
    }
    let g = curve.grid();
    let p = curve.points();
    let deriv: CMatrix = if m == 2 {
        (p[1].matrix() - p[0].matrix()) * c(1.0 / (g[1] - g[0]), 0.0)
    } else {
        let start = index.saturating_sub(1).min(m - 3);
        let nodes = [g[start], g[start + 1], g[start + 2]];
        let w = lagrange_derivative_weights(nodes, g[index]);
        p[start].matrix() * c(w[0], 0.0)
            + p[start + 1].matrix() * c(w[1], 0.0)
            + p[start + 2].matrix() * c(w[2], 0.0)
    };
    let a = deriv * p[index].matrix().adjoint() * linalg::I;
    let defect = hermiticity_defect(&a) / 2.0;
    if defect > COARSE_GRID_DEFECT {
        return Err(Error::CoarseGrid { defect, index });
    }
    Ok(decompose_hermitian_with_tol(&linalg::hermitian_part(&a), f64::INFINITY)?.traceless_part())
}

pub fn curve_hamiltonians(curve: &UnitaryCurve) -> Result<Vec<HermitianCoeffs>> {
    (0..curve.len()).map(|j| curve_hamiltonian(curve, j)).collect()
}

/// One-step rule for [`dyson_propagate_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stepper {
    /// `exp(-i h H(lambda + h/2))`, second order.
    Midpoint,
    /// Two-exponential commutator-free scheme on Gauss nodes, fourth order.
    CommutatorFree4,
}

/// Time-ordered exponential of `schedule` on `grid`, fourth order.
pub fn dyson_propagate<F>(schedule: F, grid: &[f64]) -> Result<UnitaryCurve>
where
    F: Fn(f64) -> Result<HermitianCoeffs>,
{
    dyson_propagate_with(schedule, grid, Stepper::CommutatorFree4)
}

pub fn dyson_propagate_with<F>(schedule: F, grid: &[f64], stepper: Stepper) -> Result<UnitaryCurve>
where
    F: Fn(f64) -> Result<HermitianCoeffs>,
{
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::BadGrid("propagation grid must start at 0".into()));
    }
    let n = schedule(0.0)?.n();
    let mut u = UnitaryMatrix::identity(n);
    let mut points = vec![u.clone()];
    let sqrt3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - sqrt3 / 6.0, 0.5 + sqrt3 / 6.0);
    let (a1, a2) = (0.25 + sqrt3 / 6.0, 0.25 - sqrt3 / 6.0);
    for w in grid.windows(2) {
        let (l0, h) = (w[0], w[1] - w[0]);
        if !(h > 0.0) {
            return Err(Error::BadGrid("grid must be strictly increasing".into()));
        }
        let step = match stepper {
            Stepper::Midpoint => {
                let hm = schedule(l0 + 0.5 * h)?;
                su_exp(&hm, h)?.into_matrix()
            }
            Stepper::CommutatorFree4 => {
                let h1 = schedule(l0 + c1 * h)?;
                let h2 = schedule(l0 + c2 * h)?;
                let first = h1.scaled(a2).axpy(a1, &h2);
                let second = h1.scaled(a1).axpy(a2, &h2);
                su_exp(&first, h)?.into_matrix() * su_exp(&second, h)?.into_matrix()
            }
        };
        let mut next = step * u.matrix();
        if linalg::unitarity_defect(&next) > REUNITARIZE_TOL {
            next = linalg::polar_unitary(&next);
        }
        u = UnitaryMatrix::from_trusted(n, next);
        points.push(u.clone());
    }
    UnitaryCurve::new(grid.to_vec(), points)
}

/// Frame-change series `H = sum_k (-i)^k / (k+1)! ad_Q^k(Qdot)` through
/// `k = order`, evaluated in the Pauli-string algebra.
///
/// `(-i)^k ad_Q^k` is the `k`-th power of the Hermitian map
/// `B -> -i[Q, B]`, so every partial sum has real coefficients.
pub fn bch_hamiltonian(q: &HermitianCoeffs, qdot: &HermitianCoeffs, order: usize) -> Result<HermitianCoeffs> {
    q.check_same_n(qdot)?;
    let mut term = qdot.clone();
    let mut sum = qdot.clone();
    let mut factorial = 1.0;
    for k in 1..=order {
        term = q.lie_bracket(&term);
        if term.is_empty() {
            break;
        }
        factorial *= (k + 1) as f64;
        sum = sum.axpy(1.0 / factorial, &term);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;
    use std::f64::consts::PI;

    fn h(terms: &[(&str, f64)]) -> HermitianCoeffs {
        HermitianCoeffs::from_text_terms(terms).unwrap()
    }

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn exp_examples() {
        let x = h(&[("XY", 0.3), ("ZZ", -1.2)]);
        let u0 = su_exp(&x, 0.0).unwrap();
        assert!(u0.max_abs_diff(&UnitaryMatrix::identity(2)) < 1e-15);
        let uz = su_exp(&h(&[("Z", 1.0)]), PI / 2.0).unwrap();
        assert!((uz.matrix()[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((uz.matrix()[(1, 1)] - c(0.0, 1.0)).norm() < 1e-15);
        let prod = su_exp(&x, 0.7).unwrap().mul(&su_exp(&x, -0.7).unwrap());
        assert!(prod.max_abs_diff(&UnitaryMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn log_examples() {
        let id = su_log(&UnitaryMatrix::identity(2)).unwrap();
        assert!(id.is_empty());
        let u = su_exp(&h(&[("X", PI / 4.0)]), 1.0).unwrap();
        let back = su_log(&u).unwrap();
        assert!((back.get(&p("X")) - PI / 4.0).abs() < 1e-10);
        assert!(back.axpy(-1.0, &h(&[("X", PI / 4.0)])).max_abs() < 1e-10);
        let minus = su_exp(&h(&[("Z", PI)]), 1.0).unwrap();
        assert!(matches!(su_log(&minus), Err(Error::BranchViolation { .. })));
    }

    #[test]
    fn chart_examples() {
        assert!(pauli_chart(&UnitaryMatrix::identity(1)).unwrap().is_empty());
        let v = su_exp(&h(&[("X", PI / 8.0)]), 1.0).unwrap();
        let q = pauli_chart(&v).unwrap();
        assert!((q.get(&p("X")) - PI / 8.0).abs() < 1e-12);
        assert_eq!(q.len(), 1);

        let anchor = su_exp(&h(&[("XY", 0.4), ("ZI", 0.9)]), 1.0).unwrap();
        assert!(u_adapted_chart(&anchor, &anchor).unwrap().max_abs() < 1e-12);
        let v = su_exp(&h(&[("IZ", 0.3)]), 1.0).unwrap().mul(&anchor);
        let r = u_adapted_chart(&anchor, &v).unwrap();
        assert!((r.get(&p("IZ")) - 0.3).abs() < 1e-12);
        assert!(r.axpy(-1.0, &h(&[("IZ", 0.3)])).max_abs() < 1e-12);
        let w = su_exp(&h(&[("XX", 0.2)]), 1.0).unwrap();
        let a = u_adapted_chart(&UnitaryMatrix::identity(2), &w).unwrap();
        assert!(a.axpy(-1.0, &pauli_chart(&w).unwrap()).max_abs() < 1e-15);
    }

    #[test]
    fn curve_hamiltonian_examples() {
        let fixed = su_exp(&h(&[("XZ", 0.5)]), 1.0).unwrap();
        let curve = UnitaryCurve::sample(0.0, 1.0, 10, |_| Ok(fixed.clone())).unwrap();
        for j in 0..curve.len() {
            assert!(curve_hamiltonian(&curve, j).unwrap().max_abs() < 1e-12);
        }

        let h0 = h(&[("XZ", 0.5), ("YY", -0.3)]);
        let err = |m: usize| -> f64 {
            let curve = UnitaryCurve::sample(0.0, 1.0, m, |l| su_exp(&h0, l)).unwrap();
            (0..curve.len())
                .map(|j| curve_hamiltonian(&curve, j).unwrap().axpy(-1.0, &h0).max_abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(50), err(100));
        assert!(e1 < 1e-3);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn coarse_grid_flagged() {
        let h0 = h(&[("X", 3.0), ("Z", 2.0)]);
        let curve = UnitaryCurve::sample(0.0, 1.0, 2, |l| su_exp(&h0, l)).unwrap();
        assert!(matches!(
            curve_hamiltonian(&curve, 0),
            Err(Error::CoarseGrid { .. })
        ));
    }

    #[test]
    fn curve_rejects_bad_grid() {
        let id = UnitaryMatrix::identity(1);
        assert!(UnitaryCurve::new(vec![0.0, 0.0], vec![id.clone(), id.clone()]).is_err());
        assert!(UnitaryCurve::new(vec![0.0], vec![id]).is_err());
    }

    #[test]
    fn bch_examples() {
        let (a, b) = (0.3, 0.7);
        let q = h(&[("Z", a)]);
        let qdot = h(&[("X", b)]);
        let h1 = bch_hamiltonian(&q, &qdot, 1).unwrap();
        assert!((h1.get(&p("X")) - b).abs() < 1e-15);
        assert!((h1.get(&p("Y")) - a * b).abs() < 1e-15);
        assert_eq!(h1.len(), 2);

        let q = h(&[("ZZ", 0.4), ("XX", -0.2)]);
        let qdot = h(&[("ZZ", 1.0), ("YY", 0.5)]);
        for order in [0, 1, 5, 20] {
            assert_eq!(bch_hamiltonian(&q, &qdot, order).unwrap(), qdot);
        }
    }

    #[test]
    fn dyson_constant_schedule() {
        let h0 = h(&[("XY", 0.6), ("ZI", -0.4)]);
        let grid = uniform_grid(0.0, 2.0, 40);
        let curve = dyson_propagate(|_| Ok(h0.clone()), &grid).unwrap();
        for (l, u) in curve.grid().iter().zip(curve.points()) {
            assert!(u.max_abs_diff(&su_exp(&h0, *l).unwrap()) < 1e-8);
        }
    }
}
