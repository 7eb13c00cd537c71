//! Layered ansätze, their loss landscapes and the variance of the loss.
//!
//! An ansatz with generators `H_1, ..., H_m` and `L` layers is
//!
//! ```text
//! U(theta) = prod_{l=1..L} prod_{j=1..m} exp(i theta_l^j H_j)
//! ```
//!
//! with factors multiplied left to right in that order and each angle drawn
//! uniformly from `[0, tau_j)`, `tau_j` the fundamental period of `H_j`.
//! The loss is `Tr[U rho U^dagger O]`.
//!
//! When every generator is a single Pauli string (plus an optional multiple
//! of the identity) the loss is evaluated by pushing `O` through the circuit
//! in the Pauli basis, which is exact up to rounding and keeps conserved
//! quantities exactly conserved. Otherwise dense matrices are used.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lie::{self, IdealDecomposition, SubBasis};
use crate::linalg::{self, c, CMatrix};
use crate::pauli::{hermiticity_defect, HermitianCoeffs, PauliString};
use crate::sampling::{HaarGroup, RngStream};
use crate::stats::{self, Moments};
use crate::unitary::UnitaryMatrix;

pub const MIN_SAMPLES: usize = 100;

/// Tolerance on `exp(-i tau H) = I` for a resolved period.
pub const PERIOD_TOL: f64 = 1e-8;

/// Relative tolerance when reading eigenvalue ratios as fractions.
pub const COMMENSURATE_TOL: f64 = 1e-9;

pub const MAX_DENOMINATOR: i64 = 64;

/// Trace and positivity tolerance for density matrices; also the
/// Hermiticity tolerance for observables.
pub const DENSITY_TOL: f64 = 1e-10;

pub const LOSS_IMAG_TOL: f64 = 1e-8;

/// Projection residual below which `rho` or `O` counts as lying in the
/// algebra.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

/// Largest `2^(nk)` accepted by [`moment_operator`].
pub const MOMENT_DIM_LIMIT: usize = 4096;

/// Largest `4^n` accepted by [`two_design_distance`].
pub const TWO_DESIGN_DIM_LIMIT: usize = 256;

/// Reference depth multiplier when the group is sampled by long products.
pub const REFERENCE_DEPTH_FACTOR: usize = 4;

/// Qubit limit for the Pauli-basis loss evaluator.
const PAULI_PATH_QUBITS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Period {
    Auto,
    Fixed(f64),
}

fn small_fraction(r: f64) -> Option<(i64, i64)> {
    (1..=MAX_DENOMINATOR).find_map(|q| {
        let p = (r * q as f64).round();
        ((r - p / q as f64).abs() <= COMMENSURATE_TOL * r.abs().max(1.0)).then_some((p as i64, q))
    })
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `tau > 0` with `exp(-i tau H) = I`.
///
/// The eigenvalues are read as rational multiples of the largest one
/// (denominators up to 64); the period is `2 pi / u` for the largest `u`
/// dividing every eigenvalue.
pub fn fundamental_period(h: &HermitianCoeffs) -> Result<f64> {
    if h.max_abs() == 0.0 {
        return Err(Error::ZeroGenerator);
    }
    let dense = h.to_dense()?;
    let (vals, _) = linalg::hermitian_eigen(&dense);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut fracs = Vec::with_capacity(vals.len());
    let mut lcm: i128 = 1;
    for v in &vals {
        let (p, q) = small_fraction(v / top).ok_or(Error::Incommensurate)?;
        lcm = lcm / gcd(lcm, q as i128) * q as i128;
        fracs.push((p as i128, q as i128));
    }
    let g = fracs.iter().fold(0i128, |g, &(p, q)| gcd(g, p * (lcm / q)));
    let tau = 2.0 * std::f64::consts::PI / (top * g as f64 / lcm as f64);
    let u = linalg::expm_hermitian(&dense, tau);
    if linalg::max_abs_diff(&u, &CMatrix::identity(u.nrows(), u.ncols())) >= PERIOD_TOL {
        return Err(Error::Incommensurate);
    }
    Ok(tau)
}

/// Layered ansatz with resolved periods.
#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzSpec {
    n: usize,
    generators: Vec<HermitianCoeffs>,
    layers: usize,
    periods: Vec<f64>,
}

impl AnsatzSpec {
    pub fn new(generators: Vec<HermitianCoeffs>, layers: usize, periods: &[Period]) -> Result<Self> {
        let n = generators.first().ok_or(Error::NoGenerators)?.n();
        for g in &generators {
            g.check_same_n(&generators[0])?;
        }
        if layers == 0 {
            return Err(Error::Invalid("an ansatz needs at least one layer".into()));
        }
        if periods.len() != generators.len() {
            return Err(Error::DimensionMismatch {
                expected: generators.len(),
                got: periods.len(),
            });
        }
        let periods = generators
            .iter()
            .zip(periods)
            .map(|(g, p)| match *p {
                Period::Auto => fundamental_period(g),
                Period::Fixed(t) if t > 0.0 && t.is_finite() => Ok(t),
                Period::Fixed(t) => Err(Error::BadPeriod(t)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AnsatzSpec {
            n,
            generators,
            layers,
            periods,
        })
    }

    pub fn with_auto_periods(generators: Vec<HermitianCoeffs>, layers: usize) -> Result<Self> {
        let auto = vec![Period::Auto; generators.len()];
        Self::new(generators, layers, &auto)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[HermitianCoeffs] {
        &self.generators
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn parameter_count(&self) -> usize {
        self.layers * self.generators.len()
    }

    /// Same generators and periods, different depth.
    pub fn with_layers(&self, layers: usize) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Invalid("an ansatz needs at least one layer".into()));
        }
        Ok(AnsatzSpec {
            layers,
            ..self.clone()
        })
    }

    fn sample_flat<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        for _ in 0..self.layers {
            for &tau in &self.periods {
                out.push(rng.random_range(0.0..tau));
            }
        }
    }
}

/// `theta[l][j]`, each uniform on `[0, tau_j)`, drawn layer by layer.
pub fn sample_parameters(ansatz: &AnsatzSpec, stream: &RngStream) -> Vec<Vec<f64>> {
    let mut flat = Vec::with_capacity(ansatz.parameter_count());
    ansatz.sample_flat(&mut stream.rng(), &mut flat);
    flat.chunks(ansatz.generators.len()).map(<[f64]>::to_vec).collect()
}

/// One factor `exp(i theta H)`.
enum Factor {
    /// `H = a I + b P`: `exp(i theta H) = e^{i theta a} (cos(theta b) I + i sin(theta b) P)`.
    /// `columns[c]` holds the single nonzero `(row, value)` of column `c` of `P`.
    Pauli {
        shift: f64,
        coeff: f64,
        columns: Vec<(usize, Complex64)>,
    },
    Eigen {
        vals: Vec<f64>,
        vecs: CMatrix,
    },
}

impl Factor {
    fn new(h: &HermitianCoeffs) -> Result<Self> {
        let strings: Vec<(PauliString, f64)> = h
            .iter()
            .filter(|(p, _)| !p.is_identity())
            .map(|(p, c)| (*p, *c))
            .collect();
        if strings.len() == 1 {
            let (p, coeff) = strings[0];
            let mut columns = vec![(0, c(0.0, 0.0)); 1 << h.n()];
            p.for_each_entry(|r, col, v| columns[col] = (r, v));
            return Ok(Factor::Pauli {
                shift: h.identity_component(),
                coeff,
                columns,
            });
        }
        let (vals, vecs) = linalg::hermitian_eigen(&h.to_dense()?);
        Ok(Factor::Eigen { vals, vecs })
    }

    /// `u <- u exp(i theta H)`.
    fn apply_right(&self, u: &mut CMatrix, theta: f64) {
        match self {
            Factor::Pauli {
                shift,
                coeff,
                columns,
            } => {
                let (s, co) = (theta * coeff).sin_cos();
                let phase = Complex64::from_polar(1.0, theta * shift);
                let old = u.clone();
                for (col, &(r, v)) in columns.iter().enumerate() {
                    let w = c(0.0, s) * v;
                    for i in 0..u.nrows() {
                        u[(i, col)] = phase * (old[(i, col)] * co + old[(i, r)] * w);
                    }
                }
            }
            Factor::Eigen { vals, vecs } => {
                let mut scaled = vecs.clone();
                for (j, &l) in vals.iter().enumerate() {
                    let f = Complex64::from_polar(1.0, theta * l);
                    for r in 0..scaled.nrows() {
                        scaled[(r, j)] *= f;
                    }
                }
                *u = &*u * scaled * vecs.adjoint();
            }
        }
    }
}

struct Circuit {
    n: usize,
    factors: Vec<Factor>,
}

impl Circuit {
    fn new(ansatz: &AnsatzSpec) -> Result<Self> {
        Ok(Circuit {
            n: ansatz.n,
            factors: ansatz.generators.iter().map(Factor::new).collect::<Result<_>>()?,
        })
    }

    fn unitary(&self, flat: &[f64]) -> CMatrix {
        let d = 1usize << self.n;
        let mut u = CMatrix::identity(d, d);
        for (k, &theta) in flat.iter().enumerate() {
            self.factors[k % self.factors.len()].apply_right(&mut u, theta);
        }
        u
    }
}

/// Ordered product of the layer factors.
pub fn build_unitary(ansatz: &AnsatzSpec, theta: &[Vec<f64>]) -> Result<UnitaryMatrix> {
    if theta.len() != ansatz.layers {
        return Err(Error::DimensionMismatch {
            expected: ansatz.layers,
            got: theta.len(),
        });
    }
    let m = ansatz.generators.len();
    if let Some(bad) = theta.iter().find(|t| t.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: bad.len(),
        });
    }
    let flat: Vec<f64> = theta.iter().flatten().copied().collect();
    UnitaryMatrix::new(Circuit::new(ansatz)?.unitary(&flat))
}

/// Validated `(rho, O)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTask {
    n: usize,
    rho: CMatrix,
    observable: CMatrix,
    rho_coeffs: HermitianCoeffs,
    observable_coeffs: HermitianCoeffs,
}

impl LossTask {
    pub fn new(rho: CMatrix, observable: CMatrix) -> Result<Self> {
        let coeffs = crate::pauli::decompose_hermitian_with_tol(&observable, DENSITY_TOL)?;
        Self::build(rho, observable, coeffs)
    }

    pub fn with_pauli_observable(rho: CMatrix, observable: &HermitianCoeffs) -> Result<Self> {
        Self::build(rho, observable.to_dense()?, observable.clone())
    }

    /// `rho = |0...0><0...0|`.
    pub fn computational_zero(observable: &HermitianCoeffs) -> Result<Self> {
        let d = 1usize << observable.n();
        let mut rho = CMatrix::zeros(d, d);
        rho[(0, 0)] = c(1.0, 0.0);
        Self::with_pauli_observable(rho, observable)
    }

    fn build(rho: CMatrix, observable: CMatrix, observable_coeffs: HermitianCoeffs) -> Result<Self> {
        let n = linalg::qubits_of(&rho)?;
        let no = linalg::qubits_of(&observable)?;
        if n != no {
            return Err(Error::QubitMismatch { left: n, right: no });
        }
        let deviation = hermiticity_defect(&rho);
        if deviation > DENSITY_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = linalg::trace(&rho);
        if (tr - c(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::BadDensity(format!("trace {tr} differs from 1")));
        }
        let (vals, _) = linalg::hermitian_eigen(&rho);
        if vals[0] < -DENSITY_TOL {
            return Err(Error::BadDensity(format!("negative eigenvalue {:e}", vals[0])));
        }
        let rho_coeffs = crate::pauli::decompose_hermitian_with_tol(&rho, DENSITY_TOL)?;
        Ok(LossTask {
            n,
            rho,
            observable,
            rho_coeffs,
            observable_coeffs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn observable(&self) -> &CMatrix {
        &self.observable
    }

    pub fn rho_coeffs(&self) -> &HermitianCoeffs {
        &self.rho_coeffs
    }

    pub fn observable_coeffs(&self) -> &HermitianCoeffs {
        &self.observable_coeffs
    }
}

/// `Tr[U rho U^dagger O]`.
pub fn loss(u: &UnitaryMatrix, task: &LossTask) -> Result<f64> {
    if u.n() != task.n {
        return Err(Error::QubitMismatch {
            left: u.n(),
            right: task.n,
        });
    }
    let m = u.matrix();
    let v = linalg::trace(&(m * &task.rho * m.adjoint() * &task.observable));
    if v.im.abs() > LOSS_IMAG_TOL {
        return Err(Error::ComplexLoss(v.im));
    }
    Ok(v.re)
}

fn key_of(p: &PauliString) -> usize {
    (p.x_mask() | (p.z_mask() << p.n())) as usize
}

/// Loss evaluation in the Heisenberg picture on Pauli coefficients,
/// indexed by `x | z << n`.
struct PauliEvaluator {
    n: usize,
    /// `(key, coefficient)` of the non-identity string of each generator.
    gens: Vec<(usize, f64)>,
    observable: Vec<f64>,
    /// `Tr(rho P)` per key.
    rho_traces: Vec<f64>,
}

impl PauliEvaluator {
    fn new(ansatz: &AnsatzSpec, task: &LossTask) -> Result<Option<Self>> {
        let n = ansatz.n;
        if n > PAULI_PATH_QUBITS {
            return Ok(None);
        }
        let mut gens = Vec::new();
        for g in &ansatz.generators {
            let terms: Vec<_> = g.iter().filter(|(p, _)| !p.is_identity()).collect();
            match terms.as_slice() {
                [] => gens.push((0, 0.0)),
                [(p, c)] => gens.push((key_of(p), **c)),
                _ => return Ok(None),
            }
        }
        let size = 1usize << (2 * n);
        let mut observable = vec![0.0; size];
        for (p, c) in task.observable_coeffs.iter() {
            observable[key_of(p)] = *c;
        }
        let mut rho_traces = vec![0.0; size];
        for k in 0..(1u64 << (2 * n)) {
            let p = PauliString::from_index(k, n)?;
            let mut tr = c(0.0, 0.0);
            p.for_each_entry(|r, col, v| tr += task.rho[(col, r)] * v);
            rho_traces[key_of(&p)] = tr.re;
        }
        Ok(Some(PauliEvaluator {
            n,
            gens,
            observable,
            rho_traces,
        }))
    }

    fn loss(&self, flat: &[f64], buf: &mut Vec<f64>) -> f64 {
        buf.clear();
        buf.extend_from_slice(&self.observable);
        let n = self.n;
        let low = (1usize << n) - 1;
        let ycount = |k: usize| ((k & low) & (k >> n)).count_ones();
        // G^dagger O G for G = exp(i phi P): strings anticommuting with P
        // pair up as (Q, PQ) and rotate by 2 phi.
        for (idx, &theta) in flat.iter().enumerate() {
            let (gk, coeff) = self.gens[idx % self.gens.len()];
            if gk == 0 || coeff == 0.0 {
                continue;
            }
            let (s, co) = (2.0 * theta * coeff).sin_cos();
            let (gx, gz) = (gk & low, gk >> n);
            for q in 0..buf.len() {
                let r = q ^ gk;
                if r < q {
                    continue;
                }
                let (qx, qz) = (q & low, q >> n);
                if ((gx & qz).count_ones() + (gz & qx).count_ones()) % 2 == 0 {
                    continue;
                }
                let (cq, cr) = (buf[q], buf[r]);
                if cq == 0.0 && cr == 0.0 {
                    continue;
                }
                // P Q = i^e R; the rotated coefficient of R is -i * i^e * sin.
                let e = (ycount(gk) + ycount(q) + 2 * (gz & qx).count_ones() + 4 * 64 - ycount(r)) % 4;
                let sq = if e == 1 { s } else { -s };
                buf[q] = co * cq - sq * cr;
                buf[r] = co * cr + sq * cq;
            }
        }
        buf.iter().zip(&self.rho_traces).map(|(a, b)| a * b).sum()
    }
}

enum Evaluator {
    Pauli(PauliEvaluator),
    Dense(Circuit),
    Constant(f64),
}

impl Evaluator {
    fn new(ansatz: &AnsatzSpec, task: &LossTask) -> Result<Self> {
        if ansatz.n != task.n {
            return Err(Error::QubitMismatch {
                left: ansatz.n,
                right: task.n,
            });
        }
        if task.observable_coeffs.traceless_part().is_empty() {
            return Ok(Evaluator::Constant(
                task.observable_coeffs.identity_component() * linalg::trace(&task.rho).re,
            ));
        }
        if let Some(p) = PauliEvaluator::new(ansatz, task)? {
            return Ok(Evaluator::Pauli(p));
        }
        Ok(Evaluator::Dense(Circuit::new(ansatz)?))
    }

    fn name(&self) -> &'static str {
        match self {
            Evaluator::Pauli(_) => "pauli-heisenberg",
            Evaluator::Dense(_) => "dense",
            Evaluator::Constant(_) => "constant",
        }
    }

    fn loss(&self, flat: &[f64], task: &LossTask, buf: &mut Vec<f64>) -> f64 {
        match self {
            Evaluator::Pauli(p) => p.loss(flat, buf),
            Evaluator::Dense(circ) => {
                let u = circ.unitary(flat);
                linalg::trace(&(&u * &task.rho * u.adjoint() * &task.observable)).re
            }
            Evaluator::Constant(v) => *v,
        }
    }
}

/// Serialized as the string `"unchecked"` or as the measured report.
#[derive(Clone, Debug, PartialEq)]
pub enum TwoDesignStatus {
    Unchecked,
    Measured(TwoDesignReport),
}

impl Serialize for TwoDesignStatus {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TwoDesignStatus::Unchecked => s.serialize_str("unchecked"),
            TwoDesignStatus::Measured(r) => r.serialize(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdealPurity {
    pub dim: usize,
    pub rho_purity: f64,
    pub observable_purity: f64,
    /// `rho_purity * observable_purity / dim`.
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryReport {
    /// Sum of the simple-ideal contributions. Valid when the ensemble is a
    /// 2-design over the group generated by the algebra and `rho` or `O`
    /// lies in the algebra.
    pub variance: f64,
    pub assumes_two_design: bool,
    pub ideals: Vec<IdealPurity>,
    pub center_dim: usize,
    pub center_rho_purity: f64,
    pub center_observable_purity: f64,
    /// Norm of the traceless part of `rho` outside the algebra.
    pub rho_residual: f64,
    pub observable_residual: f64,
    pub rho_in_algebra: bool,
    pub observable_in_algebra: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub n: usize,
    pub layers: usize,
    pub samples: usize,
    pub seed: u64,
    pub evaluator: &'static str,
    pub mean: f64,
    pub variance: f64,
    pub variance_std_error: f64,
    pub theory: Option<TheoryReport>,
    pub two_design: TwoDesignStatus,
}

impl VarianceReport {
    /// `|empirical - theoretical|`, when the theory is attached.
    pub fn gap(&self) -> Option<f64> {
        self.theory.as_ref().map(|t| (self.variance - t.variance).abs())
    }
}

/// Per-sample losses `l_i`, `i < samples`, each from substream `i` of the
/// seed.
pub fn sample_losses(ansatz: &AnsatzSpec, task: &LossTask, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let eval = Evaluator::new(ansatz, task)?;
    let stream = RngStream::new(seed);
    use rayon::prelude::*;
    Ok((0..samples)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(flat, buf), i| {
                ansatz.sample_flat(&mut stream.substream(i as u64).rng(), flat);
                eval.loss(flat, task, buf)
            },
        )
        .collect())
}

/// Monte Carlo mean and variance of the loss over the layer torus.
pub fn estimate_variance(ansatz: &AnsatzSpec, task: &LossTask, samples: usize, seed: u64) -> Result<VarianceReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples,
            min: MIN_SAMPLES,
        });
    }
    let eval = Evaluator::new(ansatz, task)?;
    let stream = RngStream::new(seed);
    let m = stats::par_moments(samples, |i| {
        let mut flat = Vec::with_capacity(ansatz.parameter_count());
        ansatz.sample_flat(&mut stream.substream(i as u64).rng(), &mut flat);
        eval.loss(&flat, task, &mut Vec::new())
    });
    Ok(VarianceReport {
        n: ansatz.n,
        layers: ansatz.layers,
        samples,
        seed,
        evaluator: eval.name(),
        mean: m.mean(),
        variance: m.variance(),
        variance_std_error: m.variance_std_error(),
        theory: None,
        two_design: TwoDesignStatus::Unchecked,
    })
}

/// `sum_k P_k(rho) P_k(O) / dim(g_k)` over the simple ideals, with the purity
/// table and the residuals of `rho` and `O` outside the algebra.
pub fn theoretical_variance(dec: &IdealDecomposition, task: &LossTask) -> Result<TheoryReport> {
    let rho = task.rho_coeffs.traceless_part();
    let obs = task.observable_coeffs.traceless_part();
    let mut ideals = Vec::with_capacity(dec.simple_ideals.len());
    let mut variance = 0.0;
    let mut rho_in = lie::project_onto(&dec.center, &rho)?;
    let mut obs_in = lie::project_onto(&dec.center, &obs)?;
    for ideal in &dec.simple_ideals {
        let rp = lie::g_purity(ideal, &rho)?;
        let op = lie::g_purity(ideal, &obs)?;
        let contribution = rp * op / ideal.dim() as f64;
        variance += contribution;
        ideals.push(IdealPurity {
            dim: ideal.dim(),
            rho_purity: rp,
            observable_purity: op,
            contribution,
        });
        rho_in = rho_in.axpy(1.0, &lie::project_onto(ideal, &rho)?);
        obs_in = obs_in.axpy(1.0, &lie::project_onto(ideal, &obs)?);
    }
    let rho_residual = rho.axpy(-1.0, &rho_in).norm();
    let observable_residual = obs.axpy(-1.0, &obs_in).norm();
    Ok(TheoryReport {
        variance,
        assumes_two_design: true,
        ideals,
        center_dim: dec.center.dim(),
        center_rho_purity: lie::g_purity(&dec.center, &rho)?,
        center_observable_purity: lie::g_purity(&dec.center, &obs)?,
        rho_residual,
        observable_residual,
        rho_in_algebra: rho_residual < HYPOTHESIS_TOL,
        observable_in_algebra: observable_residual < HYPOTHESIS_TOL,
    })
}

/// Measure for [`moment_operator`].
#[derive(Clone, Copy, Debug)]
pub enum MomentSource<'a> {
    Ensemble(&'a AnsatzSpec),
    Haar { n: usize, group: HaarGroup },
}

impl MomentSource<'_> {
    fn n(&self) -> usize {
        match self {
            MomentSource::Ensemble(a) => a.n,
            MomentSource::Haar { n, .. } => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub samples: usize,
    pub mean: CMatrix,
    /// Per-entry standard error, real and imaginary parts combined.
    pub std_error: DMatrix<f64>,
}

impl MomentEstimate {
    fn from_moments(samples: usize, dim: usize, acc: &[Moments]) -> Self {
        let mean = DMatrix::from_fn(dim, dim, |r, col| {
            let k = 2 * (r * dim + col);
            c(acc[k].mean(), acc[k + 1].mean())
        });
        let std_error = DMatrix::from_fn(dim, dim, |r, col| {
            let k = 2 * (r * dim + col);
            acc[k].mean_std_error().hypot(acc[k + 1].mean_std_error())
        });
        MomentEstimate {
            samples,
            mean,
            std_error,
        }
    }

    /// Largest `|mean - target|` over entries, in units of the entry's
    /// standard error; infinite when a deviating entry has zero error.
    pub fn max_sigmas_from(&self, target: &CMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, (m, t)) in self.mean.iter().zip(target.iter()).enumerate() {
            let gap = (m - t).norm();
            let se = self.std_error[i];
            let s = if gap == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                gap / se
            };
            worst = worst.max(s);
        }
        worst
    }
}

struct MomentSampler<'a> {
    source: MomentSource<'a>,
    circuit: Option<Circuit>,
    k: usize,
    dim: usize,
}

impl<'a> MomentSampler<'a> {
    fn new(source: MomentSource<'a>, k: usize, m: &CMatrix, samples: usize) -> Result<Self> {
        if samples < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                got: samples,
                min: MIN_SAMPLES,
            });
        }
        if k == 0 {
            return Err(Error::Invalid("moment order must be positive".into()));
        }
        let n = source.n();
        if n == 0 || n * k > MOMENT_DIM_LIMIT.trailing_zeros() as usize {
            return Err(Error::SizeGuard {
                what: "moment operator",
                dim: 1usize.checked_shl((n * k) as u32).unwrap_or(usize::MAX),
                limit: MOMENT_DIM_LIMIT,
            });
        }
        let dim = 1usize << (n * k);
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.nrows(),
            });
        }
        let circuit = match source {
            MomentSource::Ensemble(a) => Some(Circuit::new(a)?),
            MomentSource::Haar { .. } => None,
        };
        Ok(MomentSampler {
            source,
            circuit,
            k,
            dim,
        })
    }

    fn unitary(&self, stream: &RngStream) -> CMatrix {
        match (&self.source, &self.circuit) {
            (MomentSource::Ensemble(a), Some(circ)) => {
                let mut flat = Vec::with_capacity(a.parameter_count());
                a.sample_flat(&mut stream.rng(), &mut flat);
                circ.unitary(&flat)
            }
            (MomentSource::Haar { n, group }, _) => group.sample(1 << n, stream),
            _ => unreachable!("ensemble sources always carry a circuit"),
        }
    }

    fn accumulate(&self, ms: &[&CMatrix], range: std::ops::Range<usize>, stream: &RngStream) -> Vec<Vec<Moments>> {
        let width = 2 * self.dim * self.dim;
        let all = stats::par_moments_many(range.len(), width * ms.len(), |i, out| {
            let u = self.unitary(&stream.substream((range.start + i) as u64));
            let uk = linalg::kron_power(&u, self.k);
            let ukd = uk.adjoint();
            for (slot, m) in ms.iter().enumerate() {
                let x = &uk * *m * &ukd;
                let base = slot * width;
                for r in 0..self.dim {
                    for col in 0..self.dim {
                        let v = x[(r, col)];
                        let k = base + 2 * (r * self.dim + col);
                        out[k] = v.re;
                        out[k + 1] = v.im;
                    }
                }
            }
        });
        all.chunks(width).map(<[Moments]>::to_vec).collect()
    }
}

fn is_scalar_matrix(m: &CMatrix) -> bool {
    let s = m[(0, 0)];
    m.iter()
        .enumerate()
        .all(|(i, v)| if i % (m.nrows() + 1) == 0 { *v == s } else { *v == c(0.0, 0.0) })
}

/// Monte Carlo estimate of `E[U^{⊗k} M (U^dagger)^{⊗k}]`.
///
/// Scalar `M` is returned unchanged with zero error, since conjugation fixes
/// it for every sample.
pub fn moment_operator(source: MomentSource<'_>, k: usize, m: &CMatrix, samples: usize, seed: u64) -> Result<MomentEstimate> {
    let sampler = MomentSampler::new(source, k, m, samples)?;
    if is_scalar_matrix(m) {
        return Ok(MomentEstimate {
            samples,
            mean: m.clone(),
            std_error: DMatrix::zeros(sampler.dim, sampler.dim),
        });
    }
    let acc = sampler.accumulate(&[m], 0..samples, &RngStream::new(seed));
    Ok(MomentEstimate::from_moments(samples, sampler.dim, &acc[0]))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwoDesignReport {
    pub samples: usize,
    /// Max over probes of the entrywise max deviation between the ensemble
    /// and reference second moments.
    pub distance: f64,
    /// Split-half estimate of the sampling noise of `distance`.
    pub noise_floor: f64,
    /// `"haar"` or `"long-product"`.
    pub reference: &'static str,
    pub reference_layers: Option<usize>,
}

/// `|0...0><0...0|^{⊗2}` on `2n` qubits.
pub fn zero_state_probe(n: usize) -> CMatrix {
    let d = 1usize << (2 * n);
    let mut m = CMatrix::zeros(d, d);
    m[(0, 0)] = c(1.0, 0.0);
    m
}

/// Second-moment distance between the ansatz ensemble and Haar measure on
/// the group its algebra generates.
///
/// The reference is direct Haar sampling on `SU(2^n)` when the closure is
/// the full special unitary algebra, and the same ansatz at four times the
/// depth otherwise. Both sides use `samples` draws from independent
/// substreams.
pub fn two_design_distance(ansatz: &AnsatzSpec, samples: usize, probes: &[CMatrix], seed: u64) -> Result<TwoDesignReport> {
    let n = ansatz.n;
    let dim = 1usize.checked_shl((2 * n) as u32).unwrap_or(usize::MAX);
    if dim > TWO_DESIGN_DIM_LIMIT {
        return Err(Error::SizeGuard {
            what: "two-design distance",
            dim,
            limit: TWO_DESIGN_DIM_LIMIT,
        });
    }
    if probes.is_empty() {
        return Err(Error::Invalid("no probes".into()));
    }
    let traceless: Vec<HermitianCoeffs> = ansatz
        .generators
        .iter()
        .map(HermitianCoeffs::traceless_part)
        .filter(|g| !g.is_empty())
        .collect();
    let full = !traceless.is_empty()
        && lie::lie_closure(&traceless, SubBasis::special_unitary(n)?.dim())?.is_full_special_unitary();
    let deep;
    let (reference, reference_layers, ref_source) = if full {
        (
            "haar",
            None,
            MomentSource::Haar {
                n,
                group: HaarGroup::SpecialUnitary,
            },
        )
    } else {
        deep = ansatz.with_layers(REFERENCE_DEPTH_FACTOR * ansatz.layers)?;
        ("long-product", Some(deep.layers), MomentSource::Ensemble(&deep))
    };
    let probe_refs: Vec<&CMatrix> = probes.iter().collect();
    let ens = MomentSampler::new(MomentSource::Ensemble(ansatz), 2, &probes[0], samples)?;
    let refs = MomentSampler::new(ref_source, 2, &probes[0], samples)?;
    for p in probes {
        if p.nrows() != dim || p.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.nrows(),
            });
        }
    }
    let root = RngStream::new(seed);
    let half = samples / 2;
    let halves = |s: &MomentSampler, stream: RngStream| {
        (
            s.accumulate(&probe_refs, 0..half, &stream),
            s.accumulate(&probe_refs, half..samples, &stream),
        )
    };
    let (e1, e2) = halves(&ens, root.substream(0));
    let (h1, h2) = halves(&refs, root.substream(1));
    let mean_of = |acc: &[Moments]| MomentEstimate::from_moments(0, dim, acc).mean;
    let mut distance: f64 = 0.0;
    let mut noise: f64 = 0.0;
    for p in 0..probes.len() {
        let merge = |a: &[Moments], b: &[Moments]| -> Vec<Moments> { a.iter().zip(b).map(|(x, y)| x.merge(y)).collect() };
        let e = mean_of(&merge(&e1[p], &e2[p]));
        let h = mean_of(&merge(&h1[p], &h2[p]));
        distance = distance.max(linalg::max_abs_diff(&e, &h));
        let de = linalg::max_abs_diff(&mean_of(&e1[p]), &mean_of(&e2[p]));
        let dh = linalg::max_abs_diff(&mean_of(&h1[p]), &mean_of(&h2[p]));
        noise = noise.max(0.5 * de.hypot(dh));
    }
    Ok(TwoDesignReport {
        samples,
        distance,
        noise_floor: noise,
        reference,
        reference_layers,
    })
}
