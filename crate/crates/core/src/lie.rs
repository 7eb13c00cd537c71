//! Dynamical Lie algebra closure, center, simple ideals and purities.
//!
//! Algebra elements are stored by their Hermitian representatives `H`
//! (the algebra element is `iH`) as Pauli coefficient vectors, orthonormal
//! under `<A, B> = Tr(AB) / 2^n`. The bracket used throughout is
//! `-i[A, B]`, the Hermitian representative of `[iA, iB]`.

use std::collections::{BTreeSet, VecDeque};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pauli::{HermitianCoeffs, PauliString};

/// Post-orthogonalization residual norm above which a candidate is admitted.
pub const ADMIT_TOL: f64 = 1e-8;

/// Relative singular-value cutoff for the center null space.
pub const NULL_TOL: f64 = 1e-8;

/// Tolerance for closure and commutation checks.
pub const CLOSURE_TOL: f64 = 1e-8;

const DECOMPOSITION_ATTEMPTS: usize = 5;

/// How a basis element entered the closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Generator(usize),
    Bracket(usize, usize),
}

/// An orthonormal list of algebra elements.
#[derive(Clone, Debug, PartialEq)]
pub struct SubBasis {
    n: usize,
    elements: Vec<HermitianCoeffs>,
}

impl SubBasis {
    pub fn new(n: usize, elements: Vec<HermitianCoeffs>) -> Result<Self> {
        if let Some(e) = elements.iter().find(|e| e.n() != n) {
            return Err(Error::QubitMismatch {
                left: n,
                right: e.n(),
            });
        }
        Ok(SubBasis { n, elements })
    }

    pub fn empty(n: usize) -> Self {
        SubBasis {
            n,
            elements: Vec::new(),
        }
    }

    /// All `4^n` Pauli strings, a basis of `u(2^n)`.
    pub fn full_unitary(n: usize) -> Result<Self> {
        Self::strings(n, 0)
    }

    /// The `4^n - 1` non-identity strings, a basis of `su(2^n)`.
    pub fn special_unitary(n: usize) -> Result<Self> {
        Self::strings(n, 1)
    }

    fn strings(n: usize, from: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::SizeGuard {
                what: "explicit Pauli basis",
                dim: 1usize << (2 * n.min(31)),
                limit: 1 << 12,
            });
        }
        let elements = (from..(1u64 << (2 * n)))
            .map(|k| Ok(HermitianCoeffs::single(PauliString::from_index(k, n)?, 1.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SubBasis { n, elements })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[HermitianCoeffs] {
        &self.elements
    }

    pub fn project(&self, h: &HermitianCoeffs) -> Result<HermitianCoeffs> {
        project_onto(self, h)
    }

    /// Norm of `h` minus its projection.
    pub fn residual(&self, h: &HermitianCoeffs) -> f64 {
        orthogonalize(h, &self.elements).norm()
    }

    /// Orthonormal basis of the complement inside `u(2^n)`.
    pub fn complement(&self) -> Result<SubBasis> {
        let full = Self::full_unitary(self.n)?;
        let mut basis = self.elements.clone();
        let mut out = Vec::new();
        for e in full.elements {
            let r = orthogonalize(&e, &basis);
            let norm = r.norm();
            if norm > ADMIT_TOL {
                let r = r.scaled(1.0 / norm);
                basis.push(r.clone());
                out.push(r);
            }
        }
        Ok(SubBasis {
            n: self.n,
            elements: out,
        })
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }
}

/// Orthonormal spanning set of a dynamical Lie algebra.
#[derive(Clone, Debug)]
pub struct DlaBasis {
    basis: SubBasis,
    provenance: Vec<Provenance>,
    exact: bool,
}

impl DlaBasis {
    pub fn n(&self) -> usize {
        self.basis.n
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &SubBasis {
        &self.basis
    }

    pub fn elements(&self) -> &[HermitianCoeffs] {
        self.basis.elements()
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// True when the closure ran on the exact Pauli-string path.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// `dim == 4^n - 1` and every element traceless.
    pub fn is_full_special_unitary(&self) -> bool {
        let n = self.n();
        n <= 31
            && self.dim() as u128 == (1u128 << (2 * n)) - 1
            && self.elements().iter().all(|e| e.identity_component().abs() < CLOSURE_TOL)
    }

    /// Largest bracket residual `[b_i, b_j]` outside the span.
    pub fn closure_defect(&self) -> f64 {
        let el = self.elements();
        let mut worst: f64 = 0.0;
        for i in 0..el.len() {
            for j in 0..i {
                worst = worst.max(self.basis.residual(&el[i].lie_bracket(&el[j])));
            }
        }
        worst
    }
}

/// Removes the components of `v` along an orthonormal `basis` (two passes).
fn orthogonalize(v: &HermitianCoeffs, basis: &[HermitianCoeffs]) -> HermitianCoeffs {
    let mut r = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&r);
            if c != 0.0 {
                r = r.axpy(-c, b);
            }
        }
    }
    r
}

fn single_string(h: &HermitianCoeffs) -> Option<PauliString> {
    if h.len() == 1 {
        h.iter().next().map(|(p, _)| *p)
    } else {
        None
    }
}

/// Smallest bracket-closed real subspace containing the generators.
///
/// Generators that are all single Pauli strings take an exact path where
/// strings are admitted by set membership; otherwise a breadth-first
/// commutator expansion with Gram-Schmidt in coefficient space is used.
pub fn lie_closure(generators: &[HermitianCoeffs], max_dim: usize) -> Result<DlaBasis> {
    let first = generators.first().ok_or(Error::NoGenerators)?;
    let n = first.n();
    for g in generators {
        g.check_same_n(first)?;
    }
    if max_dim < generators.len() {
        return Err(Error::Invalid(format!(
            "max_dim {max_dim} smaller than the {} generators",
            generators.len()
        )));
    }
    let strings: Option<Vec<PauliString>> = generators.iter().map(single_string).collect();
    match strings {
        Some(s) => closure_exact(n, &s, max_dim),
        None => closure_float(n, generators, max_dim),
    }
}

fn closure_exact(n: usize, gens: &[PauliString], max_dim: usize) -> Result<DlaBasis> {
    let mut seen = BTreeSet::new();
    let mut order: Vec<PauliString> = Vec::new();
    let mut provenance = Vec::new();
    let mut queue = VecDeque::new();
    for (i, g) in gens.iter().enumerate() {
        if seen.insert(*g) {
            order.push(*g);
            provenance.push(Provenance::Generator(i));
            queue.push_back(order.len() - 1);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in 0..order.len() {
            if order[i].commutes_with(&order[j]) {
                continue;
            }
            let s = order[i].product_unchecked(&order[j]).string;
            if seen.insert(s) {
                if order.len() == max_dim {
                    return Err(Error::ClosureOverflow {
                        max_dim,
                        partial: order.len(),
                    });
                }
                order.push(s);
                provenance.push(Provenance::Bracket(i, j));
                queue.push_back(order.len() - 1);
            }
        }
    }
    let elements = order.into_iter().map(|p| HermitianCoeffs::single(p, 1.0)).collect();
    Ok(DlaBasis {
        basis: SubBasis { n, elements },
        provenance,
        exact: true,
    })
}

fn closure_float(n: usize, gens: &[HermitianCoeffs], max_dim: usize) -> Result<DlaBasis> {
    let mut basis: Vec<HermitianCoeffs> = Vec::new();
    let mut provenance = Vec::new();
    let admit = |cand: &HermitianCoeffs,
                 why: Provenance,
                 basis: &mut Vec<HermitianCoeffs>,
                 provenance: &mut Vec<Provenance>|
     -> Result<bool> {
        let r = orthogonalize(cand, basis);
        let norm = r.norm();
        if norm <= ADMIT_TOL {
            return Ok(false);
        }
        if basis.len() == max_dim {
            return Err(Error::ClosureOverflow {
                max_dim,
                partial: basis.len(),
            });
        }
        basis.push(r.scaled(1.0 / norm));
        provenance.push(why);
        Ok(true)
    };
    for (i, g) in gens.iter().enumerate() {
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        admit(&g.scaled(1.0 / norm), Provenance::Generator(i), &mut basis, &mut provenance)?;
    }
    let mut i = 0;
    while i < basis.len() {
        for j in 0..i {
            let b = basis[i].lie_bracket(&basis[j]);
            admit(&b, Provenance::Bracket(i, j), &mut basis, &mut provenance)?;
        }
        i += 1;
    }
    Ok(DlaBasis {
        basis: SubBasis { n, elements: basis },
        provenance,
        exact: false,
    })
}

/// Adjoint matrices in basis coordinates: `ad[i][(k, j)] = <b_k, [b_i, b_j]>`.
fn adjoint_matrices(dla: &DlaBasis) -> Vec<DMatrix<f64>> {
    let el = dla.elements();
    let d = el.len();
    let mut ads = vec![DMatrix::zeros(d, d); d];
    for i in 0..d {
        for j in 0..i {
            let b = el[i].lie_bracket(&el[j]);
            if b.is_empty() {
                continue;
            }
            for k in 0..d {
                let v = el[k].dot(&b);
                ads[i][(k, j)] = v;
                ads[j][(k, i)] = -v;
            }
        }
    }
    ads
}

fn combine(dla: &DlaBasis, coords: &DVector<f64>) -> HermitianCoeffs {
    let mut h = HermitianCoeffs::zero(dla.n()).expect("valid n");
    for (c, b) in coords.iter().zip(dla.elements()) {
        if *c != 0.0 {
            h = h.axpy(*c, b);
        }
    }
    h
}

/// Center coordinates as columns (orthonormal in basis coordinates).
fn center_coords(dla: &DlaBasis, ads: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = dla.dim();
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Rows (i, k): coefficient of b_k in [X, b_i] = -sum_j x_j ad_i[(k, j)].
    let mut stacked = DMatrix::zeros(d * d, d);
    for (i, ad) in ads.iter().enumerate() {
        stacked.view_mut((i * d, 0), (d, d)).copy_from(ad);
    }
    // Pad so the SVD returns a full right basis.
    let rows = stacked.nrows().max(d);
    let mut padded = DMatrix::zeros(rows, d);
    padded.view_mut((0, 0), (stacked.nrows(), d)).copy_from(&stacked);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<usize> = (0..d)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] < NULL_TOL * smax)
        .collect();
    let mut out = DMatrix::zeros(d, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        out.set_column(c, &v_t.row(i).transpose());
    }
    out
}

/// Orthonormal basis of the center `{X : [X, g] = 0}`.
pub fn center(dla: &DlaBasis) -> SubBasis {
    let ads = adjoint_matrices(dla);
    let z = center_coords(dla, &ads);
    let elements = (0..z.ncols())
        .map(|c| combine(dla, &z.column(c).into_owned()))
        .collect();
    SubBasis {
        n: dla.n(),
        elements,
    }
}

/// Center plus simple ideals.
#[derive(Clone, Debug)]
pub struct IdealDecomposition {
    pub center: SubBasis,
    pub simple_ideals: Vec<SubBasis>,
}

impl IdealDecomposition {
    pub fn simple_dims(&self) -> Vec<usize> {
        self.simple_ideals.iter().map(SubBasis::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.center.dim() + self.simple_ideals.iter().map(SubBasis::dim).sum::<usize>()
    }

    /// Checks orthogonality, spanning, central commutation and ideal closure.
    pub fn verify(&self, dla: &DlaBasis) -> std::result::Result<(), String> {
        if self.total_dim() != dla.dim() {
            return Err(format!(
                "dimensions sum to {} but the algebra has dimension {}",
                self.total_dim(),
                dla.dim()
            ));
        }
        let parts: Vec<&SubBasis> = std::iter::once(&self.center)
            .chain(self.simple_ideals.iter())
            .collect();
        for (a, pa) in parts.iter().enumerate() {
            if pa.orthonormality_defect() > CLOSURE_TOL {
                return Err(format!("part {a} is not orthonormal"));
            }
            for pb in parts.iter().skip(a + 1) {
                for x in pa.elements() {
                    for y in pb.elements() {
                        if x.dot(y).abs() > CLOSURE_TOL {
                            return Err("parts are not mutually orthogonal".into());
                        }
                    }
                }
            }
        }
        for x in self.center.elements() {
            for b in dla.elements() {
                if x.lie_bracket(b).norm() > CLOSURE_TOL {
                    return Err("center element fails to commute".into());
                }
            }
        }
        for (k, ideal) in self.simple_ideals.iter().enumerate() {
            for x in ideal.elements() {
                for b in dla.elements() {
                    if ideal.residual(&x.lie_bracket(b)) > CLOSURE_TOL {
                        return Err(format!("ideal {k} is not closed under the bracket"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Orthonormal columns spanning the orthogonal complement of `z` in `R^d`.
fn complement_coords(d: usize, z: &DMatrix<f64>) -> DMatrix<f64> {
    let proj = DMatrix::<f64>::identity(d, d) - z * z.transpose();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let mut out = DMatrix::zeros(d, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

/// Orthonormal columns spanning the smallest `ads`-invariant subspace that
/// contains the columns of `start`.
fn invariant_span(start: &[DVector<f64>], ads: &[DMatrix<f64>]) -> Vec<DVector<f64>> {
    let mut span: Vec<DVector<f64>> = Vec::new();
    let mut queue: VecDeque<DVector<f64>> = start.iter().cloned().collect();
    while let Some(v) = queue.pop_front() {
        let mut r = v;
        for _ in 0..2 {
            for s in &span {
                let c = s.dot(&r);
                r.axpy(-c, s, 1.0);
            }
        }
        let norm = r.norm();
        if norm <= 1e-6 {
            continue;
        }
        let u = r / norm;
        for ad in ads {
            queue.push_back(ad * &u);
        }
        span.push(u);
    }
    span
}

fn span_residual(v: &DVector<f64>, span: &[DVector<f64>]) -> f64 {
    let mut r = v.clone();
    for s in span {
        let c = s.dot(&r);
        r.axpy(-c, s, 1.0);
    }
    r.norm()
}

/// Splits the invariant subspace `space` (orthonormal vectors) into minimal
/// invariant subspaces using the eigenvectors of a random symmetric element
/// of the associative algebra generated by `ads`.
fn split_invariant(
    space: &[DVector<f64>],
    ads: &[DMatrix<f64>],
    rng: &mut ChaCha12Rng,
    depth: usize,
) -> Option<Vec<Vec<DVector<f64>>>> {
    let s = space.len();
    if s <= 1 || depth > 8 {
        return Some(vec![space.to_vec()]);
    }
    let d = space[0].len();
    let mut k = DMatrix::zeros(d, s);
    for (c, v) in space.iter().enumerate() {
        k.set_column(c, v);
    }
    let restricted: Vec<DMatrix<f64>> = ads.iter().map(|a| k.transpose() * a * &k).collect();
    let m = restricted.len();
    let mut y = DMatrix::<f64>::zeros(s, s);
    for a in 0..m {
        let r: f64 = rng.sample(StandardNormal);
        y += &restricted[a] * r;
        let b = rng.random_range(0..m);
        let t: f64 = rng.sample(StandardNormal);
        y += &restricted[a] * &restricted[b] * t;
    }
    let sym = y.transpose() * &y;
    let eig = SymmetricEigen::new(sym);
    let mut orbits: Vec<Vec<DVector<f64>>> = (0..s)
        .map(|i| {
            let local = eig.eigenvectors.column(i).into_owned();
            invariant_span(&[&k * local], ads)
        })
        .collect();
    orbits.sort_by_key(|o| o.len());
    let mut accepted: Vec<Vec<DVector<f64>>> = Vec::new();
    for orbit in orbits {
        let inside_accepted = orbit.iter().all(|v| {
            let all: Vec<DVector<f64>> = accepted.iter().flatten().cloned().collect();
            span_residual(v, &all) < 1e-6
        });
        if inside_accepted {
            continue;
        }
        let orthogonal = accepted
            .iter()
            .flatten()
            .all(|a| orbit.iter().all(|v| a.dot(v).abs() < 1e-6));
        if orthogonal {
            accepted.push(orbit);
        }
    }
    let total: usize = accepted.iter().map(Vec::len).sum();
    if total != s {
        return None;
    }
    if accepted.len() == 1 {
        return Some(accepted);
    }
    let mut out = Vec::new();
    for part in accepted {
        out.extend(split_invariant(&part, ads, rng, depth + 1)?);
    }
    Some(out)
}

/// Center plus simple ideals by randomized commutant eigen-splitting.
pub fn ideal_decomposition(dla: &DlaBasis, seed: u64) -> Result<IdealDecomposition> {
    let d = dla.dim();
    let ads = adjoint_matrices(dla);
    let z = center_coords(dla, &ads);
    let center = SubBasis {
        n: dla.n(),
        elements: (0..z.ncols())
            .map(|c| combine(dla, &z.column(c).into_owned()))
            .collect(),
    };
    let comp = complement_coords(d, &z);
    let derived: Vec<DVector<f64>> = (0..comp.ncols()).map(|c| comp.column(c).into_owned()).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut last_reason = String::new();
    for _ in 0..DECOMPOSITION_ATTEMPTS {
        let parts = if derived.is_empty() {
            Some(Vec::new())
        } else {
            split_invariant(&derived, &ads, &mut rng, 0)
        };
        let Some(parts) = parts else {
            last_reason = "eigen-blocks did not tile the derived algebra".into();
            continue;
        };
        let mut simple_ideals: Vec<SubBasis> = parts
            .iter()
            .map(|vecs| SubBasis {
                n: dla.n(),
                elements: vecs.iter().map(|v| combine(dla, v)).collect(),
            })
            .collect();
        simple_ideals.sort_by_key(|s| s.dim());
        let dec = IdealDecomposition {
            center: center.clone(),
            simple_ideals,
        };
        match dec.verify(dla) {
            Ok(()) => return Ok(dec),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::DecompositionFailed {
        attempts: DECOMPOSITION_ATTEMPTS,
        reason: last_reason,
    })
}

/// Orthogonal projection onto an orthonormal sub-basis.
pub fn project_onto(subspace: &SubBasis, h: &HermitianCoeffs) -> Result<HermitianCoeffs> {
    if subspace.n != h.n() {
        return Err(Error::QubitMismatch {
            left: subspace.n,
            right: h.n(),
        });
    }
    let mut out = HermitianCoeffs::zero(h.n())?;
    for b in &subspace.elements {
        let c = b.dot(h);
        if c != 0.0 {
            out = out.axpy(c, b);
        }
    }
    Ok(out)
}

/// `Tr(H_g^2)` with the plain (unnormalized) trace.
pub fn g_purity(subspace: &SubBasis, h: &HermitianCoeffs) -> Result<f64> {
    if subspace.n != h.n() {
        return Err(Error::QubitMismatch {
            left: subspace.n,
            right: h.n(),
        });
    }
    let s = subspace.elements.iter().fold(0.0, |acc, b| acc + b.dot(h).powi(2));
    Ok(s * (1u64 << h.n()) as f64)
}

/// Serializable summary of a closure run.
#[derive(Clone, Debug, Serialize)]
pub struct DlaReport {
    pub n: usize,
    pub generators: Vec<String>,
    pub dim: usize,
    pub center_dim: usize,
    pub simple_ideal_dims: Vec<usize>,
    pub exact_path: bool,
    pub decomposition_method: &'static str,
    pub wall_time_s: f64,
}

/// Closure plus decomposition, timed.
pub fn analyze(generators: &[HermitianCoeffs], max_dim: usize, seed: u64) -> Result<(DlaBasis, IdealDecomposition, DlaReport)> {
    let start = Instant::now();
    let dla = lie_closure(generators, max_dim)?;
    let dec = ideal_decomposition(&dla, seed)?;
    let report = DlaReport {
        n: dla.n(),
        generators: generators.iter().map(HermitianCoeffs::to_text).collect(),
        dim: dla.dim(),
        center_dim: dec.center.dim(),
        simple_ideal_dims: dec.simple_dims(),
        exact_path: dla.is_exact(),
        decomposition_method: "randomized commutant eigen-splitting (seeded)",
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((dla, dec, report))
}
