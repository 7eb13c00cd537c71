//! Right-invariant penalty metrics on SU(2^n) and Pauli geodesics.
//!
//! The metric is diagonal in `U`-adapted components, `F(h)^2 = sum_k w_k
//! (h^k)^2`, so it is evaluated on the Hamiltonian representation `h` of a
//! velocity and never depends on the base point. Lengths of sampled curves
//! integrate `F(h(lambda))` where `h` comes from
//! [`curve_hamiltonian`](crate::unitary::curve_hamiltonian).

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{HermitianCoeffs, PauliString};
use crate::sampling::RngStream;
use crate::unitary::{self, UnitaryCurve, UnitaryMatrix, BRANCH_GUARD};

/// Identity components up to this size are treated as zero in norms.
pub const TRACE_TOL: f64 = 1e-12;

/// Coefficients below this are ignored when reading a curve's coordinate
/// support.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Default number of grid intervals for length and residual work.
pub const DEFAULT_GRID: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Standard,
    Custom,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Standard => "standard",
            Scheme::Custom => "custom",
        })
    }
}

/// Diagonal penalty metric `g_kl = delta_kl w_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyMetric {
    n: usize,
    scheme: Scheme,
    overrides: BTreeMap<PauliString, f64>,
    default_weight: f64,
}

impl PenaltyMetric {
    /// `w_k = 1` for strings acting on one or two qubits, `4^(2n)` otherwise.
    pub fn standard(n: usize) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::BadQubitCount(n));
        }
        Ok(PenaltyMetric {
            n,
            scheme: Scheme::Standard,
            overrides: BTreeMap::new(),
            default_weight: 1.0,
        })
    }

    /// Explicit weights; strings not listed get `default_weight`.
    pub fn custom(n: usize, weights: BTreeMap<PauliString, f64>, default_weight: f64) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::BadQubitCount(n));
        }
        if !(default_weight > 0.0 && default_weight.is_finite()) {
            return Err(Error::BadWeight {
                index: u64::MAX,
                weight: default_weight,
            });
        }
        for (p, w) in &weights {
            if p.n() != n {
                return Err(Error::QubitMismatch {
                    left: n,
                    right: p.n(),
                });
            }
            if p.is_identity() || !(*w > 0.0 && w.is_finite()) {
                return Err(Error::BadWeight {
                    index: p.index(),
                    weight: *w,
                });
            }
        }
        Ok(PenaltyMetric {
            n,
            scheme: Scheme::Custom,
            overrides: weights,
            default_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn weight(&self, p: &PauliString) -> f64 {
        match self.scheme {
            Scheme::Standard => {
                if p.weight() <= 2 {
                    1.0
                } else {
                    16f64.powi(self.n as i32)
                }
            }
            Scheme::Custom => self.overrides.get(p).copied().unwrap_or(self.default_weight),
        }
    }

    pub fn weight_of_index(&self, k: u64) -> Result<f64> {
        Ok(self.weight(&PauliString::from_index(k, self.n)?))
    }
}

/// Metric from a scheme tag. Only `"standard"` can be built from a tag
/// alone; custom metrics go through [`PenaltyMetric::custom`].
pub fn penalty_weights(n: usize, scheme: &str) -> Result<PenaltyMetric> {
    match scheme {
        "standard" => PenaltyMetric::standard(n),
        other => Err(Error::UnknownScheme(other.to_string())),
    }
}

/// `sqrt(sum_k w_k (h^k)^2)` for traceless `h`.
pub fn finsler_norm(metric: &PenaltyMetric, h: &HermitianCoeffs) -> Result<f64> {
    if metric.n != h.n() {
        return Err(Error::QubitMismatch {
            left: metric.n,
            right: h.n(),
        });
    }
    let id = h.identity_component();
    if id.abs() > TRACE_TOL {
        return Err(Error::IdentityComponent(id));
    }
    Ok(h
        .iter()
        .filter(|(p, _)| !p.is_identity())
        .fold(0.0, |acc, (p, c)| acc + metric.weight(p) * c * c)
        .sqrt())
}

/// Composite-trapezoid length of a sampled curve in the Hamiltonian
/// representation.
pub fn curve_length(metric: &PenaltyMetric, curve: &UnitaryCurve) -> Result<f64> {
    if metric.n != curve.n() {
        return Err(Error::QubitMismatch {
            left: metric.n,
            right: curve.n(),
        });
    }
    let speeds = (0..curve.len())
        .into_par_iter()
        .map(|j| {
            finsler_norm(metric, &unitary::curve_hamiltonian(curve, j)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let g = curve.grid();
    Ok(g.windows(2)
        .zip(speeds.windows(2))
        .fold(0.0, |acc, (l, s)| acc + 0.5 * (l[1] - l[0]) * (s[0] + s[1])))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilizerSupport {
    pub commuting: bool,
    #[serde(serialize_with = "serialize_strings")]
    pub support: Vec<PauliString>,
    /// First anticommuting pair found, when not commuting.
    #[serde(serialize_with = "serialize_pair")]
    pub anticommuting_pair: Option<(PauliString, PauliString)>,
}

fn serialize_strings<S: serde::Serializer>(v: &[PauliString], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|p| p.to_string()))
}

fn serialize_pair<S: serde::Serializer>(
    v: &Option<(PauliString, PauliString)>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some((a, b)) => s.collect_seq([a.to_string(), b.to_string()]),
        None => s.serialize_none(),
    }
}

fn support_of(strings: &[PauliString]) -> StabilizerSupport {
    for (i, a) in strings.iter().enumerate() {
        for b in &strings[i + 1..] {
            if !a.commutes_with(b) {
                return StabilizerSupport {
                    commuting: false,
                    support: strings.to_vec(),
                    anticommuting_pair: Some((*a, *b)),
                };
            }
        }
    }
    StabilizerSupport {
        commuting: true,
        support: strings.to_vec(),
        anticommuting_pair: None,
    }
}

/// Whether the non-identity support of `x_f` is a commuting set.
pub fn stabilizer_support(x_f: &HermitianCoeffs) -> StabilizerSupport {
    let strings: Vec<PauliString> = x_f
        .support()
        .into_iter()
        .filter(|p| !p.is_identity())
        .collect();
    support_of(&strings)
}

#[derive(Clone, Debug)]
pub struct GeodesicResult {
    pub target: HermitianCoeffs,
    pub curve: UnitaryCurve,
    /// `finsler_norm(metric, X_f)`, the length of the constant-speed line.
    pub length: f64,
    /// Quadrature of the sampled curve, as a cross-check of `length`.
    pub numeric_length: f64,
    pub el_residual: f64,
}

/// `lambda -> exp(-i lambda X)` on a grid, from one eigendecomposition.
fn straight_line(x: &HermitianCoeffs, m: usize) -> Result<UnitaryCurve> {
    let dense = x.to_dense()?;
    let (vals, vecs) = linalg::hermitian_eigen(&dense);
    let n = x.n();
    let grid = unitary::uniform_grid(0.0, 1.0, m);
    let points = grid
        .iter()
        .map(|&l| {
            let mut scaled = vecs.clone();
            for (j, &v) in vals.iter().enumerate() {
                let f = num_complex::Complex64::from_polar(1.0, -l * v);
                for r in 0..scaled.nrows() {
                    scaled[(r, j)] *= f;
                }
            }
            UnitaryMatrix::new(scaled * vecs.adjoint())
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(points.iter().all(|p| p.n() == n));
    UnitaryCurve::new(grid, points)
}

/// The straight-line geodesic `exp(-i X_f lambda)` for a target with
/// commuting Pauli support, sampled on `m + 1` points.
pub fn pauli_geodesic(metric: &PenaltyMetric, x_f: &HermitianCoeffs, m: usize) -> Result<GeodesicResult> {
    if metric.n != x_f.n() {
        return Err(Error::QubitMismatch {
            left: metric.n,
            right: x_f.n(),
        });
    }
    let support = stabilizer_support(x_f);
    if let Some((a, b)) = support.anticommuting_pair {
        return Err(Error::NonCommutingSupport(a.to_string(), b.to_string()));
    }
    if m < 2 {
        return Err(Error::BadGrid("geodesic grid needs at least 2 intervals".into()));
    }
    let (vals, _) = linalg::hermitian_eigen(&x_f.to_dense()?);
    if let Some(v) = vals.iter().find(|v| std::f64::consts::PI - v.abs() < BRANCH_GUARD) {
        return Err(Error::BranchViolation {
            phase: -v,
            guard: BRANCH_GUARD,
        });
    }
    let length = finsler_norm(metric, x_f)?;
    let curve = straight_line(x_f, m)?;
    let numeric_length = curve_length(metric, &curve)?;
    let el_residual = el_residual(metric, &curve)?;
    Ok(GeodesicResult {
        target: x_f.clone(),
        curve,
        length,
        numeric_length,
        el_residual,
    })
}

/// Max second derivative of the Pauli coordinates along the curve, in the
/// parameter normalized to `[0, 1]`.
///
/// Valid only when the coordinates stay in a commuting set, where the
/// Hamiltonian and Pauli representations agree and the Euler-Lagrange
/// equations of a constant diagonal metric reduce to `q'' = 0`.
pub fn el_residual(metric: &PenaltyMetric, curve: &UnitaryCurve) -> Result<f64> {
    if metric.n != curve.n() {
        return Err(Error::QubitMismatch {
            left: metric.n,
            right: curve.n(),
        });
    }
    let coords = curve
        .points()
        .par_iter()
        .map(unitary::pauli_chart)
        .collect::<Result<Vec<_>>>()?;
    let mut strings: Vec<PauliString> = coords
        .iter()
        .flat_map(|q| q.iter().filter(|(_, c)| c.abs() > SUPPORT_TOL).map(|(p, _)| *p))
        .filter(|p| !p.is_identity())
        .collect();
    strings.sort();
    strings.dedup();
    let support = support_of(&strings);
    if let Some((a, b)) = support.anticommuting_pair {
        return Err(Error::NonCommutingSupport(a.to_string(), b.to_string()));
    }
    let g = curve.grid();
    let span = g[g.len() - 1] - g[0];
    let s: Vec<f64> = g.iter().map(|l| (l - g[0]) / span).collect();
    let mut worst: f64 = 0.0;
    for j in 1..s.len().saturating_sub(1) {
        let (h1, h2) = (s[j] - s[j - 1], s[j + 1] - s[j]);
        for p in &strings {
            let (a, b, cc) = (coords[j - 1].get(p), coords[j].get(p), coords[j + 1].get(p));
            let second = 2.0 * ((cc - b) / h2 - (b - a) / h1) / (h1 + h2);
            worst = worst.max(second.abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimalityProbe {
    pub paths: usize,
    pub straight_length: f64,
    pub min_perturbed_length: f64,
    /// `min_perturbed_length - straight_length`.
    pub margin: f64,
}

/// Lengths of `paths` seeded deformations of the straight line with the
/// same endpoints, each on the same `m`-interval grid.
///
/// Every deformation adds `a sin(k pi lambda)` bumps to the Pauli
/// coordinates along one direction inside the support of `X_f` and one
/// string outside it, with amplitudes at most `0.1`.
pub fn minimality_probe(
    metric: &PenaltyMetric,
    x_f: &HermitianCoeffs,
    m: usize,
    paths: usize,
    stream: &RngStream,
) -> Result<MinimalityProbe> {
    let n = x_f.n();
    let straight = straight_line(x_f, m)?;
    let straight_length = curve_length(metric, &straight)?;
    let support: Vec<PauliString> = x_f.support().into_iter().filter(|p| !p.is_identity()).collect();
    let outside: Vec<PauliString> = (1..(1u64 << (2 * n)))
        .map(|k| PauliString::from_index(k, n))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| !support.contains(p))
        .collect();
    if outside.is_empty() {
        return Err(Error::Invalid("no direction outside the support".into()));
    }
    let lengths = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(i as u64).rng();
            let mut inside = HermitianCoeffs::zero(n)?;
            for p in &support {
                inside.add_term(*p, rng.sample::<f64, _>(rand_distr::StandardNormal));
            }
            let norm = inside.norm();
            if norm > 0.0 {
                inside = inside.scaled(rng.random_range(-0.1..0.1) / norm);
            }
            let out_string = outside[rng.random_range(0..outside.len())];
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let out_amp = sign * rng.random_range(0.02..0.1);
            let (k_in, k_out) = (rng.random_range(1..4) as f64, rng.random_range(1..4) as f64);
            let curve = UnitaryCurve::sample(0.0, 1.0, m, |l| {
                let pi = std::f64::consts::PI;
                let mut q = x_f.scaled(l).axpy((k_in * pi * l).sin(), &inside);
                q.add_term(out_string, out_amp * (k_out * pi * l).sin());
                unitary::su_exp(&q, 1.0)
            })?;
            curve_length(metric, &curve)
        })
        .collect::<Result<Vec<f64>>>()?;
    let min_perturbed_length = lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MinimalityProbe {
        paths,
        straight_length,
        min_perturbed_length,
        margin: min_perturbed_length - straight_length,
    })
}

/// Serializable summary of a geodesic run.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicReport {
    pub n: usize,
    pub scheme: Scheme,
    pub target: String,
    pub commuting_support: bool,
    pub length: f64,
    pub numeric_length: f64,
    pub el_residual: f64,
    pub grid: usize,
    pub minimality_margin: f64,
    pub perturbed_paths: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn h(terms: &[(&str, f64)]) -> HermitianCoeffs {
        HermitianCoeffs::from_text_terms(terms).unwrap()
    }

    #[test]
    fn standard_weights() {
        let m2 = penalty_weights(2, "standard").unwrap();
        assert!((1..16).all(|k| m2.weight_of_index(k).unwrap() == 1.0));
        let m3 = penalty_weights(3, "standard").unwrap();
        assert_eq!(m3.weight(&"XXX".parse().unwrap()), 4096.0);
        assert_eq!(m3.weight(&"ZZI".parse().unwrap()), 1.0);
        assert!(matches!(penalty_weights(2, "fancy"), Err(Error::UnknownScheme(_))));
    }

    #[test]
    fn custom_weights_validated() {
        let mut w = BTreeMap::new();
        w.insert("XY".parse().unwrap(), 2.0);
        let m = PenaltyMetric::custom(2, w.clone(), 1.0).unwrap();
        assert_eq!(m.weight(&"XY".parse().unwrap()), 2.0);
        assert_eq!(m.weight(&"ZZ".parse().unwrap()), 1.0);
        w.insert("ZZ".parse().unwrap(), -1.0);
        assert!(PenaltyMetric::custom(2, w, 1.0).is_err());
    }

    #[test]
    fn norm_examples() {
        let m3 = PenaltyMetric::standard(3).unwrap();
        assert_eq!(finsler_norm(&m3, &HermitianCoeffs::zero(3).unwrap()).unwrap(), 0.0);
        let alpha = 0.37;
        let v = finsler_norm(&m3, &h(&[("XXX", alpha)])).unwrap();
        assert!((v - 64.0 * alpha).abs() < 1e-12);
        let x = h(&[("XIZ", 0.3), ("YYY", -0.1), ("IZZ", 0.8)]);
        let a = finsler_norm(&m3, &x).unwrap();
        let b = finsler_norm(&m3, &x.scaled(2.5)).unwrap();
        assert!((b - 2.5 * a).abs() < 1e-12);
        assert!(matches!(
            finsler_norm(&m3, &h(&[("III", 1.0)])),
            Err(Error::IdentityComponent(_))
        ));
    }

    #[test]
    fn support_examples() {
        assert!(stabilizer_support(&h(&[("ZI", 1.0), ("IZ", 2.0), ("ZZ", 0.5)])).commuting);
        let s = stabilizer_support(&h(&[("X", 1.0), ("Z", 2.0)]));
        assert!(!s.commuting);
        assert_eq!(s.anticommuting_pair.unwrap().0.to_string(), "X");
        assert!(stabilizer_support(&h(&[("XX", 1.0), ("ZZ", 2.0)])).commuting);
    }

    #[test]
    fn constant_curve_has_zero_length() {
        let m = PenaltyMetric::standard(2).unwrap();
        let u = unitary::su_exp(&h(&[("XY", 0.4)]), 1.0).unwrap();
        let curve = UnitaryCurve::sample(0.0, 1.0, 50, |_| Ok(u.clone())).unwrap();
        assert!(curve_length(&m, &curve).unwrap() < 1e-12);
        assert!(el_residual(&m, &curve).unwrap() < 1e-6);
    }

    #[test]
    fn zz_geodesic() {
        let m = PenaltyMetric::standard(2).unwrap();
        let r = pauli_geodesic(&m, &h(&[("ZZ", PI / 4.0)]), DEFAULT_GRID).unwrap();
        assert!((r.length - PI / 4.0).abs() < 1e-12);
        assert!((r.numeric_length - PI / 4.0).abs() < 1e-6);
        assert!(r.el_residual < 1e-6);
        assert!(r.curve.endpoint().max_abs_diff(&unitary::su_exp(&r.target, 1.0).unwrap()) < 1e-9);
    }

    #[test]
    fn zero_geodesic() {
        let m = PenaltyMetric::standard(2).unwrap();
        let r = pauli_geodesic(&m, &HermitianCoeffs::zero(2).unwrap(), 10).unwrap();
        assert_eq!(r.length, 0.0);
        assert!(r.curve.points().iter().all(|p| p.max_abs_diff(&UnitaryMatrix::identity(2)) == 0.0));
    }

    #[test]
    fn non_commuting_target_rejected() {
        let m = PenaltyMetric::standard(1).unwrap();
        let err = pauli_geodesic(&m, &h(&[("X", 0.3), ("Z", 0.2)]), 10).unwrap_err();
        assert_eq!(err, Error::NonCommutingSupport("X".into(), "Z".into()));
    }

    #[test]
    fn quadratic_path_residual() {
        let m = PenaltyMetric::standard(2).unwrap();
        let c0 = 0.6;
        let curve = UnitaryCurve::sample(0.0, 1.0, 200, |l| {
            unitary::su_exp(&h(&[("ZZ", c0 * l * l), ("XX", 0.2 * l * l)]), 1.0)
        })
        .unwrap();
        let r = el_residual(&m, &curve).unwrap();
        assert!((r - 2.0 * c0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn el_residual_rejects_non_commuting_coordinates() {
        let m = PenaltyMetric::standard(1).unwrap();
        let curve = UnitaryCurve::sample(0.0, 1.0, 20, |l| {
            unitary::su_exp(&h(&[("X", 0.3 * l), ("Z", 0.2 * l * l)]), 1.0)
        })
        .unwrap();
        assert!(matches!(el_residual(&m, &curve), Err(Error::NonCommutingSupport(..))));
    }
}
