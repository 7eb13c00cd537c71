//! Haar sampling on U(N) and SU(N), splittable random streams and
//! invariance tests.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::CMatrix;
use crate::stats::Moments;

/// Gap, in combined standard errors, allowed between invariance-test means.
pub const INVARIANCE_SIGMAS: f64 = 5.0;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A keyed random stream: the generator is a function of
/// `(master seed, key)` only, so work split across threads by key is
/// reproducible regardless of scheduling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub key: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, key: 0 }
    }

    /// Child stream keyed by `index`.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F))),
        }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.key);
        rng
    }
}

fn complex_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// Haar-distributed `U(N)` element: Gaussian matrix, QR, then the columns of
/// `Q` rephased by `R_ii / |R_ii|`.
pub fn haar_unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    assert!(dim >= 1, "dimension must be positive");
    let qr = complex_gaussian(dim, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_unitary(dim: usize, stream: &RngStream) -> CMatrix {
    haar_unitary_with(dim, &mut stream.rng())
}

/// Haar `U(N)` sample times `det(U)^(-1/N)` (principal root).
pub fn haar_special_unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let u = haar_unitary_with(dim, rng);
    let det = u.clone().determinant();
    let fix = Complex64::from_polar(1.0, -det.arg() / dim as f64);
    u * fix
}

pub fn haar_special_unitary(dim: usize, stream: &RngStream) -> CMatrix {
    haar_special_unitary_with(dim, &mut stream.rng())
}

/// Which Haar measure [`invariance_test`] samples from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HaarGroup {
    Unitary,
    SpecialUnitary,
}

impl HaarGroup {
    pub fn sample(self, dim: usize, stream: &RngStream) -> CMatrix {
        match self {
            HaarGroup::Unitary => haar_unitary(dim, stream),
            HaarGroup::SpecialUnitary => haar_special_unitary(dim, stream),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub samples: usize,
    /// Means of `f(U)`, `f(WU)`, `f(UW)`, `f(U^-1)`.
    pub means: [f64; 4],
    pub std_errors: [f64; 4],
    /// Largest pairwise gap in combined standard errors.
    pub max_gap_sigmas: f64,
    pub passed: bool,
}

/// Compares sample means of `f(U)`, `f(WU)`, `f(UW)` and `f(U^-1)` over Haar
/// draws; passes when every pairwise gap is within five combined standard
/// errors.
pub fn invariance_test<F>(
    f: F,
    w: &CMatrix,
    group: HaarGroup,
    samples: usize,
    stream: &RngStream,
) -> InvarianceReport
where
    F: Fn(&CMatrix) -> f64 + Sync,
{
    let dim = w.nrows();
    let values: Vec<[f64; 4]> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = group.sample(dim, &stream.substream(i as u64));
            [f(&u), f(&(w * &u)), f(&(&u * w)), f(&u.adjoint())]
        })
        .collect();
    let mut acc = [Moments::new(); 4];
    for v in &values {
        for k in 0..4 {
            acc[k].push(v[k]);
        }
    }
    let means = acc.map(|m| m.mean());
    let std_errors = acc.map(|m| m.mean_std_error());
    let mut max_gap: f64 = 0.0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            let gap = (means[a] - means[b]).abs();
            let se = (std_errors[a].powi(2) + std_errors[b].powi(2)).sqrt();
            let sig = if gap == 0.0 {
                0.0
            } else if se == 0.0 {
                f64::INFINITY
            } else {
                gap / se
            };
            max_gap = max_gap.max(sig);
        }
    }
    InvarianceReport {
        samples,
        means,
        std_errors,
        max_gap_sigmas: max_gap,
        passed: max_gap <= INVARIANCE_SIGMAS,
    }
}
