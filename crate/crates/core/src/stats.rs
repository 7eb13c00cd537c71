//! Streaming central moments with an associative merge.
//!
//! Monte Carlo loops split sample indices into fixed-size chunks, accumulate
//! each chunk sequentially and merge the chunk results in index order, so the
//! result does not depend on how many worker threads ran.

use rayon::prelude::*;

/// Samples per chunk in [`par_moments`].
pub const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    /// Pairwise combination (Pebay); `a.merge(b)` equals pushing all of `a`
    /// then all of `b` up to rounding.
    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        Moments {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count as f64 - 1.0)).max(0.0)
        }
    }

    pub fn mean_std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    /// Standard error of [`Moments::variance`] from the fourth central
    /// moment: `sqrt((mu4 - (n-3)/(n-1) s^4) / n)`.
    pub fn variance_std_error(&self) -> f64 {
        if self.count < 4 {
            return 0.0;
        }
        let n = self.count as f64;
        let mu4 = self.m4 / n;
        let s2 = self.variance();
        ((mu4 - (n - 3.0) / (n - 1.0) * s2 * s2) / n).max(0.0).sqrt()
    }
}

/// Moments of `f(0), ..., f(samples - 1)`, parallel over fixed chunks.
pub fn par_moments<F>(samples: usize, f: F) -> Moments
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(samples) {
                m.push(f(i));
            }
            m
        })
        .collect();
    parts.iter().fold(Moments::new(), |acc, p| acc.merge(p))
}

/// Per-component moments of a vector-valued sample `f(i, out)` of fixed
/// `width`, with the same chunking as [`par_moments`].
pub fn par_moments_many<F>(samples: usize, width: usize, f: F) -> Vec<Moments>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::new(); width];
            let mut buf = vec![0.0; width];
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(samples) {
                f(i, &mut buf);
                for (m, &x) in acc.iter_mut().zip(&buf) {
                    m.push(x);
                }
            }
            acc
        })
        .collect();
    parts.iter().fold(vec![Moments::new(); width], |acc, p| {
        acc.iter().zip(p).map(|(a, b)| a.merge(b)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass(xs: &[f64]) -> (f64, f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>();
        (mean, m2 / (n - 1.0), m4 / n)
    }

    #[test]
    fn streaming_matches_two_pass() {
        let xs: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 1013) as f64 / 97.0).collect();
        let mut m = Moments::new();
        xs.iter().for_each(|&x| m.push(x));
        let (mean, var, mu4) = two_pass(&xs);
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-10);
        assert!((m.m4 / xs.len() as f64 - mu4).abs() < 1e-8);
    }

    #[test]
    fn merge_matches_push() {
        let xs: Vec<f64> = (0..3001).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let mut all = Moments::new();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::new(), Moments::new());
        xs[..1234].iter().for_each(|&x| a.push(x));
        xs[1234..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(&b);
        assert!((merged.mean() - all.mean()).abs() < 1e-12);
        assert!((merged.m2 - all.m2).abs() < 1e-8);
        assert!((merged.m3 - all.m3).abs() < 1e-7);
        assert!((merged.m4 - all.m4).abs() < 1e-6);
    }

    #[test]
    fn constant_samples_have_zero_variance() {
        let m = par_moments(5000, |_| 0.75);
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.variance_std_error(), 0.0);
        assert_eq!(m.mean(), 0.75);
    }

    #[test]
    fn par_moments_independent_of_pool() {
        let f = |i: usize| ((i as f64) * 1.618).fract();
        let a = par_moments(10_000, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_moments(10_000, f));
        assert_eq!(a, b);
    }
}
