//! Sample moments, bootstrap standard errors and small helpers shared by the
//! Monte Carlo code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Monte Carlo estimate of a scalar with its replication record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub seed: u64,
}

impl McEstimate {
    /// Moments with a normal-theory standard error for the variance.
    pub fn from_samples(x: &[f64], seed: u64) -> Self {
        let m = Moments::of(x);
        let n = x.len();
        let se_variance = if n > 1 {
            ((m.m4 - m.var_biased * m.var_biased).max(0.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean: m.mean,
            variance: m.var,
            se_mean: m.se_mean(),
            se_variance,
            seed,
        }
    }

    /// Moments with a bootstrap standard error for the variance.
    pub fn with_bootstrap(x: &[f64], n_boot: usize, seed: u64) -> Self {
        let mut e = Self::from_samples(x, seed);
        e.se_variance = bootstrap_se(x, n_boot, splitmix(seed ^ 0xB007), |s| Moments::of(s).var);
        e
    }

    /// `(estimate − target) / se_mean`.
    pub fn z_mean(&self, target: f64) -> f64 {
        z(self.mean - target, self.se_mean)
    }

    pub fn z_variance(&self, target: f64) -> f64 {
        z(self.variance - target, self.se_variance)
    }
}

fn z(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d / se
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY * d.signum()
    }
}

fn splitmix(x: u64) -> u64 {
    crate::mnw::splitmix64(x)
}

/// Mean, unbiased variance and central fourth moment.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub var: f64,
    pub var_biased: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn of(x: &[f64]) -> Self {
        let n = x.len();
        if n == 0 {
            return Self::default();
        }
        let mean = pairwise_sum(x) / n as f64;
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for v in x {
            let d = v - mean;
            let d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        let nf = n as f64;
        Self {
            n,
            mean,
            var: if n > 1 { s2 / (nf - 1.0) } else { 0.0 },
            var_biased: s2 / nf,
            m3: s3 / nf,
            m4: s4 / nf,
        }
    }

    pub fn se_mean(&self) -> f64 {
        if self.n > 1 {
            (self.var / self.n as f64).sqrt()
        } else {
            0.0
        }
    }

    pub fn skewness(&self) -> f64 {
        if self.var_biased > 0.0 {
            self.m3 / self.var_biased.powf(1.5)
        } else {
            0.0
        }
    }

    pub fn excess_kurtosis(&self) -> f64 {
        if self.var_biased > 0.0 {
            self.m4 / (self.var_biased * self.var_biased) - 3.0
        } else {
            0.0
        }
    }
}

/// Summation with `O(log n)` error growth that does not depend on how the
/// input was produced.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Bootstrap standard error of `stat`.
pub fn bootstrap_se<F: Fn(&[f64]) -> f64>(x: &[f64], n_boot: usize, seed: u64, stat: F) -> f64 {
    let n = x.len();
    if n < 2 || n_boot < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let reps: Vec<f64> = (0..n_boot)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = x[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    Moments::of(&reps).var.sqrt()
}

/// Bootstrap standard error of a statistic of paired samples.
pub fn bootstrap_se_pairs<F: Fn(&[f64], &[f64]) -> f64>(
    x: &[f64],
    y: &[f64],
    n_boot: usize,
    seed: u64,
    stat: F,
) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 || n_boot < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    let reps: Vec<f64> = (0..n_boot)
        .map(|_| {
            for k in 0..n {
                let i = rng.random_range(0..n);
                bx[k] = x[i];
                by[k] = y[i];
            }
            stat(&bx, &by)
        })
        .collect();
    Moments::of(&reps).var.sqrt()
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = pairwise_sum(&x[..n]) / n as f64;
    let my = pairwise_sum(&y[..n]) / n as f64;
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    s / (n as f64 - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let c = covariance(x, y);
    let vx = Moments::of(x).var;
    let vy = Moments::of(y).var;
    if vx > 0.0 && vy > 0.0 {
        c / (vx * vy).sqrt()
    } else {
        0.0
    }
}

/// Least-squares slope of `y` on `x` with intercept.
pub fn regression_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let vx = Moments::of(x).var;
    if vx > 0.0 {
        Some(covariance(x, y) / vx)
    } else {
        None
    }
}

/// Standard error of the mean of weighted Monte Carlo terms.
pub fn mean_and_se(x: &[f64]) -> (f64, f64) {
    let m = Moments::of(x);
    (m.mean, m.se_mean())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_known_sample() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let m = Moments::of(&x);
        assert_eq!(m.mean, 2.5);
        assert!((m.var - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness().abs() < 1e-15);
    }

    #[test]
    fn constant_sample_has_zero_errors() {
        let x = vec![0.0; 10];
        let e = McEstimate::with_bootstrap(&x, 100, 1);
        assert_eq!((e.mean, e.variance, e.se_mean, e.se_variance), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(e.z_mean(0.0), 0.0);
    }

    #[test]
    fn bootstrap_se_of_variance_is_close_to_normal_theory() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = McEstimate::with_bootstrap(&x, 1000, 9);
        // Var(s²) ≈ 2σ⁴/n for Gaussian data
        let theory = (2.0 / 2000.0f64).sqrt();
        assert!((e.se_variance / theory - 1.0).abs() < 0.15);
    }

    #[test]
    fn regression_and_correlation() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        assert!((regression_slope(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert!((correlation(&x, &y) - 1.0).abs() < 1e-12);
        assert!(regression_slope(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }

    #[test]
    fn pairwise_sum_is_order_stable() {
        let x: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let s = pairwise_sum(&x);
        let naive: f64 = x.iter().sum();
        assert!((s - naive).abs() < 1e-12);
    }
}
