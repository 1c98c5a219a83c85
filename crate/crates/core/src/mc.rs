//! Seeded, order-deterministic Monte Carlo plumbing.
//!
//! Each trial owns a ChaCha8 stream derived from `(seed, trial index)`. Trials run
//! in parallel but their outputs are collected in trial order, so every reduction
//! is bit-reproducible regardless of thread scheduling.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Gate used by every stochastic check.
pub const Z_GATE: f64 = 4.0;

/// RNG for one trial of one experiment.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Derives an experiment-specific seed from a master seed and a label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    // FNV-1a over the label, then a splitmix64 finaliser.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `trials` independent trials in parallel and returns their outputs in
/// trial order.
pub fn run_trials<T, F>(seed: u64, trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            f(i, &mut rng)
        })
        .collect()
}

/// Fallible variant of [`run_trials`]; the first error in trial order wins.
pub fn try_run_trials<T, E, F>(seed: u64, trials: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T, E> + Sync + Send,
{
    run_trials(seed, trials, f).into_iter().collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Proportion estimate with the binomial SE under the hypothesised `p0`.
    pub fn proportion(hits: usize, n: usize, p0: f64) -> Self {
        Self {
            mean: hits as f64 / n as f64,
            se: (p0 * (1.0 - p0) / n as f64).sqrt(),
            n,
        }
    }

    pub fn z(&self, target: f64) -> f64 {
        z_score(self.mean, target, self.se)
    }
}

/// `(estimate - target) / se`, with `0/0 = 0` (exact agreement of a degenerate
/// estimator).
pub fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let d = estimate - target;
    if d == 0.0 {
        0.0
    } else if se > 0.0 {
        d / se
    } else {
        f64::INFINITY * d.signum()
    }
}

/// Componentwise complex mean with SEs of the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub n: usize,
}

impl ComplexEstimate {
    pub fn from_samples(zs: &[Complex64]) -> Self {
        let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
        let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
        let r = Estimate::from_samples(&re);
        let i = Estimate::from_samples(&im);
        Self {
            mean: Complex64::new(r.mean, i.mean),
            se_re: r.se,
            se_im: i.se,
            n: zs.len(),
        }
    }

    /// Larger of the two componentwise z-scores, in absolute value.
    pub fn max_abs_z(&self, target: Complex64) -> f64 {
        z_score(self.mean.re, target.re, self.se_re)
            .abs()
            .max(z_score(self.mean.im, target.im, self.se_im).abs())
    }
}

/// Sample variance with an SE from the fourth central moment.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    Estimate {
        mean: var,
        se: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        n: xs.len(),
    }
}
