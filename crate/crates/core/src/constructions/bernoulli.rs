//! Bernoulli shift with rare symbols and a density `F = 1 + Σ_k Y_k`.
//!
//! Level `k` is an iid sequence whose distinguished symbol has probability
//! `p_k = 4^{−k} k^{−2}`; `f_k∘T^j` indicates the symbol at position `j`, and
//! `Y_k = Σ_{j<2^k} 2^k f_k∘T^j` is `2^k` times the number of rare symbols in
//! a window of length `2^k`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use super::ProductBase;
use crate::dynamics::{summability, Summability};
use crate::error::{arg, Error, Result};
use crate::mc::{self, Estimate};

/// `p_k = 4^{−k} k^{−2}`.
pub fn rare_probability(k: usize) -> f64 {
    4f64.powi(-(k as i32)) / (k * k) as f64
}

/// `‖Y_k − Y_k∘Tⁿ‖₂²`: `2^{k+1}/k²·(1 − p_k)` once `2^k ≤ |n|`, else
/// `2|n|/k²·(1 − p_k)`.
pub fn norm_closed_form(k: usize, n: i64) -> f64 {
    let m = n.unsigned_abs() as f64;
    let kf = k as f64;
    let len = 2f64.powi(k as i32);
    2.0 * len.min(m) / (kf * kf) * (1.0 - rare_probability(k))
}

/// `‖F − F∘Tⁿ‖₂² = Σ_k ‖Y_k − Y_k∘Tⁿ‖₂²` over all levels. Levels with
/// `2^k > |n|` contribute `2|n|·Σ_{k>k₀}(1 − p_k)/k²`, summed through
/// `Σ 1/k² = π²/6`.
pub fn total_norm(n: i64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = n.unsigned_abs();
    let k0 = (63 - m.leading_zeros()) as usize;
    let head: f64 = (1..=k0).map(|k| norm_closed_form(k, n)).sum();
    let inv_sq: f64 =
        std::f64::consts::PI.powi(2) / 6.0 - (1..=k0).map(|k| 1.0 / (k * k) as f64).sum::<f64>();
    let rare: f64 = (k0 + 1..=k0 + 40)
        .map(|k| rare_probability(k) / (k * k) as f64)
        .sum();
    head + 2.0 * m as f64 * (inv_sq - rare)
}

/// `Σ_k ℙ(Y_k ≠ 0) ≤ Σ_k 2^k p_k = Σ 1/(2^k k²)`.
pub fn borel_cantelli_sum() -> f64 {
    (1..200).map(|k| 2f64.powi(-k) / (k * k) as f64).sum()
}

/// `Σ_{k>K} E[Y_k] = Σ_{k>K} 1/k²`.
pub fn truncation_tail(levels: usize) -> f64 {
    std::f64::consts::PI.powi(2) / 6.0 - (1..=levels).map(|k| 1.0 / (k * k) as f64).sum::<f64>()
}

/// Positions in `[0, len)` carrying the rare symbol, by geometric skipping.
pub fn rare_positions<R: Rng + ?Sized>(p: f64, len: usize, rng: &mut R) -> Result<Vec<usize>> {
    let geo =
        Geometric::new(p).map_err(|e| Error::Argument(format!("rare probability {p}: {e}")))?;
    let mut out = Vec::new();
    let mut pos: u64 = 0;
    loop {
        let gap = geo.sample(rng);
        pos = match pos.checked_add(gap) {
            Some(v) if v < len as u64 => v,
            _ => break,
        };
        out.push(pos as usize);
        pos += 1;
    }
    Ok(out)
}

/// `#{rare positions in [s, s + len)}` for sorted positions.
fn count_in(positions: &[usize], s: usize, len: usize) -> usize {
    let lo = positions.partition_point(|&p| p < s);
    let hi = positions.partition_point(|&p| p < s + len);
    hi - lo
}

/// The truncated example with `levels` materialised.
#[derive(Debug, Clone, Serialize)]
pub struct BernoulliExample {
    levels: usize,
}

/// Materialised rare positions on `[0, span)` for each level.
#[derive(Debug, Clone)]
pub struct BernoulliSample {
    rare: Vec<Vec<usize>>,
    span: usize,
}

impl BernoulliSample {
    /// `Y_k∘T^s`.
    pub fn y(&self, k: usize, s: usize) -> f64 {
        let len = 1usize << k;
        assert!(s + len <= self.span, "shift outside the materialised span");
        len as f64 * count_in(&self.rare[k - 1], s, len) as f64
    }

    /// `F∘T^s` truncated to the materialised levels.
    pub fn f(&self, s: usize) -> f64 {
        1.0 + (1..=self.rare.len()).map(|k| self.y(k, s)).sum::<f64>()
    }
}

impl BernoulliExample {
    pub fn build(levels: usize) -> Result<Self> {
        if levels < 3 {
            return arg("the Bernoulli example needs at least three levels");
        }
        if levels > 40 {
            return arg("at most 40 levels can be materialised");
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn base(&self) -> ProductBase {
        ProductBase {
            levels: self.levels,
            symbol_probability: (1..=self.levels).map(rare_probability).collect(),
            action: "shift".into(),
            tail_bound: truncation_tail(self.levels),
        }
    }

    /// Draws every level on `[0, span)`.
    pub fn sample<R: Rng + ?Sized>(&self, span: usize, rng: &mut R) -> Result<BernoulliSample> {
        let rare = (1..=self.levels)
            .map(|k| rare_positions(rare_probability(k), span, rng))
            .collect::<Result<_>>()?;
        Ok(BernoulliSample { rare, span })
    }
}

/// Monte Carlo `‖Y_k − Y_k∘Tⁿ‖₂²` against the closed form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormRecord {
    pub k: usize,
    pub n: i64,
    pub estimate: f64,
    pub target: f64,
    /// Standard error under the closed-form law.
    pub se: f64,
    pub z: f64,
}

impl NormRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

/// `Var(S²)` for `S` a difference of two sums of `m` iid centred Bernoulli(p)
/// variables over disjoint index sets: `E S⁴ = 2qm + 12q²m(m−1)` and
/// `E S² = 2qm`, with `q = p(1−p)`.
fn square_variance(p: f64, m: f64) -> f64 {
    let q = p * (1.0 - p);
    2.0 * q * m + 12.0 * q * q * m * (m - 1.0) - 4.0 * q * q * m * m
}

/// Estimates for each `k ≤ kmax` and each shift in `ns`. The rare symbols are
/// so rare that sample variances are unreliable; the SE is computed under the
/// closed-form law instead.
pub fn bernoulli_norm_check(
    kmax: usize,
    ns: &[i64],
    trials: usize,
    seed: u64,
) -> Result<Vec<NormRecord>> {
    let nmax = ns
        .iter()
        .map(|n| n.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    let span = (1usize << kmax) + nmax;
    let rows: Vec<Vec<f64>> = mc::try_run_trials(seed, trials, |_, rng| {
        let mut out = Vec::with_capacity(kmax * ns.len());
        for k in 1..=kmax {
            let rare = rare_positions(rare_probability(k), span, rng)?;
            let len = 1usize << k;
            let base = count_in(&rare, 0, len) as f64;
            for &n in ns {
                let shifted = count_in(&rare, n.unsigned_abs() as usize, len) as f64;
                out.push((len as f64 * (base - shifted)).powi(2));
            }
        }
        Ok::<_, Error>(out)
    })?;
    let mut records = Vec::new();
    for k in 1..=kmax {
        for (j, &n) in ns.iter().enumerate() {
            let col = (k - 1) * ns.len() + j;
            let xs: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            let mean = Estimate::from_samples(&xs).mean;
            let target = norm_closed_form(k, n);
            let m = (1u64 << k).min(n.unsigned_abs()) as f64;
            let se = 4f64.powi(k as i32)
                * (square_variance(rare_probability(k), m) / trials as f64).sqrt();
            records.push(NormRecord {
                k,
                n,
                estimate: mean,
                target,
                se,
                z: mc::z_score(mean, target, se),
            });
        }
    }
    Ok(records)
}

/// `e^{−½‖F − F∘Tⁿ‖₂²}` for `|n| ≤ reach`, ordered `0, 1, −1, 2, −2, …`, and
/// the same series extended analytically to `|n| ≤ tail_reach`.
#[derive(Debug, Clone, Serialize)]
pub struct BernoulliDissipativity {
    pub terms: Vec<(i64, f64)>,
    pub series: Summability,
    pub extended: Summability,
    /// `min_{2≤|n|≤reach} ‖F − F∘Tⁿ‖² log₂²|n| / |n|`.
    pub lower_bound_constant: f64,
}

impl BernoulliDissipativity {
    pub fn pass(&self) -> bool {
        self.series.partial_sums.windows(2).all(|w| w[1] >= w[0])
            && self.extended.summable
            && self.lower_bound_constant > 0.0
    }
}

pub fn bernoulli_dissipativity(reach: i64, tail_reach: i64) -> BernoulliDissipativity {
    let order = |r: i64| -> Vec<i64> {
        std::iter::once(0)
            .chain((1..=r).flat_map(|n| [n, -n]))
            .collect()
    };
    let terms: Vec<(i64, f64)> = order(reach)
        .into_iter()
        .map(|n| (n, (-0.5 * total_norm(n)).exp()))
        .collect();
    let series = summability(&terms.iter().map(|t| t.1).collect::<Vec<_>>());
    let extended: Vec<f64> = order(tail_reach.max(reach))
        .into_iter()
        .map(|n| (-0.5 * total_norm(n)).exp())
        .collect();
    let lower_bound_constant = (2..=reach.max(2))
        .map(|n| total_norm(n) * (n as f64).log2().powi(2) / n as f64)
        .fold(f64::INFINITY, f64::min);
    BernoulliDissipativity {
        terms,
        series,
        extended: summability(&extended),
        lower_bound_constant,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::trial_rng;

    #[test]
    fn closed_forms() {
        assert_eq!(norm_closed_form(3, 0), 0.0);
        assert!((norm_closed_form(1, 2) - 3.0).abs() < 1e-15);
        // below the block length only |n| positions differ
        assert!((norm_closed_form(3, 2) - 4.0 / 9.0 * (1.0 - rare_probability(3))).abs() < 1e-15);
        assert_eq!(norm_closed_form(4, 5), norm_closed_form(4, -5));
    }

    #[test]
    fn total_norm_matches_brute_force_series() {
        for n in [1i64, 3, 16, -40] {
            // direct sum to 10⁶ levels plus the ∫ tail 2|n|/K
            let kmax = 1_000_000;
            let direct: f64 = (1..=kmax).map(|k| norm_closed_form(k, n)).sum::<f64>()
                + 2.0 * n.unsigned_abs() as f64 / (kmax as f64 + 0.5);
            assert!((total_norm(n) - direct).abs() < 1e-9 * direct, "{n}");
        }
    }

    #[test]
    fn borel_cantelli_is_dilogarithm_at_half() {
        let li2_half = std::f64::consts::PI.powi(2) / 12.0 - 2f64.ln().powi(2) / 2.0;
        assert!((borel_cantelli_sum() - li2_half).abs() < 1e-14);
    }

    #[test]
    fn truncation_tail_matches_basel() {
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        let head: f64 = (1..=8).map(|k| 1.0 / (k * k) as f64).sum();
        assert!((truncation_tail(8) - (basel - head)).abs() < 1e-12);
    }

    #[test]
    fn f_is_at_least_one_and_local() {
        let ex = BernoulliExample::build(8).unwrap();
        let mut rng = trial_rng(3, 0);
        for _ in 0..200 {
            let s = ex.sample(600, &mut rng).unwrap();
            for shift in [0, 5, 40] {
                assert!(s.f(shift) >= 1.0);
            }
        }
        assert!(BernoulliExample::build(2).is_err());
    }

    #[test]
    fn rare_position_frequency() {
        let mut rng = trial_rng(9, 0);
        let p = 0.01;
        let n: usize = (0..2000)
            .map(|_| rare_positions(p, 100, &mut rng).unwrap().len())
            .sum();
        let expected = 2000.0 * 100.0 * p;
        assert!((n as f64 - expected).abs() < 4.0 * expected.sqrt());
    }

    #[test]
    fn zero_shift_has_zero_norm() {
        let recs = bernoulli_norm_check(3, &[0], 1000, 1).unwrap();
        assert!(recs.iter().all(|r| r.estimate == 0.0 && r.z == 0.0));
    }

    #[test]
    fn low_levels_match_closed_form() {
        let recs = bernoulli_norm_check(3, &[1, 2, 4, 8], 20_000, 2).unwrap();
        assert!(recs.iter().all(|r| r.pass()), "{recs:?}");
    }

    #[test]
    fn dissipativity_series() {
        let d = bernoulli_dissipativity(64, 4096);
        assert!(d.pass(), "{:?}", (d.extended.tail, d.lower_bound_constant));
        assert!(!d.series.summable || d.series.tail < 1e-12);
    }
}
