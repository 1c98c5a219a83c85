//! Diagonal odometer action with almost-invariant digit sets.
//!
//! Each coordinate `x_j` is a 2-adic integer and `S_g x = x + g`. Level `n`
//! uses the set `A_n = {digit L(n) of x is 0}` and the block
//! `I_n = [n(n−1)/2, n(n+1)/2)`; `B_n = {x_j ∈ A_n for all j ∈ I_n}`, so
//! `ℙ(B_n) = 2^{−n}`. The density is `F² = 1 + Σ_{n≤K} 2ⁿ 1_{B_n}`.

use rand::Rng;
use serde::Serialize;

use super::ProductBase;
use crate::dynamics::KappaMeasure;
use crate::error::{arg, Error, Result};
use crate::mc::{self, Estimate};

/// Levels summed when evaluating analytic series.
const SERIES_LEVELS: usize = 40;

/// Which digit carries the set `A_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DigitFamily {
    /// `L(n) = n² + ⌈log₂ n⌉ + ⌈log₂(n+1)⌉`, so a shift by `|g| ≤ n+1` flips
    /// the digit with probability at most `2^{−n²}/n`.
    HighDigit,
    /// `L(n) = n`; too coarse for the almost-invariance bound.
    Coordinate,
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

impl DigitFamily {
    pub fn digit(&self, n: usize) -> u32 {
        let n64 = n as u64;
        match self {
            DigitFamily::HighDigit => (n64 * n64) as u32 + ceil_log2(n64) + ceil_log2(n64 + 1),
            DigitFamily::Coordinate => n as u32,
        }
    }
}

/// `K_n = [−(n+1), n+1]`.
pub fn window_radius(n: usize) -> i64 {
    n as i64 + 1
}

/// `2^{−n²}/n`.
pub fn almost_invariance_bound(n: usize) -> f64 {
    2f64.powi(-((n * n) as i32)) / n as f64
}

/// Probability that adding `g` changes digit `level` of a Haar-random 2-adic
/// integer. Writing `g = q·2^L + s` with `0 ≤ s < 2^L`, the digit flips when
/// `q + carry` is odd, and a carry happens with probability `s/2^L`.
pub fn flip_probability(g: i64, level: u32) -> f64 {
    if g == 0 {
        return 0.0;
    }
    if level >= 62 {
        // q ∈ {0, −1}; the flip probability is |g|/2^L either way
        return g.unsigned_abs() as f64 * 2f64.powi(-(level as i32));
    }
    let p = 1i64 << level;
    let q = g.div_euclid(p);
    let frac = g.rem_euclid(p) as f64 / p as f64;
    if q.rem_euclid(2) == 0 {
        frac
    } else {
        1.0 - frac
    }
}

/// `1 − (1 − d)^n` without cancellation.
fn any_of(d: f64, n: usize) -> f64 {
    if d >= 1.0 {
        return 1.0;
    }
    -(n as f64 * (-d).ln_1p()).exp_m1()
}

/// Coordinates of block `n`.
pub fn block(n: usize) -> std::ops::Range<usize> {
    n * (n - 1) / 2..n * (n + 1) / 2
}

/// `C_N = Σ_{n<N}(n+3)2^{n+1} + Σ_{n≥N}(n+2)2^{n+1}2^{−n²}`.
pub fn c_constant(big_n: usize) -> f64 {
    (1..SERIES_LEVELS)
        .map(|n| {
            let nf = n as f64;
            if n < big_n {
                (nf + 3.0) * 2f64.powi(n as i32 + 1)
            } else {
                (nf + 2.0) * 2f64.powf(nf + 1.0 - nf * nf)
            }
        })
        .sum()
}

/// Smallest `N ≥ 1` with `g ∈ K_n` for every `n ≥ N`.
pub fn first_window(g: i64) -> usize {
    (g.unsigned_abs() as usize).saturating_sub(1).max(1)
}

/// High bits `64..L` of a coordinate, when `L > 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum High {
    None,
    Zeros,
    Ones,
    Mixed,
}

/// Digits `0..=L` of one coordinate, as far as small shifts can see them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Coordinate {
    low: u64,
    high: High,
    digit: bool,
}

impl Coordinate {
    fn sample<R: Rng + ?Sized>(level: u32, rng: &mut R) -> Self {
        let raw: u64 = rng.random();
        let (low, high) = if level >= 64 {
            let extra = (level - 64) as i32;
            let p = 2f64.powi(-extra);
            let u: f64 = rng.random();
            let high = if extra == 0 {
                High::None
            } else if u < p {
                High::Zeros
            } else if u < 2.0 * p {
                High::Ones
            } else {
                High::Mixed
            };
            (raw, high)
        } else {
            (raw & ((1u64 << level) - 1), High::None)
        };
        Self {
            low,
            high,
            digit: rng.random(),
        }
    }

    /// Digit `level` of `x + g`.
    fn shifted_digit(&self, level: u32, g: i64) -> bool {
        let carry: i128 = if level < 64 {
            (self.low as i128 + g as i128).div_euclid(1i128 << level)
        } else {
            let c = (self.low as i128 + g as i128).div_euclid(1i128 << 64);
            match (c, self.high) {
                (0, _) => 0,
                (_, High::None) => c,
                (1, High::Ones) => 1,
                (-1, High::Zeros) => -1,
                _ => 0,
            }
        };
        self.digit ^ (carry.rem_euclid(2) == 1)
    }
}

/// One draw of the materialised coordinates.
#[derive(Debug, Clone)]
pub struct PropTSample {
    levels: Vec<Vec<Coordinate>>,
    digits: Vec<u32>,
}

impl PropTSample {
    /// `1_{B_n}(T_g x)` for `n = 1..=K`.
    pub fn in_blocks(&self, g: i64) -> Vec<bool> {
        self.levels
            .iter()
            .zip(&self.digits)
            .map(|(coords, &l)| coords.iter().all(|c| !c.shifted_digit(l, g)))
            .collect()
    }

    /// `F²(T_g x)`.
    pub fn f_squared(&self, g: i64) -> f64 {
        f_squared(&self.in_blocks(g))
    }
}

/// `1 + Σ 2ⁿ 1_{B_n}` from block indicators indexed from `n = 1`.
pub fn f_squared(in_blocks: &[bool]) -> f64 {
    1.0 + in_blocks
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| 2f64.powi(i as i32 + 1))
        .sum::<f64>()
}

/// The truncated construction.
#[derive(Debug, Clone, Serialize)]
pub struct PropTConstruction {
    family: DigitFamily,
    levels: usize,
    digits: Vec<u32>,
}

impl PropTConstruction {
    /// Checks `m(A_n △ S_g A_n) ≤ 2^{−n²}/n` for every `n ≤ levels` and
    /// `g ∈ K_n`, exactly.
    pub fn build(family: DigitFamily, levels: usize) -> Result<Self> {
        if levels == 0 {
            return arg("construction needs at least one level");
        }
        let digits: Vec<u32> = (1..=levels).map(|n| family.digit(n)).collect();
        for n in 1..=levels {
            let bound = almost_invariance_bound(n);
            let r = window_radius(n);
            for g in -r..=r {
                let measured = flip_probability(g, digits[n - 1]);
                if measured > bound * (1.0 + 1e-12) {
                    return Err(Error::ConstructionRejected {
                        n,
                        g,
                        measured,
                        bound,
                    });
                }
            }
        }
        Ok(Self {
            family,
            levels,
            digits,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn digit(&self, n: usize) -> u32 {
        self.digits[n - 1]
    }

    pub fn base(&self) -> ProductBase {
        ProductBase {
            levels: self.levels,
            symbol_probability: vec![0.5; self.levels],
            action: "diagonal dyadic odometer".into(),
            tail_bound: self.tail_bound(),
        }
    }

    /// `Σ_{n>K} ℙ(B_n) = 2^{−K}`.
    pub fn tail_bound(&self) -> f64 {
        2f64.powi(-(self.levels as i32))
    }

    /// `ℙ(B_n △ T_g^{−1} B_n) = 2·2^{−n}(1 − (1 − d)^n)`, `d` the digit flip
    /// probability.
    pub fn block_symdiff(&self, n: usize, g: i64) -> f64 {
        let l = if n <= self.levels {
            self.digits[n - 1]
        } else {
            self.family.digit(n)
        };
        2.0 * 2f64.powi(-(n as i32)) * any_of(flip_probability(g, l), n)
    }

    /// `Σ_n 2ⁿ ℙ(B_n △ T_g^{−1} B_n)`, an upper bound for `‖F² − F²∘T_g‖₁`.
    pub fn exact_l1_majorant(&self, g: i64) -> f64 {
        (1..SERIES_LEVELS)
            .map(|n| 2f64.powi(n as i32) * self.block_symdiff(n, g))
            .sum()
    }

    /// `Σ_{n<N} 2ⁿ + Σ_{n≥N} 2ⁿ 2^{−n²}` with `N` the first window holding `g`.
    pub fn l1_majorant(&self, g: i64) -> f64 {
        let big_n = first_window(g);
        (1..SERIES_LEVELS)
            .map(|n| {
                let nf = n as f64;
                if n < big_n {
                    2f64.powi(n as i32)
                } else {
                    2f64.powf(nf - nf * nf)
                }
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PropTSample {
        let levels = (1..=self.levels)
            .map(|n| {
                let l = self.digits[n - 1];
                block(n).map(|_| Coordinate::sample(l, rng)).collect()
            })
            .collect();
        PropTSample {
            levels,
            digits: self.digits.clone(),
        }
    }
}

/// Monte Carlo integrability figures for one `g`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropTRecord {
    pub g: i64,
    /// `‖F² − F²∘T_g‖₁`.
    pub l1: f64,
    pub l1_se: f64,
    /// `Σ 2ⁿ ℙ(B_n △ T_g^{−1}B_n)`.
    pub l1_exact_majorant: f64,
    /// `Σ_{n<N} 2ⁿ + Σ_{n≥N} 2ⁿ2^{−n²}`.
    pub l1_majorant: f64,
    /// `∫ |log(F²∘T_g / F²)| F² dℙ`.
    pub log_l1: f64,
    pub log_l1_se: f64,
    /// `C_N`.
    pub c_n: f64,
    /// `−∫ log T_g′ dμ`.
    pub entropy_term: f64,
    pub entropy_term_se: f64,
}

impl PropTRecord {
    pub fn pass(&self) -> bool {
        self.l1 <= self.l1_exact_majorant + mc::Z_GATE * self.l1_se
            && self.l1_exact_majorant <= self.l1_majorant * (1.0 + 1e-12)
            && self.log_l1 <= self.c_n + mc::Z_GATE * self.log_l1_se
    }
}

/// `ℙ(B_n)` against `2^{−n}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockRecord {
    pub n: usize,
    pub estimate: f64,
    pub target: f64,
    pub se: f64,
    pub z: f64,
}

impl BlockRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropTReport {
    pub blocks: Vec<BlockRecord>,
    pub records: Vec<PropTRecord>,
    /// `h_κ = Σ κ(g)(−∫ log T_g′ dμ)`.
    pub entropy: f64,
    pub entropy_se: f64,
    /// `h_κ` for `μ_t = tμ`.
    pub scaled_entropy: Vec<(f64, f64)>,
    pub tail_bound: f64,
}

impl PropTReport {
    pub fn entropy_pass(&self) -> bool {
        self.entropy <= 1.0 + mc::Z_GATE * self.entropy_se
            && self.entropy >= -mc::Z_GATE * self.entropy_se
    }

    pub fn pass(&self) -> bool {
        self.entropy_pass()
            && self.blocks.iter().all(|b| b.pass())
            && self.records.iter().all(|r| r.pass())
    }
}

/// Monte Carlo estimates of `ℙ(B_n)`, the `L¹` defects, the `log`-integrability
/// figures and the κ-entropy.
pub fn propt_integrability_report(
    c: &PropTConstruction,
    gs: &[i64],
    kappa: &KappaMeasure,
    scales: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PropTReport> {
    let mut shifts: Vec<i64> = gs.iter().flat_map(|&g| [g, -g]).collect();
    for &(g, _) in kappa.atoms() {
        shifts.push(-g);
    }
    shifts.push(0);
    shifts.sort_unstable();
    shifts.dedup();
    let idx = |g: i64| shifts.binary_search(&g).expect("shift registered");
    let rows: Vec<(Vec<bool>, Vec<f64>)> = mc::run_trials(seed, trials, |_, rng| {
        let x = c.sample(rng);
        let f2: Vec<f64> = shifts.iter().map(|&g| x.f_squared(g)).collect();
        (x.in_blocks(0), f2)
    });

    let blocks = (1..=c.levels)
        .map(|n| {
            let hits = rows.iter().filter(|r| r.0[n - 1]).count();
            let target = 2f64.powi(-(n as i32));
            let e = Estimate::proportion(hits, trials, target);
            BlockRecord {
                n,
                estimate: e.mean,
                target,
                se: e.se,
                z: e.z(target),
            }
        })
        .collect();

    let i0 = idx(0);
    let mut records = Vec::new();
    for &g in gs {
        let (ig, im) = (idx(g), idx(-g));
        let l1: Vec<f64> = rows.iter().map(|r| (r.1[i0] - r.1[ig]).abs()).collect();
        let ll: Vec<f64> = rows
            .iter()
            .map(|r| r.1[i0] * (r.1[ig] / r.1[i0]).ln().abs())
            .collect();
        let et: Vec<f64> = rows
            .iter()
            .map(|r| r.1[i0] * (r.1[i0] / r.1[im]).ln())
            .collect();
        let (l1, ll, et) = (
            Estimate::from_samples(&l1),
            Estimate::from_samples(&ll),
            Estimate::from_samples(&et),
        );
        records.push(PropTRecord {
            g,
            l1: l1.mean,
            l1_se: l1.se,
            l1_exact_majorant: c.exact_l1_majorant(g),
            l1_majorant: c.l1_majorant(g),
            log_l1: ll.mean,
            log_l1_se: ll.se,
            c_n: c_constant(first_window(g)),
            entropy_term: et.mean,
            entropy_term_se: et.se,
        });
    }

    let h: Vec<f64> = rows
        .iter()
        .map(|r| {
            kappa
                .atoms()
                .iter()
                .map(|&(g, p)| p * r.1[i0] * (r.1[i0] / r.1[idx(-g)]).ln())
                .sum()
        })
        .collect();
    let h = Estimate::from_samples(&h);
    Ok(PropTReport {
        blocks,
        records,
        entropy: h.mean,
        entropy_se: h.se,
        scaled_entropy: scales.iter().map(|&t| (t, t * h.mean)).collect(),
        tail_bound: c.tail_bound(),
    })
}
