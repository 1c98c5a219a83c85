//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval is split at caller-supplied breakpoints first; afterwards the
//! panel with the largest error estimate is bisected until the summed estimate
//! meets the tolerance. The error estimate of a panel is `|K15 - G7|`, i.e. the
//! difference between the nested Kronrod and Gauss rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance for all measure integrals.
pub const DEFAULT_TOL: f64 = 1e-10;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: DEFAULT_TOL,
            rel_tol: 1e-13,
            max_panels: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    (value, error)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Integrates `f` over `[a, b]` splitting first at the points of `breaks` that
/// fall strictly inside the interval.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument(format!(
            "quadrature needs a finite interval, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi && x.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        total += v;
        total_err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }

    let target = |value: f64| opts.abs_tol.max(opts.rel_tol * value.abs());
    while total_err > target(total) {
        if heap.len() >= opts.max_panels {
            return Err(Error::Numeric {
                what: format!(
                    "quadrature on [{lo}, {hi}] exhausted {} panels",
                    opts.max_panels
                ),
                residual: total_err,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating resolution; its contribution cannot improve.
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            total_err -= worst.error;
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed the drift of incremental updates.
    let panels = heap.len();
    let (value, error) = heap
        .into_sorted_vec()
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult {
        value: sign * value,
        error,
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-13);
    }

    #[test]
    fn smooth_exponential() {
        let r = integrate(|x| (-x).exp(), 0.0, 50.0, QuadOptions::default()).unwrap();
        assert!((r.value - (1.0 - (-50.0f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn step_without_breaks_still_converges() {
        let r = integrate(
            |x| if x < 0.3 { 1.0 } else { 2.0 },
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 1.7).abs() < 1e-9);
    }

    #[test]
    fn breaks_make_steps_cheap() {
        let r = integrate_with_breaks(
            |x| if x < 0.3 { 1.0 } else { 2.0 },
            0.0,
            1.0,
            &[0.3],
            QuadOptions::default(),
        )
        .unwrap();
        assert!((r.value - 1.7).abs() < 1e-13);
        assert_eq!(r.panels, 2);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let r = integrate(|x| x, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_integrand() {
        let r = integrate(|x| (7.0 * x).cos(), 0.0, 3.0, QuadOptions::default()).unwrap();
        assert!((r.value - (21.0f64).sin() / 7.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_interval_rejected() {
        assert!(integrate(|x| x, 0.0, f64::INFINITY, QuadOptions::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_residual() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_panels: 3,
        };
        match integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, opts) {
            Err(Error::Numeric { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }
}
