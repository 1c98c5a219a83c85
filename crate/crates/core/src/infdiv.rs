//! Infinitely divisible laws of stochastic integrals.
//!
//! `I_μ(f) + δ` has characteristic function
//! `exp(iaδ + ∫(e^{iaf} − 1 − iaf·1_{|f|≤1}) dμ)`, with Lévy measure the image of
//! `μ` under `f`. For `log dν*/dμ*` the jump map is `log φ` and `δ = β`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::mc::{self, ComplexEstimate, Estimate};
use crate::measure::{BaseMeasure, RealFn, Window};
use crate::process::ConfigSampler;
use crate::quad::DEFAULT_TOL;
use crate::suspension::{
    default_eps, level_crossings, DensityRatio, StochasticIntegrator, LIMIT_TOL,
};

/// Smallest sample accepted by the empirical characteristic function.
pub const MIN_SAMPLES: usize = 1000;
/// Sub-steps between grid points when tracking root branches.
const BRANCH_SUBSTEPS: usize = 40;

/// `(μ, jump map, drift)`, with no Gaussian part.
#[derive(Clone)]
pub struct LevyData {
    base: BaseMeasure,
    jump: RealFn,
    support: Window,
    breaks: Vec<f64>,
    drift: f64,
    label: String,
}

impl fmt::Debug for LevyData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyData")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("drift", &self.drift)
            .finish()
    }
}

impl LevyData {
    /// Fails unless `∫ jump²∧1 dμ` is finite.
    pub fn new(
        base: &BaseMeasure,
        jump: RealFn,
        support: Window,
        breaks: &[f64],
        drift: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let j = jump.clone();
        let mut cuts = breaks.to_vec();
        cuts.extend(level_crossings(&move |x| j(x).abs(), &support, 1.0));
        let j = jump.clone();
        let envelope =
            base.integrate_with_breaks(|x| j(x).powi(2).min(1.0), &support, &cuts, DEFAULT_TOL)?;
        if !envelope.is_finite() {
            return Err(Error::Precondition {
                norm: "∫ f²∧1 dμ".into(),
                detail: format!("{envelope}"),
            });
        }
        Ok(Self {
            base: base.clone(),
            jump,
            support,
            breaks: cuts,
            drift,
            label: label.into(),
        })
    }

    /// The law of `I_μ(f)`.
    pub fn integral(
        base: &BaseMeasure,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Window,
        breaks: &[f64],
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::new(base, Arc::new(f), support, breaks, 0.0, label)
    }

    /// The law of `log dν*/dμ*` for `ν = φμ`.
    pub fn log_rn(base: &BaseMeasure, d: &DensityRatio) -> Result<Self> {
        let phi = d.phi_fn();
        let beta = d.beta(base)?;
        Self::new(
            base,
            Arc::new(move |x| phi(x).ln()),
            d.support(),
            d.breaks(),
            beta,
            format!("log RN[{}]", d.label()),
        )
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn support(&self) -> Window {
        self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The same jump map against `μ/k`, with drift `δ/k`.
    pub fn divided(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return arg("cannot divide by zero");
        }
        let kf = k as f64;
        Ok(Self {
            base: self.base.scale(1.0 / kf)?,
            jump: self.jump.clone(),
            support: self.support,
            breaks: self.breaks.clone(),
            drift: self.drift / kf,
            label: format!("{}/{k}", self.label),
        })
    }

    /// `log E[e^{ia X}]`, the Lévy exponent.
    pub fn exponent(&self, a: f64) -> Result<Complex64> {
        let j = &self.jump;
        let re = self.base.integrate_with_breaks(
            |x| (a * j(x)).cos() - 1.0,
            &self.support,
            &self.breaks,
            DEFAULT_TOL,
        )?;
        let im = self.base.integrate_with_breaks(
            |x| {
                let v = j(x);
                (a * v).sin() - if v.abs() <= 1.0 { a * v } else { 0.0 }
            },
            &self.support,
            &self.breaks,
            DEFAULT_TOL,
        )?;
        Ok(Complex64::new(re, im + a * self.drift))
    }

    /// `E[X] = δ + ∫_{|f|>1} f dμ`.
    pub fn mean(&self) -> Result<f64> {
        let j = &self.jump;
        let tail = self.base.integrate_with_breaks(
            |x| {
                let v = j(x);
                if v.abs() > 1.0 {
                    v
                } else {
                    0.0
                }
            },
            &self.support,
            &self.breaks,
            DEFAULT_TOL,
        )?;
        Ok(self.drift + tail)
    }

    /// Draws `δ + I_μ(f)` by the ε-limit.
    pub fn sample(&self, trials: usize, seed: u64) -> Result<Vec<f64>> {
        let j = self.jump.clone();
        let integrator = StochasticIntegrator::new(
            move |x| j(x),
            self.support,
            &self.breaks,
            &self.base,
            &default_eps(),
            LIMIT_TOL,
        )?;
        let sampler = ConfigSampler::new(&self.base, self.support)?;
        let drift = self.drift;
        mc::try_run_trials(seed, trials, |_, rng| {
            let omega = sampler.sample(rng)?;
            Ok::<_, Error>(drift + integrator.eval(&omega)?.value)
        })
    }
}

/// `E[e^{iaX}]` from the Lévy data.
pub fn char_fn_analytic(l: &LevyData, a: f64) -> Result<Complex64> {
    if a == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(l.exponent(a)?.exp())
}

/// Sample mean of `e^{ia·x}` with componentwise SEs.
pub fn char_fn_empirical(samples: &[f64], a: f64) -> Result<ComplexEstimate> {
    if samples.len() < MIN_SAMPLES {
        return arg(format!(
            "empirical characteristic function needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        ));
    }
    let zs: Vec<Complex64> = samples
        .iter()
        .map(|&x| Complex64::new(0.0, a * x).exp())
        .collect();
    Ok(ComplexEstimate::from_samples(&zs))
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn a_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

/// 25 points on `[−3, 3]`.
pub fn default_grid() -> Vec<f64> {
    a_grid(-3.0, 3.0, 25)
}

/// Analytic against empirical characteristic function at one `a`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CharFnRecord {
    pub a: f64,
    pub analytic: Complex64,
    pub empirical: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub z: f64,
}

impl CharFnRecord {
    pub fn pass(&self) -> bool {
        self.z <= mc::Z_GATE
    }
}

pub fn char_fn_grid(l: &LevyData, samples: &[f64], grid: &[f64]) -> Result<Vec<CharFnRecord>> {
    grid.iter()
        .map(|&a| {
            let analytic = char_fn_analytic(l, a)?;
            let e = char_fn_empirical(samples, a)?;
            Ok(CharFnRecord {
                a,
                analytic,
                empirical: e.mean,
                se_re: e.se_re,
                se_im: e.se_im,
                z: e.max_abs_z(analytic),
            })
        })
        .collect()
}

/// Writes `a,analytic_re,analytic_im,empirical_re,empirical_im,se_re,se_im`.
pub fn write_char_fn_csv<W: Write>(out: &mut W, records: &[CharFnRecord]) -> Result<()> {
    writeln!(
        out,
        "a,analytic_re,analytic_im,empirical_re,empirical_im,se_re,se_im"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.a, r.analytic.re, r.analytic.im, r.empirical.re, r.empirical.im, r.se_re, r.se_im
        )?;
    }
    Ok(())
}

/// Analytic mean against the sample mean.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanRecord {
    pub analytic: f64,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
}

impl MeanRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

pub fn id_mean_check(l: &LevyData, samples: &[f64]) -> Result<MeanRecord> {
    let analytic = l.mean()?;
    let e = Estimate::from_samples(samples);
    Ok(MeanRecord {
        analytic,
        estimate: e.mean,
        se: e.se,
        z: e.z(analytic),
    })
}

/// Largest `|φ_{μ/k}(a) − φ_μ(a)^{1/k}|` over `grid`, where the root branch is
/// followed continuously from `a = 0`.
pub fn divisibility_probe(l: &LevyData, k: usize, grid: &[f64]) -> Result<f64> {
    let part = l.divided(k)?;
    let mut worst: f64 = 0.0;
    for &target in grid {
        let steps = BRANCH_SUBSTEPS * (1 + (target.abs() * 4.0).ceil() as usize);
        let mut root = Complex64::new(1.0, 0.0);
        for s in 1..=steps {
            let a = target * s as f64 / steps as f64;
            let full = char_fn_analytic(l, a)?;
            root = nearest_root(full, k, root);
        }
        let direct = char_fn_analytic(&part, target)?;
        worst = worst.max((direct - root).norm());
    }
    Ok(worst)
}

/// The `k`-th root of `z` closest to `prev`.
fn nearest_root(z: Complex64, k: usize, prev: Complex64) -> Complex64 {
    let base = z.powf(1.0 / k as f64);
    (0..k)
        .map(|j| base * Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / k as f64))
        .min_by(|x, y| (x - prev).norm().total_cmp(&(y - prev).norm()))
        .expect("k > 0")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn value_at_zero_is_one() {
        let m = BaseMeasure::lebesgue();
        let l = LevyData::integral(&m, |_| 0.7, w(0.0, 1.0), &[], "c").unwrap();
        assert_eq!(char_fn_analytic(&l, 0.0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn constant_jump_matches_scalar_poisson() {
        let m = BaseMeasure::lebesgue();
        for (c, mass) in [(0.5, 2.0), (3.0, 1.0), (-2.0, 0.5)] {
            let l = LevyData::integral(&m, move |_| c, w(0.0, mass), &[], "c").unwrap();
            for a in [-2.0, 0.3, 1.7] {
                let comp = if f64::abs(c) <= 1.0 { a * c } else { 0.0 };
                let oracle =
                    (Complex64::new(0.0, a * c).exp() - 1.0 - Complex64::new(0.0, comp)) * mass;
                let got = char_fn_analytic(&l, a).unwrap();
                assert!((got - oracle.exp()).norm() < 1e-12, "{c} {a}");
            }
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let m = BaseMeasure::lebesgue();
        let l = LevyData::integral(&m, |x| 2.0 * x, w(0.0, 1.0), &[], "2x").unwrap();
        for a in [0.4, 1.1, 2.9] {
            let p = char_fn_analytic(&l, a).unwrap();
            let q = char_fn_analytic(&l, -a).unwrap();
            assert!((p - q.conj()).norm() < 1e-15);
            assert!(p.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn empirical_edge_cases() {
        let samples = vec![0.5; 1000];
        let e = char_fn_empirical(&samples, 2.0).unwrap();
        assert!((e.mean - Complex64::new(0.0, 1.0).exp()).norm() < 1e-12);
        let e = char_fn_empirical(&samples, 0.0).unwrap();
        assert_eq!(e.mean, Complex64::new(1.0, 0.0));
        assert_eq!(e.se_re, 0.0);
        assert!(char_fn_empirical(&samples[..10], 1.0).is_err());
    }

    #[test]
    fn means_of_single_scale_integrals() {
        let m = BaseMeasure::lebesgue();
        let l = LevyData::integral(&m, |_| 3.0, w(0.0, 1.0), &[], "3").unwrap();
        assert!((l.mean().unwrap() - 3.0).abs() < 1e-12);
        let l = LevyData::integral(&m, |_| 0.5, w(0.0, 2.0), &[], "0.5").unwrap();
        assert_eq!(l.mean().unwrap(), 0.0);
        let l = LevyData::integral(&m, |x| 2.0 * x, w(0.0, 1.0), &[], "2x").unwrap();
        assert!((l.mean().unwrap() - 0.75).abs() < 1e-10);
    }

    #[test]
    fn log_rn_mean_is_expected_log_rn() {
        let m = BaseMeasure::lebesgue();
        for d in [
            DensityRatio::step(5.0, w(0.0, 1.0)).unwrap(),
            DensityRatio::sine(0.9, w(0.0, 2.0)).unwrap(),
        ] {
            let l = LevyData::log_rn(&m, &d).unwrap();
            assert!((l.mean().unwrap() - d.expected_log_rn(&m).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn divisibility_on_grid() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::sine(0.8, w(0.0, 1.0)).unwrap();
        let l = LevyData::log_rn(&m, &d).unwrap();
        for k in [2, 3] {
            assert!(divisibility_probe(&l, k, &default_grid()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn empirical_matches_analytic() {
        let m = BaseMeasure::lebesgue();
        let l = LevyData::integral(&m, |x| 2.0 * x, w(0.0, 1.0), &[], "2x").unwrap();
        let xs = l.sample(5000, 3).unwrap();
        let recs = char_fn_grid(&l, &xs, &default_grid()).unwrap();
        assert!(recs.iter().all(|r| r.pass()), "{recs:?}");
        assert!(id_mean_check(&l, &xs).unwrap().pass());
    }
}
