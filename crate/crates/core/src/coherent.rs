//! Coherent vectors `Exp f(ω) = e^{−∫f dμ} ∏_{x∈ω} (1 + f(x))`, the bullet
//! product, extended coherent vectors, the affine Koopman operator and the
//! Weyl-operator identity.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{arg, Result};
use crate::mc::{self, ComplexEstimate};
use crate::measure::{BaseMeasure, RealFn, Support, Window};
use crate::nsmap::{self, NsMap, Schedule};
use crate::process::{self, ConfigSampler, PointConfig};
use crate::quad::DEFAULT_TOL;
use crate::suspension::SuspendedRn;

/// A real or complex function with bounded support.
#[derive(Clone)]
pub struct TestFunction {
    re: RealFn,
    im: Option<RealFn>,
    support: Support,
    breaks: Vec<f64>,
    cone: bool,
    label: String,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("support", &self.support)
            .field("complex", &self.im.is_some())
            .field("cone", &self.cone)
            .finish()
    }
}

impl TestFunction {
    pub fn zero() -> Self {
        Self {
            re: Arc::new(|_| 0.0),
            im: None,
            support: Support::Empty,
            breaks: Vec::new(),
            cone: true,
            label: "0".into(),
        }
    }

    /// A real function vanishing outside `support`. `breaks` lists its
    /// discontinuities.
    pub fn real(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Window,
        breaks: &[f64],
        label: impl Into<String>,
    ) -> Self {
        Self::from_fn(Arc::new(f), None, Support::Within(support), breaks, label)
    }

    pub fn complex(
        re: impl Fn(f64) -> f64 + Send + Sync + 'static,
        im: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Window,
        breaks: &[f64],
        label: impl Into<String>,
    ) -> Self {
        Self::from_fn(
            Arc::new(re),
            Some(Arc::new(im)),
            Support::Within(support),
            breaks,
            label,
        )
    }

    fn from_fn(
        re: RealFn,
        im: Option<RealFn>,
        support: Support,
        breaks: &[f64],
        label: impl Into<String>,
    ) -> Self {
        let mut breaks: Vec<f64> = breaks.iter().copied().filter(|b| b.is_finite()).collect();
        if let Support::Within(w) = support {
            breaks.push(w.lo);
            breaks.push(w.hi);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Self {
            re,
            im,
            support,
            breaks,
            cone: false,
            label: label.into(),
        }
    }

    /// `c·1_A`.
    pub fn indicator(c: f64, a: Window) -> Self {
        Self::real(move |_| c, a, &[], format!("{c}·1{a}"))
    }

    /// Marks `f` as a member of the cone `f ≥ −1`, checking a grid of 2001
    /// points across the support.
    pub fn into_cone(mut self) -> Result<Self> {
        if self.im.is_some() {
            return arg("cone members must be real");
        }
        if let Support::Within(w) = self.support {
            for k in 0..=2000 {
                let x = w.lo + w.length() * k as f64 / 2000.0;
                if self.eval_re(x) < -1.0 {
                    return arg(format!(
                        "{} takes the value {} < -1 at {x}",
                        self.label,
                        self.eval_re(x)
                    ));
                }
            }
        }
        self.cone = true;
        Ok(self)
    }

    pub fn is_cone(&self) -> bool {
        self.cone
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn inside(&self, x: f64) -> bool {
        match self.support {
            Support::Empty => false,
            Support::Within(w) => w.contains(x),
            Support::Unbounded => true,
        }
    }

    /// Real part at `x` (zero off the support).
    pub fn eval_re(&self, x: f64) -> f64 {
        if self.inside(x) {
            (self.re)(x)
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        if !self.inside(x) {
            return Complex64::new(0.0, 0.0);
        }
        let im = self.im.as_ref().map_or(0.0, |g| g(x));
        Complex64::new((self.re)(x), im)
    }

    /// `∫ f dμ`.
    pub fn integral(&self, m: &BaseMeasure) -> Result<Complex64> {
        let Support::Within(w) = self.support else {
            return Ok(Complex64::new(0.0, 0.0));
        };
        let re = m.integrate_with_breaks(|x| (self.re)(x), &w, &self.breaks, DEFAULT_TOL)?;
        let im = match &self.im {
            Some(g) => m.integrate_with_breaks(|x| g(x), &w, &self.breaks, DEFAULT_TOL)?,
            None => 0.0,
        };
        Ok(Complex64::new(re, im))
    }

    /// `‖f‖₂²`.
    pub fn norm2(&self, m: &BaseMeasure) -> Result<f64> {
        pairing(self, self, m).map(|z| z.re)
    }

    fn support_window(&self) -> Option<Window> {
        self.support.window()
    }
}

/// `f•g = (1+f)(1+g) − 1`.
pub fn bullet(f: &TestFunction, g: &TestFunction) -> TestFunction {
    let (f1, g1) = (f.clone(), g.clone());
    let support = f.support.hull(&g.support);
    let mut breaks = f.breaks.clone();
    breaks.extend_from_slice(&g.breaks);
    let label = format!("({})•({})", f.label, g.label);
    if f.is_real() && g.is_real() {
        let re: RealFn = Arc::new(move |x| {
            let (a, b) = (f1.eval_re(x), g1.eval_re(x));
            a + b + a * b
        });
        let mut out = TestFunction::from_fn(re, None, support, &breaks, label);
        out.cone = f.cone && g.cone;
        return out;
    }
    let (f2, g2) = (f.clone(), g.clone());
    let re: RealFn = Arc::new(move |x| {
        let (a, b) = (f1.eval(x), g1.eval(x));
        (a + b + a * b).re
    });
    let im: RealFn = Arc::new(move |x| {
        let (a, b) = (f2.eval(x), g2.eval(x));
        (a + b + a * b).im
    });
    TestFunction::from_fn(re, Some(im), support, &breaks, label)
}

/// `⟨f, g⟩ = ∫ f·ḡ dμ`: bilinear for real functions, conjugate-linear in the
/// second slot otherwise.
pub fn pairing(f: &TestFunction, g: &TestFunction, m: &BaseMeasure) -> Result<Complex64> {
    product_integral(f, g, m, true)
}

/// `∫ f·g dμ` without conjugation.
pub fn bilinear(f: &TestFunction, g: &TestFunction, m: &BaseMeasure) -> Result<Complex64> {
    product_integral(f, g, m, false)
}

fn product_integral(
    f: &TestFunction,
    g: &TestFunction,
    m: &BaseMeasure,
    conj: bool,
) -> Result<Complex64> {
    let (Some(a), Some(b)) = (f.support_window(), g.support_window()) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let Some(w) = a.intersect(&b) else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let mut breaks = f.breaks.clone();
    breaks.extend_from_slice(&g.breaks);
    let prod = |x: f64| {
        let gv = g.eval(x);
        f.eval(x) * if conj { gv.conj() } else { gv }
    };
    let re = m.integrate_with_breaks(|x| prod(x).re, &w, &breaks, DEFAULT_TOL)?;
    let im = if f.is_real() && g.is_real() {
        0.0
    } else {
        m.integrate_with_breaks(|x| prod(x).im, &w, &breaks, DEFAULT_TOL)?
    };
    Ok(Complex64::new(re, im))
}

/// `∏ (1 + f(x))` over points of `ω` in the support; accumulated in log space
/// with the sign tracked separately for real `f`.
fn point_product(f: &TestFunction, points: &[f64]) -> Complex64 {
    if f.is_real() {
        let mut log = 0.0;
        let mut negative = false;
        for &x in points {
            let v = 1.0 + f.eval_re(x);
            if v == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            negative ^= v < 0.0;
            log += v.abs().ln();
        }
        let mag = log.exp();
        Complex64::new(if negative { -mag } else { mag }, 0.0)
    } else {
        points
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &x| acc * (1.0 + f.eval(x)))
    }
}

/// `Exp f` with `∫ f dμ` precomputed, for repeated pathwise evaluation.
#[derive(Debug, Clone)]
pub struct Coherent {
    f: TestFunction,
    integral: Complex64,
}

impl Coherent {
    pub fn new(f: &TestFunction, m: &BaseMeasure) -> Result<Self> {
        Ok(Self {
            f: f.clone(),
            integral: f.integral(m)?,
        })
    }

    pub fn function(&self) -> &TestFunction {
        &self.f
    }

    pub fn integral(&self) -> Complex64 {
        self.integral
    }

    /// `Exp f(ω)`; the support of `f` must have been observed.
    pub fn eval(&self, omega: &PointConfig) -> Result<Complex64> {
        let Some(w) = self.f.support_window() else {
            return Ok(Complex64::new(1.0, 0.0));
        };
        omega.covers(&w)?;
        let pts = omega.points_in(&w);
        Ok((-self.integral).exp() * point_product(&self.f, pts))
    }

    /// `log |Exp f(ω)|` and the sign for real `f`; avoids overflow on large
    /// configurations.
    pub fn log_abs(&self, omega: &PointConfig) -> Result<(f64, f64)> {
        let Some(w) = self.f.support_window() else {
            return Ok((0.0, 1.0));
        };
        omega.covers(&w)?;
        let mut log = -self.integral.re;
        let mut sign = 1.0;
        for &x in omega.points_in(&w) {
            let v = 1.0 + self.f.eval_re(x);
            if v == 0.0 {
                return Ok((f64::NEG_INFINITY, 0.0));
            }
            if v < 0.0 {
                sign = -sign;
            }
            log += v.abs().ln();
        }
        Ok((log, sign))
    }
}

/// `Exp f(ω)`.
pub fn exp_eval(f: &TestFunction, omega: &PointConfig, m: &BaseMeasure) -> Result<Complex64> {
    Coherent::new(f, m)?.eval(omega)
}

/// `Exp(f•g)(ω) := e^{−∫fg dμ}·Exp f(ω)·Exp g(ω)`.
pub fn extended_exp_eval(
    f: &TestFunction,
    g: &TestFunction,
    omega: &PointConfig,
    m: &BaseMeasure,
) -> Result<Complex64> {
    ExtendedCoherent::new(f, g, m)?.eval(omega)
}

/// Extended coherent vector with its constants precomputed.
#[derive(Debug, Clone)]
pub struct ExtendedCoherent {
    f: Coherent,
    g: Coherent,
    cross: Complex64,
}

impl ExtendedCoherent {
    pub fn new(f: &TestFunction, g: &TestFunction, m: &BaseMeasure) -> Result<Self> {
        Ok(Self {
            f: Coherent::new(f, m)?,
            g: Coherent::new(g, m)?,
            cross: bilinear(f, g, m)?,
        })
    }

    pub fn eval(&self, omega: &PointConfig) -> Result<Complex64> {
        Ok((-self.cross).exp() * self.f.eval(omega)? * self.g.eval(omega)?)
    }

    /// `log Exp(f•g)(ω)` for real `f, g` with a positive value.
    pub fn log_eval(&self, omega: &PointConfig) -> Result<f64> {
        let (lf, sf) = self.f.log_abs(omega)?;
        let (lg, sg) = self.g.log_abs(omega)?;
        if sf * sg <= 0.0 {
            return arg("extended coherent value is not positive");
        }
        Ok(lf + lg - self.cross.re)
    }
}

/// Both sides of `|Exp φ| = e^{−2∫_{φ+1<0}(φ+1)dμ}·Exp φ̃`, `φ̃ = |1+φ| − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_diff: f64,
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Precomputed sides of the `|Exp φ|` identity for a real `φ`.
#[derive(Debug, Clone)]
pub struct AbsIdentity {
    phi: Coherent,
    tilde: Coherent,
    below: f64,
}

impl AbsIdentity {
    pub fn new(phi: &TestFunction, m: &BaseMeasure) -> Result<Self> {
        if !phi.is_real() {
            return arg("the |Exp φ| identity is stated for real φ");
        }
        let p = phi.clone();
        let tilde_fn: RealFn = Arc::new(move |x| (1.0 + p.eval_re(x)).abs() - 1.0);
        let tilde = TestFunction::from_fn(
            tilde_fn,
            None,
            phi.support,
            &phi.breaks,
            format!("tilde({})", phi.label),
        );
        let below = match phi.support_window() {
            Some(w) => m.integrate_with_breaks(
                |x| (phi.eval_re(x) + 1.0).min(0.0),
                &w,
                &phi.breaks,
                DEFAULT_TOL,
            )?,
            None => 0.0,
        };
        Ok(Self {
            phi: Coherent::new(phi, m)?,
            tilde: Coherent::new(&tilde, m)?,
            below,
        })
    }

    pub fn check(&self, omega: &PointConfig) -> Result<PathResidual> {
        let (l_lhs, _) = self.phi.log_abs(omega)?;
        let (l_tilde, _) = self.tilde.log_abs(omega)?;
        let lhs = l_lhs.exp();
        let rhs = (-2.0 * self.below + l_tilde).exp();
        Ok(PathResidual {
            lhs,
            rhs,
            rel_diff: if l_lhs == f64::NEG_INFINITY && l_tilde == f64::NEG_INFINITY {
                0.0
            } else {
                rel_diff(lhs, rhs)
            },
        })
    }
}

pub fn abs_exp_identity_check(
    phi: &TestFunction,
    omega: &PointConfig,
    m: &BaseMeasure,
) -> Result<PathResidual> {
    AbsIdentity::new(phi, m)?.check(omega)
}

/// Monte Carlo estimate of `⟨Exp f, Exp g⟩` against `e^{⟨f,g⟩}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InnerProduct {
    pub estimate: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub target: Complex64,
    pub max_abs_z: f64,
}

impl InnerProduct {
    pub fn pass(&self) -> bool {
        self.max_abs_z <= mc::Z_GATE
    }
}

pub fn inner_product_mc(
    f: &TestFunction,
    g: &TestFunction,
    trials: usize,
    seed: u64,
    m: &BaseMeasure,
) -> Result<InnerProduct> {
    let target = pairing(f, g, m)?.exp();
    let window = match f.support.hull(&g.support) {
        Support::Within(w) => w,
        Support::Empty => {
            return Ok(InnerProduct {
                estimate: Complex64::new(1.0, 0.0),
                se_re: 0.0,
                se_im: 0.0,
                target,
                max_abs_z: 0.0,
            })
        }
        Support::Unbounded => return arg("inner product needs bounded supports"),
    };
    let (ef, eg) = (Coherent::new(f, m)?, Coherent::new(g, m)?);
    let sampler = ConfigSampler::new(m, window)?;
    let samples = mc::try_run_trials(seed, trials, |_, rng| {
        let omega = sampler.sample(rng)?;
        Ok::<_, crate::Error>(ef.eval(&omega)? * eg.eval(&omega)?.conj())
    })?;
    let est = ComplexEstimate::from_samples(&samples);
    Ok(InnerProduct {
        estimate: est.mean,
        se_re: est.se_re,
        se_im: est.se_im,
        target,
        max_abs_z: est.max_abs_z(target),
    })
}

/// `A_T f = (1 + f∘T⁻¹)·√T′ − 1 = U_T f + (√T′ − 1)`.
pub fn affine_apply(t: &NsMap, f: &TestFunction) -> Result<TestFunction> {
    if !f.is_real() {
        return arg("the affine Koopman operator is applied to real functions");
    }
    let support = t.cover_image(&f.support).hull(&t.rn_support());
    if support == Support::Unbounded {
        return arg(format!("A_T f has unbounded support for {}", t.label()));
    }
    let (t1, f1) = (t.clone(), f.clone());
    let re: RealFn =
        Arc::new(move |x| (1.0 + f1.eval_re(t1.apply_inverse(x))) * t1.rn(x).sqrt() - 1.0);
    let mut breaks: Vec<f64> = t.breaks().to_vec();
    breaks.extend(f.breaks.iter().map(|&b| t.apply(b)));
    let mut out = TestFunction::from_fn(
        re,
        None,
        support,
        &breaks,
        format!("A[{}]({})", t.label(), f.label),
    );
    out.cone = f.cone;
    Ok(out)
}

/// `U_T f = f∘T⁻¹·√T′`.
pub fn koopman_apply(t: &NsMap, f: &TestFunction) -> Result<TestFunction> {
    if !f.is_real() {
        return arg("the Koopman operator is applied to real functions here");
    }
    let support = t.cover_image(&f.support);
    if support == Support::Unbounded {
        return arg(format!("U_T f has unbounded support for {}", t.label()));
    }
    let (t1, f1) = (t.clone(), f.clone());
    let re: RealFn = Arc::new(move |x| f1.eval_re(t1.apply_inverse(x)) * t1.rn(x).sqrt());
    let mut breaks: Vec<f64> = t.breaks().to_vec();
    breaks.extend(f.breaks.iter().map(|&b| t.apply(b)));
    Ok(TestFunction::from_fn(
        re,
        None,
        support,
        &breaks,
        format!("U[{}]({})", t.label(), f.label),
    ))
}

/// Whether `A_T f ≥ −1` at every given point.
pub fn cone_preserved(t: &NsMap, f: &TestFunction, points: &[f64]) -> Result<bool> {
    let af = affine_apply(t, f)?;
    Ok(points.iter().all(|&x| af.eval_re(x) >= -1.0))
}

/// Both sides of `U_{T_*} Exp f = W_{A_T} Exp f` on one path.
#[derive(Debug, Clone)]
pub struct WeylIdentity {
    t: NsMap,
    rn: SuspendedRn,
    f: Coherent,
    af: Coherent,
    log_prefactor: f64,
    window: Window,
}

impl WeylIdentity {
    pub fn new(t: &NsMap, f: &TestFunction, m: &BaseMeasure) -> Result<Self> {
        let af = affine_apply(t, f)?;
        let c = nsmap::aut2_deficiency(t, m, &Schedule::for_map(t)?)?.require("‖√T′−1‖₂")?;
        let uf = koopman_apply(t, f)?;
        let cross = match (t.rn_support().window(), uf.support.window()) {
            (Some(a), Some(b)) => match a.intersect(&b) {
                Some(w) => m.integrate_with_breaks(
                    |x| (t.rn(x).sqrt() - 1.0) * uf.eval_re(x),
                    &w,
                    &uf.breaks,
                    DEFAULT_TOL,
                )?,
                None => 0.0,
            },
            _ => 0.0,
        };
        let mut window = af.support.hull(&f.support).hull(&t.cover_image(&f.support));
        if let Support::Within(l) = t.locality() {
            window = window.hull(&Support::Within(l));
        }
        let window = match window {
            Support::Within(w) => w,
            Support::Empty => Window::new(0.0, 1.0)?,
            Support::Unbounded => return arg("Weyl check needs a bounded observation window"),
        };
        Ok(Self {
            t: t.clone(),
            rn: SuspendedRn::new(t, m)?,
            f: Coherent::new(f, m)?,
            af: Coherent::new(&af, m)?,
            log_prefactor: -0.5 * c - cross,
            window,
        })
    }

    /// The window on which paths must be observed.
    pub fn window(&self) -> Window {
        self.window
    }

    pub fn check(&self, omega: &PointConfig) -> Result<PathResidual> {
        omega.covers(&self.window)?;
        let pulled = process::pushforward(omega, &self.t.inverse())?;
        let lhs = (0.5 * self.rn.log_eval(omega)?).exp() * self.f.eval(&pulled)?.re;
        let rhs = self.log_prefactor.exp() * self.af.eval(omega)?.re;
        Ok(PathResidual {
            lhs,
            rhs,
            rel_diff: rel_diff(lhs, rhs),
        })
    }
}

pub fn weyl_koopman_check(
    t: &NsMap,
    f: &TestFunction,
    omega: &PointConfig,
    m: &BaseMeasure,
) -> Result<PathResidual> {
    WeylIdentity::new(t, f, m)?.check(omega)
}

/// `‖f‖₂²` along a schedule; divergence means `Exp f ∉ L²(μ*)` since
/// `E|Exp f|² = e^{‖f‖₂²}`.
pub fn l2_membership(
    f: &TestFunction,
    m: &BaseMeasure,
    schedule: &Schedule,
) -> Result<nsmap::Norm> {
    nsmap::schedule_integral(m, |x| f.eval(x).norm_sqr(), &f.breaks, schedule)
}
