//! Radon–Nikodym derivatives of Poisson suspensions and stochastic integrals
//! against the Poisson measure.
//!
//! Three routes to `dν*/dμ*` are provided: the extended coherent vector
//! `Exp((√φ−1)•(√φ−1))`, the ε-truncated limit of
//! `∫_{X_ε} log φ dω − ∫_{X_ε}(φ−1) dμ`, and (for maps in Aut₁) the product
//! `(T_*)′(ω) = e^{−χ(T)} ∏ T′(x)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::coherent::{Coherent, ExtendedCoherent, TestFunction};
use crate::error::{arg, Error, Result};
use crate::mc::{self, Estimate};
use crate::measure::{BaseMeasure, RealFn, Support, Window};
use crate::nsmap::{self, NsMap, Schedule};
use crate::process::{ConfigSampler, PointConfig};
use crate::quad::DEFAULT_TOL;

/// Stabilisation tolerance for truncated limits.
pub const LIMIT_TOL: f64 = 1e-9;
/// Consecutive small increments required for stabilisation.
pub const STABLE_STEPS: usize = 3;
/// Grid used to locate level crossings of jump functions.
const CROSSING_GRID: usize = 4096;

/// The default ε schedule `2^{-1}, …, 2^{-30}`.
pub fn default_eps() -> Vec<f64> {
    (1..=30).map(|k| 2f64.powi(-k)).collect()
}

/// `(T_*)′(ω) = e^{−χ(T)} ∏_{x∈ω} T′(x)` with `χ(T)` precomputed.
#[derive(Debug, Clone)]
pub struct SuspendedRn {
    t: NsMap,
    chi: f64,
}

impl SuspendedRn {
    /// Fails with a precondition error when `‖T′−1‖₁` is not finite.
    pub fn new(t: &NsMap, m: &BaseMeasure) -> Result<Self> {
        let chi = nsmap::chi(t, m, &Schedule::for_map(t)?)?;
        Ok(Self { t: t.clone(), chi })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn log_eval(&self, omega: &PointConfig) -> Result<f64> {
        match self.t.rn_support() {
            Support::Empty => Ok(-self.chi),
            Support::Within(w) => {
                omega.covers(&w)?;
                Ok(-self.chi
                    + omega
                        .points_in(&w)
                        .iter()
                        .map(|&x| self.t.rn(x).ln())
                        .sum::<f64>())
            }
            Support::Unbounded => {
                arg("suspension derivative needs a bounded Radon–Nikodym support")
            }
        }
    }

    pub fn eval(&self, omega: &PointConfig) -> Result<f64> {
        self.log_eval(omega).map(f64::exp)
    }
}

/// `(T_*)′(ω)`.
pub fn rn_suspension(t: &NsMap, omega: &PointConfig, m: &BaseMeasure) -> Result<f64> {
    SuspendedRn::new(t, m)?.eval(omega)
}

/// `φ = dν/dμ`, equal to 1 outside a bounded window.
#[derive(Clone)]
pub struct DensityRatio {
    phi: RealFn,
    support: Window,
    breaks: Vec<f64>,
    constant: Option<f64>,
    label: String,
}

impl fmt::Debug for DensityRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityRatio")
            .field("label", &self.label)
            .field("support", &self.support)
            .finish()
    }
}

impl DensityRatio {
    /// `phi` must be positive on `support`; checked on a grid.
    pub fn new(
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Window,
        breaks: &[f64],
        label: impl Into<String>,
    ) -> Result<Self> {
        let phi: RealFn = Arc::new(phi);
        for k in 0..=1000 {
            let x = support.lo + support.length() * k as f64 / 1000.0;
            let v = phi(x);
            if !(v > 0.0 && v.is_finite()) {
                return arg(format!(
                    "density ratio must be positive and finite, got {v} at {x}"
                ));
            }
        }
        Ok(Self {
            phi,
            support,
            breaks: breaks.to_vec(),
            constant: None,
            label: label.into(),
        })
    }

    /// `φ = value` on `support`.
    pub fn step(value: f64, support: Window) -> Result<Self> {
        let mut d = Self::new(move |_| value, support, &[], format!("{value}·1{support}"))?;
        d.constant = Some(value);
        Ok(d)
    }

    /// `φ = 1 + a·sin(2π(x − lo)/len)` on `support`, `|a| < 1`.
    pub fn sine(amplitude: f64, support: Window) -> Result<Self> {
        if !(amplitude.abs() < 1.0) {
            return arg("sine ratio needs |amplitude| < 1");
        }
        let (lo, len) = (support.lo, support.length());
        Self::new(
            move |x| 1.0 + amplitude * (std::f64::consts::TAU * (x - lo) / len).sin(),
            support,
            &[],
            format!("1+{amplitude}sin on {support}"),
        )
    }

    pub fn support(&self) -> Window {
        self.support
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn phi(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            (self.phi)(x)
        } else {
            1.0
        }
    }

    pub fn log_phi(&self, x: f64) -> f64 {
        self.phi(x).ln()
    }

    pub fn phi_fn(&self) -> RealFn {
        self.phi.clone()
    }

    /// `ν = φ·μ`.
    pub fn nu_measure(&self, m: &BaseMeasure) -> Result<BaseMeasure> {
        m.reweight(
            self.phi.clone(),
            self.support,
            self.constant,
            format!("ν[{}]", self.label),
        )
    }

    /// `ν(a)`.
    pub fn nu_mass(&self, m: &BaseMeasure, a: &Window) -> Result<f64> {
        let outside = m.mass(a)?;
        let Some(inner) = a.intersect(&self.support) else {
            return Ok(outside);
        };
        let extra =
            m.integrate_with_breaks(|x| (self.phi)(x) - 1.0, &inner, &self.breaks, DEFAULT_TOL)?;
        Ok(outside + extra)
    }

    fn function(
        &self,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        label: &str,
    ) -> TestFunction {
        TestFunction::real(
            f,
            self.support,
            &self.breaks,
            format!("{label}[{}]", self.label),
        )
    }

    /// `√φ − 1`.
    pub fn sqrt_minus_one(&self) -> TestFunction {
        let phi = self.phi.clone();
        self.function(move |x| phi(x).sqrt() - 1.0, "sqrt(φ)-1")
    }

    /// `φ − 1`.
    pub fn minus_one(&self) -> TestFunction {
        let phi = self.phi.clone();
        self.function(move |x| phi(x) - 1.0, "φ-1")
    }

    fn integral<H: Fn(f64) -> f64>(
        &self,
        m: &BaseMeasure,
        h: H,
        extra_breaks: &[f64],
    ) -> Result<f64> {
        let mut breaks = self.breaks.clone();
        breaks.extend_from_slice(extra_breaks);
        m.integrate_with_breaks(h, &self.support, &breaks, DEFAULT_TOL)
    }

    /// `‖√φ − 1‖₂²`; finite certifies `ν ∈ M°⁺_{μ,2}`.
    pub fn hellinger(&self, m: &BaseMeasure) -> Result<f64> {
        self.integral(m, |x| ((self.phi)(x).sqrt() - 1.0).powi(2), &[])
    }

    /// Points of the support where `|log φ| = c`.
    pub fn log_crossings(&self, c: f64) -> Vec<f64> {
        let phi = self.phi.clone();
        level_crossings(&move |x| phi(x).ln().abs(), &self.support, c)
    }

    /// `β = −∫(φ − 1 − log φ·1_{|log φ|≤1}) dμ`, integrated in the split form
    /// `(√φ−1)² + 2(√φ−1−log√φ)1_{|log φ|≤1} + 2(√φ−1)1_{|log φ|>1}`.
    pub fn beta(&self, m: &BaseMeasure) -> Result<f64> {
        let cuts = self.log_crossings(1.0);
        let v = self.integral(
            m,
            |x| {
                let p = (self.phi)(x);
                let r = p.sqrt() - 1.0;
                let small = p.ln().abs() <= 1.0;
                r * r
                    + if small {
                        2.0 * (r - 0.5 * p.ln())
                    } else {
                        2.0 * r
                    }
            },
            &cuts,
        )?;
        Ok(-v)
    }

    /// `E_{μ*}[log dν*/dμ*] = −∫(φ − 1 − log φ) dμ`.
    pub fn expected_log_rn(&self, m: &BaseMeasure) -> Result<f64> {
        let v = self.integral(
            m,
            |x| {
                let p = (self.phi)(x);
                p - 1.0 - p.ln()
            },
            &[],
        )?;
        Ok(-v)
    }

    /// The increasing map with `T′ = φ`.
    pub fn density_map(&self, m: &BaseMeasure) -> Result<NsMap> {
        NsMap::density_map(
            self.phi.clone(),
            self.support,
            self.constant,
            &self.breaks,
            m,
        )
    }
}

/// `expected_log_rn` as a free function.
pub fn expected_log_rn(d: &DensityRatio, m: &BaseMeasure) -> Result<f64> {
    d.expected_log_rn(m)
}

/// Roots of `g(x) = c` in `w`, located on a grid and refined by bisection.
pub(crate) fn level_crossings(g: &dyn Fn(f64) -> f64, w: &Window, c: f64) -> Vec<f64> {
    let n = CROSSING_GRID;
    let h = w.length() / n as f64;
    let mut out = Vec::new();
    let mut xa = w.lo;
    let mut fa = g(xa) - c;
    for k in 1..=n {
        let xb = if k == n { w.hi } else { w.lo + h * k as f64 };
        let fb = g(xb) - c;
        if fa == 0.0 {
            out.push(xa);
        } else if fa * fb < 0.0 {
            let (mut a, mut b, mut ga) = (xa, xb, fa);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let gm = g(mid) - c;
                if (gm < 0.0) == (ga < 0.0) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        xa = xb;
        fa = fb;
    }
    out
}

/// Stabilised value of an ε-truncated limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitValue {
    pub value: f64,
    /// Change of the compensator over the last ε step.
    pub last_increment: f64,
}

/// `lim_ε ( Σ_{x∈ω, |j(x)|>ε} j(x) − C_ε )` with precomputed compensators `C_ε`.
#[derive(Clone)]
pub struct TruncatedLimit {
    jump: RealFn,
    support: Window,
    eps: Vec<f64>,
    compensators: Vec<f64>,
    tol: f64,
}

impl fmt::Debug for TruncatedLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncatedLimit")
            .field("support", &self.support)
            .field("eps", &self.eps.len())
            .field("tol", &self.tol)
            .finish()
    }
}

impl TruncatedLimit {
    fn build(
        jump: RealFn,
        support: Window,
        breaks: &[f64],
        eps: &[f64],
        tol: f64,
        m: &BaseMeasure,
        compensator: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if eps.len() < STABLE_STEPS + 1
            || eps.windows(2).any(|w| !(w[1] < w[0]))
            || eps.iter().any(|&e| e <= 0.0)
        {
            return arg(
                "ε schedule must be positive, strictly decreasing and have at least four entries",
            );
        }
        let j1 = jump.clone();
        let abs_j = move |x: f64| j1(x).abs();
        let ones = level_crossings(&abs_j, &support, 1.0);
        let mut compensators = Vec::with_capacity(eps.len());
        for &e in eps {
            let mut cuts: Vec<f64> = breaks.to_vec();
            cuts.extend_from_slice(&ones);
            cuts.extend(level_crossings(&abs_j, &support, e));
            let j = jump.clone();
            let c = m.integrate_with_breaks(
                |x| if j(x).abs() > e { compensator(x) } else { 0.0 },
                &support,
                &cuts,
                DEFAULT_TOL,
            )?;
            compensators.push(c);
        }
        // A finite configuration has finitely many jumps, so the jump sum is
        // exact once ε is below the smallest of them; only the compensators
        // need to settle.
        let increments: Vec<f64> = compensators
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .collect();
        if !increments[increments.len() - STABLE_STEPS..]
            .iter()
            .all(|&d| d < tol)
        {
            return Err(Error::NotStabilized { increments });
        }
        Ok(Self {
            jump,
            support,
            eps: eps.to_vec(),
            compensators,
            tol,
        })
    }

    pub fn support(&self) -> Window {
        self.support
    }

    /// Truncated values at each ε.
    pub fn path(&self, omega: &PointConfig) -> Result<Vec<f64>> {
        omega.covers(&self.support)?;
        let jumps: Vec<f64> = omega
            .points_in(&self.support)
            .iter()
            .map(|&x| (self.jump)(x))
            .collect();
        Ok(self
            .eps
            .iter()
            .zip(&self.compensators)
            .map(|(&e, &c)| jumps.iter().filter(|j| j.abs() > e).sum::<f64>() - c)
            .collect())
    }

    pub fn eval(&self, omega: &PointConfig) -> Result<LimitValue> {
        omega.covers(&self.support)?;
        let jumps: f64 = omega
            .points_in(&self.support)
            .iter()
            .map(|&x| (self.jump)(x))
            .sum();
        let n = self.compensators.len();
        Ok(LimitValue {
            value: jumps - self.compensators[n - 1],
            last_increment: (self.compensators[n - 1] - self.compensators[n - 2]).abs(),
        })
    }
}

/// `I_μ(f) = lim_ε (∫_{|f|>ε} f dω − ∫_{|f|>ε} f·1_{|f|≤1} dμ)` for `f`
/// supported in a bounded window.
#[derive(Debug, Clone)]
pub struct StochasticIntegrator {
    limit: TruncatedLimit,
    mean: f64,
    levy_mass: f64,
}

impl StochasticIntegrator {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: Window,
        breaks: &[f64],
        m: &BaseMeasure,
        eps: &[f64],
        tol: f64,
    ) -> Result<Self> {
        let f: RealFn = Arc::new(f);
        let f1 = f.clone();
        let levy_mass =
            m.integrate_with_breaks(|x| f1(x).powi(2).min(1.0), &support, breaks, DEFAULT_TOL)?;
        if !levy_mass.is_finite() {
            return Err(Error::Precondition {
                norm: "∫ f²∧1 dμ".into(),
                detail: format!("{levy_mass}"),
            });
        }
        let f2 = f.clone();
        let abs_f = move |x: f64| f2(x).abs();
        let mut cuts = breaks.to_vec();
        cuts.extend(level_crossings(&abs_f, &support, 1.0));
        let f3 = f.clone();
        let mean = m.integrate_with_breaks(
            |x| {
                let v = f3(x);
                if v.abs() > 1.0 {
                    v
                } else {
                    0.0
                }
            },
            &support,
            &cuts,
            DEFAULT_TOL,
        )?;
        let f4 = f.clone();
        let limit = TruncatedLimit::build(f, support, breaks, eps, tol, m, move |x| {
            let v = f4(x);
            if v.abs() <= 1.0 {
                v
            } else {
                0.0
            }
        })?;
        Ok(Self {
            limit,
            mean,
            levy_mass,
        })
    }

    pub fn eval(&self, omega: &PointConfig) -> Result<LimitValue> {
        self.limit.eval(omega)
    }

    /// `E[I_μ(f)] = ∫_{|f|>1} f dμ`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `∫ f²∧1 dμ`.
    pub fn levy_mass(&self) -> f64 {
        self.levy_mass
    }

    pub fn support(&self) -> Window {
        self.limit.support
    }
}

/// One-shot `I_μ(f)(ω)`.
pub fn stochastic_integral(
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    support: Window,
    omega: &PointConfig,
    m: &BaseMeasure,
    eps: &[f64],
    tol: f64,
) -> Result<LimitValue> {
    StochasticIntegrator::new(f, support, &[], m, eps, tol)?.eval(omega)
}

/// `log dν*/dμ*` by the ε-limit, and by `I_μ(log φ) + β`.
#[derive(Debug, Clone)]
pub struct LogRn {
    limit: TruncatedLimit,
    integral: StochasticIntegrator,
    beta: f64,
    expected: f64,
}

impl LogRn {
    pub fn new(d: &DensityRatio, m: &BaseMeasure, eps: &[f64], tol: f64) -> Result<Self> {
        let h = d.hellinger(m)?;
        if !h.is_finite() {
            return Err(Error::Precondition {
                norm: "‖√φ−1‖₂".into(),
                detail: format!("{h}"),
            });
        }
        let phi = d.phi_fn();
        let p1 = phi.clone();
        let jump: RealFn = Arc::new(move |x| p1(x).ln());
        let p2 = phi.clone();
        let limit = TruncatedLimit::build(jump, d.support, &d.breaks, eps, tol, m, move |x| {
            p2(x) - 1.0
        })?;
        let p3 = phi.clone();
        let integral =
            StochasticIntegrator::new(move |x| p3(x).ln(), d.support, &d.breaks, m, eps, tol)?;
        Ok(Self {
            limit,
            integral,
            beta: d.beta(m)?,
            expected: d.expected_log_rn(m)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn expected(&self) -> f64 {
        self.expected
    }

    pub fn support(&self) -> Window {
        self.limit.support
    }

    pub fn eval(&self, omega: &PointConfig) -> Result<LimitValue> {
        self.limit.eval(omega)
    }

    /// `I_μ(log φ)(ω) + β`.
    pub fn via_beta(&self, omega: &PointConfig) -> Result<f64> {
        Ok(self.integral.eval(omega)?.value + self.beta)
    }
}

pub fn log_rn_limit(
    d: &DensityRatio,
    omega: &PointConfig,
    m: &BaseMeasure,
    eps: &[f64],
    tol: f64,
) -> Result<LimitValue> {
    LogRn::new(d, m, eps, tol)?.eval(omega)
}

/// One line of a Radon–Nikodym consistency test.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyRecord {
    pub window: Window,
    /// `reweighted_void`, `direct_void` or `reweighted_count`.
    pub kind: &'static str,
    pub estimate: f64,
    pub target: f64,
    pub se: f64,
    pub z: f64,
}

impl ConsistencyRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

/// For each window `A`: `E_{μ*}[Exp(φ−1)·1_{N_A=0}]` and the direct `ν*` void
/// frequency against `e^{−ν(A)}`, and `E_{μ*}[Exp(φ−1)·N_A]` against `ν(A)`.
pub fn rn_consistency_test(
    d: &DensityRatio,
    windows: &[Window],
    trials: usize,
    seed: u64,
    m: &BaseMeasure,
) -> Result<Vec<ConsistencyRecord>> {
    let observed = windows.iter().fold(d.support, |acc, w| acc.hull(w));
    let rn = Coherent::new(&d.minus_one(), m)?;
    let mu_sampler = ConfigSampler::new(m, observed)?;
    let nu_sampler = ConfigSampler::new(&d.nu_measure(m)?, observed)?;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<bool>)> = mc::try_run_trials(seed, trials, |_, rng| {
        let omega = mu_sampler.sample(rng)?;
        let weight = rn.eval(&omega)?.re;
        let mut voids = Vec::with_capacity(windows.len());
        let mut counts = Vec::with_capacity(windows.len());
        for a in windows {
            let n = omega.points_in(a).len();
            voids.push(if n == 0 { weight } else { 0.0 });
            counts.push(weight * n as f64);
        }
        let direct = nu_sampler.sample(rng)?;
        let dv = windows
            .iter()
            .map(|a| direct.points_in(a).is_empty())
            .collect();
        Ok::<_, Error>((voids, counts, dv))
    })?;
    let mut out = Vec::new();
    for (i, a) in windows.iter().enumerate() {
        let nu_a = d.nu_mass(m, a)?;
        let target = (-nu_a).exp();
        let rv: Vec<f64> = rows.iter().map(|r| r.0[i]).collect();
        let e = Estimate::from_samples(&rv);
        out.push(ConsistencyRecord {
            window: *a,
            kind: "reweighted_void",
            estimate: e.mean,
            target,
            se: e.se,
            z: e.z(target),
        });
        let hits = rows.iter().filter(|r| r.2[i]).count();
        let e = Estimate::proportion(hits, trials, target);
        out.push(ConsistencyRecord {
            window: *a,
            kind: "direct_void",
            estimate: e.mean,
            target,
            se: e.se,
            z: e.z(target),
        });
        let rc: Vec<f64> = rows.iter().map(|r| r.1[i]).collect();
        let e = Estimate::from_samples(&rc);
        out.push(ConsistencyRecord {
            window: *a,
            kind: "reweighted_count",
            estimate: e.mean,
            target: nu_a,
            se: e.se,
            z: e.z(nu_a),
        });
    }
    Ok(out)
}

/// Monte Carlo mean of `Exp(φ−1)`, which should be 1.
pub fn normalization_mc(
    d: &DensityRatio,
    m: &BaseMeasure,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    let rn = Coherent::new(&d.minus_one(), m)?;
    let sampler = ConfigSampler::new(m, d.support)?;
    let xs = mc::try_run_trials(seed, trials, |_, rng| {
        let omega = sampler.sample(rng)?;
        Ok::<_, Error>(rn.eval(&omega)?.re)
    })?;
    Ok(Estimate::from_samples(&xs))
}

/// Largest pairwise relative disagreement among the routes to `dν*/dμ*`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CrossFormula {
    pub paths: usize,
    /// extended coherent vs exp(ε-limit)
    pub extended_vs_limit: f64,
    /// extended coherent vs `e^{−χ}∏T′`
    pub extended_vs_product: f64,
    /// exp(ε-limit) vs `e^{−χ}∏T′`
    pub limit_vs_product: f64,
    /// exp(ε-limit) vs `exp(I_μ(log φ) + β)`
    pub limit_vs_beta: f64,
}

impl CrossFormula {
    pub fn max(&self) -> f64 {
        self.extended_vs_limit
            .max(self.extended_vs_product)
            .max(self.limit_vs_product)
            .max(self.limit_vs_beta)
    }
}

/// Compares the routes to `dν*/dμ*` path by path. Relative differences of
/// positive numbers are computed from their logarithms.
pub fn cross_formula_check(
    d: &DensityRatio,
    m: &BaseMeasure,
    paths: usize,
    seed: u64,
    eps: &[f64],
) -> Result<CrossFormula> {
    let r = d.sqrt_minus_one();
    let ext = ExtendedCoherent::new(&r, &r, m)?;
    let lim = LogRn::new(d, m, eps, LIMIT_TOL)?;
    let prod = SuspendedRn::new(&d.density_map(m)?, m)?;
    let sampler = ConfigSampler::new(m, d.support)?;
    let rows = mc::try_run_trials(seed, paths, |_, rng| {
        let omega = sampler.sample(rng)?;
        let a = ext.log_eval(&omega)?;
        let b = lim.eval(&omega)?.value;
        let c = prod.log_eval(&omega)?;
        let e = lim.via_beta(&omega)?;
        Ok::<_, Error>([log_rel(a, b), log_rel(a, c), log_rel(b, c), log_rel(b, e)])
    })?;
    let mut out = CrossFormula {
        paths,
        ..Default::default()
    };
    for r in rows {
        out.extended_vs_limit = out.extended_vs_limit.max(r[0]);
        out.extended_vs_product = out.extended_vs_product.max(r[1]);
        out.limit_vs_product = out.limit_vs_product.max(r[2]);
        out.limit_vs_beta = out.limit_vs_beta.max(r[3]);
    }
    Ok(out)
}

/// `|e^a − e^b| / max(e^a, e^b)`.
fn log_rel(a: f64, b: f64) -> f64 {
    -(-(a - b).abs()).exp_m1()
}

/// Monte Carlo `E[I_μ(f)]` against `∫_{|f|>1} f dμ`.
pub fn stochastic_integral_mean_mc(
    integrator: &StochasticIntegrator,
    m: &BaseMeasure,
    trials: usize,
    seed: u64,
) -> Result<(Estimate, f64)> {
    let sampler = ConfigSampler::new(m, integrator.support())?;
    let xs = mc::try_run_trials(seed, trials, |_, rng| {
        let omega = sampler.sample(rng)?;
        Ok::<_, Error>(integrator.eval(&omega)?.value)
    })?;
    Ok((Estimate::from_samples(&xs), integrator.mean()))
}

/// Samples of `log dν*/dμ*` by the ε-limit.
pub fn log_rn_samples(lr: &LogRn, m: &BaseMeasure, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = ConfigSampler::new(m, lr.support())?;
    mc::try_run_trials(seed, trials, |_, rng| {
        let omega = sampler.sample(rng)?;
        Ok::<_, Error>(lr.eval(&omega)?.value)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::trial_rng;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn identity_and_swap_products() {
        let m = BaseMeasure::lebesgue();
        let omega = PointConfig::new(vec![0.5, 2.0, 3.0], w(0.0, 5.0)).unwrap();
        assert_eq!(rn_suspension(&NsMap::identity(), &omega, &m).unwrap(), 1.0);
        let eq = NsMap::swap(w(0.0, 1.0), w(1.0, 2.0), &m).unwrap();
        assert_eq!(rn_suspension(&eq, &omega, &m).unwrap(), 1.0);
        let t = NsMap::swap(w(0.0, 1.0), w(1.0, 5.0), &m).unwrap();
        let v = rn_suspension(&t, &omega, &m).unwrap();
        // one point in A (T′=4), two in B (T′=1/4)
        assert!((v - 4.0 * 0.0625).abs() < 1e-10, "{v}");
    }

    #[test]
    fn non_aut1_map_is_a_precondition_error() {
        let m = BaseMeasure::lebesgue();
        let t = NsMap::make_translation(1.0).unwrap();
        // on Lebesgue measure the translation does not know its support
        let t = NsMap::from_parts(crate::nsmap::MapParts {
            forward: t.forward_fn(),
            inverse: t.inverse_fn(),
            rn: Arc::new(|_| 2.0),
            locality: Support::Unbounded,
            rn_support: Support::Unbounded,
            breaks: vec![],
            monotone: true,
            conservative: false,
            label: "bad".into(),
        });
        assert!(SuspendedRn::new(&t, &m).is_err());
    }

    #[test]
    fn single_scale_stochastic_integrals() {
        let m = BaseMeasure::lebesgue();
        let a = w(0.0, 2.0);
        let omega = PointConfig::new(vec![0.2, 0.9, 1.7], a).unwrap();
        let eps = default_eps();
        let small = stochastic_integral(|_| 0.5, a, &omega, &m, &eps, LIMIT_TOL).unwrap();
        assert!((small.value - 0.5 * (3.0 - 2.0)).abs() < 1e-10);
        let big = stochastic_integral(|_| 3.0, a, &omega, &m, &eps, LIMIT_TOL).unwrap();
        assert!((big.value - 9.0).abs() < 1e-10);
    }

    #[test]
    fn stochastic_integral_is_linear_on_single_scale() {
        let m = BaseMeasure::lebesgue();
        let a = w(0.0, 1.0);
        let omega = PointConfig::new(vec![0.1, 0.3, 0.8], a).unwrap();
        let eps = default_eps();
        let f = stochastic_integral(|_| 0.25, a, &omega, &m, &eps, LIMIT_TOL)
            .unwrap()
            .value;
        let g = stochastic_integral(|_| 0.5, a, &omega, &m, &eps, LIMIT_TOL)
            .unwrap()
            .value;
        assert!((g - 2.0 * f).abs() < 1e-10);
    }

    #[test]
    fn log_rn_closed_form_for_step() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::step(2.0, w(0.0, 1.0)).unwrap();
        let lr = LogRn::new(&d, &m, &default_eps(), LIMIT_TOL).unwrap();
        let omega = PointConfig::new(vec![0.2, 0.7], w(0.0, 1.0)).unwrap();
        let v = lr.eval(&omega).unwrap().value;
        assert!((v - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-10);
        assert!((lr.via_beta(&omega).unwrap() - v).abs() < 1e-10);
        assert!((lr.expected() + (1.0 - 2f64.ln())).abs() < 1e-10);
        assert!((lr.beta() + (1.0 - 2f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn trivial_ratio_has_zero_log_rn() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::step(1.0, w(0.0, 1.0)).unwrap();
        let lr = LogRn::new(&d, &m, &default_eps(), LIMIT_TOL).unwrap();
        let omega = PointConfig::new(vec![0.2], w(0.0, 1.0)).unwrap();
        assert_eq!(lr.eval(&omega).unwrap().value, 0.0);
        assert_eq!(d.expected_log_rn(&m).unwrap(), 0.0);
    }

    #[test]
    fn coarse_schedule_does_not_stabilise() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::sine(0.8, w(0.0, 3.0)).unwrap();
        let eps: Vec<f64> = (1..=5).map(|k| 2f64.powi(-k)).collect();
        assert!(matches!(
            LogRn::new(&d, &m, &eps, LIMIT_TOL),
            Err(Error::NotStabilized { .. })
        ));
    }

    #[test]
    fn tiny_jumps_do_not_break_the_limit() {
        let m = BaseMeasure::lebesgue();
        let a = w(0.0, 2.0);
        // f(1e-7) = 1.5e-7 lies below most of the ε schedule.
        let omega = PointConfig::new(vec![1e-7, 1.0], a).unwrap();
        let v = stochastic_integral(|x| 1.5 * x, a, &omega, &m, &default_eps(), LIMIT_TOL).unwrap();
        // I(f) = Σ f(x) − ∫_{|f|≤1} f dx = 1.5 + 1.5e-7 − 1/3.
        assert!(
            (v.value - (1.5 + 1.5e-7 - 1.0 / 3.0)).abs() < 1e-9,
            "{}",
            v.value
        );
    }

    #[test]
    fn routes_agree_on_smooth_ratio() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::sine(0.8, w(0.0, 1.0)).unwrap();
        let cf = cross_formula_check(&d, &m, 200, 11, &default_eps()).unwrap();
        assert!(cf.max() < 1e-8, "{cf:?}");
    }

    #[test]
    fn beta_split_matches_raw_integral_when_log_is_small() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::sine(0.5, w(0.0, 1.0)).unwrap();
        let raw = -m
            .integrate(|x| d.phi(x) - 1.0 - d.log_phi(x), &w(0.0, 1.0), 1e-12)
            .unwrap();
        assert!((d.beta(&m).unwrap() - raw).abs() < 1e-9);
    }

    #[test]
    fn nu_sampling_intensity() {
        let m = BaseMeasure::lebesgue();
        let d = DensityRatio::step(2.0, w(0.0, 1.0)).unwrap();
        let nu = d.nu_measure(&m).unwrap();
        assert!((nu.mass(&w(-1.0, 1.0)).unwrap() - 3.0).abs() < 1e-12);
        let s = ConfigSampler::new(&nu, w(0.0, 1.0)).unwrap();
        let mut rng = trial_rng(2, 0);
        let n: usize = (0..4000).map(|_| s.sample(&mut rng).unwrap().len()).sum();
        let mean = n as f64 / 4000.0;
        assert!((mean - 2.0).abs() < 4.0 * (2.0f64 / 4000.0).sqrt());
    }
}
