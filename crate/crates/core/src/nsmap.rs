//! Nonsingular bijections of the line with their Radon–Nikodym derivatives.
//!
//! Convention: `T′ = dμ∘T⁻¹/dμ`, so `∫ f·T′ dμ = ∫ f∘T dμ`. Compositions apply
//! the first argument first: `compose(S, T) = T∘S` with
//! `(T∘S)′ = (S′∘T⁻¹)·T′`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::measure::{BaseMeasure, RealFn, Support, Window, WindowSampler};
use crate::quad::DEFAULT_TOL;

/// Partial integrals above this while still growing count as divergence.
pub const DIVERGENCE_CEILING: f64 = 1e6;
/// Relative growth per schedule step that still counts as "growing".
pub const DIVERGENCE_GROWTH: f64 = 0.01;
/// Iterates with `|g|` up to this are cached by [`ActionZ::new`].
pub const ITERATE_CACHE: i64 = 64;

/// A nonsingular bijection `T` of ℝ.
#[derive(Clone)]
pub struct NsMap {
    forward: RealFn,
    inverse: RealFn,
    rn: RealFn,
    locality: Support,
    rn_support: Support,
    breaks: Vec<f64>,
    monotone: bool,
    conservative: bool,
    label: String,
    /// `(domain, image)` intervals on which a non-monotone map is increasing.
    pieces: Vec<(Window, Window)>,
}

impl fmt::Debug for NsMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NsMap")
            .field("label", &self.label)
            .field("locality", &self.locality)
            .field("rn_support", &self.rn_support)
            .field("monotone", &self.monotone)
            .field("conservative", &self.conservative)
            .finish()
    }
}

/// Everything needed to assemble a map by hand.
pub struct MapParts {
    pub forward: RealFn,
    pub inverse: RealFn,
    pub rn: RealFn,
    /// `forward` is the identity outside this region.
    pub locality: Support,
    /// `rn` equals 1 outside this region.
    pub rn_support: Support,
    /// Discontinuities of `forward` or `rn`.
    pub breaks: Vec<f64>,
    pub monotone: bool,
    /// Declared, never decided numerically.
    pub conservative: bool,
    pub label: String,
}

impl NsMap {
    pub fn from_parts(p: MapParts) -> Self {
        let mut breaks = p.breaks;
        breaks.retain(|b| b.is_finite());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        Self {
            forward: p.forward,
            inverse: p.inverse,
            rn: p.rn,
            locality: p.locality,
            rn_support: p.rn_support,
            breaks,
            monotone: p.monotone,
            conservative: p.conservative,
            label: p.label,
            pieces: Vec::new(),
        }
    }

    pub fn identity() -> Self {
        Self::from_parts(MapParts {
            forward: Arc::new(|x| x),
            inverse: Arc::new(|x| x),
            rn: Arc::new(|_| 1.0),
            locality: Support::Empty,
            rn_support: Support::Empty,
            breaks: Vec::new(),
            monotone: true,
            conservative: true,
            label: "identity".into(),
        })
    }

    /// `T_t x = x + t` for a measure with piecewise-constant positive density
    /// on the whole line; `T_t′(x) = ρ(x−t)/ρ(x)`.
    pub fn translation(t: f64, m: &BaseMeasure) -> Result<Self> {
        if !t.is_finite() {
            return arg("translation amount must be finite");
        }
        if !m.is_piecewise_constant() {
            return arg("translation needs a piecewise-constant density");
        }
        let pieces = m.pieces();
        let covers_line = pieces.first().is_some_and(|p| p.lo == f64::NEG_INFINITY)
            && pieces.last().is_some_and(|p| p.hi == f64::INFINITY)
            && pieces.windows(2).all(|w| w[0].hi == w[1].lo)
            && pieces
                .iter()
                .all(|p| p.density.constant_value().is_some_and(|c| c > 0.0));
        if !covers_line {
            return arg("translation needs a positive density on the whole line");
        }
        // The density jumps only at breakpoints, so T′ ≠ 1 only within t of one.
        let mut rn_support = Support::Empty;
        let mut breaks = Vec::new();
        for w in pieces.windows(2) {
            let b = w[0].hi;
            let (c0, c1) = (
                w[0].density.constant_value().unwrap_or(1.0),
                w[1].density.constant_value().unwrap_or(1.0),
            );
            if c0 != c1 && t != 0.0 {
                let span = Window::new(b.min(b + t), b.max(b + t))?;
                rn_support = rn_support.hull(&Support::Within(span));
            }
            breaks.push(b);
            breaks.push(b + t);
        }
        let m1 = m.clone();
        let locality = if t == 0.0 {
            Support::Empty
        } else {
            Support::Unbounded
        };
        Ok(Self::from_parts(MapParts {
            forward: Arc::new(move |x| x + t),
            inverse: Arc::new(move |x| x - t),
            rn: Arc::new(move |x| m1.density_at(x - t) / m1.density_at(x)),
            locality,
            rn_support,
            breaks,
            monotone: true,
            conservative: t == 0.0,
            label: format!("translation({t})"),
        }))
    }

    /// Translation on the weighted line `dm/dx = 1_{x<0} + 2·1_{x≥0}`.
    pub fn make_translation(t: f64) -> Result<Self> {
        Self::translation(t, &BaseMeasure::weighted_line())
    }

    /// The involution exchanging `A = [a.lo, a.hi)` and `B = [b.lo, b.hi)` by
    /// matching cumulative masses; identity elsewhere. `T′ = μ(B)/μ(A)` on `A`
    /// and `μ(A)/μ(B)` on `B`.
    pub fn swap(a: Window, b: Window, m: &BaseMeasure) -> Result<Self> {
        if a.lo < b.hi && b.lo < a.hi {
            return arg(format!("swap needs disjoint windows, got {a} and {b}"));
        }
        let ma = m.mass(&a)?;
        let mb = m.mass(&b)?;
        if !(ma > 0.0 && mb > 0.0) {
            return arg("swap needs windows of positive mass");
        }
        let sa = WindowSampler::new(m, a)?;
        let sb = WindowSampler::new(m, b)?;
        let m1 = m.clone();
        let forward: RealFn = Arc::new(move |x| {
            let in_a = x >= a.lo && x < a.hi;
            let in_b = x >= b.lo && x < b.hi;
            if !(in_a || in_b) {
                return x;
            }
            let (from, from_mass, to) = if in_a { (a, ma, &sb) } else { (b, mb, &sa) };
            if x <= from.lo {
                return to.window().lo;
            }
            let c = m1.mass(&Window { lo: from.lo, hi: x }).unwrap_or(f64::NAN);
            to.quantile((c / from_mass).clamp(0.0, 1.0))
                .unwrap_or(f64::NAN)
        });
        let rn: RealFn = Arc::new(move |x| {
            if x >= a.lo && x < a.hi {
                mb / ma
            } else if x >= b.lo && x < b.hi {
                ma / mb
            } else {
                1.0
            }
        });
        let hull = a.hull(&b);
        let mut out = Self::from_parts(MapParts {
            forward: forward.clone(),
            inverse: forward,
            rn,
            locality: Support::Within(hull),
            rn_support: if ma == mb {
                Support::Empty
            } else {
                Support::Within(hull)
            },
            breaks: vec![a.lo, a.hi, b.lo, b.hi],
            monotone: false,
            conservative: true,
            label: format!("swap({a}, {b})"),
        });
        out.pieces = vec![(a, b), (b, a)];
        Ok(out)
    }

    /// The increasing map with `T′ = φ`, where `φ` is 1 outside `support`.
    /// `T` is the identity left of `support` and realises `φ·μ = μ∘T⁻¹`.
    pub fn density_map(
        phi: RealFn,
        support: Window,
        phi_constant: Option<f64>,
        phi_breaks: &[f64],
        m: &BaseMeasure,
    ) -> Result<Self> {
        let nu = m.reweight(phi.clone(), support, phi_constant, "reweighted")?;
        let mu_s = m.mass(&support)?;
        let nu_s = nu.mass(&support)?;
        if !(mu_s > 0.0 && nu_s > 0.0) {
            return arg("density map needs a support of positive mass");
        }
        let mu_sampler = WindowSampler::new(m, support)?;
        let nu_sampler = WindowSampler::new(&nu, support)?;
        let (m1, m2, nu2) = (m.clone(), m.clone(), nu.clone());
        let forward: RealFn = Arc::new(move |x| {
            if x <= support.lo {
                return x;
            }
            let c = m1
                .mass(&Window {
                    lo: support.lo,
                    hi: x,
                })
                .unwrap_or(f64::NAN);
            if c <= nu_s {
                nu_sampler
                    .quantile((c / nu_s).clamp(0.0, 1.0))
                    .unwrap_or(f64::NAN)
            } else {
                solve_mass(&m1, support.hi, c - nu_s).unwrap_or(f64::NAN)
            }
        });
        let inverse: RealFn = Arc::new(move |y| {
            if y <= support.lo {
                return y;
            }
            let c = if y <= support.hi {
                nu2.mass(&Window {
                    lo: support.lo,
                    hi: y,
                })
                .unwrap_or(f64::NAN)
            } else {
                nu_s + m2
                    .mass(&Window {
                        lo: support.hi,
                        hi: y,
                    })
                    .unwrap_or(f64::NAN)
            };
            if c <= mu_s {
                mu_sampler
                    .quantile((c / mu_s).clamp(0.0, 1.0))
                    .unwrap_or(f64::NAN)
            } else {
                solve_mass(&m2, support.hi, c - mu_s).unwrap_or(f64::NAN)
            }
        });
        let phi1 = phi.clone();
        let rn: RealFn = Arc::new(move |x| if support.contains(x) { phi1(x) } else { 1.0 });
        let balanced = ((nu_s - mu_s) / mu_s).abs() < 1e-14;
        let mut breaks = vec![support.lo, support.hi];
        breaks.extend_from_slice(phi_breaks);
        Ok(Self::from_parts(MapParts {
            forward,
            inverse,
            rn,
            locality: if balanced {
                Support::Within(support)
            } else {
                Support::Unbounded
            },
            rn_support: Support::Within(support),
            breaks,
            monotone: true,
            conservative: false,
            label: format!("density_map({support})"),
        }))
    }

    pub fn apply(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn apply_inverse(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }

    /// `T′(x)`.
    pub fn rn(&self, x: f64) -> f64 {
        (self.rn)(x)
    }

    pub fn forward_fn(&self) -> RealFn {
        self.forward.clone()
    }

    pub fn inverse_fn(&self) -> RealFn {
        self.inverse.clone()
    }

    pub fn rn_fn(&self) -> RealFn {
        self.rn.clone()
    }

    pub fn locality(&self) -> Support {
        self.locality
    }

    pub fn rn_support(&self) -> Support {
        self.rn_support
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn is_conservative(&self) -> bool {
        self.conservative
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `T⁻¹`, with `(T⁻¹)′(x) = 1/T′(Tx)`.
    pub fn inverse(&self) -> Self {
        let (f, rn) = (self.forward.clone(), self.rn.clone());
        let inv = self.inverse.clone();
        let breaks = self
            .breaks
            .iter()
            .map(|&b| inv(b))
            .chain(self.breaks.iter().copied())
            .collect();
        let mut out = Self::from_parts(MapParts {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            rn: Arc::new(move |x| 1.0 / rn(f(x))),
            locality: self.locality,
            rn_support: self.cover_preimage(&self.rn_support),
            breaks,
            monotone: self.monotone,
            conservative: self.conservative,
            label: format!("inverse({})", self.label),
        });
        out.pieces = self.pieces.iter().map(|&(d, i)| (i, d)).collect();
        out
    }

    /// The exact image `T(w)`. Fails when it is not an interval that can be
    /// determined from the map's structure.
    pub fn image_window(&self, w: &Window) -> Result<Window> {
        if self.monotone {
            let (a, b) = (self.apply(w.lo), self.apply(w.hi));
            return Window::new(a.min(b), a.max(b));
        }
        match self.locality {
            Support::Empty => Ok(*w),
            Support::Within(l) if w.contains_window(&l) || l.intersect(w).is_none() => Ok(*w),
            _ => {
                if let Some((d, i)) = self.pieces.iter().find(|(d, _)| d.contains_window(w)) {
                    let lo = if w.lo == d.lo { i.lo } else { self.apply(w.lo) };
                    let hi = if w.hi == d.hi { i.hi } else { self.apply(w.hi) };
                    return Window::new(lo, hi);
                }
                arg(format!("image of {w} under {} is not a window", self.label))
            }
        }
    }

    /// A region containing `T(s)`.
    pub fn cover_image(&self, s: &Support) -> Support {
        self.cover(s, &self.forward)
    }

    /// A region containing `T⁻¹(s)`.
    pub fn cover_preimage(&self, s: &Support) -> Support {
        self.cover(s, &self.inverse)
    }

    fn cover(&self, s: &Support, f: &RealFn) -> Support {
        let Support::Within(w) = s else { return *s };
        if self.monotone {
            let (a, b) = (f(w.lo), f(w.hi));
            return match Window::new(a.min(b), a.max(b)) {
                Ok(img) => Support::Within(img),
                Err(_) => Support::Unbounded,
            };
        }
        match self.locality {
            Support::Within(l) if l.intersect(w).is_some() => Support::Within(w.hull(&l)),
            Support::Unbounded => Support::Unbounded,
            _ => *s,
        }
    }
}

/// Smallest `z ≥ a` with `μ([a, z]) = target`, by bracketing and bisection.
fn solve_mass(m: &BaseMeasure, a: f64, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(a);
    }
    let mut step = 1.0;
    let mut hi = a + step;
    while m.mass(&Window { lo: a, hi })? < target {
        step *= 2.0;
        hi = a + step;
        if step > 1e12 {
            return arg("mass target not reached on the right half-line");
        }
    }
    let mut lo = a;
    while hi - lo > 1e-13 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if m.mass(&Window { lo: a, hi: mid })? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Apply `s`, then `t`.
pub fn compose(s: &NsMap, t: &NsMap) -> NsMap {
    let (sf, tf) = (s.forward.clone(), t.forward.clone());
    let (si, ti) = (s.inverse.clone(), t.inverse.clone());
    let (sr, tr, ti2) = (s.rn.clone(), t.rn.clone(), t.inverse.clone());
    let mut breaks: Vec<f64> = t.breaks.clone();
    breaks.extend(s.breaks.iter().map(|&b| t.apply(b)));
    let mut out = NsMap::from_parts(MapParts {
        forward: Arc::new(move |x| tf(sf(x))),
        inverse: Arc::new(move |y| si(ti(y))),
        rn: Arc::new(move |y| sr(ti2(y)) * tr(y)),
        locality: s.locality.hull(&t.locality),
        rn_support: t.cover_image(&s.rn_support).hull(&t.rn_support),
        breaks,
        monotone: s.monotone && t.monotone,
        conservative: false,
        label: format!("{}∘{}", t.label, s.label),
    });
    if s.locality == Support::Empty {
        out.pieces = t.pieces.clone();
    } else if t.locality == Support::Empty {
        out.pieces = s.pieces.clone();
    }
    out
}

/// Where a global integral over ℝ is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// The integrand vanishes identically.
    Null,
    /// The integrand vanishes outside this window.
    Exact(Window),
    /// Nested, increasing windows; the integral outside the last one is at most
    /// `tail_bound` in absolute value.
    Expanding {
        windows: Vec<Window>,
        tail_bound: f64,
    },
}

impl Schedule {
    /// The exact schedule given by the support of `T′ − 1`.
    pub fn for_map(t: &NsMap) -> Result<Self> {
        match t.rn_support {
            Support::Empty => Ok(Schedule::Null),
            Support::Within(w) => Ok(Schedule::Exact(w)),
            Support::Unbounded => arg(format!(
                "{} has unbounded Radon–Nikodym support; supply an expanding schedule",
                t.label
            )),
        }
    }

    /// Windows `[c - r·fⁱ, c + r·fⁱ]` for `i < steps`.
    pub fn expanding(
        center: f64,
        radius: f64,
        factor: f64,
        steps: usize,
        tail_bound: f64,
    ) -> Result<Self> {
        if !(radius > 0.0 && factor > 1.0 && steps > 0) {
            return arg("expanding schedule needs radius > 0, factor > 1, steps > 0");
        }
        let windows = (0..steps)
            .map(|i| {
                let r = radius * factor.powi(i as i32);
                Window::new(center - r, center + r)
            })
            .collect::<Result<_>>()?;
        Ok(Schedule::Expanding {
            windows,
            tail_bound,
        })
    }
}

/// A membership norm or global integral, possibly divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Norm {
    Finite { value: f64, tail_bound: f64 },
    Divergent { partial: f64 },
}

impl Norm {
    pub fn value(&self) -> Option<f64> {
        match self {
            Norm::Finite { value, .. } => Some(*value),
            Norm::Divergent { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Norm::Finite { .. })
    }

    /// The finite value, or a precondition error naming `what`.
    pub fn require(&self, what: &str) -> Result<f64> {
        match self {
            Norm::Finite { value, .. } => Ok(*value),
            Norm::Divergent { partial } => Err(Error::Precondition {
                norm: what.into(),
                detail: format!("partial integrals reached {partial:e} and kept growing"),
            }),
        }
    }
}

/// `∫ h dμ` along a schedule, with extra breakpoints for `h`.
pub fn schedule_integral<H: Fn(f64) -> f64>(
    m: &BaseMeasure,
    h: H,
    breaks: &[f64],
    schedule: &Schedule,
) -> Result<Norm> {
    match schedule {
        Schedule::Null => Ok(Norm::Finite {
            value: 0.0,
            tail_bound: 0.0,
        }),
        Schedule::Exact(w) => Ok(Norm::Finite {
            value: m.integrate_with_breaks(&h, w, breaks, DEFAULT_TOL)?,
            tail_bound: 0.0,
        }),
        Schedule::Expanding {
            windows,
            tail_bound,
        } => {
            let mut partial: f64 = 0.0;
            let mut prev: Option<Window> = None;
            let mut growing = false;
            for w in windows {
                let inc = match prev {
                    None => m.integrate_with_breaks(&h, w, breaks, DEFAULT_TOL)?,
                    Some(p) => {
                        let mut s = 0.0;
                        if w.lo < p.lo {
                            s += m.integrate_with_breaks(
                                &h,
                                &Window { lo: w.lo, hi: p.lo },
                                breaks,
                                DEFAULT_TOL,
                            )?;
                        }
                        if p.hi < w.hi {
                            s += m.integrate_with_breaks(
                                &h,
                                &Window { lo: p.hi, hi: w.hi },
                                breaks,
                                DEFAULT_TOL,
                            )?;
                        }
                        s
                    }
                };
                growing = prev.is_some() && inc.abs() > DIVERGENCE_GROWTH * partial.abs();
                partial += inc;
                prev = Some(*w);
                if partial.abs() > DIVERGENCE_CEILING && growing {
                    return Ok(Norm::Divergent { partial });
                }
            }
            if partial.abs() > DIVERGENCE_CEILING && growing {
                return Ok(Norm::Divergent { partial });
            }
            Ok(Norm::Finite {
                value: partial,
                tail_bound: *tail_bound,
            })
        }
    }
}

/// `∫ h(T′(x)) dμ(x)` along a schedule.
pub fn rn_integral<H: Fn(f64) -> f64>(
    t: &NsMap,
    m: &BaseMeasure,
    h: H,
    schedule: &Schedule,
) -> Result<Norm> {
    schedule_integral(m, |x| h(t.rn(x)), &t.breaks, schedule)
}

/// `‖√T′ − 1‖₂²`; finite means `T ∈ Aut₂`.
pub fn aut2_deficiency(t: &NsMap, m: &BaseMeasure, schedule: &Schedule) -> Result<Norm> {
    rn_integral(t, m, |r| (r.sqrt() - 1.0).powi(2), schedule)
}

/// `‖T′ − 1‖₁`; finite means `T ∈ Aut₁`.
pub fn aut1_deficiency(t: &NsMap, m: &BaseMeasure, schedule: &Schedule) -> Result<Norm> {
    rn_integral(t, m, |r| (r - 1.0).abs(), schedule)
}

/// `χ(T) = ∫ (T′ − 1) dμ`.
pub fn chi(t: &NsMap, m: &BaseMeasure, schedule: &Schedule) -> Result<f64> {
    aut1_deficiency(t, m, schedule)?.require("‖T′−1‖₁")?;
    rn_integral(t, m, |r| r - 1.0, schedule)?.require("χ")
}

/// `χ` on the map's own exact schedule.
pub fn chi_exact(t: &NsMap, m: &BaseMeasure) -> Result<f64> {
    chi(t, m, &Schedule::for_map(t)?)
}

/// Both sides of `∫_v h·T′ dμ = ∫_{T⁻¹v} h∘T dμ`.
pub fn change_of_variables<H: Fn(f64) -> f64>(
    t: &NsMap,
    m: &BaseMeasure,
    h: H,
    h_breaks: &[f64],
    v: &Window,
) -> Result<(f64, f64)> {
    let mut lb: Vec<f64> = t.breaks.clone();
    lb.extend_from_slice(h_breaks);
    let lhs = m.integrate_with_breaks(|x| h(x) * t.rn(x), v, &lb, DEFAULT_TOL)?;
    let inv = t.inverse();
    let pre = inv.image_window(v)?;
    let mut rb: Vec<f64> = inv.breaks.clone();
    rb.extend(h_breaks.iter().map(|&b| t.apply_inverse(b)));
    let rhs = m.integrate_with_breaks(|x| h(t.apply(x)), &pre, &rb, DEFAULT_TOL)?;
    Ok((lhs, rhs))
}

/// A ℤ-action `g ↦ T_g`.
#[derive(Clone)]
pub struct ActionZ {
    generator: NsMap,
    cache: Vec<NsMap>,
    family: Option<Arc<dyn Fn(i64) -> Result<NsMap> + Send + Sync>>,
    label: String,
}

impl fmt::Debug for ActionZ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionZ")
            .field("label", &self.label)
            .field("cached", &self.cache.len())
            .field("closed_form", &self.family.is_some())
            .finish()
    }
}

impl ActionZ {
    /// Iterates of `generator`, cached for `|g| ≤ 64`.
    pub fn new(generator: NsMap) -> Self {
        let inv = generator.inverse();
        let n = ITERATE_CACHE as usize;
        let mut pos = vec![NsMap::identity()];
        let mut neg = vec![NsMap::identity()];
        for i in 1..=n {
            pos.push(
                compose(&pos[i - 1], &generator).with_label(format!("{}^{i}", generator.label)),
            );
            neg.push(compose(&neg[i - 1], &inv).with_label(format!("{}^-{i}", generator.label)));
        }
        let mut cache: Vec<NsMap> = neg.into_iter().skip(1).rev().collect();
        cache.extend(pos);
        let mut cache = cache;
        // identity keeps its own properties
        cache[n] = NsMap::identity();
        for (i, m) in cache.iter_mut().enumerate() {
            m.conservative = generator.conservative;
            if i == n {
                m.conservative = true;
            }
        }
        let label = generator.label.clone();
        Self {
            generator,
            cache,
            family: None,
            label,
        }
    }

    /// An action whose iterates are available in closed form.
    pub fn from_family(
        label: impl Into<String>,
        family: impl Fn(i64) -> Result<NsMap> + Send + Sync + 'static,
    ) -> Result<Self> {
        let generator = family(1)?;
        Ok(Self {
            generator,
            cache: Vec::new(),
            family: Some(Arc::new(family)),
            label: label.into(),
        })
    }

    /// The translation action `g ↦ T_{g·t}` on `m`.
    pub fn translations(t: f64, m: &BaseMeasure) -> Result<Self> {
        let m = m.clone();
        Self::from_family(format!("translation({t})"), move |g| {
            NsMap::translation(g as f64 * t, &m)
        })
    }

    pub fn generator(&self) -> &NsMap {
        &self.generator
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `T_g`.
    pub fn iterate(&self, g: i64) -> Result<NsMap> {
        if let Some(f) = &self.family {
            return f(g);
        }
        if g.abs() <= ITERATE_CACHE {
            return Ok(self.cache[(g + ITERATE_CACHE) as usize].clone());
        }
        let base = if g > 0 {
            self.generator.clone()
        } else {
            self.generator.inverse()
        };
        let mut out = self.cache[(g.signum() * ITERATE_CACHE + ITERATE_CACHE) as usize].clone();
        for _ in ITERATE_CACHE..g.abs() {
            out = compose(&out, &base);
        }
        Ok(out.with_label(format!("{}^{g}", self.generator.label)))
    }
}

/// `‖c_T(g)‖₂ = ‖√T_g′ − 1‖₂` on the iterate's exact schedule.
pub fn cocycle_norm(a: &ActionZ, g: i64, m: &BaseMeasure) -> Result<f64> {
    let t = a.iterate(g)?;
    let sched = Schedule::for_map(&t)?;
    Ok(aut2_deficiency(&t, m, &sched)?.require("‖√T′−1‖₂")?.sqrt())
}

/// `‖c_T(g)‖₂` along an explicit schedule.
pub fn cocycle_norm_with(a: &ActionZ, g: i64, m: &BaseMeasure, schedule: &Schedule) -> Result<f64> {
    let t = a.iterate(g)?;
    Ok(aut2_deficiency(&t, m, schedule)?
        .require("‖√T′−1‖₂")?
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    fn swap14() -> (NsMap, BaseMeasure) {
        let m = BaseMeasure::lebesgue();
        (NsMap::swap(w(0.0, 1.0), w(1.0, 5.0), &m).unwrap(), m)
    }

    #[test]
    fn swap_orientation_and_norms() {
        let (t, m) = swap14();
        assert_eq!(t.rn(0.5), 4.0);
        assert_eq!(t.rn(2.0), 0.25);
        let s = Schedule::for_map(&t).unwrap();
        let a2 = aut2_deficiency(&t, &m, &s).unwrap().value().unwrap();
        let a1 = aut1_deficiency(&t, &m, &s).unwrap().value().unwrap();
        assert!((a2 - 2.0).abs() < 1e-10, "{a2}");
        assert!((a1 - 6.0).abs() < 1e-10, "{a1}");
        assert!(chi(&t, &m, &s).unwrap().abs() < 1e-10);
        // T maps the first block affinely onto the second.
        assert!((t.apply(0.25) - 2.0).abs() < 1e-12);
        assert!((t.apply(t.apply(0.3)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn swap_change_of_variables() {
        let (t, m) = swap14();
        let (l, r) =
            change_of_variables(&t, &m, |x| (x * 1.3).sin() + 2.0, &[], &w(0.0, 5.0)).unwrap();
        assert!((l - r).abs() < 1e-8, "{l} vs {r}");
    }

    #[test]
    fn equal_mass_swap_is_affine_and_measure_preserving() {
        let m = BaseMeasure::lebesgue();
        let t = NsMap::swap(w(0.0, 1.0), w(1.0, 2.0), &m).unwrap();
        assert!((t.apply(0.25) - 1.25).abs() < 1e-12);
        assert_eq!(t.rn_support(), Support::Empty);
        assert_eq!(chi_exact(&t, &m).unwrap(), 0.0);
    }

    #[test]
    fn translation_chi_sign() {
        let m = BaseMeasure::weighted_line();
        for t in [0.5, 1.0, 2.0] {
            let tm = NsMap::make_translation(-t).unwrap();
            let c = chi_exact(&tm, &m).unwrap();
            assert!((c - t).abs() < 1e-10, "chi(T_-{t}) = {c}");
        }
        let tm = NsMap::make_translation(-1.0).unwrap();
        let s = Schedule::for_map(&tm).unwrap();
        let a1 = aut1_deficiency(&tm, &m, &s).unwrap().value().unwrap();
        let a2 = aut2_deficiency(&tm, &m, &s).unwrap().value().unwrap();
        assert!((a1 - 1.0).abs() < 1e-10);
        assert!((a2 - (2f64.sqrt() - 1.0).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn translation_change_of_variables() {
        let m = BaseMeasure::weighted_line();
        let t = NsMap::make_translation(0.7).unwrap();
        let (l, r) = change_of_variables(&t, &m, |x| (-x * x).exp(), &[], &w(-3.0, 3.0)).unwrap();
        assert!((l - r).abs() < 1e-8, "{l} vs {r}");
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = NsMap::make_translation(1.5).unwrap();
        let id = compose(&t, &t.inverse());
        for x in [-2.0, -0.3, 0.0, 0.4, 3.0] {
            assert!((id.apply(x) - x).abs() < 1e-12);
            assert!((id.rn(x) - 1.0).abs() < 1e-12);
        }
        let (s, _) = swap14();
        let ss = compose(&s, &s);
        for x in [0.1, 0.9, 1.5, 4.9, 7.0] {
            assert!((ss.apply(x) - x).abs() < 1e-12);
            assert!((ss.rn(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_is_additive() {
        let m = BaseMeasure::weighted_line();
        let s = NsMap::make_translation(-0.5).unwrap();
        let t = NsMap::make_translation(-1.25).unwrap();
        let st = compose(&s, &t);
        let lhs = chi_exact(&st, &m).unwrap();
        let rhs = chi_exact(&s, &m).unwrap() + chi_exact(&t, &m).unwrap();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn density_map_doubles_mass() {
        let m = BaseMeasure::lebesgue();
        let t = NsMap::density_map(Arc::new(|_| 2.0), w(0.0, 1.0), Some(2.0), &[], &m).unwrap();
        // μ∘T⁻¹([0,1]) = μ(T⁻¹[0,1]) = 2
        let pre = t.inverse().image_window(&w(0.0, 1.0)).unwrap();
        assert!((m.mass(&pre).unwrap() - 2.0).abs() < 1e-10, "{pre}");
        for x in [-1.0, 0.3, 0.9, 2.5] {
            assert!((t.apply_inverse(t.apply(x)) - x).abs() < 1e-10);
        }
        assert!((chi_exact(&t, &m).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expanding_schedule_detects_divergence() {
        let m = BaseMeasure::lebesgue();
        let s = Schedule::expanding(0.0, 1.0, 2.0, 30, 0.0).unwrap();
        let n = schedule_integral(&m, |_| 1.0, &[], &s).unwrap();
        assert!(matches!(n, Norm::Divergent { .. }));
        let n = schedule_integral(&m, |x| (-x * x).exp(), &[], &s).unwrap();
        assert!((n.value().unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn action_iterates_match_closed_form() {
        let m = BaseMeasure::weighted_line();
        let gen = NsMap::make_translation(1.0).unwrap();
        let composed = ActionZ::new(gen);
        let closed = ActionZ::translations(1.0, &m).unwrap();
        for g in [-3i64, 0, 2, 5] {
            let a = composed.iterate(g).unwrap();
            let b = closed.iterate(g).unwrap();
            for x in [-4.0, -0.5, 0.5, 3.0] {
                assert!((a.apply(x) - b.apply(x)).abs() < 1e-12);
                assert!((a.rn(x) - b.rn(x)).abs() < 1e-12);
            }
            let na = cocycle_norm(&composed, g, &m).unwrap();
            let nb = cocycle_norm(&closed, g, &m).unwrap();
            let exact = (2f64.sqrt() - 1.0) * (g.abs() as f64).sqrt();
            assert!((na - exact).abs() < 1e-9 && (nb - exact).abs() < 1e-9);
        }
    }
}
