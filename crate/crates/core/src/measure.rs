//! σ-finite base measures on the real line given by piecewise densities.
//!
//! A [`BaseMeasure`] is never materialised on the whole line; every quantity is
//! computed on a finite [`Window`]. Global integrals over infinite-mass regions
//! go through window schedules (see [`crate::nsmap::Schedule`]).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::quad::{self, QuadOptions, DEFAULT_TOL};

/// Quantile bisection tolerance in x.
pub const QUANTILE_TOL: f64 = 1e-12;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bounded interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return arg(format!("window needs finite lo < hi, got [{lo}, {hi}]"));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Window { lo, hi })
    }

    /// Smallest window containing both.
    pub fn hull(&self, other: &Window) -> Window {
        Window {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn hull_opt(a: Option<Window>, b: Option<Window>) -> Option<Window> {
        match (a, b) {
            (Some(a), Some(b)) => Some(a.hull(&b)),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Region outside of which some function is trivial (zero, identity, or a
/// Radon–Nikodym derivative equal to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Empty,
    Within(Window),
    Unbounded,
}

impl Support {
    pub fn window(&self) -> Option<Window> {
        match self {
            Support::Within(w) => Some(*w),
            _ => None,
        }
    }

    pub fn hull(&self, other: &Support) -> Support {
        match (self, other) {
            (Support::Unbounded, _) | (_, Support::Unbounded) => Support::Unbounded,
            (Support::Empty, s) | (s, Support::Empty) => *s,
            (Support::Within(a), Support::Within(b)) => Support::Within(a.hull(b)),
        }
    }

    /// Whether the region fits inside `w`.
    pub fn inside(&self, w: &Window) -> bool {
        match self {
            Support::Empty => true,
            Support::Within(s) => w.contains_window(s),
            Support::Unbounded => false,
        }
    }
}

/// Density of one piece. `antiderivative` is optional; when present, masses and
/// quantiles avoid quadrature.
#[derive(Clone)]
pub struct Density {
    f: RealFn,
    antiderivative: Option<RealFn>,
    constant: Option<f64>,
}

impl Density {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            antiderivative: None,
            constant: None,
        }
    }

    pub fn with_antiderivative(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        big_f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            antiderivative: Some(Arc::new(big_f)),
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut d = Self::with_antiderivative(move |_| c, move |x| c * x);
        d.constant = Some(c);
        d
    }

    /// The value of a constant density.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density")
            .field("exact_antiderivative", &self.antiderivative.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub density: Density,
}

/// σ-finite measure `scale · Σ density_i(x) 1_{piece_i}(x) dx`.
#[derive(Debug, Clone)]
pub struct BaseMeasure {
    pieces: Vec<Piece>,
    scale: f64,
    total_mass_hint: f64,
    label: String,
}

impl BaseMeasure {
    /// Pieces must be ordered and disjoint; endpoints may be infinite.
    pub fn from_pieces(
        label: impl Into<String>,
        pieces: Vec<Piece>,
        total_mass_hint: f64,
    ) -> Result<Self> {
        if pieces.is_empty() {
            return arg("a measure needs at least one piece");
        }
        for p in &pieces {
            if !(p.lo < p.hi) || p.lo.is_nan() || p.hi.is_nan() {
                return arg(format!("bad piece [{}, {}]", p.lo, p.hi));
            }
        }
        for w in pieces.windows(2) {
            if w[0].hi > w[1].lo {
                return arg("pieces must be ordered and disjoint");
            }
        }
        Ok(Self {
            pieces,
            scale: 1.0,
            total_mass_hint,
            label: label.into(),
        })
    }

    /// Lebesgue measure on the whole line.
    pub fn lebesgue() -> Self {
        Self::lebesgue_on(f64::NEG_INFINITY, f64::INFINITY).expect("valid")
    }

    /// Lebesgue measure restricted to `[lo, hi]` (endpoints may be infinite).
    pub fn lebesgue_on(lo: f64, hi: f64) -> Result<Self> {
        let mass = if lo.is_finite() && hi.is_finite() {
            hi - lo
        } else {
            f64::INFINITY
        };
        Self::from_pieces(
            "lebesgue",
            vec![Piece {
                lo,
                hi,
                density: Density::constant(1.0),
            }],
            mass,
        )
    }

    /// `dm/dx = 1` on `(-∞, 0)` and `2` on `[0, ∞)`.
    pub fn weighted_line() -> Self {
        Self::from_pieces(
            "weighted_line",
            vec![
                Piece {
                    lo: f64::NEG_INFINITY,
                    hi: 0.0,
                    density: Density::constant(1.0),
                },
                Piece {
                    lo: 0.0,
                    hi: f64::INFINITY,
                    density: Density::constant(2.0),
                },
            ],
            f64::INFINITY,
        )
        .expect("valid")
    }

    /// Density `e^{-rate·x}` on `[0, ∞)`.
    pub fn exp_decay(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return arg("exp_decay needs a positive rate");
        }
        Self::from_pieces(
            "exp_decay",
            vec![Piece {
                lo: 0.0,
                hi: f64::INFINITY,
                density: Density::with_antiderivative(
                    move |x| (-rate * x).exp(),
                    move |x| -(-rate * x).exp() / rate,
                ),
            }],
            1.0 / rate,
        )
    }

    /// Piecewise-constant density: `densities[i]` on `[breaks[i], breaks[i+1])`.
    /// Zero-density pieces are allowed.
    pub fn piecewise(breaks: &[f64], densities: &[f64]) -> Result<Self> {
        if breaks.len() != densities.len() + 1 {
            return arg("piecewise: need one more breakpoint than densities");
        }
        let mut pieces = Vec::new();
        let mut total = 0.0;
        for (i, &d) in densities.iter().enumerate() {
            if !(d >= 0.0) || !d.is_finite() {
                return arg(format!(
                    "piecewise: density {d} must be finite and nonnegative"
                ));
            }
            let (lo, hi) = (breaks[i], breaks[i + 1]);
            if d > 0.0 {
                total += d * (hi - lo);
            }
            pieces.push(Piece {
                lo,
                hi,
                density: Density::constant(d),
            });
        }
        Self::from_pieces("piecewise", pieces, total)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale
    }

    pub fn total_mass_hint(&self) -> f64 {
        self.total_mass_hint * self.scale
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Finite piece boundaries, used as quadrature breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .pieces
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .filter(|x| x.is_finite())
            .collect();
        out.dedup();
        out
    }

    /// `scale · density` at `x` (0 off the pieces).
    pub fn density_at(&self, x: f64) -> f64 {
        for p in &self.pieces {
            if x >= p.lo && x < p.hi {
                return self.scale * p.density.eval(x);
            }
        }
        0.0
    }

    /// The measure `t·μ`.
    pub fn scale(&self, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return arg(format!("scale factor must be positive, got {t}"));
        }
        let mut out = self.clone();
        out.scale *= t;
        Ok(out)
    }

    /// Mass of `w ∩ piece` using the antiderivative when available.
    fn piece_mass(&self, p: &Piece, w: &Window, tol: f64) -> Result<f64> {
        let lo = p.lo.max(w.lo);
        let hi = p.hi.min(w.hi);
        if lo >= hi {
            return Ok(0.0);
        }
        let raw = match &p.density.antiderivative {
            Some(big_f) => big_f(hi) - big_f(lo),
            None => {
                let d = &p.density;
                quad::integrate(
                    |x| d.eval(x),
                    lo,
                    hi,
                    QuadOptions::with_tol(tol / self.scale),
                )?
                .value
            }
        };
        Ok(self.scale * raw)
    }

    /// `μ(w)`.
    pub fn mass(&self, w: &Window) -> Result<f64> {
        self.pieces
            .iter()
            .map(|p| self.piece_mass(p, w, DEFAULT_TOL))
            .sum()
    }

    /// `∫_w h dμ` within `tol`.
    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H, w: &Window, tol: f64) -> Result<f64> {
        self.integrate_with_breaks(h, w, &[], tol)
    }

    /// As [`Self::integrate`] with extra discontinuities of `h` declared.
    pub fn integrate_with_breaks<H: Fn(f64) -> f64>(
        &self,
        h: H,
        w: &Window,
        breaks: &[f64],
        tol: f64,
    ) -> Result<f64> {
        let active: Vec<&Piece> = self
            .pieces
            .iter()
            .filter(|p| p.lo.max(w.lo) < p.hi.min(w.hi))
            .collect();
        let per_piece_tol = tol / active.len().max(1) as f64;
        let mut total = 0.0;
        for p in active {
            let lo = p.lo.max(w.lo);
            let hi = p.hi.min(w.hi);
            let d = &p.density;
            let s = self.scale;
            let r = quad::integrate_with_breaks(
                |x| h(x) * s * d.eval(x),
                lo,
                hi,
                breaks,
                QuadOptions::with_tol(per_piece_tol),
            )?;
            total += r.value;
        }
        Ok(total)
    }

    /// Whether every piece has a constant density.
    pub fn is_piecewise_constant(&self) -> bool {
        self.pieces.iter().all(|p| p.density.constant.is_some())
    }

    /// The measure `φ·μ`, where `φ` is taken to be 1 outside `support`.
    /// `phi_constant` declares `φ` constant on `support`.
    pub fn reweight(
        &self,
        phi: RealFn,
        support: Window,
        phi_constant: Option<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let cuts = [p.lo, p.lo.max(support.lo), p.hi.min(support.hi), p.hi];
            // left of support, inside, right of support
            let spans = [
                (cuts[0], support.lo.min(p.hi)),
                (cuts[1], cuts[2]),
                (support.hi.max(p.lo), cuts[3]),
            ];
            for (k, &(lo, hi)) in spans.iter().enumerate() {
                if !(lo < hi) {
                    continue;
                }
                let density = if k != 1 {
                    p.density.clone()
                } else {
                    match (p.density.constant, phi_constant) {
                        (Some(c), Some(r)) => Density::constant(c * r),
                        _ => {
                            let d = p.density.clone();
                            let phi = phi.clone();
                            Density::new(move |x| d.eval(x) * phi(x))
                        }
                    }
                };
                pieces.push(Piece { lo, hi, density });
            }
        }
        let mut out = Self::from_pieces(label, pieces, f64::NAN)?;
        out.scale = self.scale;
        let inside = self.integrate(|x| phi(x) - 1.0, &support, DEFAULT_TOL)?;
        out.total_mass_hint = self.total_mass_hint + inside / self.scale;
        Ok(out)
    }

    /// `x` with `μ([lo, x]) = u·μ(w)`.
    pub fn quantile(&self, w: &Window, u: f64) -> Result<f64> {
        WindowSampler::new(self, *w)?.quantile(u)
    }
}

/// Per-window cache of piece masses for repeated inverse-CDF evaluation.
#[derive(Debug, Clone)]
pub struct WindowSampler {
    measure: BaseMeasure,
    window: Window,
    // (lo, hi, piece index, mass); only pieces with positive mass
    segments: Vec<(f64, f64, usize, f64)>,
    cumulative: Vec<f64>,
    total: f64,
    // CDF tables for pieces without an antiderivative: nodes and cumulative masses
    tables: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

const TABLE_CELLS: usize = 256;

impl WindowSampler {
    pub fn new(measure: &BaseMeasure, window: Window) -> Result<Self> {
        let mut segments = Vec::new();
        let mut tables = Vec::new();
        for (i, p) in measure.pieces.iter().enumerate() {
            let lo = p.lo.max(window.lo);
            let hi = p.hi.min(window.hi);
            if lo >= hi {
                continue;
            }
            let mass = measure.piece_mass(p, &window, DEFAULT_TOL)?;
            if mass <= 0.0 {
                continue;
            }
            let table = if p.density.antiderivative.is_none() {
                let h = (hi - lo) / TABLE_CELLS as f64;
                let nodes: Vec<f64> = (0..=TABLE_CELLS).map(|k| lo + h * k as f64).collect();
                let mut cum = vec![0.0; TABLE_CELLS + 1];
                for k in 0..TABLE_CELLS {
                    let d = &p.density;
                    let r = quad::integrate(
                        |x| d.eval(x),
                        nodes[k],
                        nodes[k + 1],
                        QuadOptions::with_tol(DEFAULT_TOL / TABLE_CELLS as f64),
                    )?;
                    cum[k + 1] = cum[k] + measure.scale * r.value;
                }
                Some((nodes, cum))
            } else {
                None
            };
            segments.push((lo, hi, i, mass));
            tables.push(table);
        }
        let mut cumulative = Vec::with_capacity(segments.len());
        let mut total = 0.0;
        for s in &segments {
            total += s.3;
            cumulative.push(total);
        }
        Ok(Self {
            measure: measure.clone(),
            window,
            segments,
            cumulative,
            total,
            tables,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return arg(format!("quantile level must lie in [0, 1], got {u}"));
        }
        if self.total <= 0.0 {
            return arg("quantile of a window with zero mass");
        }
        if u == 0.0 {
            return Ok(self.window.lo);
        }
        let target = u * self.total;
        let idx = self
            .cumulative
            .iter()
            .position(|&c| c >= target)
            .unwrap_or(self.segments.len() - 1);
        let before = if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1]
        };
        let (lo, hi, piece, _) = self.segments[idx];
        let within = (target - before).max(0.0);
        let p = &self.measure.pieces[piece];
        let scale = self.measure.scale;
        if let Some(c) = p.density.constant {
            return Ok((lo + within / (scale * c)).clamp(lo, hi));
        }

        let (mut a, mut b, base, cell_lo) = match &self.tables[idx] {
            None => (lo, hi, 0.0, lo),
            Some((nodes, cum)) => {
                let k = cum.partition_point(|&c| c < within).clamp(1, TABLE_CELLS);
                (nodes[k - 1], nodes[k], cum[k - 1], nodes[k - 1])
            }
        };
        let cdf = |x: f64| -> f64 {
            match &p.density.antiderivative {
                Some(big_f) => scale * (big_f(x) - big_f(lo)),
                None => {
                    let d = &p.density;
                    base + scale
                        * quad::integrate(|y| d.eval(y), cell_lo, x, QuadOptions::with_tol(1e-13))
                            .map(|r| r.value)
                            .unwrap_or(f64::NAN)
                }
            }
        };
        while b - a > QUANTILE_TOL {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let c = cdf(mid);
            if c.is_nan() {
                return Err(Error::Numeric {
                    what: "quantile cumulative mass".into(),
                    residual: f64::NAN,
                });
            }
            if c < within {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn lebesgue_mass() {
        let m = BaseMeasure::lebesgue();
        assert_eq!(m.mass(&w(0.0, 2.0)).unwrap(), 2.0);
    }

    #[test]
    fn weighted_line_mass() {
        let m = BaseMeasure::weighted_line();
        assert!((m.mass(&w(-1.0, 1.0)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn exp_decay_mass() {
        let m = BaseMeasure::exp_decay(1.0).unwrap();
        let got = m.mass(&w(0.0, 50.0)).unwrap();
        assert!((got - (1.0 - (-50.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn integrate_constant_is_mass() {
        let m = BaseMeasure::weighted_line();
        let win = w(-2.0, 3.5);
        let a = m.integrate(|_| 1.0, &win, DEFAULT_TOL).unwrap();
        assert!((a - m.mass(&win).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn integrate_identity_on_unit_interval() {
        let m = BaseMeasure::lebesgue();
        let a = m.integrate(|x| x, &w(0.0, 1.0), DEFAULT_TOL).unwrap();
        assert!((a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let m = BaseMeasure::lebesgue();
        assert!((m.quantile(&w(0.0, 2.0), 0.5).unwrap() - 1.0).abs() < 1e-11);
        assert_eq!(m.quantile(&w(0.0, 2.0), 0.0).unwrap(), 0.0);
        let wl = BaseMeasure::weighted_line();
        assert!(wl.quantile(&w(-1.0, 1.0), 1.0 / 3.0).unwrap().abs() < 1e-11);
    }

    #[test]
    fn quantile_rejects_bad_level() {
        let m = BaseMeasure::lebesgue();
        assert!(matches!(
            m.quantile(&w(0.0, 1.0), 1.5),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            m.quantile(&w(0.0, 1.0), -0.1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn scale_multiplies_mass() {
        let m = BaseMeasure::lebesgue();
        assert_eq!(m.scale(1.0).unwrap().mass(&w(0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(m.scale(2.0).unwrap().mass(&w(0.0, 1.0)).unwrap(), 2.0);
        assert!(m.scale(0.0).is_err());
        assert!(m.scale(-1.0).is_err());
    }

    #[test]
    fn generic_density_quantile_uses_table() {
        let m = BaseMeasure::from_pieces(
            "bump",
            vec![Piece {
                lo: 0.0,
                hi: 1.0,
                density: Density::new(|x| 1.0 + (std::f64::consts::PI * x).sin()),
            }],
            f64::NAN,
        )
        .unwrap();
        let win = w(0.0, 1.0);
        let total = m.mass(&win).unwrap();
        assert!((total - (1.0 + 2.0 / std::f64::consts::PI)).abs() < 1e-10);
        for &u in &[0.1, 0.37, 0.5, 0.9] {
            let x = m.quantile(&win, u).unwrap();
            let back = m.mass(&w(0.0, x)).unwrap();
            assert!((back - u * total).abs() < 1e-10, "u={u}");
        }
    }

    #[test]
    fn zero_density_piece_has_no_mass() {
        let m = BaseMeasure::piecewise(&[0.0, 1.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!(m.mass(&w(0.0, 1.0)).unwrap(), 0.0);
        assert!(m.quantile(&w(0.0, 1.0), 0.5).is_err());
        assert!((m.quantile(&w(0.0, 2.0), 0.5).unwrap() - 1.5).abs() < 1e-11);
    }

    #[test]
    fn window_validation() {
        assert!(Window::new(1.0, 1.0).is_err());
        assert!(Window::new(0.0, f64::INFINITY).is_err());
    }
}
