//! Diagnostics of ℤ-actions and their suspensions: κ-entropy, the
//! dissipativity series, cocycle profiles and stationarity defects.

use std::io::Write;
use std::ops::RangeInclusive;

use rand::Rng;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::mc::{self, Estimate};
use crate::measure::{BaseMeasure, Window};
use crate::nsmap::{self, ActionZ, NsMap, Schedule};
use crate::process::ConfigSampler;
use crate::suspension::SuspendedRn;

/// Tail terms below this make a series summable.
pub const SUMMABLE_TAIL: f64 = 1e-12;

/// A finitely supported probability on ℤ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaMeasure {
    atoms: Vec<(i64, f64)>,
    symmetric: bool,
}

impl KappaMeasure {
    /// Weights must be positive and sum to 1 within `1e-12`; repeated atoms
    /// are merged.
    pub fn new(atoms: &[(i64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return arg("κ needs at least one atom");
        }
        if atoms.iter().any(|&(_, p)| !(p > 0.0)) {
            return arg("κ weights must be positive");
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return arg(format!("κ weights sum to {total}, not 1"));
        }
        let mut merged: Vec<(i64, f64)> = Vec::new();
        let mut sorted = atoms.to_vec();
        sorted.sort_by_key(|a| a.0);
        for (g, p) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == g => last.1 += p,
                _ => merged.push((g, p)),
            }
        }
        let weight = |g: i64| merged.iter().find(|a| a.0 == g).map_or(0.0, |a| a.1);
        let symmetric = merged.iter().all(|&(g, p)| weight(-g) == p);
        Ok(Self {
            atoms: merged,
            symmetric,
        })
    }

    pub fn delta(g: i64) -> Self {
        Self {
            atoms: vec![(g, 1.0)],
            symmetric: g == 0,
        }
    }

    /// `½(δ_g + δ_{−g})`.
    pub fn symmetric_pair(g: i64) -> Result<Self> {
        if g == 0 {
            return Ok(Self::delta(0));
        }
        Self::new(&[(-g, 0.5), (g, 0.5)])
    }

    /// `½(δ₁ + δ₋₁)`.
    pub fn symmetric_pm1() -> Self {
        Self::symmetric_pair(1).expect("valid")
    }

    pub fn atoms(&self) -> &[(i64, f64)] {
        &self.atoms
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(g, p) in &self.atoms {
            acc += p;
            if u < acc {
                return g;
            }
        }
        self.atoms.last().expect("non-empty").0
    }
}

fn schedule_for(t: &NsMap, schedule: Option<&Schedule>) -> Result<Schedule> {
    match schedule {
        Some(s) => Ok(s.clone()),
        None => Schedule::for_map(t),
    }
}

/// `h_κ = Σ κ(g) ∫ (T_g′ − 1 − log T_g′) dμ`. With `schedule = None` each
/// iterate is integrated over its own Radon–Nikodym support.
pub fn entropy(
    a: &ActionZ,
    k: &KappaMeasure,
    m: &BaseMeasure,
    schedule: Option<&Schedule>,
) -> Result<f64> {
    let mut h = 0.0;
    for &(g, p) in k.atoms() {
        let t = a.iterate(g)?;
        let s = schedule_for(&t, schedule)?;
        nsmap::aut2_deficiency(&t, m, &s)?.require("‖√T′−1‖₂")?;
        let v = nsmap::rn_integral(&t, m, |r| r - 1.0 - r.ln(), &s)?.require("∫(T′−1−log T′)")?;
        h += p * v;
    }
    Ok(h)
}

/// The entropy written through `χ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Aut1Entropy {
    /// `Σ κ(g)(χ(T_g) − ∫ log T_g′ dμ)`.
    pub full: f64,
    /// `Σ κ(g) χ(T_g)`.
    pub chi_term: f64,
    /// `−Σ κ(g) ∫ log T_g′ dμ`, when κ is symmetric or every `T_g` is
    /// declared conservative.
    pub simplified: Option<f64>,
}

pub fn entropy_aut1_form(
    a: &ActionZ,
    k: &KappaMeasure,
    m: &BaseMeasure,
    schedule: Option<&Schedule>,
) -> Result<Aut1Entropy> {
    let mut chi_term = 0.0;
    let mut log_term = 0.0;
    let mut conservative = true;
    for &(g, p) in k.atoms() {
        let t = a.iterate(g)?;
        let s = schedule_for(&t, schedule)?;
        chi_term += p * nsmap::chi(&t, m, &s)?;
        log_term += p * nsmap::rn_integral(&t, m, f64::ln, &s)?.require("∫ log T′")?;
        conservative &= t.is_conservative();
    }
    Ok(Aut1Entropy {
        full: chi_term - log_term,
        chi_term,
        simplified: (k.is_symmetric() || conservative).then_some(-log_term),
    })
}

/// One row of a cocycle profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub g: i64,
    /// `‖c_T(g)‖₂`.
    pub norm: f64,
    /// `e^{−½‖c_T(g)‖₂²}`.
    pub term: f64,
}

/// Partial sums of a nonnegative series and the summability verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summability {
    pub partial_sums: Vec<f64>,
    /// Largest of the final two terms.
    pub tail: f64,
    pub summable: bool,
}

/// Partial sums in the given order; summable when the last two terms are
/// below [`SUMMABLE_TAIL`].
pub fn summability(terms: &[f64]) -> Summability {
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = terms
        .iter()
        .map(|t| {
            acc += t;
            acc
        })
        .collect();
    let tail = terms.iter().rev().take(2).fold(0.0f64, |a, &b| a.max(b));
    Summability {
        partial_sums,
        tail,
        summable: !terms.is_empty() && tail < SUMMABLE_TAIL,
    }
}

/// `g` values ordered `0, 1, −1, 2, −2, …` restricted to `range`.
fn by_magnitude(range: &RangeInclusive<i64>) -> Vec<i64> {
    let mut gs: Vec<i64> = range.clone().collect();
    gs.sort_by_key(|&g| (g.unsigned_abs(), g < 0));
    gs
}

/// `‖c_T(g)‖₂` over `range`, ordered by `|g|`.
pub fn zero_type_profile(
    a: &ActionZ,
    range: RangeInclusive<i64>,
    m: &BaseMeasure,
    schedule: Option<&Schedule>,
) -> Result<Vec<ProfileRow>> {
    by_magnitude(&range)
        .into_iter()
        .map(|g| {
            let norm = match schedule {
                Some(s) => nsmap::cocycle_norm_with(a, g, m, s)?,
                None => nsmap::cocycle_norm(a, g, m)?,
            };
            Ok(ProfileRow {
                g,
                norm,
                term: (-0.5 * norm * norm).exp(),
            })
        })
        .collect()
}

/// `min_{|g| ≥ n} ‖c_T(g)‖₂` for each row of a profile ordered by `|g|`.
pub fn profile_envelope(rows: &[ProfileRow]) -> Vec<f64> {
    let mut out = vec![0.0; rows.len()];
    let mut acc = f64::INFINITY;
    for i in (0..rows.len()).rev() {
        acc = acc.min(rows[i].norm);
        out[i] = acc;
    }
    out
}

/// The dissipativity series `Σ_g e^{−½‖c_T(g)‖₂²}`.
#[derive(Debug, Clone, Serialize)]
pub struct DissipativityScore {
    pub rows: Vec<ProfileRow>,
    pub series: Summability,
}

pub fn dissipativity_score(
    a: &ActionZ,
    range: RangeInclusive<i64>,
    m: &BaseMeasure,
    schedule: Option<&Schedule>,
) -> Result<DissipativityScore> {
    let rows = zero_type_profile(a, range, m, schedule)?;
    let terms: Vec<f64> = rows.iter().map(|r| r.term).collect();
    Ok(DissipativityScore {
        series: summability(&terms),
        rows,
    })
}

/// Writes `g,norm,term`.
pub fn write_profile_csv<W: Write>(out: &mut W, rows: &[ProfileRow]) -> Result<()> {
    writeln!(out, "g,norm,term")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.g, r.norm, r.term)?;
    }
    Ok(())
}

/// Monte Carlo `⟨U_{(T_g)_*}1, 1⟩ = E[√((T_g)_*′)]` against `e^{−½‖c_T(g)‖²}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OverlapRecord {
    pub g: i64,
    pub estimate: f64,
    pub target: f64,
    pub se: f64,
    pub z: f64,
}

impl OverlapRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

pub fn unit_overlap_mc(
    a: &ActionZ,
    g: i64,
    m: &BaseMeasure,
    trials: usize,
    seed: u64,
) -> Result<OverlapRecord> {
    let t = a.iterate(g)?;
    let norm = nsmap::cocycle_norm(a, g, m)?;
    let target = (-0.5 * norm * norm).exp();
    let rn = SuspendedRn::new(&t, m)?;
    let xs = match t.rn_support() {
        crate::measure::Support::Within(w) => {
            let sampler = ConfigSampler::new(m, w)?;
            mc::try_run_trials(seed, trials, |_, rng| {
                let omega = sampler.sample(rng)?;
                Ok::<_, Error>((0.5 * rn.log_eval(&omega)?).exp())
            })?
        }
        // T_g preserves μ, so (T_g)_*′ = 1 on every path.
        crate::measure::Support::Empty => vec![1.0; trials],
        crate::measure::Support::Unbounded => {
            return Err(Error::Argument(format!("T_{g} moves unbounded mass")));
        }
    };
    let e = Estimate::from_samples(&xs);
    Ok(OverlapRecord {
        g,
        estimate: e.mean,
        target,
        se: e.se,
        z: e.z(target),
    })
}

/// Stationarity defect on one window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StationarityRow {
    pub window: Window,
    /// `μ(A)`.
    pub mass: f64,
    /// `Σ κ(g) μ(T_g A)`.
    pub mixed_mass: f64,
    /// `|mixed_mass − mass|`.
    pub defect: f64,
    /// `e^{−μ(A)}`.
    pub void: f64,
    /// `Σ κ(g) e^{−μ(T_g A)}`.
    pub mixed_void: f64,
    /// `mixed_void − e^{−mixed_mass}`, nonnegative by convexity.
    pub jensen_gap: f64,
    /// Monte Carlo estimate of `mixed_void`, drawing `g ~ κ`.
    pub mixed_void_mc: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub rows: Vec<StationarityRow>,
    pub defect: f64,
}

pub fn stationarity_defect(
    a: &ActionZ,
    k: &KappaMeasure,
    m: &BaseMeasure,
    windows: &[Window],
    trials: usize,
    seed: u64,
) -> Result<StationarityReport> {
    let mut maps = Vec::new();
    for &(g, p) in k.atoms() {
        maps.push((g, p, a.iterate(g)?));
    }
    let mut rows = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let mass = m.mass(w)?;
        let mut images = Vec::new();
        let (mut mixed_mass, mut mixed_void) = (0.0, 0.0);
        for (g, p, t) in &maps {
            let img = t.image_window(w)?;
            let mi = m.mass(&img)?;
            mixed_mass += p * mi;
            mixed_void += p * (-mi).exp();
            images.push((*g, ConfigSampler::new(m, img)?));
        }
        let hits = mc::try_run_trials(
            mc::derive_seed(seed, &format!("window{i}")),
            trials,
            |_, rng| {
                let g = k.sample(rng);
                let (_, s) = images.iter().find(|x| x.0 == g).expect("atom");
                Ok::<_, Error>(s.sample(rng)?.is_empty())
            },
        )?;
        let n_void = hits.iter().filter(|&&h| h).count();
        let e = Estimate::proportion(n_void, trials, mixed_void);
        rows.push(StationarityRow {
            window: *w,
            mass,
            mixed_mass,
            defect: (mixed_mass - mass).abs(),
            void: (-mass).exp(),
            mixed_void,
            jensen_gap: mixed_void - (-mixed_mass).exp(),
            mixed_void_mc: e.mean,
            se: e.se,
            z: e.z(mixed_void),
        });
    }
    let defect = rows.iter().fold(0.0f64, |acc, r| acc.max(r.defect));
    Ok(StationarityReport { rows, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suspension::DensityRatio;

    fn w(lo: f64, hi: f64) -> Window {
        Window::new(lo, hi).unwrap()
    }

    #[test]
    fn kappa_validation() {
        assert!(KappaMeasure::new(&[(1, 0.5), (2, 0.4)]).is_err());
        assert!(KappaMeasure::new(&[(1, 0.5), (-1, 0.5)])
            .unwrap()
            .is_symmetric());
        assert!(!KappaMeasure::new(&[(1, 0.5), (-2, 0.5)])
            .unwrap()
            .is_symmetric());
        assert!(!KappaMeasure::delta(1).is_symmetric());
    }

    #[test]
    fn entropy_of_measure_preserving_swap_is_zero() {
        let m = BaseMeasure::lebesgue();
        let a = ActionZ::new(NsMap::swap(w(0.0, 1.0), w(1.0, 2.0), &m).unwrap());
        let k = KappaMeasure::symmetric_pm1();
        assert!(entropy(&a, &k, &m, None).unwrap().abs() < 1e-14);
    }

    #[test]
    fn entropy_of_doubling_step() {
        let m = BaseMeasure::lebesgue();
        let t = DensityRatio::step(2.0, w(0.0, 1.0))
            .unwrap()
            .density_map(&m)
            .unwrap();
        let a = ActionZ::new(t);
        let h = entropy(&a, &KappaMeasure::delta(1), &m, None).unwrap();
        assert!((h - (1.0 - 2f64.ln())).abs() < 1e-10);
        let f = entropy_aut1_form(&a, &KappaMeasure::delta(1), &m, None).unwrap();
        assert!((f.full - h).abs() < 1e-10);
        assert!((f.chi_term - 1.0).abs() < 1e-10);
        assert!(f.simplified.is_none());
    }

    #[test]
    fn translation_entropy_with_symmetric_kappa() {
        let m = BaseMeasure::weighted_line();
        let a = ActionZ::translations(1.0, &m).unwrap();
        let k = KappaMeasure::symmetric_pm1();
        let h = entropy(&a, &k, &m, None).unwrap();
        assert!((h - 0.5 * 2f64.ln()).abs() < 1e-10);
        let f = entropy_aut1_form(&a, &k, &m, None).unwrap();
        assert!(f.chi_term.abs() < 1e-12);
        assert!((f.simplified.unwrap() - h).abs() < 1e-10);
    }

    #[test]
    fn translation_terms_are_geometric() {
        let m = BaseMeasure::weighted_line();
        let a = ActionZ::translations(1.0, &m).unwrap();
        let s = dissipativity_score(&a, -400..=400, &m, None).unwrap();
        let c = (2f64.sqrt() - 1.0).powi(2);
        for r in &s.rows {
            assert!((r.term - (-0.5 * c * r.g.abs() as f64).exp()).abs() < 1e-8);
        }
        assert!(s.series.summable);
        assert!(s.series.partial_sums.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn identity_action_is_not_summable() {
        let m = BaseMeasure::lebesgue();
        let a = ActionZ::new(NsMap::identity());
        let s = dissipativity_score(&a, -10..=10, &m, None).unwrap();
        assert!(s.rows.iter().all(|r| r.term == 1.0 && r.norm == 0.0));
        assert!(!s.series.summable);
    }

    #[test]
    fn envelope_is_monotone() {
        let m = BaseMeasure::weighted_line();
        let a = ActionZ::translations(1.0, &m).unwrap();
        let rows = zero_type_profile(&a, -5..=5, &m, None).unwrap();
        assert_eq!(rows[0].g, 0);
        let env = profile_envelope(&rows);
        assert!(env.windows(2).all(|p| p[1] >= p[0]));
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("g,norm,term\n0,0,1\n"));
    }

    #[test]
    fn unit_overlap_matches_cocycle() {
        let m = BaseMeasure::weighted_line();
        let a = ActionZ::translations(1.0, &m).unwrap();
        for g in [1, -2, 3] {
            let r = unit_overlap_mc(&a, g, &m, 20_000, 4).unwrap();
            assert!(r.pass(), "{r:?}");
        }
    }

    #[test]
    fn stationarity() {
        let m = BaseMeasure::lebesgue();
        let swap = ActionZ::new(NsMap::swap(w(0.0, 1.0), w(1.0, 2.0), &m).unwrap());
        let r = stationarity_defect(
            &swap,
            &KappaMeasure::symmetric_pm1(),
            &m,
            &[w(0.0, 0.5)],
            5000,
            1,
        )
        .unwrap();
        assert!(r.defect < 1e-12);
        let wl = BaseMeasure::weighted_line();
        let tr = ActionZ::translations(1.0, &wl).unwrap();
        let r = stationarity_defect(
            &tr,
            &KappaMeasure::delta(1),
            &wl,
            &[w(-0.5, 0.5)],
            20_000,
            1,
        )
        .unwrap();
        // T₁[-0.5,0.5] = [0.5,1.5]: mass 2 against 1.5
        assert!((r.defect - 0.5).abs() < 1e-12);
        assert!(r.rows[0].z.abs() <= 4.0);
        let k = KappaMeasure::symmetric_pm1();
        let r = stationarity_defect(&tr, &k, &wl, &[w(-0.5, 0.5)], 20_000, 1).unwrap();
        assert!(r.rows[0].jensen_gap > 0.0);
    }
}
