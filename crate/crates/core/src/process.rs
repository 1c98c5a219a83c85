//! Poisson point configurations on finite-measure windows.
//!
//! A configuration is drawn count-first: `N ~ Poisson(μ(w))`, then `N` iid
//! points from `μ|_w` normalised, via the window's inverse CDF.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::mc::{self, Estimate};
use crate::measure::{BaseMeasure, Window, WindowSampler};
use crate::nsmap::NsMap;

/// Points closer than this are treated as coincident.
pub const SIMPLE_RESOLUTION: f64 = 1e-15;
/// Resampling budget for non-simple draws.
pub const MAX_RESAMPLES: usize = 10;

/// Where a configuration came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedTag {
    pub seed: u64,
    pub trial: u64,
}

/// A finite simple point configuration observed on `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    points: Vec<f64>,
    window: Window,
    seed_tag: Option<SeedTag>,
}

impl PointConfig {
    /// Builds a configuration from arbitrary points, sorting them. Points must lie
    /// in `window` and be distinct.
    pub fn new(mut points: Vec<f64>, window: Window) -> Result<Self> {
        if let Some(x) = points.iter().find(|x| !window.contains(**x)) {
            return arg(format!("point {x} outside window {window}"));
        }
        points.sort_by(f64::total_cmp);
        if !is_simple(&points) {
            return arg("configuration is not simple");
        }
        Ok(Self {
            points,
            window,
            seed_tag: None,
        })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            points: Vec::new(),
            window,
            seed_tag: None,
        }
    }

    pub fn with_tag(mut self, tag: SeedTag) -> Self {
        self.seed_tag = Some(tag);
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn seed_tag(&self) -> Option<SeedTag> {
        self.seed_tag
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points lying in `a` (closed interval).
    pub fn points_in(&self, a: &Window) -> &[f64] {
        let lo = self.points.partition_point(|&x| x < a.lo);
        let hi = self.points.partition_point(|&x| x <= a.hi);
        &self.points[lo..hi]
    }

    /// The configuration seen through the smaller window `a`.
    pub fn restrict(&self, a: &Window) -> Result<Self> {
        if !self.window.contains_window(a) {
            return arg(format!(
                "window {a} is not inside the observed window {}",
                self.window
            ));
        }
        Ok(Self {
            points: self.points_in(a).to_vec(),
            window: *a,
            seed_tag: self.seed_tag,
        })
    }

    /// Checks that `a` lies inside the observed window.
    pub fn covers(&self, a: &Window) -> Result<()> {
        if self.window.contains_window(a) {
            Ok(())
        } else {
            arg(format!(
                "configuration observed on {} does not cover {a}",
                self.window
            ))
        }
    }
}

fn is_simple(sorted: &[f64]) -> bool {
    sorted.windows(2).all(|w| w[1] - w[0] >= SIMPLE_RESOLUTION)
}

/// `N_a(ω)`. The region `a` must have been observed.
pub fn count(omega: &PointConfig, a: &Window) -> Result<usize> {
    omega.covers(a)?;
    Ok(omega.points_in(a).len())
}

/// Reusable sampler of Poisson configurations with intensity `m` on one window.
#[derive(Debug, Clone)]
pub struct ConfigSampler {
    sampler: Option<WindowSampler>,
    poisson: Option<Poisson<f64>>,
    window: Window,
    mass: f64,
}

impl ConfigSampler {
    pub fn new(m: &BaseMeasure, w: Window) -> Result<Self> {
        let mass = m.mass(&w)?;
        if !mass.is_finite() {
            return arg(format!("window {w} has infinite mass"));
        }
        if mass <= 0.0 {
            return Ok(Self {
                sampler: None,
                poisson: None,
                window: w,
                mass: 0.0,
            });
        }
        let poisson =
            Poisson::new(mass).map_err(|e| Error::Argument(format!("poisson mean {mass}: {e}")))?;
        Ok(Self {
            sampler: Some(WindowSampler::new(m, w)?),
            poisson: Some(poisson),
            window: w,
            mass,
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointConfig> {
        let (Some(sampler), Some(poisson)) = (&self.sampler, &self.poisson) else {
            return Ok(PointConfig::empty(self.window));
        };
        for _ in 0..MAX_RESAMPLES {
            let n = poisson.sample(rng) as usize;
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.random();
                points.push(sampler.quantile(u)?);
            }
            points.sort_by(f64::total_cmp);
            if is_simple(&points) {
                return Ok(PointConfig {
                    points,
                    window: self.window,
                    seed_tag: None,
                });
            }
        }
        Err(Error::NonSimple {
            attempts: MAX_RESAMPLES,
        })
    }
}

/// One Poisson configuration with intensity `m` on `w`.
pub fn sample_config<R: Rng + ?Sized>(
    m: &BaseMeasure,
    w: Window,
    rng: &mut R,
) -> Result<PointConfig> {
    ConfigSampler::new(m, w)?.sample(rng)
}

/// `T_*ω`: the image configuration, observed on the image window.
pub fn pushforward(omega: &PointConfig, t: &NsMap) -> Result<PointConfig> {
    let image = t.image_window(&omega.window)?;
    let mut points: Vec<f64> = omega.points.iter().map(|&x| t.apply(x)).collect();
    points.sort_by(f64::total_cmp);
    Ok(PointConfig {
        points,
        window: image,
        seed_tag: omega.seed_tag,
    })
}

/// Outcome of a void-probability test on one window.
#[derive(Debug, Clone, Serialize)]
pub struct VoidRecord {
    pub window: Window,
    pub empirical: f64,
    pub target: f64,
    pub se: f64,
    pub z: f64,
}

impl VoidRecord {
    pub fn pass(&self) -> bool {
        self.z.abs() <= mc::Z_GATE
    }
}

/// Empirical `P(N_A = 0)` against `e^{-μ(A)}` for each window, plus the
/// product law for every pair of disjoint windows (reported after the
/// single-window records, with `window` set to the hull of the pair).
pub fn renyi_void_check(
    m: &BaseMeasure,
    windows: &[Window],
    trials: usize,
    seed: u64,
) -> Result<Vec<VoidRecord>> {
    if windows.is_empty() {
        return Ok(Vec::new());
    }
    let observed = windows[1..].iter().fold(windows[0], |acc, w| acc.hull(w));
    let sampler = ConfigSampler::new(m, observed)?;
    let masses: Vec<f64> = windows.iter().map(|w| m.mass(w)).collect::<Result<_>>()?;
    let voids: Vec<Vec<bool>> = mc::try_run_trials(seed, trials, |_, rng| {
        let omega = sampler.sample(rng)?;
        Ok::<_, Error>(
            windows
                .iter()
                .map(|w| omega.points_in(w).is_empty())
                .collect(),
        )
    })?;

    let mut out = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        let hits = voids.iter().filter(|v| v[i]).count();
        let target = (-masses[i]).exp();
        out.push(void_record(*w, hits, trials, target));
    }
    for i in 0..windows.len() {
        for j in i + 1..windows.len() {
            if windows[i].intersect(&windows[j]).is_some() {
                continue;
            }
            let hits = voids.iter().filter(|v| v[i] && v[j]).count();
            let target = (-(masses[i] + masses[j])).exp();
            out.push(void_record(
                windows[i].hull(&windows[j]),
                hits,
                trials,
                target,
            ));
        }
    }
    Ok(out)
}

fn void_record(window: Window, hits: usize, trials: usize, target: f64) -> VoidRecord {
    let e = Estimate::proportion(hits, trials, target);
    VoidRecord {
        window,
        empirical: e.mean,
        target,
        se: e.se,
        z: e.z(target),
    }
}

/// Writes `trial_id,point` rows.
pub fn write_configs_csv<W: Write>(out: &mut W, configs: &[(u64, PointConfig)]) -> Result<()> {
    writeln!(out, "trial_id,point")?;
    for (trial, omega) in configs {
        for x in &omega.points {
            writeln!(out, "{trial},{x}")?;
        }
    }
    Ok(())
}
