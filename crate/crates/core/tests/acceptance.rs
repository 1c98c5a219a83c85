//! Acceptance battery: runs every bundled criterion at its stated tolerance
//! and prints one PASS/FAIL line per criterion.
//!
//! Targets that the library computes are re-derived here from the scenario
//! parameters with independent arithmetic (Simpson quadrature, closed forms).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use poisson_lab::scenario::{self, CheckSpec, Gate, Outcome, Record, RunOptions, Scenario};
use poisson_lab::Window;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

fn load(name: &str) -> Scenario {
    scenario::load(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Runs only the checks of the given kinds from a bundled scenario.
fn run_kinds(name: &str, kinds: &[&str]) -> (Scenario, Outcome, Duration) {
    let mut s = load(name);
    s.checks.retain(|c| kinds.contains(&c.kind()));
    assert!(!s.checks.is_empty(), "{name} has no {kinds:?} checks");
    let start = Instant::now();
    let o = scenario::run(&s, RunOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    (s, o, start.elapsed())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn of_kind<'a>(o: &'a Outcome, kind: &str) -> Vec<&'a Record> {
    o.report
        .records
        .iter()
        .filter(|r| r.check == kind)
        .collect()
}

struct Verdict {
    problems: Vec<String>,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Self {
            problems: Vec::new(),
            detail: String::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.problems.push(what.into());
        }
    }

    fn records_pass(&mut self, rs: &[&Record]) {
        for r in rs {
            if !r.pass {
                self.problems.push(format!(
                    "{} {}: estimate {} target {}",
                    r.check, r.label, r.estimate, r.target
                ));
            }
        }
    }

    fn within(&mut self, elapsed: Duration, limit_s: f64) {
        self.require(
            elapsed.as_secs_f64() < limit_s,
            format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()),
        );
    }
}

fn max_abs_z(rs: &[&Record]) -> f64 {
    rs.iter()
        .filter_map(|r| match r.gate {
            Gate::ZScore { z, .. } => Some(z.abs()),
            _ => None,
        })
        .fold(0.0, f64::max)
}

fn max_residual(rs: &[&Record]) -> f64 {
    rs.iter()
        .filter_map(|r| match r.gate {
            Gate::Residual { residual, .. } => Some(residual),
            _ => None,
        })
        .fold(0.0, f64::max)
}

fn poisson_sampling() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, t) = run_kinds("poisson_counts", &["poisson_counts"]);
    let rs = of_kind(&o, "poisson_counts");
    v.records_pass(&rs);
    let masses = [0.3, 1.0, std::f64::consts::LN_2, 5.0];
    v.require(rs.len() == 3 * masses.len(), "three records per mass");
    for (i, &m) in masses.iter().enumerate() {
        let [mean, var, void] = [rs[3 * i], rs[3 * i + 1], rs[3 * i + 2]];
        v.require(
            mean.target == m && var.target == m,
            format!("mass {m} targets"),
        );
        v.require(
            (void.target - (-m).exp()).abs() < 1e-15,
            format!("void target for {m}"),
        );
    }
    v.within(t, 5.0);
    v.detail = format!(
        "{} records, max |z| {:.2}, {:.1}s",
        rs.len(),
        max_abs_z(&rs),
        t.as_secs_f64()
    );
    v
}

fn exponential_relation() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, t) = run_kinds("coherent_battery", &["exponential_relation"]);
    let rs = of_kind(&o, "exponential_relation");
    v.records_pass(&rs);
    let CheckSpec::ExponentialRelation { pairs, trials, .. } = &s.checks[0] else {
        unreachable!()
    };
    v.require(pairs.len() == 6 && rs.len() == 12, "six pairs");
    v.require(*trials >= 100_000, "10⁵ trials");
    for (i, p) in pairs.iter().enumerate() {
        let (f, g) = (p.f.build().unwrap(), p.g.build().unwrap());
        let w = f.support().hull(&g.support()).window().unwrap();
        let mut cuts: Vec<f64> = vec![w.lo, w.hi];
        for h in [&f, &g] {
            let hw = h.support().window().unwrap();
            cuts.extend([hw.lo, hw.hi]);
            cuts.extend_from_slice(h.breaks());
        }
        cuts.retain(|c| (w.lo..=w.hi).contains(c));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let (mut re, mut im) = (0.0, 0.0);
        for c in cuts.windows(2) {
            // Open pieces: nudge the endpoints off the jumps.
            let (a, b) = (c[0] + 1e-13, c[1] - 1e-13);
            re += simpson(|x| (f.eval(x) * g.eval(x).conj()).re, a, b, 20_000);
            im += simpson(|x| (f.eval(x) * g.eval(x).conj()).im, a, b, 20_000);
        }
        let target = Complex64::new(re, im).exp();
        v.require(
            (rs[2 * i].target - target.re).abs() < 1e-6
                && (rs[2 * i + 1].target - target.im).abs() < 1e-6,
            format!("pair {i} target {target} disagrees with the quadrature oracle"),
        );
    }
    v.within(t, 10.0);
    v.detail = format!(
        "6 pairs, max |z| {:.2}, {:.1}s",
        max_abs_z(&rs),
        t.as_secs_f64()
    );
    v
}

fn normalization() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, t) = run_kinds("coherent_battery", &["normalization"]);
    let rs = of_kind(&o, "normalization");
    v.records_pass(&rs);
    v.require(
        rs.len() == 3 && rs.iter().all(|r| r.target == 1.0),
        "three ratios with target 1",
    );
    v.detail = format!(
        "3 ratios, max |z| {:.2}, {:.1}s",
        max_abs_z(&rs),
        t.as_secs_f64()
    );
    v
}

fn abs_identity() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, _) = run_kinds("coherent_battery", &["abs_identity"]);
    let rs = of_kind(&o, "abs_identity");
    v.records_pass(&rs);
    let CheckSpec::AbsIdentity {
        functions,
        paths,
        tol,
        ..
    } = &s.checks[0]
    else {
        unreachable!()
    };
    v.require(*paths >= 1000 && *tol <= 1e-9, "10³ paths at 1e-9");
    for fs in functions {
        let f = fs.build().unwrap();
        let w = f.support().window().unwrap();
        let below = (0..=1000).any(|i| f.eval_re(w.lo + w.length() * i as f64 / 1000.0) < -1.0);
        v.require(below, format!("{} never drops below -1", f.label()));
    }
    v.detail = format!(
        "{} functions, max residual {:.1e}",
        rs.len(),
        max_residual(&rs)
    );
    v
}

fn rn_identification() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, t) = run_kinds("rn_identification", &["rn_identification"]);
    let rs = of_kind(&o, "rn_identification");
    v.records_pass(&rs);
    let CheckSpec::RnIdentification {
        ratios,
        windows,
        trials,
        ..
    } = &s.checks[0]
    else {
        unreachable!()
    };
    v.require(
        ratios.len() == 3 && windows.len() == 4 && *trials >= 100_000,
        "4 windows × 3 ratios, 10⁵ trials",
    );
    let mut checked = 0;
    for r in ratios {
        let d = r.build().unwrap();
        for w in windows {
            let win = Window::new(w[0], w[1]).unwrap();
            // Lebesgue base: ν(A) = ∫_A φ dx, φ = 1 off its support.
            let nu = simpson(|x| d.phi(x), w[0], w[1], 400_000);
            for kind in ["reweighted_void", "direct_void"] {
                let label = format!("{kind} {win}, φ = {}", d.label());
                match rs.iter().find(|x| x.label == label) {
                    Some(rec) => {
                        checked += 1;
                        v.require(
                            (rec.target - (-nu).exp()).abs() < 1e-5,
                            format!("{label}: oracle e^-ν = {}", (-nu).exp()),
                        );
                    }
                    None => v.problems.push(format!("missing record {label}")),
                }
            }
        }
    }
    v.require(checked == 24, "24 void records");
    v.within(t, 20.0);
    v.detail = format!(
        "{} records, max |z| {:.2}, {:.1}s",
        rs.len(),
        max_abs_z(&rs),
        t.as_secs_f64()
    );
    v
}

fn cross_formula() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, t) = run_kinds("rn_identification", &["cross_formula"]);
    let rs = of_kind(&o, "cross_formula");
    v.records_pass(&rs);
    let CheckSpec::CrossFormula {
        paths, tol, ratios, ..
    } = &s.checks[0]
    else {
        unreachable!()
    };
    v.require(*paths >= 1000 && *tol <= 1e-8, "10³ paths at 1e-8");
    v.require(rs.len() == 4 * ratios.len(), "four comparisons per ratio");
    v.detail = format!(
        "{} ratios, max disagreement {:.1e}, {:.1}s",
        ratios.len(),
        max_residual(&rs),
        t.as_secs_f64()
    );
    v
}

fn infinitely_divisible() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, t) = run_kinds("infinitely_divisible", &["char_fn"]);
    let rs = of_kind(&o, "char_fn");
    v.records_pass(&rs);
    let CheckSpec::CharFn { ratio, points, .. } = &s.checks[0] else {
        unreachable!()
    };
    let grid: Vec<_> = rs.iter().filter(|r| r.label.starts_with("|φ̂")).collect();
    v.require(*points == 25 && grid.len() == 25, "25 grid points");
    let d = ratio.build().unwrap();
    let w = d.support();
    let expected = -simpson(|x| d.phi(x) - 1.0 - d.phi(x).ln(), w.lo, w.hi, 200_000);
    match rs.iter().find(|r| r.label == "E log dν*/dμ*") {
        Some(r) => v.require(
            (r.target - expected).abs() < 1e-9,
            format!("mean target vs oracle {expected}"),
        ),
        None => v.problems.push("missing mean record".into()),
    }
    v.detail = format!(
        "max |z| {:.2} over grid and mean, {:.1}s",
        max_abs_z(&rs),
        t.as_secs_f64()
    );
    v
}

fn stochastic_mean() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, t) = run_kinds("infinitely_divisible", &["stochastic_mean"]);
    let rs = of_kind(&o, "stochastic_mean");
    v.records_pass(&rs);
    let CheckSpec::StochasticMean { functions, .. } = &s.checks[0] else {
        unreachable!()
    };
    v.require(functions.len() == 3 && rs.len() == 3, "three functions");
    for (fs, r) in functions.iter().zip(&rs) {
        let f = fs.build().unwrap();
        let w = f.support().window().unwrap();
        let big = |x: f64| {
            let y = f.eval_re(x);
            if y.abs() > 1.0 {
                y
            } else {
                0.0
            }
        };
        let oracle = simpson(big, w.lo, w.hi, 2_000_000);
        v.require(
            (r.target - oracle).abs() < 1e-4,
            format!("{}: target {} oracle {oracle}", r.label, r.target),
        );
    }
    v.detail = format!("max |z| {:.2}, {:.1}s", max_abs_z(&rs), t.as_secs_f64());
    v
}

fn weyl() -> Verdict {
    let mut v = Verdict::new();
    let (s, o, _) = run_kinds("weyl", &["weyl"]);
    let rs = of_kind(&o, "weyl");
    v.records_pass(&rs);
    let CheckSpec::Weyl { paths, tol, .. } = &s.checks[0] else {
        unreachable!()
    };
    v.require(*paths >= 1000 && *tol <= 1e-9, "10³ paths at 1e-9");
    v.require(rs.iter().any(|r| r.label.contains("swap")), "a swap case");
    v.require(
        rs.iter().any(|r| r.label.contains("translation")),
        "a translation case",
    );
    v.detail = format!(
        "{} maps, max relative residual {:.1e}",
        rs.len(),
        max_residual(&rs)
    );
    v
}

fn chi() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, _) = run_kinds("chi_translation", &["chi", "chi_additivity"]);
    let rs: Vec<&Record> = o.report.records.iter().collect();
    v.records_pass(&rs);
    for t in [0.5, 1.0, 2.0] {
        let label = format!("χ(translation({}))", -t);
        match rs.iter().find(|r| r.label == label) {
            Some(r) => v.require(
                (r.estimate - t).abs() <= 1e-8,
                format!("{label} = {}", r.estimate),
            ),
            None => v.problems.push(format!("missing {label}")),
        }
    }
    v.require(
        rs.iter()
            .any(|r| r.label.starts_with("χ(swap") && r.estimate.abs() <= 1e-8),
        "χ(swap) = 0",
    );
    v.require(of_kind(&o, "chi_additivity").len() >= 3, "additivity cases");
    v.detail = format!(
        "{} records, max residual {:.1e}",
        rs.len(),
        max_residual(&rs)
    );
    v
}

fn entropy() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, _) = run_kinds("entropy", &["entropy"]);
    let rs = of_kind(&o, "entropy");
    v.records_pass(&rs);
    // Symmetric ±1 translations on the weighted line: ½[(2 ln 2 − 1) + (1 − ln 2)].
    let oracle = std::f64::consts::LN_2 / 2.0;
    v.require(
        (rs[0].estimate - oracle).abs() < 1e-8,
        format!("h = {} vs ln 2/2", rs[0].estimate),
    );
    let zero = rs
        .iter()
        .filter(|r| r.label.starts_with("h = 0") && r.estimate.abs() < 1e-8)
        .count();
    v.require(zero >= 1, "a measure preserving scenario");
    for t in ["0.5", "2", "5"] {
        v.require(
            rs.iter()
                .any(|r| r.label == format!("h(tμ) = t·h(μ), t = {t}")),
            format!("scaling t = {t}"),
        );
    }
    v.detail = format!(
        "{} records over 5 actions, h(±1 translations) = {:.10}",
        rs.len(),
        rs[0].estimate
    );
    v
}

fn dissipativity() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, _) = run_kinds("dissipativity", &["dissipativity"]);
    let rs = of_kind(&o, "dissipativity");
    v.records_pass(&rs);
    v.require(
        rs.iter().any(|r| r.label.starts_with("terms vs")),
        "reference comparison",
    );
    let profile = &o.tables[0].content;
    let c = (2f64.sqrt() - 1.0).powi(2);
    let mut worst: f64 = 0.0;
    for line in profile.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        worst = worst.max((cols[2] - (-0.5 * c * cols[0].abs()).exp()).abs());
    }
    v.require(worst <= 1e-8, format!("profile deviates by {worst:e}"));

    let (_, b, _) = run_kinds("bernoulli", &["bernoulli_dissipativity"]);
    let brs = of_kind(&b, "bernoulli_dissipativity");
    v.records_pass(&brs);
    let terms = &b.tables[0].content;
    let mut last = 0.0;
    let mut sum = 0.0;
    let mut count = 0;
    for line in terms.lines().skip(1) {
        let term: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        sum += term;
        v.require(sum >= last && term > 0.0, "monotone partial sums");
        last = sum;
        count += 1;
    }
    v.require(
        count == 129,
        format!("{count} Bernoulli terms, expected |n| ≤ 64"),
    );
    v.detail = format!(
        "translation profile within {worst:.1e}; Bernoulli partial sum {sum:.6} over |n| ≤ 64"
    );
    v
}

fn bernoulli_norms() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, t) = run_kinds("bernoulli", &["bernoulli_norms"]);
    let rs = of_kind(&o, "bernoulli_norms");
    v.records_pass(&rs);
    v.require(
        rs.len() == 36,
        format!("{} records, expected 6 levels × 6 shifts", rs.len()),
    );
    for r in &rs {
        // ‖Y_k - Y_k∘T^n‖²
        let body = r.label.trim_start_matches("‖Y_");
        let k: i32 = body.split(' ').next().unwrap().parse().unwrap();
        let n: f64 = r
            .label
            .rsplit("T^")
            .next()
            .unwrap()
            .trim_end_matches("‖²")
            .parse()
            .unwrap();
        let p = 4f64.powi(-k) / (k * k) as f64;
        let oracle = 2.0 * 2f64.powi(k).min(n.abs()) / (k * k) as f64 * (1.0 - p);
        v.require(
            (r.target - oracle).abs() < 1e-12,
            format!("{}: {} vs {oracle}", r.label, r.target),
        );
    }
    v.within(t, 60.0);
    v.detail = format!("max |z| {:.2}, {:.1}s", max_abs_z(&rs), t.as_secs_f64());
    v
}

fn odometer_construction() -> Verdict {
    let mut v = Verdict::new();
    let (_, o, t) = run_kinds("propt", &["propt", "propt_rejection"]);
    let rs: Vec<&Record> = o.report.records.iter().collect();
    v.records_pass(&rs);
    let blocks: Vec<_> = rs.iter().filter(|r| r.label.starts_with("P(B_")).collect();
    v.require(blocks.len() == 12, "P(B_n) for n ≤ 12");
    for (i, b) in blocks.iter().enumerate() {
        v.require(
            b.target == 2f64.powi(-(i as i32 + 1)),
            format!("{} target", b.label),
        );
    }
    let h = rs.iter().find(|r| r.label == "h_κ ≤ 1");
    v.require(h.is_some(), "entropy bound record");
    v.detail = format!(
        "{} records, max |z| on blocks {:.2}, h_κ ≈ {:.4}, {:.1}s",
        rs.len(),
        max_abs_z(&blocks.iter().map(|r| **r).collect::<Vec<_>>()),
        h.map(|r| r.estimate).unwrap_or(f64::NAN),
        t.as_secs_f64()
    );
    v
}

const BUNDLED: [&str; 10] = [
    "poisson_counts",
    "coherent_battery",
    "rn_identification",
    "infinitely_divisible",
    "weyl",
    "chi_translation",
    "entropy",
    "dissipativity",
    "bernoulli",
    "propt",
];

fn determinism() -> Verdict {
    let mut v = Verdict::new();
    let mut total = Duration::ZERO;
    let mut failed = 0;
    for name in BUNDLED {
        let s = load(name);
        let opts = RunOptions {
            seed: Some(42),
            trials_scale: 1.0,
        };
        let start = Instant::now();
        let a = scenario::run(&s, opts).unwrap();
        total += start.elapsed();
        let b = scenario::run(&s, opts).unwrap();
        failed += a.report.failed;
        let (ja, jb) = (a.report.to_json().unwrap(), b.report.to_json().unwrap());
        v.require(ja == jb, format!("{name}: JSON differs between runs"));
        v.require(
            a.report.to_csv() == b.report.to_csv(),
            format!("{name}: CSV differs between runs"),
        );
        v.require(
            a.tables == b.tables,
            format!("{name}: tables differ between runs"),
        );
    }
    v.require(
        failed == 0,
        format!("{failed} failing records with seed 42"),
    );
    v.within(total, 300.0);
    v.detail = format!(
        "{} scenarios byte-identical; full suite {:.1}s",
        BUNDLED.len(),
        total.as_secs_f64()
    );
    v
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 15] = [
        ("Poisson sampling", poisson_sampling),
        ("exponential relation", exponential_relation),
        ("normalization", normalization),
        ("absolute-value identity", abs_identity),
        ("RN identification", rn_identification),
        ("cross-formula RN agreement", cross_formula),
        ("infinitely divisible law", infinitely_divisible),
        ("stochastic-integral mean", stochastic_mean),
        ("Weyl identity", weyl),
        ("χ homomorphism", chi),
        ("entropy", entropy),
        ("dissipativity and zero type", dissipativity),
        ("Bernoulli norms", bernoulli_norms),
        ("odometer construction", odometer_construction),
        ("determinism and runtime", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        let ok = v.problems.is_empty();
        println!(
            "{} criterion {:>2} {name}: {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
        for p in &v.problems {
            println!("     - {p}");
        }
        failures += usize::from(!ok);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
