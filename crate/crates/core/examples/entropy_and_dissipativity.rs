//! κ-entropy of a translation action and the dissipativity series
//! `Σ_g e^{-½‖c_T(g)‖²}`.

use poisson_lab::dynamics::{self, KappaMeasure};
use poisson_lab::nsmap::ActionZ;
use poisson_lab::BaseMeasure;

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::weighted_line();
    let a = ActionZ::translations(1.0, &m)?;
    let k = KappaMeasure::symmetric_pm1();
    let h = dynamics::entropy(&a, &k, &m, None)?;
    println!("h_κ = {h:.10} (ln 2 / 2 = {:.10})", 2f64.ln() / 2.0);
    for t in [0.5, 2.0] {
        let mt = m.scale(t)?;
        let ht = dynamics::entropy(&ActionZ::translations(1.0, &mt)?, &k, &mt, None)?;
        println!("h_κ({t}μ) = {ht:.10}");
    }

    let s = dynamics::dissipativity_score(&a, -400..=400, &m, None)?;
    println!(
        "Σ e^(-½‖c‖²) over |g| ≤ 400 = {:.6}, summable: {}",
        s.series.partial_sums.last().copied().unwrap_or(0.0),
        s.series.summable
    );
    let mut out = std::io::stdout();
    dynamics::write_profile_csv(&mut out, &s.rows[..6])?;

    let lebesgue = BaseMeasure::lebesgue();
    let b = ActionZ::translations(1.0, &lebesgue)?;
    let s = dynamics::dissipativity_score(&b, -64..=64, &lebesgue, None)?;
    println!("on Lebesgue measure: summable {}", s.series.summable);
    Ok(())
}
