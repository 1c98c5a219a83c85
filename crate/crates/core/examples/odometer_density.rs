//! A density `F² = 1 + Σ 2ⁿ 1_{Bₙ}` over a diagonal odometer: blocks have
//! probability `2^{-n}`, `F² - F²∘T_g` is integrable and the κ-entropy stays
//! bounded.

use poisson_lab::constructions::{propt, DigitFamily, PropTConstruction};
use poisson_lab::dynamics::KappaMeasure;

fn main() -> poisson_lab::Result<()> {
    let c = PropTConstruction::build(DigitFamily::HighDigit, 10)?;
    println!("{:?}", c.base());
    let rep = propt::propt_integrability_report(
        &c,
        &[1, 2, 5],
        &KappaMeasure::symmetric_pm1(),
        &[0.5, 2.0],
        20_000,
        3,
    )?;
    for b in rep.blocks.iter().take(4) {
        println!("P(B_{}) = {:.4} (target {:.4})", b.n, b.estimate, b.target);
    }
    for r in &rep.records {
        println!(
            "g = {}: ‖F² - F²∘T_g‖₁ ≈ {:.3}, majorant {:.3}",
            r.g, r.l1, r.l1_exact_majorant
        );
    }
    println!("h_κ ≈ {:.4} ± {:.4}", rep.entropy, rep.entropy_se);

    match PropTConstruction::build(DigitFamily::Coordinate, 6) {
        Err(e) => println!("coordinate digits: {e}"),
        Ok(_) => println!("coordinate digits unexpectedly accepted"),
    }
    Ok(())
}
