//! `dν*/dμ*` for a density ratio `φ = dν/dμ`: the extended coherent vector,
//! the ε-limit of log-sums, and the product formula agree on every path.

use poisson_lab::suspension::{self, default_eps, DensityRatio, LogRn, LIMIT_TOL};
use poisson_lab::{BaseMeasure, Window};

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::lebesgue();
    let d = DensityRatio::sine(0.8, Window::new(0.0, 2.0)?)?;
    println!("φ = {}", d.label());
    println!("Hellinger ‖√φ - 1‖² = {:.6}", d.hellinger(&m)?);
    println!("E log dν*/dμ* = {:.6}", d.expected_log_rn(&m)?);

    let lr = LogRn::new(&d, &m, &default_eps(), LIMIT_TOL)?;
    println!("β = {:.6}", lr.beta());

    let e = suspension::normalization_mc(&d, &m, 50_000, 5)?;
    println!("E Exp(φ-1) = {:.4} ± {:.4}", e.mean, e.se);

    let cf = suspension::cross_formula_check(&d, &m, 500, 9, &default_eps())?;
    println!(
        "largest disagreement between the three forms: {:.2e}",
        cf.max()
    );
    Ok(())
}
