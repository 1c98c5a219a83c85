//! The law of `log dν*/dμ*` is infinitely divisible: compare its empirical
//! characteristic function with the Lévy–Khintchine form.

use poisson_lab::infdiv::{self, LevyData};
use poisson_lab::suspension::{self, default_eps, DensityRatio, LogRn, LIMIT_TOL};
use poisson_lab::{BaseMeasure, Window};

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::lebesgue();
    let d = DensityRatio::step(2.0, Window::new(0.0, 1.0)?)?;
    let levy = LevyData::log_rn(&m, &d)?;
    let lr = LogRn::new(&d, &m, &default_eps(), LIMIT_TOL)?;
    let samples = suspension::log_rn_samples(&lr, &m, 20_000, 11)?;

    for r in infdiv::char_fn_grid(&levy, &samples, &infdiv::a_grid(-2.0, 2.0, 5))? {
        println!(
            "a = {:+.1}: analytic {:.4} empirical {:.4} z {:.2}",
            r.a, r.analytic, r.empirical, r.z
        );
    }
    let mean = infdiv::id_mean_check(&levy, &samples)?;
    println!(
        "mean {:.4} ± {:.4}, expected {:.4}",
        mean.estimate, mean.se, mean.analytic
    );
    for k in [2, 3, 5] {
        let gap = infdiv::divisibility_probe(&levy, k, &infdiv::default_grid())?;
        println!("k = {k}: |φ_{{μ/k}}^k - φ_μ| = {gap:.1e}");
    }
    Ok(())
}
