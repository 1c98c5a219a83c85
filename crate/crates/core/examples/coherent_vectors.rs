//! Coherent vectors `Exp f` on sampled paths and the exponential relation
//! `E[Exp f · conj Exp g] = e^{⟨f,g⟩}`.

use poisson_lab::coherent::{self, Coherent, TestFunction};
use poisson_lab::mc::trial_rng;
use poisson_lab::process::sample_config;
use poisson_lab::{BaseMeasure, Window};

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::lebesgue();
    let w = Window::new(0.0, 2.0)?;
    let f = TestFunction::real(|x| 0.5 * x - 0.2, w, &[], "x/2 - 0.2");
    let g = TestFunction::complex(|x| 0.4 * x.cos(), |x| 0.4 * x.sin(), w, &[], "0.4 e^(ix)");

    let exp_f = Coherent::new(&f, &m)?;
    let omega = sample_config(&m, w, &mut trial_rng(1, 0))?;
    println!("ω = {:?}", omega.points());
    println!("Exp f(ω) = {}", exp_f.eval(&omega)?);

    let r = coherent::inner_product_mc(&f, &g, 100_000, 3, &m)?;
    println!(
        "<Exp f, Exp g>: estimate {:.4} target {:.4} max |z| {:.2}",
        r.estimate, r.target, r.max_abs_z
    );
    Ok(())
}
