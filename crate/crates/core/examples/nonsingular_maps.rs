//! Translations and swaps as nonsingular maps: the χ homomorphism, the cocycle
//! norm and the Weyl identity for the suspended Koopman operator.

use poisson_lab::coherent::{TestFunction, WeylIdentity};
use poisson_lab::mc::trial_rng;
use poisson_lab::nsmap::{self, ActionZ, NsMap};
use poisson_lab::process::sample_config;
use poisson_lab::{BaseMeasure, Window};

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::weighted_line();
    for t in [-0.5, -1.0, -2.0] {
        let tr = NsMap::translation(t, &m)?;
        println!("χ({}) = {:.10}", tr.label(), nsmap::chi_exact(&tr, &m)?);
    }
    let swap = NsMap::swap(Window::new(-1.0, 0.0)?, Window::new(1.0, 3.0)?, &m)?;
    println!("χ({}) = {:.1e}", swap.label(), nsmap::chi_exact(&swap, &m)?);

    let a = ActionZ::translations(1.0, &m)?;
    for g in [1, 2, 5] {
        println!("‖c_T({g})‖ = {:.6}", nsmap::cocycle_norm(&a, g, &m)?);
    }

    let f = TestFunction::real(
        |x| 0.5 * (2.0 * x).cos(),
        Window::new(-1.0, 1.0)?,
        &[],
        "cos",
    );
    let id = WeylIdentity::new(&NsMap::translation(0.7, &m)?, &f, &m)?;
    let omega = sample_config(&m, id.window(), &mut trial_rng(2, 0))?;
    let r = id.check(&omega)?;
    println!("U Exp f = {:.12}, W Exp f = {:.12}", r.lhs, r.rhs);
    Ok(())
}
