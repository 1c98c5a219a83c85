//! Sample Poisson configurations and compare void probabilities with
//! `e^{-μ(A)}`.

use poisson_lab::mc::trial_rng;
use poisson_lab::process::{self, ConfigSampler};
use poisson_lab::{BaseMeasure, Window};

fn main() -> poisson_lab::Result<()> {
    let m = BaseMeasure::weighted_line();
    let w = Window::new(-1.0, 1.0)?;
    let sampler = ConfigSampler::new(&m, w)?;
    println!("μ({w}) = {}", sampler.mass());

    let mut rng = trial_rng(42, 0);
    for _ in 0..3 {
        let omega = sampler.sample(&mut rng)?;
        println!("{} points: {:?}", omega.len(), omega.points());
    }

    let windows = [Window::new(-1.0, 0.0)?, Window::new(0.0, 0.5)?];
    for r in process::renyi_void_check(&m, &windows, 50_000, 7)? {
        println!(
            "void {}: empirical {:.4} target {:.4} z {:+.2}",
            r.window, r.empirical, r.target, r.z
        );
    }
    Ok(())
}
