//! Rare-symbol Bernoulli shift: norms `‖Y_k - Y_k∘Tⁿ‖²` and summability of the
//! resulting dissipativity series.

use poisson_lab::constructions::bernoulli;

fn main() -> poisson_lab::Result<()> {
    for r in bernoulli::bernoulli_norm_check(4, &[1, 8], 20_000, 5)? {
        println!(
            "k = {}, n = {}: {:.4} (closed form {:.4}, z {:+.2})",
            r.k, r.n, r.estimate, r.target, r.z
        );
    }
    for n in [1, 16, 256, 4096] {
        println!("‖F - F∘T^{n}‖² = {:.4}", bernoulli::total_norm(n));
    }
    let d = bernoulli::bernoulli_dissipativity(64, 4096);
    println!(
        "partial sum over |n| ≤ 4096: {:.6}, summable {}",
        d.extended.partial_sums.last().copied().unwrap_or(0.0),
        d.extended.summable
    );
    println!("Borel–Cantelli sum {:.6}", bernoulli::borel_cantelli_sum());
    Ok(())
}
