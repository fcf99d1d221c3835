//! Two bumps at distance `2A` interacting through the Beurling transform:
//! `<phi_A, T phi_A>` decays like `-2 (int phi)^2 / (pi (2A)^2)`.

use beltrami_lab::experiments::{two_bump_functional, two_bump_grid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>4} {:>6} {:>14} {:>14} {:>9}", "A", "N", "<phi, T phi>", "asymptote", "ratio");
    for a in [4.0, 8.0, 16.0, 32.0] {
        let r = two_bump_functional(a, &two_bump_grid(a)?)?;
        println!("{a:>4} {:>6} {:>14.6e} {:>14.6e} {:>9.6}", r.n, r.value.re, r.asymptote, r.ratio);
    }
    Ok(())
}
