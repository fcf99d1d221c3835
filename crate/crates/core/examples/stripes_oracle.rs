//! Laminated checkerboard: `mu = +-a` on alternating vertical strips. The
//! homogenized coefficient is exactly `a^2`, and the map has a closed form to
//! compare against.

use beltrami_lab::experiments::stripes_oracle;
use beltrami_lab::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let j = 3;
    println!("{:>5} {:>6} {:>12} {:>12} {:>11}", "a", "N", "A_eff", "|A - a^2|", "map error");
    for a in [0.25, 0.5, 0.75] {
        for n in [512, 1024] {
            let r = stripes_oracle(a, &Grid::new(2, n, 4.0)?, j, 1e-10, 1.0)?;
            println!("{a:>5} {n:>6} {:>12.9} {:>12.2e} {:>11.3e}", r.a_eff.re, r.a_eff_error, r.map_error);
        }
    }
    Ok(())
}
