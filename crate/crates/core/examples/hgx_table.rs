//! Effective coefficient of `a B_delta` for a random bump field `B`, as a
//! function of the constant amplitude `a`. With Rademacher signs `h` is even
//! in `a`; the cell indicator gives zero, the half-cell dipole does not.

use beltrami_lab::experiments::{estimate_hgx, HgxSpec};
use beltrami_lab::fields::{BumpProfile, Distribution};
use beltrami_lab::{Grid, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for profile in [BumpProfile::UnitSquareIndicator, BumpProfile::HalfCellDipole] {
        let spec = HgxSpec {
            grid: Grid::new(2, 256, 2.0)?,
            profile: profile.clone(),
            dist: Distribution::Rademacher,
            a_values: [0.2, 0.4, 0.6, -0.4].map(|a| C64::new(a, 0.0)).to_vec(),
            j: 3,
            seeds: (0..32).collect(),
            tol: 1e-10,
        };
        let run = estimate_hgx(&spec)?;
        println!("{profile:?}");
        for e in &run.summary {
            println!(
                "  a = {:>5}  h(a) = {:.5} +- {:.1e}{}",
                e.a.re,
                e.estimate.mean(),
                e.estimate.re.stderr.max(e.estimate.im.stderr),
                if e.nonzero { "  (nonzero)" } else { "" }
            );
        }
    }
    Ok(())
}
