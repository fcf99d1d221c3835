//! A constant coefficient needs a single Neumann step: the solution is the
//! affine map `z + c zbar`, normalized to fix 0 and 1.

use beltrami_lab::beltrami::{normalize_3pt, reconstruct_map, solve_fixed_point, DEFAULT_TOL};
use beltrami_lab::ops::MultiplierOp;
use beltrami_lab::{Field, Grid, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::new(2, 256, 4.0)?;
    for c in [C64::new(0.3, 0.0), C64::new(0.0, 0.5), C64::new(-0.25, 0.25)] {
        let mu = Field::constant(grid, c);
        let report = solve_fixed_point(&mu, &MultiplierOp::beurling(), DEFAULT_TOL, None)?;
        let map = normalize_3pt(reconstruct_map(&report)?)?;
        let err = map.sup_distance(|z| (z + c * z.conj()) / (1.0 + c), 1.0);
        println!(
            "c = {c:<12}  A_eff = {:.12}  |A_eff - c| = {:.1e}  map error = {err:.1e}  iterations = {}",
            report.a_eff,
            (report.a_eff - c).norm(),
            report.iterations
        );
    }
    Ok(())
}
