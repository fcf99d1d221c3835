//! Iterated Beurling chains `mu T mu ... T mu` over a masked random
//! checkerboard: pairings concentrate, their variance falls by a power of
//! `2^-j`, and the L2 norm stays bounded.
//!
//! Pass the seed count as the first argument (default 16).

use beltrami_lab::experiments::{default_battery, run_iterated, IteratedSpec};
use beltrami_lab::fields::ModelKind;
use beltrami_lab::ops::MultiplierOp;
use beltrami_lab::{Grid, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(16);
    let model = ModelKind::Model2Checkerboard { a: C64::new(0.5, 0.0), masked: true, mask: None, dist: Default::default() };
    for m in [2, 3] {
        let spec = IteratedSpec {
            grid: Grid::new(2, 512, 4.0)?,
            ladder: vec![3, 4, 5, 6],
            seeds: (0..seeds).collect(),
            models: vec![model.clone()],
            operators: vec![MultiplierOp::beurling(); m - 1],
            test_functions: default_battery(2),
        };
        let run = run_iterated(&spec)?;
        println!("chain length {m}");
        for l in &run.summary.levels {
            println!("  j = {}  Var<h, phi_0> = {:.3e}  mean |h|_2 = {:.4}", l.j, l.pairings[0].variance, l.norm.mean);
        }
        println!("  smallest variance slope {:.2}, norm ratio {:.3}", run.summary.min_variance_slope(), run.summary.norm_ratio);
    }
    Ok(())
}
