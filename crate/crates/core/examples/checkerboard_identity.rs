//! Symmetric random checkerboard: the effective coefficient is zero, so the
//! normalized solutions approach the identity as the cells shrink.
//!
//! `cargo run --release --example checkerboard_identity -- 16` sets the seed count.

use beltrami_lab::experiments::{default_battery, run_beltrami, BeltramiSpec};
use beltrami_lab::fields::ModelKind;
use beltrami_lab::{Grid, C64};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let spec = BeltramiSpec {
        grid: Grid::new(2, 512, 2.0)?,
        ladder: vec![3, 4, 5, 6],
        seeds: (0..seeds).collect(),
        model: ModelKind::Model2Checkerboard {
            a: C64::new(0.5, 0.0),
            masked: false,
            mask: None,
            dist: Default::default(),
        },
        tol: 1e-10,
        max_iter: None,
        window: 1.0,
        test_functions: default_battery(2),
    };
    let run = run_beltrami(&spec)?;
    println!("{:>2} {:>22} {:>9} {:>16}", "j", "mean A_eff", "stderr", "median |F - z|");
    for l in &run.summary.levels {
        println!(
            "{:>2} {:>22.3e} {:>9.1e} {:>16.4}",
            l.j,
            l.a_eff.mean(),
            l.a_eff.re.stderr.max(l.a_eff.im.stderr),
            l.median_identity_distance
        );
    }
    Ok(())
}
