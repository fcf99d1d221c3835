//! Second-order equation in three dimensions,
//! `Delta u + mu d1 d2 u = h`, with a random checkerboard `mu`. First a
//! constant coefficient against its Fourier solution, then the ladder.

use beltrami_lab::experiments::{
    centred_checkerboard, constant_coefficient_check, default_battery, run_pde3d, Pde3dSpec,
};
use beltrami_lab::fields::Envelope;
use beltrami_lab::ops::MultiplierOp;
use beltrami_lab::Grid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::new(3, 64, 2.0)?;
    let op = MultiplierOp::laplace_ratio("laplace_ratio(1,2)", [[0.0, 1.0, 0.0], [0.0; 3], [0.0; 3]]);
    let source = Envelope::gaussian(&[0.0, 0.0, 0.0], 0.2, 1.0);
    let gap = constant_coefficient_check(0.9, &op, &source.sample(&grid), 1e-12)?;
    println!("constant coefficient 0.9: relative gap {gap:.2e}");

    let spec = Pde3dSpec {
        grid,
        ladder: vec![2, 3, 4],
        seeds: (0..2).collect(),
        layers: vec![(centred_checkerboard(0.98, 3), op)],
        source,
        tol: 1e-10,
        test_functions: default_battery(3),
    };
    let run = run_pde3d(&spec)?;
    for l in &run.summary.levels {
        println!(
            "j = {}  max residual {:.1e}  median iterations {}  k = {:.3}  |u_next - u_j| = {}",
            l.j,
            l.max_residual,
            l.median_iterations,
            l.ellipticity,
            l.step_to_next.map_or("-".into(), |s| format!("{:.4e}", s.mean)),
        );
    }
    Ok(())
}
