//! Deviations in the three multiscale identities (weak limit, operator image,
//! products) shrink geometrically in `j`.

use beltrami_lab::experiments::{
    check_product_equiv_ladder, check_t_image_ladder, check_weak_limit, CalculusCheck, TestFunction,
};
use beltrami_lab::fields::{BumpProfile, Envelope};
use beltrami_lab::ops::MultiplierOp;
use beltrami_lab::Grid;

fn show(check: &CalculusCheck) {
    println!("{}", check.name);
    for r in &check.rows {
        println!("  j = {}  deviation = {:.3e}", r.j, r.deviation);
    }
    if let Some(fit) = check.fit {
        println!("  slope {:.3} per unit j, R^2 = {:.5}", fit.slope, fit.r2);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = Grid::new(2, 1024, 2.0)?;
    let ladder = [3, 4, 5, 6];
    let f = Envelope::gaussian(&[0.1, -0.05], 0.25, 0.8);
    let f2 = Envelope::gaussian(&[-0.1, 0.05], 0.3, 0.5);
    let phi = TestFunction::new(&[0.1, 0.0], 0.3);
    let smooth = BumpProfile::SmoothSquareBump { scale: 1.0 };
    show(&check_weak_limit(&f, &BumpProfile::UnitSquareIndicator, &phi, &ladder, &grid)?);
    show(&check_t_image_ladder(&f, &smooth, &MultiplierOp::beurling(), &phi, &ladder, &grid)?);
    show(&check_product_equiv_ladder(&f, &smooth, &f2, &smooth, &phi, &ladder, &grid)?);
    Ok(())
}
