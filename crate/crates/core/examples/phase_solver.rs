//! Per-element phase updates under the Lorentzian constraint, checked
//! against a dense grid of the exact objectives.

use std::f64::consts::FRAC_PI_2;

use dmaloc::optimizer::phase::{
    order1_objective, order2_objective, order2_update, phase_grid, phase_step_order1, DENSE_GRID,
};
use num_complex::Complex64;

fn main() {
    let cases = [
        (Complex64::new(0.8, -0.3), Complex64::new(1.1, 0.4), Complex64::new(0.05, 0.02), Complex64::new(0.1, -0.2)),
        (Complex64::new(-0.2, 0.9), Complex64::new(0.3, -1.2), Complex64::new(0.3, -0.1), Complex64::new(-0.4, 0.0)),
        (Complex64::new(1.0, 0.0), Complex64::new(0.4, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
    ];
    println!("{:>10} {:>12} {:>12} {:>10} {:>12} {:>12}", "phi1", "f1", "grid f1", "phi2", "f2", "grid f2");
    for (vt, a, m, b) in cases {
        let p1 = phase_step_order1(vt, a);
        let p2 = order2_update(vt, a, m, b, 1.0, -FRAC_PI_2, false);
        let g1 = phase_grid(-FRAC_PI_2, FRAC_PI_2, DENSE_GRID)
            .map(|p| order1_objective(vt, a, p))
            .fold(f64::INFINITY, f64::min);
        let g2 = phase_grid(-FRAC_PI_2, FRAC_PI_2, DENSE_GRID)
            .map(|p| order2_objective(vt, a, m, b, p))
            .fold(f64::INFINITY, f64::min);
        println!(
            "{p1:>10.5} {:>12.6e} {g1:>12.6e} {p2:>10.5} {:>12.6e} {g2:>12.6e}",
            order1_objective(vt, a, p1),
            order2_objective(vt, a, m, b, p2)
        );
    }
}
