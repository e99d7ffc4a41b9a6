//! Analytic near-field channel derivatives against central differences.

use dmaloc::prelude::*;

fn main() -> dmaloc::Result<()> {
    let panel = PanelConfig::new(4, 32, 28e9);
    let profile = RadiationProfile::CosinePower { exponent: 2.0 };
    println!("{:>6} {:>6} {:>6} {:>12} {:>12} {:>12} {:>10}", "r", "theta", "phi", "|dh/dr|", "|dh/dth|", "|dh/dphi|", "rel err");
    for (r, theta, phi) in [(1.5, 30.0, 90.0), (5.0, 30.0, 45.0), (12.0, 50.0, 120.0), (29.0, 20.0, 10.0)] {
        let ue = UePosition::from_degrees(r, theta, phi)?;
        let jac = channel_jacobian(&ue, &panel, &profile);
        let fd = fd_jacobian(&ue, &panel, &profile, 1e-6)?;
        let err = (&jac.0 - &fd.0).norm() / jac.0.norm();
        println!(
            "{r:>6.1} {theta:>6.1} {phi:>6.1} {:>12.4e} {:>12.4e} {:>12.4e} {err:>10.2e}",
            jac.row(0).norm(),
            jac.row(1).norm(),
            jac.row(2).norm()
        );
    }
    Ok(())
}
