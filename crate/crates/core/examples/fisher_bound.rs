//! Position error bound at the unconstrained optimum combiner `ṽ_opt`.
//!
//! `ṽ_opt` maximizes the trace of the information matrix, not its rank.
//! With isotropic elements every channel derivative is the channel times a
//! real geometric factor times the same complex `(−1/r_n + jk)`, so the
//! 3 × 3 Gram matrix is real, `ṽ_opt` projects all derivatives onto one
//! real direction and the (r, φ) information has rank one: the bound is
//! infinite. A directive element pattern breaks that symmetry.

use dmaloc::circuit::AnalogBeamformer;
use dmaloc::fisher::peb_or_infinity;
use dmaloc::optimizer::rayleigh_opt;
use dmaloc::prelude::*;
use nalgebra::DMatrix;

fn main() -> dmaloc::Result<()> {
    let panel = PanelConfig::new(2, 64, 28e9);
    let n = panel.n_elements();
    let eye = AnalogBeamformer {
        matrix: DMatrix::identity(n, n),
        order: 0,
    };
    let pilots = PilotConfig::from_dbm(200, -12.0)?;
    let noise = NoiseModel::thermal(150e3)?;

    println!("{:>6} {:>6} {:>12} {:>12} {:>12} {:>12}", "r", "phi", "tr iso", "peb iso", "tr cos^2", "peb cos^2");
    for (r, phi) in [(2.0, 45.0), (5.0, 90.0), (5.0, 120.0), (10.0, 70.0), (20.0, 150.0)] {
        let ue = UePosition::from_degrees(r, 30.0, phi)?;
        print!("{r:>6.1} {phi:>6.0}");
        for profile in [RadiationProfile::Isotropic, RadiationProfile::CosinePower { exponent: 2.0 }] {
            let jac = channel_jacobian(&ue, &panel, &profile);
            let (vt, _) = rayleigh_opt(&design_matrix(&jac))?;
            let info = fim(&jac, &eye, &vt, &pilots, &noise)?;
            let bound = peb_or_infinity(info.peb_known(&[Param::Range, Param::Azimuth]))?;
            print!(" {:>12.4e} {:>12.4e}", info.trace(), bound);
        }
        println!();
    }
    Ok(())
}
