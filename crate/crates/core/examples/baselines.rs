//! All four receiver architectures at one user position: how much of the
//! optimum each captures and the bound it delivers.
//!
//! An optional argument sets a cosine radiation exponent; with isotropic
//! elements the half-wavelength phase-shifter baseline sees a purely real
//! effective response and its bound is infinite.

use dmaloc::prelude::*;
use dmaloc::fisher::peb_or_infinity;
use dmaloc::sim::Receiver;

fn main() -> dmaloc::Result<()> {
    let profile = match std::env::args().nth(1).and_then(|s| s.parse::<f64>().ok()) {
        Some(q) => RadiationProfile::CosinePower { exponent: q },
        None => RadiationProfile::Isotropic,
    };
    let template = PanelConfig::new(4, 32, 28e9);
    let ue = UePosition::from_degrees(5.0, 30.0, 70.0)?;
    let pilots = PilotConfig::from_dbm(200, -12.0)?;
    let noise = NoiseModel::thermal(150e3)?;

    println!("{:>14} {:>9} {:>11} {:>9} {:>12}", "variant", "elements", "residual", "captured", "peb");
    for arch in Architecture::ALL {
        let rx = Receiver::design(arch, &template, &ue, &profile, &SolverOptions::default())?;
        let s = &rx.solution;
        let peb = peb_or_infinity(rx.bound(&ue, &pilots, &noise, &[Param::Range, Param::Azimuth]))?;
        println!(
            "{:>14} {:>9} {:>11.3e} {:>8.1}% {:>12.4e}",
            arch.name(),
            rx.panel.n_elements(),
            s.residual,
            100.0 * s.objective / s.sigma1,
            peb
        );
    }
    Ok(())
}
