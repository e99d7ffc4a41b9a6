//! Design a combiner for one user and read off its position error bound.
//!
//! The design runs on the second-order circuit model; the bound is then
//! evaluated on the exact circuit response the hardware would produce.

use dmaloc::prelude::*;
use dmaloc::sim::Receiver;

fn main() -> dmaloc::Result<()> {
    let panel = PanelConfig::new(4, 32, 28e9);
    let ue = UePosition::from_degrees(5.0, 30.0, 60.0)?;
    let profile = RadiationProfile::Isotropic;

    let rx = Receiver::design(Architecture::DmaOrder2, &panel, &ue, &profile, &SolverOptions::default())?;
    let sol = &rx.solution;
    println!("panel          {} strips x {} elements at {:.0} GHz", panel.n_rf, panel.n_e, panel.freq / 1e9);
    println!("iterations     {}", sol.iterations);
    println!("residual       {:.4e}", sol.residual);
    println!("captured       {:.1}% of the leading eigenvalue", 100.0 * sol.objective / sol.sigma1);

    let pilots = PilotConfig::from_dbm(200, -12.0)?;
    let noise = NoiseModel::thermal(150e3)?;
    let bound = rx.bound(&ue, &pilots, &noise, &[Param::Range, Param::Azimuth])?;
    println!("PEB (r, phi)   {:.4e}", bound.peb);
    Ok(())
}
