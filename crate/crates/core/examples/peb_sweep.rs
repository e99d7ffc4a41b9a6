//! Position error bound versus the number of RF chains for every receiver
//! architecture, at a fixed user position and pilot power.

use dmaloc::fisher::{NoiseModel, Param, PilotConfig};
use dmaloc::geometry::PanelConfig;
use dmaloc::optimizer::{Architecture, SolverOptions};
use dmaloc::prelude::*;
use dmaloc::sim::run_peb_sweep;

fn main() -> dmaloc::Result<()> {
    let n_e = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let profile = match std::env::args().nth(2).and_then(|s| s.parse::<f64>().ok()) {
        Some(q) => RadiationProfile::CosinePower { exponent: q },
        None => RadiationProfile::Isotropic,
    };
    let template = PanelConfig::new(2, n_e, 28e9);
    let ue = UePosition::from_degrees(5.0, 30.0, 90.0)?;
    let pilots = PilotConfig::from_dbm(200, -12.0)?;
    let noise = NoiseModel::thermal(150e3)?;

    let start = std::time::Instant::now();
    let rows = run_peb_sweep(
        &template,
        &[2, 4, 8],
        &Architecture::ALL,
        &ue,
        &profile,
        &pilots,
        &noise,
        &[Param::Range, Param::Azimuth],
        &SolverOptions::default(),
    )?;
    println!("{:>14} {:>5} {:>12} {:>12} {:>5}", "variant", "n_rf", "peb", "residual", "iters");
    for r in &rows {
        println!(
            "{:>14} {:>5} {:>12.4e} {:>12.4e} {:>5}",
            r.variant.name(),
            r.n_rf,
            r.peb,
            r.residual,
            r.iterations
        );
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
