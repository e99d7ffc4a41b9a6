//! Monte Carlo RMSE of grid-refined maximum-likelihood positioning against
//! the position error bound, over a sweep of pilot powers.

use dmaloc::fisher::NoiseModel;
use dmaloc::optimizer::{Architecture, SolverOptions};
use dmaloc::prelude::*;
use dmaloc::sim::{run_rmse, SearchGrid};

fn main() -> dmaloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let arch: Architecture = args.next().unwrap_or_else(|| "dma-order2".into()).parse()?;
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);

    let template = PanelConfig::new(2, 64, 28e9);
    let ue = UePosition::from_degrees(5.0, 30.0, 90.0)?;
    let noise = NoiseModel::thermal(150e3)?;
    let grid = SearchGrid::known_elevation(ue.theta);
    let powers = [-40.0, -30.0, -20.0, -10.0, 0.0];

    let start = std::time::Instant::now();
    let rows = run_rmse(
        arch,
        &template,
        &ue,
        &RadiationProfile::Isotropic,
        200,
        &powers,
        &noise,
        &grid,
        trials,
        2024,
        &SolverOptions::default(),
    )?;
    println!("{:>8} {:>11} {:>11} {:>11} {:>11} {:>11} {:>7}", "P[dBm]", "rmse_r", "rmse_phi", "rmse_param", "rmse_xyz", "peb", "ratio");
    for s in &rows {
        println!(
            "{:>8.1} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>7.2}",
            s.p_max_dbm, s.rmse_r, s.rmse_phi, s.rmse_param, s.rmse_cartesian, s.peb,
            s.rmse_param / s.peb
        );
    }
    println!("{} trials per point, elapsed {:.1?}", trials, start.elapsed());
    Ok(())
}
