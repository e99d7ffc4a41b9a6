//! A few noisy pilot blocks through the grid-refined ML estimator.
//!
//! With one combined output per snapshot the likelihood has many near-equal
//! minima; printing the residual at the truth next to the one at the
//! estimate shows when the search has settled on an alias.

use dmaloc::prelude::*;
use dmaloc::sim::{ml_estimate_with, ml_residual, synthesize, GridTable, Receiver, SearchGrid};

fn main() -> dmaloc::Result<()> {
    let panel = PanelConfig::new(2, 64, 28e9);
    let ue = UePosition::from_degrees(5.0, 30.0, 90.0)?;
    let rx = Receiver::design(Architecture::DmaOrder2, &panel, &ue, &RadiationProfile::Isotropic, &SolverOptions::default())?;
    let grid = SearchGrid::known_elevation(ue.theta);
    let table = GridTable::new(&rx.model, &grid)?;
    let noise = NoiseModel::thermal(150e3)?;

    for p_dbm in [-40.0, -20.0, 0.0] {
        let pilots = PilotConfig::from_dbm(200, p_dbm)?;
        for trial in 0..3 {
            let block = synthesize(&rx.model, &ue, &pilots, &noise, 7, trial);
            let est = ml_estimate_with(&rx.model, &block, &grid, &table)?;
            println!(
                "{p_dbm:>6.1} dBm  trial {trial}: r={:.4} phi={:.3} deg  residual est={:.3e} truth={:.3e}",
                est.r,
                est.phi.to_degrees(),
                ml_residual(&block, rx.model.gain_at(&est)),
                ml_residual(&block, rx.model.gain_at(&ue))
            );
        }
    }
    Ok(())
}
