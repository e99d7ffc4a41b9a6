//! How well truncated Neumann series approximate the coupled inverse
//! `(W_TA + W_MC)^{-1}` as the carrier frequency grows.
//!
//! The series only converges while the spectral radius of `W_MC W_TA^{-1}`
//! stays below one; past that point higher orders make things worse.

use dmaloc::circuit::coupling_spectral_radius;
use dmaloc::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> dmaloc::Result<()> {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for ghz in [28.0, 60.0, 100.0] {
        let panel = PanelConfig::new(4, 32, ghz * 1e9);
        let circuit = Circuit::build(&panel)?;
        let phases = (0..panel.n_elements())
            .map(|_| rng.random_range(-1.5..std::f64::consts::FRAC_PI_2))
            .collect();
        let state = TerminationState::new(phases)?;
        let rho = coupling_spectral_radius(&circuit.coupling, &state);
        print!("{ghz:>5.0} GHz  rho={rho:<6.3}");
        for order in 1..=6 {
            print!(" {:>10.3e}", approx_error(&circuit.coupling, &state, order)?);
        }
        println!();
    }
    Ok(())
}
