//! Near-field localization with dynamic metasurface antenna receivers.
//!
//! The crate models a DMA panel as a circuit (propagation inside the
//! microstrips, mutual coupling between elements and Lorentzian-constrained
//! terminations), computes Fisher-information bounds for locating a
//! single-antenna user in the radiating near field, designs the analog and
//! digital combiners and runs Monte Carlo maximum-likelihood experiments.
//!
//! ```
//! use dmaloc::prelude::*;
//!
//! let panel = PanelConfig::new(2, 8, 28e9);
//! let ue = UePosition::from_degrees(5.0, 30.0, 90.0).unwrap();
//! let sol = design(&ue, &panel, &RadiationProfile::Isotropic, &SolverOptions::default()).unwrap();
//! assert_eq!(sol.phases.len(), 16);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod circuit;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fisher;
pub mod geometry;
pub mod optimizer;
pub mod sim;

pub use error::{DmaError, Result};

pub mod prelude {
    pub use crate::channel::{channel, channel_jacobian, fd_jacobian, RadiationProfile, UePosition};
    pub use crate::circuit::{analog_bf, approx_error, lorentzian_weight, Circuit, TerminationState};
    pub use crate::error::{DmaError, Result};
    pub use crate::fisher::{design_matrix, fim, peb, Fim, NoiseModel, Param, PilotConfig};
    pub use crate::geometry::PanelConfig;
    pub use crate::optimizer::{baseline, design, Architecture, BaselineKind, BfSolution, SolverOptions};
}
