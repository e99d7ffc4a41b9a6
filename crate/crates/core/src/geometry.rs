//! Panel layout and the scalar electromagnetic constants of a DMA receiver.
//!
//! The panel lies in the xz-plane. Microstrip `i` (0-based) sits at
//! `x = i * d_rf`; its elements are stacked along z at `z = n * d_e`. Each
//! microstrip is a rectangular waveguide whose longitudinal axis is z. Its
//! RF port sits a distance `port_offset` before the first element, which is
//! also where the guide starts, so the in-guide longitudinal coordinate of a
//! panel point is `z + port_offset`. Elements are centred across the guide
//! width, i.e. their transverse coordinate is `a / 2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{DmaError, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Default multiplier applied to the mutual-coupling admittances.
///
/// The raw Green's-function admittances are several thousand times larger
/// than the unit-scale Lorentzian terminations. The hardware constants that
/// bring them to a common scale are not part of this model, so the product is
/// lumped into one dimensionless factor. At 28 GHz with the default geometry
/// this yields a spectral radius of roughly 0.35 for `W_MC W_TA^{-1}`.
pub const DEFAULT_COUPLING_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Physical description of the receive panel. Lengths in meters, frequency in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    /// Number of microstrips, one RF chain each.
    pub n_rf: usize,
    /// Metamaterial elements per microstrip.
    pub n_e: usize,
    pub d_rf: f64,
    pub d_e: f64,
    pub freq: f64,
    /// Waveguide width `a`.
    pub wg_a: f64,
    /// Waveguide height `b`.
    pub wg_b: f64,
    /// Waveguide length `S_mu`.
    pub wg_len: f64,
    pub eps_r: f64,
    pub mu_r: f64,
    /// Distance from the RF port to the first element along the guide.
    pub port_offset: f64,
    /// Separation used to regularize the self-coupling term on the diagonal of `W_MC`.
    pub self_separation: f64,
    pub coupling_scale: f64,
}

impl PanelConfig {
    /// Panel with `d_rf = λ` and `d_e = λ/5`.
    pub fn new(n_rf: usize, n_e: usize, freq: f64) -> Self {
        let lambda = SPEED_OF_LIGHT / freq;
        Self::with_spacing(n_rf, n_e, freq, lambda, lambda / 5.0)
    }

    /// Panel with explicit spacings; guide dimensions, port offset and the
    /// self-coupling separation take their defaults relative to λ and `d_e`.
    pub fn with_spacing(n_rf: usize, n_e: usize, freq: f64, d_rf: f64, d_e: f64) -> Self {
        let lambda = SPEED_OF_LIGHT / freq;
        Self {
            n_rf,
            n_e,
            d_rf,
            d_e,
            freq,
            wg_a: 0.73 * lambda,
            wg_b: 0.17 * lambda,
            wg_len: n_e.saturating_sub(1) as f64 * d_e + lambda / 2.0,
            eps_r: 1.0,
            mu_r: 1.0,
            port_offset: lambda / 4.0,
            self_separation: d_e / 100.0,
            coupling_scale: DEFAULT_COUPLING_SCALE,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq
    }

    /// Total number of metamaterial elements.
    pub fn n_elements(&self) -> usize {
        self.n_rf * self.n_e
    }

    /// Flattened element index: microstrip-major.
    pub fn flat_index(&self, i: usize, n: usize) -> usize {
        i * self.n_e + n
    }

    /// Microstrip that hosts flattened element `idx`.
    pub fn strip_of(&self, idx: usize) -> usize {
        idx / self.n_e
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rf == 0 {
            return Err(DmaError::config("n_rf", "must be at least 1"));
        }
        if self.n_e == 0 {
            return Err(DmaError::config("n_e", "must be at least 1"));
        }
        let positive = [
            ("d_rf", self.d_rf),
            ("d_e", self.d_e),
            ("freq", self.freq),
            ("wg_a", self.wg_a),
            ("wg_b", self.wg_b),
            ("wg_len", self.wg_len),
            ("eps_r", self.eps_r),
            ("mu_r", self.mu_r),
            ("self_separation", self.self_separation),
            ("coupling_scale", self.coupling_scale),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DmaError::config(key, format!("must be finite and > 0, got {value}")));
            }
        }
        if !(self.port_offset.is_finite() && self.port_offset >= 0.0) {
            return Err(DmaError::config(
                "port_offset",
                format!("must be finite and >= 0, got {}", self.port_offset),
            ));
        }
        let guide_lambda = self.wavelength() / (self.eps_r * self.mu_r).sqrt();
        if self.wg_a <= guide_lambda / 2.0 {
            return Err(DmaError::config(
                "wg_a",
                format!(
                    "fundamental mode is cut off: a = {} <= λ_g/2 = {}",
                    self.wg_a,
                    guide_lambda / 2.0
                ),
            ));
        }
        let last = self.port_offset + (self.n_e - 1) as f64 * self.d_e;
        if last > self.wg_len {
            return Err(DmaError::config(
                "wg_len",
                format!("guide of length {} does not reach the last element at {last}", self.wg_len),
            ));
        }
        Ok(())
    }

    pub fn constants(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

/// Scalar constants derived from a [`PanelConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub lambda0: f64,
    pub k0: f64,
    /// In-guide wavenumber `2π / (λ √(ε_r μ_r))`.
    pub k_wg: f64,
    pub k_x: Complex64,
    pub omega: f64,
    /// Medium permittivity in F/m.
    pub eps: f64,
}

/// Branch of `√(k² − (π/a)²)` with non-positive imaginary part.
pub fn transverse_wavenumber(k: f64, a: f64) -> Complex64 {
    let root = Complex64::new(k * k - (PI / a).powi(2), 0.0).sqrt();
    Complex64::new(root.re, -root.im.abs())
}

pub fn derive_constants(cfg: &PanelConfig) -> DerivedConstants {
    let lambda0 = SPEED_OF_LIGHT / cfg.freq;
    let k0 = 2.0 * PI / lambda0;
    let k_wg = 2.0 * PI / (lambda0 * (cfg.eps_r * cfg.mu_r).sqrt());
    DerivedConstants {
        lambda0,
        k0,
        k_wg,
        k_x: transverse_wavenumber(k_wg, cfg.wg_a),
        omega: 2.0 * PI * cfg.freq,
        eps: VACUUM_PERMITTIVITY * cfg.eps_r,
    }
}

/// Position of element `n` of microstrip `i` (both 0-based).
pub fn element_position(cfg: &PanelConfig, i: usize, n: usize) -> Result<Position3D> {
    check_strip(cfg, i)?;
    if n >= cfg.n_e {
        return Err(DmaError::Range {
            what: "element",
            index: n,
            limit: cfg.n_e,
        });
    }
    Ok(Position3D::new(i as f64 * cfg.d_rf, 0.0, n as f64 * cfg.d_e))
}

/// Feed-port location of microstrip `i`, `port_offset` before its first element.
pub fn rf_port_position(cfg: &PanelConfig, i: usize) -> Result<Position3D> {
    check_strip(cfg, i)?;
    if !(cfg.port_offset.is_finite() && cfg.port_offset >= 0.0) {
        return Err(DmaError::config("port_offset", "must be finite and >= 0"));
    }
    Ok(Position3D::new(i as f64 * cfg.d_rf, 0.0, -cfg.port_offset))
}

/// All element positions in flattened order.
pub fn element_positions(cfg: &PanelConfig) -> Vec<Position3D> {
    (0..cfg.n_rf)
        .flat_map(|i| (0..cfg.n_e).map(move |n| (i, n)))
        .map(|(i, n)| Position3D::new(i as f64 * cfg.d_rf, 0.0, n as f64 * cfg.d_e))
        .collect()
}

fn check_strip(cfg: &PanelConfig, i: usize) -> Result<()> {
    if i >= cfg.n_rf {
        return Err(DmaError::Range {
            what: "microstrip",
            index: i,
            limit: cfg.n_rf,
        });
    }
    Ok(())
}

/// Coordinates of a point inside its microstrip's waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideCoord {
    /// Distance along the guide from its port end.
    pub along: f64,
    /// Coordinate across the guide width, in `[0, a]`.
    pub across: f64,
}

impl GuideCoord {
    pub fn of(cfg: &PanelConfig, p: &Position3D) -> Self {
        Self {
            along: p.z + cfg.port_offset,
            across: cfg.wg_a / 2.0,
        }
    }
}
