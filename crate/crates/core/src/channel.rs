//! Near-field uplink channel of a single-antenna user and its derivatives.
//!
//! Entry `i * N_E + n` of the channel is
//! `√F(θ_{i,n}) · λ / (4π r_{i,n}) · exp(j 2π r_{i,n} / λ)` with `r_{i,n}` the
//! distance from the user to element `n` of microstrip `i` and `θ_{i,n}` the
//! elevation seen by that element.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{DmaError, Result};
use crate::geometry::{PanelConfig, Position3D};

/// Polar user coordinates `(r, θ, φ)`; angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UePosition {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl UePosition {
    pub fn new(r: f64, theta: f64, phi: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(DmaError::Domain(format!("range must be > 0, got {r}")));
        }
        if !(theta > 0.0 && theta < PI) {
            return Err(DmaError::Domain(format!("elevation must lie in (0, π), got {theta}")));
        }
        if !(0.0..=PI).contains(&phi) {
            return Err(DmaError::Domain(format!("azimuth must lie in [0, π], got {phi}")));
        }
        Ok(Self { r, theta, phi })
    }

    pub fn from_degrees(r: f64, theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(r, theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.theta, self.phi]
    }

    pub fn cartesian(&self) -> Position3D {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Position3D::new(self.r * st * cp, self.r * st * sp, self.r * ct)
    }
}

/// Element radiation profile `F(θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiationProfile {
    #[default]
    Isotropic,
    /// `F(θ) = 2 (q + 1) cos^q θ`.
    CosinePower { exponent: f64 },
}

impl RadiationProfile {
    /// `√F(θ)` and its derivative in θ.
    fn amplitude(&self, theta: f64) -> (f64, f64) {
        match *self {
            RadiationProfile::Isotropic => (1.0, 0.0),
            RadiationProfile::CosinePower { exponent: q } => {
                let c = theta.cos().max(0.0);
                let g = (2.0 * (q + 1.0)).sqrt();
                let amp = g * c.powf(q / 2.0);
                let d = if q == 0.0 {
                    0.0
                } else {
                    -g * (q / 2.0) * c.powf(q / 2.0 - 1.0) * theta.sin()
                };
                (amp, d)
            }
        }
    }

    pub fn gain(&self, theta: f64) -> f64 {
        let a = self.amplitude(theta).0;
        a * a
    }
}

/// Offsets of element `(i, n)` along x and z.
fn offsets(cfg: &PanelConfig, i: usize, n: usize) -> (f64, f64) {
    (i as f64 * cfg.d_rf, n as f64 * cfg.d_e)
}

/// Distance from the user to element `n` of microstrip `i`.
///
/// Evaluated in law-of-cosines form so that the first element returns `r` exactly.
pub fn element_distance(ue: &UePosition, cfg: &PanelConfig, i: usize, n: usize) -> f64 {
    let (x, z) = offsets(cfg, i, n);
    distance_raw(ue.r, ue.theta, ue.phi, x, z)
}

fn distance_raw(r: f64, theta: f64, phi: f64, x: f64, z: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let proj = st * phi.cos() * x + ct * z;
    (r * r - 2.0 * r * proj + x * x + z * z).sqrt()
}

/// Elevation of the user as seen from element `n` of microstrip `i`.
pub fn element_elevation(ue: &UePosition, cfg: &PanelConfig, i: usize, n: usize) -> f64 {
    let (_, z) = offsets(cfg, i, n);
    let dist = element_distance(ue, cfg, i, n);
    elevation_raw(ue.r, ue.theta, z, dist)
}

fn elevation_raw(r: f64, theta: f64, z: f64, dist: f64) -> f64 {
    ((z - r * theta.cos()).abs() / dist).clamp(-1.0, 1.0).asin()
}

/// Channel vector in flattened element order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub DVector<Complex64>);

/// Partial derivatives of the channel; row `k` is `∂h/∂ζ_k` for `ζ = (r, θ, φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelJacobian(pub DMatrix<Complex64>);

impl ChannelJacobian {
    pub fn row(&self, k: usize) -> DVector<Complex64> {
        self.0.row(k).transpose()
    }

    /// `∂h^H/∂ζ_k` as a column: the conjugated row.
    pub fn conj_row(&self, k: usize) -> DVector<Complex64> {
        self.0.row(k).transpose().map(|c| c.conj())
    }
}

fn entry(profile: &RadiationProfile, lambda: f64, dist: f64, elev: f64) -> Complex64 {
    let amp = profile.amplitude(elev).0;
    Complex64::from_polar(amp * lambda / (4.0 * PI * dist), 2.0 * PI * dist / lambda)
}

pub(crate) fn channel_raw(
    r: f64,
    theta: f64,
    phi: f64,
    cfg: &PanelConfig,
    profile: &RadiationProfile,
) -> DVector<Complex64> {
    let lambda = cfg.wavelength();
    DVector::from_fn(cfg.n_elements(), |idx, _| {
        let (x, z) = offsets(cfg, cfg.strip_of(idx), idx % cfg.n_e);
        let dist = distance_raw(r, theta, phi, x, z);
        entry(profile, lambda, dist, elevation_raw(r, theta, z, dist))
    })
}

/// `ṽ^H h^*`: the noiseless combined response to a unit pilot.
pub(crate) fn combined_response(
    r: f64,
    theta: f64,
    phi: f64,
    cfg: &PanelConfig,
    profile: &RadiationProfile,
    vtilde: &DVector<Complex64>,
) -> Complex64 {
    let lambda = cfg.wavelength();
    let mut acc = Complex64::new(0.0, 0.0);
    for (idx, vt) in vtilde.iter().enumerate() {
        let (x, z) = offsets(cfg, cfg.strip_of(idx), idx % cfg.n_e);
        let dist = distance_raw(r, theta, phi, x, z);
        acc += vt.conj() * entry(profile, lambda, dist, elevation_raw(r, theta, z, dist)).conj();
    }
    acc
}

pub fn channel(ue: &UePosition, cfg: &PanelConfig, profile: &RadiationProfile) -> ChannelVector {
    ChannelVector(channel_raw(ue.r, ue.theta, ue.phi, cfg, profile))
}

/// Analytic Jacobian of [`channel`] with respect to `(r, θ, φ)`.
pub fn channel_jacobian(ue: &UePosition, cfg: &PanelConfig, profile: &RadiationProfile) -> ChannelJacobian {
    let lambda = cfg.wavelength();
    let k = 2.0 * PI / lambda;
    let (r, theta, phi) = (ue.r, ue.theta, ue.phi);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let mut jac = DMatrix::zeros(3, cfg.n_elements());
    for idx in 0..cfg.n_elements() {
        let (x, z) = offsets(cfg, cfg.strip_of(idx), idx % cfg.n_e);
        let dist = distance_raw(r, theta, phi, x, z);
        let d_dist = [
            (r - (st * cp * x + ct * z)) / dist,
            -r * (ct * cp * x - st * z) / dist,
            r * st * sp * x / dist,
        ];
        let lateral = z - r * ct;
        let u = (lateral.abs() / dist).min(1.0);
        let elev = u.asin();
        let (amp, d_amp) = profile.amplitude(elev);
        let base = Complex64::from_polar(lambda / (4.0 * PI * dist), k * dist);
        let h = amp * base;
        let radial = Complex64::new(-1.0 / dist, k);
        // sign(0) = +1 at broadside
        let sign = if lateral < 0.0 { -1.0 } else { 1.0 };
        let d_lateral = [-ct, r * st, 0.0];
        let cos_elev = (1.0 - u * u).sqrt();
        for c in 0..3 {
            let mut d = h * radial * d_dist[c];
            if d_amp != 0.0 && cos_elev > 0.0 {
                let du = (sign * d_lateral[c] * dist - lateral.abs() * d_dist[c]) / (dist * dist);
                d += base * d_amp * (du / cos_elev);
            }
            jac[(c, idx)] = d;
        }
    }
    ChannelJacobian(jac)
}

/// Central-difference Jacobian with absolute step `step` in native units
/// (meters for `r`, radians for the angles).
pub fn fd_jacobian(
    ue: &UePosition,
    cfg: &PanelConfig,
    profile: &RadiationProfile,
    step: f64,
) -> Result<ChannelJacobian> {
    if !(step.is_finite() && step > 0.0) {
        return Err(DmaError::Domain(format!("finite-difference step must be > 0, got {step}")));
    }
    let mut jac = DMatrix::zeros(3, cfg.n_elements());
    let base = ue.as_array();
    for c in 0..3 {
        let mut hi = base;
        let mut lo = base;
        hi[c] += step;
        lo[c] -= step;
        let diff = channel_raw(hi[0], hi[1], hi[2], cfg, profile) - channel_raw(lo[0], lo[1], lo[2], cfg, profile);
        jac.set_row(c, &(diff / Complex64::from(2.0 * step)).transpose());
    }
    Ok(ChannelJacobian(jac))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PanelConfig {
        PanelConfig::new(2, 4, 28e9)
    }

    fn ue() -> UePosition {
        UePosition::from_degrees(5.0, 30.0, 90.0).unwrap()
    }

    #[test]
    fn first_element_distance_is_range() {
        let c = cfg();
        for (r, t, p) in [(5.0, 0.5, 1.5), (1.234, 2.1, 0.0), (29.7, 0.01, 3.1)] {
            let u = UePosition::new(r, t, p).unwrap();
            assert_eq!(element_distance(&u, &c, 0, 0), r);
        }
    }

    #[test]
    fn on_axis_distance() {
        let c = cfg();
        let u = UePosition { r: 2.0, theta: 0.0, phi: 0.3 };
        for n in 0..4 {
            let expect = (2.0 - n as f64 * c.d_e).abs();
            assert!((element_distance(&u, &c, 0, n) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn first_element_elevation() {
        let c = cfg();
        for t in [0.2, 0.7, 1.2, PI / 2.0] {
            let u = UePosition::new(3.0, t, 1.0).unwrap();
            let e = element_elevation(&u, &c, 0, 0);
            assert!((e - (PI / 2.0 - t)).abs() < 1e-7, "{e} vs {}", PI / 2.0 - t);
        }
    }

    #[test]
    fn broadside_elevation_is_zero() {
        let c = cfg();
        let n = 3;
        let theta = (n as f64 * c.d_e / 1.0).acos();
        let u = UePosition::new(1.0, theta, 0.4).unwrap();
        assert!(element_elevation(&u, &c, 1, n).abs() < 1e-7);
    }

    #[test]
    fn isotropic_first_entry() {
        let c = cfg();
        let h = channel(&ue(), &c, &RadiationProfile::Isotropic);
        let lambda = c.wavelength();
        let e = h.0[0];
        assert!((e.norm() - lambda / (4.0 * PI * 5.0)).abs() < 1e-18);
        let want = (2.0 * PI * 5.0 / lambda).rem_euclid(2.0 * PI);
        let got = e.arg().rem_euclid(2.0 * PI);
        assert!((got - want).abs() < 1e-9);
        let far = channel(&UePosition { r: 10.0, ..ue() }, &c, &RadiationProfile::Isotropic);
        assert!((e.norm() / far.0[0].norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn entries_never_vanish() {
        let h = channel(&ue(), &PanelConfig::new(3, 16, 28e9), &RadiationProfile::Isotropic);
        assert!(h.0.iter().all(|e| e.norm() > 0.0));
    }

    #[test]
    fn azimuth_derivative_of_first_element_is_zero() {
        let j = channel_jacobian(&ue(), &cfg(), &RadiationProfile::Isotropic);
        assert_eq!(j.0[(2, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fd_step_must_be_positive() {
        assert!(fd_jacobian(&ue(), &cfg(), &RadiationProfile::Isotropic, 0.0).is_err());
        assert!(fd_jacobian(&ue(), &cfg(), &RadiationProfile::Isotropic, -1e-6).is_err());
    }

    #[test]
    fn relative_range_step_matches_analytic() {
        let c = PanelConfig::new(2, 16, 28e9);
        let u = ue();
        let a = channel_jacobian(&u, &c, &RadiationProfile::Isotropic).row(0);
        let f = fd_jacobian(&u, &c, &RadiationProfile::Isotropic, 1e-6 * u.r).unwrap().row(0);
        assert!((&a - &f).norm() / a.norm() < 1e-5);
    }

    #[test]
    fn cosine_profile_jacobian_matches_fd() {
        let c = PanelConfig::new(2, 8, 28e9);
        let prof = RadiationProfile::CosinePower { exponent: 2.0 };
        let u = UePosition::from_degrees(3.0, 50.0, 70.0).unwrap();
        let a = channel_jacobian(&u, &c, &prof);
        let f = fd_jacobian(&u, &c, &prof, 1e-6).unwrap();
        assert!((&a.0 - &f.0).norm() / a.0.norm() < 1e-5);
    }

    #[test]
    fn central_difference_is_second_order() {
        let c = PanelConfig::new(1, 2, 28e9);
        let u = ue();
        let exact = channel_jacobian(&u, &c, &RadiationProfile::Isotropic).row(0);
        let err = |s: f64| {
            let f = fd_jacobian(&u, &c, &RadiationProfile::Isotropic, s).unwrap().row(0);
            (&exact - f).norm()
        };
        let ratio = err(4e-4) / err(2e-4);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn conjugation_commutes_with_derivative() {
        let c = cfg();
        let u = ue();
        let j = channel_jacobian(&u, &c, &RadiationProfile::Isotropic);
        let step = 1e-7;
        let hi = channel_raw(u.r + step, u.theta, u.phi, &c, &RadiationProfile::Isotropic).map(|z| z.conj());
        let lo = channel_raw(u.r - step, u.theta, u.phi, &c, &RadiationProfile::Isotropic).map(|z| z.conj());
        let fd = (hi - lo) / Complex64::from(2.0 * step);
        assert!((j.conj_row(0) - &fd).norm() / fd.norm() < 1e-5);
    }

    #[test]
    fn invalid_positions_rejected() {
        assert!(UePosition::new(0.0, 1.0, 1.0).is_err());
        assert!(UePosition::new(1.0, 0.0, 1.0).is_err());
        assert!(UePosition::new(1.0, 1.0, 3.5).is_err());
    }
}
