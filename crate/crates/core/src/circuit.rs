//! Circuit model of the analog combining stage.
//!
//! The analog beamformer of a DMA receiver is
//! `W_RX = P_SA^H (W_TA + W_MC)^{-1}`, where `P_SA` carries the in-guide
//! propagation from each RF port to its elements, `W_MC` the mutual coupling
//! between elements (through air and inside a shared guide) and `W_TA` the
//! diagonal termination admittances whose inverses follow the Lorentzian
//! profile `0.5 (j + e^{jφ})`.
//!
//! With `D = W_TA^{-1}` the exact inverse is evaluated as
//! `D (I + W_MC D)^{-1}`, and the order-`k` Neumann approximation as
//! `D Σ_{m<k} (−W_MC D)^m`. Neither needs `W_MC^{-1}`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{DmaError, Result};
use crate::geometry::{
    element_positions, rf_port_position, DerivedConstants, GuideCoord, PanelConfig, Position3D,
};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Lowest admissible phase whenever `W_TA` itself must exist.
pub const PHASE_FLOOR: f64 = -FRAC_PI_2 + 1e-6;

/// `G_MC`: zz-component of the free-space dyadic Green's function.
pub fn green_free_space(p: &Position3D, q: &Position3D, k0: f64) -> Result<Complex64> {
    let r = p.distance(q);
    if !(r > 0.0) {
        return Err(DmaError::Singularity(format!(
            "free-space kernel evaluated at coincident points {p:?}"
        )));
    }
    let dz = p.z - q.z;
    let (r2, dz2) = (r * r, dz * dz);
    let near = Complex64::new((r2 - dz2) / r2, -(r2 - 3.0 * dz2) / (r2 * r * k0));
    let far = (r2 - 3.0 * dz2) / (r2 * r2 * k0 * k0);
    Ok(near * far * Complex64::from_polar(1.0 / (4.0 * PI * r), -k0 * r))
}

/// `G_SA`: zz-component of the Green's function inside a shorted rectangular guide.
pub fn green_waveguide(
    p: GuideCoord,
    q: GuideCoord,
    consts: &DerivedConstants,
    cfg: &PanelConfig,
) -> Result<Complex64> {
    let kx = consts.k_x;
    let len = cfg.wg_len;
    let resonance = (kx * len).sin();
    if resonance.norm() < 1e-12 {
        return Err(DmaError::Singularity(format!(
            "guide resonance: sin(k_x S) = {resonance} for S = {len}"
        )));
    }
    let a = cfg.wg_a;
    let transverse = (PI * p.across / a).sin() * (PI * q.across / a).sin();
    let scale = -kx * transverse / (a * cfg.wg_b * consts.k_wg * consts.k_wg * resonance);
    let standing = (kx * (q.along + p.along - len)).cos() + (kx * (len - (p.along - q.along).abs())).cos();
    Ok(scale * standing)
}

/// `P_SA`: N × N_RF propagation from RF ports to elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationMatrix(pub DMatrix<Complex64>);

/// `W_MC`: N × N mutual-coupling admittances.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix(pub DMatrix<Complex64>);

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }
}

pub fn build_propagation(cfg: &PanelConfig, consts: &DerivedConstants) -> Result<PropagationMatrix> {
    let n = cfg.n_elements();
    let mut p = DMatrix::zeros(n, cfg.n_rf);
    let elements = element_positions(cfg);
    for i in 0..cfg.n_rf {
        let port = GuideCoord::of(cfg, &rf_port_position(cfg, i)?);
        for e in 0..cfg.n_e {
            let idx = cfg.flat_index(i, e);
            let g = green_waveguide(GuideCoord::of(cfg, &elements[idx]), port, consts, cfg)?;
            p[(idx, i)] = J * consts.omega * g;
        }
    }
    Ok(PropagationMatrix(p))
}

/// Coupling between two distinct elements, without the `jωε` prefactor.
fn coupling_kernel(
    cfg: &PanelConfig,
    consts: &DerivedConstants,
    elements: &[Position3D],
    n: usize,
    m: usize,
) -> Result<Complex64> {
    let (pn, pm) = (&elements[n], &elements[m]);
    if n == m {
        let here = GuideCoord::of(cfg, pn);
        let beside = GuideCoord {
            along: here.along + cfg.self_separation,
            ..here
        };
        return green_waveguide(here, beside, consts, cfg);
    }
    let air = 2.0 * green_free_space(pn, pm, consts.k0)?;
    if cfg.strip_of(n) == cfg.strip_of(m) {
        Ok(air + green_waveguide(GuideCoord::of(cfg, pn), GuideCoord::of(cfg, pm), consts, cfg)?)
    } else {
        Ok(air)
    }
}

pub fn build_coupling(cfg: &PanelConfig, consts: &DerivedConstants) -> Result<CouplingMatrix> {
    let n = cfg.n_elements();
    let elements = element_positions(cfg);
    let prefactor = J * consts.omega * consts.eps * cfg.coupling_scale;
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|row| {
            (0..n)
                .map(|col| coupling_kernel(cfg, consts, &elements, row, col).map(|g| prefactor * g))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(CouplingMatrix(DMatrix::from_fn(n, n, |r, c| rows[r][c])))
}

/// `0.5 (j + e^{jφ})`, defined for `φ ∈ [−π/2, π/2]`.
pub fn lorentzian_weight(phi: f64) -> Result<Complex64> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&phi) {
        return Err(DmaError::Domain(format!("phase {phi} outside [-π/2, π/2]")));
    }
    Ok(lorentzian(phi))
}

#[inline]
pub(crate) fn lorentzian(phi: f64) -> Complex64 {
    0.5 * (J + Complex64::from_polar(1.0, phi))
}

/// Per-element metamaterial phases.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationState {
    phases: Vec<f64>,
}

impl TerminationState {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if let Some(bad) = phases.iter().find(|p| !(-FRAC_PI_2..=FRAC_PI_2).contains(*p)) {
            return Err(DmaError::Domain(format!("phase {bad} outside [-π/2, π/2]")));
        }
        Ok(Self { phases })
    }

    pub fn zeros(n: usize) -> Self {
        Self { phases: vec![0.0; n] }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Lorentzian weights `[W_TA^{-1}]_{n,n}`.
    pub fn weights(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| lorentzian(p)).collect()
    }

    /// Copy with every phase raised to at least [`PHASE_FLOOR`].
    pub fn clamped(&self) -> Self {
        Self {
            phases: self.phases.iter().map(|p| p.max(PHASE_FLOOR)).collect(),
        }
    }

    fn checked_weights(&self) -> Result<Vec<Complex64>> {
        let w = self.weights();
        for (index, wn) in w.iter().enumerate() {
            if wn.norm() < 1e-15 {
                return Err(DmaError::SingularTermination {
                    index,
                    phase: self.phases[index],
                });
            }
        }
        Ok(w)
    }
}

/// `W_RX` (N_RF × N) and the approximation order that produced it; 0 is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogBeamformer {
    pub matrix: DMatrix<Complex64>,
    pub order: usize,
}

/// Right-multiply by `diag(w)`.
fn scale_columns(m: &mut DMatrix<Complex64>, w: &[Complex64]) {
    for (mut col, wn) in m.column_iter_mut().zip(w) {
        col *= *wn;
    }
}

/// Analog beamformer from the circuit matrices at the given phases.
pub fn analog_bf(
    p_sa: &PropagationMatrix,
    w_mc: &CouplingMatrix,
    state: &TerminationState,
    order: usize,
) -> Result<AnalogBeamformer> {
    let n = p_sa.0.nrows();
    if w_mc.0.nrows() != n || w_mc.0.ncols() != n || state.len() != n {
        return Err(DmaError::Domain(format!(
            "dimension mismatch: P_SA has {n} rows, W_MC is {}x{}, {} phases",
            w_mc.0.nrows(),
            w_mc.0.ncols(),
            state.len()
        )));
    }
    let w = state.checked_weights()?;
    let mut head = p_sa.0.adjoint();
    scale_columns(&mut head, &w);
    let matrix = if order == 0 {
        // W_RX^H = (I + W_MC D)^{-H} (P_SA^H D)^H
        let mut sys = w_mc.0.clone();
        scale_columns(&mut sys, &w);
        for d in 0..n {
            sys[(d, d)] += Complex64::new(1.0, 0.0);
        }
        let lu = sys.adjoint().lu();
        let x = lu
            .solve(&head.adjoint())
            .ok_or_else(|| DmaError::LinearSolve("W_TA + W_MC is singular".into()))?;
        x.adjoint()
    } else {
        let mut acc = head.clone();
        let mut term = head;
        for _ in 1..order {
            term = -(&term * &w_mc.0);
            scale_columns(&mut term, &w);
            acc += &term;
        }
        acc
    };
    Ok(AnalogBeamformer { matrix, order })
}

/// Exact `(W_TA + W_MC)^{-1}`.
pub fn exact_inverse(w_mc: &CouplingMatrix, state: &TerminationState) -> Result<DMatrix<Complex64>> {
    let w = state.checked_weights()?;
    let n = w.len();
    let mut sys = w_mc.0.clone();
    scale_columns(&mut sys, &w);
    for d in 0..n {
        sys[(d, d)] += Complex64::new(1.0, 0.0);
    }
    let inv = sys
        .try_inverse()
        .ok_or_else(|| DmaError::LinearSolve("W_TA + W_MC is singular".into()))?;
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w)) * inv)
}

/// Order-`k` Neumann approximation of `(W_TA + W_MC)^{-1}`.
pub fn neumann_inverse(
    w_mc: &CouplingMatrix,
    state: &TerminationState,
    order: usize,
) -> Result<DMatrix<Complex64>> {
    if order == 0 {
        return exact_inverse(w_mc, state);
    }
    let w = state.checked_weights()?;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w.clone()));
    let mut acc = d.clone();
    let mut term = d;
    for _ in 1..order {
        term = -(&term * &w_mc.0);
        scale_columns(&mut term, &w);
        acc += &term;
    }
    Ok(acc)
}

/// Squared Frobenius distance between the exact inverse and its order-`k` approximation.
pub fn approx_error(w_mc: &CouplingMatrix, state: &TerminationState, order: usize) -> Result<f64> {
    let exact = exact_inverse(w_mc, state)?;
    let approx = neumann_inverse(w_mc, state, order)?;
    Ok((exact - approx).norm_squared())
}

/// Spectral radius of `W_MC W_TA^{-1}`; the Neumann series converges below 1.
pub fn coupling_spectral_radius(w_mc: &CouplingMatrix, state: &TerminationState) -> f64 {
    let mut m = w_mc.0.clone();
    scale_columns(&mut m, &state.weights());
    m.eigenvalues()
        .map(|ev| ev.iter().map(|e| e.norm()).fold(0.0, f64::max))
        .unwrap_or_else(|| {
            // complex Schur did not converge; fall back to a norm bound
            m.norm()
        })
}

/// Circuit matrices of one panel, built once and shared.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub constants: DerivedConstants,
    pub propagation: PropagationMatrix,
    pub coupling: CouplingMatrix,
}

impl Circuit {
    pub fn build(cfg: &PanelConfig) -> Result<Self> {
        cfg.validate()?;
        let constants = cfg.constants();
        Ok(Self {
            propagation: build_propagation(cfg, &constants)?,
            coupling: build_coupling(cfg, &constants)?,
            constants,
        })
    }

    pub fn beamformer(&self, state: &TerminationState, order: usize) -> Result<AnalogBeamformer> {
        analog_bf(&self.propagation, &self.coupling, state, order)
    }
}
