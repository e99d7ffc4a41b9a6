//! Analog/digital combiner design.
//!
//! The target effective combiner `ṽ_opt` is the scaled leading eigenvector of
//! the design matrix. The loop then alternates a least-squares digital
//! combiner with per-element phase sweeps so that `W^H v` tracks `ṽ_opt`.

pub mod phase;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::channel::{channel_jacobian, RadiationProfile, UePosition};
use crate::circuit::{lorentzian, AnalogBeamformer, Circuit, TerminationState, PHASE_FLOOR};
use crate::error::{DmaError, Result};
use crate::fisher::{design_matrix, DesignMatrix};
use crate::geometry::PanelConfig;

pub use phase::{
    order1_objective, order2_objective, order2_update, phase_step_order1, phase_step_order1_in,
    phase_step_order2, phase_step_unit_modulus,
};

/// Receiver architectures compared in the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Circuit model, designed under the first-order approximation.
    DmaOrder1,
    /// Circuit model, designed under the second-order approximation.
    DmaOrder2,
    /// Lorentzian weights straight onto the RF chains, no propagation or coupling.
    IdealDma,
    /// Partially connected phase shifters at half-wavelength spacing.
    HbfHalfwave,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::DmaOrder1,
        Architecture::DmaOrder2,
        Architecture::IdealDma,
        Architecture::HbfHalfwave,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::DmaOrder1 => "dma-order1",
            Architecture::DmaOrder2 => "dma-order2",
            Architecture::IdealDma => "ideal-dma",
            Architecture::HbfHalfwave => "hbf-halfwave",
        }
    }

    /// Panel actually deployed for this architecture, derived from a DMA template.
    pub fn panel(&self, template: &PanelConfig) -> PanelConfig {
        match self {
            Architecture::HbfHalfwave => {
                let lambda = template.wavelength();
                let mut p = PanelConfig::with_spacing(template.n_rf, template.n_e, template.freq, template.d_rf, lambda / 2.0);
                p.eps_r = template.eps_r;
                p.mu_r = template.mu_r;
                p
            }
            _ => template.clone(),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = DmaError;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| DmaError::config("variant", format!("unknown architecture `{s}`")))
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Baselines compared against the circuit-model designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    IdealDma,
    HbfHalfwave,
}

impl From<BaselineKind> for Architecture {
    fn from(k: BaselineKind) -> Self {
        match k {
            BaselineKind::IdealDma => Architecture::IdealDma,
            BaselineKind::HbfHalfwave => Architecture::HbfHalfwave,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Approximation order of the analog model inside the loop (1 or 2).
    pub order: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Add a dense phase grid to every element update.
    pub grid_check: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            order: 2,
            max_iters: 50,
            rel_tol: 1e-6,
            grid_check: false,
        }
    }
}

impl SolverOptions {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.order == 1 || self.order == 2) {
            return Err(DmaError::config("solver.order", format!("must be 1 or 2, got {}", self.order)));
        }
        if self.max_iters == 0 {
            return Err(DmaError::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(DmaError::config("solver.rel_tol", "must be > 0"));
        }
        Ok(())
    }
}

/// Output of a combiner design.
#[derive(Debug, Clone, PartialEq)]
pub struct BfSolution {
    pub architecture: Architecture,
    /// Per-element phases in radians.
    pub phases: Vec<f64>,
    /// Digital combiner, length `N_RF`.
    pub v: DVector<Complex64>,
    pub vtilde_opt: DVector<Complex64>,
    /// `‖ṽ_opt − W^H v‖²` of the returned iterate under the design model.
    pub residual: f64,
    /// Rayleigh quotient of `W^H v` under the design matrix.
    pub objective: f64,
    /// Largest eigenvalue of the design matrix.
    pub sigma1: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    /// Analog matrix of the design model at the returned phases.
    pub analog: AnalogBeamformer,
}

impl BfSolution {
    /// Phases as a termination state; only meaningful for DMA architectures.
    pub fn termination(&self) -> Result<TerminationState> {
        TerminationState::new(self.phases.clone())
    }
}

/// Leading eigenpair of `A`, returned as `u_1 √σ_1` and `σ_1`.
pub fn rayleigh_opt(a: &DesignMatrix) -> Result<(DVector<Complex64>, f64)> {
    let g = a.factor();
    if g.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(DmaError::DegenerateDesign);
    }
    // the non-zero spectrum of G G^H equals that of the small Gram matrix G^H G
    let gram = g.adjoint() * g;
    let eig = SymmetricEigen::new(gram);
    let (top, &sigma1) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty spectrum");
    if !(sigma1 > 0.0) {
        return Err(DmaError::DegenerateDesign);
    }
    let mut y = eig.eigenvectors.column(top).into_owned();
    // fix the free unit phase: largest entry of y real positive
    let (pivot, _) = y
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let rot = y[pivot].conj() / y[pivot].norm();
    y *= rot;
    let u = g * y;
    let scale = sigma1.sqrt() / u.norm();
    Ok((u * Complex64::from(scale), sigma1))
}

/// Least-squares digital combiner `(W W^H)^{-1} W ṽ_opt`.
pub fn digital_ls(w: &AnalogBeamformer, vtilde_opt: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let m = &w.matrix;
    if m.ncols() != vtilde_opt.len() {
        return Err(DmaError::Domain(format!(
            "beamformer has {} columns but target has length {}",
            m.ncols(),
            vtilde_opt.len()
        )));
    }
    let gram = m * m.adjoint();
    let rhs = m * vtilde_opt;
    let chol = gram.cholesky().ok_or(DmaError::RankDeficient)?;
    let v = chol.solve(&rhs);
    if v.iter().any(|z| !z.is_finite()) {
        return Err(DmaError::RankDeficient);
    }
    Ok(v)
}

pub fn ls_residual(w: &AnalogBeamformer, v: &DVector<Complex64>, vtilde_opt: &DVector<Complex64>) -> f64 {
    (vtilde_opt - w.matrix.adjoint() * v).norm_squared()
}

/// Block-diagonal analog matrix with `weights[n]` on row `n / n_e`.
pub fn block_diagonal(n_rf: usize, n_e: usize, weights: &[Complex64]) -> AnalogBeamformer {
    let mut m = DMatrix::zeros(n_rf, n_rf * n_e);
    for (idx, w) in weights.iter().enumerate() {
        m[(idx / n_e, idx)] = *w;
    }
    AnalogBeamformer { matrix: m, order: 0 }
}

/// Physical analog matrix of an architecture at the given phases. DMA
/// variants use the exact circuit response regardless of the design order.
pub fn hardware_beamformer(
    arch: Architecture,
    panel: &PanelConfig,
    circuit: Option<&Circuit>,
    phases: &[f64],
) -> Result<AnalogBeamformer> {
    match arch {
        Architecture::DmaOrder1 | Architecture::DmaOrder2 => {
            let state = TerminationState::new(phases.to_vec())?;
            match circuit {
                Some(c) => c.beamformer(&state, 0),
                None => Circuit::build(panel)?.beamformer(&state, 0),
            }
        }
        Architecture::IdealDma => {
            let w: Vec<Complex64> = phases.iter().map(|&p| lorentzian(p)).collect();
            Ok(block_diagonal(panel.n_rf, panel.n_e, &w))
        }
        Architecture::HbfHalfwave => {
            let w: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
            Ok(block_diagonal(panel.n_rf, panel.n_e, &w))
        }
    }
}

/// Incremental bookkeeping of the second-order residual
/// `e = ṽ − u ⊙ (a − W_MC^H (u ⊙ a))` with `u = w^*`.
struct Order2Sweep<'a> {
    coupling: &'a DMatrix<Complex64>,
    vt: &'a DVector<Complex64>,
    a: &'a DVector<Complex64>,
    u: Vec<Complex64>,
    s: DVector<Complex64>,
    total: f64,
}

impl<'a> Order2Sweep<'a> {
    fn new(coupling: &'a DMatrix<Complex64>, vt: &'a DVector<Complex64>, a: &'a DVector<Complex64>, phases: &[f64]) -> Self {
        let u: Vec<Complex64> = phases.iter().map(|&p| lorentzian(p).conj()).collect();
        let c = DVector::from_fn(u.len(), |m, _| u[m] * a[m]);
        let s = coupling.adjoint() * c;
        let mut sweep = Self { coupling, vt, a, u, s, total: 0.0 };
        sweep.total = sweep.residual_with(usize::MAX, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        sweep
    }

    /// Residual after replacing `u_n` by `u_n + du`, which shifts `s` by `W_MC^H[:, n] du a_n`.
    fn residual_with(&self, n: usize, u_new: Complex64, dc: Complex64) -> f64 {
        (0..self.u.len())
            .map(|m| {
                let (um, sm) = if n == usize::MAX {
                    (self.u[m], self.s[m])
                } else {
                    let um = if m == n { u_new } else { self.u[m] };
                    (um, self.s[m] + self.coupling[(n, m)].conj() * dc)
                };
                (self.vt[m] - um * (self.a[m] - sm)).norm_sqr()
            })
            .sum()
    }

    fn cross_term(&self, n: usize) -> Complex64 {
        // s_n minus the self term
        self.s[n] - self.coupling[(n, n)].conj() * self.u[n] * self.a[n]
    }

    fn try_update(&mut self, n: usize, phi: f64) -> bool {
        let u_new = lorentzian(phi).conj();
        let dc = (u_new - self.u[n]) * self.a[n];
        let cand = self.residual_with(n, u_new, dc);
        if cand <= self.total {
            for m in 0..self.u.len() {
                self.s[m] += self.coupling[(n, m)].conj() * dc;
            }
            self.u[n] = u_new;
            self.total = cand;
            true
        } else {
            false
        }
    }
}

fn sweep_phases(
    arch: Architecture,
    circuit: Option<&Circuit>,
    vt: &DVector<Complex64>,
    a: &DVector<Complex64>,
    phases: &mut [f64],
    dense: bool,
) {
    match arch {
        Architecture::DmaOrder1 | Architecture::IdealDma => {
            for (n, p) in phases.iter_mut().enumerate() {
                *p = phase::order1_update(vt[n], a[n], PHASE_FLOOR, dense);
            }
        }
        Architecture::HbfHalfwave => {
            for (n, p) in phases.iter_mut().enumerate() {
                *p = phase_step_unit_modulus(vt[n], a[n]);
            }
        }
        Architecture::DmaOrder2 => {
            let coupling = &circuit.expect("order-2 design needs the circuit").coupling.0;
            let norm = coupling.norm();
            let mut state = Order2Sweep::new(coupling, vt, a, phases);
            for n in 0..phases.len() {
                let m = coupling[(n, n)].conj();
                let b = state.cross_term(n);
                let phi = order2_update(vt[n], a[n], m, b, norm, PHASE_FLOOR, dense);
                if phi != phases[n] && state.try_update(n, phi) {
                    phases[n] = phi;
                }
            }
        }
    }
}

/// Drive vector `a` seen by each element for a digital combiner `v`.
fn drive(arch: Architecture, circuit: Option<&Circuit>, panel: &PanelConfig, v: &DVector<Complex64>) -> DVector<Complex64> {
    match arch {
        Architecture::DmaOrder1 | Architecture::DmaOrder2 => &circuit.expect("circuit").propagation.0 * v,
        _ => DVector::from_fn(panel.n_elements(), |idx, _| v[panel.strip_of(idx)]),
    }
}

fn design_model(
    arch: Architecture,
    circuit: Option<&Circuit>,
    panel: &PanelConfig,
    phases: &[f64],
) -> Result<AnalogBeamformer> {
    match arch {
        Architecture::DmaOrder1 | Architecture::DmaOrder2 => {
            let order = if arch == Architecture::DmaOrder1 { 1 } else { 2 };
            circuit
                .expect("circuit")
                .beamformer(&TerminationState::new(phases.to_vec())?, order)
        }
        _ => hardware_beamformer(arch, panel, None, phases),
    }
}

/// Alternating design for any architecture on an already built panel.
///
/// `circuit` must be present for the DMA variants. `a_matrix` is the design
/// matrix of the deployed panel.
pub fn design_architecture(
    arch: Architecture,
    panel: &PanelConfig,
    circuit: Option<&Circuit>,
    a_matrix: &DesignMatrix,
    opts: &SolverOptions,
) -> Result<BfSolution> {
    if opts.max_iters == 0 {
        return Err(DmaError::config("solver.max_iters", "must be at least 1"));
    }
    if !(opts.rel_tol.is_finite() && opts.rel_tol > 0.0) {
        return Err(DmaError::config("solver.rel_tol", "must be > 0"));
    }
    if matches!(arch, Architecture::DmaOrder1 | Architecture::DmaOrder2) && circuit.is_none() {
        return Err(DmaError::Domain("DMA design needs the circuit matrices".into()));
    }
    let (vt, sigma1) = rayleigh_opt(a_matrix)?;
    let mut phases = vec![0.0; panel.n_elements()];
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, DVector<Complex64>, AnalogBeamformer)> = None;

    for iter in 1..=opts.max_iters {
        let w = design_model(arch, circuit, panel, &phases)?;
        let v = digital_ls(&w, &vt)?;
        let res = ls_residual(&w, &v, &vt);
        let prev = history.last().copied();
        history.push(res);
        if best.as_ref().is_none_or(|b| res < b.0) {
            best = Some((res, phases.clone(), v.clone(), w));
        }
        let converged = prev.is_some_and(|p: f64| (p - res).abs() <= opts.rel_tol * p.abs());
        if converged || res == 0.0 || iter == opts.max_iters {
            break;
        }
        let a = drive(arch, circuit, panel, &v);
        sweep_phases(arch, circuit, &vt, &a, &mut phases, opts.grid_check);
    }

    let (residual, phases, v, analog) = best.expect("at least one iteration");
    let objective = a_matrix.rayleigh_quotient(&(analog.matrix.adjoint() * &v));
    Ok(BfSolution {
        architecture: arch,
        phases,
        v,
        vtilde_opt: vt,
        residual,
        objective,
        sigma1,
        iterations: history.len(),
        residual_history: history,
        analog,
    })
}

/// Circuit-model design at the user position with the order set in `opts`.
pub fn design(ue: &UePosition, cfg: &PanelConfig, profile: &RadiationProfile, opts: &SolverOptions) -> Result<BfSolution> {
    opts.validate()?;
    let circuit = Circuit::build(cfg)?;
    let a = design_matrix(&channel_jacobian(ue, cfg, profile));
    let arch = if opts.order == 1 { Architecture::DmaOrder1 } else { Architecture::DmaOrder2 };
    design_architecture(arch, cfg, Some(&circuit), &a, opts)
}

/// Baseline design; `cfg` is the DMA template, the half-wavelength panel is derived from it.
pub fn baseline(
    ue: &UePosition,
    cfg: &PanelConfig,
    profile: &RadiationProfile,
    kind: BaselineKind,
    opts: &SolverOptions,
) -> Result<BfSolution> {
    let arch = Architecture::from(kind);
    let panel = arch.panel(cfg);
    panel.validate()?;
    let a = design_matrix(&channel_jacobian(ue, &panel, profile));
    design_architecture(arch, &panel, None, &a, opts)
}

/// Phases admissible for an architecture.
pub fn phase_range(arch: Architecture) -> (f64, f64) {
    match arch {
        Architecture::HbfHalfwave => (-std::f64::consts::PI, std::f64::consts::PI),
        _ => (PHASE_FLOOR, FRAC_PI_2),
    }
}
