//! Pilot synthesis, grid-refined maximum-likelihood positioning and the
//! Monte Carlo sweeps built on them.
//!
//! Randomness is counter based: trial `t` of a run seeded with `s` draws from
//! a ChaCha stream keyed by `s` at stream index `t`. Results therefore do not
//! depend on how trials are scheduled across threads. Every power point of an
//! RMSE curve reuses the same per-trial streams, so the curve compares powers
//! under common noise realizations.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_jacobian, combined_response, RadiationProfile, UePosition};
use crate::circuit::Circuit;
use crate::error::{DmaError, Result};
use crate::fisher::{design_matrix, fim, peb_or_infinity, Bound, NoiseModel, Param, PilotConfig};
use crate::geometry::PanelConfig;
use crate::optimizer::{design_architecture, hardware_beamformer, Architecture, BfSolution, SolverOptions};

/// Noiseless map from user position to the combined baseband sample of a unit pilot.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub panel: PanelConfig,
    pub profile: RadiationProfile,
    /// Effective combiner `W^H v` of the deployed hardware.
    pub vtilde: DVector<Complex64>,
}

impl ForwardModel {
    pub fn new(panel: PanelConfig, profile: RadiationProfile, vtilde: DVector<Complex64>) -> Result<Self> {
        if vtilde.len() != panel.n_elements() {
            return Err(DmaError::Domain(format!(
                "combiner length {} does not match {} elements",
                vtilde.len(),
                panel.n_elements()
            )));
        }
        Ok(Self { panel, profile, vtilde })
    }

    /// `v^H W h^H`.
    pub fn gain(&self, r: f64, theta: f64, phi: f64) -> Complex64 {
        combined_response(r, theta, phi, &self.panel, &self.profile, &self.vtilde)
    }

    pub fn gain_at(&self, ue: &UePosition) -> Complex64 {
        self.gain(ue.r, ue.theta, ue.phi)
    }
}

/// `T` combined pilot observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock {
    pub samples: Vec<Complex64>,
    /// Pilot symbol `√P_max`.
    pub pilot: f64,
    pub seed: u64,
    pub stream: u64,
}

/// Generator of trial `stream` under master seed `seed`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `y(t) = v^H W h^H s(t) + v^H W n(t)` with `n(t) ~ CN(0, σ² I)`.
pub fn synthesize(
    model: &ForwardModel,
    ue: &UePosition,
    pilots: &PilotConfig,
    noise: &NoiseModel,
    seed: u64,
    stream: u64,
) -> ReceivedBlock {
    let pilot = pilots.p_max.sqrt();
    let clean = model.gain_at(ue) * pilot;
    let mut rng = trial_rng(seed, stream);
    let std = (noise.sigma2 / 2.0).sqrt();
    let samples = (0..pilots.t_pilots)
        .map(|_| {
            let mut y = clean;
            for vt in model.vtilde.iter() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                y += vt.conj() * Complex64::new(std * re, std * im);
            }
            y
        })
        .collect();
    ReceivedBlock {
        samples,
        pilot,
        seed,
        stream,
    }
}

/// Search axes for the ML estimator; angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub r_axis: Vec<f64>,
    pub theta_axis: Vec<f64>,
    pub phi_axis: Vec<f64>,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    // pin the ends exactly
    if n > 0 {
        v[0] = lo;
        v[n - 1] = if n > 1 { hi } else { lo };
    }
    v
}

impl SearchGrid {
    /// Range 1–30 m (60 log-spaced nodes), azimuth 0–180° (121 nodes), elevation known.
    pub fn known_elevation(theta: f64) -> Self {
        Self {
            r_axis: logspace(1.0, 30.0, 60),
            theta_axis: vec![theta],
            phi_axis: linspace(0.0, 180f64.to_radians(), 121),
            refine_rounds: 3,
            refine_shrink: 0.2,
        }
    }

    /// Adds elevation 10–80° at 29 nodes.
    pub fn full() -> Self {
        Self {
            theta_axis: linspace(10f64.to_radians(), 80f64.to_radians(), 29),
            ..Self::known_elevation(30f64.to_radians())
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, axis) in [
            ("grid.r_axis", &self.r_axis),
            ("grid.theta_axis", &self.theta_axis),
            ("grid.phi_axis", &self.phi_axis),
        ] {
            if axis.is_empty() {
                return Err(DmaError::config(key, "axis is empty"));
            }
            if axis.iter().any(|x| !x.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DmaError::config(key, "axis must be finite and strictly increasing"));
            }
        }
        if self.r_axis[0] <= 0.0 {
            return Err(DmaError::config("grid.r_axis", "ranges must be > 0"));
        }
        if self.theta_axis[0] <= 0.0 || *self.theta_axis.last().unwrap() >= std::f64::consts::PI {
            return Err(DmaError::config("grid.theta_axis", "elevations must lie in (0, π)"));
        }
        if self.phi_axis[0] < 0.0 || *self.phi_axis.last().unwrap() > std::f64::consts::PI {
            return Err(DmaError::config("grid.phi_axis", "azimuths must lie in [0, π]"));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(DmaError::config("grid.refine_shrink", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Coordinates that the grid actually searches.
    pub fn unknowns(&self) -> Vec<Param> {
        if self.theta_axis.len() > 1 {
            vec![Param::Range, Param::Elevation, Param::Azimuth]
        } else {
            vec![Param::Range, Param::Azimuth]
        }
    }

    pub fn len(&self) -> usize {
        self.r_axis.len() * self.theta_axis.len() * self.phi_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in row-major `(r, θ, φ)` order.
    pub fn nodes(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.r_axis.iter().flat_map(move |&r| {
            self.theta_axis
                .iter()
                .flat_map(move |&t| self.phi_axis.iter().map(move |&p| [r, t, p]))
        })
    }
}

/// Coarse-grid responses, reusable across trials of one receiver.
#[derive(Debug, Clone)]
pub struct GridTable {
    pub nodes: Vec<[f64; 3]>,
    pub gains: Vec<Complex64>,
}

impl GridTable {
    pub fn new(model: &ForwardModel, grid: &SearchGrid) -> Result<Self> {
        grid.validate()?;
        let nodes: Vec<[f64; 3]> = grid.nodes().collect();
        let gains = nodes.par_iter().map(|n| model.gain(n[0], n[1], n[2])).collect();
        Ok(Self { nodes, gains })
    }
}

/// `Σ_t |y_t − g s|²`.
pub fn ml_residual(block: &ReceivedBlock, gain: Complex64) -> f64 {
    let clean = gain * block.pilot;
    block.samples.iter().map(|y| (y - clean).norm_sqr()).sum()
}

/// Local spacing of `axis` around `x`.
fn local_step(axis: &[f64], x: f64) -> f64 {
    if axis.len() < 2 {
        return 0.0;
    }
    let k = axis.partition_point(|&a| a < x).min(axis.len() - 1);
    let left = if k > 0 { axis[k] - axis[k - 1] } else { 0.0 };
    let right = if k + 1 < axis.len() { axis[k + 1] - axis[k] } else { 0.0 };
    left.max(right)
}

/// Maximum-likelihood position over the grid, then refined around the incumbent.
pub fn ml_estimate(model: &ForwardModel, block: &ReceivedBlock, grid: &SearchGrid) -> Result<UePosition> {
    let table = GridTable::new(model, grid)?;
    ml_estimate_with(model, block, grid, &table)
}

/// [`ml_estimate`] with a precomputed coarse table.
pub fn ml_estimate_with(
    model: &ForwardModel,
    block: &ReceivedBlock,
    grid: &SearchGrid,
    table: &GridTable,
) -> Result<UePosition> {
    if table.nodes.is_empty() {
        return Err(DmaError::config("grid", "search grid is empty"));
    }
    let mut best = table.nodes[0];
    let mut best_val = f64::INFINITY;
    for (node, g) in table.nodes.iter().zip(&table.gains) {
        let val = ml_residual(block, *g);
        if val < best_val {
            best_val = val;
            best = *node;
        }
    }

    let axes = [&grid.r_axis, &grid.theta_axis, &grid.phi_axis];
    let steps: Vec<f64> = (0..3).map(|d| local_step(axes[d], best[d])).collect();
    let per_side = (1.0 / grid.refine_shrink).round().max(1.0) as i64;
    for round in 1..=grid.refine_rounds {
        let spacing: Vec<f64> = steps.iter().map(|s| s * grid.refine_shrink.powi(round as i32)).collect();
        let local: Vec<Vec<f64>> = (0..3)
            .map(|d| {
                let (lo, hi) = (axes[d][0], *axes[d].last().unwrap());
                if spacing[d] == 0.0 {
                    return vec![best[d]];
                }
                (-per_side..=per_side)
                    .map(|k| best[d] + k as f64 * spacing[d])
                    .filter(|x| *x >= lo && *x <= hi)
                    .collect()
            })
            .collect();
        let center = best;
        for &r in &local[0] {
            for &t in &local[1] {
                for &p in &local[2] {
                    if [r, t, p] == center {
                        continue;
                    }
                    let val = ml_residual(block, model.gain(r, t, p));
                    if val < best_val {
                        best_val = val;
                        best = [r, t, p];
                    }
                }
            }
        }
    }
    UePosition::new(best[0], best[1], best[2])
}

/// Squared Cartesian distance between two polar positions, by direct differencing.
pub fn cartesian_error_sq(a: &UePosition, b: &UePosition) -> f64 {
    let (p, q) = (a.cartesian(), b.cartesian());
    (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)
}

/// Same quantity through the law of cosines on the polar coordinates.
pub fn cartesian_error_sq_polar(a: &UePosition, b: &UePosition) -> f64 {
    let cos_angle = a.theta.sin() * b.theta.sin() * (a.phi - b.phi).cos() + a.theta.cos() * b.theta.cos();
    (a.r * a.r + b.r * b.r - 2.0 * a.r * b.r * cos_angle).max(0.0)
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Everything needed to simulate one receiver at one user position.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub panel: PanelConfig,
    pub ue: UePosition,
    pub profile: RadiationProfile,
    pub pilots: PilotConfig,
    pub noise: NoiseModel,
}

/// A designed receiver with its deployed hardware response.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub solution: BfSolution,
    pub panel: PanelConfig,
    pub model: ForwardModel,
}

impl Receiver {
    /// Design `arch` for the user at `ue` on the panel derived from `template`.
    pub fn design(
        arch: Architecture,
        template: &PanelConfig,
        ue: &UePosition,
        profile: &RadiationProfile,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let panel = arch.panel(template);
        panel.validate()?;
        let circuit = match arch {
            Architecture::DmaOrder1 | Architecture::DmaOrder2 => Some(Circuit::build(&panel)?),
            _ => None,
        };
        let a = design_matrix(&channel_jacobian(ue, &panel, profile));
        let solution = design_architecture(arch, &panel, circuit.as_ref(), &a, opts)?;
        let hw = hardware_beamformer(arch, &panel, circuit.as_ref(), &solution.phases)?;
        let vtilde = hw.matrix.adjoint() * &solution.v;
        let model = ForwardModel::new(panel.clone(), *profile, vtilde)?;
        Ok(Self { solution, panel, model })
    }

    /// Position error bound of the deployed hardware over `unknown`.
    pub fn bound(
        &self,
        ue: &UePosition,
        pilots: &PilotConfig,
        noise: &NoiseModel,
        unknown: &[Param],
    ) -> Result<Bound> {
        let jac = channel_jacobian(ue, &self.panel, &self.model.profile);
        // the hardware enters only through ṽ, so an identity analog stage with v = ṽ is equivalent
        let n = self.panel.n_elements();
        let eye = crate::circuit::AnalogBeamformer {
            matrix: nalgebra::DMatrix::identity(n, n),
            order: 0,
        };
        fim(&jac, &eye, &self.model.vtilde, pilots, noise)?.peb_known(unknown)
    }
}

/// One row of a bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PebRow {
    pub variant: Architecture,
    pub n_rf: usize,
    pub n_e: usize,
    pub p_max_dbm: f64,
    pub peb: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Bound for every `(N_RF, architecture)` pair, in axis-major order.
#[allow(clippy::too_many_arguments)]
pub fn run_peb_sweep(
    template: &PanelConfig,
    nrf_axis: &[usize],
    variants: &[Architecture],
    ue: &UePosition,
    profile: &RadiationProfile,
    pilots: &PilotConfig,
    noise: &NoiseModel,
    unknown: &[Param],
    opts: &SolverOptions,
) -> Result<Vec<PebRow>> {
    if nrf_axis.is_empty() || variants.is_empty() {
        return Err(DmaError::config("experiment", "sweep axis is empty"));
    }
    let jobs: Vec<(usize, Architecture)> = nrf_axis
        .iter()
        .flat_map(|&n| variants.iter().map(move |&v| (n, v)))
        .collect();
    let p_dbm = 10.0 * (pilots.p_max * 1e3).log10();
    jobs.par_iter()
        .map(|&(n_rf, arch)| {
            let mut panel = template.clone();
            panel.n_rf = n_rf;
            let rx = Receiver::design(arch, &panel, ue, profile, opts)?;
            let peb = peb_or_infinity(rx.bound(ue, pilots, noise, unknown))?;
            Ok(PebRow {
                variant: arch,
                n_rf,
                n_e: panel.n_e,
                p_max_dbm: p_dbm,
                peb,
                residual: rx.solution.residual,
                iterations: rx.solution.iterations,
            })
        })
        .collect()
}

/// Monte Carlo accuracy at one power level.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseSummary {
    pub variant: Architecture,
    pub n_rf: usize,
    pub n_e: usize,
    pub p_max_dbm: f64,
    pub trials: usize,
    /// Per-coordinate RMSE of `(r, θ, φ)`.
    pub rmse_r: f64,
    pub rmse_theta: f64,
    pub rmse_phi: f64,
    /// `√E‖ζ̂ − ζ‖²`.
    pub rmse_param: f64,
    pub rmse_cartesian: f64,
    pub peb: f64,
}

/// RMSE curve over `pmax_axis_dbm` for one receiver and user position.
#[allow(clippy::too_many_arguments)]
pub fn run_rmse(
    arch: Architecture,
    template: &PanelConfig,
    ue: &UePosition,
    profile: &RadiationProfile,
    t_pilots: usize,
    pmax_axis_dbm: &[f64],
    noise: &NoiseModel,
    grid: &SearchGrid,
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<RmseSummary>> {
    if trials == 0 {
        return Err(DmaError::config("trials", "must be at least 1"));
    }
    if pmax_axis_dbm.is_empty() {
        return Err(DmaError::config("p_max_dbm", "power axis is empty"));
    }
    // the design objective does not depend on the pilot power, so one design serves the whole curve
    let rx = Receiver::design(arch, template, ue, profile, opts)?;
    let table = GridTable::new(&rx.model, grid)?;
    let unknown = grid.unknowns();
    pmax_axis_dbm
        .iter()
        .map(|&p_dbm| {
            let pilots = PilotConfig::from_dbm(t_pilots, p_dbm)?;
            let estimates: Vec<UePosition> = (0..trials as u64)
                .into_par_iter()
                .map(|t| {
                    let block = synthesize(&rx.model, ue, &pilots, noise, seed, t);
                    ml_estimate_with(&rx.model, &block, grid, &table)
                })
                .collect::<Result<_>>()?;
            let mut sums = [KahanSum::default(); 4];
            for est in &estimates {
                let d = [est.r - ue.r, est.theta - ue.theta, est.phi - ue.phi];
                for k in 0..3 {
                    sums[k].add(d[k] * d[k]);
                }
                sums[3].add(cartesian_error_sq(est, ue));
            }
            let n = trials as f64;
            let (mr, mt, mp) = (sums[0].value() / n, sums[1].value() / n, sums[2].value() / n);
            Ok(RmseSummary {
                variant: arch,
                n_rf: rx.panel.n_rf,
                n_e: rx.panel.n_e,
                p_max_dbm: p_dbm,
                trials,
                rmse_r: mr.sqrt(),
                rmse_theta: mt.sqrt(),
                rmse_phi: mp.sqrt(),
                rmse_param: (mr + mt + mp).sqrt(),
                rmse_cartesian: (sums[3].value() / n).sqrt(),
                peb: peb_or_infinity(rx.bound(ue, &pilots, noise, &unknown))?,
            })
        })
        .collect()
}
