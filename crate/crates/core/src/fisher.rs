//! Fisher information, Cramér-Rao and position error bounds for `ζ = (r, θ, φ)`.
//!
//! With constant-modulus pilots `s(t) = √P_max` the combined observation
//! `y(t) = v^H W h^H s(t) + v^H W n(t)` carries one complex number per
//! sample, so
//!
//! ```text
//! I_ij = 2 T P_max / (σ² v^H W W^H v) · Re{ (v^H W g_i) (v^H W g_j)^* },  g_i = ∂h^H/∂ζ_i
//! ```
//!
//! This matrix has rank at most two. When all three coordinates are unknown
//! it is singular and [`peb`] reports that instead of regularizing. Bounds
//! over a subset of coordinates, with the rest known, come from
//! [`Fim::peb_known`].

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelJacobian;
use crate::circuit::AnalogBeamformer;
use crate::error::{DmaError, Result};

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Pilot block: `T` transmissions at power `P_max` (watts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub t_pilots: usize,
    pub p_max: f64,
}

impl PilotConfig {
    pub fn new(t_pilots: usize, p_max: f64) -> Result<Self> {
        if t_pilots == 0 {
            return Err(DmaError::config("t_pilots", "must be at least 1"));
        }
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(DmaError::config("p_max", format!("must be > 0 W, got {p_max}")));
        }
        Ok(Self { t_pilots, p_max })
    }

    pub fn from_dbm(t_pilots: usize, p_max_dbm: f64) -> Result<Self> {
        Self::new(t_pilots, dbm_to_watts(p_max_dbm))
    }
}

/// AWGN variance per receive element, watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(DmaError::config("sigma2", format!("must be > 0 W, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }

    /// Noise-free receiver, for exact round-trip checks. Not usable in a bound.
    pub fn silent() -> Self {
        Self { sigma2: 0.0 }
    }

    /// Thermal floor `−174 dBm/Hz + 10 log10(B)`.
    pub fn thermal(bandwidth_hz: f64) -> Result<Self> {
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(DmaError::config("bandwidth_hz", "must be > 0"));
        }
        Self::new(dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10()))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Coordinates of `ζ`, in FIM order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    Range = 0,
    Elevation = 1,
    Azimuth = 2,
}

/// 3×3 Fisher information over `(r, θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fim {
    pub matrix: Matrix3<f64>,
}

/// CRB, PEB and the spectrum they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub crb: f64,
    pub peb: f64,
    /// Eigenvalues of the information matrix, ascending.
    pub eigenvalues: Vec<f64>,
    /// Condition number of the diagonally scaled information matrix.
    pub condition: f64,
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Bound from an information matrix. Rank is judged on the unit-free
/// correlation form `D^{-1/2} I D^{-1/2}` so that mixing meters and radians
/// does not masquerade as singularity.
fn crb_of(info: DMatrix<f64>) -> Result<Bound> {
    let k = info.nrows();
    let diag: Vec<f64> = (0..k).map(|i| info[(i, i)]).collect();
    if diag.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(DmaError::SingularInformation {
            eigenvalues: sorted_eigenvalues(info),
        });
    }
    let scale: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let corr = DMatrix::from_fn(k, k, |i, j| info[(i, j)] / (scale[i] * scale[j]));
    let eig = SymmetricEigen::new(corr);
    let largest = eig.eigenvalues.max();
    let smallest = eig.eigenvalues.min();
    if !(largest > 0.0) || smallest <= SINGULAR_RTOL * largest {
        return Err(DmaError::SingularInformation {
            eigenvalues: sorted_eigenvalues(info),
        });
    }
    // diag of C^{-1} = Σ_m V_im² / λ_m
    let crb: f64 = (0..k)
        .map(|i| {
            let ci: f64 = (0..k).map(|m| eig.eigenvectors[(i, m)].powi(2) / eig.eigenvalues[m]).sum();
            ci / diag[i]
        })
        .sum();
    Ok(Bound {
        crb,
        peb: crb.sqrt(),
        eigenvalues: sorted_eigenvalues(info),
        condition: largest / smallest,
    })
}

impl Fim {
    pub fn new(matrix: Matrix3<f64>) -> Self {
        Self { matrix }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Information over the unknown coordinates when the others are known.
    pub fn restricted(&self, unknown: &[Param]) -> DMatrix<f64> {
        let idx: Vec<usize> = unknown.iter().map(|p| *p as usize).collect();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.matrix[(idx[a], idx[b])])
    }

    /// Bound over `unknown` with every other coordinate known.
    pub fn peb_known(&self, unknown: &[Param]) -> Result<Bound> {
        crb_of(self.restricted(unknown))
    }
}

/// Fisher information of the combined pilot block.
pub fn fim(
    jac: &ChannelJacobian,
    w: &AnalogBeamformer,
    v: &DVector<Complex64>,
    pilots: &PilotConfig,
    noise: &NoiseModel,
) -> Result<Fim> {
    if !(noise.sigma2 > 0.0) {
        return Err(DmaError::Domain("Fisher information needs a positive noise variance".into()));
    }
    // effective combiner ṽ = W^H v; v^H W x = ṽ^H x
    let vt = w.matrix.adjoint() * v;
    let power = vt.norm_squared();
    if !(power > 0.0) {
        return Err(DmaError::DegenerateCombiner);
    }
    let alpha: Vec<Complex64> = (0..3).map(|k| vt.dotc(&jac.conj_row(k))).collect();
    let scale = 2.0 * pilots.t_pilots as f64 * pilots.p_max / (noise.sigma2 * power);
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let e = scale * (alpha[i] * alpha[j].conj()).re;
            m[(i, j)] = e;
            m[(j, i)] = e;
        }
    }
    Ok(Fim::new(m))
}

/// `√Tr{I^{-1}}` over all three coordinates.
pub fn peb(fim: &Fim) -> Result<Bound> {
    crb_of(DMatrix::from_fn(3, 3, |i, j| fim.matrix[(i, j)]))
}

/// PEB of a bound computation, with a singular information matrix mapped to
/// `+∞` (the coordinates are not locally identifiable).
pub fn peb_or_infinity(bound: Result<Bound>) -> Result<f64> {
    match bound {
        Ok(b) => Ok(b.peb),
        Err(DmaError::SingularInformation { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn fim_trace_objective(fim: &Fim) -> f64 {
    fim.trace()
}

/// `A = Σ_i g_i g_i^H`, stored through its N × k factor `[g_1 … g_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    factor: DMatrix<Complex64>,
}

impl DesignMatrix {
    pub fn from_factor(factor: DMatrix<Complex64>) -> Self {
        Self { factor }
    }

    pub fn factor(&self) -> &DMatrix<Complex64> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Explicit N × N matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        &self.factor * self.factor.adjoint()
    }

    pub fn trace(&self) -> f64 {
        self.factor.norm_squared()
    }

    /// `x^H A x / x^H x`.
    pub fn rayleigh_quotient(&self, x: &DVector<Complex64>) -> f64 {
        let proj = self.factor.adjoint() * x;
        proj.norm_squared() / x.norm_squared()
    }
}

pub fn design_matrix(jac: &ChannelJacobian) -> DesignMatrix {
    let n = jac.0.ncols();
    let factor = DMatrix::from_fn(n, 3, |e, k| jac.0[(k, e)].conj());
    DesignMatrix::from_factor(factor)
}

/// Restrict the design to a subset of coordinates.
pub fn design_matrix_for(jac: &ChannelJacobian, unknown: &[Param]) -> DesignMatrix {
    let n = jac.0.ncols();
    let factor = DMatrix::from_fn(n, unknown.len(), |e, k| jac.0[(unknown[k] as usize, e)].conj());
    DesignMatrix::from_factor(factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_peb() {
        let f = Fim::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(4.0, 1.0, 0.25)));
        let b = peb(&f).unwrap();
        assert!((b.peb - 5.25f64.sqrt()).abs() < 1e-14);
        assert!((b.crb - 5.25).abs() < 1e-14);
        let id = peb(&Fim::new(Matrix3::identity())).unwrap();
        assert!((id.peb - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_fim_is_reported() {
        let v = nalgebra::Vector3::new(1.0, 2.0, -0.5);
        let f = Fim::new(v * v.transpose());
        assert!(matches!(peb(&f), Err(DmaError::SingularInformation { .. })));
    }

    #[test]
    fn trace_objective() {
        let f = Fim::new(Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 3.0, 7.0)));
        assert_eq!(fim_trace_objective(&f), 12.0);
    }

    #[test]
    fn known_coordinate_restriction() {
        let m = Matrix3::new(4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0);
        let f = Fim::new(m);
        let r = f.restricted(&[Param::Range, Param::Azimuth]);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[4.0, 0.5, 0.5, 2.0]));
        let b = f.peb_known(&[Param::Range, Param::Azimuth]).unwrap();
        let det = 4.0 * 2.0 - 0.25;
        assert!((b.crb - (2.0 + 4.0) / det).abs() < 1e-14);
    }

    #[test]
    fn thermal_noise_floor() {
        let n = NoiseModel::thermal(150e3).unwrap();
        let dbm = -174.0 + 10.0 * 150e3f64.log10();
        assert!((n.sigma2 - 10f64.powf(dbm / 10.0) / 1000.0).abs() < 1e-30);
        assert!(NoiseModel::new(0.0).is_err());
    }

    #[test]
    fn pilot_validation() {
        assert!(PilotConfig::new(0, 1.0).is_err());
        assert!(PilotConfig::new(10, 0.0).is_err());
        let p = PilotConfig::from_dbm(200, -12.0).unwrap();
        assert!((p.p_max - 6.309_573_444_801_93e-5).abs() < 1e-17);
    }

    #[test]
    fn design_matrix_trace_and_rank() {
        let f = DMatrix::from_fn(6, 3, |r, c| Complex64::new((r * 3 + c) as f64 * 0.1, (r as f64 - c as f64) * 0.2));
        let d = DesignMatrix::from_factor(f.clone());
        let a = d.matrix();
        let tr: f64 = a.diagonal().iter().map(|z| z.re).sum();
        assert!((tr - d.trace()).abs() < 1e-12);
        let ev = SymmetricEigen::new(a).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!(ev[3].abs() < 1e-10 * ev[0]);
    }
}
