//! Closed-form per-element phase updates under the Lorentzian constraint.
//!
//! Element `n` of the effective combiner `W^H v` is `w_n^* a_n` under the
//! first-order model and `w_n^* (1 − [W_MC^H]_{nn} w_n^*) a_n − w_n^* b`
//! under the second-order one. Each update picks the admissible phase that
//! brings that entry closest to `[ṽ_opt]_n`.
//!
//! Objectives are always evaluated in their norm form. Candidate sets
//! contain the closed-form critical points plus the exact stationary points
//! of the objective on `[lo, π/2]`, so the returned phase is a global
//! minimizer over that interval.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::circuit::{lorentzian, CouplingMatrix};

/// Points in the coarse fallback grid.
const FALLBACK_GRID: usize = 64;
/// Points in the optional dense verification grid.
pub const DENSE_GRID: usize = 1 << 14;

/// `|ṽ_n − w(φ)^* a_n|²`.
pub fn order1_objective(vt: Complex64, a: Complex64, phi: f64) -> f64 {
    (vt - lorentzian(phi).conj() * a).norm_sqr()
}

/// `|ṽ_n − w^* (1 − m w^*) a_n + w^* b|²` with `m = [W_MC^H]_{nn}`.
pub fn order2_objective(vt: Complex64, a: Complex64, m: Complex64, b: Complex64, phi: f64) -> f64 {
    let u = lorentzian(phi).conj();
    (vt - u * (1.0 - m * u) * a + u * b).norm_sqr()
}

/// Evenly spaced grid on `[lo, hi]` including both ends.
pub fn phase_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(move |k| lo + step * k as f64)
}

/// Lowest objective wins; near-ties go to the smallest `|φ|`.
fn select(candidates: impl IntoIterator<Item = f64>, f: impl Fn(f64) -> f64) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for phi in candidates {
        if !phi.is_finite() {
            continue;
        }
        let val = f(phi);
        best = match best {
            None => Some((phi, val)),
            Some((bp, bv)) => {
                let tol = 1e-14 * bv.abs().max(val.abs()).max(f64::MIN_POSITIVE);
                if val < bv - tol || ((val - bv).abs() <= tol && phi.abs() < bp.abs()) {
                    Some((phi, val))
                } else {
                    Some((bp, bv))
                }
            }
        };
    }
    best.map(|(p, _)| p).unwrap_or(0.0)
}

fn in_range(phi: f64, lo: f64) -> Option<f64> {
    (phi.is_finite() && phi >= lo && phi <= FRAC_PI_2).then_some(phi)
}

/// First-order phase update over `[−π/2, π/2]`.
pub fn phase_step_order1(vt: Complex64, a: Complex64) -> f64 {
    phase_step_order1_in(vt, a, -FRAC_PI_2)
}

/// First-order phase update over `[lo, π/2]`.
pub fn phase_step_order1_in(vt: Complex64, a: Complex64, lo: f64) -> f64 {
    if a == Complex64::new(0.0, 0.0) {
        return 0.0f64.max(lo);
    }
    let z = vt.conj() * a;
    let critical = (z.im / z.re).atan();
    // f1 = const − Re{z} cos φ − (Im{z} − |a|²/2) sin φ
    let stationary = ((z.im - 0.5 * a.norm_sqr()) / z.re).atan();
    let candidates = [Some(lo), in_range(critical, lo), in_range(stationary, lo), Some(FRAC_PI_2)];
    select(candidates.into_iter().flatten(), |p| order1_objective(vt, a, p))
}

/// First-order update over `[lo, π/2]`, optionally checked against the dense grid.
pub fn order1_update(vt: Complex64, a: Complex64, lo: f64, dense: bool) -> f64 {
    let phi = phase_step_order1_in(vt, a, lo);
    if !dense {
        return phi;
    }
    select(
        std::iter::once(phi).chain(phase_grid(lo, FRAC_PI_2, DENSE_GRID)),
        |p| order1_objective(vt, a, p),
    )
}

/// Real roots in `[lo, π/2]` of the derivative of a degree-2 trigonometric
/// polynomial given by its values at five equispaced phases.
fn trig_stationary_points(f: impl Fn(f64) -> f64, lo: f64) -> Vec<f64> {
    let nodes: Vec<f64> = (0..5).map(|m| 2.0 * PI * m as f64 / 5.0).collect();
    let vals: Vec<f64> = nodes.iter().map(|&p| f(p)).collect();
    let coef = |k: f64, trig: fn(f64) -> f64| -> f64 {
        0.4 * nodes.iter().zip(&vals).map(|(p, v)| v * trig(k * p)).sum::<f64>()
    };
    let (a1, b1) = (coef(1.0, f64::cos), coef(1.0, f64::sin));
    let (a2, b2) = (coef(2.0, f64::cos), coef(2.0, f64::sin));
    let deriv = |p: f64| -a1 * p.sin() + b1 * p.cos() - 2.0 * a2 * (2.0 * p).sin() + 2.0 * b2 * (2.0 * p).cos();
    let curv = |p: f64| -a1 * p.cos() - b1 * p.sin() - 4.0 * a2 * (2.0 * p).cos() - 4.0 * b2 * (2.0 * p).sin();

    // (1 + t²)² f'(φ) with t = tan(φ/2), highest power first
    let mut poly = vec![
        -b1 + 2.0 * b2,
        -2.0 * a1 + 8.0 * a2,
        -12.0 * b2,
        -2.0 * a1 - 8.0 * a2,
        b1 + 2.0 * b2,
    ];
    let scale = poly.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    while poly.len() > 1 && poly[0].abs() <= 1e-13 * scale {
        poly.remove(0);
    }
    let degree = poly.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for c in 0..degree {
        companion[(0, c)] = -poly[c + 1] / poly[0];
    }
    for r in 1..degree {
        companion[(r, r - 1)] = 1.0;
    }
    let roots: DVector<Complex64> = companion.complex_eigenvalues();
    let mut out = Vec::new();
    for t in roots.iter() {
        if t.im.abs() > 1e-6 * (1.0 + t.re.abs()) {
            continue;
        }
        let mut phi = 2.0 * t.re.atan();
        for _ in 0..4 {
            let c = curv(phi);
            if c == 0.0 {
                break;
            }
            let next = phi - deriv(phi) / c;
            if !next.is_finite() || (next - phi).abs() > 0.1 {
                break;
            }
            phi = next;
        }
        if let Some(p) = in_range(phi, lo) {
            out.push(p);
        }
    }
    out
}

/// Second-order phase update from the local quantities of element `n`:
/// `m = [W_MC^H]_{nn}`, the cross term `b` and `‖W_MC‖` for the degeneracy test.
pub fn order2_update(
    vt: Complex64,
    a: Complex64,
    m: Complex64,
    b: Complex64,
    coupling_norm: f64,
    lo: f64,
    dense: bool,
) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    if m == zero && b == zero {
        return phase_step_order1_in(vt, a, lo);
    }
    let f = |p: f64| order2_objective(vt, a, m, b, p);
    let mut candidates = vec![lo, FRAC_PI_2];
    let wnn = m.conj();
    let degenerate = wnn.norm() < 1e-14 * coupling_norm || a == zero;
    if !degenerate {
        // closed-form critical weights x_i, mapped to phases through e^{jφ} = 2x − j
        let (ac, bc) = (a.conj(), b.conj());
        let disc = (ac * ac - 2.0 * ac * bc - 4.0 * vt.conj() * wnn * ac + bc * bc).sqrt();
        let denom = 2.0 * wnn * ac;
        for x in [(ac - bc + disc) / denom, (ac - bc - disc) / denom, (ac - bc) / denom] {
            if let Some(p) = in_range(((x.im - 0.5) / x.re).atan(), lo) {
                candidates.push(p);
            }
        }
    } else {
        candidates.push(phase_step_order1_in(vt, a, lo));
        candidates.extend(phase_grid(lo, FRAC_PI_2, FALLBACK_GRID));
    }
    candidates.extend(trig_stationary_points(f, lo));
    if dense {
        candidates.extend(phase_grid(lo, FRAC_PI_2, DENSE_GRID));
    }
    select(candidates, f)
}

/// Second-order phase update of element `n` given the current weights `w`
/// and `a = P_SA v`, over `[−π/2, π/2]`.
pub fn phase_step_order2(
    vtilde_opt: &DVector<Complex64>,
    a: &DVector<Complex64>,
    w_mc: &CouplingMatrix,
    weights: &[Complex64],
    n: usize,
) -> f64 {
    let mc = &w_mc.0;
    // b = Σ_{j≠n} [W_MC^H]_{n,j} w_j^* a_j
    let b: Complex64 = (0..weights.len())
        .filter(|&j| j != n)
        .map(|j| mc[(j, n)].conj() * weights[j].conj() * a[j])
        .sum();
    order2_update(vtilde_opt[n], a[n], mc[(n, n)].conj(), b, mc.norm(), -FRAC_PI_2, false)
}

/// Unit-modulus phase update: the weight `e^{jφ}` whose conjugate aligns `a_n` with `ṽ_n`.
pub fn phase_step_unit_modulus(vt: Complex64, a: Complex64) -> f64 {
    if a == Complex64::new(0.0, 0.0) || vt == Complex64::new(0.0, 0.0) {
        return 0.0;
    }
    (a * vt.conj()).arg()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_drive_returns_zero() {
        assert_eq!(phase_step_order1(c(0.3, -1.0), c(0.0, 0.0)), 0.0);
    }

    #[test]
    fn real_product_keeps_zero_candidate() {
        let (vt, a) = (c(1.0, 0.0), c(0.4, 0.0));
        let phi = phase_step_order1(vt, a);
        let best = phase_grid(-FRAC_PI_2, FRAC_PI_2, DENSE_GRID)
            .map(|p| order1_objective(vt, a, p))
            .fold(f64::INFINITY, f64::min);
        assert!(order1_objective(vt, a, phi) <= best + 1e-12);
    }

    #[test]
    fn lower_bound_is_respected() {
        let lo = -FRAC_PI_2 + 1e-6;
        let phi = phase_step_order1_in(c(0.0, -1.0), c(1.0, 0.0), lo);
        assert!(phi >= lo);
    }

    #[test]
    fn order2_without_coupling_matches_order1() {
        let (vt, a) = (c(0.7, -0.2), c(-0.3, 0.9));
        let p2 = order2_update(vt, a, c(0.0, 0.0), c(0.0, 0.0), 0.0, -FRAC_PI_2, false);
        assert_eq!(p2, phase_step_order1(vt, a));
    }

    #[test]
    fn stationary_points_of_known_polynomial() {
        // f = cos(2φ) has stationary points at 0 and ±π/2
        let pts = trig_stationary_points(|p| (2.0 * p).cos(), -FRAC_PI_2);
        assert!(pts.iter().any(|p| p.abs() < 1e-12));
    }

    #[test]
    fn unit_modulus_alignment_is_exact() {
        let (vt, a) = (c(0.3, 0.8), c(-1.1, 0.2));
        let phi = phase_step_unit_modulus(vt, a);
        let res = (vt - Complex64::from_polar(1.0, phi).conj() * a).norm();
        assert!((res - (vt.norm() - a.norm()).abs()).abs() < 1e-14);
    }
}
