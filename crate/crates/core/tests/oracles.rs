//! Comparisons against reference values computed independently with
//! numpy/mpmath by `tests/oracle/generate.py`.

use dmaloc::channel::{channel, channel_jacobian, RadiationProfile, UePosition};
use dmaloc::circuit::{approx_error, green_free_space, green_waveguide, Circuit, TerminationState};
use dmaloc::fisher::{design_matrix, fim, NoiseModel, Param, PilotConfig};
use dmaloc::geometry::{GuideCoord, PanelConfig, Position3D};
use dmaloc::optimizer::{design_architecture, digital_ls, rayleigh_opt, Architecture, SolverOptions};
use nalgebra::DVector;
use num_complex::Complex64;
use serde_json::Value;

fn oracle() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/oracle.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn c(v: &Value) -> Complex64 {
    Complex64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap())
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn cvec(v: &Value) -> DVector<Complex64> {
    DVector::from_vec(v.as_array().unwrap().iter().map(c).collect())
}

fn small_panel() -> PanelConfig {
    PanelConfig::new(2, 8, 28e9)
}

fn ue0() -> UePosition {
    UePosition::from_degrees(5.0, 30.0, 90.0).unwrap()
}

#[test]
fn free_space_kernel_matches_reference() {
    let o = oracle();
    for s in o["green_free_space"].as_array().unwrap() {
        let p = Position3D::new(f(&s["p"][0]), f(&s["p"][1]), f(&s["p"][2]));
        let q = Position3D::new(f(&s["q"][0]), f(&s["q"][1]), f(&s["q"][2]));
        let g = green_free_space(&p, &q, f(&s["k0"])).unwrap();
        assert!(rel(g, c(&s["value"])) < 1e-12, "{g} vs {:?}", s["value"]);
    }
}

#[test]
fn waveguide_kernel_matches_reference() {
    let o = oracle();
    let cfg = PanelConfig::new(4, 32, 28e9);
    let consts = cfg.constants();
    for s in o["green_waveguide"]["samples"].as_array().unwrap() {
        let p = GuideCoord { along: f(&s["xi"]), across: cfg.wg_a / 2.0 };
        let q = GuideCoord { along: f(&s["xn"]), across: cfg.wg_a / 2.0 };
        let g = green_waveguide(p, q, &consts, &cfg).unwrap();
        assert!(rel(g, c(&s["value"])) < 1e-10, "{g} vs {:?}", s["value"]);
    }
}

#[test]
fn circuit_entries_match_reference() {
    let o = oracle();
    let circuit = Circuit::build(&small_panel()).unwrap();
    for s in o["circuit"]["propagation"].as_array().unwrap() {
        let (n, i) = (s["n"].as_u64().unwrap() as usize, s["i"].as_u64().unwrap() as usize);
        assert!(rel(circuit.propagation.0[(n, i)], c(&s["value"])) < 1e-10);
    }
    for s in o["circuit"]["coupling"].as_array().unwrap() {
        let (n, m) = (s["n"].as_u64().unwrap() as usize, s["m"].as_u64().unwrap() as usize);
        assert!(rel(circuit.coupling.0[(n, m)], c(&s["value"])) < 1e-10, "entry ({n},{m})");
    }
}

#[test]
fn truncation_errors_match_reference() {
    let o = oracle();
    let circuit = Circuit::build(&small_panel()).unwrap();
    let phases: Vec<f64> = o["approx_error"]["phases"].as_array().unwrap().iter().map(f).collect();
    let state = TerminationState::new(phases).unwrap();
    for (k, e) in o["approx_error"]["errors"].as_array().unwrap().iter().enumerate() {
        let got = approx_error(&circuit.coupling, &state, k + 1).unwrap();
        assert!((got - f(e)).abs() <= 1e-8 * f(e), "order {}: {got} vs {e}", k + 1);
    }
    let w = circuit.beamformer(&state, 0).unwrap();
    assert!(rel(w.matrix[(0, 0)], c(&o["approx_error"]["exact_bf_00"])) < 1e-10);
    assert!(rel(w.matrix[(1, 13)], c(&o["approx_error"]["exact_bf_1_13"])) < 1e-10);
}

#[test]
fn channel_and_jacobian_match_high_precision_reference() {
    let o = oracle();
    let cfg = small_panel();
    for case in o["channel"]["cases"].as_array().unwrap() {
        let ue = UePosition::from_degrees(f(&case["r"]), f(&case["theta_deg"]), f(&case["phi_deg"])).unwrap();
        let h = channel(&ue, &cfg, &RadiationProfile::Isotropic);
        let href = cvec(&case["h"]);
        assert!((&h.0 - &href).norm() / href.norm() < 1e-12);
        let jac = channel_jacobian(&ue, &cfg, &RadiationProfile::Isotropic);
        for k in 0..3 {
            let row = cvec(&case["jac"][k]);
            let err = (jac.row(k) - &row).norm();
            // the azimuth row is exactly zero on the first strip and tiny at broadside
            assert!(err <= 1e-9 * row.norm().max(1e-12), "row {k}: {err}");
        }
    }
}

#[test]
fn rayleigh_target_and_combiner_match_reference() {
    let o = oracle();
    let d = &o["design_2x8"];
    let cfg = small_panel();
    let jac = channel_jacobian(&ue0(), &cfg, &RadiationProfile::Isotropic);
    let a = design_matrix(&jac);
    let (vt, s1) = rayleigh_opt(&a).unwrap();
    assert!((s1 - f(&d["lambda_max"])).abs() <= 1e-9 * s1);
    let vt_ref = cvec(&d["vtilde_opt"]);
    assert!((&vt - &vt_ref).norm() <= 1e-8 * vt_ref.norm());

    let circuit = Circuit::build(&cfg).unwrap();
    let zeros = TerminationState::zeros(16);
    let w1 = circuit.beamformer(&zeros, 1).unwrap();
    let v = digital_ls(&w1, &vt).unwrap();
    let v_ref = cvec(&d["v_order1_zero_phase"]);
    assert!((&v - &v_ref).norm() <= 1e-8 * v_ref.norm());

    let exact = circuit.beamformer(&zeros, 0).unwrap();
    let pilots = PilotConfig::from_dbm(200, -12.0).unwrap();
    let noise = NoiseModel::thermal(150e3).unwrap();
    let info = fim(&jac, &exact, &v, &pilots, &noise).unwrap();
    let fim_ref = &d["fim_exact_zero_phase"];
    let scale = info.matrix.abs().max();
    for i in 0..3 {
        for j in 0..3 {
            assert!((info.matrix[(i, j)] - f(&fim_ref[i][j])).abs() <= 1e-8 * scale);
        }
    }
    let b = info.peb_known(&[Param::Range, Param::Azimuth]).unwrap();
    assert!((b.peb - f(&d["peb_r_phi"])).abs() <= 1e-6 * b.peb);
}

#[test]
fn order2_design_run_matches_reference() {
    let o = oracle();
    let d = &o["design_order2_2x8"];
    let cfg = small_panel();
    let circuit = Circuit::build(&cfg).unwrap();
    let a = design_matrix(&channel_jacobian(&ue0(), &cfg, &RadiationProfile::Isotropic));
    let opts = SolverOptions {
        order: 2,
        max_iters: d["max_iters"].as_u64().unwrap() as usize,
        rel_tol: 1e-15,
        grid_check: false,
    };
    let sol = design_architecture(Architecture::DmaOrder2, &cfg, Some(&circuit), &a, &opts).unwrap();
    let hist: Vec<f64> = d["residual_history"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(sol.residual_history.len(), hist.len());
    for (got, want) in sol.residual_history.iter().zip(&hist) {
        assert!((got - want).abs() <= 1e-7 * want, "{got} vs {want}");
    }
    let phases: Vec<f64> = d["phases"].as_array().unwrap().iter().map(f).collect();
    for (got, want) in sol.phases.iter().zip(&phases) {
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
    assert!((sol.residual - f(&d["residual"])).abs() <= 1e-7 * sol.residual);
}
