//! Hand-derived oracles, written independently of the library code.

use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;
use smmc_core::control::{smmc_control, SurfaceSpec};
use smmc_core::multimodel::{SubModel, ValidityVector};
use smmc_core::plant::plant_derivative;
use smmc_core::{ControllerConfig, ControllerMode, Matrix, MachineParams, Plant, PlantInput, PlantState, SwitchFn};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Substitutes the machine equations term by term, coefficients recomputed
/// from the raw inductances and resistances.
fn substitution(params: &MachineParams, x: &PlantState, u: &PlantInput) -> [f64; 5] {
    let MachineParams { rs, rr, ls, lr, lm, j, p, fv } = *params;
    let p = p as f64;
    let sigma = 1.0 - lm * lm / (ls * lr);
    let g1 = (rs * lr * lr + rr * lm * lm) / (sigma * ls * lr * lr);
    let g2 = rr * lm / (sigma * ls * lr * lr);
    let g3 = p * lm / (sigma * ls * lr);
    let g4 = 1.0 / (sigma * ls);
    let a = rr * lm / lr;
    let b = rr / lr;
    let te = p * lm / lr * (x.phi_dr * x.i_qs - x.phi_qr * x.i_ds);
    [
        a * x.i_ds - b * x.phi_dr - p * x.omega * x.phi_qr,
        a * x.i_qs + p * x.omega * x.phi_dr - b * x.phi_qr,
        g4 * u.v_ds - g1 * x.i_ds - g2 * x.phi_dr + g3 * x.omega * x.phi_qr,
        g4 * u.v_qs - g1 * x.i_qs - g2 * x.phi_qr - g3 * x.omega * x.phi_dr,
        (te - u.c_l - fv * x.omega) / j,
    ]
}

#[test]
fn plant_derivative_matches_substitution_at_random_points() {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for _ in 0..10 {
        let params = MachineParams {
            rs: rng.gen_range(0.1..3.0),
            rr: rng.gen_range(0.1..3.0),
            ls: rng.gen_range(0.05..0.5),
            lr: rng.gen_range(0.05..0.5),
            lm: 0.0,
            j: rng.gen_range(0.01..1.0),
            p: rng.gen_range(1..5),
            fv: rng.gen_range(0.0..0.01),
        };
        let params = MachineParams { lm: rng.gen_range(0.1..0.95) * (params.ls * params.lr).sqrt(), ..params };
        let x = PlantState {
            phi_dr: rng.gen_range(-1.0..1.0),
            phi_qr: rng.gen_range(-1.0..1.0),
            i_ds: rng.gen_range(-20.0..20.0),
            i_qs: rng.gen_range(-20.0..20.0),
            omega: rng.gen_range(-200.0..200.0),
        };
        let u = PlantInput { v_ds: rng.gen_range(-100.0..100.0), v_qs: rng.gen_range(-100.0..100.0), c_l: rng.gen_range(-10.0..10.0) };
        let plant = Plant::canonical(params).unwrap();
        let got = plant_derivative(&x, &u, &plant).unwrap().to_array();
        let want = substitution(&params, &x, &u);
        for i in 0..5 {
            assert!(rel_close(got[i], want[i], 1e-12), "component {i}: {} vs {}", got[i], want[i]);
        }
    }
}

/// Two 2-state sub-models sharing `B = (0, 1)ᵀ` and `C = (1, 1)`:
///
/// ```text
/// A1 = [[0, 1], [0, 0]]     A2 = [[0, 1], [-2, -3]]
/// x  = (1, 0.5)             x̃  = (0.4, 0.2)
/// C·B = 1
/// s1 = s2 = 0.4 + 0.2 = 0.6
/// C·A1 = (0, 1)   C·A1·x = 0.5   u_eq1 = -0.5
/// C·A2 = (-2, -2) C·A2·x = -3    u_eq2 = 3
/// sat(0.6 / 2) = 0.3, λ = 1
/// u_s1 = -2·0.3 = -0.6           u_s2 = -4·0.3 = -1.2
/// u1 = -1.1                      u2 = 1.8
/// v = (0.25, 0.75)
/// u_g = -0.275 + 1.35 = 1.075    S = 0.6
/// ```
#[test]
fn two_model_smmc_hand_trace() {
    let b = Matrix::column(&[0.0, 1.0]);
    let c = [SurfaceSpec::new(vec![1.0, 1.0]).unwrap()];
    let m1 = SubModel::from_matrices(0, 0.0, Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), b.clone(), &c, 2.0).unwrap();
    let m2 = SubModel::from_matrices(1, 1.0, Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]), b, &c, 4.0).unwrap();
    let mut cfg = ControllerConfig::new(ControllerMode::Smmc);
    cfg.switch_fn = SwitchFn::Saturation;
    cfg.lambda = 1.0;
    cfg.omega_layer = 2.0;
    let v = ValidityVector::new(vec![0.25, 0.75]).unwrap();
    let out = smmc_control(&[m1, m2], &v, &[1.0, 0.5], &[0.4, 0.2], &cfg).unwrap();

    let expect = [(0.6, -0.5, -0.6, -1.1), (0.6, 3.0, -1.2, 1.8)];
    for (rec, (s, ueq, us, u)) in out.per_model.iter().zip(expect) {
        assert!(rel_close(rec.s[0], s, 1e-12));
        assert!(rel_close(rec.u_eq[0], ueq, 1e-12));
        assert!(rel_close(rec.u_s[0], us, 1e-12));
        assert!(rel_close(rec.u[0], u, 1e-12));
    }
    assert!(rel_close(out.u[0], 1.075, 1e-12), "{}", out.u[0]);
    assert!(rel_close(out.surfaces[0], 0.6, 1e-12));
}

/// The same bank with sign switching: `u_s = -k·λ·sign(s)`.
#[test]
fn two_model_smmc_sign_variant() {
    let b = Matrix::column(&[0.0, 1.0]);
    let c = [SurfaceSpec::new(vec![1.0, 1.0]).unwrap()];
    let m1 = SubModel::from_matrices(0, 0.0, Matrix::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]), b.clone(), &c, 2.0).unwrap();
    let m2 = SubModel::from_matrices(1, 1.0, Matrix::from_rows(&[&[0.0, 1.0], &[-2.0, -3.0]]), b, &c, 4.0).unwrap();
    let mut cfg = ControllerConfig::new(ControllerMode::Smmc);
    cfg.switch_fn = SwitchFn::Sign;
    let v = ValidityVector::new(vec![0.5, 0.5]).unwrap();
    let out = smmc_control(&[m1, m2], &v, &[1.0, 0.5], &[0.4, 0.2], &cfg).unwrap();
    // u1 = -0.5 - 2 = -2.5, u2 = 3 - 4 = -1
    assert!(rel_close(out.u[0], -1.75, 1e-12));
}
