use approx::assert_relative_eq;

use super::*;
use crate::constitutive::coefficients::tests::smoke_coefficients;
use crate::constitutive::Conductivity;
use crate::constitutive::{CoefficientSet, InversionSettings, Model, PowerSeries, ScalarFn};
use crate::discretization::{FieldState, Mesh};
use crate::solver::ObstacleOperator;
use crate::stepper::substeps::{DamageOperator, StepContext};

fn problem_with(coeffs: CoefficientSet, nodes: usize, sources: Sources, controls: &StepControls) -> Problem {
    let mesh = Mesh::unit_interval(nodes).unwrap();
    let model = Model::new(coeffs, controls.truncation, InversionSettings::default()).unwrap();
    Problem::new(mesh, model, sources, controls).unwrap()
}

fn unchecked_problem(coeffs: CoefficientSet, nodes: usize, sources: Sources, controls: &StepControls) -> Problem {
    let mesh = Mesh::unit_interval(nodes).unwrap();
    let model = Model::new_unchecked(coeffs, controls.truncation, InversionSettings::default()).unwrap();
    Problem::new(mesh, model, sources, controls).unwrap()
}

/// `ρ ≡ 0`, `c ≡ 1`, `K ≡ 1`: heat decouples and `Θ(w) = w`.
fn decoupled_coefficients() -> CoefficientSet {
    CoefficientSet {
        heat_capacity: PowerSeries::new([[1.0, 0.0]]),
        conductivity: Conductivity::Enthalpy {
            terms: PowerSeries::new([[1.0, 0.0]]),
        },
        thermal_expansion: ScalarFn::zero(),
        ..smoke_coefficients()
    }
}

fn smoke_initial(mesh: &Mesh) -> FieldState {
    InitialData {
        u: vec![Profile::Sine {
            amplitude: 1.5,
            mode: 1.0,
            mode_y: 1.0,
        }],
        v: vec![],
        w: Profile::Cosine {
            offset: 0.5,
            amplitude: 0.3,
            mode: 1.0,
            mode_y: 0.0,
        },
        chi: Profile::Constant { value: 1.0 },
    }
    .to_state(mesh)
    .unwrap()
}

#[test]
fn decoupled_heat_decays_cosine_mode() {
    let controls = StepControls::default();
    let pr = unchecked_problem(decoupled_coefficients(), 41, Sources::default(), &controls);
    let mut s = FieldState::zeros(&pr.mesh);
    s.chi = vec![1.0; 41];
    let (a, b) = (0.6, 0.2);
    s.w = pr
        .mesh
        .coords()
        .iter()
        .map(|c| a + b * (std::f64::consts::PI * c[0]).cos())
        .collect();
    let tau = controls.tau;
    let out = do_step(&pr, &s, &controls, tau).unwrap();
    let h = 1.0 / 40.0;
    let lambda = 2.0 * (1.0 - (std::f64::consts::PI * h).cos()) / (h * h);
    let factor = 1.0 / (1.0 + tau * lambda);
    for (c, w) in pr.mesh.coords().iter().zip(&out.state.w) {
        let expect = a + b * factor * (std::f64::consts::PI * c[0]).cos();
        assert_relative_eq!(*w, expect, epsilon = 1e-12);
    }
    assert!(out.state.chi.iter().all(|c| *c == 1.0));
    assert!(out.state.u.iter().all(|u| *u == 0.0));
    assert_relative_eq!(out.report.ledger.enthalpy, 0.0, epsilon = 1e-14);
}

#[test]
fn zero_enthalpy_stays_zero() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 31, Sources::default(), &controls);
    let mut s = smoke_initial(&pr.mesh);
    s.w = vec![0.0; 31];
    let out = do_step(&pr, &s, &controls, controls.tau).unwrap();
    assert!(out.state.w.iter().all(|w| *w == 0.0));
}

#[test]
fn equilibrium_is_preserved_for_100_steps() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 21, Sources::default(), &controls);
    let mut s = FieldState::zeros(&pr.mesh);
    s.chi = vec![1.0; 21];
    s.w = vec![0.4; 21];
    let s0 = s.clone();
    for _ in 0..100 {
        s = do_step(&pr, &s, &controls, controls.tau).unwrap().state;
    }
    for (a, b) in s.w.iter().zip(&s0.w) {
        assert!((a - b).abs() <= 1e-14);
    }
    assert!(s.u.iter().chain(&s.v).all(|x| x.abs() <= 1e-14));
    assert_eq!(s.chi, s0.chi);
}

#[test]
fn fully_damaged_state_stays_damaged() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 21, Sources::default(), &controls);
    let mut s = smoke_initial(&pr.mesh);
    s.chi = vec![0.0; 21];
    let out = do_step(&pr, &s, &controls, controls.tau).unwrap();
    assert!(out.state.chi.iter().all(|c| *c == 0.0));
    assert_eq!(out.report.fraction_broken, 1.0);
}

#[test]
fn strain_drives_damage() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 41, Sources::default(), &controls);
    let s = smoke_initial(&pr.mesh);
    let out = do_step(&pr, &s, &controls, controls.tau).unwrap();
    assert!(out.state.chi.iter().any(|c| *c < 1.0));
    assert!(out.state.chi.iter().zip(&s.chi).all(|(a, b)| a <= b && *a >= 0.0));
}

#[test]
fn damped_motion_settles_at_elastic_equilibrium() {
    // constant b and a, no thermal coupling, constant load ℓ
    let b = 1.0;
    let coeffs = CoefficientSet {
        elasticity: ScalarFn::constant(b),
        viscosity: ScalarFn::constant(1.0),
        mu: 2.0 / std::f64::consts::PI,
        ..decoupled_coefficients()
    };
    let controls = StepControls {
        tau: 0.02,
        ..StepControls::default()
    };
    let load = 0.8;
    let sources = Sources {
        heat: Profile::Zero,
        load: vec![Profile::Constant { value: load }],
    };
    let pr = unchecked_problem(coeffs, 21, sources, &controls);
    let mut s = FieldState::zeros(&pr.mesh);
    s.chi = vec![1.0; 21];
    let traj = run(pr.clone(), controls, s, 15.0).unwrap();
    for (c, u) in pr.mesh.coords().iter().zip(&traj.last().u) {
        let x = c[0];
        assert!((u - load * x * (1.0 - x) / (2.0 * b)).abs() <= 1e-6, "{u} at {x}");
    }
}

#[test]
fn remainders_cancel_and_energy_balance_holds() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 51, Sources::default(), &controls);
    let s = smoke_initial(&pr.mesh);
    let traj = run(pr, controls, s, 0.03).unwrap();
    assert_eq!(traj.reports.len(), 30);
    let mut damaged = false;
    for (k, r) in traj.reports.iter().enumerate() {
        assert!(r.cancel_resid <= 1e-8, "step {k}: {}", r.cancel_resid);
        assert!(r.ledger.excess() <= 1e-8 * r.ledger.scale(), "step {k}: {:?}", r.ledger);
        assert!(r.damage_balance() <= 1e-8 * r.ledger.scale());
        assert!(r.w_min >= -1e-12);
        assert!(r.split_violation <= 1e-12);
        assert!(r.heat_residual <= 1e-8);
        damaged |= r.fraction_frozen < 1.0;
    }
    assert!(damaged);
    for pair in traj.states.windows(2) {
        assert!(pair[1].chi.iter().zip(&pair[0].chi).all(|(a, b)| a <= b && *a >= 0.0));
    }
}

#[test]
fn damage_operator_gradient_matches_merit() {
    let controls = StepControls::default();
    let pr = problem_with(smoke_coefficients(), 11, Sources::default(), &controls);
    let prev = smoke_initial(&pr.mesh);
    let ctx = StepContext::new(&pr, &prev, 1e-2);
    let theta = pr.mesh.interpolate_qp(&pr.theta_nodes(&prev.w));
    let op = DamageOperator::new(&ctx, &theta);
    let x: Vec<f64> = (0..11).map(|i| 0.5 + 0.3 * (i as f64).sin()).collect();
    let dir: Vec<f64> = (0..11).map(|i| (2.1 * i as f64).cos()).collect();
    let h = 1e-6;
    let shift = |s: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
    let fd = (op.merit(&shift(h)) - op.merit(&shift(-h))) / (2.0 * h);
    let an: f64 = op.residual(&x).iter().zip(&dir).map(|(a, b)| a * b).sum();
    assert_relative_eq!(fd, an, max_relative = 1e-6);
    let jd = op.jacobian(&x).mul_vec(&dir);
    let (rp, rm) = (op.residual(&shift(h)), op.residual(&shift(-h)));
    for i in 0..11 {
        assert_relative_eq!((rp[i] - rm[i]) / (2.0 * h), jd[i], epsilon = 1e-5, max_relative = 1e-5);
    }
}

#[test]
fn controls_are_validated() {
    let bad = StepControls {
        relaxation: 1.5,
        tau: -1.0,
        ..StepControls::default()
    };
    let problems = bad.problems();
    assert!(problems.iter().any(|p| p.contains("relaxation")));
    assert!(problems.iter().any(|p| p.contains("tau")));
    assert!(matches!(bad.check(), Err(crate::Error::ConfigInvalid(_))));
}
