mod common;

use dgflow::dg::{
    adaptive_controller_step, run_flow, DgStepper, EulerStepper, LaggedStepper, Scheme,
    StepController, StepOptions, StopCriteria, Termination,
};
use dgflow::energy::{Energy, Quadratic};
use dgflow::io::{self, fixtures};
use dgflow::FunctionalModel;

fn denoise_fixture() -> FunctionalModel {
    FunctionalModel::denoise(fixtures::noisy_shapes(32, 32, 0.1, 1), 0.05, 0.001).unwrap()
}

fn stop(max_steps: usize) -> StopCriteria {
    StopCriteria {
        max_steps,
        ..StopCriteria::default()
    }
}

#[test]
fn critical_point_stops_at_step_zero() {
    let m = FunctionalModel::denoise(
        dgflow::ImageGrid::from_vec(6, 6, 1, vec![0.3; 36]).unwrap(),
        0.05,
        0.001,
    )
    .unwrap();
    let x0 = m.data().as_slice().to_vec();
    let st = DgStepper::new(&m, Scheme::Gonzalez, StepOptions::default());
    let r = run_flow(
        &m,
        &st,
        StepController::fixed(2.5).unwrap(),
        stop(10),
        &x0,
        false,
    );
    assert_eq!(r.termination, Termination::GradTol);
    assert_eq!(r.trace.rows.len(), 1);
    assert_eq!(r.state, x0);
}

#[test]
fn gonzalez_converges_on_the_denoising_fixture() {
    let m = denoise_fixture();
    let x0 = m.data().as_slice().to_vec();
    let st = DgStepper::new(&m, Scheme::Gonzalez, StepOptions::default());
    let r = run_flow(
        &m,
        &st,
        StepController::fixed(2.5).unwrap(),
        stop(200),
        &x0,
        false,
    );
    assert!(r.converged());
    // The midpoint map damps the stiffest modes of this fixture by only
    // ~0.88 per step at tau = 2.5, so convergence takes a few dozen steps.
    assert!(
        r.trace.rows.len() - 1 <= 100,
        "{} steps",
        r.trace.rows.len() - 1
    );
}

#[test]
fn reread_trace_is_nonincreasing() {
    let m = denoise_fixture();
    let x0 = m.data().as_slice().to_vec();
    let st = DgStepper::new(&m, Scheme::ItohAbe, StepOptions::default());
    let r = run_flow(
        &m,
        &st,
        StepController::adaptive(1.0).unwrap(),
        stop(100),
        &x0,
        false,
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    io::write_trace(&path, &r.trace).unwrap();
    let back = io::read_trace(&path).unwrap();
    assert_eq!(back, r.trace);
    assert!(back.is_monotone(0.0));
}

#[test]
fn stall_criterion_fires() {
    let m = denoise_fixture();
    let x0 = m.data().as_slice().to_vec();
    let st = EulerStepper::new(&m);
    let crit = StopCriteria {
        max_steps: 500,
        grad_tol: 0.0,
        energy_stall_eps: 1e-3,
    };
    let r = run_flow(
        &m,
        &st,
        StepController::fixed(0.1).unwrap(),
        crit,
        &x0,
        false,
    );
    assert_eq!(r.termination, Termination::Stalled);
    let n = r.trace.rows.len() - 1;
    assert!(n >= 10 && n < 500);
}

#[test]
fn lagged_diffusivity_reaches_the_inpainting_minimum() {
    let (u0, mask) = fixtures::scratched_shapes(32, 32);
    let m = FunctionalModel::inpaint(u0.clone(), mask, 0.05, 0.01).unwrap();
    let st = LaggedStepper::new(&m, 1e-10, false);
    let r = run_flow(
        &m,
        &st,
        StepController::fixed(0.1).unwrap(),
        stop(5000),
        u0.as_slice(),
        false,
    );
    assert!(r.converged());
    assert!(r.trace.is_monotone(1e-12));
    let fp = LaggedStepper::new(&m, 1e-10, true);
    let q = run_flow(
        &m,
        &fp,
        StepController::fixed(1.0).unwrap(),
        stop(5000),
        u0.as_slice(),
        false,
    );
    assert!(q.converged());
    let (a, b) = (
        r.trace.last().unwrap().energy,
        q.trace.last().unwrap().energy,
    );
    assert!((a - b).abs() < 1e-8 * a);
}

#[test]
fn adaptive_step_doubles_when_far_from_optimal() {
    // V = ½ x², midpoint factor (1 − τ/2)/(1 + τ/2) shrinks as τ → 2.
    let q = Quadratic::diagonal(&[1.0]);
    let st = DgStepper::new(&q, Scheme::Gonzalez, StepOptions::default());
    let ctl = StepController::adaptive(0.01).unwrap();
    let (out, next) = adaptive_controller_step(&q, &st, &[1.0], &ctl).unwrap();
    assert_eq!(out.tau, 0.02);
    assert_eq!(next.tau(), 0.02);
    let want = (1.0 - 0.01) / (1.0 + 0.01);
    assert!((out.x[0] - want).abs() < 1e-10);
    assert!(q.value(&out.x) < q.value(&[1.0]));
}
