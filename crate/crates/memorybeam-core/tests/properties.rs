//! Cross-cutting solver and stability properties that complement the
//! per-module unit tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memorybeam_core::generator::{build_beam_generator, compatible_eta, BeamParams};
use memorybeam_core::memory::ExpKernel;
use memorybeam_core::solver::{
    solve_mild_picard_with, solve_strong_stepping, ForcingFunction, PicardOptions, ProblemSpec,
};
use memorybeam_core::stability::{certify_general, verify_envelope_on_pair};
use memorybeam_core::state_space::{BeamState, Grid};

fn grid() -> Grid {
    Grid::new(16).unwrap()
}

fn params() -> BeamParams {
    BeamParams::new(1.0, 1.0, 1.0).unwrap()
}

fn compatible_state(rng: &mut ChaCha8Rng, radius: f64) -> DVector<f64> {
    let grid = grid();
    let params = params();
    let phi = |x: f64| x * x - x * x * x / 3.0;
    let psi = |x: f64| x * x * x - 0.5 * x * x * x * x;
    let nodes = grid.nodes();
    let (a, b) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (c, d) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let p = DVector::from_iterator(nodes.len(), nodes.iter().map(|&x| a * phi(x) + b * psi(x)));
    let q = DVector::from_iterator(nodes.len(), nodes.iter().map(|&x| c * phi(x) + d * psi(x)));
    let eta = compatible_eta(&grid, &params, &p, &q).unwrap();
    let flat = BeamState::new(p, q, eta).unwrap().flatten();
    let gen = build_beam_generator(&grid, &params).unwrap();
    let n = gen.norm().vector_norm(&flat);
    flat * (radius / n.max(1e-300))
}

fn beam_spec(initial: DVector<f64>, gamma: f64, lambda: f64, width: f64) -> ProblemSpec {
    let grid = grid();
    ProblemSpec {
        generator: build_beam_generator(&grid, &params()).unwrap(),
        forcing: ForcingFunction::linear_beam(&grid, gamma, lambda),
        kernel: Box::new(ExpKernel::new(width).unwrap()),
        t0: 0.0,
        initial,
    }
}

#[test]
fn duhamel_consistency_homogeneous() {
    // with f = 0 both solvers reproduce the semigroup to scheme tolerance
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let initial = compatible_state(&mut rng, 1.0);
    let grid = grid();
    let mut spec = beam_spec(initial.clone(), 0.0, 0.0, 0.2);
    spec.forcing = ForcingFunction::zero(grid.flat_dim());
    let dt = 1e-3;
    let picard = solve_mild_picard_with(&spec, 1.0, dt, &PicardOptions::default()).unwrap();
    let stepped = solve_strong_stepping(&spec, 1.0, dt).unwrap();
    let norm = spec.generator.norm();
    let mut worst_p = 0.0_f64;
    let mut worst_s = 0.0_f64;
    for (i, &t) in picard.times.iter().enumerate().step_by(100) {
        let exact = spec.generator.apply_semigroup(t, &initial).unwrap();
        worst_p = worst_p.max(norm.distance(&picard.states[i], &exact));
        worst_s = worst_s.max(norm.distance(&stepped.states[i], &exact));
    }
    assert!(worst_p <= 1e-9, "Picard vs semigroup: {worst_p:.3e}");
    assert!(worst_s <= 1e-9, "stepping vs semigroup: {worst_s:.3e}");
}

#[test]
fn picard_residuals_contract_geometrically() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let initial = compatible_state(&mut rng, 1.0);
    // strong forcing so the iteration works for its convergence
    let spec = beam_spec(initial, 0.6, 0.3, 0.4);
    let opts = PicardOptions {
        tol: 1e-12,
        max_iter: 200,
        window: 1.0,
        ..PicardOptions::default()
    };
    let traj = solve_mild_picard_with(&spec, 1.0, 2e-3, &opts).unwrap();
    let residuals = &traj.meta.residual_history;
    assert!(residuals.len() >= 5, "need several iterations, got {}", residuals.len());
    // ratios below one for the last recorded iterations above the floor
    let floor = 1e3 * f64::EPSILON;
    let usable: Vec<f64> = residuals.iter().copied().filter(|&r| r > floor).collect();
    let tail = &usable[usable.len().saturating_sub(4)..];
    for pair in tail.windows(2) {
        assert!(pair[1] < pair[0], "residuals not contracting: {residuals:?}");
    }
}

#[test]
fn strong_solution_residual_second_order() {
    // central differences of the computed trajectory satisfy the equation
    // with a defect that shrinks at second order in dt
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let initial = compatible_state(&mut rng, 1.0);
    let spec = beam_spec(initial, 0.3, 0.05, 0.2);
    let norm = spec.generator.norm();
    let mut defects = Vec::new();
    for &dt in &[4e-3, 2e-3, 1e-3] {
        let traj = solve_strong_stepping(&spec, 1.0, dt).unwrap();
        let mut worst = 0.0_f64;
        for i in (1..traj.len() - 1).step_by(7) {
            let derivative = (&traj.states[i + 1] - &traj.states[i - 1]) / (2.0 * dt);
            let rhs = spec.generator.matrix() * &traj.states[i]
                + spec.forcing.eval(traj.times[i], &traj.states[i], &traj.memory_states[i]);
            worst = worst.max(norm.distance(&derivative, &rhs));
        }
        defects.push(worst);
    }
    let o1 = (defects[0] / defects[1]).log2();
    let o2 = (defects[1] / defects[2]).log2();
    assert!(o1 > 1.5 && o1 < 2.5, "defect order {o1} ({defects:?})");
    assert!(o2 > 1.5 && o2 < 2.5, "defect order {o2} ({defects:?})");
}

#[test]
fn uniform_epsilon_times_over_bounded_set() {
    // the certificate-predicted epsilon time bounds the empirical crossing
    // time of every pair drawn from the ball
    let gen = build_beam_generator(&grid(), &params()).unwrap();
    let est = gen.estimate_semigroup_type(20.0, 100).unwrap();
    let c = 0.05f64.max(0.3 * 0.3);
    let cert = certify_general(c, est.overshoot, est.decay_rate, 5.0, 5.0).unwrap();
    assert!(cert.certified());
    let epsilon = 1e-2;
    let diam = 2.0;
    let predicted =
        (cert.overshoot * diam / epsilon).ln() / (-cert.decay_exponent());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let horizon = (predicted * 1.05).ceil();
    for _ in 0..4 {
        let rv = rng.gen_range(0.1..1.0_f64);
        let v = compatible_state(&mut rng, rv);
        let rw = rng.gen_range(0.1..1.0_f64);
        let w = compatible_state(&mut rng, rw);
        let tv = solve_strong_stepping(&beam_spec(v, 0.3, 0.05, 0.2), horizon, 1e-3).unwrap();
        let tw = solve_strong_stepping(&beam_spec(w, 0.3, 0.05, 0.2), horizon, 1e-3).unwrap();
        let report = verify_envelope_on_pair(
            &tv,
            &tw,
            &cert,
            gen.norm(),
            0.05,
            &[epsilon],
        )
        .unwrap();
        if let (_, Some(crossing)) = report.epsilon_times[0] {
            assert!(
                crossing <= predicted * 1.05,
                "empirical t(eps) {crossing} exceeds predicted {predicted}"
            );
        }
    }
}

#[test]
fn uncertified_parameters_reported_not_asserted() {
    // a kernel width above the certified range: the envelope check still
    // runs and reports; no stability conclusion is drawn either way
    let gen = build_beam_generator(&grid(), &params()).unwrap();
    let est = gen.estimate_semigroup_type(10.0, 40).unwrap();
    let c = 0.3f64;
    let width_bound =
        (est.decay_rate - 2.0 * c) / (est.decay_rate * (est.decay_rate - c));
    // deliberately far above the bound (and cap the rate condition too)
    let width = if width_bound > 0.0 { width_bound * 50.0 } else { 5.0 };
    let cert = certify_general(c, est.overshoot, est.decay_rate, 1.0 / width, 1.0 / width);
    if let Ok(cert) = cert {
        assert!(!cert.certified());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = compatible_state(&mut rng, 0.5);
        let w = compatible_state(&mut rng, 0.5);
        let tv = solve_strong_stepping(&beam_spec(v, 0.5, 0.3, width), 2.0, 1e-3).unwrap();
        let tw = solve_strong_stepping(&beam_spec(w, 0.5, 0.3, width), 2.0, 1e-3).unwrap();
        let report =
            verify_envelope_on_pair(&tv, &tw, &cert, gen.norm(), 0.05, &[]).unwrap();
        // informative only
        println!(
            "uncertified run: max ratio {:.3}, violations {}",
            report.max_ratio, report.violations
        );
    }
}

#[test]
fn windowed_and_single_window_picard_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let initial = compatible_state(&mut rng, 1.0);
    let spec = beam_spec(initial, 0.3, 0.05, 0.2);
    let tol = 1e-11;
    let short = PicardOptions { tol, max_iter: 200, window: 0.25, ..Default::default() };
    let long = PicardOptions { tol, max_iter: 200, window: 2.0, ..Default::default() };
    let a = solve_mild_picard_with(&spec, 1.0, 2e-3, &short).unwrap();
    let b = solve_mild_picard_with(&spec, 1.0, 2e-3, &long).unwrap();
    assert!(a.meta.windows > b.meta.windows);
    let gap = a.sup_distance(&b, spec.generator.norm()).unwrap();
    assert!(gap <= 20.0 * tol, "windowing changed the fixed point: {gap:.3e}");
}
