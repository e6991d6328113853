//! Mild and strong solvers for the semilinear memory problem
//! `y' = A y + f(t, y, z)`, `z(t) = int_{t0}^t k(t,s) y(s) ds`.
//!
//! The mild solver runs Picard iteration on the variation-of-constants
//! formula over restartable windows; the strong solver integrates the
//! augmented `(y, z)` system with the exact one-step propagator for the
//! linear part. Both share the trapezoid treatment of integrals, so they
//! agree to second order in the step size.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::{compatibility_residual, DiscreteGenerator, COMPATIBILITY_TOL};
use crate::memory::MemoryKernel;
use crate::state_space::{BeamState, Grid, StateNorm};

/// The nonlinearity `f(t, y, z)` with its declared regularity constants.
pub struct ForcingFunction {
    func: Box<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>,
    dim: usize,
    lipschitz: f64,
    time_lipschitz: f64,
    zero_at_zero: bool,
}

impl ForcingFunction {
    pub fn new(
        func: Box<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>,
        dim: usize,
        lipschitz: f64,
        time_lipschitz: f64,
        zero_at_zero: bool,
    ) -> Self {
        ForcingFunction { func, dim, lipschitz, time_lipschitz, zero_at_zero }
    }

    /// `f = 0`: the homogeneous problem.
    pub fn zero(dim: usize) -> Self {
        ForcingFunction {
            func: Box::new(move |_, _, _| DVector::zeros(dim)),
            dim,
            lipschitz: 0.0,
            time_lipschitz: 0.0,
            zero_at_zero: true,
        }
    }

    /// Pointwise forcing of the beam: a scalar `g(t, p_i, z_p_i)` acting on
    /// the deflection samples of the state and of the memory state, entering
    /// the velocity block.
    pub fn beam_pointwise(
        grid: &Grid,
        g: Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>,
        lipschitz: f64,
        time_lipschitz: f64,
        zero_at_zero: bool,
    ) -> Self {
        let n = grid.point_count();
        let dim = grid.flat_dim();
        ForcingFunction {
            func: Box::new(move |t, y, z| {
                let mut out = DVector::zeros(dim);
                for i in 0..n {
                    out[n + i] = g(t, y[i], z[i]);
                }
                out
            }),
            dim,
            lipschitz,
            time_lipschitz,
            zero_at_zero,
        }
    }

    /// The linear example `g = -gamma^2 p - lambda z_p` with Lipschitz
    /// constant `max(lambda, gamma^2)`.
    pub fn linear_beam(grid: &Grid, gamma: f64, lambda: f64) -> Self {
        let c = lambda.max(gamma * gamma);
        Self::beam_pointwise(
            grid,
            Box::new(move |_, p, zp| -gamma * gamma * p - lambda * zp),
            c,
            0.0,
            true,
        )
    }

    pub fn eval(&self, t: f64, y: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        (self.func)(t, y, z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared Lipschitz constant of `f(t, ., .)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Declared Lipschitz constant of `t -> f(t, y, z)` on bounded windows.
    pub fn time_lipschitz(&self) -> f64 {
        self.time_lipschitz
    }

    /// Whether `f(t, 0, 0) = 0` is asserted.
    pub fn zero_at_zero(&self) -> bool {
        self.zero_at_zero
    }
}

/// A complete problem instance.
pub struct ProblemSpec {
    pub generator: DiscreteGenerator,
    pub forcing: ForcingFunction,
    pub kernel: Box<dyn MemoryKernel>,
    pub t0: f64,
    pub initial: DVector<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let dim = self.generator.dim();
        if self.forcing.dim() != dim {
            return Err(Error::DimensionMismatch {
                field: "forcing",
                expected: dim,
                actual: self.forcing.dim(),
            });
        }
        if self.initial.len() != dim {
            return Err(Error::DimensionMismatch {
                field: "initial",
                expected: dim,
                actual: self.initial.len(),
            });
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidParameter { field: "t0", message: "must be finite" });
        }
        Ok(())
    }
}

/// Which solver produced a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    MildPicard,
    StrongStepping,
}

/// Solver bookkeeping attached to a trajectory: total Picard iteration count,
/// number of windows, final residual and the residual history of the last
/// window.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverMeta {
    pub method: SolverKind,
    pub iterations: usize,
    pub windows: usize,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
}

/// Uniformly sampled solution, with the memory state alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub memory_states: Vec<DVector<f64>>,
    pub meta: SolverMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn shares_grid(&self, other: &Trajectory) -> bool {
        self.times.len() == other.times.len()
            && self
                .times
                .iter()
                .zip(other.times.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }

    /// Supremum over the shared grid of the distance between states.
    pub fn sup_distance(&self, other: &Trajectory, norm: &StateNorm) -> Result<f64> {
        if !self.shares_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .states
            .iter()
            .zip(other.states.iter())
            .map(|(a, b)| norm.distance(a, b))
            .fold(0.0, f64::max))
    }

    pub fn norms(&self, norm: &StateNorm) -> Vec<f64> {
        self.states.iter().map(|s| norm.vector_norm(s)).collect()
    }
}

/// Initial iterate of the Picard loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardInit {
    /// The homogeneous solution `U(t - t0) v`: the default, one contraction
    /// step ahead of the constant guess.
    #[default]
    Homogeneous,
    /// The zero function.
    Zero,
    /// The constant function `v`.
    InitialConstant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Window length for restarted iteration; the memory integral always
    /// spans the whole history, converged windows are frozen.
    pub window: f64,
    pub init: PicardInit,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { tol: 1e-10, max_iter: 100, window: 0.5, init: PicardInit::Homogeneous }
    }
}

pub(crate) fn time_grid(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter { field: "time.dt", message: "must be positive" });
    }
    if !(t_end > t0) {
        return Err(Error::InvalidParameter {
            field: "time.t_end",
            message: "must exceed the initial time",
        });
    }
    let span = t_end - t0;
    let steps_f = span / dt;
    let steps = libm::round(steps_f) as usize;
    if steps == 0 || libm::fabs(steps_f - steps as f64) > 1e-6 * steps_f.max(1.0) {
        return Err(Error::InvalidParameter {
            field: "time.dt",
            message: "must divide the horizon into whole steps",
        });
    }
    Ok((0..=steps).map(|i| t0 + i as f64 * dt).collect())
}

/// Trapezoid memory integral on the solver grid, written with in-place
/// accumulation (the generic quadrature allocates per interval).
fn memory_on_grid(
    kernel: &dyn MemoryKernel,
    times: &[f64],
    states: &[DVector<f64>],
    j: usize,
    dt: f64,
    out: &mut DVector<f64>,
) {
    out.fill(0.0);
    if j == 0 {
        return;
    }
    let tj = times[j];
    for (l, state) in states.iter().enumerate().take(j + 1) {
        let w = if l == 0 || l == j { 0.5 * dt } else { dt };
        out.axpy(w * kernel.eval(tj, times[l]), state, 1.0);
    }
}

/// Mild solution by Picard iteration with default windowing.
pub fn solve_mild_picard(
    spec: &ProblemSpec,
    t_end: f64,
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Trajectory> {
    let opts = PicardOptions { tol, max_iter, ..PicardOptions::default() };
    solve_mild_picard_with(spec, t_end, dt, &opts)
}

pub fn solve_mild_picard_with(
    spec: &ProblemSpec,
    t_end: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    picard_run(spec, &spec.initial, t_end, dt, opts)
}

pub(crate) fn picard_run(
    spec: &ProblemSpec,
    initial: &DVector<f64>,
    t_end: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<Trajectory> {
    spec.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter { field: "solver.tol", message: "must be positive" });
    }
    if !(opts.window > 0.0) {
        return Err(Error::InvalidParameter {
            field: "solver.window",
            message: "must be positive",
        });
    }
    let times = time_grid(spec.t0, t_end, dt)?;
    let steps = times.len() - 1;
    let dim = spec.generator.dim();
    let norm = spec.generator.norm();
    let propagator = spec.generator.propagator(dt)?;

    let mut states: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    states.push(initial.clone());
    states.resize(steps + 1, DVector::zeros(dim));

    let window_steps = (libm::round(opts.window / dt) as usize).max(1);
    let mut total_iterations = 0usize;
    let mut windows = 0usize;
    let mut last_residuals: Vec<f64> = Vec::new();

    let mut z_buf = DVector::<f64>::zeros(dim);
    let mut start = 0usize;
    while start < steps {
        let end = (start + window_steps).min(steps);
        windows += 1;
        // initial iterate on (start, end]
        match opts.init {
            PicardInit::Homogeneous => {
                for j in start + 1..=end {
                    states[j] = &propagator * &states[j - 1];
                }
            }
            PicardInit::Zero => {
                for j in start + 1..=end {
                    states[j].fill(0.0);
                }
            }
            PicardInit::InitialConstant => {
                let base = states[start].clone();
                for j in start + 1..=end {
                    states[j] = base.clone();
                }
            }
        }

        let mut residuals: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut forces: Vec<DVector<f64>> = Vec::with_capacity(end - start + 1);
        for _ in 0..opts.max_iter {
            total_iterations += 1;
            // forcing along the current iterate, memory from the full history
            forces.clear();
            for j in start..=end {
                memory_on_grid(spec.kernel.as_ref(), &times, &states, j, dt, &mut z_buf);
                forces.push(spec.forcing.eval(times[j], &states[j], &z_buf));
            }
            // trapezoid variation-of-constants sweep
            let mut hom = states[start].clone();
            let mut duhamel = DVector::<f64>::zeros(dim);
            let mut residual = 0.0_f64;
            for j in start + 1..=end {
                duhamel += &forces[j - 1 - start] * (0.5 * dt);
                duhamel = &propagator * &duhamel;
                duhamel += &forces[j - start] * (0.5 * dt);
                hom = &propagator * &hom;
                let fresh = &hom + &duhamel;
                residual = residual.max(norm.distance(&fresh, &states[j]));
                states[j] = fresh;
            }
            if !residual.is_finite() {
                return Err(Error::Numerical { message: "Picard iterate diverged" });
            }
            residuals.push(residual);
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                window_start: times[start],
                iterations: residuals.len(),
                residuals,
            });
        }
        last_residuals = residuals;
        start = end;
    }

    let memory_states = final_memory(spec.kernel.as_ref(), &times, &states, dt);
    let final_residual = last_residuals.last().copied().unwrap_or(0.0);
    Ok(Trajectory {
        times,
        states,
        memory_states,
        meta: SolverMeta {
            method: SolverKind::MildPicard,
            iterations: total_iterations,
            windows,
            final_residual,
            residual_history: last_residuals,
        },
    })
}

fn final_memory(
    kernel: &dyn MemoryKernel,
    times: &[f64],
    states: &[DVector<f64>],
    dt: f64,
) -> Vec<DVector<f64>> {
    let dim = states[0].len();
    let mut out = Vec::with_capacity(times.len());
    let mut buf = DVector::<f64>::zeros(dim);
    for j in 0..times.len() {
        memory_on_grid(kernel, times, states, j, dt, &mut buf);
        out.push(buf.clone());
    }
    out
}

/// Strong solution by exponential time stepping of the augmented system
/// `(y, z)' = (A y + f(t, y, z), (y - z)/T)`. Requires the exponential
/// kernel and an initial state satisfying the boundary compatibility
/// condition.
pub fn solve_strong_stepping(spec: &ProblemSpec, t_end: f64, dt: f64) -> Result<Trajectory> {
    stepping_run(spec, &spec.initial, t_end, dt)
}

pub(crate) fn stepping_run(
    spec: &ProblemSpec,
    initial: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    spec.validate()?;
    let width = spec.kernel.exponential_width().ok_or(Error::KernelNotExponential)?;
    if let Some(info) = spec.generator.beam() {
        let state = BeamState::from_flat(&info.grid, initial)?;
        let residual = compatibility_residual(&info.grid, &info.params, &state)?;
        let tolerance = COMPATIBILITY_TOL * initial.amax().max(1.0);
        if libm::fabs(residual) > tolerance {
            return Err(Error::IncompatibleInitial { residual: libm::fabs(residual), tolerance });
        }
    }
    let times = time_grid(spec.t0, t_end, dt)?;
    let propagator = spec.generator.propagator(dt)?;
    let dim = spec.generator.dim();

    // exact filter weights for z' = (y - z)/T with y interpolated linearly
    let mu = dt / width;
    let decay = libm::exp(-mu);
    let one_minus = -libm::expm1(-mu);
    let w_new = 1.0 - one_minus / mu;
    let w_old = one_minus - w_new;

    let mut states = Vec::with_capacity(times.len());
    let mut memory_states = Vec::with_capacity(times.len());
    states.push(initial.clone());
    memory_states.push(DVector::<f64>::zeros(dim));

    for n in 0..times.len() - 1 {
        let y_n = &states[n];
        let z_n = &memory_states[n];
        let f_n = spec.forcing.eval(times[n], y_n, z_n);
        // exponential Euler predictor, then trapezoid corrector
        let predictor = &propagator * &(y_n + &f_n * dt);
        let z_pred = z_n * decay + y_n * w_old + &predictor * w_new;
        let f_pred = spec.forcing.eval(times[n + 1], &predictor, &z_pred);
        let y_next = &propagator * y_n + (&propagator * &f_n + f_pred) * (0.5 * dt);
        let z_next = z_n * decay + y_n * w_old + &y_next * w_new;
        if y_next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical { message: "time stepping diverged" });
        }
        states.push(y_next);
        memory_states.push(z_next);
    }

    Ok(Trajectory {
        times,
        states,
        memory_states,
        meta: SolverMeta {
            method: SolverKind::StrongStepping,
            iterations: 0,
            windows: 1,
            final_residual: 0.0,
            residual_history: Vec::new(),
        },
    })
}

/// One entry of a continuous-dependence probe.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceEntry {
    pub initial_distance: f64,
    pub sup_distance: f64,
    /// `sup_distance / initial_distance`; absent for identical initial data.
    pub ratio: Option<f64>,
    pub within_bound: bool,
}

/// Measured Gronwall data for a batch of perturbed initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub semigroup_sup: f64,
    pub kernel_sup: f64,
    pub gronwall_bound: f64,
    pub entries: Vec<DependenceEntry>,
}

impl DependenceReport {
    pub fn all_within_bound(&self) -> bool {
        self.entries.iter().all(|e| e.within_bound)
    }
}

/// Runs the mild solver from `spec.initial` and from each perturbation and
/// compares the growth of differences against the Gronwall constant
/// `M exp(M C (1 + K (t_end - t0)) (t_end - t0))` computed from the measured
/// semigroup bound `M` and kernel bound `K`.
pub fn continuous_dependence_probe(
    spec: &ProblemSpec,
    perturbations: &[DVector<f64>],
    t_end: f64,
    dt: f64,
) -> Result<DependenceReport> {
    let opts = PicardOptions::default();
    let base = picard_run(spec, &spec.initial, t_end, dt, &opts)?;
    let norm = spec.generator.norm();

    let span = t_end - spec.t0;
    let m_sup = sample_semigroup_sup(&spec.generator, span, 64)?;
    let k_sup = sample_kernel_sup(spec.kernel.as_ref(), spec.t0, t_end, 64);
    let c = spec.forcing.lipschitz();
    let gronwall_bound = m_sup * libm::exp(m_sup * c * (1.0 + k_sup * span) * span);

    let mut entries = Vec::with_capacity(perturbations.len());
    for w in perturbations {
        let other = picard_run(spec, w, t_end, dt, &opts)?;
        let initial_distance = norm.distance(w, &spec.initial);
        let sup_distance = base.sup_distance(&other, norm)?;
        if initial_distance <= 1e-14 {
            entries.push(DependenceEntry {
                initial_distance,
                sup_distance,
                ratio: None,
                within_bound: sup_distance <= 2.0 * opts.tol,
            });
        } else {
            let ratio = sup_distance / initial_distance;
            entries.push(DependenceEntry {
                initial_distance,
                sup_distance,
                ratio: Some(ratio),
                within_bound: ratio <= gronwall_bound,
            });
        }
    }
    Ok(DependenceReport { semigroup_sup: m_sup, kernel_sup: k_sup, gronwall_bound, entries })
}

fn sample_semigroup_sup(gen: &DiscreteGenerator, span: f64, samples: usize) -> Result<f64> {
    let step = gen.propagator(span / samples as f64)?;
    let mut power = DMatrix::<f64>::identity(gen.dim(), gen.dim());
    let mut sup = 1.0_f64;
    for _ in 0..samples {
        power = &step * &power;
        sup = sup.max(gen.norm().operator_norm(&power));
    }
    Ok(sup)
}

fn sample_kernel_sup(kernel: &dyn MemoryKernel, t0: f64, t_end: f64, grid: usize) -> f64 {
    let mut sup = 0.0_f64;
    for i in 0..=grid {
        let s = t0 + (t_end - t0) * i as f64 / grid as f64;
        for j in i..=grid {
            let t = t0 + (t_end - t0) * j as f64 / grid as f64;
            sup = sup.max(kernel.eval(t, s));
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_beam_generator, BeamParams};
    use crate::memory::ExpKernel;
    use crate::state_space::Grid;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar_spec(
        a: f64,
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lipschitz: f64,
        width: f64,
        v: f64,
    ) -> ProblemSpec {
        ProblemSpec {
            generator: DiscreteGenerator::from_matrix(DMatrix::from_element(1, 1, a)).unwrap(),
            forcing: ForcingFunction::new(Box::new(f), 1, lipschitz, 0.0, true),
            kernel: Box::new(ExpKernel::new(width).unwrap()),
            t0: 0.0,
            initial: DVector::from_element(1, v),
        }
    }

    #[test]
    fn homogeneous_picard_matches_semigroup() {
        let spec = scalar_spec(-1.5, |_, _, _| DVector::zeros(1), 0.0, 1.0, 2.0);
        let traj = solve_mild_picard(&spec, 2.0, 1e-3, 1e-12, 30).unwrap();
        for (i, &t) in traj.times.iter().enumerate().step_by(250) {
            let exact = 2.0 * (-1.5 * t).exp();
            assert_relative_eq!(traj.states[i][0], exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn scalar_decay_oracle() {
        // A = 0, f = -y: y(t) = e^{-t}
        let spec = scalar_spec(0.0, |_, y, _| -y, 1.0, 1.0, 1.0);
        let traj = solve_mild_picard(&spec, 1.0, 1e-3, 1e-11, 60).unwrap();
        let last = traj.states.last().unwrap()[0];
        assert_relative_eq!(last, (-1.0f64).exp(), epsilon = 1e-6);
    }

    #[test]
    fn scalar_memory_toy_against_rk4() {
        // A = 0, f = -z, exponential kernel T = 1: augmented system
        // y' = -z, z' = y - z
        let spec = scalar_spec(0.0, |_, _, z| -z.clone(), 1.0, 1.0, 1.0);
        let dt = 1e-3;
        let traj = solve_mild_picard(&spec, 5.0, dt, 1e-11, 80).unwrap();
        // dense RK4 oracle on the augmented system
        let refine = 10usize;
        let h = dt / refine as f64;
        let rhs = |state: [f64; 2]| [-state[1], state[0] - state[1]];
        let mut s = [1.0_f64, 0.0];
        let mut max_err = 0.0_f64;
        for step in 1..=(5000 * refine) {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
            s[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
            s[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
            if step % refine == 0 {
                let idx = step / refine;
                max_err = max_err.max((traj.states[idx][0] - s[0]).abs());
            }
        }
        assert!(max_err <= 1e-6, "sup error vs RK4 oracle: {max_err}");
    }

    #[test]
    fn picard_nonconvergence_reports_residuals() {
        // an expanding problem iterated with a huge window and tiny budget
        let spec = scalar_spec(0.0, |_, y, _| y * 40.0, 40.0, 1.0, 1.0);
        let opts = PicardOptions { tol: 1e-12, max_iter: 4, window: 10.0, ..Default::default() };
        match solve_mild_picard_with(&spec, 10.0, 0.01, &opts) {
            Err(Error::NonConvergence { iterations, residuals, .. }) => {
                assert_eq!(iterations, 4);
                assert_eq!(residuals.len(), 4);
            }
            other => panic!("expected non-convergence, got {:?}", other.map(|t| t.meta)),
        }
    }

    #[test]
    fn picard_inits_agree_at_fixed_point() {
        let spec = scalar_spec(0.0, |_, y, z| -y - z * 0.5, 1.5, 0.5, 1.0);
        let tol = 1e-11;
        let mk = |init| {
            let opts = PicardOptions { tol, max_iter: 120, window: 0.5, init };
            solve_mild_picard_with(&spec, 2.0, 1e-3, &opts).unwrap()
        };
        let a = mk(PicardInit::Zero);
        let b = mk(PicardInit::InitialConstant);
        let norm = spec.generator.norm();
        assert!(a.sup_distance(&b, norm).unwrap() <= 2.0 * tol);
    }

    #[test]
    fn stepping_requires_exponential_kernel() {
        use crate::memory::CustomKernel;
        let mut spec = scalar_spec(0.0, |_, _, _| DVector::zeros(1), 0.0, 1.0, 1.0);
        spec.kernel = Box::new(CustomKernel::new(Box::new(|_, _| 0.0), 1.0, 1.0, 0.0));
        assert!(matches!(
            solve_strong_stepping(&spec, 1.0, 0.01),
            Err(Error::KernelNotExponential)
        ));
    }

    #[test]
    fn stepping_matches_picard_on_scalar_memory_toy() {
        let spec = scalar_spec(0.0, |_, _, z| -z.clone(), 1.0, 1.0, 1.0);
        let picard = solve_mild_picard(&spec, 3.0, 1e-3, 1e-11, 80).unwrap();
        let stepped = solve_strong_stepping(&spec, 3.0, 1e-3).unwrap();
        let gap = picard.sup_distance(&stepped, spec.generator.norm()).unwrap();
        assert!(gap <= 2e-6, "cross-solver gap {gap}");
    }

    #[test]
    fn stepping_rejects_incompatible_beam_state() {
        let grid = Grid::new(8).unwrap();
        let params = BeamParams::new(1.0, 1.0, 1.0).unwrap();
        let gen = build_beam_generator(&grid, &params).unwrap();
        let dim = gen.dim();
        let n = grid.point_count();
        let mut initial = DVector::zeros(dim);
        initial[n - 1] = 0.3; // end deflection with eta = 0: incompatible
        let spec = ProblemSpec {
            generator: gen,
            forcing: ForcingFunction::zero(dim),
            kernel: Box::new(ExpKernel::new(0.2).unwrap()),
            t0: 0.0,
            initial,
        };
        assert!(matches!(
            solve_strong_stepping(&spec, 0.5, 1e-3),
            Err(Error::IncompatibleInitial { .. })
        ));
    }

    #[test]
    fn stepping_second_order_self_convergence() {
        let spec = scalar_spec(-0.5, |t, y, z| y * (0.3 * (2.0 * t).sin()) - z * 0.4, 0.7, 0.5, 1.0);
        let reference = solve_strong_stepping(&spec, 1.0, 1.0 / 8192.0).unwrap();
        let mut errors = Vec::new();
        for &dt in &[1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0] {
            let traj = solve_strong_stepping(&spec, 1.0, dt).unwrap();
            let ratio = (reference.len() - 1) / (traj.len() - 1);
            let mut err = 0.0_f64;
            for (i, s) in traj.states.iter().enumerate() {
                err = err.max((s[0] - reference.states[i * ratio][0]).abs());
            }
            errors.push(err);
        }
        let o1 = (errors[0] / errors[1]).log2();
        let o2 = (errors[1] / errors[2]).log2();
        assert!(o1 > 1.6 && o1 < 2.4, "order {o1}");
        assert!(o2 > 1.6 && o2 < 2.4, "order {o2}");
    }

    #[test]
    fn dependence_probe_linear_scaling() {
        let spec = scalar_spec(-0.2, |_, y, z| -y * 0.5 - z * 0.3, 0.8, 1.0, 1.0);
        let v = &spec.initial;
        let perturbations = vec![
            v + DVector::from_element(1, 1e-3),
            v + DVector::from_element(1, 5e-4),
            v.clone(),
        ];
        let report = continuous_dependence_probe(&spec, &perturbations, 1.0, 1e-3).unwrap();
        assert!(report.all_within_bound(), "{report:?}");
        // linear problem: halving the perturbation halves the sup distance
        let r0 = report.entries[0].sup_distance;
        let r1 = report.entries[1].sup_distance;
        assert_relative_eq!(r0 / r1, 2.0, max_relative = 0.01);
        // identical initial data: identical trajectories
        assert!(report.entries[2].ratio.is_none());
        assert!(report.entries[2].within_bound);
    }

    #[test]
    fn time_grid_rejects_non_divisible() {
        assert!(time_grid(0.0, 1.0, 0.3).is_err());
        assert_eq!(time_grid(0.0, 1.0, 0.25).unwrap().len(), 5);
    }
}
