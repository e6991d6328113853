//! Fading-memory machinery: the kernel contract, the exponential kernel, the
//! memory integral `z(t) = int_{t0}^t k(t,s) y(s) ds`, and its exact
//! reduction to a first-order filter for the exponential kernel.

use alloc::boxed::Box;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Contract satisfied by memory kernels: nonnegative on `t >= s >= t0`,
/// exponentially bounded by `amp * exp(-rate (t - s))`, and Lipschitz in the
/// first argument on bounded windows.
pub trait MemoryKernel: Send + Sync {
    fn eval(&self, t: f64, s: f64) -> f64;

    /// Amplitude `a` of the exponential bound (k3).
    fn bound_amp(&self) -> f64;

    /// Rate `b` of the exponential bound (k3).
    fn bound_rate(&self) -> f64;

    /// Declared Lipschitz constant of `t -> k(t, s)` on `[t0, window_end]`.
    fn time_lipschitz(&self, window_end: f64) -> f64;

    /// Width `T` when the kernel is exactly `exp(-(t-s)/T)/T`, enabling the
    /// filter reduction used by the time stepper.
    fn exponential_width(&self) -> Option<f64> {
        None
    }
}

/// The exponential kernel `k(t,s) = exp(-(t-s)/T)/T`: a fading delay of
/// width `T`, with `a = b = 1/T` and time-Lipschitz constant `1/T^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpKernel {
    width: f64,
}

impl ExpKernel {
    pub fn new(width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::InvalidParameter { field: "kernel.T", message: "must be positive" });
        }
        Ok(ExpKernel { width })
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

impl MemoryKernel for ExpKernel {
    fn eval(&self, t: f64, s: f64) -> f64 {
        libm::exp(-(t - s) / self.width) / self.width
    }

    fn bound_amp(&self) -> f64 {
        1.0 / self.width
    }

    fn bound_rate(&self) -> f64 {
        1.0 / self.width
    }

    fn time_lipschitz(&self, _window_end: f64) -> f64 {
        1.0 / (self.width * self.width)
    }

    fn exponential_width(&self) -> Option<f64> {
        Some(self.width)
    }
}

/// Kernel defined by a closure plus declared bound and Lipschitz constants.
/// The declarations are what [`check_kernel_conditions`] verifies.
pub struct CustomKernel {
    eval: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    amp: f64,
    rate: f64,
    lipschitz: f64,
}

impl CustomKernel {
    pub fn new(
        eval: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        amp: f64,
        rate: f64,
        lipschitz: f64,
    ) -> Self {
        CustomKernel { eval, amp, rate, lipschitz }
    }
}

impl MemoryKernel for CustomKernel {
    fn eval(&self, t: f64, s: f64) -> f64 {
        (self.eval)(t, s)
    }

    fn bound_amp(&self) -> f64 {
        self.amp
    }

    fn bound_rate(&self) -> f64 {
        self.rate
    }

    fn time_lipschitz(&self, _window_end: f64) -> f64 {
        self.lipschitz
    }
}

/// Trapezoid approximation of `z(t) = int_{t0}^t k(t,s) y(s) ds` from a
/// uniformly sampled trajectory. `t` may fall between samples; the final
/// partial interval then uses linearly interpolated data.
pub fn memory_integral_quadrature(
    kernel: &dyn MemoryKernel,
    times: &[f64],
    states: &[DVector<f64>],
    t: f64,
) -> Result<DVector<f64>> {
    if times.len() != states.len() || times.is_empty() {
        return Err(Error::InsufficientData { field: "trajectory" });
    }
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    let span_tol = 1e-12 * (1.0 + t_end.abs());
    if t < t0 - span_tol || t > t_end + span_tol {
        return Err(Error::TimeOutsideSpan { t, start: t0, end: t_end });
    }
    let t = t.clamp(t0, t_end);
    let dim = states[0].len();
    let mut acc = DVector::<f64>::zeros(dim);
    if t <= t0 {
        return Ok(acc);
    }
    // full intervals below t
    let mut idx = 0;
    while idx + 1 < times.len() && times[idx + 1] <= t + span_tol {
        let dt = times[idx + 1] - times[idx];
        let f0 = &states[idx] * kernel.eval(t, times[idx]);
        let f1 = &states[idx + 1] * kernel.eval(t, times[idx + 1]);
        acc += (f0 + f1) * (0.5 * dt);
        idx += 1;
    }
    // partial tail interval
    let t_last = times[idx];
    if t > t_last + span_tol && idx + 1 < times.len() {
        let frac = (t - t_last) / (times[idx + 1] - t_last);
        let y_t = &states[idx] * (1.0 - frac) + &states[idx + 1] * frac;
        let f0 = &states[idx] * kernel.eval(t, t_last);
        let f1 = y_t * kernel.eval(t, t);
        acc += (f0 + f1) * (0.5 * (t - t_last));
    }
    Ok(acc)
}

/// Right-hand side of the filter that reproduces the exponential-kernel
/// memory integral: `z' = (y - z)/T` with `z(t0) = 0`.
pub fn aux_ode_rhs(y: &DVector<f64>, z: &DVector<f64>, width: f64) -> Result<DVector<f64>> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch { field: "z", expected: y.len(), actual: z.len() });
    }
    if !(width > 0.0) {
        return Err(Error::InvalidParameter { field: "kernel.T", message: "must be positive" });
    }
    Ok((y - z) / width)
}

/// Sampled verification of the kernel contract on `[t0, window_end]`:
/// continuity modulus, Lipschitz ratio against the declared constant, and
/// exponential-bound violations.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConditionReport {
    pub continuity_modulus: f64,
    pub continuity_ok: bool,
    pub max_lipschitz_ratio: f64,
    pub declared_lipschitz: f64,
    pub lipschitz_ok: bool,
    pub bound_violations: usize,
    pub bound_ok: bool,
    pub samples: usize,
}

impl KernelConditionReport {
    pub fn passed(&self) -> bool {
        self.continuity_ok && self.lipschitz_ok && self.bound_ok
    }
}

pub fn check_kernel_conditions(
    kernel: &dyn MemoryKernel,
    t0: f64,
    window_end: f64,
    sample_count: usize,
    seed: u64,
) -> Result<KernelConditionReport> {
    if !(window_end > t0) {
        return Err(Error::InvalidParameter {
            field: "window_end",
            message: "must exceed the initial time",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = window_end - t0;
    let declared = kernel.time_lipschitz(window_end);
    let delta = 1e-6 * span;

    let mut continuity_modulus = 0.0_f64;
    let mut max_ratio = 0.0_f64;
    let mut bound_violations = 0usize;
    for _ in 0..sample_count {
        let s = t0 + rng.gen::<f64>() * span;
        let t = s + rng.gen::<f64>() * (window_end - s);
        // (k3) bound
        let bound = kernel.bound_amp() * libm::exp(-kernel.bound_rate() * (t - s));
        if kernel.eval(t, s) > bound * (1.0 + 1e-12) {
            bound_violations += 1;
        }
        // continuity modulus at scale delta
        if t + delta <= window_end {
            continuity_modulus =
                continuity_modulus.max(libm::fabs(kernel.eval(t + delta, s) - kernel.eval(t, s)));
        }
        // Lipschitz ratio at a random second time
        let t2 = (s + rng.gen::<f64>() * (window_end - s)).max(s);
        if libm::fabs(t2 - t) > 1e-9 {
            let ratio = libm::fabs(kernel.eval(t2, s) - kernel.eval(t, s)) / libm::fabs(t2 - t);
            max_ratio = max_ratio.max(ratio);
        }
    }
    let scale = kernel.bound_amp().max(1e-300);
    let continuity_ok = continuity_modulus <= (declared * delta * 10.0).max(1e-7 * scale);
    let lipschitz_ok = max_ratio <= declared * (1.0 + 1e-9);
    Ok(KernelConditionReport {
        continuity_modulus,
        continuity_ok,
        max_lipschitz_ratio: max_ratio,
        declared_lipschitz: declared,
        lipschitz_ok,
        bound_violations,
        bound_ok: bound_violations == 0,
        samples: sample_count,
    })
}
