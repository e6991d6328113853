//! Certification of the exponential-decay conditions, the decay envelope for
//! differences of mild solutions, attractor verification, and empirical decay
//! fits.
//!
//! A certificate collects the semigroup type `(D, omega)`, the forcing
//! Lipschitz constant `C`, and the kernel bound `(a, b)`. The strict
//! inequalities
//!
//! ```text
//! C < omega / D,    b > omega,    a < (b - omega)(omega - C D) / (C D)
//! ```
//!
//! imply that any two mild solutions approach each other at least as fast as
//! `D |w - v| exp([C D (1 + a/(b - omega)) - omega] (t - t0))`. Conditions
//! are always recomputed from the raw fields and evaluated without epsilon
//! slack; simulation comparisons take a configurable multiplicative slack
//! instead.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::solver::{ForcingFunction, Trajectory};
use crate::state_space::StateNorm;

/// Inputs of the general decay certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub lipschitz: f64,
    pub overshoot: f64,
    pub decay_rate: f64,
    pub kernel_amp: f64,
    pub kernel_rate: f64,
}

impl StabilityCertificate {
    /// `C < omega / D`
    pub fn condition_lipschitz(&self) -> bool {
        self.lipschitz < self.decay_rate / self.overshoot
    }

    /// `b > omega`
    pub fn condition_kernel_rate(&self) -> bool {
        self.kernel_rate > self.decay_rate
    }

    /// `a < (b - omega)(omega - C D) / (C D)`
    pub fn condition_kernel_amp(&self) -> bool {
        let cd = self.lipschitz * self.overshoot;
        self.kernel_amp < (self.kernel_rate - self.decay_rate) * (self.decay_rate - cd) / cd
    }

    pub fn certified(&self) -> bool {
        self.condition_lipschitz() && self.condition_kernel_rate() && self.condition_kernel_amp()
    }

    /// `C D (1 + a / (b - omega)) - omega`; negative whenever certified.
    pub fn decay_exponent(&self) -> f64 {
        self.lipschitz * self.overshoot
            * (1.0 + self.kernel_amp / (self.kernel_rate - self.decay_rate))
            - self.decay_rate
    }
}

/// Evaluates the general certificate. All inputs must be positive and the
/// overshoot at least one.
pub fn certify_general(
    lipschitz: f64,
    overshoot: f64,
    decay_rate: f64,
    kernel_amp: f64,
    kernel_rate: f64,
) -> Result<StabilityCertificate> {
    for (value, field) in [
        (lipschitz, "C"),
        (overshoot, "D"),
        (decay_rate, "omega"),
        (kernel_amp, "a"),
        (kernel_rate, "b"),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter { field, message: "must be positive" });
        }
    }
    if overshoot < 1.0 {
        return Err(Error::InvalidParameter { field: "D", message: "must be at least 1" });
    }
    Ok(StabilityCertificate {
        lipschitz,
        overshoot,
        decay_rate,
        kernel_amp,
        kernel_rate,
    })
}

/// Specialization to the beam with a contraction semigroup and the
/// exponential kernel of width `T`: `C < omega/2` and
/// `T < (omega - 2C) / (omega (omega - C))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamStabilityCertificate {
    pub lipschitz: f64,
    pub decay_rate: f64,
    pub width: f64,
}

impl BeamStabilityCertificate {
    pub fn condition_lipschitz(&self) -> bool {
        self.lipschitz < self.decay_rate / 2.0
    }

    pub fn condition_width(&self) -> bool {
        self.width
            < (self.decay_rate - 2.0 * self.lipschitz)
                / (self.decay_rate * (self.decay_rate - self.lipschitz))
    }

    pub fn certified(&self) -> bool {
        self.condition_lipschitz() && self.condition_width()
    }

    /// The equivalent general certificate with `D = 1`, `a = b = 1/T`.
    pub fn general(&self) -> Result<StabilityCertificate> {
        certify_general(self.lipschitz, 1.0, self.decay_rate, 1.0 / self.width, 1.0 / self.width)
    }
}

/// Evaluates the beam certificate and cross-checks it against the general
/// one; a disagreement is an internal error.
pub fn certify_beam(lipschitz: f64, decay_rate: f64, width: f64) -> Result<BeamStabilityCertificate> {
    for (value, field) in [(lipschitz, "C"), (decay_rate, "omega"), (width, "kernel.T")] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter { field, message: "must be positive" });
        }
    }
    let cert = BeamStabilityCertificate { lipschitz, decay_rate, width };
    if cert.certified() != cert.general()?.certified() {
        return Err(Error::Numerical {
            message: "beam certificate disagrees with the general certificate",
        });
    }
    Ok(cert)
}

/// The decay envelope `D dist0 exp(decay_exponent (t - t0))`.
pub fn decay_envelope(cert: &StabilityCertificate, dist0: f64, t: f64, t0: f64) -> Result<f64> {
    if t < t0 {
        return Err(Error::NegativeTime { t: t - t0 });
    }
    if !(dist0 >= 0.0) {
        return Err(Error::InvalidParameter { field: "dist0", message: "must be nonnegative" });
    }
    Ok(cert.overshoot * dist0 * libm::exp(cert.decay_exponent() * (t - t0)))
}

/// Result of checking a certified envelope against a pair of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub initial_distance: f64,
    /// Largest observed `distance / envelope` ratio over the grid.
    pub max_ratio: f64,
    pub violations: usize,
    pub holds: bool,
    /// For each requested epsilon: the first grid time after which the
    /// distance stays below it, if any.
    pub epsilon_times: Vec<(f64, Option<f64>)>,
}

/// Asserts `|z(t) - y(t)| <= envelope(t) (1 + slack)` on the shared grid and
/// records the empirical epsilon-crossing times.
pub fn verify_envelope_on_pair(
    a: &Trajectory,
    b: &Trajectory,
    cert: &StabilityCertificate,
    norm: &StateNorm,
    slack: f64,
    epsilons: &[f64],
) -> Result<EnvelopeReport> {
    if !a.shares_grid(b) {
        return Err(Error::GridMismatch);
    }
    let t0 = a.times[0];
    let distances: Vec<f64> = a
        .states
        .iter()
        .zip(b.states.iter())
        .map(|(x, y)| norm.distance(x, y))
        .collect();
    let initial_distance = distances[0];
    let mut max_ratio = 0.0_f64;
    let mut violations = 0usize;
    for (i, &d) in distances.iter().enumerate() {
        let envelope = decay_envelope(cert, initial_distance, a.times[i], t0)?;
        if envelope > 0.0 {
            max_ratio = max_ratio.max(d / envelope);
        }
        if d > envelope * (1.0 + slack) {
            violations += 1;
        }
    }
    let epsilon_times = epsilons
        .iter()
        .map(|&eps| {
            // last time the distance exceeds eps; the crossing is the next
            // grid point
            let mut crossing = Some(a.times[0]);
            for i in (0..distances.len()).rev() {
                if distances[i] > eps {
                    crossing = if i + 1 < a.times.len() { Some(a.times[i + 1]) } else { None };
                    break;
                }
            }
            (eps, crossing)
        })
        .collect();
    Ok(EnvelopeReport {
        initial_distance,
        max_ratio,
        violations,
        holds: violations == 0,
        epsilon_times,
    })
}

/// Per-epsilon outcome of the attractor check.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorEpsilon {
    pub epsilon: f64,
    /// Time by which the certificate predicts all trajectories from the set
    /// are within epsilon of zero.
    pub predicted_time: f64,
    /// Whether every trajectory satisfies the prediction (with slack).
    pub achieved: bool,
}

/// Result of verifying that the zero solution attracts a batch of
/// trajectories started in a bounded set.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorReport {
    /// `D * diam(Omega)`: the uniform bound on all trajectories.
    pub bound: f64,
    pub sup_norm: f64,
    pub bounded: bool,
    pub epsilons: Vec<AttractorEpsilon>,
}

impl AttractorReport {
    pub fn passed(&self) -> bool {
        self.bounded && self.epsilons.iter().all(|e| e.achieved)
    }
}

/// Checks that trajectories started in a set of the given diameter
/// containing zero decay below each epsilon by the certificate-predicted
/// time `log(D diam / eps) / |decay_exponent|`, and stay bounded by
/// `D diam (1 + slack)`. Requires `f(., 0, 0) = 0`.
pub fn verify_attractor(
    trajectories: &[Trajectory],
    forcing: &ForcingFunction,
    cert: &StabilityCertificate,
    norm: &StateNorm,
    diameter: f64,
    epsilons: &[f64],
    slack: f64,
) -> Result<AttractorReport> {
    if !forcing.zero_at_zero() {
        return Err(Error::InvalidParameter {
            field: "forcing",
            message: "attractor check requires f(., 0, 0) = 0",
        });
    }
    if trajectories.is_empty() {
        return Err(Error::InsufficientData { field: "trajectories" });
    }
    let exponent = cert.decay_exponent();
    if !(exponent < 0.0) {
        return Err(Error::InvalidParameter {
            field: "certificate",
            message: "decay exponent must be negative",
        });
    }
    let bound = cert.overshoot * diameter;
    let mut sup_norm = 0.0_f64;
    for traj in trajectories {
        for state in &traj.states {
            sup_norm = sup_norm.max(norm.vector_norm(state));
        }
    }
    let bounded = sup_norm <= bound * (1.0 + slack);

    let t0 = trajectories[0].times[0];
    let mut epsilons_out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let predicted = libm::log(bound / eps) / (-exponent);
        let deadline = t0 + predicted * (1.0 + slack);
        let mut achieved = true;
        for traj in trajectories {
            for (i, &t) in traj.times.iter().enumerate() {
                if t >= deadline && norm.vector_norm(&traj.states[i]) > eps {
                    achieved = false;
                    break;
                }
            }
            // the horizon must actually reach the deadline
            if *traj.times.last().unwrap() < deadline {
                achieved = false;
            }
            if !achieved {
                break;
            }
        }
        epsilons_out.push(AttractorEpsilon { epsilon: eps, predicted_time: predicted, achieved });
    }
    Ok(AttractorReport { bound, sup_norm, bounded, epsilons: epsilons_out })
}

/// Least-squares slope of `log |y(t)|` over `[t0 + t_skip, t_end]`, ignoring
/// samples within rounding distance of zero.
pub fn fit_decay_rate(traj: &Trajectory, norm: &StateNorm, t_skip: f64) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData { field: "trajectory" });
    }
    let norms = traj.norms(norm);
    let initial = norms[0];
    if !norms.iter().skip(1).any(|&n| n < initial) {
        return Err(Error::NoDecay);
    }
    let floor = 1e3 * f64::EPSILON * initial;
    let t_start = traj.times[0] + t_skip;
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(norms.iter())
        .filter(|(&t, &n)| t >= t_start && n > floor)
        .map(|(&t, &n)| (t, libm::log(n)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData { field: "decay fit samples" });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::InsufficientData { field: "decay fit samples" });
    }
    Ok((n * sxy - sx * sy) / denom)
}
