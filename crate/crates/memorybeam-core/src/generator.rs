//! Assembly of the discrete beam generator, semigroup evaluation, and
//! estimation of the semigroup type `(D, omega)`.
//!
//! The first-order system couples deflection `p`, velocity `q` and the
//! boundary variable `eta`:
//!
//! ```text
//! p' = q
//! q' = -W^{-1} [ K p + e_M ((m/beta) q(1) - eta) ] - nu h^2 W^{-1} K q
//! eta' = -eta/beta - (alpha - m/beta) q(1) / beta
//! ```
//!
//! `K = B^T W~ B` is the bending stiffness built from the same
//! second-difference map `B` that defines the energy, and the `e_M` term
//! imposes the recovered third derivative at the controlled end. Sharing `B`
//! between energy and generator makes the discrete energy non-increasing for
//! the homogeneous system, mirroring the contraction property of the
//! continuum model; the row-by-row ghost elimination does not have this
//! property. The `nu h^2 K q` term is a vanishing numerical viscosity: the
//! plain semi-discretization leaves grid-scale modes essentially undamped
//! (the usual loss of uniform boundary observability under refinement), which
//! would drive the measurable decay rate of the discrete semigroup to zero.
//! The viscosity is an O(h^2) consistent perturbation and is configurable.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::state_space::{
    bending_stiffness, trapezoid_state, BeamState, EnergyWeights, Grid, StateNorm,
};

/// Default strength of the vanishing viscosity term.
pub const DEFAULT_VISCOSITY: f64 = 5e-4;

/// Tolerance on the discrete boundary compatibility residual accepted by the
/// strong-solution stepper.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Tip mass and feedback gains of the boundary control law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl BeamParams {
    pub fn new(m: f64, alpha: f64, beta: f64) -> Result<Self> {
        for (value, field) in [(m, "beam.m"), (alpha, "beam.alpha"), (beta, "beam.beta")] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { field, message: "must be positive" });
            }
        }
        Ok(BeamParams { m, alpha, beta })
    }
}

/// Beam-specific data kept by generators assembled from the model.
#[derive(Debug, Clone)]
pub struct BeamInfo {
    pub grid: Grid,
    pub params: BeamParams,
    pub weights: EnergyWeights,
    pub viscosity: f64,
}

/// Dense realization of the generator together with the norm its semigroup
/// estimates are measured in.
#[derive(Debug, Clone)]
pub struct DiscreteGenerator {
    matrix: DMatrix<f64>,
    norm: StateNorm,
    beam: Option<BeamInfo>,
}

/// How a [`SemigroupEstimate`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    /// Decay rate from the spectral abscissa of the assembled matrix.
    Eigen,
    /// Decay rate from a least-squares fit of sampled semigroup norms.
    Sampled,
}

/// Measured semigroup type: `|U(t)| <= overshoot * exp(-decay_rate * t)` on
/// the sampled window. `stable` is false when the evidence does not support
/// decay, in which case `decay_rate` may be nonpositive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupEstimate {
    pub overshoot: f64,
    pub decay_rate: f64,
    pub method: EstimateMethod,
    pub stable: bool,
}

/// Builds the beam generator with default energy weights and viscosity.
pub fn build_beam_generator(grid: &Grid, params: &BeamParams) -> Result<DiscreteGenerator> {
    build_beam_generator_with(grid, params, &EnergyWeights::default(), DEFAULT_VISCOSITY)
}

/// Full-control assembly. `viscosity = 0` recovers the unstabilized scheme.
pub fn build_beam_generator_with(
    grid: &Grid,
    params: &BeamParams,
    weights: &EnergyWeights,
    viscosity: f64,
) -> Result<DiscreteGenerator> {
    weights.validate()?;
    if !(viscosity >= 0.0) || !viscosity.is_finite() {
        return Err(Error::InvalidParameter {
            field: "beam.viscosity",
            message: "must be nonnegative",
        });
    }
    let n = grid.point_count();
    let dim = grid.flat_dim();
    let k = bending_stiffness(grid);
    let w_state = trapezoid_state(grid);
    let h = grid.spacing();
    let nu = viscosity * h * h;

    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    for i in 0..n {
        let inv_w = 1.0 / w_state[i];
        for j in 0..n {
            let kij = k[(i, j)];
            if kij == 0.0 {
                continue;
            }
            a[(n + i, j)] = -kij * inv_w;
            a[(n + i, n + j)] += -nu * kij * inv_w;
        }
    }
    // recovered third derivative at the controlled end enters the last
    // velocity row
    let inv_wm = 1.0 / w_state[n - 1];
    a[(n + n - 1, n + n - 1)] += -(params.m / params.beta) * inv_wm;
    a[(n + n - 1, dim - 1)] += inv_wm;
    // boundary variable dynamics
    a[(dim - 1, dim - 1)] = -1.0 / params.beta;
    a[(dim - 1, n + n - 1)] = -(params.alpha - params.m / params.beta) / params.beta;

    let norm = StateNorm::energy(grid, weights, params)?;
    Ok(DiscreteGenerator {
        matrix: a,
        norm,
        beam: Some(BeamInfo {
            grid: *grid,
            params: *params,
            weights: *weights,
            viscosity,
        }),
    })
}

impl DiscreteGenerator {
    /// Wraps an arbitrary square matrix as a generator, measured in the
    /// Euclidean norm. Used for scalar and toy systems.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                field: "matrix",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter { field: "matrix", message: "non-finite entry" });
        }
        let dim = matrix.nrows();
        Ok(DiscreteGenerator { matrix, norm: StateNorm::euclidean(dim), beam: None })
    }

    /// As [`from_matrix`](Self::from_matrix) but with a caller-provided norm.
    pub fn from_matrix_with_norm(matrix: DMatrix<f64>, norm: StateNorm) -> Result<Self> {
        if matrix.nrows() != norm.dim() {
            return Err(Error::DimensionMismatch {
                field: "norm",
                expected: matrix.nrows(),
                actual: norm.dim(),
            });
        }
        let mut gen = Self::from_matrix(matrix)?;
        gen.norm = norm;
        Ok(gen)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn norm(&self) -> &StateNorm {
        &self.norm
    }

    pub fn beam(&self) -> Option<&BeamInfo> {
        self.beam.as_ref()
    }

    /// One-step propagator `exp(dt A)`.
    pub fn propagator(&self, dt: f64) -> Result<DMatrix<f64>> {
        if dt < 0.0 {
            return Err(Error::NegativeTime { t: dt });
        }
        linalg::expm(&(&self.matrix * dt))
    }

    /// `exp(t A) y0`. Dense scaling-and-squaring at desk scale, adaptive
    /// integration of `y' = A y` beyond [`linalg::DENSE_EXPM_LIMIT`].
    pub fn apply_semigroup(&self, t: f64, y0: &DVector<f64>) -> Result<DVector<f64>> {
        if t < 0.0 {
            return Err(Error::NegativeTime { t });
        }
        if y0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                field: "y0",
                expected: self.dim(),
                actual: y0.len(),
            });
        }
        if t == 0.0 {
            return Ok(y0.clone());
        }
        if self.dim() <= linalg::DENSE_EXPM_LIMIT {
            Ok(self.propagator(t)? * y0)
        } else {
            linalg::expm_action_adaptive(&self.matrix, t, y0, 1e-12)
        }
    }

    /// Eigenvalues of the assembled matrix as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> Result<Vec<(f64, f64)>> {
        linalg::eigenvalues(&self.matrix)
    }

    /// Estimates the semigroup type over `[0, t_max]`. The decay rate comes
    /// from the spectral abscissa when the eigensolve succeeds and from a
    /// log-fit of the sampled norms otherwise; the overshoot is the supremum
    /// of `|exp(t A)| e^{omega t}` over the sample times, measured in the
    /// generator's norm.
    pub fn estimate_semigroup_type(&self, t_max: f64, samples: usize) -> Result<SemigroupEstimate> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter { field: "t_max", message: "must be positive" });
        }
        if samples < 8 {
            return Err(Error::InvalidParameter { field: "samples", message: "need at least 8" });
        }
        let sampled = self.sample_norms(t_max, samples)?;
        match self.eigenvalues() {
            Ok(eigs) => {
                let abscissa = eigs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
                let omega = -abscissa;
                Ok(finish_estimate(&sampled, omega, EstimateMethod::Eigen))
            }
            Err(_) => Ok(self.estimate_from_samples(&sampled)),
        }
    }

    /// Sampling-only variant of [`estimate_semigroup_type`]: a least-squares
    /// fit of `log |U(t)|` provides the decay rate.
    pub fn estimate_semigroup_type_sampled(
        &self,
        t_max: f64,
        samples: usize,
    ) -> Result<SemigroupEstimate> {
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter { field: "t_max", message: "must be positive" });
        }
        if samples < 8 {
            return Err(Error::InvalidParameter { field: "samples", message: "need at least 8" });
        }
        let sampled = self.sample_norms(t_max, samples)?;
        Ok(self.estimate_from_samples(&sampled))
    }

    fn sample_norms(&self, t_max: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
        let step = self.propagator(t_max / samples as f64)?;
        let mut power = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mut out = Vec::with_capacity(samples + 1);
        for k in 0..=samples {
            let t = t_max * k as f64 / samples as f64;
            out.push((t, self.norm.operator_norm(&power)));
            if k < samples {
                power = &step * &power;
            }
        }
        Ok(out)
    }

    fn estimate_from_samples(&self, sampled: &[(f64, f64)]) -> SemigroupEstimate {
        // least-squares slope of log |U(t)| over the positive-time samples
        let pts: Vec<(f64, f64)> = sampled
            .iter()
            .filter(|(t, n)| *t > 0.0 && *n > 1e-300)
            .map(|(t, n)| (*t, libm::log(*n)))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        finish_estimate(sampled, -slope, EstimateMethod::Sampled)
    }
}

fn finish_estimate(sampled: &[(f64, f64)], omega: f64, method: EstimateMethod) -> SemigroupEstimate {
    let stable = omega > 0.0 && omega.is_finite();
    let mut overshoot = 1.0_f64;
    for &(t, norm) in sampled {
        let value = norm * libm::exp(omega * t);
        if value.is_finite() {
            overshoot = overshoot.max(value);
        }
    }
    SemigroupEstimate { overshoot, decay_rate: omega, method, stable }
}

// ---------------------------------------------------------------------------
// Boundary compatibility
// ---------------------------------------------------------------------------

/// One-sided second-order third derivative of the deflection samples at
/// `x = 1`.
pub fn boundary_third_derivative(grid: &Grid, p: &DVector<f64>) -> Result<f64> {
    let n = grid.point_count();
    if p.len() != n {
        return Err(Error::DimensionMismatch { field: "p", expected: n, actual: p.len() });
    }
    let h = grid.spacing();
    let h3 = h * h * h;
    Ok((2.5 * p[n - 1] - 9.0 * p[n - 2] + 12.0 * p[n - 3] - 7.0 * p[n - 4] + 1.5 * p[n - 5]) / h3)
}

/// The boundary value `eta = -p_xxx(1) + (m/beta) q(1)` evaluated with the
/// discrete stencil. Deriving `eta` this way makes the compatibility
/// condition hold exactly for constructed initial data.
pub fn compatible_eta(grid: &Grid, params: &BeamParams, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    let n = grid.point_count();
    if q.len() != n {
        return Err(Error::DimensionMismatch { field: "q", expected: n, actual: q.len() });
    }
    Ok(-boundary_third_derivative(grid, p)? + params.m / params.beta * q[n - 1])
}

/// Residual of the compatibility condition for a given state.
pub fn compatibility_residual(grid: &Grid, params: &BeamParams, state: &BeamState) -> Result<f64> {
    Ok(state.eta - compatible_eta(grid, params, &state.p, &state.q)?)
}

// ---------------------------------------------------------------------------
// Plain-text export
// ---------------------------------------------------------------------------

impl DiscreteGenerator {
    /// Coordinate-format text dump of the matrix for external inspection.
    /// Header: a comment line, then `rows cols nnz`; entries follow as
    /// 1-based `i j value` triplets in row-major order.
    pub fn to_coordinate_text(&self) -> String {
        let a = &self.matrix;
        let mut entries = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    entries.push((i + 1, j + 1, a[(i, j)]));
                }
            }
        }
        let mut out = String::new();
        out.push_str("% memorybeam generator matrix: coordinate real, 1-based, row-major\n");
        out.push_str(&format!("{} {} {}\n", a.nrows(), a.ncols(), entries.len()));
        for (i, j, v) in entries {
            out.push_str(&format!("{i} {j} {v:e}\n"));
        }
        out
    }
}
