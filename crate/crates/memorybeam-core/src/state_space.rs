//! Discretized state space for the beam: uniform grid, states `(p, q, eta)`,
//! vector-space operations, and the energy form that provides the metric for
//! every stability statement.
//!
//! The beam occupies `[0, 1]`. Deflection and velocity are sampled at the
//! interior nodes `x_i = i h`, `i = 1..n_interior`, and at the controlled end
//! `x = 1`; the clamped node `x = 0` is eliminated. A state flattens to
//! `[p_1..p_{n+1}, q_1..q_{n+1}, eta]`, which is also the CSV row order.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::BeamParams;
use crate::linalg;

/// Uniform spatial grid on `[0, 1]` with `n_interior` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n_interior: usize,
}

/// Smallest admissible interior node count: the five-point stencil must fit.
pub const MIN_INTERIOR_NODES: usize = 4;

impl Grid {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior < MIN_INTERIOR_NODES {
            return Err(Error::GridTooSmall { n_interior, minimum: MIN_INTERIOR_NODES });
        }
        Ok(Grid { n_interior })
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Grid spacing `h = 1 / (n_interior + 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_interior as f64 + 1.0)
    }

    /// Number of sampled nodes per field (interior nodes plus `x = 1`).
    pub fn point_count(&self) -> usize {
        self.n_interior + 1
    }

    /// Dimension of the flattened state `(p, q, eta)`.
    pub fn flat_dim(&self) -> usize {
        2 * self.point_count() + 1
    }

    /// Coordinates of the sampled nodes, `x_i = i h` for `i = 1..=n+1`.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.point_count()).map(|i| i as f64 * h).collect()
    }
}

/// State of the discretized system: deflection samples `p`, velocity samples
/// `q` (both including the node `x = 1`) and the boundary variable `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamState {
    pub p: DVector<f64>,
    pub q: DVector<f64>,
    pub eta: f64,
}

impl BeamState {
    pub fn new(p: DVector<f64>, q: DVector<f64>, eta: f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { field: "q", expected: p.len(), actual: q.len() });
        }
        let state = BeamState { p, q, eta };
        state.check_finite()?;
        Ok(state)
    }

    pub fn zero(grid: &Grid) -> Self {
        let n = grid.point_count();
        BeamState { p: DVector::zeros(n), q: DVector::zeros(n), eta: 0.0 }
    }

    fn check_finite(&self) -> Result<()> {
        if self.p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter { field: "p", message: "non-finite entry" });
        }
        if self.q.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter { field: "q", message: "non-finite entry" });
        }
        if !self.eta.is_finite() {
            return Err(Error::InvalidParameter { field: "eta", message: "non-finite value" });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &BeamState) -> Result<()> {
        if self.p.len() != other.p.len() {
            return Err(Error::DimensionMismatch {
                field: "p",
                expected: self.p.len(),
                actual: other.p.len(),
            });
        }
        if self.q.len() != other.q.len() {
            return Err(Error::DimensionMismatch {
                field: "q",
                expected: self.q.len(),
                actual: other.q.len(),
            });
        }
        Ok(())
    }

    /// `alpha * x + y`, componentwise over `(p, q, eta)`.
    pub fn axpy(alpha: f64, x: &BeamState, y: &BeamState) -> Result<BeamState> {
        x.check_same_shape(y)?;
        Ok(BeamState {
            p: &x.p * alpha + &y.p,
            q: &x.q * alpha + &y.q,
            eta: alpha * x.eta + y.eta,
        })
    }

    pub fn scale(&self, alpha: f64) -> BeamState {
        BeamState { p: &self.p * alpha, q: &self.q * alpha, eta: alpha * self.eta }
    }

    pub fn sub(&self, other: &BeamState) -> Result<BeamState> {
        self.check_same_shape(other)?;
        Ok(BeamState { p: &self.p - &other.p, q: &self.q - &other.q, eta: self.eta - other.eta })
    }

    /// Euclidean inner product of the flattened states.
    pub fn dot(&self, other: &BeamState) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.p.dot(&other.p) + self.q.dot(&other.q) + self.eta * other.eta)
    }

    /// Flattens to `[p_1..p_{n+1}, q_1..q_{n+1}, eta]`.
    pub fn flatten(&self) -> DVector<f64> {
        let n = self.p.len();
        let mut out = DVector::zeros(2 * n + 1);
        out.rows_mut(0, n).copy_from(&self.p);
        out.rows_mut(n, n).copy_from(&self.q);
        out[2 * n] = self.eta;
        out
    }

    pub fn from_flat(grid: &Grid, flat: &DVector<f64>) -> Result<Self> {
        let n = grid.point_count();
        if flat.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch {
                field: "flat",
                expected: 2 * n + 1,
                actual: flat.len(),
            });
        }
        BeamState::new(
            DVector::from_iterator(n, flat.rows(0, n).iter().cloned()),
            DVector::from_iterator(n, flat.rows(n, n).iter().cloned()),
            flat[2 * n],
        )
    }
}

/// Weights of the three energy contributions. The defaults `(1, 1, 1)` keep
/// the discrete generator dissipative; the boundary feedback form stays
/// negative semidefinite as long as `w_bend = w_kin <= 4 w_eta` when
/// `alpha = m / beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    pub w_bend: f64,
    pub w_kin: f64,
    pub w_eta: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights { w_bend: 1.0, w_kin: 1.0, w_eta: 1.0 }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        for (value, field) in [
            (self.w_bend, "energy.w_bend"),
            (self.w_kin, "energy.w_kin"),
            (self.w_eta, "energy.w_eta"),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { field, message: "must be positive" });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Discrete differential structure shared by the energy and the generator.
// ---------------------------------------------------------------------------

/// Second-difference map `B`: rows are the nodes `0..=n+1`, columns the state
/// nodes `1..=n+1`. The clamped end is closed by symmetric reflection from
/// `u(0) = u_x(0) = 0`; the row at `x = 1` uses a one-sided stencil so the
/// bending energy of states with nonzero end moment is not truncated.
pub(crate) fn second_difference(grid: &Grid) -> DMatrix<f64> {
    let n = grid.point_count();
    let h2 = grid.spacing() * grid.spacing();
    let mut b = DMatrix::<f64>::zeros(n + 1, n);
    b[(0, 0)] = 2.0 / h2;
    for i in 1..n {
        if i >= 2 {
            b[(i, i - 2)] = 1.0 / h2;
        }
        b[(i, i - 1)] = -2.0 / h2;
        b[(i, i)] = 1.0 / h2;
    }
    b[(n, n - 1)] = 2.0 / h2;
    b[(n, n - 2)] = -5.0 / h2;
    b[(n, n - 3)] = 4.0 / h2;
    b[(n, n - 4)] = -1.0 / h2;
    b
}

/// Trapezoid weights over all nodes `0..=n+1` (bending quadrature).
pub(crate) fn trapezoid_full(grid: &Grid) -> DVector<f64> {
    let n = grid.point_count();
    let h = grid.spacing();
    let mut w = DVector::from_element(n + 1, h);
    w[0] = h / 2.0;
    w[n] = h / 2.0;
    w
}

/// Trapezoid weights restricted to the state nodes `1..=n+1` (kinetic
/// quadrature; the clamped node contributes nothing since `q(0) = 0`).
pub(crate) fn trapezoid_state(grid: &Grid) -> DVector<f64> {
    let n = grid.point_count();
    let h = grid.spacing();
    let mut w = DVector::from_element(n, h);
    w[n - 1] = h / 2.0;
    w
}

/// Stiffness form `K = B^T W B` of the bending energy.
pub(crate) fn bending_stiffness(grid: &Grid) -> DMatrix<f64> {
    let b = second_difference(grid);
    let w = trapezoid_full(grid);
    let n = grid.point_count();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for r in 0..n + 1 {
        for i in 0..n {
            let bi = b[(r, i)];
            if bi == 0.0 {
                continue;
            }
            for j in 0..n {
                let bj = b[(r, j)];
                if bj != 0.0 {
                    k[(i, j)] += w[r] * bi * bj;
                }
            }
        }
    }
    k
}

/// Discrete energy
/// `E = w_bend/2 * sum_i w_i (D2 p)_i^2 + w_kin/2 * sum_i w_i q_i^2
///    + w_eta * beta/(2m) * eta^2`.
pub fn energy(
    state: &BeamState,
    grid: &Grid,
    weights: &EnergyWeights,
    beta: f64,
    m: f64,
) -> Result<f64> {
    weights.validate()?;
    if beta <= 0.0 {
        return Err(Error::InvalidParameter { field: "beta", message: "must be positive" });
    }
    if m <= 0.0 {
        return Err(Error::InvalidParameter { field: "m", message: "must be positive" });
    }
    let n = grid.point_count();
    if state.p.len() != n {
        return Err(Error::DimensionMismatch { field: "p", expected: n, actual: state.p.len() });
    }
    if state.q.len() != n {
        return Err(Error::DimensionMismatch { field: "q", expected: n, actual: state.q.len() });
    }
    let b = second_difference(grid);
    let w_full = trapezoid_full(grid);
    let w_state = trapezoid_state(grid);
    let d2 = &b * &state.p;
    let bending: f64 = d2.iter().zip(w_full.iter()).map(|(v, w)| w * v * v).sum();
    let kinetic: f64 = state.q.iter().zip(w_state.iter()).map(|(v, w)| w * v * v).sum();
    Ok(0.5 * weights.w_bend * bending
        + 0.5 * weights.w_kin * kinetic
        + weights.w_eta * beta / (2.0 * m) * state.eta * state.eta)
}

/// Square root of the energy; the metric used throughout `stability`.
pub fn norm(
    state: &BeamState,
    grid: &Grid,
    weights: &EnergyWeights,
    beta: f64,
    m: f64,
) -> Result<f64> {
    Ok(libm::sqrt(energy(state, grid, weights, beta, m)?))
}

/// Gram matrix `G` with `E(y) = y^T G y / 2` on flattened states.
pub fn energy_gram(grid: &Grid, weights: &EnergyWeights, beta: f64, m: f64) -> DMatrix<f64> {
    let n = grid.point_count();
    let dim = grid.flat_dim();
    let k = bending_stiffness(grid);
    let w_state = trapezoid_state(grid);
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = weights.w_bend * k[(i, j)];
        }
        g[(n + i, n + i)] = weights.w_kin * w_state[i];
    }
    g[(dim - 1, dim - 1)] = weights.w_eta * beta / m;
    g
}

/// Norm of flattened states, either Euclidean or induced by an energy Gram
/// matrix. Owns the similarity factors needed for weighted operator norms.
#[derive(Debug, Clone)]
pub struct StateNorm {
    dim: usize,
    factors: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl StateNorm {
    pub fn euclidean(dim: usize) -> Self {
        StateNorm { dim, factors: None }
    }

    /// Energy norm for the given beam configuration: `|y| = sqrt(E(y))`.
    pub fn energy(grid: &Grid, weights: &EnergyWeights, params: &BeamParams) -> Result<Self> {
        weights.validate()?;
        let g = energy_gram(grid, weights, params.beta, params.m) / 2.0;
        let factors = linalg::sym_sqrt_pair(&g)?;
        Ok(StateNorm { dim: grid.flat_dim(), factors: Some(factors) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector_norm(&self, v: &DVector<f64>) -> f64 {
        match &self.factors {
            None => v.norm(),
            Some((root, _)) => (root * v).norm(),
        }
    }

    /// Operator norm of `M` with respect to this vector norm, computed from
    /// the weighted similarity transform `L M L^{-1}`.
    pub fn operator_norm(&self, m: &DMatrix<f64>) -> f64 {
        match &self.factors {
            None => linalg::operator_norm(m),
            Some((root, inv_root)) => linalg::operator_norm(&(root * m * inv_root)),
        }
    }

    pub fn distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.vector_norm(&(a - b))
    }
}
