//! Dense linear-algebra kernels shared by the generator and the solvers:
//! scaling-and-squaring matrix exponential, an adaptive integrator for the
//! exponential action at large dimension, spectral norms and matrix square
//! roots of Gram matrices.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Above this dimension `DiscreteGenerator::apply_semigroup` switches from the
/// dense exponential to adaptive integration of `y' = A y`.
pub const DENSE_EXPM_LIMIT: usize = 600;

/// Padé(13) switch point from Higham's scaling-and-squaring analysis.
const PADE13_THETA: f64 = 5.371920351148152;

const PADE13_COEFF: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| libm::fabs(*x)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by Padé(13) approximation with scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { field: "matrix", expected: n, actual: a.ncols() });
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Numerical { message: "non-finite matrix in expm" });
    }
    let squarings = if norm > PADE13_THETA {
        libm::ceil(libm::log2(norm / PADE13_THETA)) as i32
    } else {
        0
    };
    let scaled = a / libm::exp2(squarings as f64);
    let b = &PADE13_COEFF;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u = &scaled
        * (&a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
            + &a6 * b[7]
            + &a4 * b[5]
            + &a2 * b[3]
            + &id * b[1]);
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or(Error::Numerical { message: "singular Pade denominator in expm" })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// Computes `exp(t A) y0` by adaptive Runge-Kutta-Fehlberg integration of
/// `y' = A y`. Used instead of the dense exponential when the dimension
/// exceeds [`DENSE_EXPM_LIMIT`].
pub fn expm_action_adaptive(
    a: &DMatrix<f64>,
    t: f64,
    y0: &DVector<f64>,
    rtol: f64,
) -> Result<DVector<f64>> {
    if t < 0.0 {
        return Err(Error::NegativeTime { t });
    }
    if a.ncols() != y0.len() {
        return Err(Error::DimensionMismatch {
            field: "y0",
            expected: a.ncols(),
            actual: y0.len(),
        });
    }
    if t == 0.0 {
        return Ok(y0.clone());
    }
    let scale = y0.amax().max(1e-300);
    let atol = rtol * scale;
    let mut y = y0.clone();
    let mut s = 0.0_f64;
    // start well inside the explicit stability region
    let mut h = (1.0 / one_norm(a).max(1e-12)).min(t);
    let mut steps = 0usize;
    while s < t {
        if steps > 50_000_000 {
            return Err(Error::Numerical { message: "expm_action step limit exceeded" });
        }
        steps += 1;
        h = h.min(t - s);
        // Fehlberg 4(5) pair
        let k1 = a * &y;
        let k2 = a * (&y + &k1 * (h / 4.0));
        let k3 = a * (&y + &k1 * (3.0 * h / 32.0) + &k2 * (9.0 * h / 32.0));
        let k4 = a * (&y + &k1 * (1932.0 * h / 2197.0) - &k2 * (7200.0 * h / 2197.0)
            + &k3 * (7296.0 * h / 2197.0));
        let k5 = a * (&y + &k1 * (439.0 * h / 216.0) - &k2 * (8.0 * h) + &k3 * (3680.0 * h / 513.0)
            - &k4 * (845.0 * h / 4104.0));
        let k6 = a * (&y - &k1 * (8.0 * h / 27.0) + &k2 * (2.0 * h) - &k3 * (3544.0 * h / 2565.0)
            + &k4 * (1859.0 * h / 4104.0)
            - &k5 * (11.0 * h / 40.0));
        let y5 = &y
            + &k1 * (16.0 * h / 135.0)
            + &k3 * (6656.0 * h / 12825.0)
            + &k4 * (28561.0 * h / 56430.0)
            - &k5 * (9.0 * h / 50.0)
            + &k6 * (2.0 * h / 55.0);
        let y4 = &y + &k1 * (25.0 * h / 216.0) + &k3 * (1408.0 * h / 2565.0)
            + &k4 * (2197.0 * h / 4104.0)
            - &k5 * (h / 5.0);
        let err = (&y5 - &y4).amax();
        let tol = atol + rtol * y5.amax();
        if err <= tol || h <= 1e-14 * t {
            s += h;
            y = y5;
        }
        let factor = if err > 0.0 { 0.9 * libm::pow(tol / err, 0.2) } else { 2.0 };
        h *= factor.clamp(0.2, 4.0);
    }
    Ok(y)
}

/// Spectral norm via the largest eigenvalue of `M^T M`.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let eigs = gram.symmetric_eigen().eigenvalues;
    libm::sqrt(eigs.iter().cloned().fold(0.0, f64::max).max(0.0))
}

/// Symmetric square root and inverse square root of a positive-definite
/// matrix, via its spectral decomposition.
pub fn sym_sqrt_pair(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    let se = g.clone().symmetric_eigen();
    let mut root = DMatrix::<f64>::zeros(n, n);
    let mut inv_root = DMatrix::<f64>::zeros(n, n);
    for (i, &ev) in se.eigenvalues.iter().enumerate() {
        if ev <= 0.0 {
            return Err(Error::Numerical { message: "Gram matrix is not positive definite" });
        }
        let v = se.eigenvectors.column(i);
        let outer = &v * v.transpose();
        root += libm::sqrt(ev) * &outer;
        inv_root += (1.0 / libm::sqrt(ev)) * &outer;
    }
    Ok((root, inv_root))
}

/// Complex eigenvalues of a real square matrix as `(re, im)` pairs.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let schur = a
        .clone()
        .try_schur(1e-13, 200_000)
        .ok_or(Error::Numerical { message: "Schur iteration did not converge" })?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn expm_zero_matrix_is_identity() {
        let a = DMatrix::<f64>::zeros(4, 4);
        let e = expm(&a).unwrap();
        assert_eq!(e, DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn expm_scalar_matches_closed_form() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let e = expm(&a).unwrap();
        assert_relative_eq!(e[(0, 0)], (-2.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn expm_rotation_block() {
        // exp of [[0, -w],[w, 0]] is a rotation by w
        let w = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]);
        let e = expm(&a).unwrap();
        assert_relative_eq!(e[(0, 0)], w.cos(), max_relative = 1e-12);
        assert_relative_eq!(e[(1, 0)], w.sin(), max_relative = 1e-12);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let a = DMatrix::from_row_slice(2, 2, &[-400.0, 30.0, 0.0, -500.0]);
        let e = expm(&a).unwrap();
        // against diagonalization: eigenvalues -400, -500
        let v12 = 30.0 / (-400.0 + 500.0);
        let expected01 = v12 * ((-400.0f64).exp() - (-500.0f64).exp());
        assert_relative_eq!(e[(0, 0)], (-400.0f64).exp(), max_relative = 1e-10);
        assert_relative_eq!(e[(0, 1)], expected01, max_relative = 1e-9);
    }

    #[test]
    fn adaptive_action_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -2.0]);
        let y0 = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let dense = expm(&(&a * 1.3)).unwrap() * &y0;
        let action = expm_action_adaptive(&a, 1.3, &y0, 1e-10).unwrap();
        assert_relative_eq!((dense - action).amax(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn operator_norm_diag() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -5.0]);
        assert_relative_eq!(operator_norm(&m), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let g = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let (root, inv_root) = sym_sqrt_pair(&g).unwrap();
        assert_relative_eq!((&root * &root - &g).amax(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(
            (&root * &inv_root - DMatrix::<f64>::identity(2, 2)).amax(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn eigenvalues_of_companion() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
        assert_relative_eq!(eigs[0].1, -1.0, epsilon = 1e-12);
        assert_relative_eq!(eigs[1].1, 1.0, epsilon = 1e-12);
    }
}
