//! Small dense complex matrix helpers used by the iteration kernels.
//! Matrices are row-major slices of length m*m.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(m: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * m];
    for i in 0..m {
        out[i * m + i] = ONE;
    }
    out
}

/// out = a * b for m x m matrices.
pub fn matmul_into(a: &[C64], b: &[C64], m: usize, out: &mut [C64]) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = ZERO;
            for k in 0..m {
                acc += a[i * m + k] * b[k * m + j];
            }
            out[i * m + j] = acc;
        }
    }
}

pub fn matmul(a: &[C64], b: &[C64], m: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * m];
    matmul_into(a, b, m, &mut out);
    out
}

/// Product of an m x m matrix with an m x k matrix (row-major), into out.
pub fn matmul_rect_into(a: &[C64], b: &[C64], m: usize, k: usize, out: &mut [C64]) {
    for i in 0..m {
        for j in 0..k {
            let mut acc = ZERO;
            for l in 0..m {
                acc += a[i * m + l] * b[l * k + j];
            }
            out[i * k + j] = acc;
        }
    }
}

pub fn adjoint(a: &[C64], m: usize) -> Vec<C64> {
    let mut out = vec![ZERO; m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = a[i * m + j].conj();
        }
    }
    out
}

pub fn to_dmatrix(a: &[C64], rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_row_slice(rows, cols, a)
}

pub fn from_dmatrix(a: &DMatrix<C64>) -> Vec<C64> {
    let (r, c) = a.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub fn inverse(a: &[C64], m: usize) -> Option<Vec<C64>> {
    if m == 2 {
        let det = a[0] * a[3] - a[1] * a[2];
        if det.norm() == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = det.inv();
        return Some(vec![a[3] * inv, -a[1] * inv, -a[2] * inv, a[0] * inv]);
    }
    to_dmatrix(a, m, m).try_inverse().map(|x| from_dmatrix(&x))
}

pub fn determinant(a: &[C64], m: usize) -> C64 {
    if m == 2 {
        return a[0] * a[3] - a[1] * a[2];
    }
    to_dmatrix(a, m, m).determinant()
}

pub fn frobenius(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormalizes the k columns of the m x k row-major matrix `t` in place by
/// modified Gram-Schmidt with one reorthogonalization pass, writing the
/// log-moduli of the diagonal of R into `log_r`. Returns false if a column
/// collapses.
pub fn qr_columns(t: &mut [C64], m: usize, k: usize, log_r: &mut [f64]) -> bool {
    for j in 0..k {
        for _pass in 0..2 {
            for p in 0..j {
                let mut dot = ZERO;
                for i in 0..m {
                    dot += t[i * k + p].conj() * t[i * k + j];
                }
                for i in 0..m {
                    let q = t[i * k + p];
                    t[i * k + j] -= q * dot;
                }
            }
        }
        let mut norm = 0.0;
        for i in 0..m {
            norm += t[i * k + j].norm_sqr();
        }
        let norm = norm.sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return false;
        }
        log_r[j] = norm.ln();
        let inv = 1.0 / norm;
        for i in 0..m {
            t[i * k + j] *= inv;
        }
    }
    true
}

/// Singular value decomposition of a rows x cols complex matrix:
/// returns (U, sigma, V) with sigma sorted non-increasing.
pub fn svd(a: &[C64], rows: usize, cols: usize) -> (DMatrix<C64>, Vec<f64>, DMatrix<C64>) {
    let mat = to_dmatrix(a, rows, cols);
    let svd = mat.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let v = v_t.adjoint();
    let v_sorted = DMatrix::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]);
    let sigma_sorted = order.iter().map(|&j| sigma[j]).collect();
    (u_sorted, sigma_sorted, v_sorted)
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_pi(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Wraps to (-1/2, 1/2].
pub fn wrap_half(x: f64) -> f64 {
    let mut y = x.rem_euclid(1.0);
    if y > 0.5 {
        y -= 1.0;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qr_of_identity_has_zero_logs() {
        let mut t = identity(3);
        let mut logs = vec![1.0; 3];
        assert!(qr_columns(&mut t, 3, 3, &mut logs));
        assert!(logs.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn qr_detects_collapse() {
        let mut t = vec![ONE, ONE, ONE, ONE];
        let mut logs = vec![0.0; 2];
        // second column is parallel to the first
        assert!(!qr_columns(&mut t, 2, 2, &mut logs) || logs[1] < -30.0);
    }

    #[test]
    fn inverse_round_trip() {
        let a: Vec<C64> = (0..9).map(|i| C64::new((i * i) as f64 + 1.0, i as f64)).collect();
        let inv = inverse(&a, 3).unwrap();
        let prod = matmul(&a, &inv, 3);
        let id = identity(3);
        let err: f64 = prod.iter().zip(&id).map(|(x, y)| (x - y).norm()).sum();
        assert!(err < 1e-10);
    }

    #[test]
    fn svd_sorted() {
        let a = vec![C64::new(1.0, 0.0), ZERO, ZERO, C64::new(3.0, 0.0)];
        let (_, s, _) = svd(&a, 2, 2);
        assert!((s[0] - 3.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
    }
}
