//! Symmetric tridiagonal matrices with unit off-diagonal: Sturm counts,
//! bisection for eigenvalues, inverse iteration for eigenvectors.

/// Number of eigenvalues strictly below `e` of the matrix with diagonal `d`
/// and all off-diagonal entries equal to `off`.
pub fn sturm_count(d: &[f64], off: f64, e: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut q = 1.0f64;
    for (i, &di) in d.iter().enumerate() {
        q = if i == 0 { di - e } else { di - e - off2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (di.abs() + e.abs() + 2.0 * off.abs()).max(1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn bounds(d: &[f64], off: f64) -> (f64, f64) {
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs();
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs();
    (lo, hi)
}

/// Eigenvalues with index in [first, last) (ascending order), by bisection.
pub fn eigenvalues_by_index(d: &[f64], off: f64, first: usize, last: usize) -> Vec<f64> {
    let (lo, hi) = bounds(d, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let tol = 4.0 * f64::EPSILON * scale;
    let mut out = Vec::with_capacity(last.saturating_sub(first));
    let mut left = lo;
    for k in first..last {
        // smallest x with count(x) > k
        let (mut a, mut b) = (left, hi);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(d, off, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        let ev = 0.5 * (a + b);
        out.push(ev);
        left = a;
    }
    out
}

/// All eigenvalues in [e_lo, e_hi].
pub fn eigenvalues_in(d: &[f64], off: f64, e_lo: f64, e_hi: f64) -> Vec<f64> {
    let first = sturm_count(d, off, e_lo);
    let last = sturm_count(d, off, e_hi);
    eigenvalues_by_index(d, off, first, last)
}

/// Solves (T - shift) x = b for the tridiagonal T by Gaussian elimination
/// with partial pivoting; tiny pivots are perturbed.
fn solve_shifted(d: &[f64], off: f64, shift: f64, b: &mut [f64]) {
    let n = d.len();
    let pert = f64::EPSILON * (off.abs() + d.iter().map(|x| x.abs()).fold(0.0, f64::max)).max(1.0);
    // rows stored as (diag, super, super2) after pivoting
    let mut diag: Vec<f64> = d.iter().map(|&x| x - shift).collect();
    let mut sup = vec![off; n];
    let mut sup2 = vec![0.0; n];
    let mut sub = vec![off; n];
    for i in 0..n - 1 {
        if sub[i].abs() > diag[i].abs() {
            // swap rows i and i+1
            let (a0, a1, a2) = (diag[i], sup[i], sup2[i]);
            let (b0, b1, b2) = (sub[i], diag[i + 1], if i + 1 < n - 1 { sup[i + 1] } else { 0.0 });
            diag[i] = b0;
            sup[i] = b1;
            sup2[i] = b2;
            sub[i] = a0;
            diag[i + 1] = a1;
            if i + 1 < n - 1 {
                sup[i + 1] = a2;
            }
            b.swap(i, i + 1);
        }
        if diag[i] == 0.0 {
            diag[i] = pert;
        }
        let m = sub[i] / diag[i];
        diag[i + 1] -= m * sup[i];
        if i + 1 < n - 1 {
            sup[i + 1] -= m * sup2[i];
        }
        b[i + 1] -= m * b[i];
        sub[i] = m;
    }
    if diag[n - 1] == 0.0 {
        diag[n - 1] = pert;
    }
    b[n - 1] /= diag[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - sup[n - 2] * b[n - 1]) / diag[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - sup[i] * b[i + 1] - sup2[i] * b[i + 2]) / diag[i];
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

/// Eigenvectors for the given (ascending) eigenvalues by inverse iteration.
/// Vectors whose eigenvalues are closer than 1e-3 ||T|| are re-orthogonalized
/// against each other.
pub fn eigenvectors(d: &[f64], off: f64, evals: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    let (lo, hi) = bounds(d, off);
    let norm = lo.abs().max(hi.abs()).max(1.0);
    let cluster_gap = 1e-3 * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(evals.len());
    let mut cluster_start = 0;
    for (idx, &ev) in evals.iter().enumerate() {
        if idx > 0 && ev - evals[idx - 1] > cluster_gap {
            cluster_start = idx;
        }
        // deterministic start vector
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919 + idx * 104_729) % 997) as f64 / 997.0).collect();
        normalize(&mut x);
        let shift = ev + 2.0 * f64::EPSILON * norm * ((idx - cluster_start) as f64);
        for _ in 0..4 {
            solve_shifted(d, off, shift, &mut x);
            for prev in &out[cluster_start..idx] {
                let dot: f64 = prev.iter().zip(&x).map(|(a, b)| a * b).sum();
                for (xi, pi) in x.iter_mut().zip(prev) {
                    *xi -= dot * pi;
                }
            }
            normalize(&mut x);
        }
        out.push(x);
    }
    out
}

/// Residual ||(T - e) x|| for a unit vector x.
pub fn residual(d: &[f64], off: f64, e: f64, x: &[f64]) -> f64 {
    let n = d.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut y = (d[i] - e) * x[i];
        if i > 0 {
            y += off * x[i - 1];
        }
        if i + 1 < n {
            y += off * x[i + 1];
        }
        acc += y * y;
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_laplacian_eigenvalues() {
        let n = 50;
        let d = vec![0.0; n];
        let evs = eigenvalues_by_index(&d, 1.0, 0, n);
        for (k, ev) in evs.iter().enumerate() {
            let exact = -2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((ev - exact).abs() < 1e-12, "{k}: {ev} vs {exact}");
        }
    }

    #[test]
    fn sturm_counts_half_at_zero() {
        let d = vec![0.0; 101];
        assert_eq!(sturm_count(&d, 1.0, 1e-9), 51);
        assert_eq!(sturm_count(&d, 1.0, -3.0), 0);
        assert_eq!(sturm_count(&d, 1.0, 3.0), 101);
    }

    #[test]
    fn inverse_iteration_residuals() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| 4.0 * (2.0 * std::f64::consts::PI * 0.618_033_988_749_895 * i as f64).cos()).collect();
        let evs = eigenvalues_in(&d, 1.0, -1.0, 1.0);
        let vecs = eigenvectors(&d, 1.0, &evs);
        for (e, v) in evs.iter().zip(&vecs) {
            assert!(residual(&d, 1.0, *e, v) < 1e-9);
        }
        for i in 0..vecs.len() {
            for j in 0..i {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() < 1e-8);
            }
        }
    }
}
