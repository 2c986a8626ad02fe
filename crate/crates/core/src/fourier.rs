//! Trigonometric interpolation of periodic samples on a uniform grid.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::linalg::{C64, ZERO};

/// Fourier coefficients of n samples f(j/n), in FFT order (k = 0..n/2-1, then
/// negative modes), normalized so that f(x) = sum_k c_k e^{2 pi i k x}.
pub fn coefficients(samples: &[C64]) -> Vec<C64> {
    let n = samples.len();
    let mut buf = samples.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    for z in &mut buf {
        *z *= inv;
    }
    buf
}

/// Inverse of `coefficients`.
pub fn synthesize(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len();
    let mut buf = coeffs.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Signed frequency of FFT slot j.
pub fn mode(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT slot of frequency k (|k| < n/2).
pub fn slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Samples of f(x + t) on the same grid.
pub fn shift(samples: &[C64], t: f64) -> Vec<C64> {
    let n = samples.len();
    let mut c = coefficients(samples);
    for (j, z) in c.iter_mut().enumerate() {
        let k = mode(j, n);
        if n % 2 == 0 && j == n / 2 {
            // split the Nyquist mode symmetrically so real data stays real
            *z *= (2.0 * PI * k as f64 * t).cos();
        } else {
            *z *= C64::from_polar(1.0, 2.0 * PI * k as f64 * t);
        }
    }
    synthesize(&c)
}

/// A trigonometric polynomial kept as its significant modes.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    modes: Vec<(i64, C64)>,
}

impl TrigSeries {
    /// Interpolant of grid samples; modes below `drop_below` times the largest
    /// coefficient are discarded.
    pub fn from_samples(samples: &[C64], drop_below: f64) -> Self {
        let n = samples.len();
        let c = coefficients(samples);
        let top = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut modes = Vec::new();
        for (j, &z) in c.iter().enumerate() {
            if z.norm() > drop_below * top || (top == 0.0 && j == 0) {
                let k = mode(j, n);
                if n % 2 == 0 && j == n / 2 {
                    modes.push((k, z * 0.5));
                    modes.push((-k, z * 0.5));
                } else {
                    modes.push((k, z));
                }
            }
        }
        TrigSeries { modes }
    }

    pub fn from_modes(modes: Vec<(i64, C64)>) -> Self {
        TrigSeries { modes }
    }

    pub fn modes(&self) -> &[(i64, C64)] {
        &self.modes
    }

    pub fn max_mode(&self) -> i64 {
        self.modes.iter().map(|(k, _)| k.abs()).max().unwrap_or(0)
    }

    pub fn evaluate(&self, x: f64) -> C64 {
        let mut acc = ZERO;
        for &(k, c) in &self.modes {
            acc += c * C64::from_polar(1.0, 2.0 * PI * k as f64 * x);
        }
        acc
    }

    /// Value at x + i y (analytic continuation of the polynomial).
    pub fn evaluate_complex(&self, z: C64) -> C64 {
        let mut acc = ZERO;
        for &(k, c) in &self.modes {
            acc += c * (C64::new(0.0, 2.0 * PI * k as f64) * z).exp();
        }
        acc
    }
}

/// Componentwise interpolation of a matrix-valued grid function given as a
/// list of row-major matrices. Coefficients are stored densely over the
/// retained band of modes so one table of powers serves every entry.
#[derive(Debug, Clone)]
pub struct MatrixSeries {
    pub dim: (usize, usize),
    kmax: i64,
    /// per entry, modes -kmax..=kmax
    dense: Vec<Vec<C64>>,
}

impl MatrixSeries {
    pub fn from_grid(values: &[Vec<C64>], rows: usize, cols: usize, drop_below: f64) -> Self {
        let entries: Vec<TrigSeries> = (0..rows * cols)
            .map(|e| {
                let s: Vec<C64> = values.iter().map(|m| m[e]).collect();
                TrigSeries::from_samples(&s, drop_below)
            })
            .collect();
        let kmax = entries.iter().map(|s| s.max_mode()).max().unwrap_or(0);
        let width = (2 * kmax + 1) as usize;
        let dense = entries
            .iter()
            .map(|s| {
                let mut row = vec![ZERO; width];
                for &(k, c) in s.modes() {
                    row[(k + kmax) as usize] += c;
                }
                row
            })
            .collect();
        MatrixSeries { dim: (rows, cols), kmax, dense }
    }

    pub fn evaluate_into(&self, x: f64, out: &mut [C64]) {
        let k = self.kmax as usize;
        let w = C64::from_polar(1.0, 2.0 * PI * x);
        let mut powers = vec![ZERO; 2 * k + 1];
        powers[k] = C64::new(1.0, 0.0);
        for j in 1..=k {
            // recompute every 64 steps to limit drift
            powers[k + j] = if j % 64 == 0 { C64::from_polar(1.0, 2.0 * PI * x * j as f64) } else { powers[k + j - 1] * w };
            powers[k - j] = powers[k + j].conj();
        }
        for (o, row) in out.iter_mut().zip(&self.dense) {
            let mut acc = ZERO;
            for (c, p) in row.iter().zip(&powers) {
                acc += c * p;
            }
            *o = acc;
        }
    }

    pub fn evaluate(&self, x: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim.0 * self.dim.1];
        self.evaluate_into(x, &mut out);
        out
    }

    pub fn max_mode(&self) -> i64 {
        self.kmax
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(f64) -> C64) -> Vec<C64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn single_mode_coefficient() {
        let s = grid(64, |x| C64::from_polar(1.0, 2.0 * PI * 3.0 * x) * 2.0);
        let c = coefficients(&s);
        assert!((c[3] - C64::new(2.0, 0.0)).norm() < 1e-13);
        assert!(c.iter().enumerate().filter(|(j, _)| *j != 3).all(|(_, z)| z.norm() < 1e-13));
    }

    #[test]
    fn shift_matches_closed_form() {
        let f = |x: f64| C64::new((2.0 * PI * x).cos() + 0.3 * (4.0 * PI * x).sin(), 0.0);
        let s = grid(32, f);
        let t = 0.618_033_988_749_894_8;
        let shifted = shift(&s, t);
        for (j, z) in shifted.iter().enumerate() {
            assert!((z - f(j as f64 / 32.0 + t)).norm() < 1e-13);
        }
    }

    #[test]
    fn series_evaluates_off_grid() {
        let f = |x: f64| C64::new(1.0 / (1.2 - (2.0 * PI * x).cos()), 0.0);
        let s = TrigSeries::from_samples(&grid(256, f), 1e-18);
        for x in [0.013, 0.37, 0.91] {
            assert!((s.evaluate(x) - f(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn matrix_series_matches_entries() {
        let n = 128;
        let vals: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let x = j as f64 / n as f64;
                vec![C64::new((2.0 * PI * x).cos(), 0.0), C64::from_polar(1.0, -6.0 * PI * x)]
            })
            .collect();
        let m = MatrixSeries::from_grid(&vals, 1, 2, 1e-14);
        let x = 0.3217;
        let out = m.evaluate(x);
        assert!((out[0] - C64::new((2.0 * PI * x).cos(), 0.0)).norm() < 1e-13);
        assert!((out[1] - C64::from_polar(1.0, -6.0 * PI * x)).norm() < 1e-13);
    }
}
