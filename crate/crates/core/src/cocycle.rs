//! One-frequency analytic cocycles: renormalized products, Lyapunov spectra,
//! exterior sums and fibered rotation numbers of SL(2,R) cocycles.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};

const TWO_PI: f64 = 2.0 * PI;

/// Log-spread of the R diagonal over one renormalization window above which
/// the window is shortened; keeps about eight significant digits in the
/// weakest direction.
const MAX_WINDOW_SPREAD: f64 = 18.0;

/// Hard cap on adaptive horizons.
pub const HORIZON_CAP: usize = 100_000_000;

pub type SamplerFn = dyn Fn(C64, &mut [C64]) + Send + Sync;

/// A cocycle (alpha, A) with A sampled at complex torus points. The sampler
/// writes the m x m matrix A(z) row-major into its output buffer.
#[derive(Clone)]
pub struct CocycleMap {
    pub alpha: f64,
    pub dim: usize,
    /// Half-width of the strip on which the sampler is valid, measured from
    /// the current imaginary shift.
    pub strip_radius: f64,
    /// Imaginary shift applied to every sample point.
    pub shift: f64,
    sampler: Arc<SamplerFn>,
}

impl std::fmt::Debug for CocycleMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CocycleMap")
            .field("alpha", &self.alpha)
            .field("dim", &self.dim)
            .field("strip_radius", &self.strip_radius)
            .field("shift", &self.shift)
            .finish()
    }
}

impl CocycleMap {
    pub fn new<F>(alpha: f64, dim: usize, strip_radius: f64, sampler: F) -> Self
    where
        F: Fn(C64, &mut [C64]) + Send + Sync + 'static,
    {
        CocycleMap { alpha, dim, strip_radius, shift: 0.0, sampler: Arc::new(sampler) }
    }

    /// Constant cocycle.
    pub fn constant(alpha: f64, dim: usize, matrix: Vec<C64>) -> Self {
        assert_eq!(matrix.len(), dim * dim);
        CocycleMap::new(alpha, dim, f64::INFINITY, move |_, out| out.copy_from_slice(&matrix))
    }

    /// A(x + i shift) written into `out`.
    pub fn sample_into(&self, x: f64, out: &mut [C64]) {
        (self.sampler)(Complex64::new(x, self.shift), out)
    }

    /// A at an arbitrary complex point, ignoring the stored shift.
    pub fn sample_at(&self, z: C64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim * self.dim];
        (self.sampler)(z, &mut out);
        out
    }

    pub fn sample(&self, x: f64) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim * self.dim];
        self.sample_into(x, &mut out);
        out
    }

    /// theta -> A(theta + i eps).
    pub fn complexify(&self, eps: f64) -> Result<CocycleMap> {
        if eps != 0.0 && eps.abs() >= self.strip_radius {
            return Err(Error::StripExceeded { eps, radius: self.strip_radius });
        }
        let mut out = self.clone();
        out.shift += eps;
        out.strip_radius -= eps.abs();
        Ok(out)
    }

    /// theta -> (A(theta)^{-1})^*, whose spectrum is the negated reverse.
    pub fn inverse_adjoint(&self) -> CocycleMap {
        let inner = self.sampler.clone();
        let m = self.dim;
        let mut out = CocycleMap::new(self.alpha, m, self.strip_radius, move |z, buf| {
            let mut a = vec![ZERO; m * m];
            inner(z, &mut a);
            let inv = linalg::inverse(&a, m).unwrap_or_else(|| vec![C64::new(f64::NAN, 0.0); m * m]);
            buf.copy_from_slice(&linalg::adjoint(&inv, m));
        });
        out.shift = self.shift;
        out
    }

    /// theta -> R * A(theta) for a constant matrix R.
    pub fn left_multiply(&self, r: Vec<C64>) -> CocycleMap {
        let inner = self.sampler.clone();
        let m = self.dim;
        let mut out = CocycleMap::new(self.alpha, m, self.strip_radius, move |z, buf| {
            let mut a = vec![ZERO; m * m];
            inner(z, &mut a);
            linalg::matmul_into(&r, &a, m, buf);
        });
        out.shift = self.shift;
        out
    }

    pub fn default_renorm_every(&self) -> usize {
        if self.dim <= 4 {
            10
        } else {
            5
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrum {
    /// L_1 >= ... >= L_m
    pub exponents: Vec<f64>,
    pub horizon: usize,
    pub theta_samples: usize,
    /// Standard error of each exponent across orbit segments.
    pub stderr: Vec<f64>,
}

impl LyapunovSpectrum {
    pub fn top(&self) -> f64 {
        self.exponents[0]
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }
}

/// L^k = L_1 + ... + L_k.
pub fn exterior_sum(spec: &LyapunovSpectrum, k: usize) -> Result<f64> {
    if k == 0 || k > spec.exponents.len() {
        return Err(Error::InvalidArgument(format!(
            "exterior index {k} outside 1..={}",
            spec.exponents.len()
        )));
    }
    Ok(spec.exponents[..k].iter().sum())
}

/// Standard error of the partial sum L^k across segments is not tracked
/// separately; this bound adds the per-exponent errors.
pub fn exterior_sum_stderr(spec: &LyapunovSpectrum, k: usize) -> f64 {
    spec.stderr[..k.min(spec.stderr.len())].iter().sum()
}

/// Renormalized product along the orbit of theta0 for n steps. Returns the
/// per-direction averages of the log R-diagonal, sorted non-increasing.
pub fn product_qr(c: &CocycleMap, theta0: f64, n: usize, renorm_every: usize) -> Result<LyapunovSpectrum> {
    let sums = qr_log_sums(c, theta0, n, renorm_every)?;
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        stderr: vec![0.0; exponents.len()],
        exponents,
        horizon: n,
        theta_samples: 1,
    })
}

/// Largest window (at most `requested`) over which products of samples cannot
/// spread singular values beyond e^MAX_WINDOW_SPREAD, from a coarse sup-norm
/// estimate on the sampling circle.
fn safe_window(c: &CocycleMap, requested: usize) -> usize {
    let mut a = vec![ZERO; c.dim * c.dim];
    let mut sup: f64 = 1.0;
    for j in 0..64 {
        c.sample_into(j as f64 / 64.0, &mut a);
        sup = sup.max(linalg::frobenius(&a));
    }
    let per_step = 2.0 * sup.ln();
    if per_step <= 0.0 {
        return requested.max(1);
    }
    ((MAX_WINDOW_SPREAD / per_step).floor() as usize).clamp(1, requested.max(1))
}

fn qr_log_sums(c: &CocycleMap, theta0: f64, n: usize, renorm_every: usize) -> Result<Vec<f64>> {
    if n == 0 || renorm_every == 0 || renorm_every > n {
        return Err(Error::InvalidArgument(format!(
            "need n >= renorm_every >= 1, got n = {n}, renorm_every = {renorm_every}"
        )));
    }
    let m = c.dim;
    let mut q = linalg::identity(m);
    let mut a = vec![ZERO; m * m];
    let mut tmp = vec![ZERO; m * m];
    let mut logs = vec![0.0; m];
    let mut sums = vec![0.0; m];
    let mut window = safe_window(c, renorm_every);
    let mut since = 0usize;
    let mut x = theta0;
    // The first steps only align the frame with the Oseledets flag; their
    // growth is discarded so constant cocycles come out exact.
    let burn_in = (n / 10).min(1000);
    let mut counting = burn_in == 0;
    let total = n + burn_in;
    for step in 0..total {
        c.sample_into(x, &mut a);
        linalg::matmul_into(&a, &q, m, &mut tmp);
        std::mem::swap(&mut q, &mut tmp);
        since += 1;
        x += c.alpha;
        if x >= 1.0 {
            x -= 1.0;
        }
        if since == window || step + 1 == burn_in || step + 1 == total {
            if !linalg::qr_columns(&mut q, m, m, &mut logs) {
                return Err(Error::SingularSample { theta: format!("{x}") });
            }
            if counting {
                for j in 0..m {
                    sums[j] += logs[j];
                }
            }
            if step + 1 == burn_in {
                counting = true;
            }
            let spread = logs.iter().cloned().fold(f64::MIN, f64::max)
                - logs.iter().cloned().fold(f64::MAX, f64::min);
            if spread > MAX_WINDOW_SPREAD && window > 1 {
                window = (window / 2).max(1);
            }
            since = 0;
        }
    }
    Ok(sums)
}

/// Low-discrepancy starting phases (van der Corput, base 2).
pub fn segment_phases(count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let mut x = 0.0;
            let mut f = 0.5;
            let mut i = j;
            while i > 0 {
                if i & 1 == 1 {
                    x += f;
                }
                f *= 0.5;
                i >>= 1;
            }
            x
        })
        .collect()
}

/// Averages `product_qr` over `segments` orbit segments of n / segments steps
/// each, started on a low-discrepancy phase set. The standard error is the
/// spread across segments divided by sqrt(segments).
pub fn lyapunov_spectrum(c: &CocycleMap, n: usize, segments: usize) -> Result<LyapunovSpectrum> {
    if segments < 4 {
        return Err(Error::InvalidArgument("need at least 4 segments".into()));
    }
    let per = (n / segments).max(1);
    let renorm = c.default_renorm_every().min(per);
    let phases = segment_phases(segments);
    let runs: Vec<Result<LyapunovSpectrum>> =
        phases.par_iter().map(|&t| product_qr(c, t, per, renorm)).collect();
    let runs: Vec<LyapunovSpectrum> = runs.into_iter().collect::<Result<_>>()?;
    Ok(combine_segments(&runs, per * segments))
}

fn combine_segments(runs: &[LyapunovSpectrum], horizon: usize) -> LyapunovSpectrum {
    let m = runs[0].exponents.len();
    let s = runs.len() as f64;
    let mut exponents = vec![0.0; m];
    let mut stderr = vec![0.0; m];
    for j in 0..m {
        let mean = runs.iter().map(|r| r.exponents[j]).sum::<f64>() / s;
        let var = runs.iter().map(|r| (r.exponents[j] - mean).powi(2)).sum::<f64>() / (s - 1.0).max(1.0);
        exponents[j] = mean;
        stderr[j] = (var / s).sqrt();
    }
    LyapunovSpectrum { exponents, horizon, theta_samples: runs.len(), stderr }
}

/// Doubles the horizon from `n0` until the top `k` exponents of two
/// successive estimates agree within `tol` (or the cap is reached).
pub fn lyapunov_spectrum_adaptive(
    c: &CocycleMap,
    n0: usize,
    segments: usize,
    tol: f64,
    cap: usize,
) -> Result<LyapunovSpectrum> {
    let cap = cap.min(HORIZON_CAP);
    let mut n = n0.max(segments);
    let mut prev = lyapunov_spectrum(c, n, segments)?;
    while n * 2 <= cap {
        n *= 2;
        let next = lyapunov_spectrum(c, n, segments)?;
        let diff = prev
            .exponents
            .iter()
            .zip(&next.exponents)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = next;
        if diff < tol {
            break;
        }
    }
    Ok(prev)
}

/// Cumulative log R-diagonals recorded every `record_every` steps while the
/// product is re-orthonormalized at every step. Entry t holds the sums after
/// (t+1)*record_every steps; columns are in Gram-Schmidt order.
pub fn qr_trajectory(c: &CocycleMap, theta0: f64, n: usize, record_every: usize) -> Result<Vec<Vec<f64>>> {
    let m = c.dim;
    let mut q = linalg::identity(m);
    let mut a = vec![ZERO; m * m];
    let mut tmp = vec![ZERO; m * m];
    let mut logs = vec![0.0; m];
    let mut sums = vec![0.0; m];
    let mut out = Vec::new();
    let mut x = theta0;
    for step in 0..n {
        c.sample_into(x, &mut a);
        linalg::matmul_into(&a, &q, m, &mut tmp);
        std::mem::swap(&mut q, &mut tmp);
        if !linalg::qr_columns(&mut q, m, m, &mut logs) {
            return Err(Error::SingularSample { theta: format!("{x}") });
        }
        for j in 0..m {
            sums[j] += logs[j];
        }
        x = (x + c.alpha).rem_euclid(1.0);
        if (step + 1) % record_every == 0 {
            out.push(sums.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationResult {
    /// Fibered rotation number in [0, 1).
    pub rho: f64,
    /// Total lifted angle divided by 2 pi.
    pub lift_drift: f64,
    pub horizon: usize,
}

/// Continuous lift of the polar-rotation angle of a real SL(2,R) loop,
/// tabulated on a uniform grid.
struct PolarLift {
    table: Vec<f64>,
}

/// Angle of the rotation factor in the polar decomposition of a 2x2 real
/// matrix with positive determinant.
fn polar_angle(a: &[C64]) -> f64 {
    (a[2].re - a[1].re).atan2(a[0].re + a[3].re)
}

impl PolarLift {
    fn build(c: &CocycleMap) -> Result<Self> {
        let mut m = 1024usize;
        loop {
            let mut table = Vec::with_capacity(m);
            let mut prev = 0.0;
            let mut max_jump: f64 = 0.0;
            let mut buf = vec![ZERO; 4];
            for j in 0..m {
                c.sample_into(j as f64 / m as f64, &mut buf);
                let raw = polar_angle(&buf);
                let lifted = if j == 0 { raw } else { prev + linalg::wrap_pi(raw - prev) };
                if j > 0 {
                    max_jump = max_jump.max((lifted - prev).abs());
                }
                table.push(lifted);
                prev = lifted;
            }
            c.sample_into(1.0, &mut buf);
            let closing = prev + linalg::wrap_pi(polar_angle(&buf) - prev);
            max_jump = max_jump.max((closing - prev).abs());
            if max_jump < PI / 4.0 || m >= 1 << 18 {
                let winding = ((closing - table[0]) / TWO_PI).round() as i64;
                if winding != 0 {
                    return Err(Error::NotHomotopicToIdentity { winding });
                }
                if max_jump >= PI / 2.0 {
                    return Err(Error::AngleStepTooLarge { step: max_jump / TWO_PI });
                }
                return Ok(PolarLift { table });
            }
            m *= 2;
        }
    }

    fn lift(&self, x: f64, raw: f64) -> f64 {
        let m = self.table.len();
        let j = ((x.rem_euclid(1.0) * m as f64).round() as usize) % m;
        let anchor = self.table[j];
        anchor + linalg::wrap_pi(raw - anchor)
    }
}

fn check_real_sl2(c: &CocycleMap) -> Result<()> {
    if c.dim != 2 {
        return Err(Error::InvalidArgument("rotation numbers need a 2x2 cocycle".into()));
    }
    let mut buf = vec![ZERO; 4];
    let mut max_imag: f64 = 0.0;
    for j in 0..257 {
        c.sample_into(j as f64 / 257.0, &mut buf);
        let scale = linalg::frobenius(&buf).max(1.0);
        for z in &buf {
            max_imag = max_imag.max(z.im.abs() / scale);
        }
    }
    if max_imag > 1e-10 {
        return Err(Error::NonRealSampler { max_imag });
    }
    Ok(())
}

/// Fibered rotation number of a real SL(2,R) cocycle homotopic to the
/// identity, from the orbit of theta0 = 0.
///
/// Each step A = R_psi P is split into its polar parts: the rotation angle psi
/// is lifted continuously along the torus, and the positive factor P moves any
/// vector by less than a quarter turn, so its increment is unambiguous.
pub fn rotation_number(c: &CocycleMap, n: usize) -> Result<RotationResult> {
    rotation_number_from(c, 0.0, n)
}

pub fn rotation_number_from(c: &CocycleMap, theta0: f64, n: usize) -> Result<RotationResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    check_real_sl2(c)?;
    let lift = PolarLift::build(c)?;
    let mut buf = vec![ZERO; 4];
    let (mut w0, mut w1) = (1.0f64, 0.0f64);
    let mut total = 0.0;
    let mut x = theta0;
    for _ in 0..n {
        c.sample_into(x, &mut buf);
        let (a, b, cc, d) = (buf[0].re, buf[1].re, buf[2].re, buf[3].re);
        let raw = (cc - b).atan2(a + d);
        let psi = lift.lift(x, raw);
        // P = R_{-psi} A
        let (cs, sn) = (raw.cos(), raw.sin());
        let (p00, p01) = (cs * a + sn * cc, cs * b + sn * d);
        let (p10, p11) = (-sn * a + cs * cc, -sn * b + cs * d);
        let (u0, u1) = (p00 * w0 + p01 * w1, p10 * w0 + p11 * w1);
        let dp = linalg::wrap_pi(u1.atan2(u0) - w1.atan2(w0));
        total += psi + dp;
        let (n0, n1) = (a * w0 + b * w1, cc * w0 + d * w1);
        let norm = (n0 * n0 + n1 * n1).sqrt();
        w0 = n0 / norm;
        w1 = n1 / norm;
        x = (x + c.alpha).rem_euclid(1.0);
    }
    let lift_drift = total / TWO_PI;
    Ok(RotationResult { rho: (lift_drift / n as f64).rem_euclid(1.0), lift_drift, horizon: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(m: &[f64]) -> Vec<C64> {
        m.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    fn rotation(phi: f64) -> Vec<C64> {
        let (c, s) = ((TWO_PI * phi).cos(), (TWO_PI * phi).sin());
        real(&[c, -s, s, c])
    }

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn diagonal_constant_cocycle() {
        let c = CocycleMap::constant(GOLDEN, 2, real(&[2.0, 0.0, 0.0, 0.5]));
        let s = product_qr(&c, 0.3, 10_000, 10).unwrap();
        assert!((s.exponents[0] - 2f64.ln()).abs() < 1e-12);
        assert!((s.exponents[1] + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn schrodinger_constant_at_ten() {
        let c = CocycleMap::constant(GOLDEN, 2, real(&[10.0, -1.0, 1.0, 0.0]));
        let s = product_qr(&c, 0.0, 10_000, 10).unwrap();
        let expected = ((10.0 + 96f64.sqrt()) / 2.0).ln();
        assert!((s.exponents[0] - expected).abs() < 1e-10);
        assert!((s.exponents[1] + expected).abs() < 1e-10);
        assert!((expected - 2.292_431_669_561_178).abs() < 1e-12);
    }

    #[test]
    fn rotation_cocycle_has_zero_exponents() {
        let c = CocycleMap::constant(GOLDEN, 2, rotation(0.3));
        let s = product_qr(&c, 0.0, 10_000, 10).unwrap();
        assert!(s.exponents.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn exterior_sums() {
        let s = LyapunovSpectrum { exponents: vec![3.0, 1.0, -4.0], horizon: 1, theta_samples: 1, stderr: vec![0.0; 3] };
        assert_eq!(exterior_sum(&s, 1).unwrap(), 3.0);
        assert_eq!(exterior_sum(&s, 2).unwrap(), 4.0);
        assert_eq!(exterior_sum(&s, 3).unwrap(), 0.0);
        assert!(exterior_sum(&s, 4).is_err());
    }

    #[test]
    fn rotation_numbers_of_constants() {
        let c = CocycleMap::constant(GOLDEN, 2, rotation(0.3));
        assert!((rotation_number(&c, 10_000).unwrap().rho - 0.3).abs() < 1e-6);
        let q = CocycleMap::constant(GOLDEN, 2, real(&[0.0, -1.0, 1.0, 0.0]));
        assert!((rotation_number(&q, 10_000).unwrap().rho - 0.25).abs() < 1e-9);
        let e = 2.0 * (TWO_PI * 0.2).cos();
        let f = CocycleMap::constant(GOLDEN, 2, real(&[e, -1.0, 1.0, 0.0]));
        assert!((rotation_number(&f, 100_000).unwrap().rho - 0.2).abs() < 1e-4);
    }

    #[test]
    fn non_real_sampler_rejected() {
        let c = CocycleMap::constant(GOLDEN, 2, vec![C64::new(1.0, 0.5), ZERO, ZERO, C64::new(1.0, 0.0)]);
        assert!(matches!(rotation_number(&c, 10), Err(Error::NonRealSampler { .. })));
    }

    #[test]
    fn winding_loop_rejected() {
        let c = CocycleMap::new(GOLDEN, 2, f64::INFINITY, |z, out| {
            let (co, si) = ((TWO_PI * z.re).cos(), (TWO_PI * z.re).sin());
            out.copy_from_slice(&[C64::new(co, 0.0), C64::new(-si, 0.0), C64::new(si, 0.0), C64::new(co, 0.0)]);
        });
        assert!(matches!(rotation_number(&c, 10), Err(Error::NotHomotopicToIdentity { winding: 1 })));
    }

    #[test]
    fn strip_exceeded() {
        let c = CocycleMap::new(GOLDEN, 2, 0.1, |_, out| out.copy_from_slice(&rotation(0.1)));
        assert!(c.complexify(0.05).is_ok());
        assert!(matches!(c.complexify(0.2), Err(Error::StripExceeded { .. })));
    }
}
