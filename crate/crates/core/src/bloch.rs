//! Reducibility of the center and the Bloch waves it produces: cohomological
//! equations, conjugation of (alpha, C) to a constant rotation, and the
//! eigenfunctions of the Schrodinger operator read off from the frame.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::center::{self, CenterFrame};
use crate::cocycle;
use crate::dual;
use crate::error::{Error, Result};
use crate::fourier;
use crate::linalg::{self, C64, ZERO};
use crate::potential::TrigPotential;
use crate::schrodinger;
use crate::tridiag;

const TWO_PI: f64 = 2.0 * PI;

/// Modes below this modulus are dropped before dividing.
pub const MODE_FLOOR: f64 = 1e-12;
pub const DIVISOR_FLOOR: f64 = 1e-12;
pub const WINDOW_K_MAX: i64 = 10_000;
/// Largest admissible L_1(C) for the reconstruction.
pub const SUBCRITICAL_CENTER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiophantineWindow {
    pub tau: f64,
    pub gamma: f64,
}

impl Default for DiophantineWindow {
    fn default() -> Self {
        DiophantineWindow { tau: 2.0, gamma: 1e-3 }
    }
}

impl DiophantineWindow {
    pub fn new(tau: f64, gamma: f64) -> Result<Self> {
        if !(tau > 1.0 && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("window needs tau > 1 and gamma > 0, got ({tau}, {gamma})")));
        }
        Ok(DiophantineWindow { tau, gamma })
    }

    /// ||2 rho + k alpha|| >= gamma / (|k| + 1)^tau for |k| <= k_max.
    pub fn check(&self, rho: f64, alpha: f64, k_max: i64) -> Result<()> {
        for k in -k_max..=k_max {
            let dist = arith::circle_norm(2.0 * rho + k as f64 * alpha);
            if dist < self.gamma / ((k.abs() + 1) as f64).powf(self.tau) {
                return Err(Error::WindowRejected { rho, k });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohomologySolution {
    pub psi: Vec<f64>,
    /// The mean of phi, which the equation cannot absorb.
    pub mean: f64,
    /// max |psi(theta + alpha) - psi(theta) - phi(theta) + mean| on the grid
    pub residual: f64,
    pub min_divisor: f64,
    pub retained_modes: usize,
}

fn solve_modes(coeffs: &[C64], n: usize, divisor: impl Fn(i64) -> C64) -> Result<(Vec<C64>, f64, usize)> {
    let mut out = vec![ZERO; n];
    let mut min_divisor = f64::INFINITY;
    let mut retained = 0;
    for (j, c) in coeffs.iter().enumerate() {
        let k = fourier::mode(j, n);
        if c.norm() < MODE_FLOOR || (n % 2 == 0 && j == n / 2) {
            continue;
        }
        let div = divisor(k);
        if div.norm() < DIVISOR_FLOOR {
            return Err(Error::SmallDivisorOverflow { mode: k, divisor: div.norm() });
        }
        min_divisor = min_divisor.min(div.norm());
        retained += 1;
        out[j] = c / div;
    }
    Ok((out, min_divisor, retained))
}

/// Solves psi(theta + alpha) - psi(theta) = phi(theta) - mean(phi) on a
/// uniform grid. `h` is the strip width of phi; when it is finite the
/// frequency must satisfy beta(alpha) / 2 pi < h.
pub fn cohomological_solve(phi: &[f64], alpha: f64, h: f64) -> Result<CohomologySolution> {
    let n = phi.len();
    if n < 4 {
        return Err(Error::InvalidArgument("cohomological equation needs at least 4 samples".into()));
    }
    if h.is_finite() {
        if let Ok(profile) = arith::continued_fraction(alpha, 24) {
            let beta = arith::beta_estimate(&profile);
            if beta / TWO_PI >= h {
                return Err(Error::InvalidArgument(format!(
                    "beta(alpha)/2pi = {} is not below the strip width {h}",
                    beta / TWO_PI
                )));
            }
        }
    }
    let samples: Vec<C64> = phi.iter().map(|&x| C64::new(x, 0.0)).collect();
    let mut coeffs = fourier::coefficients(&samples);
    let mean = coeffs[0].re;
    coeffs[0] = ZERO;
    let (modes, min_divisor, retained_modes) =
        solve_modes(&coeffs, n, |k| C64::from_polar(1.0, TWO_PI * k as f64 * alpha) - 1.0)?;
    let psi: Vec<f64> = fourier::synthesize(&modes).iter().map(|z| z.re).collect();
    let shifted = real_shift(&psi, alpha);
    let residual = (0..n).map(|t| (shifted[t] - psi[t] - phi[t] + mean).abs()).fold(0.0, f64::max);
    Ok(CohomologySolution { psi, mean, residual, min_divisor, retained_modes })
}

fn real_shift(x: &[f64], t: f64) -> Vec<f64> {
    let s: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    fourier::shift(&s, t).iter().map(|z| z.re).collect()
}

type M2 = [f64; 4];

fn mul(a: &M2, b: &M2) -> M2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn transpose(a: &M2) -> M2 {
    [a[0], a[2], a[1], a[3]]
}

/// Inverse of a determinant-one matrix.
fn inv_sl2(a: &M2) -> M2 {
    let det = a[0] * a[3] - a[1] * a[2];
    [a[3] / det, -a[1] / det, -a[2] / det, a[0] / det]
}

fn rotation(angle: f64) -> M2 {
    let (s, c) = angle.sin_cos();
    [c, -s, s, c]
}

/// exp of the symmetric traceless matrix [[a, b], [b, -a]].
fn exp_sym(a: f64, b: f64) -> M2 {
    let r = a.hypot(b);
    let (ch, sh) = if r < 1e-8 { (1.0 + r * r / 2.0, 1.0 + r * r / 6.0) } else { (r.cosh(), r.sinh() / r) };
    [ch + sh * a, sh * b, sh * b, ch - sh * a]
}

/// Drops the modes with |k| >= n/3 of every entry.
fn band_limit(f: &[M2]) -> Vec<M2> {
    let n = f.len();
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|e| {
            let s: Vec<C64> = f.iter().map(|m| C64::new(m[e], 0.0)).collect();
            let mut co = fourier::coefficients(&s);
            for (j, z) in co.iter_mut().enumerate() {
                if 3 * fourier::mode(j, n).unsigned_abs() as usize >= n {
                    *z = ZERO;
                }
            }
            fourier::synthesize(&co).iter().map(|z| z.re).collect()
        })
        .collect();
    (0..n).map(|j| [cols[0][j], cols[1][j], cols[2][j], cols[3][j]]).collect()
}

fn shift_field(f: &[M2], t: f64) -> Vec<M2> {
    let cols: Vec<Vec<f64>> = (0..4).map(|e| real_shift(&f.iter().map(|m| m[e]).collect::<Vec<_>>(), t)).collect();
    (0..f.len()).map(|j| [cols[0][j], cols[1][j], cols[2][j], cols[3][j]]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conjugation {
    /// B on the grid with B(theta + alpha)^{-1} C(theta) B(theta) ~ R(2 pi rho).
    pub b: Vec<[f64; 4]>,
    /// Rotation number of the constant rotation reached.
    pub rho: f64,
    /// max over the grid of ||B(. + alpha)^{-1} C B - R(2 pi rho)||
    pub residual: f64,
    pub averaging_steps: usize,
    pub steps: usize,
    pub history: Vec<f64>,
    pub stalled: bool,
}

impl Conjugation {
    pub fn require_converged(&self) -> Result<()> {
        if self.stalled {
            return Err(Error::ConjugationStalled { residual: self.residual, steps: self.steps });
        }
        Ok(())
    }
}

/// Residual of the conjugation; returns D, its polar angles (lifted) and the
/// distance to the constant rotation by the mean angle.
fn conjugated(c: &[M2], b: &[M2], alpha: f64) -> Result<(Vec<M2>, Vec<f64>, f64)> {
    let n = c.len();
    let b1 = shift_field(b, alpha);
    let d: Vec<M2> = (0..n).map(|t| mul(&inv_sl2(&b1[t]), &mul(&c[t], &b[t]))).collect();
    let mut angles = Vec::with_capacity(n);
    let mut prev = 0.0;
    for (t, m) in d.iter().enumerate() {
        let raw = (m[2] - m[1]).atan2(m[0] + m[3]);
        let lifted = if t == 0 { raw } else { prev + linalg::wrap_pi(raw - prev) };
        angles.push(lifted);
        prev = lifted;
    }
    let closing = prev + linalg::wrap_pi(angles[0] - prev);
    let winding = ((closing - angles[0]) / TWO_PI).round() as i64;
    if winding != 0 {
        return Err(Error::NotHomotopicToIdentity { winding });
    }
    let mean = angles.iter().sum::<f64>() / n as f64;
    let r = rotation(mean);
    let residual = d
        .iter()
        .map(|m| m.iter().zip(&r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok((d, angles, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugationOptions {
    pub averaging_steps: usize,
    /// Maximum number of linearized steps.
    pub budget: usize,
    pub tol: f64,
}

impl Default for ConjugationOptions {
    fn default() -> Self {
        ConjugationOptions { averaging_steps: 512, budget: 40, tol: 1e-10 }
    }
}

/// Starting conjugacy from an invariant conformal structure: the Cesaro
/// average over j < steps of C_j(theta - j alpha) C_j(theta - j alpha)^T,
/// evaluated along each orbit, and its positive square root.
fn orbit_average(c: &[M2], alpha: f64, steps: usize) -> Vec<M2> {
    let n = c.len();
    let grid: Vec<Vec<C64>> = c.iter().map(|m| m.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
    let series = fourier::MatrixSeries::from_grid(&grid, 2, 2, 1e-15);
    let sample = |x: f64| -> M2 {
        let z = series.evaluate(x);
        [z[0].re, z[1].re, z[2].re, z[3].re]
    };
    let b: Vec<M2> = (0..n)
        .into_par_iter()
        .map(|t| {
            let theta = t as f64 / n as f64;
            let mut acc = [1.0, 0.0, 0.0, 1.0];
            let mut prod = [1.0, 0.0, 0.0, 1.0];
            for j in 1..steps {
                // C_j(theta - j alpha) = C(theta - alpha) ... C(theta - j alpha)
                prod = mul(&prod, &sample(theta - j as f64 * alpha));
                let p = mul(&prod, &transpose(&prod));
                for (a, x) in acc.iter_mut().zip(&p) {
                    *a += x;
                }
            }
            let det = (acc[0] * acc[3] - acc[1] * acc[2]).sqrt();
            let q = [acc[0] / det, acc[1] / det, acc[2] / det, acc[3] / det];
            // square root of a positive determinant-one matrix
            let s = (q[0] + q[3] + 2.0).sqrt();
            [(q[0] + 1.0) / s, q[1] / s, q[2] / s, (q[3] + 1.0) / s]
        })
        .collect();
    band_limit(&b)
}

struct Attempt {
    b: Vec<M2>,
    angles: Vec<f64>,
    residual: f64,
    history: Vec<f64>,
    steps: usize,
}

/// Linearized steps from a starting B: each removes the rotation part of
/// D = B^{-1}(. + alpha) C B by a cohomological equation for the angle and
/// the hyperbolic part by a twisted one.
fn linearized_steps(c: &[M2], alpha: f64, start: Vec<M2>, opts: &ConjugationOptions) -> Result<Attempt> {
    let n = c.len();
    let mut b = start;
    let mut history = Vec::new();
    let (mut d, mut angles, mut residual) = conjugated(c, &b, alpha)?;
    history.push(residual);
    let mut steps = 0;
    let mut best = (residual, b.clone(), angles.clone());
    while residual > opts.tol && steps < opts.budget {
        steps += 1;
        let mean = angles.iter().sum::<f64>() / n as f64;
        let g: Vec<C64> = angles.iter().map(|&a| C64::new(a - mean, 0.0)).collect();
        let gc = fourier::coefficients(&g);
        let (modes, _, _) = solve_modes(&gc, n, |k| C64::from_polar(1.0, TWO_PI * k as f64 * alpha) - 1.0)?;
        let psi: Vec<f64> = fourier::synthesize(&modes).iter().map(|z| z.re).collect();
        // hyperbolic part of R(-psi) P R(psi), P = R(-g) D, as a + ib
        let h: Vec<C64> = (0..n)
            .map(|t| {
                let pm = mul(&rotation(-angles[t]), &d[t]);
                let tr = 0.5 * (pm[0] + pm[3]);
                let r = tr.max(1.0).acosh();
                let scale = if r < 1e-8 { 1.0 } else { r / r.sinh() };
                let y = C64::new(scale * (pm[0] - tr), scale * 0.5 * (pm[1] + pm[2]));
                y * C64::from_polar(1.0, -2.0 * psi[t])
            })
            .collect();
        let hc = fourier::coefficients(&h);
        let twist = C64::from_polar(1.0, -2.0 * mean);
        let (ymodes, _, _) = solve_modes(&hc, n, |k| twist * C64::from_polar(1.0, TWO_PI * k as f64 * alpha) - 1.0)?;
        let y = fourier::synthesize(&ymodes);
        for t in 0..n {
            b[t] = mul(&b[t], &mul(&rotation(psi[t]), &exp_sym(y[t].re, y[t].im)));
        }
        let next = match conjugated(c, &b, alpha) {
            Ok(x) => x,
            // a step that breaks the lift is a failed step
            Err(Error::NotHomotopicToIdentity { .. }) => break,
            Err(e) => return Err(e),
        };
        d = next.0;
        angles = next.1;
        residual = next.2;
        history.push(residual);
        if !residual.is_finite() {
            break;
        }
        if residual < best.0 {
            best = (residual, b.clone(), angles.clone());
        }
        // plateau: no progress over three steps
        if history.len() > 3 && residual > 0.9 * history[history.len() - 4] {
            break;
        }
    }
    let (residual, b, angles) = best;
    Ok(Attempt { b, angles, residual, history, steps })
}

/// Conjugates the real SL(2) cocycle (alpha, C), given on a uniform grid,
/// towards a constant rotation. Linearized steps are tried from B = I first;
/// if they stall, again from an averaged invariant conformal structure.
pub fn conjugate_to_rotation(c: &[[f64; 4]], alpha: f64, opts: &ConjugationOptions) -> Result<Conjugation> {
    let n = c.len();
    if n < 16 {
        return Err(Error::InvalidArgument("conjugation needs at least 16 grid points".into()));
    }
    let mut attempt = linearized_steps(c, alpha, vec![[1.0, 0.0, 0.0, 1.0]; n], opts)?;
    let mut averaging_steps = 0;
    if attempt.residual > opts.tol && opts.averaging_steps > 0 {
        let start = orbit_average(c, alpha, opts.averaging_steps);
        if let Ok(second) = linearized_steps(c, alpha, start, opts) {
            averaging_steps = opts.averaging_steps;
            if second.residual < attempt.residual {
                let steps = attempt.steps + second.steps;
                let mut history = attempt.history;
                history.extend(second.history);
                attempt = Attempt { steps, history, ..second };
            }
        }
    }
    let mean = attempt.angles.iter().sum::<f64>() / n as f64;
    Ok(Conjugation {
        b: attempt.b,
        rho: (mean / TWO_PI).rem_euclid(1.0),
        residual: attempt.residual,
        averaging_steps,
        steps: attempt.steps,
        history: attempt.history,
        stalled: attempt.residual > opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochWave {
    pub energy: f64,
    /// Phase of the Schrodinger operator the wave solves.
    pub phase: f64,
    /// u(n) for n = -n_max..=n_max, unit norm.
    pub amplitudes: Vec<C64>,
    pub n_max: usize,
    /// ||(H - E) u|| / ||u|| on |n| < n_max
    pub residual: f64,
    pub decay_rate: f64,
}

impl BlochWave {
    pub fn at(&self, n: i64) -> C64 {
        let idx = n + self.n_max as i64;
        if idx < 0 || idx as usize >= self.amplitudes.len() {
            return ZERO;
        }
        self.amplitudes[idx as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochPair {
    pub energy: f64,
    pub rho_hat: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub u: BlochWave,
    pub v: BlochWave,
    pub conjugation_residual: f64,
    pub conjugation_steps: usize,
    pub stalled: bool,
    pub cohomology_residual: f64,
    /// Largest relative error of A w(theta) = e^{2 pi i rho_1} w(theta + alpha)
    /// for the assembled section.
    pub eigen_section_residual: f64,
    /// min over unimodular c of ||u(n) - c v(-n)||, for even potentials.
    pub even_defect: Option<f64>,
}

/// Residual of the eigen-equation of the Schrodinger operator at phase x,
/// evaluated by summing the Fourier series of v.
pub fn schrodinger_residual(v: &TrigPotential, alpha: f64, x: f64, e: f64, u: &[C64]) -> f64 {
    let n_max = (u.len() / 2) as i64;
    let mut acc = 0.0;
    for (i, ui) in u.iter().enumerate().take(u.len() - 1).skip(1) {
        let n = i as i64 - n_max;
        let pot = v.evaluate_real((x + n as f64 * alpha).rem_euclid(1.0));
        let r = u[i + 1] + u[i - 1] + (pot - e) * ui;
        acc += r.norm_sqr();
    }
    let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (acc / norm).sqrt()
}

fn wave_from(v: &TrigPotential, alpha: f64, e: f64, phase: f64, f: &[C64]) -> BlochWave {
    let n = f.len();
    let co = fourier::coefficients(f);
    let n_max = n / 2 - 1;
    let mut amplitudes: Vec<C64> = (-(n_max as i64)..=n_max as i64).map(|k| co[fourier::slot(k, n)]).collect();
    let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for a in amplitudes.iter_mut() {
        *a /= norm;
    }
    let residual = schrodinger_residual(v, alpha, phase, e, &amplitudes);
    let mags: Vec<f64> = amplitudes.iter().map(|z| z.norm()).collect();
    let (_, decay_rate) = schrodinger::decay_rate(&mags);
    BlochWave { energy: e, phase, amplitudes, n_max, residual, decay_rate }
}

/// Bloch waves of the Schrodinger operator at phases rho_1 and rho_2 from a
/// center frame of its dual: conjugates C to a rotation, removes phi by the
/// cohomological equation, and Fourier transforms the site-0 row of the
/// resulting eigen-sections.
pub fn bloch_reconstruct(
    frame: &CenterFrame,
    v: &TrigPotential,
    window: &DiophantineWindow,
    opts: &ConjugationOptions,
) -> Result<BlochPair> {
    let alpha = frame.alpha;
    let rot = center::center_rotation(frame)?;
    window.check(rot.rho_hat, alpha, WINDOW_K_MAX)?;
    let cmap = frame.c_cocycle();
    let l1 = cocycle::lyapunov_spectrum(&cmap, 1 << 15, 8)?.exponents[0];
    if l1 >= SUBCRITICAL_CENTER {
        return Err(Error::WindowViolation {
            energy: frame.energy,
            reason: format!("center exponent {l1} is not below {SUBCRITICAL_CENTER}"),
        });
    }
    let conj = conjugate_to_rotation(&frame.c_matrices, alpha, opts)?;
    let coh = cohomological_solve(&frame.phi, alpha, f64::INFINITY)?;
    let n = frame.theta_grid.len();
    let m = 2 * frame.degree;
    let site0 = frame.degree - 1;
    // G = (u, v) B e^{2 pi i psi}; w_pm = G (1, -+i)
    let i = C64::new(0.0, 1.0);
    let sections: Vec<[Vec<C64>; 2]> = (0..n)
        .map(|t| {
            let b = &conj.b[t];
            let gauge = C64::from_polar(1.0, TWO_PI * coh.psi[t]);
            let g0: Vec<C64> =
                (0..m).map(|k| (frame.u_basis[t][k] * b[0] + frame.v_basis[t][k] * b[2]) * gauge).collect();
            let g1: Vec<C64> =
                (0..m).map(|k| (frame.u_basis[t][k] * b[1] + frame.v_basis[t][k] * b[3]) * gauge).collect();
            let plus = g0.iter().zip(&g1).map(|(a, c)| a - i * c).collect();
            let minus = g0.iter().zip(&g1).map(|(a, c)| a + i * c).collect();
            [plus, minus]
        })
        .collect();
    let phase_plus = (coh.mean + conj.rho).rem_euclid(1.0);
    let phase_minus = (coh.mean - conj.rho).rem_euclid(1.0);
    // the section whose multiplier is closer to rho_1 gives u
    let near = |x: f64, y: f64| linalg::wrap_half(x - y).abs();
    let (iu, phase_u, phase_v) =
        if near(phase_plus, rot.rho1) <= near(phase_minus, rot.rho1) { (0, phase_plus, phase_minus) } else { (1, phase_minus, phase_plus) };
    let eigen_section_residual = section_residual(frame, v, &sections, iu, phase_u)?;
    let f: Vec<C64> = sections.iter().map(|s| s[iu][site0]).collect();
    let g: Vec<C64> = sections.iter().map(|s| s[1 - iu][site0]).collect();
    let u = wave_from(v, alpha, frame.energy, phase_u, &f);
    let w = wave_from(v, alpha, frame.energy, phase_v, &g);
    let even_defect = v.is_even().then(|| {
        let overlap: C64 = (-(u.n_max as i64)..=u.n_max as i64).map(|k| u.at(k).conj() * w.at(-k)).sum();
        (2.0 - 2.0 * overlap.norm()).max(0.0).sqrt()
    });
    Ok(BlochPair {
        energy: frame.energy,
        rho_hat: rot.rho_hat,
        rho1: rot.rho1,
        rho2: rot.rho2,
        u,
        v: w,
        conjugation_residual: conj.residual,
        conjugation_steps: conj.steps,
        stalled: conj.stalled,
        cohomology_residual: coh.residual,
        eigen_section_residual,
        even_defect,
    })
}

fn section_residual(
    frame: &CenterFrame,
    v: &TrigPotential,
    sections: &[[Vec<C64>; 2]],
    which: usize,
    phase: f64,
) -> Result<f64> {
    let n = sections.len();
    let m = 2 * frame.degree;
    let comps: Vec<Vec<C64>> = (0..m)
        .map(|k| fourier::shift(&sections.iter().map(|s| s[which][k]).collect::<Vec<_>>(), frame.alpha))
        .collect();
    let dc = dual::dual_cocycle(v, frame.alpha, C64::new(frame.energy, 0.0), 0.0)?;
    let lambda = C64::from_polar(1.0, TWO_PI * phase);
    let mut worst: f64 = 0.0;
    let mut aw = vec![ZERO; m];
    for t in 0..n {
        let a = dc.sample(frame.theta_grid[t]);
        linalg::matmul_rect_into(&a, &sections[t][which], m, 1, &mut aw);
        let mut err = 0.0;
        let mut scale = 0.0;
        for k in 0..m {
            err += (aw[k] - lambda * comps[k][t]).norm_sqr();
            scale += aw[k].norm_sqr();
        }
        worst = worst.max((err / scale.max(1e-300)).sqrt());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectComparison {
    pub size: usize,
    pub eigenvalue: f64,
    pub cosine_similarity: f64,
    pub direct_residual: f64,
}

/// Compares a Bloch wave with the eigenvector of the Schrodinger operator at
/// the same phase on sites -size/2..=size/2 whose eigenvalue is nearest E.
pub fn compare_direct(v: &TrigPotential, alpha: f64, wave: &BlochWave, size: usize) -> Result<DirectComparison> {
    if size < 101 {
        return Err(Error::InvalidArgument("direct comparison needs at least 101 sites".into()));
    }
    let half = (size / 2) as i64;
    let size = 2 * half as usize + 1;
    let diag: Vec<f64> =
        (-half..=half).map(|k| v.evaluate_real((wave.phase + k as f64 * alpha).rem_euclid(1.0))).collect();
    let e = wave.energy;
    let mut width = 1e-3;
    let evals = loop {
        let found = tridiag::eigenvalues_in(&diag, 1.0, e - width, e + width);
        if !found.is_empty() || width > 1.0 {
            break found;
        }
        width *= 4.0;
    };
    let nearest = evals
        .iter()
        .copied()
        .min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs()))
        .ok_or_else(|| Error::InvalidArgument(format!("no eigenvalue near {e}")))?;
    let vec = tridiag::eigenvectors(&diag, 1.0, &[nearest]).remove(0);
    let direct_residual = tridiag::residual(&diag, 1.0, nearest, &vec);
    let mut overlap = ZERO;
    let mut nb = 0.0;
    for (i, x) in vec.iter().enumerate() {
        let k = i as i64 - half;
        let u = wave.at(k);
        overlap += u.conj() * x;
        nb += u.norm_sqr();
    }
    Ok(DirectComparison {
        size,
        eigenvalue: nearest,
        cosine_similarity: overlap.norm() / nb.sqrt().max(1e-300),
        direct_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_cohomology() {
        let alpha = arith::golden_mean();
        let n = 256;
        let phi: Vec<f64> = (0..n).map(|j| (TWO_PI * j as f64 / n as f64).cos()).collect();
        let sol = cohomological_solve(&phi, alpha, f64::INFINITY).unwrap();
        assert!(sol.residual < 1e-10);
        let co = fourier::coefficients(&sol.psi.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        let expect = C64::new(0.5, 0.0) / (C64::from_polar(1.0, TWO_PI * alpha) - 1.0);
        assert!((co[1] - expect).norm() < 1e-12);
        assert_eq!(sol.retained_modes, 2);
    }

    #[test]
    fn constant_phi_gives_zero() {
        let sol = cohomological_solve(&[0.3; 64], 0.4142, f64::INFINITY).unwrap();
        assert!(sol.psi.iter().all(|x| x.abs() < 1e-15));
        assert!((sol.mean - 0.3).abs() < 1e-15);
    }

    #[test]
    fn window_rejects_resonance() {
        let alpha = arith::golden_mean();
        let w = DiophantineWindow::default();
        // 2 rho = -alpha mod 1
        let rho = (1.0 - alpha) / 2.0;
        assert!(matches!(w.check(rho, alpha, 100), Err(Error::WindowRejected { k: 1, .. })));
        assert!(w.check(0.25 + 0.1, alpha, 100).is_ok());
    }

    #[test]
    fn rotation_cocycle_needs_no_conjugation() {
        let n = 128;
        let c = vec![rotation(TWO_PI * 0.3); n];
        let conj = conjugate_to_rotation(&c, arith::golden_mean(), &ConjugationOptions::default()).unwrap();
        assert!(conj.residual < 1e-12 && (conj.rho - 0.3).abs() < 1e-12);
    }

    #[test]
    fn conjugates_a_coboundary() {
        // C = B(. + alpha) R B^{-1} with B = exp(0.3 cos 2 pi theta sigma_3) R(0.2 sin 2 pi theta)
        let alpha = arith::golden_mean();
        let n = 256;
        let bf = |x: f64| {
            mul(&exp_sym(0.3 * (TWO_PI * x).cos(), 0.1 * (TWO_PI * x).sin()), &rotation(0.2 * (TWO_PI * x).sin()))
        };
        let c: Vec<M2> = (0..n)
            .map(|j| {
                let x = j as f64 / n as f64;
                mul(&bf(x + alpha), &mul(&rotation(TWO_PI * 0.17), &inv_sl2(&bf(x))))
            })
            .collect();
        let conj0 = conjugate_to_rotation(&c, alpha, &ConjugationOptions { averaging_steps: 0, ..Default::default() }).unwrap();
        assert!(conj0.residual < 1e-10, "{:?}", conj0.history);
        let conj = conjugate_to_rotation(&c, alpha, &ConjugationOptions::default()).unwrap();
        assert!(conj.residual < 1e-9, "{:?}", conj.history);
        assert!((conj.rho - 0.17).abs() < 1e-9);
    }
}
