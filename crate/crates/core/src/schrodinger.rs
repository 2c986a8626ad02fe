//! Schrodinger cocycles A_E = [[E - v, -1], [1, 0]] and the analyses built on
//! them: complexified Lyapunov profiles, acceleration, regime labels, the
//! integrated density of states and its cross-checks, Holder estimates and a
//! finite-box localization probe.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{self, CocycleMap, LyapunovSpectrum};
use crate::error::{Error, Result};
use crate::fit::{self, LineFit, SegmentedFit};
use crate::linalg::{self, C64};
use crate::potential::{Potential, TrigPotential};
use crate::tridiag;

const TWO_PI: f64 = 2.0 * PI;

/// Slopes are snapped to integers (in units of 2 pi) within this distance.
pub const SNAP_TOL: f64 = 0.15;

/// Floor of the zero test for L(E).
pub const ZERO_FLOOR: f64 = 1e-3;

/// Trigonometric polynomial used to sample v on its strip of analyticity.
pub fn sampling_polynomial(v: &Potential) -> TrigPotential {
    let r = v.strip_radius();
    let h = if r.is_finite() { 0.95 * r } else { 1.0 };
    v.as_trig(h)
}

/// The Schrodinger cocycle (alpha, A_E) of the potential v.
pub fn schrodinger_cocycle(v: &Potential, alpha: f64, e: f64) -> CocycleMap {
    let poly = sampling_polynomial(v);
    let e = C64::new(e, 0.0);
    let minus_one = C64::new(-1.0, 0.0);
    let one = C64::new(1.0, 0.0);
    CocycleMap::new(alpha, 2, v.strip_radius(), move |z, out| {
        out[0] = e - poly.evaluate(z);
        out[1] = minus_one;
        out[2] = one;
        out[3] = C64::new(0.0, 0.0);
    })
}

/// Horizon and averaging controls for Lyapunov computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// Starting horizon (total steps over all segments).
    pub horizon: usize,
    pub segments: usize,
    /// Horizon doubling stops when two estimates differ by less than this.
    pub tol: f64,
    pub cap: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { horizon: 1 << 15, segments: 8, tol: 1e-4, cap: 1 << 21 }
    }
}

impl LyapunovOptions {
    pub fn fixed(horizon: usize, segments: usize) -> Self {
        LyapunovOptions { horizon, segments, tol: f64::INFINITY, cap: horizon }
    }

    pub fn run(&self, c: &CocycleMap) -> Result<LyapunovSpectrum> {
        if self.tol.is_finite() {
            cocycle::lyapunov_spectrum_adaptive(c, self.horizon, self.segments, self.tol, self.cap)
        } else {
            cocycle::lyapunov_spectrum(c, self.horizon, self.segments)
        }
    }
}

/// L(E) with its standard error.
pub fn lyapunov(v: &Potential, alpha: f64, e: f64, opts: &LyapunovOptions) -> Result<(f64, f64)> {
    let s = opts.run(&schrodinger_cocycle(v, alpha, e))?;
    Ok((s.exponents[0], s.stderr[0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovProfile {
    pub energy: f64,
    /// Symmetric about 0, increasing.
    pub eps_grid: Vec<f64>,
    pub l_values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Turning points on eps >= 0 after snapping and merging.
    pub breakpoints: Vec<f64>,
    /// Slopes in units of 2 pi, one per piece on eps >= 0, snapped.
    pub slopes: Vec<i64>,
    /// The same slopes before snapping.
    pub raw_slopes: Vec<f64>,
    pub fit_residual: f64,
    /// max |L(eps) - L(-eps)|
    pub evenness_defect: f64,
    /// min second difference of L over the grid (negative means non-convex)
    pub convexity_defect: f64,
}

impl LyapunovProfile {
    pub fn lyapunov(&self) -> f64 {
        self.l_values[self.eps_grid.len() / 2]
    }

    pub fn lyapunov_stderr(&self) -> f64 {
        self.stderr[self.eps_grid.len() / 2]
    }

    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().cloned().fold(0.0, f64::max)
    }

    /// Distance of the first raw slope from the nearest integer.
    pub fn acceleration_deviation(&self) -> f64 {
        let s = self.raw_slopes[0];
        (s - s.round()).abs()
    }
}

/// Default profile extent 1.5 L / 2 pi + 0.05, clipped to the strip.
pub fn default_eps_max(l: f64, strip: f64) -> f64 {
    let e = 1.5 * l.max(0.0) / TWO_PI + 0.05;
    if strip.is_finite() {
        e.min(0.9 * strip)
    } else {
        e
    }
}

/// Samples eps -> L_eps(E) on a symmetric grid of 2 n_eps - 1 points and fits
/// a convex piecewise-affine model with integer slopes on eps >= 0.
pub fn lyapunov_profile(
    v: &Potential,
    alpha: f64,
    e: f64,
    eps_max: f64,
    n_eps: usize,
    opts: &LyapunovOptions,
) -> Result<LyapunovProfile> {
    if n_eps < 9 {
        return Err(Error::InvalidArgument(format!("need n_eps >= 9, got {n_eps}")));
    }
    if !(eps_max > 0.0) {
        return Err(Error::InvalidArgument("eps_max must be positive".into()));
    }
    let radius = v.strip_radius();
    if eps_max >= radius {
        return Err(Error::StripExceeded { eps: eps_max, radius });
    }
    let base = schrodinger_cocycle(v, alpha, e);
    let half: Vec<f64> = (0..n_eps).map(|i| eps_max * i as f64 / (n_eps - 1) as f64).collect();
    let mut grid: Vec<f64> = half.iter().skip(1).rev().map(|x| -x).collect();
    grid.extend_from_slice(&half);
    let results: Vec<Result<LyapunovSpectrum>> = grid
        .par_iter()
        .map(|&eps| base.complexify(eps).and_then(|c| opts.run(&c)))
        .collect();
    let spectra: Vec<LyapunovSpectrum> = results.into_iter().collect::<Result<_>>()?;
    let l_values: Vec<f64> = spectra.iter().map(|s| s.exponents[0]).collect();
    let stderr: Vec<f64> = spectra.iter().map(|s| s.stderr[0]).collect();
    profile_from_samples(e, grid, l_values, stderr)
}

/// Fits an already sampled symmetric profile.
pub fn profile_from_samples(e: f64, grid: Vec<f64>, l_values: Vec<f64>, stderr: Vec<f64>) -> Result<LyapunovProfile> {
    let m = grid.len();
    let mid = m / 2;
    let mut evenness_defect: f64 = 0.0;
    for i in 0..=mid {
        evenness_defect = evenness_defect.max((l_values[mid + i] - l_values[mid - i]).abs());
    }
    let mut convexity_defect = f64::INFINITY;
    for i in 1..m - 1 {
        convexity_defect = convexity_defect.min(l_values[i + 1] - 2.0 * l_values[i] + l_values[i - 1]);
    }
    let x: Vec<f64> = grid[mid..].to_vec();
    // average the two sides: the profile is even
    let y: Vec<f64> = (0..x.len()).map(|i| 0.5 * (l_values[mid + i] + l_values[mid - i])).collect();
    let noise = stderr.iter().cloned().fold(0.0, f64::max).max(1e-6);
    let segfit = fit::segmented_fit(&x, &y, 4, noise);
    let raw: Vec<f64> = segfit.slopes.iter().map(|s| s / TWO_PI).collect();
    for &s in &raw {
        let dist = (s - s.round()).abs();
        if dist > SNAP_TOL {
            return Err(Error::SnapFailure { slope: s, distance: dist });
        }
    }
    let (breakpoints, slopes, raw_slopes) = merge_pieces(&segfit, &raw);
    Ok(LyapunovProfile {
        energy: e,
        eps_grid: grid,
        l_values,
        stderr,
        breakpoints,
        slopes,
        raw_slopes,
        fit_residual: segfit.rms_residual(x.len()),
        evenness_defect,
        convexity_defect,
    })
}

/// Drops breakpoints between pieces whose snapped slopes agree.
fn merge_pieces(fit: &SegmentedFit, raw: &[f64]) -> (Vec<f64>, Vec<i64>, Vec<f64>) {
    let mut bps = Vec::new();
    let mut slopes = vec![raw[0].round() as i64];
    let mut raws = vec![raw[0]];
    for (j, &t) in fit.breakpoints.iter().enumerate() {
        let s = raw[j + 1].round() as i64;
        if s != *slopes.last().expect("non-empty") {
            bps.push(t);
            slopes.push(s);
            raws.push(raw[j + 1]);
        }
    }
    (bps, slopes, raws)
}

/// Right slope of eps -> L_eps at 0, in units of 2 pi.
pub fn acceleration(profile: &LyapunovProfile) -> Result<i64> {
    let dev = profile.acceleration_deviation();
    if dev > SNAP_TOL {
        return Err(Error::SnapFailure { slope: profile.raw_slopes[0], distance: dev });
    }
    Ok(profile.slopes[0])
}

/// Slope just after the first turning point of the profile on eps >= 0, with
/// 0 itself counting as a turning point when the acceleration is positive.
/// Returns 0 when there is no turning point on the grid.
pub fn t_acceleration(profile: &LyapunovProfile) -> Result<i64> {
    let omega = acceleration(profile)?;
    if omega > 0 {
        return Ok(omega);
    }
    let Some(&t) = profile.breakpoints.first() else {
        return Ok(0);
    };
    let after = profile.eps_grid.iter().filter(|&&x| x > t).count();
    if after < 3 {
        return Err(Error::GridTooShort { breakpoint: t });
    }
    Ok(profile.slopes[1])
}

/// First turning point on eps >= 0 (0 when the acceleration is positive).
pub fn first_turning_point(profile: &LyapunovProfile) -> Option<f64> {
    if profile.slopes[0] > 0 {
        Some(0.0)
    } else {
        profile.breakpoints.first().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    UniformlyHyperbolic,
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub omega: i64,
    pub t_omega: i64,
    pub type_one: bool,
    pub lyapunov: f64,
    pub stderr: f64,
    /// Threshold used by the zero test for L(E).
    pub zero_threshold: f64,
}

pub fn regime_from_profile(profile: &LyapunovProfile) -> Result<RegimeLabel> {
    let omega = acceleration(profile)?;
    let t_omega = t_acceleration(profile)?;
    let l = profile.lyapunov();
    let se = profile.lyapunov_stderr();
    let threshold = ZERO_FLOOR.max(3.0 * se);
    let positive = l > threshold;
    let regime = match (positive, omega > 0) {
        (true, false) => Regime::UniformlyHyperbolic,
        (true, true) => Regime::Supercritical,
        (false, true) => Regime::Critical,
        (false, false) => Regime::Subcritical,
    };
    Ok(RegimeLabel { regime, omega, t_omega, type_one: t_omega == 1, lyapunov: l, stderr: se, zero_threshold: threshold })
}

/// Global-theory label of the energy E.
pub fn classify(v: &Potential, alpha: f64, e: f64, opts: &LyapunovOptions) -> Result<RegimeLabel> {
    let (l, _) = lyapunov(v, alpha, e, opts)?;
    let eps_max = default_eps_max(l, v.strip_radius());
    let profile = lyapunov_profile(v, alpha, e, eps_max, 16, opts)?;
    regime_from_profile(&profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdsRecord {
    pub energy: f64,
    pub n: f64,
    pub truncation_size: usize,
    pub theta_samples: usize,
    pub stderr: f64,
}

/// Dirichlet truncations of the operator at a fixed set of phases, reused
/// across energies.
#[derive(Debug, Clone)]
pub struct IdsTable {
    diagonals: Vec<Vec<f64>>,
    size: usize,
}

/// v(theta + n alpha) for n = 0..size.
pub fn potential_diagonal(poly: &TrigPotential, alpha: f64, theta: f64, size: usize) -> Vec<f64> {
    (0..size).map(|n| poly.evaluate_real((theta + n as f64 * alpha).rem_euclid(1.0))).collect()
}

impl IdsTable {
    pub fn new(v: &Potential, alpha: f64, size: usize, theta_samples: usize) -> Result<Self> {
        if size < 50 {
            return Err(Error::InvalidArgument(format!("IDS truncation needs size >= 50, got {size}")));
        }
        if theta_samples == 0 {
            return Err(Error::InvalidArgument("need at least one phase sample".into()));
        }
        let poly = sampling_polynomial(v);
        let diagonals = (0..theta_samples)
            .into_par_iter()
            .map(|j| potential_diagonal(&poly, alpha, j as f64 / theta_samples as f64, size))
            .collect();
        Ok(IdsTable { diagonals, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn samples(&self) -> usize {
        self.diagonals.len()
    }

    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.diagonals
    }

    pub fn at(&self, e: f64) -> IdsRecord {
        let counts: Vec<f64> = self
            .diagonals
            .iter()
            .map(|d| tridiag::sturm_count(d, 1.0, e) as f64 / self.size as f64)
            .collect();
        let s = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / s;
        let var = if counts.len() > 1 {
            counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (s - 1.0)
        } else {
            0.0
        };
        IdsRecord {
            energy: e,
            n: mean,
            truncation_size: self.size,
            theta_samples: counts.len(),
            stderr: (var / s).sqrt() + 2.0 / self.size as f64,
        }
    }

    pub fn sweep(&self, energies: &[f64]) -> Vec<IdsRecord> {
        energies.par_iter().map(|&e| self.at(e)).collect()
    }

    /// Smallest energy where the averaged count reaches `target`.
    pub fn energy_at(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for d in &self.diagonals {
            let (a, b) = tridiag::bounds(d, 1.0);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        lo -= 1.0;
        hi += 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.at(mid).n >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Spectral bounds of all truncations.
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in &self.diagonals {
            let evs = tridiag::eigenvalues_by_index(d, 1.0, 0, 1);
            let top = tridiag::eigenvalues_by_index(d, 1.0, d.len() - 1, d.len());
            lo = lo.min(evs[0]);
            hi = hi.max(top[0]);
        }
        (lo, hi)
    }
}

/// N(E) from Sturm counts of Dirichlet truncations at `theta_samples` phases.
pub fn ids(v: &Potential, alpha: f64, e: f64, size: usize, theta_samples: usize) -> Result<IdsRecord> {
    Ok(IdsTable::new(v, alpha, size, theta_samples)?.at(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdsRotationCheck {
    pub energy: f64,
    pub n: f64,
    pub rho: f64,
    /// |N - (1 - 2 rho)| taken modulo 1.
    pub residual: f64,
}

pub const ROTATION_HORIZON: usize = 1 << 18;

pub fn ids_rotation_check_with(table: &IdsTable, v: &Potential, alpha: f64, e: f64) -> Result<IdsRotationCheck> {
    let n = table.at(e).n;
    let rho = cocycle::rotation_number(&schrodinger_cocycle(v, alpha, e), ROTATION_HORIZON)?.rho;
    let residual = linalg::wrap_half(n - (1.0 - 2.0 * rho)).abs();
    Ok(IdsRotationCheck { energy: e, n, rho, residual })
}

/// Compares the IDS with 1 - 2 rho(E).
pub fn ids_rotation_check(v: &Potential, alpha: f64, e: f64, size: usize) -> Result<IdsRotationCheck> {
    let table = IdsTable::new(v, alpha, size, 16)?;
    ids_rotation_check_with(&table, v, alpha, e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThoulessCheck {
    pub energy: f64,
    pub lyapunov: f64,
    pub integral: f64,
    pub residual: f64,
}

/// Stieltjes sum of ln|E - E'| dN(E') over a sorted IDS sweep. Mass below the
/// first and above the last sweep point is placed at those points.
pub fn thouless_integral(e: f64, sweep: &[IdsRecord]) -> f64 {
    let mut acc = sweep[0].n * (e - sweep[0].energy).abs().max(1e-300).ln();
    for w in sweep.windows(2) {
        let dn = w[1].n - w[0].n;
        if dn != 0.0 {
            let mid = 0.5 * (w[0].energy + w[1].energy);
            acc += dn * (e - mid).abs().max(1e-300).ln();
        }
    }
    let last = sweep[sweep.len() - 1];
    acc + (1.0 - last.n) * (e - last.energy).abs().max(1e-300).ln()
}

/// |L(E) - int ln|E - E'| dN(E')| with L from the cocycle engine.
pub fn thouless_check(v: &Potential, alpha: f64, e: f64, sweep: &[IdsRecord], opts: &LyapunovOptions) -> Result<ThoulessCheck> {
    if sweep.len() < 2 {
        return Err(Error::InvalidArgument("Thouless check needs an IDS sweep".into()));
    }
    let (l, _) = lyapunov(v, alpha, e, opts)?;
    let integral = thouless_integral(e, sweep);
    Ok(ThoulessCheck { energy: e, lyapunov: l, integral, residual: (l - integral).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub e0: f64,
    pub exponent: f64,
    pub r2: f64,
    /// (s, N(E0 + s) - N(E0 - s))
    pub oscillations: Vec<(f64, f64)>,
}

fn interpolate_ids(sweep: &[IdsRecord], e: f64) -> f64 {
    let i = sweep.partition_point(|r| r.energy <= e);
    if i == 0 {
        return sweep[0].n;
    }
    if i >= sweep.len() {
        return sweep[sweep.len() - 1].n;
    }
    let (a, b) = (sweep[i - 1], sweep[i]);
    a.n + (b.n - a.n) * (e - a.energy) / (b.energy - a.energy)
}

/// Regression slope of ln(N(E0+s) - N(E0-s)) against ln s.
pub fn holder_exponent(sweep: &[IdsRecord], e0: f64, scales: &[f64]) -> Result<HolderFit> {
    if sweep.len() < 2 || scales.len() < 2 {
        return Err(Error::InvalidArgument("need a sweep and at least two scales".into()));
    }
    let resolution = sweep.windows(2).map(|w| w[1].energy - w[0].energy).fold(0.0, f64::max);
    let smallest = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    if resolution > smallest {
        return Err(Error::InvalidArgument(format!(
            "sweep resolution {resolution} is coarser than the smallest scale {smallest}"
        )));
    }
    let oscillations: Vec<(f64, f64)> = scales
        .iter()
        .map(|&s| (s, interpolate_ids(sweep, e0 + s) - interpolate_ids(sweep, e0 - s)))
        .collect();
    let usable: Vec<(f64, f64)> = oscillations.iter().filter(|(_, o)| *o > 0.0).map(|&(s, o)| (s.ln(), o.ln())).collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateWindow { e0 });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let LineFit { slope, r2, .. } = fit::linear_fit(&x, &y);
    Ok(HolderFit { e0, exponent: slope, r2, oscillations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecay {
    pub energy: f64,
    pub center: usize,
    pub rate: f64,
    pub ipr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub size: usize,
    pub theta: f64,
    pub eigenpairs: Vec<EigenDecay>,
    pub median_rate: f64,
    pub max_rate: f64,
    pub mean_ipr: f64,
}

/// Relative amplitude below which the decay envelope is not fitted.
pub const DECAY_FLOOR: f64 = 1e-12;

/// Exponential decay rate of |u(n)| away from its maximum, from a
/// least-squares fit of the log of the outward running-max envelope.
pub fn decay_rate(u: &[f64]) -> (usize, f64) {
    let n = u.len();
    let (center, peak) = u
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) });
    let reach = center.max(n - 1 - center);
    // env[r] = max |u_m| over |m - center| >= r
    let mut env = vec![0.0f64; reach + 1];
    let mut running = 0.0f64;
    for r in (0..=reach).rev() {
        if center >= r {
            running = running.max(u[center - r].abs());
        }
        if center + r < n {
            running = running.max(u[center + r].abs());
        }
        env[r] = running;
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, &a) in env.iter().enumerate() {
        if a <= DECAY_FLOOR * peak {
            break;
        }
        xs.push(r as f64);
        ys.push((a / peak).ln());
    }
    if xs.len() < 2 {
        return (center, f64::INFINITY);
    }
    (center, -fit::linear_fit(&xs, &ys).slope)
}

/// Diagonalizes the Dirichlet truncation at phase theta and reports decay
/// rates and inverse participation ratios of the eigenvectors with energy in
/// the window.
pub fn localization_probe(
    v: &Potential,
    alpha: f64,
    theta: f64,
    e_window: (f64, f64),
    size: usize,
) -> Result<LocalizationReport> {
    if size < 500 {
        return Err(Error::InvalidArgument(format!("localization probe needs size >= 500, got {size}")));
    }
    let poly = sampling_polynomial(v);
    let d = potential_diagonal(&poly, alpha, theta, size);
    let evals = tridiag::eigenvalues_in(&d, 1.0, e_window.0, e_window.1);
    let vecs = tridiag::eigenvectors(&d, 1.0, &evals);
    let eigenpairs: Vec<EigenDecay> = evals
        .par_iter()
        .zip(vecs.par_iter())
        .map(|(&e, u)| {
            let (center, rate) = decay_rate(u);
            let ipr = u.iter().map(|x| x.powi(4)).sum();
            EigenDecay { energy: e, center, rate, ipr }
        })
        .collect();
    let mut rates: Vec<f64> = eigenpairs.iter().map(|p| p.rate).collect();
    rates.sort_by(|a, b| a.total_cmp(b));
    let median_rate = if rates.is_empty() { f64::NAN } else { rates[rates.len() / 2] };
    let max_rate = rates.last().copied().unwrap_or(f64::NAN);
    let mean_ipr = eigenpairs.iter().map(|p| p.ipr).sum::<f64>() / eigenpairs.len().max(1) as f64;
    Ok(LocalizationReport { size, theta, eigenpairs, median_rate, max_rate, mean_ipr })
}

/// Energies where N takes the given values (IDS inversion on `table`).
pub fn energies_at_ids(table: &IdsTable, targets: &[f64]) -> Vec<f64> {
    targets.par_iter().map(|&t| table.energy_at(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::golden_mean;

    fn zero() -> Potential {
        TrigPotential::zero().into()
    }

    #[test]
    fn cocycle_entries() {
        let c = schrodinger_cocycle(&zero(), golden_mean(), 0.0);
        let m = c.sample(0.3);
        let expect: Vec<C64> = [0.0, -1.0, 1.0, 0.0].iter().map(|&x| C64::new(x, 0.0)).collect();
        assert_eq!(m, expect);
        let amo: Potential = TrigPotential::amo(1.0).into();
        let c = schrodinger_cocycle(&amo, golden_mean(), 1.0);
        let m = c.sample(0.0);
        assert!((m[0] - C64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn free_lyapunov_at_three() {
        let (l, _) = lyapunov(&zero(), golden_mean(), 3.0, &LyapunovOptions::fixed(1 << 14, 4)).unwrap();
        assert!((l - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-10);
    }

    #[test]
    fn free_ids_values() {
        let r = ids(&zero(), golden_mean(), 0.0, 1001, 1).unwrap();
        assert!((r.n - 0.5).abs() < 1e-3);
        let r = ids(&zero(), golden_mean(), 2f64.sqrt(), 1000, 1).unwrap();
        assert!((r.n - 0.75).abs() < 2.0 / 1000.0);
    }

    #[test]
    fn decay_rate_of_exponential() {
        let u: Vec<f64> = (0..400).map(|n| (-0.5 * (n as f64 - 150.0).abs()).exp()).collect();
        let (c, r) = decay_rate(&u);
        assert_eq!(c, 150);
        assert!((r - 0.5).abs() < 1e-9);
    }

    #[test]
    fn holder_of_linear_ids_is_one() {
        let sweep: Vec<IdsRecord> = (0..=2000)
            .map(|i| {
                let e = -1.0 + i as f64 * 1e-3;
                IdsRecord { energy: e, n: 0.5 + 0.25 * e, truncation_size: 0, theta_samples: 0, stderr: 0.0 }
            })
            .collect();
        let h = holder_exponent(&sweep, 0.0, &[0.25, 0.125, 0.0625, 0.03125]).unwrap();
        assert!((h.exponent - 1.0).abs() < 1e-9);
    }
}
