//! The finite-range dual operator of a trigonometric potential and its
//! 2d-dimensional companion cocycle.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{self, CocycleMap, LyapunovSpectrum};
use crate::error::{Error, Result};
use crate::fit;
use crate::linalg::{self, C64, ZERO};
use crate::potential::{Potential, TrigPotential};
use crate::schrodinger::{self, LyapunovOptions};

const TWO_PI: f64 = 2.0 * PI;

/// Smallest admissible |v_d|.
pub const LEADING_FLOOR: f64 = 1e-12;

/// Floor of the pairing tolerance, for exactly computable spectra.
pub const PAIRING_FLOOR: f64 = 1e-9;

/// Dual cocycle of v at energy E, sampled at theta + i eps.
#[derive(Debug, Clone)]
pub struct DualCocycle {
    pub potential: TrigPotential,
    pub energy: C64,
    pub eps: f64,
    /// Multiplier of the cosine term (1 for the dual operator, 0 for the
    /// constant companion matrix of the hopping part).
    pub cos_weight: f64,
    pub map: CocycleMap,
}

impl DualCocycle {
    pub fn degree(&self) -> usize {
        self.potential.degree()
    }

    pub fn dim(&self) -> usize {
        2 * self.potential.degree()
    }

    /// The same cocycle at another imaginary shift.
    pub fn with_eps(&self, eps: f64) -> DualCocycle {
        build(&self.potential, self.energy, eps, self.cos_weight, self.map.alpha)
    }

    pub fn sample(&self, theta: f64) -> Vec<C64> {
        self.map.sample(theta)
    }

    pub fn symplectic_form(&self) -> Vec<C64> {
        symplectic_form(&self.potential)
    }
}

fn build(v: &TrigPotential, e: C64, eps: f64, cos_weight: f64, alpha: f64) -> DualCocycle {
    let d = v.degree();
    let m = 2 * d;
    let lead = v.coeff(d as i64);
    // first row without the cosine term
    let mut row = vec![ZERO; m];
    for (j, r) in row.iter_mut().enumerate() {
        let entry = if j + 1 < d {
            -v.coeff((d - 1 - j) as i64)
        } else if j + 1 == d {
            e - v.coeff(0)
        } else {
            -v.coeff(-((j - d + 1) as i64))
        };
        *r = entry / lead;
    }
    let weight = C64::new(2.0 * cos_weight, 0.0) / lead;
    let map = CocycleMap::new(alpha, m, f64::INFINITY, move |z, out| {
        for x in out.iter_mut() {
            *x = ZERO;
        }
        out[..m].copy_from_slice(&row);
        let c = (z * TWO_PI).cos();
        out[d - 1] -= weight * c;
        for i in 1..m {
            out[i * m + i - 1] = C64::new(1.0, 0.0);
        }
    });
    let map = if eps != 0.0 { map.complexify(eps).expect("entire sampler") } else { map };
    DualCocycle { potential: v.clone(), energy: e, eps, cos_weight, map }
}

/// The dual cocycle: coordinate j of the state is the amplitude at site
/// n + d - 1 - j.
pub fn dual_cocycle(v: &TrigPotential, alpha: f64, e: C64, eps: f64) -> Result<DualCocycle> {
    check_leading(v)?;
    Ok(build(v, e, eps, 1.0, alpha))
}

/// The companion matrix of the hopping part alone (cosine term dropped).
pub fn companion_cocycle(v: &TrigPotential, alpha: f64, e: C64) -> Result<DualCocycle> {
    check_leading(v)?;
    Ok(build(v, e, 0.0, 0.0, alpha))
}

fn check_leading(v: &TrigPotential) -> Result<()> {
    let d = v.degree();
    if d == 0 {
        return Err(Error::DegenerateLeadingCoefficient { modulus: 0.0 });
    }
    let modulus = v.coeff(d as i64).norm();
    if modulus <= LEADING_FLOOR {
        return Err(Error::DegenerateLeadingCoefficient { modulus });
    }
    Ok(())
}

/// S = [[0, -C*], [C, 0]] with C the upper-triangular Toeplitz matrix whose
/// first row is (v_d, ..., v_1).
pub fn symplectic_form(v: &TrigPotential) -> Vec<C64> {
    let d = v.degree();
    let m = 2 * d;
    let mut s = vec![ZERO; m * m];
    for i in 0..d {
        for j in i..d {
            let c = v.coeff((d - (j - i)) as i64);
            // C at block (1,0), -C* at block (0,1)
            s[(d + i) * m + j] = c;
            s[j * m + d + i] = -c.conj();
        }
    }
    s
}

/// max |A(theta + i eps, E)* S A(theta - i eps, conj E) - S|.
pub fn symplectic_defect(v: &TrigPotential, alpha: f64, e: C64, theta: f64, eps: f64) -> Result<f64> {
    let m = 2 * v.degree();
    let plus = dual_cocycle(v, alpha, e, eps)?.sample(theta);
    let minus = dual_cocycle(v, alpha, e.conj(), -eps)?.sample(theta);
    let s = symplectic_form(v);
    let lhs = linalg::matmul(&linalg::adjoint(&plus, m), &linalg::matmul(&s, &minus, m), m);
    Ok(lhs.iter().zip(&s).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSpectrum {
    pub spectrum: LyapunovSpectrum,
    /// gamma_1 <= ... <= gamma_d, the non-negative half.
    pub gammas: Vec<f64>,
    /// max_i |L_i + L_{2d+1-i}|
    pub pairing_defect: f64,
    pub pairing_tolerance: f64,
}

pub fn check_pairing(spectrum: LyapunovSpectrum) -> Result<DualSpectrum> {
    let m = spectrum.exponents.len();
    let d = m / 2;
    let mut defect: f64 = 0.0;
    let mut tolerance = f64::INFINITY;
    let mut violation = None;
    for i in 0..d {
        let j = m - 1 - i;
        let dev = (spectrum.exponents[i] + spectrum.exponents[j]).abs();
        let tol = (3.0 * (spectrum.stderr[i] + spectrum.stderr[j])).max(PAIRING_FLOOR);
        defect = defect.max(dev);
        tolerance = tolerance.min(tol);
        if dev > tol && violation.is_none() {
            violation = Some((dev, tol));
        }
    }
    if let Some((deviation, tolerance)) = violation {
        return Err(Error::PairingViolation { deviation, tolerance });
    }
    let gammas = spectrum.exponents[..d].iter().rev().copied().collect();
    Ok(DualSpectrum { spectrum, gammas, pairing_defect: defect, pairing_tolerance: tolerance })
}

/// Full spectrum of the dual cocycle with the symplectic pairing checked.
pub fn dual_lyapunov_spectrum(dc: &DualCocycle, n: usize, segments: usize) -> Result<DualSpectrum> {
    check_pairing(cocycle::lyapunov_spectrum(&dc.map, n, segments)?)
}

/// Same, with the horizon controls used elsewhere.
pub fn dual_spectrum_with(dc: &DualCocycle, opts: &LyapunovOptions) -> Result<DualSpectrum> {
    check_pairing(opts.run(&dc.map)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenProfile {
    pub energy: f64,
    pub eps_grid: Vec<f64>,
    /// L^d at each grid point.
    pub l_hat_d: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Value of the fit on its first piece.
    pub flat_value: f64,
    /// Slope of the first piece on eps >= 0.
    pub flat_slope: f64,
    /// First fitted turning point on eps >= 0.
    pub flat_radius: Option<f64>,
    /// Slope right after it.
    pub post_slope: Option<f64>,
    /// All fitted turning points and slopes on eps >= 0.
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    /// mean of L^d - 2 pi |eps| over the tail of the grid
    pub asymptote_offset: Option<f64>,
    /// -ln |v_d|, the predicted offset
    pub predicted_offset: f64,
    pub fit_residual: f64,
}

/// Symmetric grid of 2n-1 points on [-eps_max, eps_max].
pub fn symmetric_grid(eps_max: f64, n: usize) -> Vec<f64> {
    let half: Vec<f64> = (0..n).map(|i| eps_max * i as f64 / (n - 1).max(1) as f64).collect();
    let mut grid: Vec<f64> = half.iter().skip(1).rev().map(|x| -x).collect();
    grid.extend_from_slice(&half);
    grid
}

/// eps -> L^k of the dual cocycle over a grid, with the error bound of the
/// partial sum.
pub fn exterior_profile(
    v: &TrigPotential,
    alpha: f64,
    e: f64,
    k: usize,
    eps_grid: &[f64],
    opts: &LyapunovOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = dual_cocycle(v, alpha, C64::new(e, 0.0), 0.0)?;
    let out: Vec<Result<(f64, f64)>> = eps_grid
        .par_iter()
        .map(|&eps| {
            let s = opts.run(&base.with_eps(eps).map)?;
            Ok((cocycle::exterior_sum(&s, k)?, cocycle::exterior_sum_stderr(&s, k)))
        })
        .collect();
    let pairs: Vec<(f64, f64)> = out.into_iter().collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Default grid extent for the Jensen profile: 1.5 L(E)/2 pi + 0.1.
pub fn default_jensen_extent(l: f64) -> f64 {
    1.5 * l.max(0.0) / TWO_PI + 0.1
}

/// eps -> L^d of the dual cocycle, with a piecewise-affine fit on eps >= 0.
pub fn jensen_profile(
    v: &TrigPotential,
    alpha: f64,
    e: f64,
    eps_grid: &[f64],
    opts: &LyapunovOptions,
) -> Result<JensenProfile> {
    let d = v.degree();
    check_leading(v)?;
    if eps_grid.len() < 5 || eps_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("eps grid must be increasing with at least 5 points".into()));
    }
    let (l_hat_d, stderr) = exterior_profile(v, alpha, e, d, eps_grid, opts)?;
    let predicted_offset = -v.coeff(d as i64).norm().ln();
    // fold onto eps >= 0 by averaging mirrored points where both exist
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &x) in eps_grid.iter().enumerate() {
        if x < 0.0 {
            continue;
        }
        let mirror = eps_grid.iter().position(|&y| (y + x).abs() < 1e-12 * (1.0 + x.abs()));
        let y = match mirror {
            Some(j) => 0.5 * (l_hat_d[i] + l_hat_d[j]),
            None => l_hat_d[i],
        };
        xs.push(x);
        ys.push(y);
    }
    if xs.len() < 4 {
        return Err(Error::InvalidArgument("eps grid needs at least 4 points with eps >= 0".into()));
    }
    let noise = stderr.iter().cloned().fold(0.0, f64::max).max(1e-6);
    let seg = fit::segmented_fit(&xs, &ys, 4, noise);
    let flat_radius = seg.breakpoints.first().copied();
    let post_slope = flat_radius.map(|_| seg.slopes[1]);
    let asymptote_offset = flat_radius.and_then(|t| {
        let x_max = xs[xs.len() - 1];
        let from = t + 0.25 * (x_max - t);
        let tail: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .filter(|(x, _)| **x >= from)
            .map(|(x, y)| y - TWO_PI * x)
            .collect();
        (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
    });
    Ok(JensenProfile {
        energy: e,
        eps_grid: eps_grid.to_vec(),
        l_hat_d,
        stderr,
        flat_value: seg.start_value,
        flat_slope: seg.slopes[0],
        flat_radius,
        post_slope,
        breakpoints: seg.breakpoints.clone(),
        slopes: seg.slopes.clone(),
        asymptote_offset,
        predicted_offset,
        fit_residual: seg.rms_residual(xs.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerFlatness {
    pub k: usize,
    pub eps_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub reference: f64,
    pub max_deviation: f64,
}

/// max over the grid of |L^k_eps - L^k_0| for the dual cocycle.
pub fn jensen_inner_flatness(
    v: &TrigPotential,
    alpha: f64,
    e: f64,
    k: usize,
    eps_grid: &[f64],
    opts: &LyapunovOptions,
) -> Result<InnerFlatness> {
    let d = v.degree();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={d}, got {k}")));
    }
    let mut grid = vec![0.0];
    grid.extend(eps_grid.iter().copied().filter(|&x| x != 0.0));
    let (values, _) = exterior_profile(v, alpha, e, k, &grid, opts)?;
    let reference = values[0];
    let max_deviation = values.iter().map(|x| (x - reference).abs()).fold(0.0, f64::max);
    Ok(InnerFlatness { k, eps_grid: grid, values, reference, max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaroPuig {
    pub energy: f64,
    pub lyapunov: f64,
    pub l_hat_d: f64,
    pub ln_leading: f64,
    pub residual: f64,
}

/// |L(E) - (L^d_0(E) + ln |v_d|)|.
pub fn haro_puig_check(v: &TrigPotential, alpha: f64, e: f64, opts: &LyapunovOptions) -> Result<HaroPuig> {
    let d = v.degree();
    let dc = dual_cocycle(v, alpha, C64::new(e, 0.0), 0.0)?;
    let spec = opts.run(&dc.map)?;
    let l_hat_d = cocycle::exterior_sum(&spec, d)?;
    let pot: Potential = v.clone().into();
    let (l, _) = schrodinger::lyapunov(&pot, alpha, e, opts)?;
    let ln_leading = v.coeff(d as i64).norm().ln();
    Ok(HaroPuig { energy: e, lyapunov: l, l_hat_d, ln_leading, residual: (l - (l_hat_d + ln_leading)).abs() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub k: usize,
    pub dominated: bool,
    /// Smallest per-step growth rate of ln(sigma_k / sigma_{k+1}) over the
    /// sampled phases.
    pub margin: f64,
    pub threshold: f64,
    pub horizon: usize,
    pub theta_samples: usize,
    /// Phase attaining the smallest rate when the check fails.
    pub failing_theta: Option<f64>,
}

pub const DOMINATION_MARGIN: f64 = 0.01;

/// Growth of the k-th singular gap of A_n(theta) uniformly over a phase grid.
/// The gap ln sigma_k - ln sigma_{k+1} is read off the R-diagonal of the
/// re-orthonormalized product, and its least-squares rate in n is compared
/// with the margin.
pub fn domination_check(dc: &DualCocycle, k: usize, horizon: usize, theta_samples: usize) -> Result<DominationReport> {
    let m = dc.dim();
    if k == 0 || k >= m {
        return Err(Error::InvalidArgument(format!("k must lie in 1..{m}, got {k}")));
    }
    if horizon < 16 || theta_samples == 0 {
        return Err(Error::InvalidArgument("domination needs horizon >= 16 and at least one phase".into()));
    }
    let record = (horizon / 64).max(1);
    let rates: Vec<Result<f64>> = (0..theta_samples)
        .into_par_iter()
        .map(|j| {
            let theta = j as f64 / theta_samples as f64;
            let traj = cocycle::qr_trajectory(&dc.map, theta, horizon, record)?;
            let x: Vec<f64> = (1..=traj.len()).map(|t| (t * record) as f64).collect();
            let y: Vec<f64> = traj.iter().map(|s| s[k - 1] - s[k]).collect();
            Ok(fit::linear_fit(&x, &y).slope)
        })
        .collect();
    let rates: Vec<f64> = rates.into_iter().collect::<Result<_>>()?;
    let (worst, margin) = rates
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &r)| if r < bv { (i, r) } else { (bi, bv) });
    let dominated = margin > DOMINATION_MARGIN;
    Ok(DominationReport {
        k,
        dominated,
        margin,
        threshold: DOMINATION_MARGIN,
        horizon,
        theta_samples,
        failing_theta: (!dominated).then(|| worst as f64 / theta_samples as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::golden_mean;

    #[test]
    fn amo_dual_is_rescaled_schrodinger() {
        let v = TrigPotential::amo(2.0);
        let dc = dual_cocycle(&v, golden_mean(), C64::new(0.7, 0.0), 0.0).unwrap();
        let theta = 0.23;
        let a = dc.sample(theta);
        let expect = (0.7 - 2.0 * (TWO_PI * theta).cos()) / 2.0;
        assert!((a[0] - C64::new(expect, 0.0)).norm() < 1e-14);
        assert!((a[1] + C64::new(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(a[2], C64::new(1.0, 0.0));
        assert_eq!(a[3], ZERO);
    }

    #[test]
    fn determinant_has_unit_modulus() {
        let v = TrigPotential::stock_d2_non_even();
        let dc = dual_cocycle(&v, golden_mean(), C64::new(0.4, 0.0), 0.0).unwrap();
        for j in 0..10 {
            let det = linalg::determinant(&dc.sample(j as f64 / 10.0), 4);
            assert!((det.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symplectic_identity_holds() {
        for v in [TrigPotential::amo(2.0), TrigPotential::stock_d2_non_even()] {
            for (theta, eps, e) in [(0.1, 0.0, C64::new(0.3, 0.0)), (0.77, 0.05, C64::new(-1.2, 0.2))] {
                let defect = symplectic_defect(&v, golden_mean(), e, theta, eps).unwrap();
                assert!(defect < 1e-12, "{defect}");
            }
        }
    }

    #[test]
    fn zero_leading_coefficient_rejected() {
        assert!(matches!(
            dual_cocycle(&TrigPotential::zero(), 0.3, C64::new(0.0, 0.0), 0.0),
            Err(Error::DegenerateLeadingCoefficient { .. })
        ));
    }
}
