//! The two-dimensional center of the dual cocycle: extraction from forward and
//! backward products, normalization into a phase times a real SL(2) cocycle,
//! fibered rotation numbers and their relation to the IDS.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{self, CocycleMap};
use crate::dual::{self, DualCocycle};
use crate::error::{Error, Result};
use crate::fit;
use crate::fourier::{self, MatrixSeries};
use crate::linalg::{self, C64, ONE, ZERO};
use crate::potential::{AnalyticPotential, Potential, TrigPotential};
use crate::schrodinger::{self, IdsTable, LyapunovOptions, Regime};

const TWO_PI: f64 = 2.0 * PI;

/// Value of u* S v for the normalized center frame. With the form S as built
/// in `dual`, -1 makes the frame orientation agree with the dual cocycle when
/// d = 1 (see the README notes on orientation).
pub const ORIENTATION: f64 = -1.0;

/// Splitting certificate: the two near-zero principal angles must stay below
/// `SMALL_ANGLE` and the third above `SPLIT_ANGLE`.
pub const SMALL_ANGLE: f64 = 1e-5;
pub const SPLIT_ANGLE: f64 = 1e-4;

pub const DEGENERACY_FLOOR: f64 = 1e-8;

pub const HORIZON_MAX: usize = 10_000;

/// Horizon in units of the inverse spectral gap.
pub const HORIZON_FACTOR: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterOptions {
    pub grid_size: usize,
    /// Steps of the forward and backward products; derived from the spectral
    /// gap when absent.
    pub horizon: Option<usize>,
    pub orientation: f64,
    /// Horizon of the dual spectrum used for the gap.
    pub spectrum_horizon: usize,
    /// Horizon and phase count of the domination checks.
    pub domination_horizon: usize,
    pub domination_samples: usize,
    /// Section pair (indices into `section_candidates`); chosen per frame
    /// when absent.
    #[serde(default)]
    pub sections: Option<(usize, usize)>,
}

impl Default for CenterOptions {
    fn default() -> Self {
        CenterOptions {
            grid_size: 2048,
            horizon: None,
            orientation: ORIENTATION,
            spectrum_horizon: 1 << 16,
            domination_horizon: 1000,
            domination_samples: 32,
            sections: None,
        }
    }
}

/// ceil(HORIZON_FACTOR / gap), capped.
pub fn default_horizon(gap: f64) -> usize {
    if !(gap > 0.0) {
        return HORIZON_MAX;
    }
    ((HORIZON_FACTOR / gap).ceil() as usize).clamp(8, HORIZON_MAX)
}

fn column_block(q: &[C64], m: usize, from: usize, to: usize) -> DMatrix<C64> {
    DMatrix::from_fn(m, to - from, |i, j| q[i * m + from + j])
}

/// Orthonormal frames (row-major m x m) whose trailing columns span the slow
/// subspaces of the forward and backward products at theta.
fn slow_frames(map: &CocycleMap, theta: f64, n: usize) -> Result<(Vec<C64>, Vec<C64>)> {
    let m = map.dim;
    let mut a = vec![ZERO; m * m];
    let mut tmp = vec![ZERO; m * m];
    let mut logs = vec![0.0; m];
    let alpha = map.alpha;
    let mut fwd = linalg::identity(m);
    for j in (0..n).rev() {
        map.sample_into(theta + j as f64 * alpha, &mut a);
        let adj = linalg::adjoint(&a, m);
        linalg::matmul_into(&adj, &fwd, m, &mut tmp);
        std::mem::swap(&mut fwd, &mut tmp);
        if !linalg::qr_columns(&mut fwd, m, m, &mut logs) {
            return Err(Error::SingularSample { theta: format!("{theta}") });
        }
    }
    let mut bwd = linalg::identity(m);
    for j in (1..=n).rev() {
        map.sample_into(theta - j as f64 * alpha, &mut a);
        let inv = linalg::inverse(&a, m).ok_or(Error::SingularSample { theta: format!("{theta}") })?;
        let adj = linalg::adjoint(&inv, m);
        linalg::matmul_into(&adj, &bwd, m, &mut tmp);
        std::mem::swap(&mut bwd, &mut tmp);
        if !linalg::qr_columns(&mut bwd, m, m, &mut logs) {
            return Err(Error::SingularSample { theta: format!("{theta}") });
        }
    }
    Ok((fwd, bwd))
}

#[derive(Debug, Clone)]
pub struct SplittingAt {
    /// Projector onto the center along the stable and unstable directions.
    pub projector: Vec<C64>,
    /// Principal angles between the two (d+1)-dimensional slow subspaces.
    pub angles: Vec<f64>,
}

/// Center projector of the cocycle at theta from products of n steps.
pub fn splitting_at(map: &CocycleMap, theta: f64, n: usize) -> Result<SplittingAt> {
    let m = map.dim;
    let d = m / 2;
    if d == 1 {
        return Ok(SplittingAt { projector: linalg::identity(2), angles: vec![] });
    }
    let (fwd, bwd) = slow_frames(map, theta, n)?;
    let f = column_block(&fwd, m, d - 1, m);
    let g = column_block(&bwd, m, d - 1, m);
    let es = column_block(&fwd, m, d + 1, m);
    let eu = column_block(&bwd, m, d + 1, m);
    // principal vectors of F towards G: eigenvectors of F* G G* F
    let fg = f.adjoint() * &g;
    let eig = (&fg * fg.adjoint()).symmetric_eigen();
    let u = eig.eigenvectors;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let gg = &g * g.adjoint();
    let mut angles = Vec::with_capacity(3);
    for &i in order.iter().take(3) {
        let fi = &f * u.column(i);
        let r = (&fi - &gg * &fi).norm();
        angles.push(r.min(1.0).asin());
    }
    if !(angles[1] < SMALL_ANGLE && angles[2] > SPLIT_ANGLE) {
        return Err(Error::SplittingDegenerate { theta, angles });
    }
    let bc = DMatrix::from_fn(m, 2, |i, j| (&f * u.column(order[j]))[i]);
    let mut t = DMatrix::<C64>::zeros(m, m);
    t.columns_mut(0, 2).copy_from(&bc);
    t.columns_mut(2, d - 1).copy_from(&es);
    t.columns_mut(d + 1, d - 1).copy_from(&eu);
    let tinv = t.clone().try_inverse().ok_or(Error::SplittingDegenerate { theta, angles: angles.clone() })?;
    let p = &bc * tinv.rows(0, 2);
    Ok(SplittingAt { projector: linalg::from_dmatrix(&p), angles })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterSubspaces {
    pub theta_grid: Vec<f64>,
    /// Row-major m x m projectors onto the center.
    pub projectors: Vec<Vec<C64>>,
    pub dim: usize,
    pub horizon: usize,
    pub eps: f64,
    pub max_small_angle: f64,
    pub min_split_angle: f64,
}

/// Per-phase center projectors on a uniform grid.
pub fn center_subspace(dc: &DualCocycle, grid_size: usize, horizon: usize) -> Result<CenterSubspaces> {
    if grid_size < 16 {
        return Err(Error::InvalidArgument("center grid needs at least 16 points".into()));
    }
    let theta_grid: Vec<f64> = (0..grid_size).map(|j| j as f64 / grid_size as f64).collect();
    let results: Vec<Result<SplittingAt>> =
        theta_grid.par_iter().map(|&t| splitting_at(&dc.map, t, horizon)).collect();
    let splits: Vec<SplittingAt> = results.into_iter().collect::<Result<_>>()?;
    let max_small_angle = splits.iter().filter_map(|s| s.angles.get(1).copied()).fold(0.0, f64::max);
    let min_split_angle = splits.iter().filter_map(|s| s.angles.get(2).copied()).fold(f64::INFINITY, f64::min);
    Ok(CenterSubspaces {
        theta_grid,
        projectors: splits.into_iter().map(|s| s.projector).collect(),
        dim: dc.dim(),
        horizon,
        eps: dc.eps,
        max_small_angle,
        min_split_angle,
    })
}

fn matvec(a: &[C64], x: &[C64], m: usize) -> Vec<C64> {
    (0..m).map(|i| (0..m).map(|j| a[i * m + j] * x[j]).sum()).collect()
}

fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Coordinates in order of distance of their site from 0.
fn site_order(d: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(2 * d);
    for k in 0..d {
        order.push(d - 1 - k);
        order.push(d + k);
    }
    order
}

/// Fixed vectors whose projections give the sections of the center: basis
/// vectors and (e_a + i e_b)/sqrt 2. Sites are taken by distance from 0 and
/// the list for degree d is a prefix of the list for d + 1, so a choice made
/// by index means the same sites for every truncation.
pub fn section_candidates(d: usize) -> Vec<Vec<C64>> {
    let m = 2 * d;
    let order = site_order(d);
    let unit = |j: usize| {
        let mut e = vec![ZERO; m];
        e[j] = ONE;
        e
    };
    let s = 1.0 / 2f64.sqrt();
    let mut out = Vec::new();
    for r in 0..d {
        let new = [order[2 * r], order[2 * r + 1]];
        out.extend(new.iter().map(|&j| unit(j)));
        for ib in 2 * r..2 * r + 2 {
            for ia in 0..ib {
                let mut e = vec![ZERO; m];
                e[order[ia]] = C64::new(s, 0.0);
                e[order[ib]] = C64::new(0.0, s);
                out.push(e);
            }
        }
    }
    out
}

/// Candidate index pairs ordered so that the order is also stable under
/// raising the degree.
fn candidate_pairs(count: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for hi in 1..count {
        for lo in 0..hi {
            pairs.push((lo, hi));
            pairs.push((hi, lo));
        }
    }
    pairs
}

/// Hermitian form H = i [x y]* S [x y] as (p, q, r).
fn hermitian_gram(x: &[C64], y: &[C64], s: &[C64], m: usize) -> (f64, C64, f64) {
    let sx = matvec(s, x, m);
    let sy = matvec(s, y, m);
    let i = C64::new(0.0, 1.0);
    let p = (i * dot(x, &sx)).re;
    let q = i * dot(x, &sy);
    let r = (i * dot(y, &sy)).re;
    (p, q, r)
}

/// Conditioning of a pair of sections for the isotropic construction, given
/// the sections and their images under S.
fn section_score(x: &[C64], sx: &[C64], y: &[C64], sy: &[C64]) -> f64 {
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    let (gxx, gxy, gyy) = (dot(x, x).re, dot(x, y), dot(y, y).re);
    let tr = gxx + gyy;
    let det = gxx * gyy - gxy.norm_sqr();
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let (lmax, lmin) = (tr / 2.0 + disc, (tr / 2.0 - disc).max(0.0));
    let independence = (lmin / lmax).sqrt();
    let i = C64::new(0.0, 1.0);
    let p = (i * dot(x, sx)).re;
    let q = i * dot(x, sy);
    let r = (i * dot(y, sy)).re;
    let isotropy = r.abs() / (ny * ny);
    let indefinite = (q.norm_sqr() - p * r).max(0.0).sqrt() / (nx * ny);
    independence.min(isotropy).min(indefinite)
}

/// Candidate pairs accepted without searching further.
pub const SECTION_SCORE_OK: f64 = 0.05;

/// Picks the section vectors: the first pair in canonical order with a good
/// score over the whole grid, otherwise the best pair. A forced pair is only
/// scored.
pub fn choose_sections(
    sub: &CenterSubspaces,
    s: &[C64],
    forced: Option<(usize, usize)>,
) -> Result<(usize, usize, f64)> {
    let m = sub.dim;
    let cands = section_candidates(m / 2);
    if let Some((ix, iy)) = forced {
        if ix.max(iy) >= cands.len() || ix == iy {
            return Err(Error::InvalidArgument(format!("no section pair {:?} in degree {}", (ix, iy), m / 2)));
        }
    }
    let proj: Vec<Vec<(Vec<C64>, Vec<C64>)>> = cands
        .par_iter()
        .map(|w| {
            sub.projectors
                .iter()
                .map(|p| {
                    let x = matvec(p, w, m);
                    let sx = matvec(s, &x, m);
                    (x, sx)
                })
                .collect()
        })
        .collect();
    let score_of = |ix: usize, iy: usize| -> f64 {
        (0..sub.theta_grid.len())
            .into_par_iter()
            .map(|t| {
                let (x, sx) = &proj[ix][t];
                let (y, sy) = &proj[iy][t];
                section_score(x, sx, y, sy)
            })
            .reduce(|| f64::INFINITY, f64::min)
    };
    let mut best = (0, 0, -1.0);
    let pairs = match forced {
        Some(p) => vec![p],
        None => candidate_pairs(cands.len()),
    };
    for (ix, iy) in pairs {
        let score = score_of(ix, iy);
        if score >= SECTION_SCORE_OK {
            return Ok((ix, iy, score));
        }
        if score > best.2 {
            best = (ix, iy, score);
        }
    }
    if best.2 < 1e-6 {
        return Err(Error::CenterDegenerate { theta: 0.0, modulus: best.2.max(0.0) });
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterFrame {
    pub energy: f64,
    pub alpha: f64,
    pub eps: f64,
    pub degree: usize,
    pub theta_grid: Vec<f64>,
    pub u_basis: Vec<Vec<C64>>,
    pub v_basis: Vec<Vec<C64>>,
    /// u* S v of the isotropic pair before rescaling.
    pub c_values: Vec<C64>,
    pub phi: Vec<f64>,
    /// Real parts of C, row-major.
    pub c_matrices: Vec<[f64; 4]>,
    /// max |Im C|
    pub c_imag_max: f64,
    /// max |det C - 1|
    pub det_defect: f64,
    /// max relative residual of A F = F(. + alpha) M
    pub frame_residual: f64,
    /// max |u* S v - orientation| and isotropy defects
    pub normalization_defect: f64,
    /// max |M* Omega(. + alpha) M - Omega|
    pub omega_defect: f64,
    /// min |c| over the grid
    pub min_c: f64,
    /// Winding of det M removed into phi (phi gains winding/2 over a turn).
    pub winding: i64,
    /// Winding of c removed by the gauge e^{2 pi i k theta}.
    pub gauge_winding: i64,
    pub sections: (usize, usize),
    pub section_score: f64,
    pub horizon: usize,
    pub domination_margin: Option<f64>,
    pub min_split_angle: f64,
    /// Decay rate of the Fourier coefficients of C, in units of 2 pi.
    pub strip_estimate: f64,
    pub orientation: f64,
}

fn unwrap_phases(values: &[C64]) -> (Vec<f64>, f64, f64) {
    let mut out = Vec::with_capacity(values.len());
    let mut max_jump: f64 = 0.0;
    let mut prev = values[0].arg();
    out.push(prev);
    for z in &values[1..] {
        let next = prev + linalg::wrap_pi(z.arg() - prev);
        max_jump = max_jump.max((next - prev).abs());
        out.push(next);
        prev = next;
    }
    let closing = prev + linalg::wrap_pi(values[0].arg() - prev);
    max_jump = max_jump.max((closing - prev).abs());
    (out, closing - values[0].arg(), max_jump)
}

fn shift_columns(cols: &[Vec<C64>], alpha: f64) -> Vec<Vec<C64>> {
    // cols[t][i]: component i at grid point t
    let n = cols.len();
    let m = cols[0].len();
    let shifted: Vec<Vec<C64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let s: Vec<C64> = cols.iter().map(|c| c[i]).collect();
            fourier::shift(&s, alpha)
        })
        .collect();
    (0..n).map(|t| (0..m).map(|i| shifted[i][t]).collect()).collect()
}

/// Least-squares M with F1 M = AF for m x 2 frames, and the relative residual.
fn transfer_matrix(f1: &[C64], af: &[C64], m: usize) -> ([C64; 4], f64) {
    let col = |f: &[C64], j: usize| -> Vec<C64> { (0..m).map(|i| f[i * 2 + j]).collect() };
    let (a0, a1) = (col(f1, 0), col(f1, 1));
    let (b0, b1) = (col(af, 0), col(af, 1));
    let g = [dot(&a0, &a0), dot(&a0, &a1), dot(&a1, &a0), dot(&a1, &a1)];
    let det = g[0] * g[3] - g[1] * g[2];
    let ginv = [g[3] / det, -g[1] / det, -g[2] / det, g[0] / det];
    let rhs = [dot(&a0, &b0), dot(&a0, &b1), dot(&a1, &b0), dot(&a1, &b1)];
    let mt = [
        ginv[0] * rhs[0] + ginv[1] * rhs[2],
        ginv[0] * rhs[1] + ginv[1] * rhs[3],
        ginv[2] * rhs[0] + ginv[3] * rhs[2],
        ginv[2] * rhs[1] + ginv[3] * rhs[3],
    ];
    let mut res = 0.0;
    let mut scale = 0.0;
    for i in 0..m {
        for j in 0..2 {
            let fit = f1[i * 2] * mt[j] + f1[i * 2 + 1] * mt[2 + j];
            res += (af[i * 2 + j] - fit).norm_sqr();
            scale += af[i * 2 + j].norm_sqr();
        }
    }
    (mt, (res / scale.max(1e-300)).sqrt())
}

fn frame_of(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).flat_map(|(a, b)| [*a, *b]).collect()
}

fn det2(a: &[C64; 4]) -> C64 {
    a[0] * a[3] - a[1] * a[2]
}

/// Omega = F* S F for an m x 2 frame.
fn omega_of(f: &[C64], s: &[C64], m: usize) -> [C64; 4] {
    let col = |j: usize| -> Vec<C64> { (0..m).map(|i| f[i * 2 + j]).collect() };
    let (u, v) = (col(0), col(1));
    let (su, sv) = (matvec(s, &u, m), matvec(s, &v, m));
    [dot(&u, &su), dot(&u, &sv), dot(&v, &su), dot(&v, &sv)]
}

fn mul2(a: &[C64; 4], b: &[C64; 4]) -> [C64; 4] {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

fn adj2(a: &[C64; 4]) -> [C64; 4] {
    [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()]
}

/// Isotropic pair (u, v) in span(x, y) for the form S.
fn isotropic_pair(x: &[C64], y: &[C64], s: &[C64], m: usize, theta: f64) -> Result<(Vec<C64>, Vec<C64>)> {
    let (p, q, r) = hermitian_gram(x, y, s, m);
    let disc = q.norm_sqr() - p * r;
    let scale = norm(x) * norm(y);
    if r.abs() <= DEGENERACY_FLOOR * norm(y).powi(2) || disc <= (DEGENERACY_FLOOR * scale).powi(2) {
        return Err(Error::CenterDegenerate { theta, modulus: r.abs().min(disc.max(0.0).sqrt()) });
    }
    let t0 = -q.conj() / r;
    let rad = disc.sqrt() / r.abs();
    let t1 = t0 + rad;
    let t2 = t0 + C64::new(0.0, rad);
    let u = x.iter().zip(y).map(|(a, b)| a + t1 * b).collect();
    let v = x.iter().zip(y).map(|(a, b)| a + t2 * b).collect();
    Ok((u, v))
}

/// Normalizes the center into (phi, C) with C real of determinant one.
/// `section_gauge` multiplies the section pair (x, y) by a constant matrix
/// before normalizing (used to test gauge covariance).
pub fn symplectic_normalize(
    sub: &CenterSubspaces,
    dc: &DualCocycle,
    orientation: f64,
    sections: Option<(usize, usize)>,
    section_gauge: Option<[C64; 4]>,
) -> Result<CenterFrame> {
    let m = sub.dim;
    let n = sub.theta_grid.len();
    let s = dc.symplectic_form();
    let (ix, iy, score) = choose_sections(sub, &s, sections)?;
    let cands = section_candidates(m / 2);
    let alpha = dc.map.alpha;
    let pairs: Vec<Result<(Vec<C64>, Vec<C64>, C64)>> = (0..n)
        .into_par_iter()
        .map(|t| {
            let p = &sub.projectors[t];
            let mut x = matvec(p, &cands[ix], m);
            let mut y = matvec(p, &cands[iy], m);
            if let Some(g) = section_gauge {
                let (x0, y0) = (x.clone(), y.clone());
                x = x0.iter().zip(&y0).map(|(a, b)| a * g[0] + b * g[2]).collect();
                y = x0.iter().zip(&y0).map(|(a, b)| a * g[1] + b * g[3]).collect();
            }
            let (u, v) = isotropic_pair(&x, &y, &s, m, sub.theta_grid[t])?;
            let c = dot(&u, &matvec(&s, &v, m));
            Ok((u, v, c))
        })
        .collect();
    let pairs: Vec<(Vec<C64>, Vec<C64>, C64)> = pairs.into_iter().collect::<Result<_>>()?;
    let mut c_values: Vec<C64> = pairs.iter().map(|p| p.2).collect();
    let min_c = c_values.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    if min_c <= DEGENERACY_FLOOR {
        let t = c_values.iter().position(|c| c.norm() == min_c).unwrap_or(0);
        return Err(Error::CenterDegenerate { theta: sub.theta_grid[t], modulus: min_c });
    }
    // remove the winding of c with u -> e^{2 pi i k theta} u
    let (_, total, _) = unwrap_phases(&c_values);
    let gauge_winding = (total / TWO_PI).round() as i64;
    let gauges: Vec<C64> =
        sub.theta_grid.iter().map(|&t| C64::from_polar(1.0, TWO_PI * gauge_winding as f64 * t)).collect();
    for (c, g) in c_values.iter_mut().zip(&gauges) {
        *c *= g.conj();
    }
    let (args, _, jump) = unwrap_phases(&c_values);
    if jump > PI / 2.0 {
        let t = jump_location(&args, jump);
        return Err(Error::BranchDiscontinuity { theta: sub.theta_grid[t], jump: jump / TWO_PI });
    }
    let mut u_basis = Vec::with_capacity(n);
    let mut v_basis = Vec::with_capacity(n);
    for t in 0..n {
        let root = C64::from_polar(c_values[t].norm().sqrt(), args[t] / 2.0);
        let gu = gauges[t] / root.conj();
        let gv = C64::new(orientation, 0.0) / root;
        u_basis.push(pairs[t].0.iter().map(|z| z * gu).collect::<Vec<C64>>());
        v_basis.push(pairs[t].1.iter().map(|z| z * gv).collect::<Vec<C64>>());
    }
    let frames: Vec<Vec<C64>> = (0..n).map(|t| frame_of(&u_basis[t], &v_basis[t])).collect();
    let shifted = shift_columns(&frames, alpha);
    let target = [ZERO, C64::new(orientation, 0.0), C64::new(-orientation, 0.0), ZERO];
    let per_point: Vec<([C64; 4], f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let a = dc.sample(sub.theta_grid[t]);
            let mut af = vec![ZERO; m * 2];
            linalg::matmul_rect_into(&a, &frames[t], m, 2, &mut af);
            let (mt, res) = transfer_matrix(&shifted[t], &af, m);
            let om = omega_of(&frames[t], &s, m);
            let om1 = omega_of(&shifted[t], &s, m);
            let norm_defect = om.iter().zip(&target).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let lhs = mul2(&adj2(&mt), &mul2(&om1, &mt));
            let omega_defect = lhs.iter().zip(&om).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            (mt, res, norm_defect, omega_defect)
        })
        .collect();
    let dets: Vec<C64> = per_point.iter().map(|p| det2(&p.0)).collect();
    let (det_args, det_total, det_jump) = unwrap_phases(&dets);
    if det_jump > PI {
        let t = jump_location(&det_args, det_jump);
        return Err(Error::BranchDiscontinuity { theta: sub.theta_grid[t], jump: det_jump / (2.0 * TWO_PI) });
    }
    let winding = (det_total / TWO_PI).round() as i64;
    if winding % 2 != 0 {
        return Err(Error::BranchDiscontinuity { theta: 1.0, jump: 0.5 });
    }
    let mut phi = Vec::with_capacity(n);
    let mut c_matrices = Vec::with_capacity(n);
    let (mut c_imag_max, mut det_defect): (f64, f64) = (0.0, 0.0);
    for t in 0..n {
        let root = C64::from_polar(dets[t].norm().sqrt(), det_args[t] / 2.0);
        phi.push(det_args[t] / (2.0 * TWO_PI));
        let c: Vec<C64> = per_point[t].0.iter().map(|z| z / root).collect();
        let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
        c_imag_max = c_imag_max.max(c.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / scale);
        det_defect = det_defect.max((c[0] * c[3] - c[1] * c[2] - ONE).norm());
        c_matrices.push([c[0].re, c[1].re, c[2].re, c[3].re]);
    }
    let frame_residual = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    let normalization_defect = per_point.iter().map(|p| p.2).fold(0.0, f64::max);
    let omega_defect = per_point.iter().map(|p| p.3).fold(0.0, f64::max);
    let strip_estimate = strip_of(&c_matrices);
    Ok(CenterFrame {
        energy: dc.energy.re,
        alpha,
        eps: dc.eps,
        degree: m / 2,
        theta_grid: sub.theta_grid.clone(),
        u_basis,
        v_basis,
        c_values: pairs.iter().map(|p| p.2).collect(),
        phi,
        c_matrices,
        c_imag_max,
        det_defect,
        frame_residual,
        normalization_defect,
        omega_defect,
        min_c,
        winding,
        gauge_winding,
        sections: (ix, iy),
        section_score: score,
        horizon: sub.horizon,
        domination_margin: None,
        min_split_angle: sub.min_split_angle,
        strip_estimate,
        orientation,
    })
}

fn jump_location(args: &[f64], jump: f64) -> usize {
    args.windows(2).position(|w| (w[1] - w[0]).abs() >= jump * 0.999).map(|i| i + 1).unwrap_or(0)
}

/// Exponential decay rate of the Fourier coefficients of C over the modes
/// above 1e-13, divided by 2 pi.
fn strip_of(c: &[[f64; 4]]) -> f64 {
    let n = c.len();
    let mut envelope = vec![0.0f64; n / 2];
    for e in 0..4 {
        let s: Vec<C64> = c.iter().map(|m| C64::new(m[e], 0.0)).collect();
        let co = fourier::coefficients(&s);
        for (j, z) in co.iter().enumerate() {
            let k = fourier::mode(j, n).unsigned_abs() as usize;
            if k < n / 2 {
                envelope[k] = envelope[k].max(z.norm());
            }
        }
    }
    let top = envelope.iter().cloned().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = envelope
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, a)| **a > 1e-13 * top.max(1e-300))
        .map(|(k, a)| (k as f64, a.ln()))
        .unzip();
    if xs.len() < 3 {
        return f64::INFINITY;
    }
    (-fit::linear_fit(&xs, &ys).slope / TWO_PI).max(0.0)
}

impl CenterFrame {
    /// C as a cocycle, interpolated from the grid.
    pub fn c_cocycle(&self) -> CocycleMap {
        let vals: Vec<Vec<C64>> = self.c_matrices.iter().map(|c| c.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        let series = MatrixSeries::from_grid(&vals, 2, 2, 1e-15);
        CocycleMap::new(self.alpha, 2, f64::INFINITY, move |z, out| {
            series.evaluate_into(z.re, out);
            for x in out.iter_mut() {
                x.im = 0.0;
            }
        })
    }

    pub fn mean_phi(&self) -> f64 {
        self.phi.iter().sum::<f64>() / self.phi.len() as f64
    }

    /// max over theta of the distance from e^{2 pi i phi} to {1, -1}.
    pub fn reality_of_phase(&self) -> f64 {
        self.phi
            .iter()
            .map(|p| {
                let z = C64::from_polar(1.0, TWO_PI * p);
                (z - ONE).norm().min((z + ONE).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Frame matrix (u, v) at grid point t, row-major m x 2.
    pub fn frame(&self, t: usize) -> Vec<C64> {
        frame_of(&self.u_basis[t], &self.v_basis[t])
    }
}

/// Dual spectrum gap around the center exponents.
pub fn center_gap(dc: &DualCocycle, horizon: usize) -> Result<(f64, Vec<f64>)> {
    let d = dc.degree();
    let spec = cocycle::lyapunov_spectrum(&dc.map, horizon, 8)?;
    let e = &spec.exponents;
    if d == 1 {
        return Ok((f64::INFINITY, e.clone()));
    }
    Ok(((e[d - 2] - e[d - 1]).min(e[d] - e[d + 1]), e.clone()))
}

/// Center frame of the dual cocycle of v at energy E (real phase, eps = 0 or
/// a complex shift).
pub fn center_frame(v: &TrigPotential, alpha: f64, e: f64, eps: f64, opts: &CenterOptions) -> Result<CenterFrame> {
    let dc = dual::dual_cocycle(v, alpha, C64::new(e, 0.0), eps)?;
    center_frame_of(&dc, opts, None)
}

pub fn center_frame_of(dc: &DualCocycle, opts: &CenterOptions, section_gauge: Option<[C64; 4]>) -> Result<CenterFrame> {
    let d = dc.degree();
    let mut margin = None;
    let horizon = if d >= 2 {
        let lo = dual::domination_check(dc, d - 1, opts.domination_horizon, opts.domination_samples)?;
        let hi = dual::domination_check(dc, d + 1, opts.domination_horizon, opts.domination_samples)?;
        margin = Some(lo.margin.min(hi.margin));
        if !(lo.dominated && hi.dominated) {
            let bad = if lo.dominated { hi } else { lo };
            return Err(Error::SplittingDegenerate {
                theta: bad.failing_theta.unwrap_or(0.0),
                angles: vec![bad.margin],
            });
        }
        match opts.horizon {
            Some(h) => h,
            None => default_horizon(center_gap(dc, opts.spectrum_horizon)?.0),
        }
    } else {
        0
    };
    let sub = center_subspace(dc, opts.grid_size, horizon)?;
    let mut frame = symplectic_normalize(&sub, dc, opts.orientation, opts.sections, section_gauge)?;
    frame.domination_margin = margin;
    Ok(frame)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationIdsRecord {
    pub energy: f64,
    pub rho_hat: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub mean_phi: f64,
    pub n: Option<f64>,
    pub lyapunov: Option<f64>,
    pub omega: Option<i64>,
    /// Degree of C when it is not homotopic to the identity; rho_hat is then
    /// the rotation number of R_{-2 pi w theta} C.
    pub winding_correction: Option<i64>,
}

pub const CENTER_ROTATION_HORIZON: usize = 1 << 18;

fn rotation_matrix(angle: f64) -> [f64; 4] {
    let (s, c) = angle.sin_cos();
    [c, -s, s, c]
}

/// Fibered rotation numbers of the center.
pub fn center_rotation(frame: &CenterFrame) -> Result<RotationIdsRecord> {
    let map = frame.c_cocycle();
    let (rho_hat, correction) = match cocycle::rotation_number(&map, CENTER_ROTATION_HORIZON) {
        Ok(r) => (r.rho, None),
        Err(Error::NotHomotopicToIdentity { winding }) => {
            let inner = map.clone();
            let corrected = CocycleMap::new(frame.alpha, 2, f64::INFINITY, move |z, out| {
                let mut c = [ZERO; 4];
                inner.sample_into(z.re, &mut c);
                let r = rotation_matrix(-TWO_PI * winding as f64 * z.re);
                out[0] = c[0] * r[0] + c[2] * r[1];
                out[1] = c[1] * r[0] + c[3] * r[1];
                out[2] = c[0] * r[2] + c[2] * r[3];
                out[3] = c[1] * r[2] + c[3] * r[3];
            });
            (cocycle::rotation_number(&corrected, CENTER_ROTATION_HORIZON)?.rho, Some(winding))
        }
        Err(e) => return Err(e),
    };
    let mean_phi = frame.mean_phi();
    Ok(RotationIdsRecord {
        energy: frame.energy,
        rho_hat,
        rho1: (mean_phi + rho_hat).rem_euclid(1.0),
        rho2: (mean_phi - rho_hat).rem_euclid(1.0),
        mean_phi,
        n: None,
        lyapunov: None,
        omega: None,
        winding_correction: correction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub eps: Vec<f64>,
    /// L_1(C_eps) = L_1(M_eps) - (1/2) int ln |det M_eps|
    pub l1_c: Vec<f64>,
    /// (L_d - L_{d+1}) / 2 of the complexified dual cocycle
    pub spectral: Vec<f64>,
    pub max_deviation: f64,
    pub max_cross_check: f64,
}

/// Top exponent of the center restriction minus half its mean log-determinant,
/// from analytic sections of the center at the cocycle's own shift.
pub fn center_exponent(dc: &DualCocycle, grid_size: usize, horizon: usize, lyap: &LyapunovOptions) -> Result<f64> {
    let m = dc.dim();
    let sub = center_subspace(dc, grid_size, horizon)?;
    let cands: Vec<Vec<C64>> = (0..m).map(|j| (0..m).map(|i| if i == j { ONE } else { ZERO }).collect()).collect();
    // best-conditioned pair of basis vectors
    let mut best = (0, 1, -1.0);
    for ix in 0..m {
        for iy in ix + 1..m {
            let score = sub
                .projectors
                .iter()
                .map(|p| {
                    let x = matvec(p, &cands[ix], m);
                    let y = matvec(p, &cands[iy], m);
                    let (gxx, gxy, gyy) = (dot(&x, &x).re, dot(&x, &y), dot(&y, &y).re);
                    (gxx * gyy - gxy.norm_sqr()) / (gxx * gyy).max(1e-300)
                })
                .fold(f64::INFINITY, f64::min);
            if score > best.2 {
                best = (ix, iy, score);
            }
        }
    }
    let frames: Vec<Vec<C64>> = sub
        .projectors
        .iter()
        .map(|p| frame_of(&matvec(p, &cands[best.0], m), &matvec(p, &cands[best.1], m)))
        .collect();
    let shifted = shift_columns(&frames, dc.map.alpha);
    let ms: Vec<Vec<C64>> = (0..frames.len())
        .into_par_iter()
        .map(|t| {
            let a = dc.sample(sub.theta_grid[t]);
            let mut af = vec![ZERO; m * 2];
            linalg::matmul_rect_into(&a, &frames[t], m, 2, &mut af);
            transfer_matrix(&shifted[t], &af, m).0.to_vec()
        })
        .collect();
    let mean_log_det = ms.iter().map(|mt| (mt[0] * mt[3] - mt[1] * mt[2]).norm().ln()).sum::<f64>() / ms.len() as f64;
    let series = MatrixSeries::from_grid(&ms, 2, 2, 1e-15);
    let map = CocycleMap::new(dc.map.alpha, 2, f64::INFINITY, move |z, out| series.evaluate_into(z.re, out));
    let spec = lyap.run(&map)?;
    Ok(spec.exponents[0] - 0.5 * mean_log_det)
}

/// |L_1(C_eps) - L_1(C_0)| over the list, with the frame re-extracted at each
/// shift.
pub fn center_invariance_check(
    v: &TrigPotential,
    alpha: f64,
    e: f64,
    eps_list: &[f64],
    opts: &CenterOptions,
    lyap: &LyapunovOptions,
) -> Result<InvarianceReport> {
    let base = dual::dual_cocycle(v, alpha, C64::new(e, 0.0), 0.0)?;
    let d = base.degree();
    let horizon = match (d, opts.horizon) {
        (1, _) => 0,
        (_, Some(h)) => h,
        _ => default_horizon(center_gap(&base, opts.spectrum_horizon)?.0),
    };
    let mut eps = vec![0.0];
    eps.extend(eps_list.iter().copied().filter(|&x| x != 0.0));
    let mut l1_c = Vec::with_capacity(eps.len());
    let mut spectral = Vec::with_capacity(eps.len());
    for &x in &eps {
        let dc = base.with_eps(x);
        l1_c.push(center_exponent(&dc, opts.grid_size, horizon, lyap)?);
        let spec = lyap.run(&dc.map)?;
        spectral.push(0.5 * (spec.exponents[d - 1] - spec.exponents[d]));
    }
    let max_deviation = l1_c.iter().map(|l| (l - l1_c[0]).abs()).fold(0.0, f64::max);
    let max_cross_check = l1_c.iter().zip(&spectral).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(InvarianceReport { eps, l1_c, spectral, max_deviation, max_cross_check })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualitySweep {
    pub records: Vec<RotationIdsRecord>,
    /// (rho2 - rho1) - N mod 1 per energy
    pub s_values: Vec<f64>,
    /// circular mean of s
    pub k: f64,
    /// circular standard deviation of s
    pub residual: f64,
    /// largest step increase of rho1 and largest step decrease of rho2
    pub rho1_max_increase: f64,
    pub rho2_max_decrease: f64,
}

/// Circular mean and standard deviation of values in turns.
pub fn circular_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let z: C64 = values.iter().map(|&s| C64::from_polar(1.0, TWO_PI * s)).sum::<C64>() / n;
    let r = z.norm().min(1.0);
    let mean = (z.arg() / TWO_PI).rem_euclid(1.0);
    let std = if r >= 1.0 { 0.0 } else { (-2.0 * r.ln()).sqrt() / TWO_PI };
    (mean, std)
}

/// Checks that every energy is supercritical with T-acceleration one.
pub fn require_type_one(v: &Potential, alpha: f64, e: f64, lyap: &LyapunovOptions) -> Result<schrodinger::RegimeLabel> {
    let label = schrodinger::classify(v, alpha, e, lyap)?;
    if label.regime != Regime::Supercritical || !label.type_one {
        return Err(Error::WindowViolation {
            energy: e,
            reason: format!("regime {:?}, T-acceleration {}", label.regime, label.t_omega),
        });
    }
    Ok(label)
}

/// s(E) = (rho2 - rho1) - N(E) mod 1 over an energy grid, with the
/// monotonicity of rho1 and rho2 along the grid.
pub fn duality_ids_sweep(
    v: &TrigPotential,
    alpha: f64,
    energies: &[f64],
    table: &IdsTable,
    opts: &CenterOptions,
    lyap: &LyapunovOptions,
) -> Result<DualitySweep> {
    if energies.is_empty() {
        return Err(Error::InvalidArgument("empty energy grid".into()));
    }
    let pot: Potential = v.clone().into();
    let mut sorted = energies.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut records = Vec::with_capacity(sorted.len());
    for &e in &sorted {
        let label = require_type_one(&pot, alpha, e, lyap)?;
        let frame = center_frame(v, alpha, e, 0.0, opts)?;
        let mut rec = center_rotation(&frame)?;
        rec.n = Some(table.at(e).n);
        rec.lyapunov = Some(label.lyapunov);
        rec.omega = Some(label.omega);
        records.push(rec);
    }
    let s_values: Vec<f64> =
        records.iter().map(|r| (r.rho2 - r.rho1 - r.n.expect("set")).rem_euclid(1.0)).collect();
    let (k, residual) = circular_stats(&s_values);
    let mut rho1_max_increase = f64::NEG_INFINITY;
    let mut rho2_max_decrease = f64::NEG_INFINITY;
    for w in records.windows(2) {
        rho1_max_increase = rho1_max_increase.max(linalg::wrap_half(w[1].rho1 - w[0].rho1));
        rho2_max_decrease = rho2_max_decrease.max(-linalg::wrap_half(w[1].rho2 - w[0].rho2));
    }
    if records.len() < 2 {
        rho1_max_increase = 0.0;
        rho2_max_decrease = 0.0;
    }
    Ok(DualitySweep { records, s_values, k, residual, rho1_max_increase, rho2_max_decrease })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationStudy {
    pub energy: f64,
    pub degrees: Vec<usize>,
    /// d_n for consecutive accepted degrees (n, n')
    pub distances: Vec<(usize, usize, f64)>,
    pub slope: f64,
    pub r2: f64,
    pub skipped: Vec<(usize, String)>,
}

/// Distance between frames built from the same canonical sections: phi with
/// its mean removed (modulo 1/2) and the entries of C up to the overall sign
/// tied to the branch of phi.
pub fn frame_distance(a: &CenterFrame, b: &CenterFrame) -> Result<f64> {
    if a.theta_grid.len() != b.theta_grid.len() {
        return Err(Error::FrameAlignmentFailure { n: b.degree, reason: "grid sizes differ".into() });
    }
    if a.sections != b.sections {
        return Err(Error::FrameAlignmentFailure {
            n: b.degree,
            reason: format!("sections {:?} and {:?} differ", a.sections, b.sections),
        });
    }
    let (ma, mb) = (a.mean_phi(), b.mean_phi());
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let mut dist: f64 = 0.0;
        for t in 0..a.phi.len() {
            let x = (a.phi[t] - ma) - (b.phi[t] - mb);
            dist = dist.max((x - (2.0 * x).round() / 2.0).abs());
            for k in 0..4 {
                dist = dist.max((a.c_matrices[t][k] - sign * b.c_matrices[t][k]).abs());
            }
        }
        best = best.min(dist);
    }
    Ok(best)
}

/// Frames of the truncations v_n over `degrees`, distances between
/// consecutive ones and the slope of ln d_n against n.
pub fn truncation_convergence(
    a: &AnalyticPotential,
    alpha: f64,
    e: f64,
    degrees: &[usize],
    opts: &CenterOptions,
    lyap: &LyapunovOptions,
) -> Result<TruncationStudy> {
    let mut frames: Vec<(usize, CenterFrame)> = Vec::new();
    let mut skipped = Vec::new();
    let mut opts = *opts;
    for &n in degrees {
        let vn = a.truncate(n)?;
        let pot: Potential = vn.clone().into();
        if let Err(err) = require_type_one(&pot, alpha, e, lyap) {
            skipped.push((n, err.to_string()));
            continue;
        }
        match center_frame(&vn, alpha, e, 0.0, &opts) {
            Ok(f) => {
                // the first accepted frame fixes the sections for the rest
                opts.sections.get_or_insert(f.sections);
                frames.push((n, f));
            }
            Err(err) => skipped.push((n, err.to_string())),
        }
    }
    let mut distances = Vec::new();
    for w in frames.windows(2) {
        distances.push((w[0].0, w[1].0, frame_distance(&w[0].1, &w[1].1)?));
    }
    let pts: Vec<(f64, f64)> =
        distances.iter().filter(|d| d.2 > 0.0).map(|&(n, _, dist)| (n as f64, dist.ln())).collect();
    let (slope, r2) = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let f = fit::linear_fit(&x, &y);
        (f.slope, f.r2)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(TruncationStudy { energy: e, degrees: frames.iter().map(|f| f.0).collect(), distances, slope, r2, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_start_at_site_zero() {
        let c = section_candidates(2);
        assert_eq!(c[0][1], ONE);
        assert_eq!(c[1][2], ONE);
        assert_eq!(c.len(), 4 + 6);
    }

    #[test]
    fn isotropic_pair_is_isotropic() {
        let v = TrigPotential::amo(2.0);
        let s = dual::symplectic_form(&v);
        let x = vec![ONE, ZERO];
        let y = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let (u, w) = isotropic_pair(&x, &y, &s, 2, 0.0).unwrap();
        assert!(dot(&u, &matvec(&s, &u, 2)).norm() < 1e-14);
        assert!(dot(&w, &matvec(&s, &w, 2)).norm() < 1e-14);
        assert!(dot(&u, &matvec(&s, &w, 2)).norm() > 1e-3);
    }

    #[test]
    fn circular_stats_of_constant() {
        let (m, s) = circular_stats(&[0.999_999, 0.000_001]);
        assert!(m.min(1.0 - m) < 1e-9 && s < 1e-5);
    }
}
