//! Least-squares helpers: straight lines and continuous piecewise-affine
//! (hinge) models with the number of pieces chosen by BIC.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    LineFit { slope, intercept, r2 }
}

/// Continuous piecewise-affine fit y ~ b0 + s_0 x + sum_j (s_j - s_{j-1}) (x - t_j)_+.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit {
    pub breakpoints: Vec<f64>,
    /// One slope per piece, left to right.
    pub slopes: Vec<f64>,
    /// Value of the fit at the left end of the data.
    pub start_value: f64,
    pub x0: f64,
    pub rss: f64,
    pub bic: f64,
}

impl SegmentedFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        let mut y = self.start_value + self.slopes[0] * (x - self.x0);
        for (j, &t) in self.breakpoints.iter().enumerate() {
            if x > t {
                y += (self.slopes[j + 1] - self.slopes[j]) * (x - t);
            }
        }
        y
    }

    pub fn rms_residual(&self, n: usize) -> f64 {
        (self.rss / n as f64).sqrt()
    }
}

fn hinge_lsq(x: &[f64], y: &[f64], knots: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = x.len();
    let p = 2 + knots.len();
    let x0 = x[0];
    let a = DMatrix::from_fn(n, p, |i, j| match j {
        0 => 1.0,
        1 => x[i] - x0,
        _ => (x[i] - knots[j - 2]).max(0.0),
    });
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).ok()?;
    let r = &a * &coef - &b;
    Some((coef.iter().copied().collect(), r.norm_squared()))
}

fn assemble(x: &[f64], knots: &[f64], coef: &[f64], rss: f64, noise: f64) -> SegmentedFit {
    let n = x.len() as f64;
    let mut slopes = vec![coef[1]];
    for j in 0..knots.len() {
        let last = *slopes.last().expect("non-empty");
        slopes.push(last + coef[2 + j]);
    }
    let k = 2.0 + 2.0 * knots.len() as f64;
    let bic = n * ((rss + n * noise * noise) / n).ln() + k * n.ln();
    SegmentedFit { breakpoints: knots.to_vec(), slopes, start_value: coef[0], x0: x[0], rss, bic }
}

/// Every piece must contain at least two data points.
fn admissible(x: &[f64], knots: &[f64]) -> bool {
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend_from_slice(knots);
    edges.push(f64::INFINITY);
    edges.windows(2).all(|w| {
        w[0] < w[1] && x.iter().filter(|&&v| v > w[0] && v <= w[1]).count() >= 2
    }) && x.iter().filter(|&&v| v <= knots.first().copied().unwrap_or(f64::INFINITY)).count() >= 2
}

fn best_with(x: &[f64], y: &[f64], count: usize) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    if count == 0 {
        let (c, r) = hinge_lsq(x, y, &[])?;
        return Some((vec![], c, r));
    }
    // candidate knots: data points and midpoints, strictly inside
    let mut cand = Vec::new();
    for w in x.windows(2) {
        cand.push(0.5 * (w[0] + w[1]));
        cand.push(w[1]);
    }
    cand.pop();
    cand.retain(|&t| t > x[0] && t < x[x.len() - 1]);
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut idx: Vec<usize> = (0..count).collect();
    if cand.len() < count {
        return None;
    }
    loop {
        let knots: Vec<f64> = idx.iter().map(|&i| cand[i]).collect();
        if admissible(x, &knots) {
            if let Some((c, r)) = hinge_lsq(x, y, &knots) {
                if best.as_ref().is_none_or(|b| r < b.2) {
                    best = Some((knots, c, r));
                }
            }
        }
        // next combination
        let mut i = count;
        loop {
            if i == 0 {
                return best.map(|b| refine(x, y, b));
            }
            i -= 1;
            if idx[i] < cand.len() - count + i {
                idx[i] += 1;
                for j in i + 1..count {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Golden-section polish of each knot between its neighbours.
fn refine(x: &[f64], y: &[f64], start: (Vec<f64>, Vec<f64>, f64)) -> (Vec<f64>, Vec<f64>, f64) {
    let (mut knots, mut coef, mut rss) = start;
    let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    for _sweep in 0..3 {
        for j in 0..knots.len() {
            let lo = (knots[j] - h).max(if j > 0 { knots[j - 1] } else { x[0] });
            let hi = (knots[j] + h).min(if j + 1 < knots.len() { knots[j + 1] } else { x[x.len() - 1] });
            let eval = |t: f64, knots: &Vec<f64>| -> f64 {
                let mut k = knots.clone();
                k[j] = t;
                if !admissible(x, &k) {
                    return f64::INFINITY;
                }
                hinge_lsq(x, y, &k).map(|r| r.1).unwrap_or(f64::INFINITY)
            };
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (lo, hi);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (eval(c, &knots), eval(d, &knots));
            for _ in 0..60 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = eval(c, &knots);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = eval(d, &knots);
                }
            }
            let t = 0.5 * (a + b);
            let mut trial = knots.clone();
            trial[j] = t;
            if admissible(x, &trial) {
                if let Some((c2, r2)) = hinge_lsq(x, y, &trial) {
                    if r2 < rss {
                        knots = trial;
                        coef = c2;
                        rss = r2;
                    }
                }
            }
        }
    }
    (knots, coef, rss)
}

/// Fits 1..=max_pieces pieces and keeps the one with the lowest BIC. `noise`
/// is the expected per-point standard deviation; it floors the residual so
/// that noise-free data is not over-split.
pub fn segmented_fit(x: &[f64], y: &[f64], max_pieces: usize, noise: f64) -> SegmentedFit {
    assert!(x.len() >= 2 && x.len() == y.len());
    let mut best: Option<SegmentedFit> = None;
    for pieces in 1..=max_pieces.max(1) {
        if x.len() < 2 * pieces {
            break;
        }
        if let Some((knots, coef, rss)) = best_with(x, y, pieces - 1) {
            let fit = assemble(x, &knots, &coef, rss, noise);
            if best.as_ref().is_none_or(|b| fit.bic < b.bic) {
                best = Some(fit);
            }
        }
    }
    best.expect("a single line always fits")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_single_kink() {
        let x: Vec<f64> = (0..25).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&t| 0.4f64.max(-0.3 + 6.0 * t)).collect();
        let f = segmented_fit(&x, &y, 4, 1e-6);
        assert_eq!(f.breakpoints.len(), 1);
        assert!((f.breakpoints[0] - 0.7 / 6.0).abs() < 1e-6);
        assert!(f.slopes[0].abs() < 1e-6 && (f.slopes[1] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn straight_line_is_one_piece() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, &t)| 1.0 + 2.0 * t + 1e-7 * ((i % 3) as f64 - 1.0)).collect();
        let f = segmented_fit(&x, &y, 4, 1e-6);
        assert!(f.breakpoints.is_empty());
    }
}
