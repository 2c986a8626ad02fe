//! Real-analytic potentials on the torus: trigonometric polynomials given by
//! their Fourier coefficients, and analytic potentials given by a coefficient
//! rule with a declared exponential decay rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Relative tolerance for the reality condition v_{-k} = conj(v_k).
const REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPotential {
    degree: usize,
    /// v_{-d}, ..., v_d
    coeffs: Vec<Complex64>,
}

impl TrigPotential {
    /// Builds a potential from (k, v_k) pairs. Missing conjugate partners are
    /// filled in; conflicting ones are rejected. Trailing zero modes are
    /// dropped, so the degree is the largest k with v_k != 0.
    pub fn from_modes(modes: &[(i64, Complex64)]) -> Result<Self> {
        let max_k = modes.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * max_k + 1];
        let mut set = vec![false; 2 * max_k + 1];
        let scale = modes.iter().map(|(_, c)| c.norm()).fold(1e-300, f64::max);
        for &(k, c) in modes {
            let idx = (k + max_k as i64) as usize;
            let partner = (-k + max_k as i64) as usize;
            if set[idx] && (coeffs[idx] - c).norm() > REALITY_TOL * scale {
                return Err(Error::InvalidArgument(format!("mode {k} given twice")));
            }
            if set[partner] && (coeffs[partner] - c.conj()).norm() > REALITY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "reality condition violated at k = {k}: v_-k must equal conj(v_k)"
                )));
            }
            coeffs[idx] = c;
            coeffs[partner] = c.conj();
            set[idx] = true;
            set[partner] = true;
        }
        if coeffs[max_k].im.abs() > REALITY_TOL * scale {
            return Err(Error::InvalidArgument("v_0 must be real".into()));
        }
        coeffs[max_k].im = 0.0;
        Self::from_symmetric(coeffs)
    }

    /// `coeffs` lists v_{-d}..v_d and must satisfy the reality condition.
    pub fn from_symmetric(mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::InvalidArgument("need an odd number of coefficients".into()));
        }
        let mut d = coeffs.len() / 2;
        let scale = coeffs.iter().map(|c| c.norm()).fold(1e-300, f64::max);
        for k in 0..=d {
            let (a, b) = (coeffs[d + k], coeffs[d - k]);
            if (a - b.conj()).norm() > REALITY_TOL * scale {
                return Err(Error::InvalidArgument(format!(
                    "reality condition violated at k = {k}"
                )));
            }
        }
        while d > 0 && coeffs[0].norm() == 0.0 && coeffs[coeffs.len() - 1].norm() == 0.0 {
            coeffs.remove(0);
            coeffs.pop();
            d -= 1;
        }
        Ok(TrigPotential { degree: d, coeffs })
    }

    pub fn constant(c: f64) -> Self {
        TrigPotential { degree: 0, coeffs: vec![Complex64::new(c, 0.0)] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// 2 lambda cos(2 pi theta).
    pub fn amo(lambda: f64) -> Self {
        let l = Complex64::new(lambda, 0.0);
        Self::from_modes(&[(1, l)]).expect("valid")
    }

    /// 2 lambda cos(2 pi theta) + delta f(theta).
    pub fn perturbed_amo(lambda: f64, delta: f64, f: &TrigPotential) -> Self {
        Self::amo(lambda).add(&f.scaled(delta))
    }

    /// a cos(2 pi k theta) + b sin(2 pi k theta) for k >= 1.
    pub fn cos_sin(k: i64, a: f64, b: f64) -> Self {
        // a cos + b sin = (a - ib)/2 e^{2 pi i k} + (a + ib)/2 e^{-2 pi i k}
        Self::from_modes(&[(k, Complex64::new(a / 2.0, -b / 2.0))]).expect("valid")
    }

    /// 2cos(2 pi theta) + 0.3 sin(4 pi theta).
    pub fn non_even_example() -> Self {
        Self::amo(1.0).add(&Self::cos_sin(2, 0.0, 0.3))
    }

    /// 2cos(2 pi theta) + 0.6 cos(4 pi theta).
    pub fn stock_d2_even() -> Self {
        Self::amo(1.0).add(&Self::cos_sin(2, 0.6, 0.0))
    }

    /// 2cos(2 pi theta) + 0.3 sin(4 pi theta) + 0.6 cos(4 pi theta).
    pub fn stock_d2_non_even() -> Self {
        Self::amo(1.0).add(&Self::cos_sin(2, 0.6, 0.3))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// v_k, zero for |k| > d.
    pub fn coeff(&self, k: i64) -> Complex64 {
        let d = self.degree as i64;
        if k.abs() > d {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + d) as usize]
        }
    }

    /// v_{-d}, ..., v_d.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn modes(&self) -> Vec<(i64, Complex64)> {
        let d = self.degree as i64;
        (-d..=d).map(|k| (k, self.coeff(k))).collect()
    }

    pub fn add(&self, other: &TrigPotential) -> TrigPotential {
        let d = self.degree.max(other.degree) as i64;
        let coeffs = (-d..=d).map(|k| self.coeff(k) + other.coeff(k)).collect();
        TrigPotential::from_symmetric(coeffs).expect("sum of real potentials is real")
    }

    pub fn scaled(&self, s: f64) -> TrigPotential {
        TrigPotential {
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// theta -> v(theta + t).
    pub fn shifted(&self, t: f64) -> TrigPotential {
        let d = self.degree as i64;
        let coeffs = (-d..=d)
            .map(|k| self.coeff(k) * Complex64::from_polar(1.0, TWO_PI * k as f64 * t))
            .collect();
        TrigPotential { degree: self.degree, coeffs }
    }

    /// Even potentials have real coefficients.
    pub fn is_even(&self) -> bool {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(1e-300, f64::max);
        self.coeffs.iter().all(|c| c.im.abs() <= REALITY_TOL * scale)
    }

    /// sum_k v_k e^{2 pi i k z}.
    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        let d = self.degree;
        let w = (Complex64::new(0.0, TWO_PI) * z).exp();
        let w_inv = w.inv();
        let mut acc = self.coeffs[d];
        let (mut wp, mut wm) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for k in 1..=d {
            wp *= w;
            wm *= w_inv;
            acc += self.coeffs[d + k] * wp + self.coeffs[d - k] * wm;
        }
        acc
    }

    pub fn evaluate_real(&self, theta: f64) -> f64 {
        let d = self.degree;
        let mut acc = self.coeffs[d].re;
        for k in 1..=d {
            // v_k e + conj(v_k e) = 2 Re(v_k e)
            let e = Complex64::from_polar(1.0, TWO_PI * k as f64 * theta);
            acc += 2.0 * (self.coeffs[d + k] * e).re;
        }
        acc
    }

    /// sum_k |v_k|, an upper bound for sup |v| on the real axis.
    pub fn coefficient_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// sup over theta of |v(theta +- i h)|.
    pub fn strip_norm(&self, h: f64) -> f64 {
        strip_sup(|z| self.evaluate(z), h, self.degree.max(1))
    }
}

/// sup_theta max(|f(theta + ih)|, |f(theta - ih)|) on a refined grid with
/// local golden-section polishing; the grid doubles until the value changes
/// by less than 1e-10.
fn strip_sup<F: Fn(Complex64) -> Complex64>(f: F, h: f64, degree: usize) -> f64 {
    let sample = |t: f64| -> f64 {
        f(Complex64::new(t, h)).norm().max(f(Complex64::new(t, -h)).norm())
    };
    let mut m = 64 * (degree + 1);
    let mut previous = f64::NAN;
    loop {
        let values: Vec<f64> = (0..m).map(|j| sample(j as f64 / m as f64)).collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let step = 1.0 / m as f64;
        let mut best = values[order[0]];
        for &j in order.iter().take(4) {
            let centre = j as f64 * step;
            best = best.max(golden_max(&sample, centre - step, centre + step));
        }
        if (best - previous).abs() < 1e-10 || m > 1 << 20 {
            return best;
        }
        previous = best;
        m *= 2;
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    fc.max(fd)
}

/// Coefficient rules for analytic potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum AnalyticFamily {
    /// v_k = lambda * ratio^{|k|}, 0 < ratio < 1.
    Geometric { lambda: f64, ratio: f64 },
    /// A trigonometric polynomial viewed as an analytic potential.
    Trig { potential: TrigPotential },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPotential {
    pub family: AnalyticFamily,
}

impl AnalyticPotential {
    pub fn geometric(lambda: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "geometric potential needs 0 < ratio < 1, got {ratio}"
            )));
        }
        Ok(AnalyticPotential { family: AnalyticFamily::Geometric { lambda, ratio } })
    }

    pub fn from_trig(potential: TrigPotential) -> Self {
        AnalyticPotential { family: AnalyticFamily::Trig { potential } }
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        match &self.family {
            AnalyticFamily::Geometric { lambda, ratio } => {
                Complex64::new(lambda * ratio.powi(k.unsigned_abs() as i32), 0.0)
            }
            AnalyticFamily::Trig { potential } => potential.coeff(k),
        }
    }

    /// h_1 with |v_k| <= C e^{-2 pi h_1 |k|}; infinite for polynomials.
    pub fn decay_rate(&self) -> f64 {
        match &self.family {
            AnalyticFamily::Geometric { ratio, .. } => -ratio.ln() / TWO_PI,
            AnalyticFamily::Trig { .. } => f64::INFINITY,
        }
    }

    /// Bound C in |v_k| <= C e^{-2 pi h_1 |k|}.
    pub fn decay_constant(&self) -> f64 {
        match &self.family {
            AnalyticFamily::Geometric { lambda, .. } => lambda.abs(),
            AnalyticFamily::Trig { potential } => potential.coefficient_norm(),
        }
    }

    pub fn is_even(&self) -> bool {
        match &self.family {
            AnalyticFamily::Geometric { .. } => true,
            AnalyticFamily::Trig { potential } => potential.is_even(),
        }
    }

    /// Coefficients with |k| <= n.
    pub fn truncate(&self, n: usize) -> Result<TrigPotential> {
        if n < 1 {
            return Err(Error::InvalidArgument("truncation degree must be >= 1".into()));
        }
        let n = n as i64;
        TrigPotential::from_symmetric((-n..=n).map(|k| self.coeff(k)).collect())
    }

    /// Degree beyond which the tail contributes less than `tol` at height |Im z| = h.
    fn cutoff(&self, h: f64, tol: f64) -> usize {
        match &self.family {
            AnalyticFamily::Trig { potential } => potential.degree(),
            AnalyticFamily::Geometric { lambda, ratio } => {
                let q = ratio * (TWO_PI * h.abs()).exp();
                if q >= 1.0 {
                    return usize::MAX;
                }
                // 2 |lambda| q^{K+1} / (1-q) < tol
                let k = ((tol * (1.0 - q) / (2.0 * lambda.abs().max(1e-300))).ln() / q.ln()).ceil();
                k.max(1.0) as usize
            }
        }
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        match &self.family {
            AnalyticFamily::Trig { potential } => potential.evaluate(z),
            AnalyticFamily::Geometric { .. } => {
                let n = self.cutoff(z.im, 1e-17).min(4096);
                self.truncate(n).expect("n >= 1").evaluate(z)
            }
        }
    }

    pub fn strip_norm(&self, h: f64) -> f64 {
        let n = self.cutoff(h, 1e-14).min(4096);
        strip_sup(|z| self.evaluate(z), h, n)
    }
}

/// Either representation; Schrodinger-side analyses accept both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Trig(TrigPotential),
    Analytic(AnalyticPotential),
}

impl From<TrigPotential> for Potential {
    fn from(v: TrigPotential) -> Self {
        Potential::Trig(v)
    }
}

impl From<AnalyticPotential> for Potential {
    fn from(v: AnalyticPotential) -> Self {
        Potential::Analytic(v)
    }
}

impl Potential {
    /// Trigonometric-polynomial form accurate to 1e-16 on the strip of
    /// half-width h (exact for polynomials).
    pub fn as_trig(&self, h: f64) -> TrigPotential {
        match self {
            Potential::Trig(v) => v.clone(),
            Potential::Analytic(a) => {
                let n = a.cutoff(h, 1e-16).clamp(1, 4096);
                a.truncate(n).expect("n >= 1")
            }
        }
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        match self {
            Potential::Trig(v) => v.evaluate(z),
            Potential::Analytic(a) => a.evaluate(z),
        }
    }

    pub fn evaluate_real(&self, theta: f64) -> f64 {
        match self {
            Potential::Trig(v) => v.evaluate_real(theta),
            Potential::Analytic(a) => a.evaluate(Complex64::new(theta, 0.0)).re,
        }
    }

    /// Analyticity radius (infinite for polynomials).
    pub fn strip_radius(&self) -> f64 {
        match self {
            Potential::Trig(_) => f64::INFINITY,
            Potential::Analytic(a) => a.decay_rate(),
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            Potential::Trig(v) => v.is_even(),
            Potential::Analytic(a) => a.is_even(),
        }
    }

    /// Upper bound for sup |v| on the real axis.
    pub fn sup_bound(&self) -> f64 {
        match self {
            Potential::Trig(v) => v.coefficient_norm(),
            Potential::Analytic(a) => match &a.family {
                AnalyticFamily::Geometric { lambda, ratio } => {
                    lambda.abs() * (1.0 + ratio) / (1.0 - ratio)
                }
                AnalyticFamily::Trig { potential } => potential.coefficient_norm(),
            },
        }
    }

    pub fn shifted(&self, t: f64) -> Potential {
        match self {
            Potential::Trig(v) => Potential::Trig(v.shifted(t)),
            Potential::Analytic(a) => {
                Potential::Trig(a.truncate(a.cutoff(0.0, 1e-17).clamp(1, 4096)).expect("n >= 1").shifted(t))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn two_cos_values() {
        let v = TrigPotential::amo(1.0);
        assert!((v.evaluate(c(0.0)) - c(2.0)).norm() < 1e-14);
        assert!(v.evaluate(c(0.25)).norm() < 1e-14);
        let z = v.evaluate(Complex64::new(0.0, 0.1));
        assert!((z.re - 2.0 * (0.2 * PI).cosh()).abs() < 1e-13);
        assert!((z.re - 2.407_944_178_676_441).abs() < 1e-12);
    }

    #[test]
    fn reality_violation_is_rejected() {
        let bad = vec![c(1.0), c(0.0), Complex64::new(1.0, 1.0)];
        assert!(TrigPotential::from_symmetric(bad).is_err());
    }

    #[test]
    fn geometric_truncation() {
        let a = AnalyticPotential::geometric(1.0, 0.5).unwrap();
        let t = a.truncate(3).unwrap();
        assert_eq!(t.coeffs().len(), 7);
        assert!((t.coeff(3) - c(0.125)).norm() < 1e-15);
        assert!((t.coeff(-3) - c(0.125)).norm() < 1e-15);
    }

    #[test]
    fn truncating_a_polynomial_is_identity() {
        let v = TrigPotential::stock_d2_non_even();
        let a = AnalyticPotential::from_trig(v.clone());
        assert_eq!(a.truncate(5).unwrap(), v);
    }

    #[test]
    fn strip_norms_closed_forms() {
        for &h in &[0.0, 0.05, 0.2] {
            let v = TrigPotential::amo(1.0);
            assert!((v.strip_norm(h) - 2.0 * (TWO_PI * h).cosh()).abs() < 1e-10);
            let w = TrigPotential::cos_sin(2, 2.0, 0.0);
            assert!((w.strip_norm(h) - 2.0 * (2.0 * TWO_PI * h).cosh()).abs() < 1e-10);
            assert!((TrigPotential::constant(-1.5).strip_norm(h) - 1.5).abs() < 1e-14);
        }
    }

    #[test]
    fn non_even_example_is_not_even() {
        assert!(!TrigPotential::non_even_example().is_even());
        assert!(TrigPotential::stock_d2_even().is_even());
        let v = TrigPotential::non_even_example();
        let t = 0.137;
        let direct = 2.0 * (TWO_PI * t).cos() + 0.3 * (2.0 * TWO_PI * t).sin();
        assert!((v.evaluate_real(t) - direct).abs() < 1e-14);
    }
}
