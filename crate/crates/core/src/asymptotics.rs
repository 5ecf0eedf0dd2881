//! Closed-form limits and the large-deviation machinery behind them.
//!
//! The cumulant generating function is parameterized so that it vanishes at
//! the origin: `g(s) = ln Σ p^{1+s}`. The standard form evaluates the same
//! function at `1 + s`, so an inverse `h` computed here is shifted by one
//! from the standard value; [`LegendreSolution`] carries both.

use std::f64::consts::PI;

use serde::Serialize;

use crate::distributions::{conversion_characteristics, Distribution, MomentSummary};
use crate::error::{domain, invalid, Result};
use crate::numeric::{log_sum_exp, NeumaierSum};

/// Step used for central differences of `f_1`.
pub const FD_STEP: f64 = 1e-5;

/// `lim ε_n = √(1 − √(2/(√C + 1/√C)))`; 1 at `C ∈ {0, ∞}`.
pub fn lu_error_limit(c: f64) -> f64 {
    if !(c > 0.0) || c.is_infinite() {
        return 1.0;
    }
    let r = c.sqrt();
    (1.0 - (2.0 / (r + 1.0 / r)).sqrt()).max(0.0).sqrt()
}

/// Limit of `F(P^{n↓}, Q^{m_n↓})` for `(m_n − (S_P/S_Q)n)/√n → b`:
/// `√(2/(√C + 1/√C)) · exp(−b² S_Q² / (4(1 + C) V_P))`.
///
/// Only meaningful for non-lattice inputs; this is not checked here.
pub fn fidelity_limit(p: &MomentSummary, q: &MomentSummary, b: f64) -> Result<f64> {
    let c = conversion_characteristics(p, q)?.value;
    if c == 0.0 || c.is_infinite() {
        return Ok(0.0);
    }
    let r = c.sqrt();
    let head = (2.0 / (r + 1.0 / r)).sqrt();
    Ok(head * (-b * b * q.entropy * q.entropy / (4.0 * (1.0 + c) * p.varentropy)).exp())
}

/// [`fidelity_limit`] on distributions.
pub fn fidelity_limit_of(p: &Distribution, q: &Distribution, b: f64) -> Result<f64> {
    fidelity_limit(&p.moments(), &q.moments(), b)
}

/// Cumulant generating function of `−ln p` under `p`, shifted to vanish at 0.
#[derive(Debug, Clone)]
pub struct CumulantModel {
    base: Distribution,
    logs: Vec<f64>,
    moments: MomentSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendreSolution {
    /// Root of `g′(s) = R` in the shifted parameterization.
    pub shifted: f64,
    /// The same root in the standard parameterization (`shifted + 1`).
    pub standard: f64,
}

impl CumulantModel {
    pub fn new(base: &Distribution) -> Self {
        Self {
            base: base.clone(),
            logs: base.probs().iter().map(|p| p.ln()).collect(),
            moments: base.moments(),
        }
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn entropy(&self) -> f64 {
        self.moments.entropy
    }

    pub fn varentropy(&self) -> f64 {
        self.moments.varentropy
    }

    fn tilted(&self, s: f64) -> (f64, Vec<f64>) {
        let ex: Vec<f64> = self.logs.iter().map(|l| (1.0 + s) * l).collect();
        let lz = log_sum_exp(&ex);
        (lz, ex.iter().map(|e| (e - lz).exp()).collect())
    }

    /// `g(s) = ln Σ p^{1+s}`.
    pub fn g(&self, s: f64) -> f64 {
        self.tilted(s).0
    }

    /// `g′(s)`: mean of `ln p` under the tilted law.
    pub fn g1(&self, s: f64) -> f64 {
        let (_, w) = self.tilted(s);
        w.iter()
            .zip(&self.logs)
            .map(|(w, l)| w * l)
            .collect::<NeumaierSum>()
            .value()
    }

    /// `g″(s)`: variance of `ln p` under the tilted law.
    pub fn g2(&self, s: f64) -> f64 {
        let (_, w) = self.tilted(s);
        let mean: f64 = w
            .iter()
            .zip(&self.logs)
            .map(|(w, l)| w * l)
            .collect::<NeumaierSum>()
            .value();
        w.iter()
            .zip(&self.logs)
            .map(|(w, l)| w * (l - mean) * (l - mean))
            .collect::<NeumaierSum>()
            .value()
    }

    /// Open range `(ln p_min, ln p_max)` of `g′`.
    pub fn range(&self) -> (f64, f64) {
        (*self.logs.last().expect("nonempty"), self.logs[0])
    }

    /// Solves `g′(s) = r` by safeguarded Newton iteration.
    pub fn legendre_inverse(&self, r: f64) -> Result<LegendreSolution> {
        let (lo_r, hi_r) = self.range();
        if !(r > lo_r && r < hi_r) {
            return domain(format!(
                "R = {r} outside the open range ({lo_r}, {hi_r}) of g'"
            ));
        }
        let f = |s: f64| self.g1(s) - r;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while f(lo) > 0.0 {
            lo *= 2.0;
            if lo < -1e8 {
                return domain(format!("cannot bracket g'(s) = {r}"));
            }
        }
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e8 {
                return domain(format!("cannot bracket g'(s) = {r}"));
            }
        }
        let mut s = 0.0f64.clamp(lo, hi);
        for _ in 0..200 {
            let fs = f(s);
            if fs.abs() <= 1e-12 {
                break;
            }
            if fs > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.g2(s);
            let newton = s - fs / d;
            s = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 * s.abs().max(1.0) {
                break;
            }
        }
        Ok(LegendreSolution {
            shifted: s,
            standard: s + 1.0,
        })
    }

    /// `h′(R) = 1/g″(h(R))`.
    pub fn legendre_inverse_derivative(&self, r: f64) -> Result<f64> {
        let h = self.legendre_inverse(r)?;
        Ok(1.0 / self.g2(h.shifted))
    }

    /// `f_0(R) = −(h R − g(h))` with `h` in the standard parameterization.
    pub fn f0(&self, r: f64) -> Result<f64> {
        let h = self.legendre_inverse(r)?;
        Ok(-(h.standard * r - self.g(h.shifted)))
    }

    /// `f_1(R) = −ln √(2π) − ln h(R) + ½ ln h′(R)`.
    pub fn f1(&self, r: f64) -> Result<f64> {
        let h = self.legendre_inverse(r)?;
        if h.standard <= 0.0 {
            return domain(format!("h(R) = {} is not positive at R = {r}", h.standard));
        }
        let hp = 1.0 / self.g2(h.shifted);
        Ok(-(2.0 * PI).sqrt().ln() - h.standard.ln() + 0.5 * hp.ln())
    }

    /// First or second derivative of `f_1` by central differences.
    pub fn f1_derivative(&self, r: f64, order: u32) -> Result<f64> {
        let e = FD_STEP;
        match order {
            0 => self.f1(r),
            1 => Ok((self.f1(r + e)? - self.f1(r - e)?) / (2.0 * e)),
            2 => Ok((self.f1(r + e)? - 2.0 * self.f1(r)? + self.f1(r - e)?) / (e * e)),
            _ => invalid("only derivatives of order 0..=2 are supported"),
        }
    }

    /// Predicted `ln #{ i : ln P^{n↓}(i) ≥ −nS + √n a }`:
    /// `n f_0(−S) + √n a f_0′(−S) + a² f_0″(−S)/2 + f_1(−S) − ½ ln n`,
    /// with `f_0′ = −h` and `f_0″ = −h′`.
    pub fn counting_estimate(&self, n: u32, a: f64) -> Result<f64> {
        if n == 0 {
            return invalid("n must be at least 1");
        }
        let r0 = -self.entropy();
        let h = self.legendre_inverse(r0)?;
        let hp = self.legendre_inverse_derivative(r0)?;
        let nf = n as f64;
        let terms = [
            nf * self.f0(r0)?,
            -nf.sqrt() * a * h.standard,
            -0.5 * a * a * hp,
            self.f1(r0)?,
            -0.5 * nf.ln(),
        ];
        Ok(terms.into_iter().collect::<NeumaierSum>().value())
    }
}

/// Truncated series solution `x = Σ_{i=1}^{order} ε^i x_i` of
/// `ε = Σ_i a_i x^i`, where `x_1 = 1/a_1` and
/// `x_l = −(1/a_1) [ε^l] Σ_{i≥2} a_i (Σ_{k<l} x_k ε^k)^i`.
pub fn perturb_solve(a: &[f64], eps: f64, order: usize) -> Result<f64> {
    let xs = series_coefficients(a, order)?;
    let mut pow = eps;
    let mut sum = NeumaierSum::new();
    for x in xs {
        sum.add(x * pow);
        pow *= eps;
    }
    Ok(sum.value())
}

/// Coefficients `x_1..x_order` of the reverted series.
pub fn series_coefficients(a: &[f64], order: usize) -> Result<Vec<f64>> {
    let a1 = a.first().copied().unwrap_or(0.0);
    if a1 == 0.0 || !a1.is_finite() {
        return invalid("leading coefficient a_1 must be nonzero");
    }
    let mut xs: Vec<f64> = Vec::with_capacity(order);
    for l in 1..=order {
        if l == 1 {
            xs.push(1.0 / a1);
            continue;
        }
        // X(ε) truncated at degree l, with x_l still unknown (zero)
        let mut base = vec![0.0; l + 1];
        for (k, x) in xs.iter().enumerate() {
            base[k + 1] = *x;
        }
        let mut power = base.clone();
        let mut coeff = 0.0;
        for i in 2..=l {
            power = poly_mul_truncated(&power, &base, l);
            if let Some(ai) = a.get(i - 1) {
                coeff += ai * power[l];
            }
        }
        xs.push(-coeff / a1);
    }
    Ok(xs)
}

fn poly_mul_truncated(x: &[f64], y: &[f64], deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        for (j, yj) in y.iter().enumerate() {
            if i + j > deg {
                break;
            }
            out[i + j] += xi * yj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn error_limit_values() {
        assert_eq!(lu_error_limit(1.0), 0.0);
        assert_eq!(lu_error_limit(f64::INFINITY), 1.0);
        assert_eq!(lu_error_limit(0.0), 1.0);
        for c in [0.1, 0.5, 2.0, 37.0] {
            assert_abs_diff_eq!(lu_error_limit(c), lu_error_limit(1.0 / c), epsilon = 1e-15);
        }
    }

    #[test]
    fn fidelity_limit_center() {
        let p = d(&[0.3, 0.7]).moments();
        assert_abs_diff_eq!(fidelity_limit(&p, &p, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        let q = d(&[0.2, 0.8]).moments();
        let c = conversion_characteristics(&p, &q).unwrap().value;
        let f0 = fidelity_limit(&p, &q, 0.0).unwrap();
        assert_abs_diff_eq!(
            f0,
            (2.0 / (c.sqrt() + 1.0 / c.sqrt())).sqrt(),
            epsilon = 1e-15
        );
        assert!(fidelity_limit(&p, &q, 1.0).unwrap() < f0);
    }

    #[test]
    fn cumulants_at_origin() {
        let m = CumulantModel::new(&d(&[0.1, 0.2, 0.7]));
        assert_abs_diff_eq!(m.g(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.g1(0.0), -m.entropy(), epsilon = 1e-14);
        assert_abs_diff_eq!(m.g2(0.0), m.varentropy(), epsilon = 1e-14);
        let e = 1e-4;
        assert_abs_diff_eq!((m.g(e) - m.g(-e)) / (2.0 * e), -m.entropy(), epsilon = 1e-6);
        assert_abs_diff_eq!(
            (m.g(e) - 2.0 * m.g(0.0) + m.g(-e)) / (e * e),
            m.varentropy(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn legendre_inverse_at_entropy() {
        let m = CumulantModel::new(&d(&[0.3, 0.7]));
        let h = m.legendre_inverse(-m.entropy()).unwrap();
        assert!(h.shifted.abs() < 1e-12);
        assert_abs_diff_eq!(h.standard, 1.0, epsilon = 1e-12);
        let e = 1e-5;
        let s = -m.entropy();
        let fd = (m.legendre_inverse(s + e).unwrap().standard
            - m.legendre_inverse(s - e).unwrap().standard)
            / (2.0 * e);
        assert_abs_diff_eq!(fd, 1.0 / m.varentropy(), epsilon = 1e-5);
        assert!(m.legendre_inverse(0.0).is_err());
        assert!(m.legendre_inverse(0.7f64.ln()).is_err());
        assert!(m.legendre_inverse(0.7f64.ln() - 1e-6).is_ok());
    }

    #[test]
    fn legendre_inverse_increasing() {
        let m = CumulantModel::new(&d(&[0.3, 0.7]));
        let (lo, hi) = m.range();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..200 {
            let r = lo + (hi - lo) * k as f64 / 200.0;
            let h = m.legendre_inverse(r).unwrap().shifted;
            assert!(h > prev);
            prev = h;
        }
    }

    #[test]
    fn counting_leading_term() {
        let m = CumulantModel::new(&d(&[0.3, 0.7]));
        assert_abs_diff_eq!(m.f0(-m.entropy()).unwrap(), m.entropy(), epsilon = 1e-12);
        let mut prev = f64::INFINITY;
        for k in -5..=5 {
            let v = m.counting_estimate(400, k as f64 * 0.1).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn series_examples() {
        assert_eq!(perturb_solve(&[1.0, 1.0], 0.0, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(
            perturb_solve(&[1.0, 1.0], 0.01, 2).unwrap(),
            0.0099,
            epsilon = 1e-16
        );
        let xs = series_coefficients(&[2.0, 3.0], 2).unwrap();
        assert_abs_diff_eq!(xs[1], -3.0 / 8.0, epsilon = 1e-16);
        // x + x^2 = ε has Catalan-number coefficients (-1)^{k+1} C_{k-1}
        let xs = series_coefficients(&[1.0, 1.0], 5).unwrap();
        assert_eq!(xs, vec![1.0, -1.0, 2.0, -5.0, 14.0]);
        assert!(perturb_solve(&[0.0, 1.0], 0.1, 2).is_err());
    }
}
