//! Supplemental resources for reversibility: qubit entropy/varentropy,
//! the thresholds on the number `k` of copies of a qubit state `ω = (r, 1−r)`
//! that make every qubit-pair conversion reversible, and solvers for the
//! byproduct and supplement states.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use serde::Serialize;

use crate::distributions::{conversion_characteristics, Distribution, MomentSummary};
use crate::error::{domain, invalid, Error, Result};
use crate::numeric::{bisect, golden_max};

/// Binary entropy `h(p)` and varentropy `v(p)` in nats.
pub fn binary_hv(p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("binary parameter {p} outside (0, 1)"));
    }
    let q = 1.0 - p;
    let h = -p * p.ln() - q * q.ln();
    // p(ln p)^2 + q(ln q)^2 - h^2 in a cancellation-free form
    let l = (p / q).ln();
    Ok((h, p * q * l * l))
}

fn hv(p: f64) -> (f64, f64) {
    binary_hv(p).expect("parameter checked by caller")
}

/// `g(x) = (1 − 2x)(ln(1 − x) − ln x)` on `(0, ½]`.
pub fn g(x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 0.5) {
        return domain(format!("g is defined on (0, 1/2], got {x}"));
    }
    Ok((1.0 - 2.0 * x) * ((1.0 - x).ln() - x.ln()))
}

/// Inverse of the decreasing map `g`, by bisection to floating-point
/// resolution.
pub fn g_inverse(y: f64) -> Result<f64> {
    if !(y >= 0.0) || y.is_infinite() {
        return domain(format!("g^-1 needs a finite y >= 0, got {y}"));
    }
    if y == 0.0 {
        return Ok(0.5);
    }
    let mut lo = (-(y + 2.0)).exp().min(0.25);
    while g(lo)? <= y {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return domain(format!("g^-1({y}) underflows"));
        }
    }
    bisect(
        |x| (1.0 - 2.0 * x) * ((1.0 - x).ln() - x.ln()) - y,
        lo,
        0.5,
        0.0,
    )
}

/// `max_{0 ≤ p ≤ ½} v(p)`, by multi-start golden-section search.
pub fn c_max() -> f64 {
    static CMAX: OnceLock<f64> = OnceLock::new();
    *CMAX.get_or_init(|| {
        let starts = 16;
        (0..starts)
            .map(|i| {
                let a = 0.5 * i as f64 / starts as f64;
                let b = 0.5 * (i + 1) as f64 / starts as f64;
                golden_max(
                    |p| if p > 0.0 && p < 1.0 { hv(p).1 } else { 0.0 },
                    a,
                    b,
                    1e-12,
                )
                .1
            })
            .fold(0.0, f64::max)
    })
}

/// `x_r = g⁻¹(v(r)/h(r) + 2)`.
pub fn x_r(r: f64) -> Result<f64> {
    check_r(r)?;
    let (h, v) = hv(r);
    g_inverse(v / h + 2.0)
}

fn check_r(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 0.5) {
        return invalid(format!("r must lie in (0, 1/2), got {r}"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupplementReport {
    pub r: f64,
    /// Necessary number of copies: below it some qubit pair stays irreversible.
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// Sufficient number of copies, `max(K1, K2)`.
    pub ks: f64,
    pub x_r: f64,
    pub cmax: f64,
}

/// Evaluates the closed forms for `K0`, `K1`, `K2` and `Ks`.
pub fn k_thresholds(r: f64) -> Result<SupplementReport> {
    check_r(r)?;
    let xr = x_r(r)?;
    let (hr, vr) = hv(r);
    let (hx, vx) = hv(xr);
    let c = c_max();

    let b0 = (LN_2 - hr) * vx + vr * hx;
    let k0 = (-b0 + (b0 * b0 + 4.0 * LN_2 * LN_2 * vx * vr).sqrt()) / (2.0 * LN_2 * vr);

    let den = hr * vx - vr * hx;
    let a1 = c * hx + vr * LN_2;
    let k1 = (a1 + (a1 * a1 + 4.0 * c * LN_2 * den).sqrt()) / (2.0 * den);

    let k2 = (c * hr + (c * c * hr * hr + 4.0 * LN_2 * LN_2 * c * vr).sqrt()) / (2.0 * vr * LN_2);

    Ok(SupplementReport {
        r,
        k0,
        k1,
        k2,
        ks: k1.max(k2),
        x_r: xr,
        cmax: c,
    })
}

/// `f_r(x,p,q,k) = (v(p)+k v(r))(h(q)+k h(x)) − (h(p)+k h(r))(v(q)+k v(x))`.
pub fn f_r(r: f64, x: f64, p: f64, q: f64, k: f64) -> Result<f64> {
    let (hr, vr) = binary_hv(r)?;
    let (hx, vx) = binary_hv(x)?;
    let (hp, vp) = binary_hv(p)?;
    let (hq, vq) = binary_hv(q)?;
    Ok((vp + k * vr) * (hq + k * hx) - (hp + k * hr) * (vq + k * vx))
}

/// Byproduct parameter `x ∈ [x_r, ½]` with `f_r(x, p, q, k) = 0`.
pub fn solve_byproduct(r: f64, p: f64, q: f64, k: f64) -> Result<f64> {
    check_r(r)?;
    if !(k >= 1.0) {
        return invalid(format!("k must be at least 1, got {k}"));
    }
    let lo = x_r(r)?;
    let f = |x: f64| f_r(r, x, p, q, k);
    let (flo, fhi) = (f(lo)?, f(0.5)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(0.5);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Infeasible(format!(
            "f_r has no sign change on [x_r, 1/2] = [{lo}, 0.5] (values {flo:.3e}, {fhi:.3e}) \
             for r = {r}, p = {p}, q = {q}, k = {k}"
        )));
    }
    bisect(|x| f(x).unwrap_or(f64::NAN), lo, 0.5, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SupplementOutcome {
    Solved {
        p_prime: f64,
        /// Characteristics of `P ⊗ (p′,1−p′)^{⊗k}` against `Q`, re-evaluated.
        check: f64,
    },
    Infeasible {
        target_ratio: f64,
        achievable_min: f64,
        achievable_max: f64,
    },
}

const SCAN_POINTS: usize = 4000;

/// Finds `p′ ∈ (0, ½]` with `(S_P + k h(p′)) / (V_P + k v(p′)) = S_Q/V_Q`.
pub fn supplement_state(p: &MomentSummary, q: &MomentSummary, k: u32) -> Result<SupplementOutcome> {
    if !(q.varentropy > 0.0) {
        return invalid("target is uniform: S_Q/V_Q is not finite");
    }
    if k == 0 {
        return invalid("k must be at least 1");
    }
    let t = q.entropy / q.varentropy;
    let kf = k as f64;
    let resid = |x: f64| {
        let (h, v) = hv(x);
        (p.entropy + kf * h) - t * (p.varentropy + kf * v)
    };
    // log-spaced near 0 where h and v change fastest, linear near 1/2
    let mut grid: Vec<f64> = (0..SCAN_POINTS / 2)
        .map(|i| 1e-12f64 * (0.25f64 / 1e-12).powf(i as f64 / (SCAN_POINTS / 2) as f64))
        .collect();
    grid.extend((0..=SCAN_POINTS / 2).map(|i| 0.25 + 0.25 * i as f64 / (SCAN_POINTS / 2) as f64));
    let vals: Vec<f64> = grid.iter().map(|&x| resid(x)).collect();

    for w in 0..grid.len() - 1 {
        let (a, b) = (vals[w], vals[w + 1]);
        if a == 0.0 || a.signum() != b.signum() {
            let root = if a == 0.0 {
                grid[w]
            } else {
                bisect(resid, grid[w], grid[w + 1], 0.0)?
            };
            let (h, v) = hv(root);
            let combined = MomentSummary {
                entropy: p.entropy + kf * h,
                varentropy: p.varentropy + kf * v,
                ratio: (p.entropy + kf * h) / (p.varentropy + kf * v),
            };
            let check = conversion_characteristics(&combined, q)?.value;
            return Ok(SupplementOutcome::Solved {
                p_prime: root,
                check,
            });
        }
    }
    let ratios = grid.iter().map(|&x| {
        let (h, v) = hv(x);
        (p.entropy + kf * h) / (p.varentropy + kf * v)
    });
    let (lo, hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r), hi.max(r))
    });
    Ok(SupplementOutcome::Infeasible {
        target_ratio: t,
        achievable_min: lo,
        achievable_max: hi,
    })
}

/// [`supplement_state`] on distributions.
pub fn supplement_state_of(
    p: &Distribution,
    q: &Distribution,
    k: u32,
) -> Result<SupplementOutcome> {
    supplement_state(&p.moments(), &q.moments(), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hv_values() {
        let (h, v) = binary_hv(0.5).unwrap();
        assert_abs_diff_eq!(h, LN_2, epsilon = 1e-16);
        assert_eq!(v, 0.0);
        for p in [0.01, 0.2, 0.37] {
            let (h1, v1) = binary_hv(p).unwrap();
            let (h2, v2) = binary_hv(1.0 - p).unwrap();
            assert_abs_diff_eq!(h1, h2, epsilon = 1e-15);
            assert_abs_diff_eq!(v1, v2, epsilon = 1e-15);
            let direct = p * p.ln().powi(2) + (1.0 - p) * (1.0 - p).ln().powi(2) - h1 * h1;
            assert_abs_diff_eq!(v1, direct, epsilon = 1e-14);
        }
        assert!(binary_hv(0.0).is_err());
        assert!(binary_hv(1.0).is_err());
    }

    #[test]
    fn g_roundtrip() {
        assert_eq!(g(0.5).unwrap(), 0.0);
        for i in 0..=500 {
            let y = 50.0 * i as f64 / 500.0;
            let x = g_inverse(y).unwrap();
            assert!((g(x).unwrap() - y).abs() <= 1e-10, "y = {y}");
        }
        assert!(g_inverse(-1.0).is_err());
    }

    #[test]
    fn cmax_value() {
        assert_abs_diff_eq!(c_max(), 0.4392288398906452, epsilon = 1e-12);
    }

    #[test]
    fn x_r_below_r() {
        for i in 1..50 {
            let r = i as f64 / 100.0;
            let x = x_r(r).unwrap();
            assert!(x > 0.0 && x < r, "r = {r}");
        }
        assert!(x_r(0.5).is_err());
    }

    #[test]
    fn symmetric_byproduct() {
        for k in [1.0, 3.0, 20.0] {
            assert_eq!(f_r(0.2, 0.2, 0.2, 0.2, k).unwrap(), 0.0);
            let x = solve_byproduct(0.2, 0.2, 0.2, k).unwrap();
            assert_abs_diff_eq!(x, 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn supplement_rejects_uniform_target() {
        let p = Distribution::new(vec![0.3, 0.7]).unwrap();
        let u = Distribution::uniform(2).unwrap();
        assert!(supplement_state_of(&p, &u, 1).is_err());
    }
}
