//! Fidelity between grouped spectra and the LU conversion error.
//!
//! Two sorted step functions are aligned on the counting index: the union of
//! both sets of segment boundaries cuts the index range into pieces on which
//! both functions are constant. Piece lengths can be astronomically large, so
//! everything is carried in log form and only `length · √(a b)` is
//! exponentiated.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numeric::{biguint_ln, log_sub_exp, NeumaierSum};
use crate::spectrum::{Spectrum, SpectrumOptions, SpectrumSource, Staircase};

/// Cumulative log counts closer than this are one boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Default half-width of the m window in units of `√n`.
pub const DEFAULT_WINDOW: f64 = 10.0;

/// A maximal run of the counting index on which both step functions are
/// constant. `a`/`b` are segment indices, `None` past the end of the support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub log_len: f64,
    pub a: Option<usize>,
    pub b: Option<usize>,
}

/// Walks the merged boundary set of `a` and `b` in index order.
pub(crate) fn align(a: &Staircase, b: &Staircase, f: impl FnMut(Piece)) {
    match (a.exact_cumulative(), b.exact_cumulative()) {
        (Some(ca), Some(cb)) => align_exact(a, ca, b, cb, f),
        _ => align_log(a, b, f),
    }
}

fn align_log(a: &Staircase, b: &Staircase, mut f: impl FnMut(Piece)) {
    let (ca, cb) = (a.cumulative_log_counts(), b.cumulative_log_counts());
    let (sa, sb) = (a.segments(), b.segments());
    let (na, nb) = (ca.len(), cb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = f64::NEG_INFINITY;
    let (mut a_whole, mut b_whole) = (true, true);
    while i < na || j < nb {
        let ea = if i < na { ca[i] } else { f64::INFINITY };
        let eb = if j < nb { cb[j] } else { f64::INFINITY };
        let (hi, step_a, step_b) = if i < na && j < nb && (ea - eb).abs() <= BOUNDARY_TOLERANCE {
            (ea.min(eb), true, true)
        } else if ea < eb {
            (ea, true, false)
        } else {
            (eb, false, true)
        };
        // an uncut segment contributes its own multiplicity exactly
        let log_len = if step_a && a_whole {
            sa[i].log_multiplicity
        } else if step_b && b_whole {
            sb[j].log_multiplicity
        } else {
            log_sub_exp(hi, prev)
        };
        f(Piece {
            log_len,
            a: (i < na).then_some(i),
            b: (j < nb).then_some(j),
        });
        prev = hi;
        if step_a {
            i += 1;
            a_whole = true;
        } else {
            a_whole = false;
        }
        if step_b {
            j += 1;
            b_whole = true;
        } else {
            b_whole = false;
        }
    }
}

fn align_exact(
    a: &Staircase,
    ca: &[BigUint],
    b: &Staircase,
    cb: &[BigUint],
    mut f: impl FnMut(Piece),
) {
    let _ = (a, b);
    let (na, nb) = (ca.len(), cb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = BigUint::default();
    while i < na || j < nb {
        let (hi, step_a, step_b) = match (ca.get(i), cb.get(j)) {
            (Some(x), Some(y)) if x == y => (x, true, true),
            (Some(x), Some(y)) if x < y => (x, true, false),
            (Some(_), Some(y)) => (y, false, true),
            (Some(x), None) => (x, true, false),
            (None, Some(y)) => (y, false, true),
            (None, None) => unreachable!(),
        };
        f(Piece {
            log_len: biguint_ln(&(hi - &prev)),
            a: (i < na).then_some(i),
            b: (j < nb).then_some(j),
        });
        prev = hi.clone();
        if step_a {
            i += 1;
        }
        if step_b {
            j += 1;
        }
    }
}

/// `Σ_i √(A↓(i) B↓(i))` over the counting index, clamped to `[0, 1]`.
pub fn fidelity_spectra<A: AsRef<Staircase> + ?Sized, B: AsRef<Staircase> + ?Sized>(
    a: &A,
    b: &B,
) -> f64 {
    let (a, b) = (a.as_ref(), b.as_ref());
    let (sa, sb) = (a.segments(), b.segments());
    let mut sum = NeumaierSum::new();
    align(a, b, |p| {
        if let (Some(i), Some(j)) = (p.a, p.b) {
            sum.add((p.log_len + 0.5 * (sa[i].log_value + sb[j].log_value)).exp());
        }
    });
    sum.value().clamp(0.0, 1.0)
}

/// `√(1 − F(P^{n↓}, Q^{m↓}))`.
pub fn lu_error_at<P: SpectrumSource + ?Sized, Q: SpectrumSource + ?Sized>(
    p: &P,
    q: &Q,
    n: u32,
    m: u32,
    opts: &SpectrumOptions,
) -> Result<f64> {
    if n == 0 || m == 0 {
        return invalid("copy counts must be at least 1");
    }
    let sp = p.spectrum(n, opts)?;
    let sq = q.spectrum(m, opts)?;
    Ok(error_from_fidelity(fidelity_spectra(&sp, &sq)))
}

pub(crate) fn error_from_fidelity(f: f64) -> f64 {
    (1.0 - f).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStrategy {
    Exhaustive,
    #[default]
    CoarseFine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LuErrorResult {
    pub epsilon: f64,
    pub best_m: u32,
    pub fidelity_at_best: f64,
    /// `(m, F)` for every evaluated `m`, ascending in `m`.
    pub scanned: Vec<(u32, f64)>,
}

/// Integer window `[(S_P/S_Q)n − w√n, (S_P/S_Q)n + w√n] ∩ [1, ∞)`.
pub fn m_window(s_p: f64, s_q: f64, n: u32, w: f64) -> Result<(u32, u32)> {
    if !(w > 0.0) {
        return invalid(format!("window half-width must be positive, got {w}"));
    }
    if !(s_q > 0.0) {
        return invalid("target distribution has zero entropy");
    }
    let center = s_p / s_q * n as f64;
    let half = w * (n as f64).sqrt();
    let lo = (center - half).ceil().max(1.0);
    let hi = (center + half).floor();
    if hi < lo || hi > u32::MAX as f64 {
        return invalid(format!(
            "empty m window around {center:.3} with half-width {half:.3}"
        ));
    }
    Ok((lo as u32, hi as u32))
}

/// Optimal LU error `ε_n` over the window of target copy counts.
pub fn lu_error_opt<P: SpectrumSource + ?Sized, Q: SpectrumSource + ?Sized>(
    p: &P,
    q: &Q,
    n: u32,
    window_w: f64,
    strategy: ScanStrategy,
    opts: &SpectrumOptions,
) -> Result<LuErrorResult> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let window = m_window(p.moments().entropy, q.moments().entropy, n, window_w)?;
    let sp = p.spectrum(n, opts)?;
    lu_error_opt_with(&sp, q, window, strategy, opts)
}

/// As [`lu_error_opt`] with a prebuilt source spectrum and explicit window,
/// so one source spectrum can serve many targets.
pub fn lu_error_opt_with<Q: SpectrumSource + ?Sized>(
    source: &Spectrum,
    q: &Q,
    window: (u32, u32),
    strategy: ScanStrategy,
    opts: &SpectrumOptions,
) -> Result<LuErrorResult> {
    let (lo, hi) = window;
    if lo == 0 || hi < lo {
        return invalid(format!("empty m window [{lo}, {hi}]"));
    }
    let eval = |ms: &[u32]| -> Result<Vec<(u32, f64)>> {
        ms.par_iter()
            .map(|&m| {
                let sq = q.spectrum(m, opts)?;
                Ok((m, fidelity_spectra(source, &sq)))
            })
            .collect()
    };
    let mut memo: BTreeMap<u32, f64> = BTreeMap::new();
    match strategy {
        ScanStrategy::Exhaustive => {
            let all: Vec<u32> = (lo..=hi).collect();
            memo.extend(eval(&all)?);
        }
        ScanStrategy::CoarseFine => {
            let n = source.n();
            let step = ((n as f64).sqrt() / 4.0).ceil().max(1.0) as u32;
            let mut grid: Vec<u32> = (lo..=hi).step_by(step as usize).collect();
            if grid.last() != Some(&hi) {
                grid.push(hi);
            }
            memo.extend(eval(&grid)?);
            let (g, _) = best_of(&memo);
            let fine: Vec<u32> = (g.saturating_sub(step).max(lo)..=g.saturating_add(step).min(hi))
                .filter(|m| !memo.contains_key(m))
                .collect();
            memo.extend(eval(&fine)?);
        }
    }
    let (best_m, fidelity_at_best) = best_of(&memo);
    Ok(LuErrorResult {
        epsilon: error_from_fidelity(fidelity_at_best),
        best_m,
        fidelity_at_best,
        scanned: memo.into_iter().collect(),
    })
}

/// Largest fidelity; ties go to the smallest `m`.
fn best_of(memo: &BTreeMap<u32, f64>) -> (u32, f64) {
    memo.iter().fold((0, f64::NEG_INFINITY), |best, (&m, &f)| {
        if f > best.1 {
            (m, f)
        } else {
            best
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use crate::spectrum::{build_spectrum, Mode};
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        let p = d(&[0.2, 0.3, 0.5]);
        for mode in [Mode::Exact, Mode::LogDomain] {
            let opts = SpectrumOptions {
                mode,
                ..Default::default()
            };
            let s = build_spectrum(&p, 12, &opts).unwrap();
            assert_abs_diff_eq!(fidelity_spectra(&s, &s), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn single_copy_example() {
        let opts = SpectrumOptions::default();
        let a = build_spectrum(&d(&[0.5, 0.5]), 1, &opts).unwrap();
        let b = build_spectrum(&d(&[0.9, 0.1]), 1, &opts).unwrap();
        let f = fidelity_spectra(&a, &b);
        assert_abs_diff_eq!(f, 0.8f64.sqrt(), epsilon = 1e-15);
        let e = lu_error_at(&d(&[0.5, 0.5]), &d(&[0.9, 0.1]), 1, 1, &opts).unwrap();
        assert_abs_diff_eq!(e, (1.0 - 0.8f64.sqrt()).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn unequal_supports_pad_with_zeros() {
        // (1) against (0.5,0.5): only the first index overlaps
        let opts = SpectrumOptions::exact();
        let a = build_spectrum(&d(&[1.0]), 1, &opts).unwrap();
        let b = build_spectrum(&d(&[0.5, 0.5]), 1, &opts).unwrap();
        assert_abs_diff_eq!(fidelity_spectra(&a, &b), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_spectra(&b, &a), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_error_on_identical_inputs() {
        let p = d(&[0.1, 0.2, 0.7]);
        let e = lu_error_at(&p, &p, 20, 20, &SpectrumOptions::default()).unwrap();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn window_bounds() {
        assert_eq!(m_window(1.0, 1.0, 100, 1.0).unwrap(), (90, 110));
        assert!(m_window(1.0, 1.0, 100, 0.0).is_err());
        assert!(m_window(0.001, 1.0, 1, 0.5).is_err());
        assert_eq!(m_window(0.0, 1.0, 4, 1.0).unwrap(), (1, 2));
    }

    #[test]
    fn strategies_agree_near_reversible_pair() {
        let p = d(&[0.3, 0.7]);
        let opts = SpectrumOptions::default();
        for n in [16u32, 64] {
            let ex = lu_error_opt(&p, &p, n, 3.0, ScanStrategy::Exhaustive, &opts).unwrap();
            let cf = lu_error_opt(&p, &p, n, 3.0, ScanStrategy::CoarseFine, &opts).unwrap();
            assert_eq!(ex.best_m, n);
            assert_eq!(cf.best_m, n);
            assert!(ex.epsilon <= cf.epsilon + 1e-12);
            assert_abs_diff_eq!(
                ex.epsilon.powi(2) + ex.fidelity_at_best,
                1.0,
                epsilon = 1e-12
            );
        }
    }
}
