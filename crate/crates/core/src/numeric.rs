//! Small numerical kernels shared by the other modules: compensated
//! summation, log-domain accumulation, log-factorials, big-integer
//! logarithms and scalar root/extremum search.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::error::{domain, Result};

/// Neumaier (improved Kahan) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

/// Accumulates `ln Σ exp(x_k)` for a stream of log-terms without overflow.
///
/// The running sum is kept as `exp(offset) * (sum + comp)` with Neumaier
/// compensation; the offset is only moved when the scaled sum would leave
/// the comfortable range of `f64`, so long prefix sums keep ~1 ulp accuracy.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    offset: f64,
    acc: NeumaierSum,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self {
            offset: f64::NEG_INFINITY,
            acc: NeumaierSum::new(),
        }
    }
}

const RESCALE_AT: f64 = 512.0;

impl LogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_log(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if self.offset == f64::NEG_INFINITY {
            self.offset = x;
            self.acc = NeumaierSum::new();
            self.acc.add(1.0);
            return;
        }
        if x - self.offset > RESCALE_AT {
            let scale = (self.offset - x).exp();
            self.acc = NeumaierSum {
                sum: self.acc.sum * scale,
                comp: self.acc.comp * scale,
            };
            self.offset = x;
        }
        self.acc.add((x - self.offset).exp());
    }

    pub fn ln(&self) -> f64 {
        if self.offset == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.offset + self.acc.value().ln()
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(e^hi - e^lo)` for `hi >= lo`; `-inf` when they coincide.
#[inline]
pub fn log_sub_exp(hi: f64, lo: f64) -> f64 {
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    if lo >= hi {
        return f64::NEG_INFINITY;
    }
    hi + (-(lo - hi).exp_m1()).ln()
}

/// Stable `ln Σ exp(x_i)` over a slice, summed in the given order.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut acc = LogAccumulator::new();
    for &x in xs {
        acc.add_log(x);
    }
    acc.ln()
}

/// Table of `ln k!` for `k = 0..=n`, built by compensated summation of `ln k`.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn new(n: usize) -> Self {
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = NeumaierSum::new();
        table.push(0.0);
        for k in 1..=n {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.table[k]
    }
}

/// Natural logarithm of an arbitrary-precision integer; `-inf` for zero.
pub fn biguint_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        if let Some(f) = x.to_f64() {
            if f.is_finite() {
                return f.ln();
            }
        }
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops when the bracket is below `xtol` or stops shrinking in floating point.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return domain(format!("no sign change on [{lo}, {hi}] (f = {flo}, {fhi})"));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)].into_iter().fold(
        (x, fx),
        |best, cand| if cand.1 > best.1 { cand } else { best },
    )
}
