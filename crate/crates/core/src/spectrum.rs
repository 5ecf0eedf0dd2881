//! Sorted spectra of i.i.d. products `P^{⊗n}` in grouped form.
//!
//! The `|P|^n` entries of `P^{⊗n}` take one value per type class (empirical
//! histogram of the outcome sequence), so the descending-sorted vector is
//! stored as a list of `(value, multiplicity)` segments in log form. Values
//! that coincide within [`MERGE_TOLERANCE`] are merged into one segment.
//!
//! Two multiplicity modes exist:
//! * [`Mode::LogDomain`]: multiplicities as `ln` of multinomials via a
//!   compensated log-factorial table;
//! * [`Mode::Exact`]: additionally keeps arbitrary-precision counts, used by
//!   oracle runs at small `n`.
//!
//! Products of small factors are handled by [`merge_product`], which makes
//! spectra of e.g. binary⊗binary states feasible for `n` in the thousands
//! (at most `(n+1)^2` segments instead of `C(n+3,3)` type classes).

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::slice::ParallelSliceMut;
use serde::Serialize;

use crate::distributions::{tensor, Distribution, MomentSummary, ProductDistribution};
use crate::error::{invalid, Error, Result};
use crate::numeric::{LnFactorials, LogAccumulator};

/// Relative tolerance (in log-value) below which two values are one segment.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Default cap on type classes (build) or segment pairs (merge); exact mode
/// charges each entry by the size of its multiplicity.
pub const DEFAULT_BUDGET: u128 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    #[default]
    LogDomain,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => write!(f, "exact"),
            Mode::LogDomain => write!(f, "logdomain"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "logdomain" | "log" => Ok(Mode::LogDomain),
            other => Err(Error::Parse(format!(
                "unknown mode `{other}` (exact|logdomain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub mode: Mode,
    pub budget: u128,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            mode: Mode::LogDomain,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SpectrumOptions {
    pub fn exact() -> Self {
        Self {
            mode: Mode::Exact,
            ..Self::default()
        }
    }
}

/// One group of equal entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub log_value: f64,
    pub log_multiplicity: f64,
}

/// A non-increasing step function over the counting index: segments plus
/// prefix counts. Spectra and majorization optimizers share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    segments: Vec<Segment>,
    cumulative: Vec<f64>,
    exact: Option<Vec<BigUint>>,
    exact_cumulative: Option<Vec<BigUint>>,
}

impl Staircase {
    /// Builds prefix counts for already ordered segments.
    pub fn new(segments: Vec<Segment>, exact: Option<Vec<BigUint>>) -> Self {
        let mut cumulative = Vec::with_capacity(segments.len());
        let mut acc = LogAccumulator::new();
        for s in &segments {
            acc.add_log(s.log_multiplicity);
            cumulative.push(acc.ln());
        }
        let exact_cumulative = exact.as_ref().map(|ms| {
            let mut run = BigUint::zero();
            ms.iter()
                .map(|m| {
                    run += m;
                    run.clone()
                })
                .collect()
        });
        Self {
            segments,
            cumulative,
            exact,
            exact_cumulative,
        }
    }

    /// Groups an explicit probability vector (n = 1 spectrum).
    pub fn from_distribution(p: &Distribution) -> Self {
        let mut segs = Vec::new();
        let mut counts = Vec::new();
        for (v, c) in p.distinct_values() {
            segs.push(Segment {
                log_value: v.ln(),
                log_multiplicity: (c as f64).ln(),
            });
            counts.push(BigUint::from(c));
        }
        Self::new(segs, Some(counts))
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Log prefix counts; entry `i` is `ln` of the number of entries in
    /// segments `0..=i`.
    pub fn cumulative_log_counts(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn exact_multiplicities(&self) -> Option<&[BigUint]> {
        self.exact.as_deref()
    }

    pub fn exact_cumulative(&self) -> Option<&[BigUint]> {
        self.exact_cumulative.as_deref()
    }

    pub fn total_log_count(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `ln Σ multiplicity · value`, 0 for a normalized distribution.
    pub fn log_total_mass(&self) -> f64 {
        let mut acc = LogAccumulator::new();
        for s in &self.segments {
            acc.add_log(s.log_value + s.log_multiplicity);
        }
        acc.ln()
    }

    /// `ln` of the number of entries whose log-value is at least `threshold`.
    pub fn log_count_at_least(&self, threshold: f64) -> f64 {
        let k = self.segments.partition_point(|s| s.log_value >= threshold);
        if k == 0 {
            f64::NEG_INFINITY
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Fully expanded descending vector; only for small spectra.
    pub fn expand(&self) -> Result<Vec<f64>> {
        let total = self.total_log_count();
        if total > (5_000_000f64).ln() {
            return invalid("spectrum too large to expand");
        }
        let mut out = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            let count = match &self.exact {
                Some(ex) => crate::numeric::biguint_ln(&ex[i]).exp().round() as usize,
                None => s.log_multiplicity.exp().round() as usize,
            };
            out.extend(std::iter::repeat_n(s.log_value.exp(), count));
        }
        Ok(out)
    }
}

/// Sorted spectrum of `base^{⊗n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    base: Distribution,
    n: u32,
    mode: Mode,
    stairs: Staircase,
}

impl Spectrum {
    pub(crate) fn from_parts(base: Distribution, n: u32, mode: Mode, stairs: Staircase) -> Self {
        Self {
            base,
            n,
            mode,
            stairs,
        }
    }

    pub fn base(&self) -> &Distribution {
        &self.base
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn stairs(&self) -> &Staircase {
        &self.stairs
    }

    pub fn segments(&self) -> &[Segment] {
        self.stairs.segments()
    }

    pub fn len(&self) -> usize {
        self.stairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stairs.is_empty()
    }

    pub fn cumulative_log_count(&self, segment_index: usize) -> Result<f64> {
        self.stairs
            .cumulative
            .get(segment_index)
            .copied()
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "segment index {segment_index} out of range (0..{})",
                    self.len()
                ))
            })
    }

    /// Checks normalization, total count and strict ordering.
    pub fn check_invariants(&self) -> Result<()> {
        let mass = self.stairs.log_total_mass();
        if mass.abs() > 1e-9 {
            return invalid(format!("spectrum mass is exp({mass}), not 1"));
        }
        let expect = self.n as f64 * (self.base.len() as f64).ln();
        let total = self.stairs.total_log_count();
        if (total - expect).abs() > 1e-9 * expect.abs().max(1.0) {
            return invalid(format!("total log count {total}, expected {expect}"));
        }
        if self
            .segments()
            .windows(2)
            .any(|w| w[1].log_value >= w[0].log_value)
        {
            return invalid("segments are not strictly descending");
        }
        if self.segments().iter().any(|s| s.log_multiplicity < 0.0) {
            return invalid("negative log multiplicity");
        }
        Ok(())
    }
}

impl AsRef<Staircase> for Spectrum {
    fn as_ref(&self) -> &Staircase {
        &self.stairs
    }
}

impl AsRef<Staircase> for Staircase {
    fn as_ref(&self) -> &Staircase {
        self
    }
}

/// Budget units per exact entry: 64-bit words for a multiplicity of at most
/// `len^n`, counted twice for the cumulative sums.
fn exact_words(n: u32, len: usize) -> u128 {
    let bits = n as f64 * (len.max(2) as f64).log2();
    2 * ((bits / 64.0).ceil() as u128 + 1)
}

/// `C(n + k - 1, k - 1)` with saturation.
fn composition_count(n: u32, k: usize) -> u128 {
    if k <= 1 {
        return 1;
    }
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = match c.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

/// Unsorted `(log_value, log_multiplicity)` entries; exact counts ride along
/// only in exact mode so the log-domain sort moves 16-byte records.
enum Entries {
    Log(Vec<(f64, f64)>),
    Exact(Vec<(f64, f64, BigUint)>),
}

impl Entries {
    fn with_capacity(cap: usize, exact: bool) -> Self {
        if exact {
            Entries::Exact(Vec::with_capacity(cap))
        } else {
            Entries::Log(Vec::with_capacity(cap))
        }
    }

    fn push(&mut self, lv: f64, lm: f64, exact: impl FnOnce() -> BigUint) {
        match self {
            Entries::Log(v) => v.push((lv, lm)),
            Entries::Exact(v) => v.push((lv, lm, exact())),
        }
    }

    /// Sorts descending by value (ties by multiplicity, so the order is
    /// total and independent of the parallel sort) and merges equal values.
    fn into_staircase(self) -> Staircase {
        match self {
            Entries::Log(mut v) => {
                v.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
                let segs = merge_runs(v.iter().map(|e| (e.0, e.1)), |_, _| {});
                Staircase::new(segs, None)
            }
            Entries::Exact(mut v) => {
                v.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
                let mut counts: Vec<BigUint> = Vec::new();
                let segs = merge_runs(v.iter().map(|e| (e.0, e.1)), |k, idx| {
                    if counts.len() <= k {
                        counts.push(BigUint::zero());
                    }
                    counts[k] += &v[idx].2;
                });
                Staircase::new(segs, Some(counts))
            }
        }
    }
}

/// Groups sorted entries whose values agree within [`MERGE_TOLERANCE`]
/// (relative for large magnitudes); `on_entry(segment, entry)` is told where
/// each entry went.
fn merge_runs(
    entries: impl Iterator<Item = (f64, f64)>,
    mut on_entry: impl FnMut(usize, usize),
) -> Vec<Segment> {
    let mut segs: Vec<Segment> = Vec::new();
    let mut acc = LogAccumulator::new();
    let mut head = f64::NAN;
    for (idx, (lv, lm)) in entries.enumerate() {
        let same = !head.is_nan() && (head - lv).abs() <= MERGE_TOLERANCE * head.abs().max(1.0);
        if !same {
            if !head.is_nan() {
                segs.push(Segment {
                    log_value: head,
                    log_multiplicity: acc.ln(),
                });
            }
            head = lv;
            acc = LogAccumulator::new();
        }
        acc.add_log(lm);
        on_entry(segs.len(), idx);
    }
    if !head.is_nan() {
        segs.push(Segment {
            log_value: head,
            log_multiplicity: acc.ln(),
        });
    }
    segs
}

/// Builds the spectrum of `p^{⊗n}` by enumerating type classes over the
/// distinct values of `p`.
pub fn build_spectrum(p: &Distribution, n: u32, opts: &SpectrumOptions) -> Result<Spectrum> {
    if n == 0 {
        return invalid("number of copies must be at least 1");
    }
    let classes = p.distinct_values();
    let k = classes.len();
    let exact = opts.mode == Mode::Exact;
    let count = composition_count(n, k);
    let cost = if exact {
        count.saturating_mul(exact_words(n, p.len()))
    } else {
        count
    };
    if cost > opts.budget {
        return Err(Error::Budget {
            what: format!(
                "the {} spectrum of a {}-outcome distribution at n = {n}",
                opts.mode,
                p.len()
            ),
            count: cost,
            budget: opts.budget,
        });
    }
    let lf = LnFactorials::new(n as usize);
    let logs: Vec<f64> = classes.iter().map(|(v, _)| v.ln()).collect();
    let log_reps: Vec<f64> = classes.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let big = exact.then(|| BigFactorials::new(n as usize));

    let mut entries = Entries::with_capacity(count as usize, exact);
    let mut ks = vec![0u32; k];
    enumerate_compositions(n, &mut ks, 0, &mut |ks| {
        let mut lv = 0.0;
        let mut lm = lf.get(n as usize);
        for (j, &kj) in ks.iter().enumerate() {
            if kj > 0 {
                lv += kj as f64 * logs[j];
                lm += kj as f64 * log_reps[j] - lf.get(kj as usize);
            }
        }
        entries.push(lv, lm, || {
            let b = big.as_ref().expect("exact mode");
            let mut m = b.multinomial(n as usize, ks);
            for (j, &kj) in ks.iter().enumerate() {
                if classes[j].1 > 1 {
                    m *= BigUint::from(classes[j].1).pow(kj);
                }
            }
            m
        });
    });
    let stairs = entries.into_staircase();
    Ok(Spectrum::from_parts(p.clone(), n, opts.mode, stairs))
}

fn enumerate_compositions<F: FnMut(&[u32])>(left: u32, ks: &mut Vec<u32>, pos: usize, f: &mut F) {
    if pos + 1 == ks.len() {
        ks[pos] = left;
        f(ks);
        return;
    }
    for k in (0..=left).rev() {
        ks[pos] = k;
        enumerate_compositions(left - k, ks, pos + 1, f);
    }
}

struct BigFactorials(Vec<BigUint>);

impl BigFactorials {
    fn new(n: usize) -> Self {
        let mut v = Vec::with_capacity(n + 1);
        v.push(BigUint::one());
        for i in 1..=n {
            let next = &v[i - 1] * BigUint::from(i);
            v.push(next);
        }
        Self(v)
    }

    fn multinomial(&self, n: usize, ks: &[u32]) -> BigUint {
        let denom = ks
            .iter()
            .fold(BigUint::one(), |acc, &k| acc * &self.0[k as usize]);
        &self.0[n] / denom
    }
}

/// Spectrum of `(P_A ⊗ P_B)^{⊗n}` from the spectra of the two factors.
pub fn merge_product(a: &Spectrum, b: &Spectrum, opts: &SpectrumOptions) -> Result<Spectrum> {
    if a.n != b.n {
        return invalid(format!("copy counts differ: {} vs {}", a.n, b.n));
    }
    let pairs = a.len() as u128 * b.len() as u128;
    let exact = a.stairs.exact.is_some() && b.stairs.exact.is_some();
    let cost = if exact {
        pairs.saturating_mul(exact_words(a.n, a.base.len() * b.base.len()))
    } else {
        pairs
    };
    if cost > opts.budget {
        return Err(Error::Budget {
            what: format!("merging spectra with {} and {} segments", a.len(), b.len()),
            count: cost,
            budget: opts.budget,
        });
    }
    let mut entries = Entries::with_capacity(pairs as usize, exact);
    for (i, sa) in a.segments().iter().enumerate() {
        for (j, sb) in b.segments().iter().enumerate() {
            entries.push(
                sa.log_value + sb.log_value,
                sa.log_multiplicity + sb.log_multiplicity,
                || {
                    let ea = &a.stairs.exact.as_ref().expect("exact")[i];
                    let eb = &b.stairs.exact.as_ref().expect("exact")[j];
                    ea * eb
                },
            );
        }
    }
    let stairs = entries.into_staircase();
    let mode = if exact { Mode::Exact } else { Mode::LogDomain };
    Ok(Spectrum::from_parts(
        tensor(&a.base, &b.base),
        a.n,
        mode,
        stairs,
    ))
}

/// Anything that can produce the sorted spectrum of its `n`-fold product.
pub trait SpectrumSource: Sync {
    /// The flattened distribution.
    fn distribution(&self) -> Distribution;

    fn moments(&self) -> MomentSummary;

    fn spectrum(&self, n: u32, opts: &SpectrumOptions) -> Result<Spectrum>;

    fn display_name(&self) -> String;
}

impl SpectrumSource for Distribution {
    fn distribution(&self) -> Distribution {
        self.clone()
    }

    fn moments(&self) -> MomentSummary {
        crate::distributions::moments(self)
    }

    fn spectrum(&self, n: u32, opts: &SpectrumOptions) -> Result<Spectrum> {
        build_spectrum(self, n, opts)
    }

    fn display_name(&self) -> String {
        self.to_string()
    }
}

impl SpectrumSource for ProductDistribution {
    fn distribution(&self) -> Distribution {
        self.flatten()
    }

    fn moments(&self) -> MomentSummary {
        ProductDistribution::moments(self)
    }

    /// Builds each factor's spectrum and merges them left to right.
    fn spectrum(&self, n: u32, opts: &SpectrumOptions) -> Result<Spectrum> {
        let factors = self.factors();
        let mut acc = build_spectrum(&factors[0], n, opts)?;
        for f in &factors[1..] {
            let next = build_spectrum(f, n, opts)?;
            acc = merge_product(&acc, &next, opts)?;
        }
        Ok(acc)
    }

    fn display_name(&self) -> String {
        self.to_string()
    }
}
