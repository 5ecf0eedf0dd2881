//! Probability vectors of squared Schmidt coefficients and the quantities
//! computed directly from them: entropy, varentropy, the conversion
//! characteristics, lattice detection and tensor products.
//!
//! Natural logarithms are used throughout.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::numeric::{neumaier_sum, NeumaierSum};

/// Allowed deviation of `Σ p_i` from 1.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Default tolerance (in lattice units) for [`detect_lattice`].
pub const LATTICE_TOLERANCE: f64 = 1e-9;

/// Largest denominator tried in the continued-fraction test of [`detect_lattice`].
pub const LATTICE_MAX_DENOMINATOR: u64 = 1_000_000;

/// Coefficients of the two-qubit-pair example family.
pub const PHI_A: f64 = 0.225;
pub const PHI_B: f64 = 0.1996180626854719;

/// A finite probability vector in descending order with strictly positive
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    label: Option<String>,
}

impl Distribution {
    /// Validates, drops zero entries and sorts descending.
    pub fn new(probs: impl Into<Vec<f64>>) -> Result<Self> {
        let mut probs: Vec<f64> = probs.into();
        if probs.is_empty() {
            return invalid("a distribution needs at least one entry");
        }
        if let Some(bad) = probs
            .iter()
            .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return invalid(format!("probability {bad} is outside [0, 1]"));
        }
        let total = neumaier_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return invalid(format!("probabilities sum to {total}, not 1"));
        }
        probs.retain(|&p| p > 0.0);
        probs.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { probs, label: None })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// The uniform distribution on `d` outcomes.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("uniform distribution needs d >= 1");
        }
        Self::new(vec![1.0 / d as f64; d])
    }

    /// The binary distribution `(p, 1-p)`.
    pub fn binary(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("binary parameter {p} outside [0, 1]"));
        }
        Self::new(vec![p, 1.0 - p])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.len() == 1
    }

    /// True when every entry is identical (zero varentropy).
    pub fn is_uniform(&self) -> bool {
        self.probs.first() == self.probs.last()
    }

    /// Distinct probability values with the number of entries carrying each.
    pub fn distinct_values(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &p in &self.probs {
            match out.last_mut() {
                Some((v, c)) if *v == p => *c += 1,
                _ => out.push((p, 1)),
            }
        }
        out
    }

    /// SHA-256 over the entry count and little-endian entries.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.probs.len() as u64).to_le_bytes());
        for p in &self.probs {
            h.update(p.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn moments(&self) -> MomentSummary {
        moments(self)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = &self.label {
            return write!(f, "{l}");
        }
        let parts: Vec<String> = self.probs.iter().map(|p| format!("{p}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A distribution given as a tensor factorization into small factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    factors: Vec<Distribution>,
    label: Option<String>,
}

impl ProductDistribution {
    pub fn new(factors: Vec<Distribution>) -> Result<Self> {
        if factors.is_empty() {
            return invalid("a product needs at least one factor");
        }
        let flat = factors
            .iter()
            .skip(1)
            .fold(factors[0].clone(), |acc, f| tensor(&acc, f));
        // the flattened vector must itself be valid
        Distribution::new(flat.probs.clone())?;
        Ok(Self {
            factors,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn factors(&self) -> &[Distribution] {
        &self.factors
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Outer product of all factors, sorted descending.
    pub fn flatten(&self) -> Distribution {
        let mut d = self
            .factors
            .iter()
            .skip(1)
            .fold(self.factors[0].clone(), |acc, f| tensor(&acc, f));
        d.label = self.label.clone();
        d
    }

    /// Entropy and varentropy are additive, so they come from the factors.
    pub fn moments(&self) -> MomentSummary {
        let mut s = NeumaierSum::new();
        let mut v = NeumaierSum::new();
        for f in &self.factors {
            let m = moments(f);
            s.add(m.entropy);
            v.add(m.varentropy);
        }
        MomentSummary::from_parts(s.value(), v.value())
    }
}

impl From<Distribution> for ProductDistribution {
    fn from(d: Distribution) -> Self {
        let label = d.label.clone();
        Self {
            factors: vec![d],
            label,
        }
    }
}

impl fmt::Display for ProductDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = &self.label {
            return write!(f, "{l}");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|d| {
                let inner: Vec<String> = d.probs.iter().map(|p| format!("{p}")).collect();
                format!("({})", inner.join(","))
            })
            .collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Parses `"p1,p2,..."`, a product `"(a,b)x(c,d)"`, or a preset
/// (`paper-psi`, `paper-phi(x)`).
impl FromStr for ProductDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(Error::Parse("empty distribution".into()));
        }
        if t == "paper-psi" {
            return Ok(paper_psi());
        }
        if let Some(rest) = t.strip_prefix("paper-phi(") {
            let arg = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unterminated preset `{s}`")))?;
            let x: f64 = arg
                .parse()
                .map_err(|_| Error::Parse(format!("bad preset argument `{arg}`")))?;
            return paper_phi(x);
        }
        if t.starts_with('(') {
            let factors = t
                .split(['x', '⊗'])
                .map(|part| {
                    let inner = part
                        .strip_prefix('(')
                        .and_then(|p| p.strip_suffix(')'))
                        .ok_or_else(|| Error::Parse(format!("bad factor `{part}` in `{s}`")))?;
                    Distribution::new(parse_list(inner)?)
                })
                .collect::<Result<Vec<_>>>()?;
            return ProductDistribution::new(factors);
        }
        Ok(Distribution::new(parse_list(&t)?)?.into())
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{x}` is not a number")))
        })
        .collect()
}

/// Initial state of the two-qubit-pair example: `(0.48,0.52)⊗(0.01,0.99)`,
/// i.e. squared Schmidt coefficients 0.0048, 0.4752, 0.0052, 0.5148.
pub fn paper_psi() -> ProductDistribution {
    let f1 = Distribution::new(vec![0.48, 0.52]).expect("valid preset");
    let f2 = Distribution::new(vec![0.01, 0.99]).expect("valid preset");
    ProductDistribution::new(vec![f1, f2])
        .expect("valid preset")
        .with_label("paper-psi")
}

/// Target family `(1/2 - a x, 1/2 + a x) ⊗ (1/2 - b x, 1/2 + b x)` for
/// `0 <= x <= 1` with `a = 0.225`, `b = 0.1996180626854719`.
pub fn paper_phi(x: f64) -> Result<ProductDistribution> {
    if !(0.0..=1.0).contains(&x) {
        return invalid(format!("paper-phi parameter {x} outside [0, 1]"));
    }
    let f1 = Distribution::new(vec![0.5 - PHI_A * x, 0.5 + PHI_A * x])?;
    let f2 = Distribution::new(vec![0.5 - PHI_B * x, 0.5 + PHI_B * x])?;
    Ok(ProductDistribution::new(vec![f1, f2])?.with_label(format!("paper-phi({x})")))
}

/// Entropy `S`, varentropy `V` and their ratio `S/V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSummary {
    pub entropy: f64,
    pub varentropy: f64,
    /// `S/V`; `+inf` when `V = 0 < S`, NaN for a point mass.
    pub ratio: f64,
}

impl MomentSummary {
    fn from_parts(entropy: f64, varentropy: f64) -> Self {
        let ratio = if varentropy > 0.0 {
            entropy / varentropy
        } else if entropy > 0.0 {
            f64::INFINITY
        } else {
            f64::NAN
        };
        Self {
            entropy,
            varentropy,
            ratio,
        }
    }
}

pub fn moments(p: &Distribution) -> MomentSummary {
    let entropy = neumaier_sum(p.probs.iter().map(|&x| -x * x.ln())).max(0.0);
    let varentropy = if p.is_uniform() {
        0.0
    } else {
        neumaier_sum(p.probs.iter().map(|&x| {
            let d = -x.ln() - entropy;
            x * d * d
        }))
    };
    MomentSummary::from_parts(entropy, varentropy)
}

/// Value of the conversion characteristics together with a flag for the
/// both-uniform case, which is set to 1 by convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Characteristics {
    pub value: f64,
    pub degenerate: bool,
}

/// `C = (S_P/V_P) / (S_Q/V_Q)`.
///
/// `V_Q = 0 < V_P` gives 0, `V_P = 0 < V_Q` gives `+inf`, both zero gives 1
/// with `degenerate` set. Point masses are rejected.
pub fn conversion_characteristics(p: &MomentSummary, q: &MomentSummary) -> Result<Characteristics> {
    if p.entropy <= 0.0 || q.entropy <= 0.0 {
        return invalid("conversion characteristics undefined for a point mass (no entanglement)");
    }
    let (vp, vq) = (p.varentropy, q.varentropy);
    let (value, degenerate) = match (vp > 0.0, vq > 0.0) {
        (true, true) => ((p.entropy / vp) / (q.entropy / vq), false),
        (true, false) => (0.0, false),
        (false, true) => (f64::INFINITY, false),
        (false, false) => (1.0, true),
    };
    Ok(Characteristics { value, degenerate })
}

/// Convenience wrapper over two distributions.
pub fn characteristics_of(p: &Distribution, q: &Distribution) -> Result<Characteristics> {
    conversion_characteristics(&moments(p), &moments(q))
}

/// Outcome of the lattice test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeVerdict {
    pub is_lattice: bool,
    /// Offset `x` (the largest log-probability) when lattice.
    pub offset: Option<f64>,
    /// Largest span `d` found; `None` when all log-probabilities coincide
    /// (every span works) or when not lattice.
    pub span: Option<f64>,
}

/// Searches for `(x, d)` with every `(ln p_i - x)/d` within `tol` of an integer.
///
/// Pairwise log-differences are reduced to a common span one at a time: the
/// ratio of each difference to the current span is tested for a rational
/// relation via its continued-fraction convergents, with the accumulated
/// denominator bounded by [`LATTICE_MAX_DENOMINATOR`].
pub fn detect_lattice(p: &Distribution, tol: f64) -> LatticeVerdict {
    let not_lattice = LatticeVerdict {
        is_lattice: false,
        offset: None,
        span: None,
    };
    let distinct = p.distinct_values();
    let logs: Vec<f64> = distinct.iter().map(|(v, _)| v.ln()).collect();
    let x = logs[0];
    if logs.len() == 1 {
        return LatticeVerdict {
            is_lattice: true,
            offset: Some(x),
            span: None,
        };
    }
    let deltas: Vec<f64> = logs[1..].iter().map(|l| x - l).collect();
    let mut span = deltas[0];
    let mut total_q: u64 = 1;
    for &delta in &deltas[1..] {
        let ratio = delta / span;
        let budget = LATTICE_MAX_DENOMINATOR / total_q;
        match rational_denominator(ratio, tol, budget) {
            Some(q) => {
                span /= q as f64;
                total_q *= q;
            }
            None => return not_lattice,
        }
    }
    let on_lattice = deltas.iter().all(|d| {
        let u = d / span;
        (u - u.round()).abs() <= tol
    });
    if !on_lattice {
        return not_lattice;
    }
    LatticeVerdict {
        is_lattice: true,
        offset: Some(x),
        span: Some(span),
    }
}

/// Smallest convergent denominator `q <= max_q` with `|r q - round(r q)| <= tol`.
fn rational_denominator(r: f64, tol: f64, max_q: u64) -> Option<u64> {
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut frac = r - r.floor();
    loop {
        let scaled = r * q as f64;
        if (scaled - scaled.round()).abs() <= tol {
            return Some(q);
        }
        if frac == 0.0 {
            return None;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let next = (a as u64).checked_mul(q)?.checked_add(q_prev)?;
        if next > max_q {
            return None;
        }
        q_prev = q;
        q = next;
    }
}

/// Outer product, sorted descending; equal values are kept as separate entries.
pub fn tensor(p: &Distribution, q: &Distribution) -> Distribution {
    let mut probs = Vec::with_capacity(p.len() * q.len());
    for &a in &p.probs {
        for &b in &q.probs {
            probs.push(a * b);
        }
    }
    probs.sort_by(|a, b| b.total_cmp(a));
    Distribution { probs, label: None }
}
