//! Majorization, LOCC-optimal conversion and the conversion–recovery
//! experiments built from it.
//!
//! The optimal fidelity `max {F(P′, Q) : P ≺ P′}` is computed with `P′`
//! aligned to `Q↓`. Writing `T(u)` for the tail mass of `P` against the tail
//! mass `u` of `Q` (both normalized, tails taken from the small end), the
//! optimizer's tail curve is the greatest convex minorant of `T`; on every
//! linear piece of that minorant `P′` is proportional to `Q`. The fidelity is
//! `Σ √(ΔU ΔT)` over the pieces, evaluated as `1 − ½ Σ (√ΔU − √ΔT)²` so that
//! tiny errors keep their relative precision.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::Distribution;
use crate::error::{invalid, Result};
use crate::fidelity::{align, m_window, Piece, DEFAULT_WINDOW};
use crate::numeric::{LogAccumulator, NeumaierSum};
use crate::spectrum::{Segment, SpectrumOptions, SpectrumSource, Staircase, MERGE_TOLERANCE};

/// Slack allowed in prefix-sum comparisons.
pub const MAJORIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionResult {
    pub fidelity: f64,
    /// Bures error `√(1 − F)`.
    pub error: f64,
    /// Maximizing `P′`, descending.
    pub optimizer: Staircase,
    /// Whether `P ≺ P′` was verified for the returned optimizer.
    pub feasible: bool,
}

fn piece_masses(a: &Staircase, b: &Staircase) -> Vec<(Piece, f64, f64)> {
    let (sa, sb) = (a.segments(), b.segments());
    let mut out = Vec::new();
    align(a, b, |p| {
        let ma = p.a.map_or(0.0, |i| (p.log_len + sa[i].log_value).exp());
        let mb = p.b.map_or(0.0, |j| (p.log_len + sb[j].log_value).exp());
        out.push((p, ma, mb));
    });
    out
}

/// `P ≺ Q`: every prefix sum of `P↓` is at most that of `Q↓`.
pub fn majorizes<A: AsRef<Staircase> + ?Sized, B: AsRef<Staircase> + ?Sized>(p: &A, q: &B) -> bool {
    let (p, q) = (p.as_ref(), q.as_ref());
    let (sa, sb) = (p.segments(), q.segments());
    let (mut hp, mut hq) = (NeumaierSum::new(), NeumaierSum::new());
    let mut ok = true;
    align(p, q, |piece| {
        if let Some(i) = piece.a {
            hp.add((piece.log_len + sa[i].log_value).exp());
        }
        if let Some(j) = piece.b {
            hq.add((piece.log_len + sb[j].log_value).exp());
        }
        if hp.value() > hq.value() + MAJORIZATION_TOLERANCE {
            ok = false;
        }
    });
    ok
}

/// [`majorizes`] on explicit distributions.
pub fn majorizes_distributions(p: &Distribution, q: &Distribution) -> bool {
    majorizes(
        &Staircase::from_distribution(p),
        &Staircase::from_distribution(q),
    )
}

/// Maximizes `F(P′, Q)` over `P ≺ P′`.
pub fn optimal_conversion_fidelity<A: AsRef<Staircase> + ?Sized, B: AsRef<Staircase> + ?Sized>(
    p: &A,
    q: &B,
) -> ConversionResult {
    let (p, q) = (p.as_ref(), q.as_ref());
    if majorizes(p, q) {
        return ConversionResult {
            fidelity: 1.0,
            error: 0.0,
            optimizer: q.clone(),
            feasible: true,
        };
    }
    let pieces = piece_masses(p, q);
    let k = pieces.len();
    let total_t: f64 = pieces.iter().map(|x| x.1).collect::<NeumaierSum>().value();
    let total_u: f64 = pieces.iter().map(|x| x.2).collect::<NeumaierSum>().value();

    // points (u_t, T_t), t = 0..=k, tails accumulated from the small end
    let mut pts = Vec::with_capacity(k + 1);
    let (mut cu, mut ct) = (NeumaierSum::new(), NeumaierSum::new());
    pts.push((0.0, 0.0));
    for (_, ma, mb) in pieces.iter().rev() {
        cu.add(*mb);
        ct.add(*ma);
        pts.push((cu.value() / total_u, ct.value() / total_t));
    }
    pts[k] = (1.0, 1.0);

    let mut hull: Vec<usize> = Vec::new();
    for t in 0..=k {
        while hull.len() >= 2 {
            let o = pts[hull[hull.len() - 2]];
            let a = pts[hull[hull.len() - 1]];
            let b = pts[t];
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(t);
    }

    let sb = q.segments();
    let mut deficit = NeumaierSum::new();
    // optimizer pieces collected tail-first, reversed at the end
    let mut opt_rev: Vec<(f64, f64)> = Vec::new();
    for w in hull.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        // reversed index t corresponds to piece k-1-t
        let block = (k - t1)..(k - t0);
        let du: f64 = pieces[block.clone()]
            .iter()
            .map(|x| x.2 / total_u)
            .collect::<NeumaierSum>()
            .value();
        let dt: f64 = pieces[block.clone()]
            .iter()
            .map(|x| x.1 / total_t)
            .collect::<NeumaierSum>()
            .value();
        let gap = du.sqrt() - dt.sqrt();
        deficit.add(0.5 * gap * gap);
        if dt <= 0.0 || du <= 0.0 {
            continue;
        }
        let log_lambda = (dt / du).ln() - total_u.ln();
        for idx in block.rev() {
            let (piece, _, _) = pieces[idx];
            if let Some(j) = piece.b {
                opt_rev.push((log_lambda + sb[j].log_value, piece.log_len));
            }
        }
    }
    opt_rev.reverse();
    let optimizer = group_pieces(&opt_rev);
    let d = deficit.value().clamp(0.0, 1.0);
    let feasible = majorizes(p, &optimizer);
    ConversionResult {
        fidelity: 1.0 - d,
        error: d.sqrt(),
        optimizer,
        feasible,
    }
}

/// Merges consecutive `(log_value, log_len)` pieces with equal values.
fn group_pieces(pieces: &[(f64, f64)]) -> Staircase {
    let mut segs: Vec<Segment> = Vec::new();
    let mut acc = LogAccumulator::new();
    let mut head = f64::NAN;
    for &(lv, ll) in pieces {
        if head.is_nan() || (head - lv).abs() > MERGE_TOLERANCE * head.abs().max(1.0) {
            if !head.is_nan() {
                segs.push(Segment {
                    log_value: head,
                    log_multiplicity: acc.ln(),
                });
            }
            head = lv;
            acc = LogAccumulator::new();
        }
        acc.add_log(ll);
    }
    if !head.is_nan() {
        segs.push(Segment {
            log_value: head,
            log_multiplicity: acc.ln(),
        });
    }
    Staircase::new(segs, None)
}

/// Ungrouped path: every entry of `p` and `q` is its own piece.
pub fn optimal_conversion_explicit(p: &[f64], q: &[f64]) -> Result<ConversionResult> {
    let pd = Distribution::new(p.to_vec())?;
    let qd = Distribution::new(q.to_vec())?;
    let single = |d: &Distribution| {
        let segs = d
            .probs()
            .iter()
            .map(|&x| Segment {
                log_value: x.ln(),
                log_multiplicity: 0.0,
            })
            .collect();
        Staircase::new(segs, Some(vec![1u32.into(); d.len()]))
    };
    Ok(optimal_conversion_fidelity(&single(&pd), &single(&qd)))
}

/// Per-`m` row of the conversion–recovery bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McreRow {
    pub m: u32,
    pub forward: f64,
    pub backward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McreBound {
    pub n: u32,
    pub bound: f64,
    pub best_m: u32,
    pub rows: Vec<McreRow>,
}

/// `min_m max(forward, backward)` with both directions LOCC-optimal.
/// `m_range` defaults to `⌈(S_P/S_Q)n ± 10√n⌉`.
pub fn mcre_lower_bound<P: SpectrumSource + ?Sized, Q: SpectrumSource + ?Sized>(
    p: &P,
    q: &Q,
    n: u32,
    m_range: Option<(u32, u32)>,
    opts: &SpectrumOptions,
) -> Result<McreBound> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let (lo, hi) = match m_range {
        Some(r) => r,
        None => m_window(p.moments().entropy, q.moments().entropy, n, DEFAULT_WINDOW)?,
    };
    if lo == 0 || hi < lo {
        return invalid(format!("empty m range [{lo}, {hi}]"));
    }
    let sp = p.spectrum(n, opts)?;
    let ms: Vec<u32> = (lo..=hi).collect();
    let rows: Vec<McreRow> = ms
        .par_iter()
        .map(|&m| {
            let sq = q.spectrum(m, opts)?;
            Ok(McreRow {
                m,
                forward: optimal_conversion_fidelity(&sp, &sq).error,
                backward: optimal_conversion_fidelity(&sq, &sp).error,
            })
        })
        .collect::<Result<_>>()?;
    let best = rows
        .iter()
        .fold(None::<&McreRow>, |best, r| match best {
            Some(b) if b.forward.max(b.backward) <= r.forward.max(r.backward) => Some(b),
            _ => Some(r),
        })
        .expect("nonempty range");
    Ok(McreBound {
        n,
        bound: best.forward.max(best.backward),
        best_m: best.m,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRecord {
    pub n: u32,
    pub gamma: f64,
    pub m_used: u32,
    pub recovered_copies: u32,
    pub forward_error: f64,
    pub backward_error: f64,
    pub total: f64,
}

/// Converts `P^{⊗n}` to `Q^{⊗m}` with `m = ⌈(S_P/S_Q)(n − ½n^γ)⌉`, then
/// recovers `P^{⊗(n − ⌈n^γ⌉)}`, both LOCC-optimally.
pub fn loss_experiment<P: SpectrumSource + ?Sized, Q: SpectrumSource + ?Sized>(
    p: &P,
    q: &Q,
    n: u32,
    gamma: f64,
    opts: &SpectrumOptions,
) -> Result<LossRecord> {
    if !(0.0..1.0).contains(&gamma) {
        return invalid(format!("gamma must lie in [0, 1), got {gamma}"));
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let (s_p, s_q) = (p.moments().entropy, q.moments().entropy);
    if !(s_q > 0.0) {
        return invalid("target distribution has zero entropy");
    }
    let ng = (n as f64).powf(gamma);
    let m = (s_p / s_q * (n as f64 - 0.5 * ng)).ceil();
    let lost = ng.ceil();
    let recovered = n as f64 - lost;
    if recovered < 1.0 {
        return invalid(format!(
            "recovered copy count {recovered} < 1 (n = {n}, gamma = {gamma})"
        ));
    }
    if m < 1.0 {
        return invalid(format!("intermediate copy count {m} < 1"));
    }
    let (m, recovered) = (m as u32, recovered as u32);
    let sp = p.spectrum(n, opts)?;
    let sq = q.spectrum(m, opts)?;
    let forward = optimal_conversion_fidelity(&sp, &sq).error;
    drop(sp);
    let back_target = p.spectrum(recovered, opts)?;
    let backward = optimal_conversion_fidelity(&sq, &back_target).error;
    Ok(LossRecord {
        n,
        gamma,
        m_used: m,
        recovered_copies: recovered,
        forward_error: forward,
        backward_error: backward,
        total: forward + backward,
    })
}
