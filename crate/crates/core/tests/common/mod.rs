//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use entconv::Distribution;
use rand::Rng;

/// All `|p|^n` entries of `p^{⊗n}`, sorted descending.
pub fn brute_spectrum(p: &[f64], n: u32) -> Vec<f64> {
    let mut v = vec![1.0f64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(v.len() * p.len());
        for &a in &v {
            for &b in p {
                next.push(a * b);
            }
        }
        v = next;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// `Σ √(a_i b_i)` over sorted vectors, shorter one padded with zeros.
pub fn brute_fidelity(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        // Kahan summation
        let t = (x * y).sqrt() - c;
        let u = s + t;
        c = (u - s) - t;
        s = u;
    }
    s
}

/// Groups a sorted vector into `(value, count)` runs with relative tolerance.
pub fn runs(v: &[f64], rel: f64) -> Vec<(f64, u64)> {
    let mut out: Vec<(f64, u64)> = Vec::new();
    for &x in v {
        match out.last_mut() {
            Some((h, c)) if (*h - x).abs() <= rel * h.abs() => *c += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Descending prefix-sum test `p ≺ q` on explicit vectors.
pub fn brute_majorizes(p: &[f64], q: &[f64], tol: f64) -> bool {
    let n = p.len().max(q.len());
    let (mut sp, mut sq) = (0.0, 0.0);
    for i in 0..n {
        sp += p.get(i).copied().unwrap_or(0.0);
        sq += q.get(i).copied().unwrap_or(0.0);
        if sp > sq + tol {
            return false;
        }
    }
    true
}

/// `max Σ √(x_i q_i)` over `x ≥ 0`, `Σ x = 1`, with every head sum of `x`
/// at least that of `p` (both descending, padded to equal length).
///
/// Solved by enumerating the set of active head constraints: with those
/// fixed as equalities and the rest dropped, each block between active
/// indices receives its `p`-mass in proportion to `q`. The best candidate
/// that satisfies all dropped constraints is the optimum, since the true
/// optimizer is the relaxed optimum for its own active set.
pub fn kkt_oracle(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let pad = |v: &[f64]| {
        let mut w = v.to_vec();
        w.resize(n, 0.0);
        w
    };
    let (p, q) = (pad(p), pad(q));
    let head = |v: &[f64], k: usize| v[..k].iter().sum::<f64>();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut cuts = vec![0usize];
        for k in 1..n {
            if mask & (1 << (k - 1)) != 0 {
                cuts.push(k);
            }
        }
        cuts.push(n);
        let mut x = vec![0.0; n];
        let mut obj = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mass = head(&p, b) - head(&p, a);
            let qm: f64 = q[a..b].iter().sum();
            if qm > 0.0 {
                for i in a..b {
                    x[i] = mass * q[i] / qm;
                }
                obj += (mass * qm).sqrt();
            } else {
                x[a] = mass;
            }
        }
        let feasible = (1..n).all(|k| head(&x, k) >= head(&p, k) - 1e-12);
        if feasible && obj > best {
            best = obj;
        }
    }
    best
}

/// Random distribution with `1..=max_len` outcomes; sometimes with ties.
pub fn random_distribution<R: Rng>(rng: &mut R, max_len: usize) -> Distribution {
    let len = rng.gen_range(1..=max_len);
    let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
    if len >= 2 && rng.gen_bool(0.2) {
        v[1] = v[0];
    }
    if rng.gen_bool(0.1) {
        v = vec![1.0; len];
    }
    let s: f64 = v.iter().sum();
    Distribution::new(v.iter().map(|x| x / s).collect::<Vec<_>>()).expect("valid")
}
