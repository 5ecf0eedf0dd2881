//! Acceptance run: one PASS/FAIL line per criterion, details indented below.
//!
//! Runs as a plain binary (no libtest harness) so that every criterion is
//! attempted and reported even when an earlier one fails. The full run takes
//! tens of minutes on one core; set ENTCONV_CACHE to reuse spectra across runs.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{
    brute_fidelity, brute_majorizes, brute_spectrum, kkt_oracle, random_distribution, runs,
};
use entconv::asymptotics::{fidelity_limit_of, perturb_solve, CumulantModel};
use entconv::cli::{run_convergence, run_loss, run_scan, run_supplement_regions, RunConfig};
use entconv::numeric::bisect;
use entconv::{
    build_spectrum, conversion_characteristics, fidelity_spectra, majorizes,
    optimal_conversion_fidelity, paper_phi, paper_psi, Distribution, SpectrumOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines
            .push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

fn binary(p: f64) -> Distribution {
    Distribution::new(vec![p, 1.0 - p]).unwrap()
}

fn c1() -> Outcome {
    let mut o = Outcome::new();
    let psi = paper_psi().moments();
    let one = conversion_characteristics(&psi, &paper_phi(1.0).unwrap().moments()).unwrap();
    o.check(
        (one.value - 1.0).abs() <= 1e-9,
        format!("C(psi, phi(1)) = {:.17}", one.value),
    );
    let zero = conversion_characteristics(&psi, &paper_phi(0.0).unwrap().moments()).unwrap();
    o.check(
        zero.value == 0.0,
        format!("C(psi, phi(0)) = {}", zero.value),
    );
    o
}

fn c2() -> Outcome {
    let mut o = Outcome::new();
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let rows = run_scan(&grid, 3000, &RunConfig::default()).unwrap();
    for r in rows {
        let gap = (r.epsilon_n - r.epsilon_asymptotic).abs();
        o.check(
            gap <= 0.05,
            format!(
                "x = {:.1}: eps_3000 = {:.5}, eps_inf = {:.5}, |diff| = {gap:.5}, best m = {}",
                r.x, r.epsilon_n, r.epsilon_asymptotic, r.best_m
            ),
        );
    }
    o
}

fn c3() -> Outcome {
    let mut o = Outcome::new();
    let ladder: Vec<u32> = (0..=12).map(|k| 1 << k).collect();
    let rows = run_convergence(&ladder, &RunConfig::default()).unwrap();
    for r in &rows {
        o.note(format!(
            "n = {:>4}: eps = {:.5}, best m = {}",
            r.n, r.epsilon, r.best_m
        ));
    }
    let at = |n: u32| rows.iter().find(|r| r.n == n).unwrap().epsilon;
    o.check(
        at(4096) < at(256),
        format!("eps_4096 = {:.5} < eps_256 = {:.5}", at(4096), at(256)),
    );
    o.check(
        at(4096) <= 0.25,
        format!("eps_4096 = {:.5} <= 0.25", at(4096)),
    );
    o
}

fn c4() -> Outcome {
    let mut o = Outcome::new();
    let rows = run_supplement_regions(&[0.25, 0.4999]).unwrap();
    o.check(
        rows[0].ks <= 3.0,
        format!("Ks(0.25) = {:.6} <= 3", rows[0].ks),
    );
    let k0 = rows[1].k0;
    o.check(
        k0.ceil() == 3313.0,
        format!("ceil(K0(0.4999)) = {} (K0 = {k0:.4}), want 3313", k0.ceil()),
    );
    o
}

fn c5() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let log = SpectrumOptions::default();
    let exact = SpectrumOptions::exact();
    let (mut worst, mut spectra_ok) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let p = random_distribution(&mut rng, 3);
        let q = random_distribution(&mut rng, 3);
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=10);
        let (bp, bq) = (brute_spectrum(p.probs(), n), brute_spectrum(q.probs(), m));
        let f = fidelity_spectra(
            &build_spectrum(&p, n, &log).unwrap(),
            &build_spectrum(&q, m, &log).unwrap(),
        );
        worst = worst.max((f - brute_fidelity(&bp, &bq)).abs());

        let s = build_spectrum(&p, n, &exact).unwrap();
        let groups = runs(&bp, 1e-12);
        let same = s.len() == groups.len()
            && s.stairs()
                .exact_multiplicities()
                .unwrap()
                .iter()
                .zip(&groups)
                .all(|(a, (_, c))| *a == (*c).into())
            && s.segments()
                .iter()
                .zip(&groups)
                .all(|(seg, (v, _))| (seg.log_value - v.ln()).abs() <= 1e-12);
        spectra_ok += same as usize;
    }
    o.check(
        worst <= 1e-12,
        format!("max |F_grouped - F_brute| over 1000 cases = {worst:.3e}"),
    );
    o.check(
        spectra_ok == 1000,
        format!("exact spectra matching enumeration: {spectra_ok}/1000"),
    );
    o
}

fn m_for(p: &Distribution, q: &Distribution, n: u32, b: f64) -> u32 {
    let ratio = p.moments().entropy / q.moments().entropy;
    (ratio * n as f64 + b * (n as f64).sqrt()).round() as u32
}

fn finite_fidelity(p: &Distribution, q: &Distribution, n: u32, b: f64) -> f64 {
    let o = SpectrumOptions::default();
    let m = m_for(p, q, n, b);
    fidelity_spectra(
        &build_spectrum(p, n, &o).unwrap(),
        &build_spectrum(q, m, &o).unwrap(),
    )
}

fn c6() -> Outcome {
    let mut o = Outcome::new();
    let (p, q) = (binary(0.3), binary(0.2));
    for b in [-1.0, 0.0, 1.0] {
        let lim = fidelity_limit_of(&p, &q, b).unwrap();
        let f = finite_fidelity(&p, &q, 4000, b);
        o.check(
            (f - lim).abs() <= 0.02,
            format!(
                "b = {b:+}: m = {}, F = {f:.5}, limit = {lim:.5}, |diff| = {:.5}",
                m_for(&p, &q, 4000, b),
                (f - lim).abs()
            ),
        );
    }
    o
}

fn c7() -> Outcome {
    let mut o = Outcome::new();
    let (p, q) = (binary(0.3), binary(0.2));
    for n in [2000, 4000] {
        for b in [-1.0, 0.0, 1.0] {
            let lim = fidelity_limit_of(&p, &q, b).unwrap();
            let f = finite_fidelity(&p, &q, n, b);
            o.check(
                f <= lim + 0.03,
                format!("(0.3,0.7) vs (0.2,0.8), n = {n}, b = {b:+}: F = {f:.5}, limit = {lim:.5}"),
            );
        }
    }
    let u = binary(0.5);
    let psi = paper_psi();
    let psi_flat = psi.flatten();
    let lim = fidelity_limit_of(&u, &psi_flat, 0.0).unwrap();
    let opts = SpectrumOptions::default();
    for n in [2000, 4000] {
        let m = m_for(&u, &psi_flat, n, 0.0);
        use entconv::SpectrumSource;
        let f = fidelity_spectra(
            &build_spectrum(&u, n, &opts).unwrap(),
            &psi.spectrum(m, &opts).unwrap(),
        );
        o.check(
            f <= lim + 0.03,
            format!("uniform vs psi, n = {n}, m = {m}: F = {f:.5}, limit = {lim:.5}"),
        );
    }
    o
}

fn c8() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let opts = SpectrumOptions::default();
    let (mut worst, mut iff_ok) = (0.0f64, 0usize);
    for _ in 0..500 {
        let p = random_distribution(&mut rng, 6);
        let q = random_distribution(&mut rng, 6);
        let sp = build_spectrum(&p, 1, &opts).unwrap();
        let sq = build_spectrum(&q, 1, &opts).unwrap();
        let r = optimal_conversion_fidelity(&sp, &sq);
        worst = worst.max((r.fidelity - kkt_oracle(p.probs(), q.probs())).abs());
        let maj = brute_majorizes(p.probs(), q.probs(), 1e-12);
        iff_ok += ((r.fidelity == 1.0) == maj && maj == majorizes(&sp, &sq)) as usize;
    }
    o.check(
        worst <= 1e-6,
        format!("max |F - oracle| over 500 instances = {worst:.3e}"),
    );
    o.check(
        iff_ok == 500,
        format!("F == 1 exactly iff P majorized by Q: {iff_ok}/500"),
    );
    o
}

fn c9() -> Outcome {
    let mut o = Outcome::new();
    let ladder = [256, 512, 1024, 2048];
    let rows = run_loss(
        &paper_psi(),
        &paper_phi(0.5).unwrap(),
        &[0.8, 0.5],
        &ladder,
        &RunConfig::default(),
    )
    .unwrap();
    let col = |g: f64| {
        rows.iter()
            .filter(|r| r.gamma == g)
            .map(|r| r.total_error)
            .collect::<Vec<_>>()
    };
    for r in &rows {
        o.note(format!(
            "gamma = {}, n = {:>4}: m = {}, forward = {:.3e}, backward = {:.3e}, total = {:.3e}",
            r.gamma, r.n, r.m, r.forward, r.backward, r.total_error
        ));
    }
    let (hi, lo) = (col(0.8), col(0.5));
    // exact conversions give zero error, so ties at zero count as decreasing
    o.check(
        hi.windows(2).all(|w| w[1] <= w[0]) && hi[3] < hi[0],
        format!(
            "gamma = 0.8 totals monotonically decreasing: {:?}",
            hi.iter().map(|t| format!("{t:.3e}")).collect::<Vec<_>>()
        ),
    );
    let min_lo = lo.iter().copied().fold(f64::INFINITY, f64::min);
    o.check(
        min_lo >= 2.0 * hi[3],
        format!(
            "min gamma = 0.5 total {min_lo:.5} >= 2 x gamma = 0.8 total at n = 2048 ({:.5})",
            hi[3]
        ),
    );
    o
}

fn c10() -> Outcome {
    let mut o = Outcome::new();
    let p = binary(0.3);
    let model = CumulantModel::new(&p);
    let sd = model.varentropy().sqrt();
    let opts = SpectrumOptions::default();
    let spectra = [400u32, 4000].map(|n| (n, build_spectrum(&p, n, &opts).unwrap()));
    for a in [-sd, 0.0, sd] {
        let gaps: Vec<f64> = spectra
            .iter()
            .map(|(n, s)| {
                let thr = -(*n as f64) * model.entropy() + (*n as f64).sqrt() * a;
                (s.stairs().log_count_at_least(thr) - model.counting_estimate(*n, a).unwrap()).abs()
            })
            .collect();
        o.check(
            gaps[1] < gaps[0],
            format!(
                "a = {a:+.4}: gap(400) = {:.5}, gap(4000) = {:.5}",
                gaps[0], gaps[1]
            ),
        );
    }
    o
}

fn c11() -> Outcome {
    let mut o = Outcome::new();
    let a = [1.0, 0.7, -0.4, 0.3];
    let root = |eps: f64| {
        bisect(
            |x| {
                a.iter()
                    .enumerate()
                    .map(|(i, c)| c * x.powi(i as i32 + 1))
                    .sum::<f64>()
                    - eps
            },
            -0.5,
            0.5,
            0.0,
        )
        .unwrap()
    };
    let eps: Vec<f64> = (0..4).map(|k| 0.02 / (1 << k) as f64).collect();
    for l in [2usize, 3] {
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .map(|&e| {
                (
                    e.ln(),
                    (perturb_solve(&a, e, l).unwrap() - root(e)).abs().ln(),
                )
            })
            .collect();
        let k = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / k,
            pts.iter().map(|p| p.1).sum::<f64>() / k,
        );
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        let want = (l + 1) as f64;
        o.check(
            slope >= want / 2.0 && slope <= want * 2.0,
            format!("order {l}: fitted exponent {slope:.4}, expected {want} within a factor of 2"),
        );
    }
    o
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("conversion characteristics of the preset states", c1),
        (
            "finite-n LU error scan at n = 3000 against the limit curve",
            c2,
        ),
        ("LU error ladder n = 1 .. 4096 for psi vs phi(1)", c3),
        ("supplement thresholds Ks(0.25) and K0(0.4999)", c4),
        ("grouped spectra and fidelity against full enumeration", c5),
        ("finite-n fidelity at n = 4000 against the limit", c6),
        ("finite-n fidelity bounded by the limit at n >= 2000", c7),
        (
            "majorization optimizer against the concave-program oracle",
            c8,
        ),
        ("loss experiments gamma = 0.8 vs gamma = 0.5", c9),
        (
            "counting estimate gap shrinks from n = 400 to n = 4000",
            c10,
        ),
        ("perturbation series order of accuracy", c11),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome {
                pass: false,
                lines: vec![format!("FAIL panicked: {msg}")],
            }
        });
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} criterion {id:>2}: {name} ({secs:.1}s)",
            if outcome.pass { "PASS" } else { "FAIL" }
        );
        for l in &outcome.lines {
            println!("        {l}");
        }
        failed += !outcome.pass as usize;
    }
    println!("acceptance: {failed} criteria failed");
    std::process::exit(if failed > 0 { 1 } else { 0 });
}
