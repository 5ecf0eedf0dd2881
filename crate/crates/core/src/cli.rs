//! Command-line front end and the experiment drivers behind it.
//!
//! Every verb writes a flat table, as CSV with a header row or as a JSON
//! array of objects with the same field names.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::asymptotics::{fidelity_limit, lu_error_limit, CumulantModel};
use crate::cache::SpectrumStore;
use crate::distributions::{
    conversion_characteristics, detect_lattice, paper_phi, paper_psi, Distribution, MomentSummary,
    ProductDistribution, LATTICE_TOLERANCE,
};
use crate::error::{invalid, Error, Result};
use crate::fidelity::{
    fidelity_spectra, lu_error_opt_with, m_window, ScanStrategy, DEFAULT_WINDOW,
};
use crate::majorization::{
    loss_experiment, majorizes, mcre_lower_bound, optimal_conversion_fidelity,
};
use crate::spectrum::{Mode, Spectrum, SpectrumOptions, SpectrumSource};
use crate::supplement::{k_thresholds, supplement_state, SupplementOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ModeArg {
    Exact,
    #[default]
    Logdomain,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Logdomain => Mode::LogDomain,
        }
    }
}

/// Settings shared by all verbs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cache_dir: Option<PathBuf>,
    pub mode: Mode,
    pub window_w: f64,
    pub threads: usize,
    pub output: OutputFormat,
    /// Reserved for randomized sweeps; no verb currently draws random numbers.
    pub seed: u64,
    pub strategy: ScanStrategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cache_dir: None,
            mode: Mode::LogDomain,
            window_w: DEFAULT_WINDOW,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            output: OutputFormat::Csv,
            seed: 0,
            strategy: ScanStrategy::CoarseFine,
        }
    }
}

impl RunConfig {
    fn options(&self) -> SpectrumOptions {
        SpectrumOptions {
            mode: self.mode,
            ..Default::default()
        }
    }

    fn store(&self) -> SpectrumStore {
        SpectrumStore::from_env_or(self.cache_dir.clone())
    }
}

/// A spectrum source routed through the disk cache.
struct Cached<'a, S: SpectrumSource + ?Sized> {
    inner: &'a S,
    store: &'a SpectrumStore,
}

impl<S: SpectrumSource + ?Sized> SpectrumSource for Cached<'_, S> {
    fn distribution(&self) -> Distribution {
        self.inner.distribution()
    }

    fn moments(&self) -> MomentSummary {
        self.inner.moments()
    }

    fn spectrum(&self, n: u32, opts: &SpectrumOptions) -> Result<Spectrum> {
        self.store.get(self.inner, n, opts).map_err(|e| match e {
            Error::Budget {
                what,
                count,
                budget,
            } => Error::Budget {
                what: format!("{what} (copy count {n})"),
                count,
                budget,
            },
            other => other,
        })
    }

    fn display_name(&self) -> String {
        self.inner.display_name()
    }
}

fn cached<'a, S: SpectrumSource + ?Sized>(inner: &'a S, store: &'a SpectrumStore) -> Cached<'a, S> {
    Cached { inner, store }
}

// ---- drivers ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub x: f64,
    pub c: f64,
    pub epsilon_asymptotic: f64,
    pub epsilon_n: f64,
    pub best_m: u32,
}

/// Finite-n LU errors `ε_n(ψ, φ(x))` next to their limits, with the `ψ`
/// spectrum shared across `x`.
pub fn run_scan(x_grid: &[f64], n: u32, cfg: &RunConfig) -> Result<Vec<ScanRow>> {
    let psi = paper_psi();
    let store = cfg.store();
    let opts = cfg.options();
    let source = cached(&psi, &store).spectrum(n, &opts)?;
    let mp = psi.moments();
    let mut rows = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let phi = paper_phi(x)?;
        let mq = phi.moments();
        let c = conversion_characteristics(&mp, &mq)?.value;
        let window = m_window(mp.entropy, mq.entropy, n, cfg.window_w)?;
        let r = lu_error_opt_with(&source, &cached(&phi, &store), window, cfg.strategy, &opts)?;
        rows.push(ScanRow {
            x,
            c,
            epsilon_asymptotic: lu_error_limit(c),
            epsilon_n: r.epsilon,
            best_m: r.best_m,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub epsilon: f64,
    pub best_m: u32,
    pub best_m_over_n: f64,
}

/// `ε_n(ψ, φ(1))` over a ladder of `n`.
pub fn run_convergence(n_list: &[u32], cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    let psi = paper_psi();
    let phi = paper_phi(1.0)?;
    let store = cfg.store();
    let opts = cfg.options();
    let (mp, mq) = (psi.moments(), phi.moments());
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let window = m_window(mp.entropy, mq.entropy, n, cfg.window_w)?;
        let source = cached(&psi, &store).spectrum(n, &opts)?;
        let r = lu_error_opt_with(&source, &cached(&phi, &store), window, cfg.strategy, &opts)?;
        rows.push(ConvergenceRow {
            n,
            epsilon: r.epsilon,
            best_m: r.best_m,
            best_m_over_n: r.best_m as f64 / n as f64,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRow {
    pub r: f64,
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    pub ks: f64,
    pub x_r: f64,
}

pub fn run_supplement_regions(r_grid: &[f64]) -> Result<Vec<RegionRow>> {
    r_grid
        .iter()
        .map(|&r| {
            let k = k_thresholds(r)?;
            Ok(RegionRow {
                r,
                k0: k.k0,
                k1: k.k1,
                k2: k.k2,
                ks: k.ks,
                x_r: k.x_r,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossRow {
    pub gamma: f64,
    pub n: u32,
    pub m: u32,
    pub recovered: u32,
    pub forward: f64,
    pub backward: f64,
    pub total_error: f64,
}

pub fn run_loss<P: SpectrumSource + ?Sized, Q: SpectrumSource + ?Sized>(
    p: &P,
    q: &Q,
    gamma_list: &[f64],
    n_list: &[u32],
    cfg: &RunConfig,
) -> Result<Vec<LossRow>> {
    let store = cfg.store();
    let opts = cfg.options();
    let (p, q) = (cached(p, &store), cached(q, &store));
    let mut rows = Vec::new();
    for &gamma in gamma_list {
        for &n in n_list {
            let r = loss_experiment(&p, &q, n, gamma, &opts)?;
            rows.push(LossRow {
                gamma,
                n,
                m: r.m_used,
                recovered: r.recovered_copies,
                forward: r.forward_error,
                backward: r.backward_error,
                total_error: r.total,
            });
        }
    }
    Ok(rows)
}

// ---- argument parsing ---------------------------------------------------------

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("`{t}` is not a number")))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("range `{s}` must be start:end:step")));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(Error::Parse(format!(
                "range `{s}` is empty or has a non-positive step"
            )));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        // snap to 12 decimals so 0:1:0.1 yields 0.3, not 0.30000000000000004
        Ok((0..=count)
            .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(num)
            .collect()
    }
}

/// A parsed numeric grid argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid_arg(s: &str) -> std::result::Result<Grid, String> {
    parse_grid(s).map(Grid).map_err(|e| e.to_string())
}

fn parse_dist_arg(s: &str) -> std::result::Result<ProductDistribution, String> {
    s.parse::<ProductDistribution>().map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "entconv",
    version,
    about = "Entanglement conversion numerics: sorted i.i.d. spectra, LU/LOCC conversion errors, asymptotic limits and supplemental resources",
    after_help = "Distributions are comma-separated probabilities (\"0.3,0.7\"), products \
                  \"(0.48,0.52)x(0.01,0.99)\", or the presets \"paper-psi\" and \"paper-phi(x)\".\n\
                  Output is CSV with a header row (or a JSON array with the same fields).\n\
                  The ENTCONV_CACHE environment variable overrides --cache-dir."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Directory for cached spectra (opt-in).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Multiplicity arithmetic.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Logdomain)]
    pub mode: ModeArg,

    /// Half-width of the m window in units of sqrt(n).
    #[arg(long, global = true, default_value_t = DEFAULT_WINDOW)]
    pub window: f64,

    /// Scan every m in the window instead of coarse-to-fine.
    #[arg(long, global = true)]
    pub exhaustive: bool,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub output: OutputFormat,

    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl GlobalArgs {
    pub fn config(&self) -> RunConfig {
        let base = RunConfig::default();
        RunConfig {
            cache_dir: self.cache_dir.clone(),
            mode: self.mode.into(),
            window_w: self.window,
            threads: self.threads.unwrap_or(base.threads),
            output: self.output,
            seed: self.seed,
            strategy: if self.exhaustive {
                ScanStrategy::Exhaustive
            } else {
                ScanStrategy::CoarseFine
            },
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropy, varentropy, S/V and lattice verdict.
    /// Columns: distribution,entropy,varentropy,ratio,is_lattice,lattice_span
    Moments {
        #[arg(value_parser = parse_dist_arg)]
        dist: ProductDistribution,
    },
    /// Sorted spectrum of the n-fold product.
    /// Columns: log_value,log_multiplicity,cumulative_log_count
    Spectrum {
        #[arg(value_parser = parse_dist_arg)]
        dist: ProductDistribution,
        #[arg(long)]
        n: u32,
    },
    /// LU fidelity at a fixed m, or the (m, F) scan over the window.
    /// Columns: n,m,fidelity,epsilon,is_best
    LuError {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: ProductDistribution,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Finite-n LU error for the preset pair over a grid of x.
    /// Columns: x,c,epsilon_asymptotic,epsilon_n,best_m
    LuScan {
        #[arg(long, default_value_t = 3000)]
        n: u32,
        /// Grid start:end:step or list.
        #[arg(long, value_parser = parse_grid_arg, default_value = "0:1:0.1")]
        x: Grid,
    },
    /// LU error of the preset pair at x = 1 over a ladder of n.
    /// Columns: n,epsilon,best_m,best_m_over_n
    LuConvergence {
        /// Comma-separated copy counts (default 1,2,4,...,1024).
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
    },
    /// LOCC-optimal conversion of source^n into target^m.
    /// Columns: n,m,fidelity,error,feasible,majorized
    LoccOptimal {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: ProductDistribution,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: u32,
    },
    /// Conversion-recovery lower bound per m.
    /// Columns: n,m,forward,backward,max_error,is_best
    McreBound {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: ProductDistribution,
        #[arg(long)]
        n: u32,
        /// Inclusive m range `lo:hi` (default: the window).
        #[arg(long)]
        m: Option<String>,
    },
    /// Conversion with loss of n^gamma copies, then recovery.
    /// Columns: gamma,n,m,recovered,forward,backward,total_error
    Loss {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: ProductDistribution,
        #[arg(long, value_delimiter = ',')]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
    },
    /// Moments, characteristics and limits; with --n, the counting estimate table.
    /// Columns: s_p,v_p,s_q,v_q,c,degenerate,epsilon_limit,fidelity_limit_b0,source_lattice,target_lattice
    /// Counting columns: n,a,predicted_log_count,exact_log_count
    Asymptotics {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: Option<ProductDistribution>,
        /// Emit the counting table for the source at this n.
        #[arg(long)]
        n: Option<u32>,
        /// Thresholds a (in nats) for the counting table.
        #[arg(long, value_parser = parse_grid_arg, default_value = "-1,0,1")]
        a: Grid,
    },
    /// Thresholds K0, K1, K2, Ks over a grid of r.
    /// Columns: r,k0,k1,k2,ks,x_r
    SupplementCurves {
        #[arg(long, value_parser = parse_grid_arg, default_value = "0.01:0.49:0.01")]
        r: Grid,
    },
    /// Binary supplement p' with C(source x (p',1-p')^k, target) = 1.
    /// Columns: status,p_prime,check,target_ratio,achievable_min,achievable_max
    SupplementSolve {
        #[arg(value_parser = parse_dist_arg)]
        source: ProductDistribution,
        #[arg(value_parser = parse_dist_arg)]
        target: ProductDistribution,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
}

#[derive(Serialize)]
struct MomentsRow {
    distribution: String,
    entropy: f64,
    varentropy: f64,
    ratio: f64,
    is_lattice: bool,
    lattice_span: Option<f64>,
}

#[derive(Serialize)]
struct SpectrumRow {
    log_value: f64,
    log_multiplicity: f64,
    cumulative_log_count: f64,
}

#[derive(Serialize)]
struct LuRow {
    n: u32,
    m: u32,
    fidelity: f64,
    epsilon: f64,
    is_best: bool,
}

#[derive(Serialize)]
struct LoccRow {
    n: u32,
    m: u32,
    fidelity: f64,
    error: f64,
    feasible: bool,
    majorized: bool,
}

#[derive(Serialize)]
struct McreRowOut {
    n: u32,
    m: u32,
    forward: f64,
    backward: f64,
    max_error: f64,
    is_best: bool,
}

#[derive(Serialize)]
struct AsymptoticsRow {
    s_p: f64,
    v_p: f64,
    s_q: Option<f64>,
    v_q: Option<f64>,
    c: Option<f64>,
    degenerate: Option<bool>,
    epsilon_limit: Option<f64>,
    fidelity_limit_b0: Option<f64>,
    source_lattice: bool,
    target_lattice: Option<bool>,
}

#[derive(Serialize)]
struct CountingRow {
    n: u32,
    a: f64,
    predicted_log_count: f64,
    exact_log_count: f64,
}

#[derive(Serialize)]
struct SupplementRow {
    status: &'static str,
    p_prime: Option<f64>,
    check: Option<f64>,
    target_ratio: Option<f64>,
    achievable_min: Option<f64>,
    achievable_max: Option<f64>,
}

/// Writes `rows` in the configured format.
pub fn write_rows<T: Serialize, W: Write>(
    rows: &[T],
    format: OutputFormat,
    out: &mut W,
) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)
                    .map_err(|e| Error::Parse(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)
                .map_err(|e| Error::Parse(format!("json: {e}")))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Runs a parsed command line, writing the table to `out`.
pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let cfg = cli.global.config();
    // the global pool can only be configured once per process
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build_global();
    dispatch(&cli.command, &cfg, out)
}

fn dispatch<W: Write>(cmd: &Command, cfg: &RunConfig, out: &mut W) -> Result<()> {
    let store = cfg.store();
    let opts = cfg.options();
    let fmt = cfg.output;
    match cmd {
        Command::Moments { dist } => {
            let m = dist.moments();
            let lat = detect_lattice(&dist.flatten(), LATTICE_TOLERANCE);
            write_rows(
                &[MomentsRow {
                    distribution: dist.to_string(),
                    entropy: m.entropy,
                    varentropy: m.varentropy,
                    ratio: m.ratio,
                    is_lattice: lat.is_lattice,
                    lattice_span: lat.span,
                }],
                fmt,
                out,
            )
        }
        Command::Spectrum { dist, n } => {
            let s = cached(dist, &store).spectrum(*n, &opts)?;
            let rows: Vec<SpectrumRow> = s
                .segments()
                .iter()
                .zip(s.stairs().cumulative_log_counts())
                .map(|(seg, c)| SpectrumRow {
                    log_value: seg.log_value,
                    log_multiplicity: seg.log_multiplicity,
                    cumulative_log_count: *c,
                })
                .collect();
            write_rows(&rows, fmt, out)
        }
        Command::LuError {
            source,
            target,
            n,
            m,
        } => {
            let sp = cached(source, &store).spectrum(*n, &opts)?;
            let rows = match m {
                Some(m) => {
                    let sq = cached(target, &store).spectrum(*m, &opts)?;
                    let f = fidelity_spectra(&sp, &sq);
                    vec![LuRow {
                        n: *n,
                        m: *m,
                        fidelity: f,
                        epsilon: (1.0 - f).max(0.0).sqrt(),
                        is_best: true,
                    }]
                }
                None => {
                    let window = m_window(
                        source.moments().entropy,
                        target.moments().entropy,
                        *n,
                        cfg.window_w,
                    )?;
                    let r = lu_error_opt_with(
                        &sp,
                        &cached(target, &store),
                        window,
                        cfg.strategy,
                        &opts,
                    )?;
                    r.scanned
                        .iter()
                        .map(|&(m, f)| LuRow {
                            n: *n,
                            m,
                            fidelity: f,
                            epsilon: (1.0 - f).max(0.0).sqrt(),
                            is_best: m == r.best_m,
                        })
                        .collect()
                }
            };
            write_rows(&rows, fmt, out)
        }
        Command::LuScan { n, x } => write_rows(&run_scan(&x.0, *n, cfg)?, fmt, out),
        Command::LuConvergence { n } => {
            let ladder: Vec<u32> = if n.is_empty() {
                (0..=10).map(|k| 1u32 << k).collect()
            } else {
                n.clone()
            };
            write_rows(&run_convergence(&ladder, cfg)?, fmt, out)
        }
        Command::LoccOptimal {
            source,
            target,
            n,
            m,
        } => {
            let sp = cached(source, &store).spectrum(*n, &opts)?;
            let sq = cached(target, &store).spectrum(*m, &opts)?;
            let r = optimal_conversion_fidelity(&sp, &sq);
            write_rows(
                &[LoccRow {
                    n: *n,
                    m: *m,
                    fidelity: r.fidelity,
                    error: r.error,
                    feasible: r.feasible,
                    majorized: majorizes(&sp, &sq),
                }],
                fmt,
                out,
            )
        }
        Command::McreBound {
            source,
            target,
            n,
            m,
        } => {
            let range = match m {
                Some(s) => {
                    let (a, b) = s
                        .split_once(':')
                        .ok_or_else(|| Error::Parse(format!("m range `{s}` must be lo:hi")))?;
                    let p = |t: &str| {
                        t.trim()
                            .parse::<u32>()
                            .map_err(|_| Error::Parse(format!("`{t}` is not a copy count")))
                    };
                    Some((p(a)?, p(b)?))
                }
                None => None,
            };
            let b = mcre_lower_bound(
                &cached(source, &store),
                &cached(target, &store),
                *n,
                range,
                &opts,
            )?;
            let rows: Vec<McreRowOut> = b
                .rows
                .iter()
                .map(|r| McreRowOut {
                    n: *n,
                    m: r.m,
                    forward: r.forward,
                    backward: r.backward,
                    max_error: r.forward.max(r.backward),
                    is_best: r.m == b.best_m,
                })
                .collect();
            write_rows(&rows, fmt, out)
        }
        Command::Loss {
            source,
            target,
            n,
            gamma,
        } => {
            if n.is_empty() || gamma.is_empty() {
                return invalid("loss needs --n and --gamma lists");
            }
            write_rows(&run_loss(source, target, gamma, n, cfg)?, fmt, out)
        }
        Command::Asymptotics {
            source,
            target,
            n,
            a,
        } => {
            if let Some(n) = n {
                let p = source.flatten();
                let model = CumulantModel::new(&p);
                let s = cached(source, &store).spectrum(*n, &opts)?;
                let rows =
                    a.0.iter()
                        .map(|&a| {
                            let thr = -(*n as f64) * model.entropy() + (*n as f64).sqrt() * a;
                            Ok(CountingRow {
                                n: *n,
                                a,
                                predicted_log_count: model.counting_estimate(*n, a)?,
                                exact_log_count: s.stairs().log_count_at_least(thr),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                return write_rows(&rows, fmt, out);
            }
            let mp = source.moments();
            let source_lattice = detect_lattice(&source.flatten(), LATTICE_TOLERANCE).is_lattice;
            let row = match target {
                None => AsymptoticsRow {
                    s_p: mp.entropy,
                    v_p: mp.varentropy,
                    s_q: None,
                    v_q: None,
                    c: None,
                    degenerate: None,
                    epsilon_limit: None,
                    fidelity_limit_b0: None,
                    source_lattice,
                    target_lattice: None,
                },
                Some(t) => {
                    let mq = t.moments();
                    let ch = conversion_characteristics(&mp, &mq)?;
                    AsymptoticsRow {
                        s_p: mp.entropy,
                        v_p: mp.varentropy,
                        s_q: Some(mq.entropy),
                        v_q: Some(mq.varentropy),
                        c: Some(ch.value),
                        degenerate: Some(ch.degenerate),
                        epsilon_limit: Some(lu_error_limit(ch.value)),
                        fidelity_limit_b0: Some(fidelity_limit(&mp, &mq, 0.0)?),
                        source_lattice,
                        target_lattice: Some(
                            detect_lattice(&t.flatten(), LATTICE_TOLERANCE).is_lattice,
                        ),
                    }
                }
            };
            write_rows(&[row], fmt, out)
        }
        Command::SupplementCurves { r } => write_rows(&run_supplement_regions(&r.0)?, fmt, out),
        Command::SupplementSolve { source, target, k } => {
            let row = match supplement_state(&source.moments(), &target.moments(), *k)? {
                SupplementOutcome::Solved { p_prime, check } => SupplementRow {
                    status: "solved",
                    p_prime: Some(p_prime),
                    check: Some(check),
                    target_ratio: None,
                    achievable_min: None,
                    achievable_max: None,
                },
                SupplementOutcome::Infeasible {
                    target_ratio,
                    achievable_min,
                    achievable_max,
                } => SupplementRow {
                    status: "infeasible",
                    p_prime: None,
                    check: None,
                    target_ratio: Some(target_ratio),
                    achievable_min: Some(achievable_min),
                    achievable_max: Some(achievable_max),
                },
            };
            write_rows(&[row], fmt, out)
        }
    }
}

/// Parses `args` and runs; returns the process exit code. Errors go to
/// `err`, tables to `out`.
pub fn main_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
