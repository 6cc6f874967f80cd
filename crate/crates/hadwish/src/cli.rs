//! Command-line front end: parses configs, dispatches experiments, persists
//! JSON/CSV results.
//!
//! Exit codes: 0 success, 1 invalid arguments or runtime failure, 2 violated
//! deterministic invariant (the rank-perturbation bound). Results go to the
//! `--out` path or stdout. Grids accept `a,b,c` lists and `lo:hi:step`
//! ranges. Floats are serialized with 17 significant digits so JSON output
//! is byte-stable and round-trips exactly.

use crate::eigensolve::Tolerance;
use crate::ensembles::EntryLaw;
use crate::error::{Error, Result};
use crate::experiments::{self, EsdMatrix, ScanConfig};
use crate::spectral::EsdSample;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "HADWISH_THREADS";

#[derive(Parser, Debug)]
#[command(name = "hadwish", version, about = "Hadamard powers of random Wishart matrices: positivity experiments")]
struct Cli {
    /// Worker threads (default: all cores, or HADWISH_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fraction of trials with a negative smallest eigenvalue over an
    /// (n, alpha) grid.
    Scan(ScanArgs),
    /// Bisection estimate of the critical exponent at fixed (n, s).
    Boundary(BoundaryArgs),
    /// Rerun the built-in n = 5000 smallest-eigenvalue reference table.
    Table1(Table1Args),
    /// Moments of the centered subcritical spectral distribution vs the
    /// analytic targets.
    Moments(MomentsArgs),
    /// Deterministic rank-perturbation bound on the KS distance.
    KsCheck(KsCheckArgs),
    /// Eigenvalue band certificates for standardized laws.
    Certify(CertifyArgs),
    /// Decay of E[Tr(C^{2k})] along an n grid.
    TraceDecay(TraceDecayArgs),
    /// Smallest eigenvalue of the powered 1 + eps*i*j counterexample.
    Hf(HfArgs),
    /// Histogram of a pooled empirical spectral distribution.
    EsdHist(EsdHistArgs),
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    s: f64,
    /// n grid: comma list or lo:hi:step.
    #[arg(long)]
    n: String,
    /// alpha grid: comma list or lo:hi:step.
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value_t = 5)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    law: String,
    /// PSD tolerance: a number or "auto" (1e-10 |B|_F).
    #[arg(long, default_value = "auto")]
    tol: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also stream per-trial records to this CSV path.
    #[arg(long)]
    trial_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 5)]
    trials: u32,
    /// Majority threshold classifying an alpha as negative-side.
    #[arg(long, default_value_t = 0.5)]
    rule: f64,
    #[arg(long, default_value_t = 0.02)]
    tol_alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    law: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per table row.
    #[arg(long, default_value_t = 5)]
    trials: u32,
    /// Override the table's n = 5000 for cheap smoke runs.
    #[arg(long, default_value_t = experiments::TABLE1_N)]
    n: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MomentsArgs {
    #[arg(long)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KsCheckArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 50)]
    resamples: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    law: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TraceDecayArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 30)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HfArgs {
    #[arg(long, default_value_t = 5)]
    n: u64,
    #[arg(long)]
    alpha: f64,
    /// Descending eps grid.
    #[arg(long, default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")]
    eps_grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EsdHistArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    s: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value = "gaussian")]
    law: String,
    #[arg(long, default_value_t = 10)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    bins: u32,
    /// Which matrix to pool: "e" (centered subcritical) or "b".
    #[arg(long, default_value = "e")]
    matrix: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    0
                }
                _ => {
                    eprint!("{err}");
                    1
                }
            };
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok())
    });
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: could not build thread pool: {err}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(err @ Error::InvariantViolation(_)) => {
            eprintln!("error: {err}");
            2
        }
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Scan(args) => {
            let cfg = ScanConfig {
                law: args.law.parse()?,
                s: args.s,
                n_grid: parse_u64_grid(&args.n)?,
                alpha_grid: parse_f64_grid(&args.alpha)?,
                trials: args.trials,
                master_seed: args.seed,
                psd_tol: args.tol.parse::<Tolerance>()?,
            };
            let outcome = experiments::run_phase_scan(&cfg)?;
            if let Some(path) = &args.trial_csv {
                write_trial_csv(path, &outcome.records)?;
            }
            write_json(args.out.as_deref(), &outcome.result)
        }
        Command::Boundary(args) => {
            let law: EntryLaw = args.law.parse()?;
            let est = experiments::estimate_boundary(
                args.n, args.s, &law, args.trials, args.rule, args.tol_alpha, args.seed,
            )?;
            write_json(args.out.as_deref(), &est)
        }
        Command::Table1(args) => {
            let report = experiments::reproduce_table1_at(args.n, args.seed, args.trials)?;
            write_json(args.out.as_deref(), &report)
        }
        Command::Moments(args) => {
            let reports = experiments::moment_convergence_experiment(
                &parse_u64_grid(&args.n)?,
                args.s,
                args.alpha,
                args.trials,
                args.seed,
            )?;
            write_json(args.out.as_deref(), &reports)
        }
        Command::KsCheck(args) => {
            let report = experiments::rank_perturbation_check(
                args.n,
                args.s,
                args.alpha,
                args.seed,
                args.resamples,
            )?;
            write_json(args.out.as_deref(), &report)
        }
        Command::Certify(args) => {
            let law: EntryLaw = args.law.parse()?;
            if args.alpha <= 2.0 * args.s {
                eprintln!(
                    "warning: alpha = {} is not above 2s = {}; the band certificate is \
                     only guaranteed asymptotically for alpha > 2s",
                    args.alpha,
                    2.0 * args.s
                );
            }
            let report = experiments::subgaussian_certificate_experiment(
                args.n, args.s, args.alpha, &law, args.eps, args.trials, args.seed,
            )?;
            write_json(args.out.as_deref(), &report)
        }
        Command::TraceDecay(args) => {
            let k = args.k;
            if k >= 1 && args.alpha <= (k as f64 + 1.0) / k as f64 * args.s {
                eprintln!(
                    "warning: alpha = {} is not above ((k+1)/k) s = {}; the trace moment \
                     need not decay",
                    args.alpha,
                    (k as f64 + 1.0) / k as f64 * args.s
                );
            }
            let report = experiments::trace_decay_experiment(
                k,
                args.s,
                args.alpha,
                &parse_u64_grid(&args.n)?,
                args.trials,
                args.seed,
            )?;
            write_json(args.out.as_deref(), &report)
        }
        Command::Hf(args) => {
            let report =
                experiments::hf_counterexample(args.n, args.alpha, &parse_f64_grid(&args.eps_grid)?)?;
            write_json(args.out.as_deref(), &report)
        }
        Command::EsdHist(args) => {
            let law: EntryLaw = args.law.parse()?;
            let which = match args.matrix.as_str() {
                "e" => EsdMatrix::CenteredSubcritical,
                "b" => EsdMatrix::HadamardPower,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "--matrix must be \"e\" or \"b\", got {other:?}"
                    )))
                }
            };
            let pooled = experiments::pooled_esd(
                args.n, args.s, args.alpha, &law, args.trials, args.seed, which,
            )?;
            let csv = emit_histogram(&pooled, args.bins)?;
            write_text(args.out.as_deref(), &csv)
        }
    }
}

/// Equal-width histogram of a spectral sample as CSV rows
/// `bin_left,bin_right,density`; densities integrate to one.
pub fn emit_histogram(sample: &EsdSample, bins: u32) -> Result<String> {
    if bins < 1 {
        return Err(Error::InvalidConfig("bins must be >= 1".into()));
    }
    let values = sample.values();
    if values.is_empty() {
        return Err(Error::InvalidConfig("cannot histogram an empty sample".into()));
    }
    let (lo, hi) = (values[0], values[values.len() - 1]);
    if lo == hi {
        return Err(Error::InvalidConfig(
            "sample range is degenerate (all eigenvalues equal)".into(),
        ));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins as usize];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins as usize - 1);
        counts[idx] += 1;
    }
    let total = values.len() as f64;
    let mut out = String::from("bin_left,bin_right,density\n");
    for (i, &c) in counts.iter().enumerate() {
        let left = lo + width * i as f64;
        let right = if i + 1 == counts.len() { hi } else { lo + width * (i + 1) as f64 };
        let density = c as f64 / (total * width);
        out.push_str(&format!(
            "{},{},{}\n",
            crate::fmt_f64(left),
            crate::fmt_f64(right),
            crate::fmt_f64(density)
        ));
    }
    Ok(out)
}

/// Grid syntax: `a,b,c` or `lo:hi:step` (inclusive of `hi` up to a 1e-9
/// relative slack).
pub fn parse_f64_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let grid: Vec<f64> = if parts.len() == 3 {
        let lo: f64 = parse_num(parts[0])?;
        let hi: f64 = parse_num(parts[1])?;
        let step: f64 = parse_num(parts[2])?;
        if !(step > 0.0) || hi < lo {
            return Err(Error::InvalidConfig(format!("bad range {text:?}")));
        }
        let mut grid = Vec::new();
        let mut k = 0u64;
        loop {
            let v = lo + step * k as f64;
            if v > hi * (1.0 + 1e-9) + 1e-300 {
                break;
            }
            grid.push(v.min(hi));
            k += 1;
        }
        grid
    } else {
        text.split(',').map(parse_num).collect::<Result<_>>()?
    };
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("empty grid {text:?}")));
    }
    Ok(grid)
}

pub fn parse_u64_grid(text: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let lo: u64 = parse_int(parts[0])?;
        let hi: u64 = parse_int(parts[1])?;
        let step: u64 = parse_int(parts[2])?;
        if step == 0 || hi < lo {
            return Err(Error::InvalidConfig(format!("bad range {text:?}")));
        }
        Ok((lo..=hi).step_by(step as usize).collect())
    } else {
        text.split(',').map(parse_int).collect()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad number {s:?}")))
}

fn parse_int(s: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad integer {s:?}")))
}

/// Serializes with floats at 17 significant digits (compact JSON).
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigitFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value)?)
}

fn write_text(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn write_trial_csv(path: &Path, records: &[experiments::TrialRecord]) -> Result<()> {
    let mut out = String::from(experiments::TrialRecord::CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&rec.to_csv_row());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
