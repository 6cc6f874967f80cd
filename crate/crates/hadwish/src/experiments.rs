//! Seeded Monte Carlo studies around the positivity transition.
//!
//! Every experiment is a pure function of its configuration including the
//! master seed: trial `t` always draws from `SeedSpec { master_seed, t }`,
//! matrices are shared across the alpha grid of a trial (the Hadamard power
//! is cheap next to the Gram build), and aggregation is keyed by grid and
//! trial indices, so thread count never changes a byte of the output.

use crate::eigensolve::{
    eigen_spectrum, gershgorin_intervals, lambda_extremes, Tolerance,
};
use crate::ensembles::{resample_row, rows_for, sample_matrix, EntryLaw, SeedSpec};
use crate::error::{Error, Result};
use crate::matrixops::{
    hadamard_abs_power, subcritical_split, supercritical_center, wishart, SymmetricMatrix,
    WishartContext,
};
use crate::spectral::{esd, ks_distance, moment_targets, pool, trace_moment, EsdSample};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One (n, s, alpha, trial) unit of work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: u64,
    pub m: u64,
    pub s: f64,
    pub alpha: f64,
    pub trial_index: u64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub is_psd: bool,
    /// Wall-clock diagnostic; excluded from the deterministic JSON surface.
    pub wall_time_seconds: f64,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str = "n,m,s,alpha,trial,lambda_min,lambda_max,is_psd,seconds";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.m,
            crate::fmt_f64(self.s),
            crate::fmt_f64(self.alpha),
            self.trial_index,
            crate::fmt_f64(self.lambda_min),
            crate::fmt_f64(self.lambda_max),
            self.is_psd,
            crate::fmt_f64(self.wall_time_seconds),
        )
    }
}

fn trial_seed(master_seed: u64, trial: u64) -> SeedSpec {
    SeedSpec::new(master_seed, trial)
}

fn validate_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidConfig(format!("s must lie in (0, 1], got {s}")));
    }
    Ok(())
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// Samples `X`, builds `A` and `B`, and classifies positive semi-definiteness
/// of `B` at the scale-aware tolerance `1e-10 |B|_F`.
pub fn run_trial(n: u64, s: f64, alpha: f64, law: &EntryLaw, seed: &SeedSpec) -> Result<TrialRecord> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    law.validate()?;
    let start = Instant::now();
    let m = rows_for(n, s)?;
    let x = sample_matrix(m as usize, n as usize, law, seed)?;
    let a = wishart(&x, n as usize)?;
    let b = hadamard_abs_power(&a, alpha)?;
    let tol = Tolerance::Auto.resolve(&b);
    let (lo, hi) = lambda_extremes(&b)?;
    Ok(TrialRecord {
        n,
        m,
        s,
        alpha,
        trial_index: seed.trial_index,
        lambda_min: lo,
        lambda_max: hi,
        is_psd: lo >= -tol,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Phase-scan configuration; serializes exactly as the `config` object of
/// the scan JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub law: EntryLaw,
    pub s: f64,
    pub n_grid: Vec<u64>,
    pub alpha_grid: Vec<f64>,
    pub trials: u32,
    pub master_seed: u64,
    #[serde(rename = "tol")]
    pub psd_tol: Tolerance,
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        self.law.validate()?;
        validate_s(self.s)?;
        if self.n_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::InvalidConfig("grids must be non-empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("n grid must be strictly ascending".into()));
        }
        if self.alpha_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("alpha grid must be strictly ascending".into()));
        }
        for &alpha in &self.alpha_grid {
            validate_alpha(alpha)?;
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub n: u64,
    pub m: u64,
    pub alpha: f64,
    pub frac_negative: f64,
    pub mean_lambda_min: f64,
    pub min_lambda_min: f64,
    /// Standard error of the mean smallest eigenvalue across trials.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub config: ScanConfig,
    pub points: Vec<ScanPoint>,
}

/// Scan result plus the per-trial record stream for optional CSV output.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub result: ScanResult,
    pub records: Vec<TrialRecord>,
}

/// Runs the full (n, alpha, trial) grid. For one trial, `X` and `A` are
/// sampled once per `n` and shared across the alpha grid; alphas run in
/// parallel on distinct matrices.
pub fn run_phase_scan(cfg: &ScanConfig) -> Result<ScanOutcome> {
    cfg.validate()?;
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut points = Vec::new();
    for &n in &cfg.n_grid {
        let m = rows_for(n, cfg.s)?;
        // per_alpha[a][t] = record for alpha_grid[a], trial t
        let mut per_alpha: Vec<Vec<TrialRecord>> =
            vec![Vec::with_capacity(cfg.trials as usize); cfg.alpha_grid.len()];
        for trial in 0..cfg.trials as u64 {
            let seed = trial_seed(cfg.master_seed, trial);
            let start = Instant::now();
            let x = sample_matrix(m as usize, n as usize, &cfg.law, &seed)?;
            let a = wishart(&x, n as usize)?;
            let shared_secs = start.elapsed().as_secs_f64();
            let row: Result<Vec<TrialRecord>> = cfg
                .alpha_grid
                .par_iter()
                .map(|&alpha| {
                    let t0 = Instant::now();
                    let b = hadamard_abs_power(&a, alpha)?;
                    let tol = cfg.psd_tol.resolve(&b);
                    let (lo, hi) = lambda_extremes(&b)?;
                    Ok(TrialRecord {
                        n,
                        m,
                        s: cfg.s,
                        alpha,
                        trial_index: trial,
                        lambda_min: lo,
                        lambda_max: hi,
                        is_psd: lo >= -tol,
                        wall_time_seconds: shared_secs + t0.elapsed().as_secs_f64(),
                    })
                })
                .collect();
            for (slot, rec) in per_alpha.iter_mut().zip(row?) {
                slot.push(rec);
            }
        }
        for trials in &per_alpha {
            points.push(aggregate_point(trials));
            records.extend(trials.iter().cloned());
        }
    }
    Ok(ScanOutcome { result: ScanResult { config: cfg.clone(), points }, records })
}

fn aggregate_point(trials: &[TrialRecord]) -> ScanPoint {
    let count = trials.len() as f64;
    let negatives = trials.iter().filter(|r| !r.is_psd).count() as f64;
    let mean = trials.iter().map(|r| r.lambda_min).sum::<f64>() / count;
    let min = trials.iter().map(|r| r.lambda_min).fold(f64::INFINITY, f64::min);
    let var = trials
        .iter()
        .map(|r| (r.lambda_min - mean) * (r.lambda_min - mean))
        .sum::<f64>()
        / count;
    let se = if trials.len() > 1 { (var / (count - 1.0)).sqrt() } else { 0.0 };
    ScanPoint {
        n: trials[0].n,
        m: trials[0].m,
        alpha: trials[0].alpha,
        frac_negative: negatives / count,
        mean_lambda_min: mean,
        min_lambda_min: min,
        se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub n: u64,
    pub m: u64,
    pub s: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub alpha_crit: f64,
    pub trials_per_probe: u32,
    pub decision_rule: f64,
    pub frac_lo: f64,
    pub frac_hi: f64,
    /// Every probed (alpha, frac_negative) pair, in probe order.
    pub probes: Vec<(f64, f64)>,
}

const BRACKET_MIN: f64 = 0.05;
const BRACKET_MAX: f64 = 4.0;
const BISECTION_DEPTH: u32 = 12;

/// Bisection estimate of the critical exponent at fixed `(n, s)`.
///
/// A probe classifies an alpha as "negative side" when the fraction of
/// trials with a negative smallest eigenvalue is at least `rule`. Trials
/// reuse the same seeds at every probe, so the Gram matrices are built once
/// and only the Hadamard power and eigensolve rerun per probe.
pub fn estimate_boundary(
    n: u64,
    s: f64,
    law: &EntryLaw,
    trials: u32,
    rule: f64,
    tol_alpha: f64,
    master_seed: u64,
) -> Result<BoundaryEstimate> {
    validate_s(s)?;
    law.validate()?;
    if !(rule > 0.0 && rule < 1.0) {
        return Err(Error::InvalidConfig(format!("rule must lie in (0, 1), got {rule}")));
    }
    if !(tol_alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("tol_alpha must be positive, got {tol_alpha}")));
    }
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let m = rows_for(n, s)?;
    let grams: Vec<SymmetricMatrix> = (0..trials as u64)
        .map(|trial| {
            let x = sample_matrix(m as usize, n as usize, law, &trial_seed(master_seed, trial))?;
            wishart(&x, n as usize)
        })
        .collect::<Result<_>>()?;

    let mut probes = Vec::new();
    let probe = |alpha: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let neg: Result<Vec<bool>> = grams
            .par_iter()
            .map(|a| {
                let b = hadamard_abs_power(a, alpha)?;
                let tol = Tolerance::Auto.resolve(&b);
                let (lo, _) = lambda_extremes(&b)?;
                Ok(lo < -tol)
            })
            .collect();
        let neg = neg?;
        let frac = neg.iter().filter(|&&x| x).count() as f64 / trials as f64;
        probes.push((alpha, frac));
        Ok(frac)
    };

    // expanding bracket around the theoretical transition at alpha = s
    let mut lo = (0.75 * s).max(BRACKET_MIN);
    let mut frac_lo = probe(lo, &mut probes)?;
    while frac_lo < rule {
        if lo <= BRACKET_MIN {
            return Err(Error::BracketNotFound(format!(
                "no negative-side alpha found down to {BRACKET_MIN}"
            )));
        }
        lo = (lo * 0.7).max(BRACKET_MIN);
        frac_lo = probe(lo, &mut probes)?;
    }
    let mut hi = (1.5 * s).min(BRACKET_MAX).max(lo * 1.2);
    let mut frac_hi = probe(hi, &mut probes)?;
    while frac_hi >= rule {
        if hi >= BRACKET_MAX {
            return Err(Error::BracketNotFound(format!(
                "no positive-side alpha found up to {BRACKET_MAX}"
            )));
        }
        hi = (hi * 1.3).min(BRACKET_MAX);
        frac_hi = probe(hi, &mut probes)?;
    }

    for _ in 0..BISECTION_DEPTH {
        if hi - lo <= tol_alpha {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let frac = probe(mid, &mut probes)?;
        if frac >= rule {
            lo = mid;
            frac_lo = frac;
        } else {
            hi = mid;
            frac_hi = frac;
        }
    }

    Ok(BoundaryEstimate {
        n,
        m,
        s,
        alpha_lo: lo,
        alpha_hi: hi,
        alpha_crit: 0.5 * (lo + hi),
        trials_per_probe: trials,
        decision_rule: rule,
        frac_lo,
        frac_hi,
        probes,
    })
}

/// The eight (s, alpha) rows of the built-in n = 5000 reference table,
/// with the reference smallest eigenvalues (single realizations).
pub const TABLE1_ROWS: [(f64, f64, f64); 8] = [
    (1.0, 0.98, -0.288),
    (1.0, 0.99, -0.246),
    (1.0, 1.06, 0.016),
    (1.0, 1.07, 0.046),
    (0.8, 0.78, -0.076),
    (0.8, 0.79, -0.049),
    (0.8, 0.81, 0.017),
    (0.8, 0.82, 0.041),
];

pub const TABLE1_N: u64 = 5000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub s: f64,
    pub alpha: f64,
    pub reference_lambda_min: f64,
    pub median_lambda_min: f64,
    pub sign_matches: u32,
    pub trials: u32,
    pub lambda_mins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub n: u64,
    pub trials_per_row: u32,
    pub rows: Vec<Table1Row>,
}

/// Reruns the eight reference table rows at `n = 5000`, reporting the
/// median smallest eigenvalue and how many trials reproduce the reference
/// sign.
pub fn reproduce_table1(master_seed: u64, trials_per_row: u32) -> Result<Table1Report> {
    reproduce_table1_at(TABLE1_N, master_seed, trials_per_row)
}

/// Table reproduction at an arbitrary `n` (the reference values are for
/// `n = 5000`; smaller `n` is useful for smoke runs).
pub fn reproduce_table1_at(n: u64, master_seed: u64, trials_per_row: u32) -> Result<Table1Report> {
    if trials_per_row < 1 {
        return Err(Error::InvalidConfig("trials_per_row must be >= 1".into()));
    }
    // group rows by s so a trial's Gram matrix serves all its alphas
    let mut s_values: Vec<f64> = Vec::new();
    for &(s, _, _) in &TABLE1_ROWS {
        if !s_values.contains(&s) {
            s_values.push(s);
        }
    }
    let law = EntryLaw::gaussian();
    let mut rows: Vec<Table1Row> = TABLE1_ROWS
        .iter()
        .map(|&(s, alpha, reference)| Table1Row {
            s,
            alpha,
            reference_lambda_min: reference,
            median_lambda_min: 0.0,
            sign_matches: 0,
            trials: trials_per_row,
            lambda_mins: Vec::new(),
        })
        .collect();

    for &s in &s_values {
        let m = rows_for(n, s)?;
        let alpha_list: Vec<f64> = TABLE1_ROWS
            .iter()
            .filter(|&&(rs, _, _)| rs == s)
            .map(|&(_, a, _)| a)
            .collect();
        for trial in 0..trials_per_row as u64 {
            let seed = trial_seed(master_seed, trial);
            let x = sample_matrix(m as usize, n as usize, &law, &seed)?;
            let a = wishart(&x, n as usize)?;
            let lambda_mins: Result<Vec<f64>> = alpha_list
                .par_iter()
                .map(|&alpha| {
                    let b = hadamard_abs_power(&a, alpha)?;
                    Ok(lambda_extremes(&b)?.0)
                })
                .collect();
            for (&alpha, &lo) in alpha_list.iter().zip(&lambda_mins?) {
                let row = rows
                    .iter_mut()
                    .find(|r| r.s == s && r.alpha == alpha)
                    .expect("row exists");
                row.lambda_mins.push(lo);
            }
        }
    }

    for row in &mut rows {
        let mut sorted = row.lambda_mins.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        row.median_lambda_min = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        row.sign_matches = row
            .lambda_mins
            .iter()
            .filter(|&&lo| lo.signum() == row.reference_lambda_min.signum())
            .count() as u32;
    }

    Ok(Table1Report { n, trials_per_row, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateTrial {
    pub trial_index: u64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub within_band: bool,
    pub gershgorin_sufficient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub n: u64,
    pub m: u64,
    pub s: f64,
    pub alpha: f64,
    pub eps: f64,
    pub law: EntryLaw,
    pub trials: u32,
    /// True when alpha > 2s, the regime where the band holds asymptotically.
    pub supercritical_band: bool,
    pub frac_within_band: f64,
    pub frac_gershgorin_sufficient: f64,
    pub per_trial: Vec<CertificateTrial>,
}

/// Checks how often all eigenvalues of `B` land inside `[1 - eps, 1 + eps]`,
/// and how often the Gershgorin intervals alone already certify that band
/// without any eigensolve.
pub fn subgaussian_certificate_experiment(
    n: u64,
    s: f64,
    alpha: f64,
    law: &EntryLaw,
    eps: f64,
    trials: u32,
    master_seed: u64,
) -> Result<CertificateReport> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    law.validate()?;
    if !law.is_standardized_unit() {
        return Err(Error::InvalidConfig(format!(
            "law {law} does not have mean 0 and unit variance; standardize it"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let m = rows_for(n, s)?;
    let per_trial: Result<Vec<CertificateTrial>> = (0..trials as u64)
        .map(|trial| {
            let seed = trial_seed(master_seed, trial);
            let x = sample_matrix(m as usize, n as usize, law, &seed)?;
            let a = wishart(&x, n as usize)?;
            let b = hadamard_abs_power(&a, alpha)?;
            let intervals = gershgorin_intervals(&b);
            let g_lo = intervals.iter().map(|&(c, r)| c - r).fold(f64::INFINITY, f64::min);
            let g_hi = intervals.iter().map(|&(c, r)| c + r).fold(f64::NEG_INFINITY, f64::max);
            let (lo, hi) = if m == 1 {
                (b.get(0, 0), b.get(0, 0))
            } else {
                lambda_extremes(&b)?
            };
            Ok(CertificateTrial {
                trial_index: trial,
                lambda_min: lo,
                lambda_max: hi,
                within_band: lo >= 1.0 - eps && hi <= 1.0 + eps,
                gershgorin_sufficient: g_lo >= 1.0 - eps && g_hi <= 1.0 + eps,
            })
        })
        .collect();
    let per_trial = per_trial?;
    let count = per_trial.len() as f64;
    Ok(CertificateReport {
        n,
        m,
        s,
        alpha,
        eps,
        law: *law,
        trials,
        supercritical_band: alpha > 2.0 * s,
        frac_within_band: per_trial.iter().filter(|t| t.within_band).count() as f64 / count,
        frac_gershgorin_sufficient: per_trial.iter().filter(|t| t.gershgorin_sufficient).count()
            as f64
            / count,
        per_trial,
    })
}

/// Moments of the pooled spectral distribution of the centered subcritical
/// matrix `E`, against the analytic limit targets. Gaussian entries only
/// (the targets are absolute Gaussian moments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub m1_hat: f64,
    pub m2_hat: f64,
    pub m4_hat: f64,
    pub m1_target: f64,
    pub m2_target: f64,
    pub m4_target: f64,
    pub alpha: f64,
    pub n: u64,
    pub s: f64,
    pub trials: u32,
}

pub fn moment_convergence_experiment(
    n_grid: &[u64],
    s: f64,
    alpha: f64,
    trials: u32,
    master_seed: u64,
) -> Result<Vec<MomentReport>> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    if alpha >= s {
        return Err(Error::InvalidConfig(format!(
            "moment experiment needs alpha < s, got alpha = {alpha}, s = {s}"
        )));
    }
    if n_grid.is_empty() || trials < 1 {
        return Err(Error::InvalidConfig("need a non-empty n grid and trials >= 1".into()));
    }
    let law = EntryLaw::gaussian();
    let (m1_target, m2_target, m4_target) = moment_targets(alpha)?;
    let mut reports = Vec::new();
    for &n in n_grid {
        let ctx = WishartContext::new(n, s, alpha)?;
        let mut esds = Vec::with_capacity(trials as usize);
        let mut trace_sum = 0.0f64;
        for trial in 0..trials as u64 {
            let seed = trial_seed(master_seed, trial);
            let x = sample_matrix(ctx.m as usize, n as usize, &law, &seed)?;
            let a = wishart(&x, n as usize)?;
            let b = hadamard_abs_power(&a, alpha)?;
            let (_, _, e) = subcritical_split(&b, &ctx)?;
            // the first pooled moment is trace(E)/m per trial, and the
            // diagonal of E is exactly zero by construction
            trace_sum += e.trace() / ctx.m as f64;
            esds.push(esd(&eigen_spectrum(&e)?));
        }
        let pooled = pool(&esds)?;
        reports.push(MomentReport {
            m1_hat: trace_sum / trials as f64,
            m2_hat: crate::spectral::esd_moment(&pooled, 2),
            m4_hat: crate::spectral::esd_moment(&pooled, 4),
            m1_target,
            m2_target,
            m4_target,
            alpha,
            n,
            s,
            trials,
        });
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPerturbationReport {
    pub n: u64,
    pub m: u64,
    pub s: f64,
    pub alpha: f64,
    pub resamples: u32,
    /// The deterministic bound `2 / m` from the rank-2 update.
    pub bound: f64,
    pub max_ks: f64,
    pub per_resample: Vec<f64>,
}

/// Redraws one row at a time and verifies the Kolmogorov-Smirnov distance
/// between the spectral distributions of `E` and the rebuilt `E` never
/// exceeds `2 / m`. Replacing row `i` changes row and column `i`, a rank-2
/// perturbation, so the bound is a theorem: any violation is reported as an
/// invariant failure, not a statistic.
pub fn rank_perturbation_check(
    n: u64,
    s: f64,
    alpha: f64,
    master_seed: u64,
    resamples: u32,
) -> Result<RankPerturbationReport> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    if resamples < 1 {
        return Err(Error::InvalidConfig("resamples must be >= 1".into()));
    }
    let law = EntryLaw::gaussian();
    let ctx = WishartContext::new(n, s, alpha)?;
    let m = ctx.m;
    let seed = trial_seed(master_seed, 0);
    let x = sample_matrix(m as usize, n as usize, &law, &seed)?;
    let base = esd_of_centered(&x, n, &ctx)?;
    let bound = 2.0 / m as f64;

    let per_resample: Result<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let i = r as usize % m as usize;
            let mut x_mod = x.clone();
            resample_row(&mut x_mod, i, &law, &seed, r as u64)?;
            let perturbed = esd_of_centered(&x_mod, n, &ctx)?;
            Ok(ks_distance(&base, &perturbed))
        })
        .collect();
    let per_resample = per_resample?;
    let max_ks = per_resample.iter().fold(0.0f64, |a, &b| a.max(b));
    if max_ks > bound {
        return Err(Error::InvariantViolation(format!(
            "rank-perturbation KS distance {max_ks} exceeds the rank-2 bound {bound} \
             (n = {n}, s = {s}, alpha = {alpha})"
        )));
    }
    Ok(RankPerturbationReport {
        n,
        m,
        s,
        alpha,
        resamples,
        bound,
        max_ks,
        per_resample,
    })
}

fn esd_of_centered(x: &crate::ensembles::RectMatrix, n: u64, ctx: &WishartContext) -> Result<EsdSample> {
    let a = wishart(x, n as usize)?;
    let b = hadamard_abs_power(&a, ctx.alpha)?;
    let (_, _, e) = subcritical_split(&b, ctx)?;
    Ok(esd(&eigen_spectrum(&e)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDecayPoint {
    pub n: u64,
    pub m: u64,
    pub mean: f64,
    pub se: f64,
    pub trials: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDecayReport {
    pub k: u32,
    pub s: f64,
    pub alpha: f64,
    /// True when alpha > ((k+1)/k) s, the regime where the mean decays.
    pub supercritical: bool,
    pub points: Vec<TraceDecayPoint>,
}

/// Monte Carlo estimate of `E[Tr(C^{2k})]` for the supercritically centered
/// matrix across an `n` grid.
pub fn trace_decay_experiment(
    k: u32,
    s: f64,
    alpha: f64,
    n_grid: &[u64],
    trials: u32,
    master_seed: u64,
) -> Result<TraceDecayReport> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    if k < 1 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if n_grid.is_empty() || trials < 1 {
        return Err(Error::InvalidConfig("need a non-empty n grid and trials >= 1".into()));
    }
    let law = EntryLaw::gaussian();
    let mut points = Vec::new();
    for &n in n_grid {
        let ctx = WishartContext::new(n, s, alpha)?;
        let values: Result<Vec<f64>> = (0..trials as u64)
            .map(|trial| {
                let seed = trial_seed(master_seed, trial);
                let x = sample_matrix(ctx.m as usize, n as usize, &law, &seed)?;
                let a = wishart(&x, n as usize)?;
                let b = hadamard_abs_power(&a, alpha)?;
                let c = supercritical_center(&b, &ctx)?;
                trace_moment(&c, k)
            })
            .collect();
        let values = values?;
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / count;
        let se = if values.len() > 1 { (var / (count - 1.0)).sqrt() } else { 0.0 };
        points.push(TraceDecayPoint { n, m: ctx.m, mean, se, trials });
    }
    Ok(TraceDecayReport {
        k,
        s,
        alpha,
        supercritical: alpha > (k as f64 + 1.0) / k as f64 * s,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HfPoint {
    pub eps: f64,
    pub lambda_min: f64,
    /// Frobenius norm of the powered matrix, for scale-aware comparisons.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HfReport {
    pub n: u64,
    pub alpha: f64,
    pub min_lambda: f64,
    pub argmin_eps: f64,
    pub points: Vec<HfPoint>,
}

/// Scans the deterministic `1 + eps i j` counterexample over an eps grid and
/// reports the most negative smallest eigenvalue of the powered matrix.
pub fn hf_counterexample(n: u64, alpha: f64, eps_grid: &[f64]) -> Result<HfReport> {
    validate_alpha(alpha)?;
    if n < 3 {
        return Err(Error::InvalidConfig(format!("need n >= 3, got {n}")));
    }
    if eps_grid.is_empty()
        || eps_grid.iter().any(|&e| !(e > 0.0))
        || eps_grid.windows(2).any(|w| w[0] <= w[1])
    {
        return Err(Error::InvalidConfig(
            "eps grid must be positive and strictly descending".into(),
        ));
    }
    let mut points = Vec::new();
    for &eps in eps_grid {
        let a = crate::matrixops::horn_fitzgerald_matrix(n as usize, eps)?;
        let b = hadamard_abs_power(&a, alpha)?;
        let (lo, _) = lambda_extremes(&b)?;
        points.push(HfPoint { eps, lambda_min: lo, scale: b.frobenius_norm() });
    }
    let (argmin_eps, min_lambda) = points
        .iter()
        .map(|p| (p.eps, p.lambda_min))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    Ok(HfReport { n, alpha, min_lambda, argmin_eps, points })
}

/// Which matrix the pooled spectral distribution is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsdMatrix {
    /// The Hadamard power `B` itself.
    HadamardPower,
    /// The centered subcritical matrix `E`.
    CenteredSubcritical,
}

/// Pooled spectral distribution over independent trials, for histograms.
pub fn pooled_esd(
    n: u64,
    s: f64,
    alpha: f64,
    law: &EntryLaw,
    trials: u32,
    master_seed: u64,
    which: EsdMatrix,
) -> Result<EsdSample> {
    validate_s(s)?;
    validate_alpha(alpha)?;
    law.validate()?;
    if trials < 1 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let ctx = WishartContext::new(n, s, alpha)?;
    let mut esds = Vec::with_capacity(trials as usize);
    for trial in 0..trials as u64 {
        let seed = trial_seed(master_seed, trial);
        let x = sample_matrix(ctx.m as usize, n as usize, law, &seed)?;
        let a = wishart(&x, n as usize)?;
        let b = hadamard_abs_power(&a, alpha)?;
        let target = match which {
            EsdMatrix::HadamardPower => b,
            EsdMatrix::CenteredSubcritical => subcritical_split(&b, &ctx)?.2,
        };
        esds.push(esd(&eigen_spectrum(&target)?));
    }
    pool(&esds)
}
