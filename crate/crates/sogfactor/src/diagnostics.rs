//! Run diagnostics: time-to-solution statistics with gamma fits,
//! point-dissipativeness verdicts, threshold-crossing correlation analysis
//! and unsat-trace summaries.

use std::collections::BTreeMap;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::function::gamma::{digamma, gamma_lr};

use crate::ilp::{IlpModel, VarId};
use crate::sog::RunOutcome;

/// Time-to-solution samples of an ensemble (converged runs only).
#[derive(Debug, Clone, Serialize)]
pub struct TtsDistribution {
    pub samples: Vec<f64>,
    pub convergence_fraction: f64,
    pub ensemble_size: usize,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

pub fn histogram(samples: &[f64], n_bins: usize) -> Vec<HistogramBin> {
    if samples.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / n_bins as f64).max(f64::MIN_POSITIVE);
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &s in samples {
        let idx = (((s - lo) / width) as usize).min(n_bins - 1);
        bins[idx].count += 1;
    }
    bins
}

impl TtsDistribution {
    pub fn from_outcomes(outcomes: &[RunOutcome], n_bins: usize) -> Self {
        let samples: Vec<f64> = outcomes.iter().filter_map(|o| o.tts_us).collect();
        let fraction = if outcomes.is_empty() {
            0.0
        } else {
            samples.len() as f64 / outcomes.len() as f64
        };
        let bins = histogram(&samples, n_bins);
        TtsDistribution {
            samples,
            convergence_fraction: fraction,
            ensemble_size: outcomes.len(),
            bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaFit {
    pub shape: f64,
    pub scale: f64,
    pub ks_statistic: f64,
    pub sample_count: usize,
    /// Set when fewer than 30 samples were available; interpret the
    /// parameters with wide tolerances.
    pub small_sample: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitError {
    Empty,
    NonPositiveSample,
    Degenerate,
}

impl std::fmt::Display for FitError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitError::Empty => write!(f, "no samples"),
            FitError::NonPositiveSample => write!(f, "gamma samples must be positive"),
            FitError::Degenerate => write!(f, "samples are all equal; no gamma fit exists"),
        }
    }
}

impl std::error::Error for FitError {}

fn trigamma(mut x: f64) -> f64 {
    // Recurrence up to the asymptotic regime, then the standard series.
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    acc + inv
        + inv2 / 2.0
        + inv * inv2 * (1.0 / 6.0)
        - inv * inv2 * inv2 * (1.0 / 30.0)
        + inv * inv2 * inv2 * inv2 * (1.0 / 42.0)
        - inv * inv2 * inv2 * inv2 * inv2 * (1.0 / 30.0)
}

/// Maximum-likelihood gamma fit: Newton iteration on
/// `ln k − ψ(k) = ln(mean) − mean(ln x)`, then a Kolmogorov–Smirnov
/// statistic against the fitted CDF.
pub fn fit_gamma(samples: &[f64]) -> Result<GammaFit, FitError> {
    if samples.is_empty() {
        return Err(FitError::Empty);
    }
    if samples.iter().any(|&s| !(s > 0.0)) {
        return Err(FitError::NonPositiveSample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|s| s.ln()).sum::<f64>() / n;
    let s = mean.ln() - mean_ln;
    if !(s > 1e-12) {
        return Err(FitError::Degenerate);
    }

    let mut k = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = k.ln() - digamma(k) - s;
        let fp = 1.0 / k - trigamma(k);
        let mut step = f / fp;
        while k - step <= 0.0 {
            step /= 2.0;
        }
        k -= step;
        if step.abs() < 1e-13 * k.max(1.0) {
            break;
        }
    }
    let scale = mean / k;

    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n_usize = sorted.len();
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = gamma_lr(k, x / scale);
        let upper = (i + 1) as f64 / n_usize as f64 - cdf;
        let lower = cdf - i as f64 / n_usize as f64;
        ks = ks.max(upper.max(lower));
    }

    Ok(GammaFit {
        shape: k,
        scale,
        ks_statistic: ks.clamp(0.0, 1.0),
        sample_count: n_usize,
        small_sample: n_usize < 30,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipativenessConfig {
    pub ks_threshold: f64,
    pub min_runs: usize,
}

impl Default for DissipativenessConfig {
    fn default() -> Self {
        DissipativenessConfig {
            ks_threshold: 0.05,
            min_runs: 30,
        }
    }
}

/// Numerical point-dissipativeness test: the equilibria attract every
/// sampled initial condition (100% convergence) and the time-to-solution
/// distribution is gamma-consistent.
#[derive(Debug, Clone, Serialize)]
pub enum Dissipativeness {
    PointDissipative { fit: GammaFit },
    NotPointDissipative { convergence_fraction: f64 },
    Inconclusive { reason: String },
}

pub fn dissipativeness_verdict(
    outcomes: &[RunOutcome],
    cfg: &DissipativenessConfig,
) -> Dissipativeness {
    if outcomes.len() < cfg.min_runs {
        return Dissipativeness::Inconclusive {
            reason: format!(
                "{} runs, need at least {}",
                outcomes.len(),
                cfg.min_runs
            ),
        };
    }
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let fraction = converged as f64 / outcomes.len() as f64;
    if fraction < 1.0 {
        return Dissipativeness::NotPointDissipative {
            convergence_fraction: fraction,
        };
    }
    let samples: Vec<f64> = outcomes.iter().filter_map(|o| o.tts_us).collect();
    match fit_gamma(&samples) {
        Ok(fit) if fit.ks_statistic <= cfg.ks_threshold => {
            Dissipativeness::PointDissipative { fit }
        }
        Ok(fit) => Dissipativeness::Inconclusive {
            reason: format!(
                "all runs converged but KS {:.4} exceeds threshold {:.4}",
                fit.ks_statistic, cfg.ks_threshold
            ),
        },
        Err(e) => Dissipativeness::Inconclusive {
            reason: format!("gamma fit failed: {e}"),
        },
    }
}

/// The threshold-crossing event train: `f(t) = 1` when
/// `max(x(t−Δt), x(t)) > th` and `min(x(t−Δt), x(t)) < th`.
pub fn threshold_crossings(trajectory: &[f64], th: f64, lag: usize) -> Vec<f64> {
    let lag = lag.max(1);
    let mut out = vec![0.0; trajectory.len()];
    for t in lag..trajectory.len() {
        let a = trajectory[t - lag];
        let b = trajectory[t];
        if a.max(b) > th && a.min(b) < th {
            out[t] = 1.0;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct CorrelationResult {
    /// Offsets −(N−1)..=(N−1).
    pub taus: Vec<i64>,
    pub r_raw: Vec<f64>,
    /// Normalized by sqrt(R_jj(0) R_kk(0)); all-zero when either train has
    /// zero energy.
    pub c_raw: Vec<f64>,
    /// Raw minus a degree-3 polynomial baseline fitted to the tails.
    pub c_filtered: Vec<f64>,
    pub energy_a: f64,
    pub energy_b: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagError {
    LengthMismatch { a: usize, b: usize },
    Empty,
}

impl std::fmt::Display for DiagError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DiagError::LengthMismatch { a, b } => {
                write!(f, "trains have different lengths ({a} vs {b})")
            }
            DiagError::Empty => write!(f, "empty trains"),
        }
    }
}

impl std::error::Error for DiagError {}

/// Cross-correlation `R(τ) = Σ_t a(t) b(t+τ)` via the convolution theorem,
/// normalized to `C` and baseline-filtered.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<CorrelationResult, DiagError> {
    if a.len() != b.len() {
        return Err(DiagError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len();
    if n == 0 {
        return Err(DiagError::Empty);
    }
    let m = (2 * n - 1).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);

    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    ifft.process(&mut fa);

    let taus: Vec<i64> = (-(n as i64 - 1)..=(n as i64 - 1)).collect();
    let r_raw: Vec<f64> = taus
        .iter()
        .map(|&tau| {
            let idx = if tau >= 0 { tau as usize } else { m - (-tau) as usize };
            fa[idx].re / m as f64
        })
        .collect();

    let energy_a: f64 = a.iter().map(|x| x * x).sum();
    let energy_b: f64 = b.iter().map(|x| x * x).sum();
    let denom = (energy_a * energy_b).sqrt();
    let c_raw: Vec<f64> = if denom > 0.0 {
        r_raw.iter().map(|r| r / denom).collect()
    } else {
        vec![0.0; r_raw.len()]
    };

    // Degree-3 baseline estimated on the outer half of the offsets.
    let tail_xs: Vec<f64> = taus
        .iter()
        .zip(&c_raw)
        .filter(|(&tau, _)| tau.unsigned_abs() as usize >= n / 2)
        .map(|(&tau, _)| tau as f64 / n as f64)
        .collect();
    let tail_ys: Vec<f64> = taus
        .iter()
        .zip(&c_raw)
        .filter(|(&tau, _)| tau.unsigned_abs() as usize >= n / 2)
        .map(|(_, &c)| c)
        .collect();
    let c_filtered = if tail_xs.len() > 8 {
        let coeffs = polyfit(&tail_xs, &tail_ys, 3);
        taus.iter()
            .zip(&c_raw)
            .map(|(&tau, &c)| c - poly_eval(&coeffs, tau as f64 / n as f64))
            .collect()
    } else {
        c_raw.clone()
    };

    Ok(CorrelationResult {
        taus,
        r_raw,
        c_raw,
        c_filtered,
        energy_a,
        energy_b,
    })
}

impl CorrelationResult {
    pub fn c_at(&self, tau: i64) -> Option<f64> {
        let n = (self.taus.len() + 1) / 2;
        let idx = tau + n as i64 - 1;
        if idx < 0 || idx as usize >= self.c_raw.len() {
            None
        } else {
            Some(self.c_raw[idx as usize])
        }
    }
}

/// Least-squares polynomial fit; returns coefficients lowest power first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let cols = degree + 1;
    // Normal equations A^T A c = A^T y.
    let mut ata = vec![vec![0.0f64; cols]; cols];
    let mut aty = vec![0.0f64; cols];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut powers = vec![1.0f64; cols];
        for p in 1..cols {
            powers[p] = powers[p - 1] * x;
        }
        for i in 0..cols {
            aty[i] += powers[i] * y;
            for j in 0..cols {
                ata[i][j] += powers[i] * powers[j];
            }
        }
    }
    gauss_solve(&mut ata, &mut aty);
    aty
}

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            continue;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / diag;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for i in 0..n {
        if a[i][i].abs() > 1e-300 {
            b[i] /= a[i][i];
        }
    }
}

/// Distribution of the per-run minimum unsat count.
#[derive(Debug, Clone, Serialize)]
pub struct UnsatSummary {
    pub minima: Vec<usize>,
    pub histogram: BTreeMap<usize, usize>,
}

pub fn unsat_summary(outcomes: &[RunOutcome]) -> UnsatSummary {
    let minima: Vec<usize> = outcomes.iter().map(|o| o.min_unsat).collect();
    let mut histogram = BTreeMap::new();
    for &m in &minima {
        *histogram.entry(m).or_insert(0) += 1;
    }
    UnsatSummary { minima, histogram }
}

/// Picks one "adjacent" probe pair (sharing a constraint) and one
/// "non-local" pair (no shared constraint) from the model graph.
pub fn select_probe_pairs(
    model: &IlpModel,
) -> (Option<(VarId, VarId)>, Option<(VarId, VarId)>) {
    let n = model.num_vars();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in model.constraints().iter().enumerate() {
        for (_, v) in &c.terms {
            rows[v.0].push(ci);
        }
    }
    let shares = |a: usize, b: usize| -> bool {
        // rows are sorted by construction
        let (mut i, mut j) = (0, 0);
        while i < rows[a].len() && j < rows[b].len() {
            match rows[a][i].cmp(&rows[b][j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    };
    let active: Vec<usize> = (0..n).filter(|&v| !rows[v].is_empty()).collect();
    let mut adjacent = None;
    let mut nonlocal = None;
    'outer: for (ai, &a) in active.iter().enumerate() {
        for &b in active.iter().skip(ai + 1) {
            if adjacent.is_none() && shares(a, b) {
                adjacent = Some((VarId(a), VarId(b)));
            }
            if nonlocal.is_none() && !shares(a, b) {
                nonlocal = Some((VarId(a), VarId(b)));
            }
            if adjacent.is_some() && nonlocal.is_some() {
                break 'outer;
            }
        }
    }
    (adjacent, nonlocal)
}

// ---- file emission -------------------------------------------------------

pub fn tts_histogram_csv(dist: &TtsDistribution) -> String {
    let mut s = String::from("bin_lo_us,bin_hi_us,count\n");
    for b in &dist.bins {
        s.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
    }
    s
}

pub fn correlation_csv(result: &CorrelationResult) -> String {
    let mut s = String::from("tau,c_raw,c_filtered\n");
    for ((tau, c), f) in result
        .taus
        .iter()
        .zip(&result.c_raw)
        .zip(&result.c_filtered)
    {
        s.push_str(&format!("{tau},{c},{f}\n"));
    }
    s
}

pub fn verdict_json(verdict: &Dissipativeness) -> String {
    serde_json::to_string_pretty(verdict).expect("verdict serializes")
}

/// Probe trajectories and the unsat trace of one run as CSV
/// (time, probe voltages, unsat count at the latest check).
pub fn trajectory_csv(outcome: &RunOutcome) -> String {
    let mut header = String::from("time_us");
    for p in &outcome.probes {
        header.push_str(&format!(",v{}", p.var.0));
    }
    header.push_str(",unsat\n");
    let mut s = header;
    let len = outcome
        .probes
        .iter()
        .map(|p| p.samples.len())
        .max()
        .unwrap_or(0);
    let dt = outcome
        .probes
        .first()
        .map(|p| p.sample_dt_us)
        .unwrap_or(1.0);
    let mut trace_idx = 0usize;
    for i in 0..len {
        let t = i as f64 * dt;
        while trace_idx + 1 < outcome.unsat_trace.len()
            && outcome.unsat_trace[trace_idx + 1].0 <= t
        {
            trace_idx += 1;
        }
        let unsat = outcome
            .unsat_trace
            .get(trace_idx)
            .map(|&(_, u)| u)
            .unwrap_or(0);
        s.push_str(&format!("{t}"));
        for p in &outcome.probes {
            let v = p.samples.get(i).copied().unwrap_or(f64::NAN);
            s.push_str(&format!(",{v}"));
        }
        s.push_str(&format!(",{unsat}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::Assignment;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn synthetic_outcome(converged: bool, tts: Option<f64>) -> RunOutcome {
        RunOutcome {
            converged,
            tts_us: tts,
            wall_seconds: 0.0,
            assignment: Assignment::zeros(0),
            unsat_trace: Vec::new(),
            min_unsat: if converged { 0 } else { 3 },
            min_violation_score: 0.0,
            steps: 0,
            sim_time_us: 0.0,
            seed: 0,
            probes: Vec::new(),
            aborted: None,
        }
    }

    fn gamma_samples(shape: f64, scale: f64, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Gamma::new(shape, scale).unwrap();
        (0..count).map(|_| dist.sample(&mut rng)).collect()
    }

    #[test]
    fn trigamma_reference_value() {
        assert!((trigamma(1.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-10);
        assert!((trigamma(5.0) - 0.221322955737115).abs() < 1e-9);
    }

    #[test]
    fn gamma_mle_recovers_planted_parameters() {
        let samples = gamma_samples(2.0, 1.0, 10_000, 42);
        let fit = fit_gamma(&samples).unwrap();
        assert!(fit.shape > 1.9 && fit.shape < 2.1, "shape {}", fit.shape);
        assert!(fit.ks_statistic < 0.02, "ks {}", fit.ks_statistic);
        assert!(!fit.small_sample);
    }

    #[test]
    fn gamma_mle_across_shapes_within_5_percent() {
        for (i, &shape) in [0.5f64, 1.0, 2.0, 5.0].iter().enumerate() {
            let scale = 1.5;
            let samples = gamma_samples(shape, scale, 10_000, 100 + i as u64);
            let fit = fit_gamma(&samples).unwrap();
            assert!(
                (fit.shape - shape).abs() / shape < 0.05,
                "shape {shape}: fitted {}",
                fit.shape
            );
            assert!(
                (fit.scale - scale).abs() / scale < 0.08,
                "scale for shape {shape}: fitted {}",
                fit.scale
            );
        }
    }

    #[test]
    fn exponential_fits_shape_one() {
        let samples = gamma_samples(1.0, 2.0, 10_000, 7);
        let fit = fit_gamma(&samples).unwrap();
        assert!((fit.shape - 1.0).abs() < 0.05, "shape {}", fit.shape);
    }

    #[test]
    fn small_sample_flag_and_degenerate_error() {
        let samples = gamma_samples(2.0, 1.0, 10, 3);
        let fit = fit_gamma(&samples).unwrap();
        assert!(fit.small_sample);
        assert!(fit.shape.is_finite() && fit.shape > 0.0);
        assert!(matches!(fit_gamma(&[2.0; 50]), Err(FitError::Degenerate)));
        assert!(matches!(fit_gamma(&[]), Err(FitError::Empty)));
        assert!(matches!(
            fit_gamma(&[1.0, -2.0]),
            Err(FitError::NonPositiveSample)
        ));
    }

    #[test]
    fn verdict_examples() {
        let cfg = DissipativenessConfig::default();
        // 100% convergence with gamma-shaped TTS.
        let outcomes: Vec<RunOutcome> = gamma_samples(2.0, 10.0, 2000, 5)
            .into_iter()
            .map(|t| synthetic_outcome(true, Some(t)))
            .collect();
        assert!(matches!(
            dissipativeness_verdict(&outcomes, &cfg),
            Dissipativeness::PointDissipative { .. }
        ));

        // 42% convergence.
        let mut outcomes: Vec<RunOutcome> = gamma_samples(2.0, 10.0, 42, 6)
            .into_iter()
            .map(|t| synthetic_outcome(true, Some(t)))
            .collect();
        outcomes.extend((0..58).map(|_| synthetic_outcome(false, None)));
        match dissipativeness_verdict(&outcomes, &cfg) {
            Dissipativeness::NotPointDissipative {
                convergence_fraction,
            } => assert!((convergence_fraction - 0.42).abs() < 1e-12),
            other => panic!("expected not point-dissipative, got {other:?}"),
        }

        // Too few runs.
        let outcomes: Vec<RunOutcome> =
            (0..5).map(|_| synthetic_outcome(true, Some(1.0))).collect();
        assert!(matches!(
            dissipativeness_verdict(&outcomes, &cfg),
            Dissipativeness::Inconclusive { .. }
        ));
    }

    #[test]
    fn crossings_basics() {
        let constant = vec![0.2; 100];
        assert!(threshold_crossings(&constant, 0.5, 1).iter().all(|&f| f == 0.0));

        let mut single = vec![0.1; 50];
        single.extend(vec![0.9; 50]);
        let train = threshold_crossings(&single, 0.5, 1);
        assert_eq!(train.iter().filter(|&&f| f == 1.0).count(), 1);

        // Sawtooth crossing the threshold 2*periods times.
        let periods = 7;
        let mut saw = Vec::new();
        for _ in 0..periods {
            saw.extend([0.1, 0.3, 0.9, 0.7]);
        }
        let train = threshold_crossings(&saw, 0.5, 1);
        let crossings = train.iter().filter(|&&f| f == 1.0).count();
        assert_eq!(crossings, 2 * periods - 1); // last period has no return edge
    }

    fn direct_cross_correlation(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut out = Vec::new();
        for tau in -(n as i64 - 1)..=(n as i64 - 1) {
            let mut acc = 0.0;
            for t in 0..n as i64 {
                let u = t + tau;
                if u >= 0 && (u as usize) < n {
                    acc += a[t as usize] * b[u as usize];
                }
            }
            out.push(acc);
        }
        out
    }

    fn random_train(len: usize, p: f64, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
            .collect()
    }

    #[test]
    fn autocorrelation_is_one_at_zero() {
        let a = random_train(512, 0.2, 1);
        let c = correlation(&a, &a).unwrap();
        assert!((c.c_at(0).unwrap() - 1.0).abs() < 1e-12);
        assert!(c.c_raw.iter().all(|&v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn correlation_symmetry_under_swap() {
        let a = random_train(256, 0.3, 2);
        let b = random_train(256, 0.3, 3);
        let ab = correlation(&a, &b).unwrap();
        let ba = correlation(&b, &a).unwrap();
        for (i, &tau) in ab.taus.iter().enumerate() {
            let j = ba.taus.iter().position(|&t| t == -tau).unwrap();
            assert!(
                (ab.c_raw[i] - ba.c_raw[j]).abs() < 1e-12,
                "C_jk({tau}) != C_kj({})",
                -tau
            );
        }
    }

    #[test]
    fn fft_matches_direct_correlation() {
        let a = random_train(1024, 0.15, 4);
        let b = random_train(1024, 0.15, 5);
        let fftc = correlation(&a, &b).unwrap();
        let direct = direct_cross_correlation(&a, &b);
        for (r_fft, r_dir) in fftc.r_raw.iter().zip(&direct) {
            let scale = r_dir.abs().max(1.0);
            assert!(
                (r_fft - r_dir).abs() / scale < 1e-9,
                "fft {r_fft} vs direct {r_dir}"
            );
        }
    }

    #[test]
    fn zero_energy_guard() {
        let a = vec![0.0; 64];
        let b = random_train(64, 0.3, 8);
        let c = correlation(&a, &b).unwrap();
        assert!(c.c_raw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn independent_trains_stay_below_noise_floor() {
        let len = 100_000;
        // Monte-Carlo noise floor: typical max |C| over independent pairs.
        let mut floor = 0.0;
        let trials = 8;
        for i in 0..trials {
            let a = random_train(len, 0.05, 100 + i);
            let b = random_train(len, 0.05, 200 + i);
            let c = correlation(&a, &b).unwrap();
            let max_c = c.c_raw.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            floor += max_c / trials as f64;
        }
        let a = random_train(len, 0.05, 999);
        let b = random_train(len, 0.05, 1999);
        let c = correlation(&a, &b).unwrap();
        let max_c = c.c_raw.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(
            max_c < 5.0 * floor,
            "max |C| {max_c} above 5x noise floor {floor}"
        );
    }

    #[test]
    fn unsat_summary_minima() {
        let outcomes = vec![
            synthetic_outcome(true, Some(1.0)),
            synthetic_outcome(true, Some(2.0)),
            synthetic_outcome(false, None),
        ];
        let summary = unsat_summary(&outcomes);
        assert_eq!(summary.minima, vec![0, 0, 3]);
        assert_eq!(summary.histogram.get(&0), Some(&2));
        assert_eq!(summary.histogram.get(&3), Some(&1));
    }

    #[test]
    fn bimodal_ensemble_detectable() {
        let mut outcomes: Vec<RunOutcome> =
            (0..40).map(|_| synthetic_outcome(true, Some(1.0))).collect();
        outcomes.extend((0..40).map(|_| synthetic_outcome(false, None)));
        let summary = unsat_summary(&outcomes);
        assert_eq!(summary.histogram.len(), 2);
        assert!(summary.histogram.values().all(|&c| c == 40));
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let c = polyfit(&xs, &ys, 3);
        assert!((c[0] - 1.0).abs() < 1e-9);
        assert!((c[1] + 2.0).abs() < 1e-9);
        assert!(c[2].abs() < 1e-9);
        assert!((c[3] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn probe_pair_selection() {
        use crate::ilp::{constraint, Sense};
        use num_bigint::BigInt;
        use num_traits::One;
        let mut m = IlpModel::new("pairs");
        let a = m.add_var("a", "f");
        let b = m.add_var("b", "f");
        let c = m.add_var("c", "f");
        let d = m.add_var("d", "f");
        m.add_constraint(constraint(
            "ab",
            "f",
            vec![(BigInt::one(), a), (BigInt::one(), b)],
            Sense::Ge,
            1,
        ))
        .unwrap();
        m.add_constraint(constraint(
            "cd",
            "f",
            vec![(BigInt::one(), c), (BigInt::one(), d)],
            Sense::Ge,
            1,
        ))
        .unwrap();
        let (adjacent, nonlocal) = select_probe_pairs(&m);
        let (x, y) = adjacent.unwrap();
        assert_eq!((x, y), (a, b));
        let (x, y) = nonlocal.unwrap();
        assert_eq!((x, y), (a, c));
    }
}
