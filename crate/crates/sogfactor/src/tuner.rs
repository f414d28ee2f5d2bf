//! Parallel-tempering search over per-family design parameters.
//!
//! Each chain proposes Gaussian steps in normalized coordinates, scores the
//! proposal with one short emulator run, and accepts by Metropolis–Hastings
//! on a moment-corrected objective. Because a single short run is a noisy
//! probe of a design, the objective at a point is estimated over the k
//! nearest previously-scored samples. Routines are fully independent;
//! chains within a routine swap states at a fixed cadence.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ilp::IlpModel;
use crate::sog::{derive_seed, run_ensemble, Circuit, DesignParams, ParamError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamScale {
    Linear,
    Log,
}

/// Which family coefficient a space axis controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamField {
    FeedbackGain,
    MemoryGrowth,
    MemoryDecay,
    MemoryInit,
    MemoryCap,
    ResponseGain,
}

impl ParamField {
    fn get(&self, fp: &crate::sog::FamilyParams) -> f64 {
        match self {
            ParamField::FeedbackGain => fp.feedback_gain,
            ParamField::MemoryGrowth => fp.memory_growth,
            ParamField::MemoryDecay => fp.memory_decay,
            ParamField::MemoryInit => fp.memory_init,
            ParamField::MemoryCap => fp.memory_cap,
            ParamField::ResponseGain => fp.response_gain,
        }
    }

    fn set(&self, fp: &mut crate::sog::FamilyParams, value: f64) {
        match self {
            ParamField::FeedbackGain => fp.feedback_gain = value,
            ParamField::MemoryGrowth => fp.memory_growth = value,
            ParamField::MemoryDecay => fp.memory_decay = value,
            ParamField::MemoryInit => fp.memory_init = value,
            ParamField::MemoryCap => fp.memory_cap = value,
            ParamField::ResponseGain => fp.response_gain = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub family: String,
    pub field: ParamField,
    pub lo: f64,
    pub hi: f64,
    pub scale: ParamScale,
}

/// The search space: one axis per (family, field), each normalized to
/// [0, 1] through its bounds and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub params: Vec<ParamDef>,
}

impl ParamSpace {
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Feedback/memory axes for each constraint family plus response gains
    /// for each variable family.
    pub fn standard(constraint_families: &[&str], variable_families: &[&str]) -> Self {
        let mut params = Vec::new();
        for &fam in constraint_families {
            for (field, lo, hi, scale) in [
                (ParamField::FeedbackGain, 0.05, 50.0, ParamScale::Log),
                (ParamField::MemoryGrowth, 0.05, 50.0, ParamScale::Log),
                (ParamField::MemoryDecay, 0.01, 10.0, ParamScale::Log),
                (ParamField::MemoryCap, 1.0, 500.0, ParamScale::Log),
            ] {
                params.push(ParamDef {
                    family: fam.to_string(),
                    field,
                    lo,
                    hi,
                    scale,
                });
            }
        }
        for &fam in variable_families {
            params.push(ParamDef {
                family: fam.to_string(),
                field: ParamField::ResponseGain,
                lo: 0.05,
                hi: 20.0,
                scale: ParamScale::Log,
            });
        }
        ParamSpace { params }
    }

    pub fn validate(&self) -> Result<(), TunerError> {
        for p in &self.params {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return Err(TunerError::BadSpace(format!(
                    "bounds [{}, {}] for {}/{:?}",
                    p.lo, p.hi, p.family, p.field
                )));
            }
            if p.scale == ParamScale::Log && p.lo <= 0.0 {
                return Err(TunerError::BadSpace(format!(
                    "log scale needs positive bounds for {}/{:?}",
                    p.family, p.field
                )));
            }
        }
        Ok(())
    }

    /// Normalized coordinate -> raw value.
    pub fn denormalize(&self, axis: usize, z: f64) -> f64 {
        let p = &self.params[axis];
        let z = z.clamp(0.0, 1.0);
        match p.scale {
            ParamScale::Linear => p.lo + z * (p.hi - p.lo),
            ParamScale::Log => (p.lo.ln() + z * (p.hi.ln() - p.lo.ln())).exp(),
        }
    }

    /// Raw value -> normalized coordinate.
    pub fn normalize(&self, axis: usize, value: f64) -> f64 {
        let p = &self.params[axis];
        let z = match p.scale {
            ParamScale::Linear => (value - p.lo) / (p.hi - p.lo),
            ParamScale::Log => (value.max(f64::MIN_POSITIVE).ln() - p.lo.ln())
                / (p.hi.ln() - p.lo.ln()),
        };
        z.clamp(0.0, 1.0)
    }

    /// Writes a point into a copy of `base`.
    pub fn apply(&self, base: &DesignParams, point: &[f64]) -> DesignParams {
        let mut out = base.clone();
        for (axis, p) in self.params.iter().enumerate() {
            let value = self.denormalize(axis, point[axis]);
            p.field.set(out.family_mut(&p.family), value);
        }
        out
    }

    /// Reads a design back into normalized coordinates.
    pub fn project(&self, params: &DesignParams) -> Vec<f64> {
        self.params
            .iter()
            .enumerate()
            .map(|(axis, p)| self.normalize(axis, p.field.get(params.family(&p.family))))
            .collect()
    }
}

/// One scored probe of the design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub point: Vec<f64>,
    pub score: f64,
    pub converged: bool,
    pub tts_us: Option<f64>,
}

/// Moment-corrected objective: mean − standard deviation + real cube root
/// of the third central moment; lower is better. Population moments.
pub fn objective(scores: &[f64]) -> f64 {
    assert!(!scores.is_empty(), "objective needs at least one score");
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let m3 = scores
        .iter()
        .map(|s| (s - mean) * (s - mean) * (s - mean))
        .sum::<f64>()
        / n;
    mean - var.sqrt() + m3.cbrt()
}

/// Objective over the `k` nearest history samples (normalized Euclidean
/// distance); the newest sample participates by being its own neighbor.
pub fn estimate_objective(history: &[ScoreSample], point: &[f64], k: usize) -> f64 {
    assert!(!history.is_empty(), "estimate needs history");
    let mut by_distance: Vec<(f64, usize)> = history
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let d2: f64 = s
                .point
                .iter()
                .zip(point)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    let take = k.max(1).min(by_distance.len());
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if take < by_distance.len() {
        by_distance.select_nth_unstable_by(take - 1, cmp);
        by_distance.truncate(take);
    }
    let scores: Vec<f64> = by_distance
        .iter()
        .map(|&(_, i)| history[i].score)
        .collect();
    objective(&scores)
}

pub fn mh_accept_probability(delta_obj: f64, temperature: f64) -> f64 {
    if delta_obj <= 0.0 {
        return 1.0;
    }
    if temperature <= 0.0 {
        return 0.0;
    }
    (-delta_obj / temperature).exp().min(1.0)
}

pub fn swap_probability(e_lo: f64, e_hi: f64, t_lo: f64, t_hi: f64) -> f64 {
    if t_lo <= 0.0 || t_hi <= 0.0 {
        return if e_hi <= e_lo { 1.0 } else { 0.0 };
    }
    ((1.0 / t_lo - 1.0 / t_hi) * (e_lo - e_hi)).exp().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperingConfig {
    pub routines: usize,
    pub chains_per_routine: usize,
    pub iterations: u64,
    pub t_min: f64,
    pub t_max: f64,
    /// Simulated-time budget of each scoring run, microseconds.
    pub short_run_budget_us: f64,
    /// Proposal standard deviation in normalized coordinates.
    pub proposal_sigma: f64,
    pub swap_every: u64,
    /// Neighbors used by the objective estimate.
    pub knn: usize,
}

impl Default for TemperingConfig {
    fn default() -> Self {
        // Desk-scale defaults; the reference large configuration is
        // 6 routines x 30 chains.
        TemperingConfig {
            routines: 2,
            chains_per_routine: 10,
            iterations: 500,
            t_min: 0.02,
            t_max: 2.0,
            short_run_budget_us: 30.0,
            proposal_sigma: 0.08,
            swap_every: 10,
            knn: 8,
        }
    }
}

impl TemperingConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        if self.chains_per_routine < 2 {
            return Err(TunerError::BadConfig("need at least 2 chains per routine".into()));
        }
        if self.routines < 1 || self.iterations < 1 {
            return Err(TunerError::BadConfig("need >= 1 routine and iteration".into()));
        }
        if !(self.t_min < self.t_max) {
            return Err(TunerError::BadConfig("need t_min < t_max".into()));
        }
        if !(self.proposal_sigma > 0.0) {
            return Err(TunerError::BadConfig("proposal sigma must be positive".into()));
        }
        Ok(())
    }

    fn ladder(&self) -> Vec<f64> {
        let c = self.chains_per_routine;
        (0..c)
            .map(|i| {
                let frac = i as f64 / (c - 1) as f64;
                self.t_min * (self.t_max / self.t_min).powf(frac)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TunerError {
    BadConfig(String),
    BadSpace(String),
    Emulator(ParamError),
}

impl std::fmt::Display for TunerError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TunerError::BadConfig(m) | TunerError::BadSpace(m) => write!(f, "{m}"),
            TunerError::Emulator(e) => write!(f, "emulator: {e}"),
        }
    }
}

impl std::error::Error for TunerError {}

/// Scores one design point; implemented by the emulator and by synthetic
/// surfaces in tests.
pub trait Scorer: Sync {
    fn score(&self, point: &[f64], seed: u64) -> ScoreSample;
}

/// One short emulator run per probe; the score is the run's minimum summed
/// violation gap (zero exactly when it converged).
pub struct EmulatorScorer<'a> {
    pub model: &'a Arc<IlpModel>,
    pub base: &'a DesignParams,
    pub space: &'a ParamSpace,
    pub budget_us: f64,
}

impl Scorer for EmulatorScorer<'_> {
    fn score(&self, point: &[f64], seed: u64) -> ScoreSample {
        let mut params = self.space.apply(self.base, point);
        params.global.time_budget_us = self.budget_us;
        let mut circuit = Circuit::build(Arc::clone(self.model), &params)
            .expect("scored design must be valid");
        let outcome = circuit.run(seed);
        ScoreSample {
            point: point.to_vec(),
            score: outcome.min_violation_score,
            converged: outcome.converged,
            tts_us: outcome.tts_us,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainState {
    pub point: Vec<f64>,
    pub objective: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub point: Vec<f64>,
    pub objective: f64,
    pub converged_during_search: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub ranked: Vec<RankedCandidate>,
    /// Every sample, all routines concatenated (routine-major).
    pub samples: Vec<ScoreSample>,
    pub chains: Vec<Vec<ChainState>>,
    /// Best estimated objective after each iteration (over all routines).
    pub best_trace: Vec<f64>,
    pub iterations_done: u64,
    pub master_seed: u64,
    pub segment: u32,
}

/// Resumable session state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningCheckpoint {
    pub master_seed: u64,
    pub segment: u32,
    pub iterations_done: u64,
    pub space: ParamSpace,
    pub config: TemperingConfig,
    pub chains: Vec<Vec<ChainState>>,
    pub samples_per_routine: Vec<Vec<ScoreSample>>,
}

impl TuningCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

struct RoutineState {
    chains: Vec<ChainState>,
    history: Vec<ScoreSample>,
    rngs: Vec<ChaCha8Rng>,
    seed: u64,
}

fn init_routine<S: Scorer>(
    scorer: &S,
    space: &ParamSpace,
    cfg: &TemperingConfig,
    routine_seed: u64,
    warm_start: Option<&[Vec<f64>]>,
    knn: usize,
) -> RoutineState {
    let d = space.dim();
    let ladder = cfg.ladder();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.chains_per_routine)
        .map(|c| ChaCha8Rng::seed_from_u64(derive_seed(routine_seed, 0xc0 + c as u64)))
        .collect();
    let points: Vec<Vec<f64>> = (0..cfg.chains_per_routine)
        .map(|c| match warm_start {
            Some(ws) if !ws.is_empty() => ws[c % ws.len()].clone(),
            _ => (0..d).map(|_| rngs[c].gen::<f64>()).collect(),
        })
        .collect();
    let mut history = Vec::new();
    let mut chains = Vec::new();
    for (c, point) in points.into_iter().enumerate() {
        let sample = scorer.score(&point, derive_seed(routine_seed, 0x5000 + c as u64));
        history.push(sample);
        let obj = estimate_objective(&history, &point, knn);
        chains.push(ChainState {
            point,
            objective: obj,
            temperature: ladder[c],
        });
    }
    RoutineState {
        chains,
        history,
        rngs,
        seed: routine_seed,
    }
}

fn advance_routine<S: Scorer>(
    scorer: &S,
    space: &ParamSpace,
    cfg: &TemperingConfig,
    state: &mut RoutineState,
    iter_offset: u64,
    iterations: u64,
    best_trace: &mut Vec<f64>,
) {
    let d = space.dim();
    let normal = Normal::new(0.0, cfg.proposal_sigma).expect("sigma validated");
    for it in 0..iterations {
        let iter = iter_offset + it;
        // Propose serially (cheap, keeps RNG streams deterministic), score
        // in parallel (the expensive part), then accept serially.
        let proposals: Vec<Vec<f64>> = state
            .chains
            .iter()
            .enumerate()
            .map(|(c, chain)| {
                let rng = &mut state.rngs[c];
                (0..d)
                    .map(|a| (chain.point[a] + normal.sample(rng)).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        let seeds: Vec<u64> = (0..state.chains.len())
            .map(|c| derive_seed(state.seed, (iter + 1) * 1000 + c as u64))
            .collect();
        let scored: Vec<ScoreSample> = proposals
            .par_iter()
            .zip(&seeds)
            .map(|(p, &s)| scorer.score(p, s))
            .collect();

        for (c, sample) in scored.into_iter().enumerate() {
            state.history.push(sample.clone());
            let est_new = estimate_objective(&state.history, &sample.point, cfg.knn);
            let est_cur =
                estimate_objective(&state.history, &state.chains[c].point, cfg.knn);
            state.chains[c].objective = est_cur;
            let accept = mh_accept_probability(est_new - est_cur, state.chains[c].temperature);
            if state.rngs[c].gen::<f64>() < accept {
                state.chains[c].point = sample.point;
                state.chains[c].objective = est_new;
            }
        }

        if cfg.swap_every > 0 && (iter + 1) % cfg.swap_every == 0 {
            for c in 0..state.chains.len() - 1 {
                let p = swap_probability(
                    state.chains[c].objective,
                    state.chains[c + 1].objective,
                    state.chains[c].temperature,
                    state.chains[c + 1].temperature,
                );
                if state.rngs[c].gen::<f64>() < p {
                    let (lo, hi) = state.chains.split_at_mut(c + 1);
                    std::mem::swap(&mut lo[c].point, &mut hi[0].point);
                    std::mem::swap(&mut lo[c].objective, &mut hi[0].objective);
                }
            }
        }

        let best_now = state
            .chains
            .iter()
            .map(|ch| ch.objective)
            .fold(f64::INFINITY, f64::min);
        let prev = best_trace.last().copied().unwrap_or(f64::INFINITY);
        best_trace.push(best_now.min(prev));
    }
}

fn collect_outcome(
    routines: Vec<RoutineState>,
    cfg: &TemperingConfig,
    best_traces: Vec<Vec<f64>>,
    iterations_done: u64,
    master_seed: u64,
    segment: u32,
) -> TuningOutcome {
    // Candidate pool: every chain endpoint plus the best converged samples,
    // re-estimated against the full routine history and ranked.
    let mut ranked = Vec::new();
    for routine in &routines {
        for chain in &routine.chains {
            let obj = estimate_objective(&routine.history, &chain.point, cfg.knn);
            ranked.push(RankedCandidate {
                point: chain.point.clone(),
                objective: obj,
                converged_during_search: false,
            });
        }
        let mut converged: Vec<&ScoreSample> =
            routine.history.iter().filter(|s| s.converged).collect();
        converged.sort_by(|a, b| {
            a.tts_us
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.tts_us.unwrap_or(f64::INFINITY))
        });
        for s in converged.into_iter().take(8) {
            ranked.push(RankedCandidate {
                point: s.point.clone(),
                objective: estimate_objective(&routine.history, &s.point, cfg.knn),
                converged_during_search: true,
            });
        }
    }
    ranked.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    ranked.dedup_by(|a, b| a.point == b.point);

    // Merge per-iteration best traces across routines (global running min).
    let len = best_traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut best_trace = Vec::with_capacity(len);
    for i in 0..len {
        let v = best_traces
            .iter()
            .filter_map(|t| t.get(i))
            .fold(f64::INFINITY, |m, &x| m.min(x));
        best_trace.push(v);
    }

    let samples = routines
        .iter()
        .flat_map(|r| r.history.iter().cloned())
        .collect();
    let chains = routines.into_iter().map(|r| r.chains).collect();
    TuningOutcome {
        ranked,
        samples,
        chains,
        best_trace,
        iterations_done,
        master_seed,
        segment,
    }
}

/// Runs the full tempering search from scratch.
pub fn run_parallel_tempering<S: Scorer>(
    scorer: &S,
    space: &ParamSpace,
    cfg: &TemperingConfig,
    master_seed: u64,
    warm_start: Option<&[Vec<f64>]>,
) -> Result<TuningOutcome, TunerError> {
    cfg.validate()?;
    space.validate()?;
    let segment = 0u32;
    let seg_seed = derive_seed(master_seed, segment as u64);
    let mut routines = Vec::new();
    let mut traces = Vec::new();
    for r in 0..cfg.routines {
        let routine_seed = derive_seed(seg_seed, r as u64);
        let mut state = init_routine(scorer, space, cfg, routine_seed, warm_start, cfg.knn);
        let mut trace = Vec::new();
        advance_routine(scorer, space, cfg, &mut state, 0, cfg.iterations, &mut trace);
        routines.push(state);
        traces.push(trace);
    }
    Ok(collect_outcome(
        routines,
        cfg,
        traces,
        cfg.iterations,
        master_seed,
        segment,
    ))
}

impl TuningOutcome {
    pub fn checkpoint(
        &self,
        space: &ParamSpace,
        cfg: &TemperingConfig,
        samples_per_routine: Vec<Vec<ScoreSample>>,
    ) -> TuningCheckpoint {
        TuningCheckpoint {
            master_seed: self.master_seed,
            segment: self.segment,
            iterations_done: self.iterations_done,
            space: space.clone(),
            config: cfg.clone(),
            chains: self.chains.clone(),
            samples_per_routine,
        }
    }
}

/// Continues a checkpointed session for another `cfg.iterations`
/// iterations; chain RNG streams are re-derived from the next segment
/// index, so resuming never replays old proposals.
pub fn resume_parallel_tempering<S: Scorer>(
    scorer: &S,
    checkpoint: &TuningCheckpoint,
) -> Result<TuningOutcome, TunerError> {
    let cfg = &checkpoint.config;
    let space = &checkpoint.space;
    cfg.validate()?;
    space.validate()?;
    let segment = checkpoint.segment + 1;
    let seg_seed = derive_seed(checkpoint.master_seed, segment as u64);
    let mut routines = Vec::new();
    let mut traces = Vec::new();
    for r in 0..cfg.routines {
        let routine_seed = derive_seed(seg_seed, r as u64);
        let rngs = (0..cfg.chains_per_routine)
            .map(|c| ChaCha8Rng::seed_from_u64(derive_seed(routine_seed, 0xc0 + c as u64)))
            .collect();
        let mut state = RoutineState {
            chains: checkpoint.chains.get(r).cloned().unwrap_or_default(),
            history: checkpoint
                .samples_per_routine
                .get(r)
                .cloned()
                .unwrap_or_default(),
            rngs,
            seed: routine_seed,
        };
        if state.chains.is_empty() {
            state = init_routine(scorer, space, cfg, routine_seed, None, cfg.knn);
        }
        let mut trace = Vec::new();
        advance_routine(scorer, space, cfg, &mut state, 0, cfg.iterations, &mut trace);
        routines.push(state);
        traces.push(trace);
    }
    Ok(collect_outcome(
        routines,
        cfg,
        traces,
        checkpoint.iterations_done + cfg.iterations,
        checkpoint.master_seed,
        segment,
    ))
}

#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub params: DesignParams,
    pub convergence_probability: f64,
    pub mean_tts_us: Option<f64>,
}

/// Reruns each candidate over `n_ics` fresh initial conditions and
/// re-ranks by (probability desc, mean tts asc).
pub fn postprocess_convergence(
    candidates: &[DesignParams],
    model: &Arc<IlpModel>,
    n_ics: usize,
    budget_us: f64,
    master_seed: u64,
) -> Result<Vec<CandidateReport>, ParamError> {
    let mut reports = Vec::new();
    for (i, params) in candidates.iter().enumerate() {
        let ensemble = run_ensemble(
            model,
            params,
            n_ics,
            derive_seed(master_seed, i as u64),
            Some(budget_us),
        )?;
        reports.push(CandidateReport {
            params: params.clone(),
            convergence_probability: ensemble.convergence_fraction,
            mean_tts_us: ensemble.mean_tts_us(),
        });
    }
    reports.sort_by(|a, b| {
        b.convergence_probability
            .total_cmp(&a.convergence_probability)
            .then(
                a.mean_tts_us
                    .unwrap_or(f64::INFINITY)
                    .total_cmp(&b.mean_tts_us.unwrap_or(f64::INFINITY)),
            )
    });
    Ok(reports)
}

/// Chain starting points for a larger problem from designs tuned at a
/// smaller one: overlapping families copy their values, new families start
/// at the axis midpoint, and every chain gets an independent jitter.
pub fn continuation_warm_start(
    previous: &[DesignParams],
    space: &ParamSpace,
    chains: usize,
    jitter: f64,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = space.dim();
    let overlap = previous.iter().any(|p| {
        space
            .params
            .iter()
            .any(|def| p.families.contains_key(&def.family))
    });
    if !overlap {
        log::warn!("no family overlap with previous designs; starting from random points");
        return (0..chains)
            .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
            .collect();
    }
    let base_points: Vec<Vec<f64>> = previous
        .iter()
        .map(|prev| {
            space
                .params
                .iter()
                .enumerate()
                .map(|(axis, def)| {
                    if prev.families.contains_key(&def.family) {
                        space.normalize(axis, def.field.get(prev.family(&def.family)))
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    (0..chains)
        .map(|c| {
            let base = &base_points[c % base_points.len()];
            base.iter()
                .map(|&z| (z + rng.gen_range(-jitter..=jitter)).clamp(0.0, 1.0))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    #[test]
    fn objective_examples() {
        assert_eq!(objective(&[5.0, 5.0, 5.0]), 5.0);
        assert_eq!(objective(&[3.5]), 3.5);
        let expected = (10.0 - 200.0f64.sqrt() + 2000.0f64.cbrt()) / 3.0;
        assert!((objective(&[0.0, 0.0, 10.0]) - expected).abs() < 1e-12);
        // Permutation invariance.
        let a = objective(&[1.0, 4.0, 9.0, 16.0]);
        let b = objective(&[16.0, 1.0, 9.0, 4.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn objective_handles_negative_skew() {
        // m3 < 0: the real cube root keeps the sign.
        let scores = [0.0, 9.0, 10.0, 10.0, 10.0];
        let n = scores.len() as f64;
        let mean: f64 = scores.iter().sum::<f64>() / n;
        let m3: f64 = scores.iter().map(|s| (s - mean).powi(3)).sum::<f64>() / n;
        assert!(m3 < 0.0);
        assert!(objective(&scores).is_finite());
    }

    #[test]
    fn knn_uses_only_the_near_cluster() {
        let mut history = Vec::new();
        for i in 0..5 {
            history.push(ScoreSample {
                point: vec![0.1 + i as f64 * 1e-3],
                score: 1.0,
                converged: false,
                tts_us: None,
            });
        }
        for i in 0..5 {
            history.push(ScoreSample {
                point: vec![0.9 + i as f64 * 1e-3],
                score: 100.0,
                converged: false,
                tts_us: None,
            });
        }
        let est = estimate_objective(&history, &[0.1], 5);
        assert_eq!(est, 1.0, "all five neighbors come from the near cluster");
        // k beyond the history size uses everything.
        let est_all = estimate_objective(&history, &[0.1], 50);
        let all_scores: Vec<f64> = history.iter().map(|s| s.score).collect();
        assert_eq!(est_all, objective(&all_scores));
    }

    #[test]
    fn mh_and_swap_probabilities() {
        assert_eq!(mh_accept_probability(-1.0, 0.5), 1.0);
        assert!((mh_accept_probability(1.0, 0.5) - (-2.0f64).exp()).abs() < 1e-15);
        assert!((mh_accept_probability(0.3, 1.5) - (-0.2f64).exp()).abs() < 1e-15);
        assert_eq!(mh_accept_probability(1.0, 0.0), 0.0);
        // Equal objectives swap with probability 1 at any temperatures.
        assert_eq!(swap_probability(2.0, 2.0, 0.1, 1.0), 1.0);
        // Equal temperatures swap with probability 1 regardless of energy.
        assert_eq!(swap_probability(5.0, 1.0, 0.7, 0.7), 1.0);
        assert_eq!(swap_probability(1.0, 5.0, 0.7, 0.7), 1.0);
    }

    /// Deterministic synthetic surface: score = squared distance to a
    /// planted optimum.
    struct Quadratic {
        target: Vec<f64>,
        calls: AtomicU64,
    }

    impl Quadratic {
        fn new(target: Vec<f64>) -> Self {
            Quadratic {
                target,
                calls: AtomicU64::new(0),
            }
        }
    }

    impl Scorer for Quadratic {
        fn score(&self, point: &[f64], _seed: u64) -> ScoreSample {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let score: f64 = point
                .iter()
                .zip(&self.target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            ScoreSample {
                point: point.to_vec(),
                score,
                converged: false,
                tts_us: None,
            }
        }
    }

    fn unit_space(d: usize) -> ParamSpace {
        ParamSpace {
            params: (0..d)
                .map(|i| ParamDef {
                    family: format!("f{i}"),
                    field: ParamField::FeedbackGain,
                    lo: 0.0,
                    hi: 1.0,
                    scale: ParamScale::Linear,
                })
                .collect(),
        }
    }

    #[test]
    fn near_zero_temperature_best_is_monotone() {
        let scorer = Quadratic::new(vec![0.25, 0.75]);
        let space = unit_space(2);
        let cfg = TemperingConfig {
            routines: 1,
            chains_per_routine: 2,
            iterations: 200,
            t_min: 1e-15,
            t_max: 2e-15,
            short_run_budget_us: 0.0,
            proposal_sigma: 0.05,
            swap_every: 50,
            knn: 1,
        };
        let out = run_parallel_tempering(&scorer, &space, &cfg, 42, None).unwrap();
        for w in out.best_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "best objective must not increase");
        }
    }

    #[test]
    fn planted_quadratic_is_found() {
        let target = vec![0.3, 0.6, 0.2, 0.8];
        let scorer = Quadratic::new(target.clone());
        let space = unit_space(4);
        let cfg = TemperingConfig {
            routines: 1,
            chains_per_routine: 8,
            iterations: 2000,
            t_min: 1e-4,
            t_max: 0.5,
            short_run_budget_us: 0.0,
            proposal_sigma: 0.06,
            swap_every: 10,
            knn: 1,
        };
        let out = run_parallel_tempering(&scorer, &space, &cfg, 7, None).unwrap();
        let best = &out.ranked[0];
        let dist: f64 = best
            .point
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // Within 5% of the parameter-space diagonal (sqrt(4) = 2).
        assert!(dist <= 0.10, "best point {:?} is {dist} from the optimum", best.point);
    }

    #[test]
    fn tempering_is_deterministic() {
        let scorer = Quadratic::new(vec![0.5, 0.5, 0.5]);
        let space = unit_space(3);
        let cfg = TemperingConfig {
            routines: 2,
            chains_per_routine: 4,
            iterations: 50,
            short_run_budget_us: 0.0,
            ..TemperingConfig::default()
        };
        let a = run_parallel_tempering(&scorer, &space, &cfg, 11, None).unwrap();
        let b = run_parallel_tempering(&scorer, &space, &cfg, 11, None).unwrap();
        assert_eq!(a.best_trace, b.best_trace);
        assert_eq!(a.ranked[0].point, b.ranked[0].point);
        assert_eq!(a.samples.len(), b.samples.len());
    }

    #[test]
    fn checkpoint_resume_continues_iterations() {
        let scorer = Quadratic::new(vec![0.4, 0.4]);
        let space = unit_space(2);
        let cfg = TemperingConfig {
            routines: 1,
            chains_per_routine: 3,
            iterations: 40,
            short_run_budget_us: 0.0,
            ..TemperingConfig::default()
        };
        let first = run_parallel_tempering(&scorer, &space, &cfg, 5, None).unwrap();
        assert_eq!(first.iterations_done, 40);
        // Rebuild per-routine histories from the flat sample list.
        let per_routine = vec![first.samples.clone()];
        let ck = first.checkpoint(&space, &cfg, per_routine);
        let text = ck.to_json();
        let ck = TuningCheckpoint::from_json(&text).unwrap();
        let resumed = resume_parallel_tempering(&scorer, &ck).unwrap();
        assert_eq!(resumed.iterations_done, 80);
        assert_eq!(resumed.segment, 1);
        // The second segment keeps the accumulated history and state.
        assert!(resumed.samples.len() > first.samples.len());
        for w in resumed.best_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn continuation_copies_overlapping_families() {
        let space = ParamSpace {
            params: vec![
                ParamDef {
                    family: "soand".into(),
                    field: ParamField::FeedbackGain,
                    lo: 0.1,
                    hi: 10.0,
                    scale: ParamScale::Log,
                },
                ParamDef {
                    family: "brand-new".into(),
                    field: ParamField::FeedbackGain,
                    lo: 0.1,
                    hi: 10.0,
                    scale: ParamScale::Log,
                },
            ],
        };
        let mut prev = DesignParams::default();
        prev.family_mut("soand").feedback_gain = 5.0;
        let points = continuation_warm_start(&[prev], &space, 6, 0.0, 3);
        assert_eq!(points.len(), 6);
        for p in &points {
            let restored = space.denormalize(0, p[0]);
            assert!((restored - 5.0).abs() < 1e-9, "copied value, got {restored}");
            assert!((p[1] - 0.5).abs() < 1e-12, "new family starts at midpoint");
        }
        // Jitter spreads the copies.
        let jittered = continuation_warm_start(
            &[{
                let mut p = DesignParams::default();
                p.family_mut("soand").feedback_gain = 5.0;
                p
            }],
            &space,
            6,
            0.05,
            3,
        );
        let distinct: std::collections::BTreeSet<String> = jittered
            .iter()
            .map(|p| format!("{:.6}", p[0]))
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn continuation_disjoint_families_fall_back_to_random() {
        let space = unit_space(3); // families f0..f2
        let mut prev = DesignParams::default();
        prev.family_mut("unrelated").feedback_gain = 9.0;
        let points = continuation_warm_start(&[prev], &space, 4, 0.0, 9);
        assert_eq!(points.len(), 4);
        let distinct: std::collections::BTreeSet<String> = points
            .iter()
            .map(|p| format!("{:.9}", p[0]))
            .collect();
        assert!(distinct.len() > 1, "random fallback must vary across chains");
    }

    #[test]
    fn warm_start_beats_cold_start_on_shifted_surface() {
        // Tune on surface A, warm-start on a nearby surface B; the warm
        // session should cross a fixed objective threshold in fewer
        // iterations (median over 3 seeds).
        let space = unit_space(3);
        let target_a = vec![0.30, 0.70, 0.40];
        let target_b = vec![0.35, 0.65, 0.45];
        let cfg = TemperingConfig {
            routines: 1,
            chains_per_routine: 4,
            iterations: 300,
            t_min: 1e-4,
            t_max: 0.3,
            short_run_budget_us: 0.0,
            proposal_sigma: 0.04,
            swap_every: 10,
            knn: 1,
        };
        let threshold = 0.003;
        let crossing = |trace: &[f64]| -> usize {
            trace
                .iter()
                .position(|&v| v < threshold)
                .unwrap_or(trace.len())
        };
        let mut wins = 0;
        for seed in [1u64, 2, 3] {
            let scorer_a = Quadratic::new(target_a.clone());
            let tuned = run_parallel_tempering(&scorer_a, &space, &cfg, seed, None).unwrap();
            let warm_points: Vec<Vec<f64>> =
                tuned.ranked.iter().take(4).map(|r| r.point.clone()).collect();

            let scorer_b = Quadratic::new(target_b.clone());
            let warm =
                run_parallel_tempering(&scorer_b, &space, &cfg, seed + 100, Some(&warm_points))
                    .unwrap();
            let cold = run_parallel_tempering(&scorer_b, &space, &cfg, seed + 100, None).unwrap();
            if crossing(&warm.best_trace) <= crossing(&cold.best_trace) {
                wins += 1;
            }
        }
        assert!(wins >= 2, "warm start won only {wins}/3 seeds");
    }

    #[test]
    fn config_validation() {
        let mut cfg = TemperingConfig::default();
        cfg.chains_per_routine = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = TemperingConfig::default();
        cfg.t_min = cfg.t_max;
        assert!(cfg.validate().is_err());
        let space = ParamSpace {
            params: vec![ParamDef {
                family: "f".into(),
                field: ParamField::FeedbackGain,
                lo: 0.0,
                hi: 1.0,
                scale: ParamScale::Log,
            }],
        };
        assert!(space.validate().is_err(), "log scale needs positive lower bound");
    }

    #[test]
    fn space_apply_and_project_round_trip() {
        let space = ParamSpace::standard(&["soand", "soag"], &["x-bits"]);
        let base = DesignParams::default();
        let point: Vec<f64> = (0..space.dim()).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let params = space.apply(&base, &point);
        let back = space.project(&params);
        for (a, b) in point.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
