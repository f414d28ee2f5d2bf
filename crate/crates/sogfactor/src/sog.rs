//! Continuous-time self-organizing-gate network emulator.
//!
//! Every binary variable is a voltage line in [0,1]; every linear inequality
//! is a feedback unit with its own memory. A unit whose inequality is
//! satisfied contributes exactly zero feedback; a violated unit pushes the
//! voltages of its terminals toward satisfaction with a strength that grows
//! with the violation's age. Convergence is only ever declared after the
//! thresholded assignment passes an exact integer re-evaluation of the
//! model — the floating-point trajectory is a search heuristic, not the
//! arbiter.
//!
//! The dynamics here is a reference design committed to the behavioral
//! contract (threshold encoding, feedback ceasing at satisfaction,
//! equilibria = solutions, box-bounded state); it is deliberately swappable
//! behind [`Circuit::step`].

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ilp::{Assignment, EvalResult, IlpModel, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowNorm {
    MaxAbs,
    None,
}

/// Per-family tunable coefficients. Constraint families use the feedback
/// and memory fields; variable families use `response_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub feedback_gain: f64,
    pub memory_growth: f64,
    pub memory_decay: f64,
    pub memory_init: f64,
    pub memory_cap: f64,
    pub row_normalization: RowNorm,
    pub response_gain: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            feedback_gain: 2.0,
            memory_growth: 4.0,
            memory_decay: 1.0,
            memory_init: 0.0,
            memory_cap: 50.0,
            row_normalization: RowNorm::MaxAbs,
            response_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalParams {
    /// Integration step, simulated microseconds.
    pub dt_us: f64,
    /// Voltage threshold separating logical 0 from 1.
    pub threshold: f64,
    pub init_lo: f64,
    pub init_hi: f64,
    /// Exact convergence check cadence, in steps.
    pub convergence_check_every: u32,
    /// Simulated-time budget per run, microseconds.
    pub time_budget_us: f64,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            dt_us: 1e-3,
            threshold: 0.5,
            init_lo: 0.0,
            init_hi: 1.0,
            convergence_check_every: 10,
            time_budget_us: 100.0,
        }
    }
}

/// The complete design: global integration settings plus one coefficient
/// set per family tag. Unknown tags fall back to `default_family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub global: GlobalParams,
    pub families: BTreeMap<String, FamilyParams>,
    pub default_family: FamilyParams,
}

impl Default for DesignParams {
    fn default() -> Self {
        DesignParams {
            global: GlobalParams::default(),
            families: BTreeMap::new(),
            default_family: FamilyParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamError {
    NotFinite,
    Negative,
    BadThreshold(f64),
    BadDt(f64),
    MemoryInitAboveCap { family: String },
}

impl std::fmt::Display for ParamError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamError::NotFinite => write!(f, "design coefficients must be finite"),
            ParamError::Negative => write!(f, "design coefficients must be nonnegative"),
            ParamError::BadThreshold(t) => write!(f, "threshold must be in (0,1), got {t}"),
            ParamError::BadDt(d) => write!(f, "dt must be positive, got {d}"),
            ParamError::MemoryInitAboveCap { family } => {
                write!(f, "memory_init exceeds memory_cap in family {family}")
            }
        }
    }
}

impl std::error::Error for ParamError {}

impl DesignParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        let g = &self.global;
        if !(g.dt_us.is_finite() && g.dt_us > 0.0) {
            return Err(ParamError::BadDt(g.dt_us));
        }
        if !(g.threshold > 0.0 && g.threshold < 1.0) {
            return Err(ParamError::BadThreshold(g.threshold));
        }
        if !g.time_budget_us.is_finite() || g.time_budget_us < 0.0 {
            return Err(ParamError::Negative);
        }
        let check = |name: &str, fp: &FamilyParams| -> Result<(), ParamError> {
            let coeffs = [
                fp.feedback_gain,
                fp.memory_growth,
                fp.memory_decay,
                fp.memory_init,
                fp.memory_cap,
                fp.response_gain,
            ];
            if coeffs.iter().any(|v| !v.is_finite()) {
                return Err(ParamError::NotFinite);
            }
            if coeffs.iter().any(|&v| v < 0.0) {
                return Err(ParamError::Negative);
            }
            if fp.memory_init > fp.memory_cap {
                return Err(ParamError::MemoryInitAboveCap {
                    family: name.to_string(),
                });
            }
            Ok(())
        };
        check("default", &self.default_family)?;
        for (name, fp) in &self.families {
            check(name, fp)?;
        }
        Ok(())
    }

    pub fn family(&self, tag: &str) -> &FamilyParams {
        self.families.get(tag).unwrap_or(&self.default_family)
    }

    pub fn family_mut(&mut self, tag: &str) -> &mut FamilyParams {
        if !self.families.contains_key(tag) {
            let fresh = self.default_family.clone();
            self.families.insert(tag.to_string(), fresh);
        }
        self.families.get_mut(tag).unwrap()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design params serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Exact integer view of a constraint, used for convergence checks.
enum ExactRow {
    Small {
        terms: Vec<(i128, u32)>,
        sense: Sense,
        rhs: i128,
    },
    Big {
        terms: Vec<(BigInt, u32)>,
        sense: Sense,
        rhs: BigInt,
    },
}

impl ExactRow {
    fn satisfied(&self, bits: &[bool]) -> bool {
        match self {
            ExactRow::Small { terms, sense, rhs } => {
                let mut lhs = 0i128;
                for (c, v) in terms {
                    if bits[*v as usize] {
                        lhs += c;
                    }
                }
                match sense {
                    Sense::Le => lhs <= *rhs,
                    Sense::Ge => lhs >= *rhs,
                    Sense::Eq => lhs == *rhs,
                }
            }
            ExactRow::Big { terms, sense, rhs } => {
                let mut lhs = BigInt::from(0);
                for (c, v) in terms {
                    if bits[*v as usize] {
                        lhs += c;
                    }
                }
                match sense {
                    Sense::Le => lhs <= *rhs,
                    Sense::Ge => lhs >= *rhs,
                    Sense::Eq => lhs == *rhs,
                }
            }
        }
    }
}

fn exact_rows(model: &IlpModel) -> Vec<ExactRow> {
    model
        .constraints()
        .iter()
        .map(|c| {
            let sum_ok = c
                .terms
                .iter()
                .map(|(coeff, _)| coeff.magnitude().bits())
                .max()
                .unwrap_or(0)
                < 100
                && c.terms.len() < (1 << 20)
                && c.rhs.magnitude().bits() < 100;
            if sum_ok {
                ExactRow::Small {
                    terms: c
                        .terms
                        .iter()
                        .map(|(coeff, v)| (coeff.to_i128().unwrap(), v.0 as u32))
                        .collect(),
                    sense: c.sense,
                    rhs: c.rhs.to_i128().unwrap(),
                }
            } else {
                ExactRow::Big {
                    terms: c
                        .terms
                        .iter()
                        .map(|(coeff, v)| (coeff.clone(), v.0 as u32))
                        .collect(),
                    sense: c.sense,
                    rhs: c.rhs.clone(),
                }
            }
        })
        .collect()
}

/// One canonical `sum coef*v <= bound` feedback unit.
struct Unit {
    term_start: u32,
    term_len: u32,
    bound: f64,
    family: u16,
}

struct FamilyTable {
    gamma: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    x0: Vec<f64>,
    xmax: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProbeTrace {
    pub var: VarId,
    pub sample_dt_us: f64,
    pub samples: Vec<f64>,
}

/// Result of one emulation run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub converged: bool,
    /// Simulated time to solution, microseconds.
    pub tts_us: Option<f64>,
    pub wall_seconds: f64,
    pub assignment: Assignment,
    /// (simulated time, unsat count) at the convergence checks; decimated
    /// to a bounded number of points on long runs.
    pub unsat_trace: Vec<(f64, usize)>,
    pub min_unsat: usize,
    /// Minimum over checks of the summed normalized violation gaps of the
    /// rounded assignment; exactly 0.0 on convergence.
    pub min_violation_score: f64,
    pub steps: u64,
    pub sim_time_us: f64,
    pub seed: u64,
    pub probes: Vec<ProbeTrace>,
    pub aborted: Option<String>,
}

const TRACE_CAP: usize = 4096;

/// The emulated circuit: voltages per variable, one memory per unit.
pub struct Circuit {
    model: Arc<IlpModel>,
    params: DesignParams,
    units: Vec<Unit>,
    term_coef: Vec<f64>,
    term_var: Vec<u32>,
    fams: FamilyTable,
    kappa: Vec<f64>, // per-variable response gain
    exact: Vec<ExactRow>,
    pub voltages: Vec<f64>,
    pub memories: Vec<f64>,
    pub sim_time_us: f64,
    probes: Vec<VarId>,
    probe_stride: u64,
    dv: Vec<f64>,
}

impl Clone for Circuit {
    fn clone(&self) -> Self {
        Circuit::build(Arc::clone(&self.model), &self.params).expect("clone of a valid circuit")
    }
}

impl Circuit {
    /// Builds the network: equalities split into a <=/>= unit pair, rows
    /// normalized per family policy, families resolved to parameter sets.
    pub fn build(model: Arc<IlpModel>, params: &DesignParams) -> Result<Circuit, ParamError> {
        params.validate()?;

        let mut fam_names: Vec<String> = Vec::new();
        let mut fam_index: BTreeMap<String, u16> = BTreeMap::new();
        let mut warned: BTreeSet<String> = BTreeSet::new();

        let mut units = Vec::new();
        let mut term_coef = Vec::new();
        let mut term_var = Vec::new();

        for c in model.constraints() {
            if !params.families.contains_key(&c.family) && warned.insert(c.family.clone()) {
                log::warn!(
                    "constraint family '{}' has no design parameters; using defaults",
                    c.family
                );
            }
            let fam = match fam_index.get(c.family.as_str()) {
                Some(&i) => i,
                None => {
                    let i = fam_names.len() as u16;
                    fam_names.push(c.family.clone());
                    fam_index.insert(c.family.clone(), i);
                    i
                }
            };
            let fp = params.family(&c.family);
            let directions: &[f64] = match c.sense {
                Sense::Le => &[1.0],
                Sense::Ge => &[-1.0],
                Sense::Eq => &[1.0, -1.0],
            };
            for &dir in directions {
                let mut coeffs: Vec<f64> = Vec::with_capacity(c.terms.len());
                for (coeff, _) in &c.terms {
                    coeffs.push(dir * bigint_to_f64(coeff));
                }
                let mut bound = dir * bigint_to_f64(&c.rhs);
                if fp.row_normalization == RowNorm::MaxAbs {
                    let norm = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                    if norm > 0.0 {
                        for v in coeffs.iter_mut() {
                            *v /= norm;
                        }
                        bound /= norm;
                    }
                }
                let start = term_coef.len() as u32;
                for (coeff, (_, var)) in coeffs.iter().zip(&c.terms) {
                    term_coef.push(*coeff);
                    term_var.push(var.0 as u32);
                }
                units.push(Unit {
                    term_start: start,
                    term_len: c.terms.len() as u32,
                    bound,
                    family: fam,
                });
            }
        }

        let fams = FamilyTable {
            gamma: fam_names.iter().map(|n| params.family(n).feedback_gain).collect(),
            alpha: fam_names.iter().map(|n| params.family(n).memory_growth).collect(),
            beta: fam_names.iter().map(|n| params.family(n).memory_decay).collect(),
            x0: fam_names.iter().map(|n| params.family(n).memory_init).collect(),
            xmax: fam_names.iter().map(|n| params.family(n).memory_cap).collect(),
        };

        let kappa: Vec<f64> = model
            .variables()
            .iter()
            .map(|v| params.family(&v.family).response_gain)
            .collect();

        let exact = exact_rows(&model);
        let memories = units.iter().map(|u| fams.x0[u.family as usize]).collect();
        let n_vars = model.num_vars();
        Ok(Circuit {
            model,
            params: params.clone(),
            units,
            term_coef,
            term_var,
            fams,
            kappa,
            exact,
            voltages: vec![0.0; n_vars],
            memories,
            sim_time_us: 0.0,
            probes: Vec::new(),
            probe_stride: 100,
            dv: vec![0.0; n_vars],
        })
    }

    pub fn model(&self) -> &Arc<IlpModel> {
        &self.model
    }

    pub fn params(&self) -> &DesignParams {
        &self.params
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Voltage lines to sample during runs, every `stride` steps.
    pub fn set_probes(&mut self, probes: Vec<VarId>, stride: u64) {
        self.probes = probes;
        self.probe_stride = stride.max(1);
    }

    fn reset(&mut self, seed: u64) {
        let g = &self.params.global;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in self.voltages.iter_mut() {
            *v = rng.gen_range(g.init_lo..=g.init_hi);
        }
        for (m, u) in self.units.iter().enumerate() {
            self.memories[m] = self.fams.x0[u.family as usize];
        }
        self.sim_time_us = 0.0;
    }

    /// One explicit Euler step of the reference dynamics.
    pub fn step(&mut self, dt: f64) {
        self.dv.iter_mut().for_each(|d| *d = 0.0);
        for (m, unit) in self.units.iter().enumerate() {
            let s = unit.term_start as usize;
            let e = s + unit.term_len as usize;
            let mut lhs = 0.0f64;
            for i in s..e {
                lhs += self.term_coef[i] * self.voltages[self.term_var[i] as usize];
            }
            let gap = lhs - unit.bound;
            let fam = unit.family as usize;
            if gap > 0.0 {
                let weight = self.fams.gamma[fam] * (1.0 + self.memories[m]);
                for i in s..e {
                    self.dv[self.term_var[i] as usize] -= weight * self.term_coef[i];
                }
                let grown = self.memories[m] + dt * self.fams.alpha[fam] * gap;
                self.memories[m] = grown.min(self.fams.xmax[fam]);
            } else {
                let decayed = self.memories[m] - dt * self.fams.beta[fam] * self.memories[m];
                self.memories[m] = decayed.max(0.0);
            }
        }
        for (j, v) in self.voltages.iter_mut().enumerate() {
            *v = (*v + dt * self.kappa[j] * self.dv[j]).clamp(0.0, 1.0);
        }
        self.sim_time_us += dt;
    }

    /// Continuous-state gaps; all zero exactly at the network's equilibria.
    pub fn gaps(&self) -> Vec<f64> {
        self.units
            .iter()
            .map(|unit| {
                let s = unit.term_start as usize;
                let e = s + unit.term_len as usize;
                let mut lhs = 0.0f64;
                for i in s..e {
                    lhs += self.term_coef[i] * self.voltages[self.term_var[i] as usize];
                }
                (lhs - unit.bound).max(0.0)
            })
            .collect()
    }

    /// Magnitude of the instantaneous voltage velocity; when this is zero
    /// every unit's feedback is off, i.e. the state is an equilibrium.
    pub fn velocity_norm(&self) -> f64 {
        let mut dv = vec![0.0f64; self.voltages.len()];
        let mut memory_drive = 0.0f64;
        for (m, unit) in self.units.iter().enumerate() {
            let s = unit.term_start as usize;
            let e = s + unit.term_len as usize;
            let mut lhs = 0.0f64;
            for i in s..e {
                lhs += self.term_coef[i] * self.voltages[self.term_var[i] as usize];
            }
            let gap = lhs - unit.bound;
            if gap > 0.0 {
                let fam = unit.family as usize;
                let weight = self.fams.gamma[fam] * (1.0 + self.memories[m]);
                for i in s..e {
                    dv[self.term_var[i] as usize] -= weight * self.term_coef[i];
                }
                if self.memories[m] < self.fams.xmax[fam] {
                    memory_drive += self.fams.alpha[fam] * gap;
                }
            }
        }
        let v2: f64 = dv.iter().map(|d| d * d).sum();
        (v2 + memory_drive * memory_drive).sqrt()
    }

    fn rounded(&self, out: &mut Vec<bool>) {
        let th = self.params.global.threshold;
        out.clear();
        out.extend(self.voltages.iter().map(|&v| v > th));
    }

    /// Summed normalized violation gaps of a rounded assignment; the tuner's
    /// distance function. Exactly 0.0 iff every unit is satisfied.
    pub fn violation_score(&self, bits: &[bool]) -> f64 {
        let mut total = 0.0f64;
        for unit in &self.units {
            let s = unit.term_start as usize;
            let e = s + unit.term_len as usize;
            let mut lhs = 0.0f64;
            for i in s..e {
                if bits[self.term_var[i] as usize] {
                    lhs += self.term_coef[i];
                }
            }
            let gap = lhs - unit.bound;
            if gap > 0.0 {
                total += gap;
            }
        }
        total
    }

    fn exact_unsat_count(&self, bits: &[bool]) -> usize {
        self.exact.iter().filter(|r| !r.satisfied(bits)).count()
    }

    /// Relaxes from a fresh random state until the model is exactly
    /// satisfied or the simulated-time budget runs out.
    pub fn run(&mut self, seed: u64) -> RunOutcome {
        let wall_start = Instant::now();
        self.reset(seed);
        let g = self.params.global.clone();
        let dt = g.dt_us;
        let check_every = g.convergence_check_every.max(1) as u64;
        let budget = g.time_budget_us;

        let mut trace: Vec<(f64, usize)> = Vec::new();
        let mut trace_stride = 1u64;
        let mut checks = 0u64;
        let mut min_unsat = usize::MAX;
        let mut min_score = f64::INFINITY;
        // Length sentinel: the first rounding always differs, forcing an
        // exact evaluation even for zero-variable models.
        let mut last_bits: Vec<bool> = vec![false; self.voltages.len() + 1];
        let mut bits: Vec<bool> = Vec::new();
        let mut last_unsat = usize::MAX;
        let mut last_score = f64::INFINITY;
        let mut steps = 0u64;
        let mut probes: Vec<ProbeTrace> = self
            .probes
            .iter()
            .map(|&var| ProbeTrace {
                var,
                sample_dt_us: dt * self.probe_stride as f64,
                samples: Vec::new(),
            })
            .collect();
        let mut converged = false;
        let mut tts = None;
        let mut aborted = None;

        loop {
            if steps % check_every == 0 {
                self.rounded(&mut bits);
                if bits != last_bits {
                    last_unsat = self.exact_unsat_count(&bits);
                    last_score = self.violation_score(&bits);
                    std::mem::swap(&mut last_bits, &mut bits);
                }
                min_unsat = min_unsat.min(last_unsat);
                min_score = min_score.min(last_score);
                if checks % trace_stride == 0 {
                    trace.push((self.sim_time_us, last_unsat));
                    if trace.len() >= TRACE_CAP {
                        let mut i = 0;
                        trace.retain(|_| {
                            i += 1;
                            i % 2 == 1
                        });
                        trace_stride *= 2;
                    }
                }
                checks += 1;
                if last_unsat == 0 {
                    converged = true;
                    tts = Some(self.sim_time_us);
                    break;
                }
                if !self.voltages.iter().all(|v| v.is_finite())
                    || !self.memories.iter().all(|x| x.is_finite())
                {
                    aborted = Some("non-finite circuit state".to_string());
                    break;
                }
            }
            if self.sim_time_us >= budget {
                break;
            }
            if !probes.is_empty() && steps % self.probe_stride == 0 {
                for p in probes.iter_mut() {
                    p.samples.push(self.voltages[p.var.0]);
                }
            }
            self.step(dt);
            steps += 1;
        }

        let assignment = Assignment::from_bits(last_bits);
        if converged {
            // Contract: a converged outcome satisfies the model exactly.
            debug_assert!(matches!(
                self.model.evaluate(&assignment),
                Ok(EvalResult::Satisfied)
            ));
            min_score = 0.0;
        }
        RunOutcome {
            converged,
            tts_us: tts,
            wall_seconds: wall_start.elapsed().as_secs_f64(),
            assignment,
            unsat_trace: trace,
            min_unsat: if min_unsat == usize::MAX { 0 } else { min_unsat },
            min_violation_score: if min_score.is_finite() { min_score } else { 0.0 },
            steps,
            sim_time_us: self.sim_time_us,
            seed,
            probes,
            aborted,
        }
    }
}

fn bigint_to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or_else(|| {
        if v.sign() == num_bigint::Sign::Minus {
            f64::MIN
        } else {
            f64::MAX
        }
    })
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub outcomes: Vec<RunOutcome>,
    pub convergence_fraction: f64,
}

impl EnsembleOutcome {
    pub fn tts_samples(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.tts_us).collect()
    }

    pub fn mean_tts_us(&self) -> Option<f64> {
        let samples = self.tts_samples();
        if samples.is_empty() {
            None
        } else {
            Some(samples.iter().sum::<f64>() / samples.len() as f64)
        }
    }
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent runs from derived seeds, in parallel; results are ordered by
/// run index so ensembles are reproducible regardless of thread scheduling.
pub fn run_ensemble(
    model: &Arc<IlpModel>,
    params: &DesignParams,
    n_runs: usize,
    master_seed: u64,
    budget_us: Option<f64>,
) -> Result<EnsembleOutcome, ParamError> {
    let mut params = params.clone();
    if let Some(b) = budget_us {
        params.global.time_budget_us = b;
    }
    let template = Circuit::build(Arc::clone(model), &params)?;
    let outcomes: Vec<RunOutcome> = (0..n_runs)
        .into_par_iter()
        .map_with(template, |circuit, i| {
            circuit.run(derive_seed(master_seed, i as u64))
        })
        .collect();
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let convergence_fraction = if n_runs == 0 {
        0.0
    } else {
        converged as f64 / n_runs as f64
    };
    Ok(EnsembleOutcome {
        outcomes,
        convergence_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::constraint;
    use num_traits::One;

    fn cover_model() -> Arc<IlpModel> {
        let mut m = IlpModel::new("cover");
        let a = m.add_var("a", "x-bits");
        let b = m.add_var("b", "x-bits");
        m.add_constraint(constraint(
            "cover",
            "soag",
            vec![(BigInt::one(), a), (BigInt::one(), b)],
            Sense::Ge,
            1,
        ))
        .unwrap();
        Arc::new(m)
    }

    #[test]
    fn equality_becomes_two_units() {
        let mut m = IlpModel::new("eq");
        let a = m.add_var("a", "f");
        m.add_constraint(constraint("e", "f", vec![(BigInt::one(), a)], Sense::Eq, 1))
            .unwrap();
        let c = Circuit::build(Arc::new(m), &DesignParams::default()).unwrap();
        assert_eq!(c.unit_count(), 2);
    }

    #[test]
    fn empty_model_converges_at_t0() {
        let m = Arc::new(IlpModel::new("empty"));
        let mut c = Circuit::build(m, &DesignParams::default()).unwrap();
        let out = c.run(7);
        assert!(out.converged);
        assert_eq!(out.tts_us, Some(0.0));
    }

    #[test]
    fn satisfied_circuit_is_a_fixed_point() {
        let m = cover_model();
        let mut c = Circuit::build(m, &DesignParams::default()).unwrap();
        c.voltages = vec![1.0, 0.0];
        let v_before = c.voltages.clone();
        let x_before = c.memories.clone();
        for _ in 0..100 {
            c.step(1e-3);
        }
        assert_eq!(c.voltages, v_before);
        assert_eq!(c.memories, x_before);
        assert_eq!(c.velocity_norm(), 0.0);
    }

    #[test]
    fn violated_unit_pushes_voltages_up() {
        let m = cover_model();
        let mut c = Circuit::build(m, &DesignParams::default()).unwrap();
        c.voltages = vec![0.0, 0.0];
        let mut prev = c.voltages.clone();
        for _ in 0..10 {
            c.step(1e-3);
            assert!(c.voltages[0] > prev[0]);
            assert!(c.voltages[1] > prev[1]);
            prev = c.voltages.clone();
        }
    }

    #[test]
    fn memories_nondecreasing_while_violated() {
        let mut m = IlpModel::new("stuck");
        let a = m.add_var("a", "f");
        m.add_constraint(constraint("ge", "f", vec![(BigInt::one(), a)], Sense::Ge, 1))
            .unwrap();
        m.add_constraint(constraint("le", "f", vec![(BigInt::one(), a)], Sense::Le, 0))
            .unwrap();
        let mut c = Circuit::build(Arc::new(m), &DesignParams::default()).unwrap();
        c.voltages = vec![0.3];
        let mut prev_total: f64 = c.memories.iter().sum();
        for _ in 0..50 {
            let gaps = c.gaps();
            assert!(gaps.iter().any(|&g| g > 0.0));
            c.step(1e-3);
            let total: f64 = c.memories.iter().sum();
            assert!(total >= prev_total - 1e-12);
            prev_total = total;
        }
    }

    #[test]
    fn infeasible_model_times_out() {
        let mut m = IlpModel::new("infeasible");
        let a = m.add_var("a", "f");
        m.add_constraint(constraint("ge", "f", vec![(BigInt::one(), a)], Sense::Ge, 1))
            .unwrap();
        m.add_constraint(constraint("le", "f", vec![(BigInt::one(), a)], Sense::Le, 0))
            .unwrap();
        let mut params = DesignParams::default();
        params.global.time_budget_us = 1.0;
        let mut c = Circuit::build(Arc::new(m), &params).unwrap();
        let out = c.run(3);
        assert!(!out.converged);
        assert!(out.tts_us.is_none());
        assert!(out.min_unsat >= 1);
    }

    #[test]
    fn same_seed_same_outcome() {
        let m = cover_model();
        let mut c = Circuit::build(m, &DesignParams::default()).unwrap();
        let a = c.run(11);
        let b = c.run(11);
        assert_eq!(a.converged, b.converged);
        assert_eq!(a.tts_us, b.tts_us);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.steps, b.steps);
    }

    #[test]
    fn ensemble_reproducible_and_single_run_matches() {
        let m = cover_model();
        let p = DesignParams::default();
        let e1 = run_ensemble(&m, &p, 8, 99, None).unwrap();
        let e2 = run_ensemble(&m, &p, 8, 99, None).unwrap();
        assert_eq!(e1.convergence_fraction, e2.convergence_fraction);
        for (a, b) in e1.outcomes.iter().zip(&e2.outcomes) {
            assert_eq!(a.tts_us, b.tts_us);
            assert_eq!(a.seed, b.seed);
        }
        let single = run_ensemble(&m, &p, 1, 99, None).unwrap();
        let mut c = Circuit::build(Arc::clone(&m), &p).unwrap();
        let direct = c.run(derive_seed(99, 0));
        assert_eq!(single.outcomes[0].tts_us, direct.tts_us);
    }

    #[test]
    fn params_json_round_trip() {
        let mut p = DesignParams::default();
        p.families.insert(
            "soand".into(),
            FamilyParams {
                feedback_gain: 3.5,
                ..FamilyParams::default()
            },
        );
        let text = p.to_json();
        let back = DesignParams::from_json(&text).unwrap();
        assert_eq!(p, back);
        assert!(text.contains("soand"));
        assert!(text.contains("max-abs"));
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = DesignParams::default();
        p.global.threshold = 1.5;
        assert!(p.validate().is_err());
        let mut p = DesignParams::default();
        p.default_family.memory_init = 10.0;
        p.default_family.memory_cap = 1.0;
        assert!(p.validate().is_err());
    }
}
