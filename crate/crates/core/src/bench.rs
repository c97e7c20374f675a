//! Synthetic ground-truth benchmark: random capability models, labeled team
//! pools, training in `Entire` or `Random` mode, and prediction-error
//! measurement over the full pool.

use std::fmt;
use std::time::Instant;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{learn, LearnedModel, LearnerConfig};
use crate::model::{
    classify_with_tolerance, dot_counts, AgentTypeId, CapabilityId, CapabilityMatrix, Model, RequirementSet,
    SparsityPattern, TaskId, TeamConfiguration, TrainingSample, TrainingSet,
};

const GROUND_TRUTH_ATTEMPTS: usize = 100;
/// Stream ids keep the sparsity perturbation independent of the data draw, so
/// perturbed and exact runs with the same seed see identical pools.
const DATA_STREAM: u64 = 0;
const PERTURBATION_STREAM: u64 = 1 << 32;

/// Size parameters of one benchmark case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    #[serde(default)]
    pub label: String,
    pub num_tasks: usize,
    pub num_agent_types: usize,
    pub num_capabilities: usize,
    /// Agents per type; teams live in `[0, n_s]^|K|`.
    pub per_type_count: u32,
    /// Team configurations drawn per task.
    pub pool_size: usize,
    #[serde(default = "default_train_cap")]
    pub random_train_cap: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_capability_density")]
    pub capability_density: f64,
    #[serde(default = "default_requirement_density")]
    pub requirement_density: f64,
}

fn default_train_cap() -> usize {
    200
}
fn default_realizations() -> usize {
    10
}
fn default_capability_density() -> f64 {
    0.7
}
fn default_requirement_density() -> f64 {
    0.5
}

/// `(|M|, |K|, |C|, n_s, n̄_L)` for the eight standard cases.
const STANDARD_CASES: [(usize, usize, usize, u32, usize); 8] = [
    (8, 6, 8, 5, 1500),
    (8, 6, 8, 5, 6000),
    (8, 6, 16, 5, 6000),
    (8, 6, 32, 5, 6000),
    (20, 6, 8, 5, 7500),
    (40, 6, 8, 5, 7500),
    (40, 6, 16, 5, 7500),
    (40, 6, 32, 5, 7500),
];

impl CaseSpec {
    /// One of the eight standard cases (`0..=7`).
    pub fn standard(case: usize) -> Option<CaseSpec> {
        let (m, k, c, ns, pool) = *STANDARD_CASES.get(case)?;
        Some(CaseSpec {
            label: case.to_string(),
            num_tasks: m,
            num_agent_types: k,
            num_capabilities: c,
            per_type_count: ns,
            pool_size: pool,
            random_train_cap: default_train_cap(),
            realizations: default_realizations(),
            seed: 0,
            capability_density: default_capability_density(),
            requirement_density: default_requirement_density(),
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_realizations(mut self, realizations: usize) -> Self {
        self.realizations = realizations;
        self
    }

    /// `(n_s + 1)^|K|`, saturating.
    pub fn lattice_size(&self) -> usize {
        (0..self.num_agent_types).fold(1usize, |acc, _| acc.saturating_mul(self.per_type_count as usize + 1))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.num_tasks > 0
            && self.num_agent_types > 0
            && self.num_capabilities > 0
            && self.per_type_count > 0
            && self.pool_size > 0
            && self.random_train_cap > 0
            && self.realizations > 0;
        if !positive {
            return Err(Error::InvalidData("case sizes must all be positive".into()));
        }
        if self.pool_size > self.lattice_size() {
            return Err(Error::InvalidData(format!(
                "pool size {} exceeds the {} team configurations available",
                self.pool_size,
                self.lattice_size()
            )));
        }
        if self.random_train_cap > self.pool_size {
            return Err(Error::InvalidData("random training cap exceeds pool size".into()));
        }
        for d in [self.capability_density, self.requirement_density] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::InvalidData(format!("density {d} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    /// Train on every configuration of each task pool.
    Entire,
    /// Train on at most `random_train_cap` configurations per task.
    Random,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::Entire => "entire",
            TrainingMode::Random => "random",
        })
    }
}

/// Deterministic per-realization generator.
pub fn realization_rng(master_seed: u64, realization: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream + realization as u64);
    rng
}

fn decode_lattice(mut index: usize, num_agent_types: usize, per_type_count: u32) -> TeamConfiguration {
    let base = per_type_count as usize + 1;
    let mut counts = vec![0u32; num_agent_types];
    for v in &mut counts {
        *v = (index % base) as u32;
        index /= base;
    }
    TeamConfiguration::new(counts)
}

/// Uniform sample without replacement of `pool_size` lattice points.
pub fn build_pool<R: Rng + ?Sized>(spec: &CaseSpec, rng: &mut R) -> Vec<TeamConfiguration> {
    let lattice = spec.lattice_size();
    let amount = spec.pool_size.min(lattice);
    index::sample(rng, lattice, amount)
        .into_iter()
        .map(|ix| decode_lattice(ix, spec.num_agent_types, spec.per_type_count))
        .collect()
}

/// Every lattice point of `[0, n_s]^|K|` in lexicographic order of the
/// little-endian encoding.
pub fn full_lattice(num_agent_types: usize, per_type_count: u32) -> Vec<TeamConfiguration> {
    let size = (0..num_agent_types).fold(1usize, |acc, _| acc * (per_type_count as usize + 1));
    (0..size).map(|ix| decode_lattice(ix, num_agent_types, per_type_count)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub model: Model,
}

impl GroundTruth {
    pub fn capabilities(&self) -> &CapabilityMatrix {
        &self.model.capabilities
    }

    pub fn requirements(&self) -> &RequirementSet {
        &self.model.requirements
    }

    pub fn sparsity(&self) -> &SparsityPattern {
        &self.model.sparsity
    }
}

/// Exact ground-truth label: `A^g·y ≥ b^g_i` with no tolerance.
pub fn ground_truth_label(team: &TeamConfiguration, gt: &GroundTruth, task: TaskId) -> Result<bool> {
    classify_with_tolerance(team, gt.capabilities(), gt.requirements().task(task), 0.0)
}

fn draw_pattern<R: Rng + ?Sized>(rows: usize, cols: usize, density: f64, rng: &mut R) -> Vec<bool> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        loop {
            let row: Vec<bool> = (0..cols).map(|_| rng.gen_bool(density)).collect();
            if row.iter().any(|&v| v) {
                out.extend(row);
                break;
            }
        }
    }
    out
}

/// Draws a random ground-truth model for the given task pools.
///
/// Capability entries on the positive pattern are `Uniform(0.2, 1.0)` before
/// row normalization. Each positive threshold `b_ci` is the `q`-quantile
/// (`q ~ Uniform(0.2, 0.8)`) of `a^c·y` over the task's pool, and the whole
/// draw is repeated until every pool has both valid and invalid teams.
pub fn generate_ground_truth<R: Rng + ?Sized>(
    spec: &CaseSpec,
    pools: &[Vec<TeamConfiguration>],
    rng: &mut R,
) -> Result<GroundTruth> {
    spec.validate()?;
    if pools.len() != spec.num_tasks {
        return Err(Error::DimensionMismatch { what: "task pools", expected: spec.num_tasks, found: pools.len() });
    }
    let (nc, nk, nm) = (spec.num_capabilities, spec.num_agent_types, spec.num_tasks);
    for _ in 0..GROUND_TRUTH_ATTEMPTS {
        let a_pattern = draw_pattern(nc, nk, spec.capability_density, rng);
        // One row per task: every task needs at least one positive requirement.
        let b_pattern = draw_pattern(nm, nc, spec.requirement_density, rng);

        let mut a = CapabilityMatrix::zeros(nc, nk);
        let mut sparsity = SparsityPattern::dense(nc, nk, nm);
        for c in 0..nc {
            let mut total = 0.0;
            let mut row = vec![0.0; nk];
            for k in 0..nk {
                let positive = a_pattern[c * nk + k];
                sparsity.set_capability(CapabilityId(c), AgentTypeId(k), positive);
                if positive {
                    row[k] = rng.gen_range(0.2..1.0);
                    total += row[k];
                }
            }
            for (k, v) in row.into_iter().enumerate() {
                a.set(CapabilityId(c), AgentTypeId(k), v / total);
            }
        }

        let mut b = RequirementSet::zeros(nm, nc);
        let mut values = Vec::new();
        for i in 0..nm {
            for c in 0..nc {
                let positive = b_pattern[i * nc + c];
                sparsity.set_requirement(CapabilityId(c), TaskId(i), positive);
                if !positive {
                    continue;
                }
                let q: f64 = rng.gen_range(0.2..0.8);
                values.clear();
                values.extend(pools[i].iter().map(|y| dot_counts(a.row(CapabilityId(c)), y.counts())));
                values.sort_by(f64::total_cmp);
                let rank = (q * (values.len() - 1) as f64).floor() as usize;
                b.set(CapabilityId(c), TaskId(i), values[rank]);
            }
        }
        let gt = GroundTruth { model: Model::new(a, b, sparsity)? };
        let mixed = (0..nm).all(|i| {
            let mut valid = false;
            let mut invalid = false;
            for y in &pools[i] {
                if ground_truth_label(y, &gt, TaskId(i)).unwrap_or(false) {
                    valid = true;
                } else {
                    invalid = true;
                }
                if valid && invalid {
                    return true;
                }
            }
            false
        });
        if mixed {
            return Ok(gt);
        }
    }
    Err(Error::GroundTruthRetries(GROUND_TRUTH_ATTEMPTS))
}

/// Labels every pool member against the ground truth.
pub fn label_pools(pools: &[Vec<TeamConfiguration>], gt: &GroundTruth) -> Result<Vec<Vec<bool>>> {
    pools
        .iter()
        .enumerate()
        .map(|(i, pool)| pool.iter().map(|y| ground_truth_label(y, gt, TaskId(i))).collect())
        .collect()
}

/// Toggles `round(rate·|C|·|K|)` capability pattern entries chosen uniformly,
/// skipping toggles that would leave a capability row without positives.
pub fn perturb_sparsity<R: Rng + ?Sized>(pattern: &SparsityPattern, rate: f64, rng: &mut R) -> SparsityPattern {
    let (nc, nk) = (pattern.num_capabilities(), pattern.num_agent_types());
    let target = (rate * (nc * nk) as f64).round() as usize;
    let mut entries: Vec<(usize, usize)> = (0..nc).flat_map(|c| (0..nk).map(move |k| (c, k))).collect();
    entries.shuffle(rng);
    let mut out = pattern.clone();
    let mut flipped = 0;
    for (c, k) in entries {
        if flipped == target {
            break;
        }
        let (c, k) = (CapabilityId(c), AgentTypeId(k));
        if out.capability_is_positive(c, k) {
            if out.positive_agent_types(c).len() == 1 {
                continue;
            }
            out.set_capability(c, k, false);
        } else {
            out.set_capability(c, k, true);
        }
        flipped += 1;
    }
    out
}

/// One labeled dataset, as handed to the learner.
#[derive(Debug, Clone)]
pub struct BenchData {
    pub pools: Vec<Vec<TeamConfiguration>>,
    pub labels: Vec<Vec<bool>>,
    pub ground_truth: GroundTruth,
    pub training: TrainingSet,
}

/// Pools, ground truth, labels and the training subset of one realization.
pub fn generate_data(spec: &CaseSpec, mode: TrainingMode, realization: usize) -> Result<BenchData> {
    spec.validate()?;
    let mut rng = realization_rng(spec.seed, realization, DATA_STREAM);
    let pools: Vec<Vec<TeamConfiguration>> = (0..spec.num_tasks).map(|_| build_pool(spec, &mut rng)).collect();
    let ground_truth = generate_ground_truth(spec, &pools, &mut rng)?;
    let labels = label_pools(&pools, &ground_truth)?;
    let tasks = pools
        .iter()
        .zip(&labels)
        .map(|(pool, labels)| {
            let chosen: Vec<usize> = match mode {
                TrainingMode::Entire => (0..pool.len()).collect(),
                TrainingMode::Random => {
                    let mut ix = index::sample(&mut rng, pool.len(), spec.random_train_cap.min(pool.len())).into_vec();
                    ix.sort_unstable();
                    ix
                }
            };
            chosen
                .into_iter()
                .map(|l| TrainingSample {
                    team: pool[l].clone(),
                    performance: if labels[l] { 1.0 } else { 0.0 },
                    is_valid: labels[l],
                })
                .collect()
        })
        .collect();
    let training = TrainingSet { num_agent_types: spec.num_agent_types, tasks };
    Ok(BenchData { pools, labels, ground_truth, training })
}

/// Disagreement rates of a learned model against pool labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionError {
    pub false_positive: f64,
    pub false_negative: f64,
}

impl PredictionError {
    pub fn total(&self) -> f64 {
        self.false_positive + self.false_negative
    }
}

/// Per-task disagreement fractions over each full pool, averaged over tasks.
pub fn prediction_error(
    model: &Model,
    pools: &[Vec<TeamConfiguration>],
    labels: &[Vec<bool>],
) -> Result<PredictionError> {
    let mut fp_sum = 0.0;
    let mut fn_sum = 0.0;
    for (i, (pool, labels)) in pools.iter().zip(labels).enumerate() {
        let (mut fp, mut fne) = (0usize, 0usize);
        for (y, &truth) in pool.iter().zip(labels) {
            let predicted = model.classify(y, TaskId(i))?;
            match (predicted, truth) {
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                _ => {}
            }
        }
        fp_sum += fp as f64 / pool.len() as f64;
        fn_sum += fne as f64 / pool.len() as f64;
    }
    let m = pools.len() as f64;
    Ok(PredictionError { false_positive: fp_sum / m, false_negative: fn_sum / m })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    /// 0-based.
    pub realization: usize,
    pub outcome: std::result::Result<RealizationMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizationMetrics {
    pub error: PredictionError,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub case: String,
    pub mode: TrainingMode,
    pub sparsity_error: f64,
    pub realizations: Vec<RealizationResult>,
}

impl BenchReport {
    pub fn successes(&self) -> impl Iterator<Item = &RealizationMetrics> {
        self.realizations.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.realizations.iter().filter(|r| r.outcome.is_err()).count()
    }

    fn mean_of(&self, f: impl Fn(&RealizationMetrics) -> f64) -> f64 {
        let values: Vec<f64> = self.successes().map(f).collect();
        if values.is_empty() {
            f64::NAN
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    }

    pub fn mean_error(&self) -> f64 {
        self.mean_of(|m| m.error.total())
    }

    pub fn mean_false_negative(&self) -> f64 {
        self.mean_of(|m| m.error.false_negative)
    }

    pub fn mean_train_seconds(&self) -> f64 {
        self.mean_of(|m| m.train_seconds)
    }

    /// CSV with header
    /// `case,realization,mode,sparsity_error,pred_error,false_pos,false_neg,train_seconds`.
    /// Realizations are numbered from 1; failed realizations leave the
    /// metric columns empty. With `include_timing = false` the time column is
    /// written as 0 so that reruns are byte-identical.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out =
            String::from("case,realization,mode,sparsity_error,pred_error,false_pos,false_neg,train_seconds\n");
        for r in &self.realizations {
            let prefix = format!("{},{},{},{}", self.case, r.realization + 1, self.mode, fmt_num(self.sparsity_error));
            match &r.outcome {
                Ok(m) => {
                    let seconds = if include_timing { fmt_num(m.train_seconds) } else { "0".into() };
                    out.push_str(&format!(
                        "{prefix},{},{},{},{seconds}\n",
                        fmt_num(m.error.total()),
                        fmt_num(m.error.false_positive),
                        fmt_num(m.error.false_negative)
                    ));
                }
                Err(_) => out.push_str(&format!("{prefix},,,,\n")),
            }
        }
        out
    }
}

/// Shortest round-trip rendering after rounding to 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{}", crate::io::round_significant(v))
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub learner: LearnerConfig,
    /// Run realizations concurrently. Timings are then affected by contention.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { learner: LearnerConfig::default(), parallel: true }
    }
}

/// Learns on one realization and measures prediction error over the full pools.
pub fn run_realization(
    spec: &CaseSpec,
    mode: TrainingMode,
    sparsity_error: f64,
    realization: usize,
    learner: &LearnerConfig,
) -> Result<(RealizationMetrics, LearnedModel)> {
    let data = generate_data(spec, mode, realization)?;
    let sparsity = if sparsity_error > 0.0 {
        let mut rng = realization_rng(spec.seed, realization, PERTURBATION_STREAM);
        perturb_sparsity(data.ground_truth.sparsity(), sparsity_error, &mut rng)
    } else {
        data.ground_truth.sparsity().clone()
    };
    let start = Instant::now();
    let learned = learn(&data.training, &sparsity, learner)?;
    let train_seconds = start.elapsed().as_secs_f64();
    let error = prediction_error(&learned.model, &data.pools, &data.labels)?;
    Ok((RealizationMetrics { error, train_seconds }, learned))
}

/// Runs every realization of a case. Learner failures are recorded per
/// realization instead of aborting the batch.
pub fn run_case(
    spec: &CaseSpec,
    mode: TrainingMode,
    sparsity_error: f64,
    options: &BenchOptions,
) -> Result<BenchReport> {
    spec.validate()?;
    if !(0.0..=0.5).contains(&sparsity_error) {
        return Err(Error::InvalidData(format!("sparsity error rate {sparsity_error} outside [0, 0.5]")));
    }
    let one = |r: usize| RealizationResult {
        realization: r,
        outcome: run_realization(spec, mode, sparsity_error, r, &options.learner)
            .map(|(m, _)| m)
            .map_err(|e| e.to_string()),
    };
    let mut realizations: Vec<RealizationResult> = if options.parallel {
        (0..spec.realizations).into_par_iter().map(one).collect()
    } else {
        (0..spec.realizations).map(one).collect()
    };
    realizations.sort_by_key(|r| r.realization);
    Ok(BenchReport { case: spec.label.clone(), mode, sparsity_error, realizations })
}

/// Validity from repeated performance draws (e.g. completion times): true iff
/// at least `⌈pass_fraction·n⌉` draws are `≤ threshold`.
pub fn stochastic_label_with(draws: &[f64], threshold: f64, pass_fraction: f64) -> bool {
    if draws.is_empty() {
        return false;
    }
    let needed = (pass_fraction * draws.len() as f64 - 1e-9).ceil().max(0.0) as usize;
    draws.iter().filter(|&&d| d <= threshold).count() >= needed
}

/// [`stochastic_label_with`] at the 80% pass fraction.
pub fn stochastic_label(draws: &[f64], threshold: f64) -> bool {
    stochastic_label_with(draws, threshold, 0.8)
}
