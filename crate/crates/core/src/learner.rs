//! Learning a capability matrix and requirement thresholds from positive
//! team samples.
//!
//! Rows of `A` are independent given the samples, so the problem splits into
//! one small linear program per capability `c`:
//!
//! ```text
//! maximize   (α_b/|M|)·Σ_i b_ci + α_a·t
//! subject to Σ_k y_k·a_ck ≥ b_ci   for every positive sample y of task i
//!            Σ_k a_ck = 1
//!            t ≤ a_ck              for every positive capability entry
//!            a, b, t ≥ 0
//! ```
//!
//! Entries known to be zero are not variables at all. The sample rows are
//! generated lazily: the program is first solved on one sample per task, and
//! the most violated sample of each task is added until none is violated. The
//! final answer is optimal for the full program.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, Relation, Sense, SolveStatus};
use crate::model::{
    dot_counts, AgentTypeId, CapabilityId, CapabilityMatrix, Model, RequirementSet, SparsityPattern, TaskId,
    TeamConfiguration, TrainingSet, FEASIBILITY_TOLERANCE,
};

/// Sample rows violated by more than this are added to the working program.
const CUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    /// Weight on the requirement thresholds.
    pub alpha_b: f64,
    /// Weight on the smallest positive capability entry.
    pub alpha_a: f64,
    /// Slack used by the post-solve consistency check.
    pub feas_tolerance: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self { alpha_b: 1.0, alpha_a: 0.25, feas_tolerance: FEASIBILITY_TOLERANCE }
    }
}

impl LearnerConfig {
    pub fn with_alpha_a(alpha_a: f64) -> Self {
        Self { alpha_a, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha_b.is_finite() || self.alpha_b <= 0.0 {
            return Err(Error::InvalidData(format!("alpha_b must be positive, got {}", self.alpha_b)));
        }
        if !self.alpha_a.is_finite() || self.alpha_a < 0.0 {
            return Err(Error::InvalidData(format!("alpha_a must be nonnegative, got {}", self.alpha_a)));
        }
        if self.feas_tolerance.is_nan() || self.feas_tolerance < 0.0 {
            return Err(Error::InvalidData("feasibility tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-capability solve summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityReport {
    pub capability: usize,
    pub objective: f64,
    pub status: SolveStatus,
    pub solve_millis: f64,
    /// Distinct positive samples that could enter this capability's program.
    pub candidate_rows: usize,
    /// Sample rows in the final working program.
    pub active_rows: usize,
    pub rounds: usize,
    /// Solved in closed form (single positive agent type).
    pub closed_form: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub model: Model,
    pub per_capability: Vec<CapabilityReport>,
}

impl LearnedModel {
    pub fn capabilities(&self) -> &CapabilityMatrix {
        &self.model.capabilities
    }

    pub fn requirements(&self) -> &RequirementSet {
        &self.model.requirements
    }

    pub fn total_objective(&self) -> f64 {
        self.per_capability.iter().map(|r| r.objective).sum()
    }
}

/// Deduplicated positive teams per task.
fn positive_teams(training: &TrainingSet) -> Vec<Vec<TeamConfiguration>> {
    training
        .tasks
        .iter()
        .map(|samples| {
            samples.iter().filter(|s| s.is_valid).map(|s| s.team.clone()).collect::<BTreeSet<_>>().into_iter().collect()
        })
        .collect()
}

fn check_inputs(training: &TrainingSet, sparsity: &SparsityPattern, config: &LearnerConfig) -> Result<()> {
    config.validate()?;
    sparsity.validate()?;
    if training.num_tasks() != sparsity.num_tasks() {
        return Err(Error::DimensionMismatch {
            what: "task count",
            expected: sparsity.num_tasks(),
            found: training.num_tasks(),
        });
    }
    if training.num_agent_types != sparsity.num_agent_types() {
        return Err(Error::DimensionMismatch {
            what: "agent type count",
            expected: sparsity.num_agent_types(),
            found: training.num_agent_types,
        });
    }
    for samples in &training.tasks {
        for s in samples {
            if s.team.num_agent_types() != training.num_agent_types {
                return Err(Error::DimensionMismatch {
                    what: "team configuration",
                    expected: training.num_agent_types,
                    found: s.team.num_agent_types(),
                });
            }
        }
    }
    for c in 0..sparsity.num_capabilities() {
        for i in sparsity.positive_tasks(CapabilityId(c)) {
            if !training.tasks[i.0].iter().any(|s| s.is_valid) {
                return Err(Error::NoPositiveSamples { task: i, capability: CapabilityId(c) });
            }
        }
    }
    Ok(())
}

struct RowSolution {
    /// Values on the positive agent types, in pattern order.
    capability: Vec<f64>,
    /// Values on the positive tasks, in pattern order.
    thresholds: Vec<f64>,
    report: CapabilityReport,
}

/// Learns `(A, b)` with one linear program per capability, solved in parallel.
pub fn learn(training: &TrainingSet, sparsity: &SparsityPattern, config: &LearnerConfig) -> Result<LearnedModel> {
    check_inputs(training, sparsity, config)?;
    let positives = positive_teams(training);
    let num_tasks = sparsity.num_tasks();

    let rows: Vec<Result<RowSolution>> = (0..sparsity.num_capabilities())
        .into_par_iter()
        .map(|c| learn_row(CapabilityId(c), &positives, sparsity, config, num_tasks))
        .collect();

    let mut a = CapabilityMatrix::zeros(sparsity.num_capabilities(), sparsity.num_agent_types());
    let mut b = RequirementSet::zeros(num_tasks, sparsity.num_capabilities());
    let mut reports = Vec::with_capacity(rows.len());
    for (c, row) in rows.into_iter().enumerate() {
        let row = row?;
        let c = CapabilityId(c);
        for (k, v) in sparsity.positive_agent_types(c).into_iter().zip(&row.capability) {
            a.set(c, k, *v);
        }
        for (i, v) in sparsity.positive_tasks(c).into_iter().zip(&row.thresholds) {
            b.set(c, i, *v);
        }
        reports.push(row.report);
    }
    let model = Model::new(a, b, sparsity.clone())?;
    Ok(LearnedModel { model, per_capability: reports })
}

fn learn_row(
    c: CapabilityId,
    positives: &[Vec<TeamConfiguration>],
    sparsity: &SparsityPattern,
    config: &LearnerConfig,
    num_tasks: usize,
) -> Result<RowSolution> {
    let start = Instant::now();
    let types = sparsity.positive_agent_types(c);
    let tasks = sparsity.positive_tasks(c);
    let weight_b = config.alpha_b / num_tasks as f64;

    // Positive samples projected onto the positive agent types; entries on
    // zero agent types cannot affect this row.
    let projected: Vec<Vec<Vec<u32>>> = tasks
        .iter()
        .map(|i| {
            positives[i.0]
                .iter()
                .map(|team| types.iter().map(|k| team.counts()[k.0]).collect::<Vec<u32>>())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
        .collect();
    let candidate_rows = projected.iter().map(Vec::len).sum();

    if types.len() == 1 {
        let capability = vec![1.0];
        let thresholds: Vec<f64> =
            projected.iter().map(|teams| f64::from(teams.iter().map(|y| y[0]).min().unwrap_or(0))).collect();
        let objective = weight_b * thresholds.iter().sum::<f64>() + config.alpha_a;
        return Ok(RowSolution {
            capability,
            thresholds,
            report: CapabilityReport {
                capability: c.0,
                objective,
                status: SolveStatus::Optimal,
                solve_millis: start.elapsed().as_secs_f64() * 1e3,
                candidate_rows,
                active_rows: 0,
                rounds: 0,
                closed_form: true,
            },
        });
    }

    let p = types.len();
    let q = tasks.len();
    let t_var = p + q;
    let mut objective = vec![0.0; p + q + 1];
    for v in &mut objective[p..p + q] {
        *v = weight_b;
    }
    objective[t_var] = config.alpha_a;
    let mut base = LinearProgram::new(Sense::Maximize, objective);
    base.add((0..p).map(|k| (k, 1.0)).collect(), Relation::Eq, 1.0);
    for k in 0..p {
        base.add(vec![(t_var, 1.0), (k, -1.0)], Relation::Le, 0.0);
    }

    // Seed each task with the sample that is smallest under uniform weights.
    let mut active: Vec<BTreeSet<usize>> = projected
        .iter()
        .map(|teams| {
            let seed = (0..teams.len())
                .min_by_key(|&l| teams[l].iter().map(|&v| u64::from(v)).sum::<u64>())
                .expect("positive samples checked up front");
            BTreeSet::from([seed])
        })
        .collect();

    let mut rounds = 0usize;
    let (solution, status) = loop {
        rounds += 1;
        let mut lp = base.clone();
        for (ti, rows) in active.iter().enumerate() {
            for &l in rows {
                let mut terms: Vec<(usize, f64)> = projected[ti][l]
                    .iter()
                    .enumerate()
                    .filter(|(_, &y)| y != 0)
                    .map(|(k, &y)| (k, f64::from(y)))
                    .collect();
                terms.push((p + ti, -1.0));
                lp.add(terms, Relation::Ge, 0.0);
            }
        }
        let result = solve_lp(&lp);
        match result.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::InfeasibleLp(c)),
            status => return Err(Error::LearnerSolveFailed { capability: c, status }),
        }
        let x = result.assignment;
        let mut added = false;
        for (ti, teams) in projected.iter().enumerate() {
            let (worst, value) = argmin_activity(&x[..p], teams);
            if x[p + ti] > value + CUT_TOLERANCE && active[ti].insert(worst) {
                added = true;
            }
        }
        if !added {
            break (x, result.status);
        }
    };

    // Clean up round-off: exact zeros below, exact row sum, and thresholds no
    // larger than the weakest positive sample.
    let mut capability: Vec<f64> = solution[..p].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = capability.iter().sum();
    for v in &mut capability {
        *v /= total;
    }
    let thresholds: Vec<f64> = projected
        .iter()
        .enumerate()
        .map(|(ti, teams)| {
            let (_, weakest) = argmin_activity(&capability, teams);
            solution[p + ti].min(weakest).max(0.0)
        })
        .collect();
    let smallest = capability.iter().copied().fold(f64::INFINITY, f64::min);
    let objective = weight_b * thresholds.iter().sum::<f64>() + config.alpha_a * smallest;
    let active_rows = active.iter().map(BTreeSet::len).sum();
    Ok(RowSolution {
        capability,
        thresholds,
        report: CapabilityReport {
            capability: c.0,
            objective,
            status,
            solve_millis: start.elapsed().as_secs_f64() * 1e3,
            candidate_rows,
            active_rows,
            rounds,
            closed_form: false,
        },
    })
}

/// Sample with the smallest `a·y` and that value.
fn argmin_activity(a: &[f64], teams: &[Vec<u32>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (l, y) in teams.iter().enumerate() {
        let v = dot_counts(a, y);
        if v < best.1 {
            best = (l, v);
        }
    }
    best
}

/// Solves all capabilities in a single joint program with objective
/// `(α_b/|M|)·Σ_c Σ_i b_ci`, without the sparsity-penalty term, without row
/// generation and without closed-form shortcuts. Only meant as a cross-check
/// for [`learn`] on small instances; thresholds are assumed nonnegative.
pub fn learn_joint_reference(
    training: &TrainingSet,
    sparsity: &SparsityPattern,
    config: &LearnerConfig,
) -> Result<LearnedModel> {
    check_inputs(training, sparsity, config)?;
    let start = Instant::now();
    let num_tasks = sparsity.num_tasks();
    let weight_b = config.alpha_b / num_tasks as f64;
    let num_caps = sparsity.num_capabilities();

    let mut a_index: Vec<Vec<(AgentTypeId, usize)>> = Vec::with_capacity(num_caps);
    let mut b_index: Vec<Vec<(TaskId, usize)>> = Vec::with_capacity(num_caps);
    let mut objective = Vec::new();
    for c in 0..num_caps {
        let c = CapabilityId(c);
        a_index.push(
            sparsity
                .positive_agent_types(c)
                .into_iter()
                .map(|k| {
                    objective.push(0.0);
                    (k, objective.len() - 1)
                })
                .collect(),
        );
        b_index.push(
            sparsity
                .positive_tasks(c)
                .into_iter()
                .map(|i| {
                    objective.push(weight_b);
                    (i, objective.len() - 1)
                })
                .collect(),
        );
    }
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    let mut row_counts = vec![0usize; num_caps];
    for c in 0..num_caps {
        lp.add(a_index[c].iter().map(|&(_, v)| (v, 1.0)).collect(), Relation::Eq, 1.0);
        for &(i, b_var) in &b_index[c] {
            for sample in training.tasks[i.0].iter().filter(|s| s.is_valid) {
                let mut terms: Vec<(usize, f64)> = a_index[c]
                    .iter()
                    .map(|&(k, v)| (v, f64::from(sample.team.counts()[k.0])))
                    .filter(|(_, y)| *y != 0.0)
                    .collect();
                terms.push((b_var, -1.0));
                lp.add(terms, Relation::Ge, 0.0);
                row_counts[c] += 1;
            }
        }
    }
    let result = solve_lp(&lp);
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::InfeasibleLp(CapabilityId(0))),
        status => return Err(Error::LearnerSolveFailed { capability: CapabilityId(0), status }),
    }
    let x = &result.assignment;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let mut a = CapabilityMatrix::zeros(num_caps, sparsity.num_agent_types());
    let mut b = RequirementSet::zeros(num_tasks, num_caps);
    let mut reports = Vec::with_capacity(num_caps);
    for c in 0..num_caps {
        let cid = CapabilityId(c);
        for &(k, v) in &a_index[c] {
            a.set(cid, k, x[v].max(0.0));
        }
        let mut sum = 0.0;
        for &(i, v) in &b_index[c] {
            b.set(cid, i, x[v].max(0.0));
            sum += x[v].max(0.0);
        }
        reports.push(CapabilityReport {
            capability: c,
            objective: weight_b * sum,
            status: result.status,
            solve_millis: elapsed,
            candidate_rows: row_counts[c],
            active_rows: row_counts[c],
            rounds: 1,
            closed_form: false,
        });
    }
    let model = Model::new(a, b, sparsity.clone())?;
    Ok(LearnedModel { model, per_capability: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainingSample;

    fn training(num_types: usize, tasks: Vec<Vec<(Vec<u32>, bool)>>) -> TrainingSet {
        TrainingSet {
            num_agent_types: num_types,
            tasks: tasks
                .into_iter()
                .map(|samples| {
                    samples
                        .into_iter()
                        .map(|(team, valid)| TrainingSample {
                            team: TeamConfiguration::new(team),
                            performance: if valid { 1.0 } else { 0.0 },
                            is_valid: valid,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn symmetric_pair_gives_equal_split() {
        let data = training(2, vec![vec![(vec![2, 0], true), (vec![0, 2], true), (vec![1, 0], false)]]);
        let sp = SparsityPattern::dense(1, 2, 1);
        let learned = learn(&data, &sp, &LearnerConfig::default()).unwrap();
        let a = learned.capabilities();
        assert!((a.get(CapabilityId(0), AgentTypeId(0)) - 0.5).abs() < 1e-9);
        assert!((a.get(CapabilityId(0), AgentTypeId(1)) - 0.5).abs() < 1e-9);
        assert!((learned.requirements().get(CapabilityId(0), TaskId(0)) - 1.0).abs() < 1e-9);
        // (1,1) is then on the boundary and classifies valid.
        assert!(learned.model.classify(&TeamConfiguration::new(vec![1, 1]), TaskId(0)).unwrap());
    }

    #[test]
    fn single_positive_prefers_threshold_over_balance() {
        let data = training(2, vec![vec![(vec![1, 0], true)]]);
        let sp = SparsityPattern::dense(1, 2, 1);
        let learned = learn(&data, &sp, &LearnerConfig::default()).unwrap();
        let a = learned.capabilities();
        assert!((a.get(CapabilityId(0), AgentTypeId(0)) - 1.0).abs() < 1e-9);
        assert!(a.get(CapabilityId(0), AgentTypeId(1)).abs() < 1e-9);
        assert!((learned.requirements().get(CapabilityId(0), TaskId(0)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_row_takes_minimum_count() {
        let data = training(2, vec![vec![(vec![3, 1], true), (vec![2, 5], true), (vec![0, 9], false)]]);
        let sp = SparsityPattern::from_positive_sets(
            1,
            2,
            1,
            &[(CapabilityId(0), AgentTypeId(0))],
            &[(CapabilityId(0), TaskId(0))],
        )
        .unwrap();
        let learned = learn(&data, &sp, &LearnerConfig::default()).unwrap();
        assert!(learned.per_capability[0].closed_form);
        assert_eq!(learned.requirements().get(CapabilityId(0), TaskId(0)), 2.0);
        assert_eq!(learned.capabilities().get(CapabilityId(0), AgentTypeId(1)), 0.0);
    }

    #[test]
    fn missing_positives_rejected() {
        let data = training(2, vec![vec![(vec![1, 0], false)]]);
        let sp = SparsityPattern::dense(1, 2, 1);
        assert!(matches!(
            learn(&data, &sp, &LearnerConfig::default()),
            Err(Error::NoPositiveSamples { task: TaskId(0), capability: CapabilityId(0) })
        ));
    }

    #[test]
    fn zero_requirement_task_may_lack_positives() {
        let data = training(2, vec![vec![(vec![1, 1], true)], vec![]]);
        let sp = SparsityPattern::from_positive_sets(
            1,
            2,
            2,
            &[(CapabilityId(0), AgentTypeId(0)), (CapabilityId(0), AgentTypeId(1))],
            &[(CapabilityId(0), TaskId(0))],
        )
        .unwrap();
        let learned = learn(&data, &sp, &LearnerConfig::default()).unwrap();
        assert_eq!(learned.requirements().get(CapabilityId(0), TaskId(1)), 0.0);
    }

    #[test]
    fn bad_weights_rejected() {
        let data = training(2, vec![vec![(vec![1, 0], true)]]);
        let sp = SparsityPattern::dense(1, 2, 1);
        let cfg = LearnerConfig { alpha_b: 0.0, ..Default::default() };
        assert!(learn(&data, &sp, &cfg).is_err());
        let cfg = LearnerConfig { alpha_a: -1.0, ..Default::default() };
        assert!(learn(&data, &sp, &cfg).is_err());
    }

    #[test]
    fn joint_reference_matches_on_symmetric_pair() {
        let data = training(2, vec![vec![(vec![2, 0], true), (vec![0, 2], true)]]);
        let sp = SparsityPattern::dense(1, 2, 1);
        let cfg = LearnerConfig::with_alpha_a(0.0);
        let split = learn(&data, &sp, &cfg).unwrap();
        let joint = learn_joint_reference(&data, &sp, &cfg).unwrap();
        assert!((split.total_objective() - joint.total_objective()).abs() < 1e-9);
        for k in 0..2 {
            let k = AgentTypeId(k);
            assert!(
                (split.capabilities().get(CapabilityId(0), k) - joint.capabilities().get(CapabilityId(0), k)).abs()
                    < 1e-9
            );
        }
    }
}
