//! Capability/requirement data model and the linear feasibility predicate
//! `A·y ≥ b` shared by the learner, the benchmark and the allocator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when checking `A·y ≥ b` against learned values.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-7;

macro_rules! index_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            // 1-based in every human-facing rendering.
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0 + 1)
            }
        }
    };
}

index_newtype!(
    /// 0-based agent type index.
    AgentTypeId
);
index_newtype!(
    /// 0-based task index.
    TaskId
);
index_newtype!(
    /// 0-based capability index.
    CapabilityId
);

/// Number of agents of each type assigned to one task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamConfiguration {
    counts: Vec<u32>,
}

impl TeamConfiguration {
    pub fn new(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn zeros(num_agent_types: usize) -> Self {
        Self { counts: vec![0; num_agent_types] }
    }

    /// Unit team holding a single agent of type `k`.
    pub fn unit(num_agent_types: usize, k: AgentTypeId) -> Self {
        let mut counts = vec![0; num_agent_types];
        counts[k.0] = 1;
        Self { counts }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn num_agent_types(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Elementwise `self ≥ other`.
    pub fn dominates(&self, other: &TeamConfiguration) -> bool {
        self.counts.len() == other.counts.len() && self.counts.iter().zip(&other.counts).all(|(a, b)| a >= b)
    }

    pub fn checked_add(&self, other: &TeamConfiguration) -> Result<TeamConfiguration> {
        if self.counts.len() != other.counts.len() {
            return Err(Error::DimensionMismatch {
                what: "team configuration",
                expected: self.counts.len(),
                found: other.counts.len(),
            });
        }
        Ok(TeamConfiguration { counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect() })
    }
}

impl From<Vec<u32>> for TeamConfiguration {
    fn from(counts: Vec<u32>) -> Self {
        Self::new(counts)
    }
}

/// `|C|×|K|` nonnegative matrix; entry `(c, k)` is how much of capability `c`
/// one agent of type `k` contributes.
#[derive(Debug, Clone, PartialEq)]
pub struct CapabilityMatrix {
    num_capabilities: usize,
    num_agent_types: usize,
    values: Vec<f64>,
}

impl CapabilityMatrix {
    pub fn zeros(num_capabilities: usize, num_agent_types: usize) -> Self {
        Self { num_capabilities, num_agent_types, values: vec![0.0; num_capabilities * num_agent_types] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_capabilities = rows.len();
        let num_agent_types = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(num_capabilities * num_agent_types);
        for row in rows {
            if row.len() != num_agent_types {
                return Err(Error::DimensionMismatch {
                    what: "capability matrix row",
                    expected: num_agent_types,
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        let m = Self { num_capabilities, num_agent_types, values };
        m.check_nonnegative()?;
        Ok(m)
    }

    fn check_nonnegative(&self) -> Result<()> {
        for c in 0..self.num_capabilities {
            for k in 0..self.num_agent_types {
                let v = self.get(CapabilityId(c), AgentTypeId(k));
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidData(format!(
                        "capability value a[{},{}] = {v} must be finite and nonnegative",
                        c + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_capabilities(&self) -> usize {
        self.num_capabilities
    }

    pub fn num_agent_types(&self) -> usize {
        self.num_agent_types
    }

    pub fn get(&self, c: CapabilityId, k: AgentTypeId) -> f64 {
        self.values[c.0 * self.num_agent_types + k.0]
    }

    pub(crate) fn set(&mut self, c: CapabilityId, k: AgentTypeId, v: f64) {
        self.values[c.0 * self.num_agent_types + k.0] = v;
    }

    /// Row `a^c`.
    pub fn row(&self, c: CapabilityId) -> &[f64] {
        let start = c.0 * self.num_agent_types;
        &self.values[start..start + self.num_agent_types]
    }

    /// Column `a_k`, the capability vector of one agent of type `k`.
    pub fn column(&self, k: AgentTypeId) -> Vec<f64> {
        (0..self.num_capabilities).map(|c| self.get(CapabilityId(c), k)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_capabilities).map(|c| self.row(CapabilityId(c)).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

/// Per-task threshold vectors `b_i`, stored task-major (`|M|×|C|`).
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementSet {
    num_tasks: usize,
    num_capabilities: usize,
    thresholds: Vec<f64>,
}

impl RequirementSet {
    pub fn zeros(num_tasks: usize, num_capabilities: usize) -> Self {
        Self { num_tasks, num_capabilities, thresholds: vec![0.0; num_tasks * num_capabilities] }
    }

    /// One row per task.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_tasks = rows.len();
        let num_capabilities = rows.first().map_or(0, Vec::len);
        let mut thresholds = Vec::with_capacity(num_tasks * num_capabilities);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != num_capabilities {
                return Err(Error::DimensionMismatch {
                    what: "requirement row",
                    expected: num_capabilities,
                    found: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidData(format!("requirement of task {} has invalid threshold {v}", i + 1)));
            }
            thresholds.extend(row);
        }
        Ok(Self { num_tasks, num_capabilities, thresholds })
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn num_capabilities(&self) -> usize {
        self.num_capabilities
    }

    pub fn get(&self, c: CapabilityId, i: TaskId) -> f64 {
        self.thresholds[i.0 * self.num_capabilities + c.0]
    }

    pub(crate) fn set(&mut self, c: CapabilityId, i: TaskId, v: f64) {
        self.thresholds[i.0 * self.num_capabilities + c.0] = v;
    }

    /// Threshold vector `b_i` of one task.
    pub fn task(&self, i: TaskId) -> &[f64] {
        let start = i.0 * self.num_capabilities;
        &self.thresholds[start..start + self.num_capabilities]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_tasks).map(|i| self.task(TaskId(i)).to_vec()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { thresholds: self.thresholds.iter().map(|v| v * factor).collect(), ..self.clone() }
    }
}

/// Prior knowledge of which capability and requirement entries are positive.
///
/// The zero sets are the complements of the positive sets, so the two halves
/// of each partition are always disjoint and exhaustive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    num_capabilities: usize,
    num_agent_types: usize,
    num_tasks: usize,
    capability_positive: Vec<bool>,
    requirement_positive: Vec<bool>,
}

impl SparsityPattern {
    /// Pattern with every entry positive.
    pub fn dense(num_capabilities: usize, num_agent_types: usize, num_tasks: usize) -> Self {
        Self {
            num_capabilities,
            num_agent_types,
            num_tasks,
            capability_positive: vec![true; num_capabilities * num_agent_types],
            requirement_positive: vec![true; num_capabilities * num_tasks],
        }
    }

    /// Builds a pattern from the positive index pairs; everything else is zero.
    pub fn from_positive_sets(
        num_capabilities: usize,
        num_agent_types: usize,
        num_tasks: usize,
        positive_capabilities: &[(CapabilityId, AgentTypeId)],
        positive_requirements: &[(CapabilityId, TaskId)],
    ) -> Result<Self> {
        let mut pattern = Self {
            num_capabilities,
            num_agent_types,
            num_tasks,
            capability_positive: vec![false; num_capabilities * num_agent_types],
            requirement_positive: vec![false; num_capabilities * num_tasks],
        };
        for &(c, k) in positive_capabilities {
            if c.0 >= num_capabilities || k.0 >= num_agent_types {
                return Err(Error::InvalidData(format!("capability sparsity entry ({c}, {k}) out of range")));
            }
            pattern.capability_positive[c.0 * num_agent_types + k.0] = true;
        }
        for &(c, i) in positive_requirements {
            if c.0 >= num_capabilities || i.0 >= num_tasks {
                return Err(Error::InvalidData(format!("requirement sparsity entry ({c}, {i}) out of range")));
            }
            pattern.requirement_positive[c.0 * num_tasks + i.0] = true;
        }
        pattern.validate()?;
        Ok(pattern)
    }

    /// Every capability row needs a positive entry, otherwise the row cannot
    /// be normalized to sum 1.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.num_capabilities {
            if self.positive_agent_types(CapabilityId(c)).is_empty() {
                return Err(Error::InvalidData(format!(
                    "capability {} has no positive agent type in the sparsity pattern",
                    c + 1
                )));
            }
        }
        Ok(())
    }

    pub fn num_capabilities(&self) -> usize {
        self.num_capabilities
    }

    pub fn num_agent_types(&self) -> usize {
        self.num_agent_types
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn capability_is_positive(&self, c: CapabilityId, k: AgentTypeId) -> bool {
        self.capability_positive[c.0 * self.num_agent_types + k.0]
    }

    pub fn requirement_is_positive(&self, c: CapabilityId, i: TaskId) -> bool {
        self.requirement_positive[c.0 * self.num_tasks + i.0]
    }

    pub(crate) fn set_capability(&mut self, c: CapabilityId, k: AgentTypeId, positive: bool) {
        self.capability_positive[c.0 * self.num_agent_types + k.0] = positive;
    }

    pub(crate) fn set_requirement(&mut self, c: CapabilityId, i: TaskId, positive: bool) {
        self.requirement_positive[c.0 * self.num_tasks + i.0] = positive;
    }

    /// Agent types `k` with `(c, k)` in the positive capability set.
    pub fn positive_agent_types(&self, c: CapabilityId) -> Vec<AgentTypeId> {
        (0..self.num_agent_types).filter(|&k| self.capability_is_positive(c, AgentTypeId(k))).map(AgentTypeId).collect()
    }

    /// Tasks `i` with `(c, i)` in the positive requirement set.
    pub fn positive_tasks(&self, c: CapabilityId) -> Vec<TaskId> {
        (0..self.num_tasks).filter(|&i| self.requirement_is_positive(c, TaskId(i))).map(TaskId).collect()
    }

    pub fn positive_capability_pairs(&self) -> Vec<(CapabilityId, AgentTypeId)> {
        let mut out = Vec::new();
        for c in 0..self.num_capabilities {
            for k in self.positive_agent_types(CapabilityId(c)) {
                out.push((CapabilityId(c), k));
            }
        }
        out
    }

    pub fn positive_requirement_pairs(&self) -> Vec<(CapabilityId, TaskId)> {
        let mut out = Vec::new();
        for c in 0..self.num_capabilities {
            for i in self.positive_tasks(CapabilityId(c)) {
                out.push((CapabilityId(c), i));
            }
        }
        out
    }

    /// Pattern of the nonzero entries of a concrete model.
    pub fn from_model(a: &CapabilityMatrix, b: &RequirementSet) -> Result<Self> {
        let mut pattern = Self {
            num_capabilities: a.num_capabilities(),
            num_agent_types: a.num_agent_types(),
            num_tasks: b.num_tasks(),
            capability_positive: vec![false; a.num_capabilities() * a.num_agent_types()],
            requirement_positive: vec![false; a.num_capabilities() * b.num_tasks()],
        };
        for c in 0..a.num_capabilities() {
            let c = CapabilityId(c);
            for k in 0..a.num_agent_types() {
                pattern.set_capability(c, AgentTypeId(k), a.get(c, AgentTypeId(k)) > 0.0);
            }
            for i in 0..b.num_tasks() {
                pattern.set_requirement(c, TaskId(i), b.get(c, TaskId(i)) > 0.0);
            }
        }
        pattern.validate()?;
        Ok(pattern)
    }
}

/// One evaluated team with its measured performance and validity label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub team: TeamConfiguration,
    pub performance: f64,
    #[serde(rename = "valid")]
    pub is_valid: bool,
}

/// Samples grouped by task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub num_agent_types: usize,
    pub tasks: Vec<Vec<TrainingSample>>,
}

impl TrainingSet {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn positives(&self, i: TaskId) -> impl Iterator<Item = &TeamConfiguration> {
        self.tasks[i.0].iter().filter(|s| s.is_valid).map(|s| &s.team)
    }
}

/// Cumulative team capability `A·y`.
pub fn team_capability(team: &TeamConfiguration, a: &CapabilityMatrix) -> Result<Vec<f64>> {
    if team.num_agent_types() != a.num_agent_types() {
        return Err(Error::DimensionMismatch {
            what: "team configuration",
            expected: a.num_agent_types(),
            found: team.num_agent_types(),
        });
    }
    Ok((0..a.num_capabilities()).map(|c| dot_counts(a.row(CapabilityId(c)), team.counts())).collect())
}

pub(crate) fn dot_counts(row: &[f64], counts: &[u32]) -> f64 {
    row.iter().zip(counts).map(|(a, &y)| a * f64::from(y)).sum()
}

/// `A·y ≥ b − ε` on every capability row.
pub fn classify_with_tolerance(
    team: &TeamConfiguration,
    a: &CapabilityMatrix,
    b: &[f64],
    tolerance: f64,
) -> Result<bool> {
    if b.len() != a.num_capabilities() {
        return Err(Error::DimensionMismatch {
            what: "requirement vector",
            expected: a.num_capabilities(),
            found: b.len(),
        });
    }
    let capability = team_capability(team, a)?;
    Ok(capability.iter().zip(b).all(|(have, need)| *have >= need - tolerance))
}

/// Feasibility predicate at the default tolerance.
pub fn classify(team: &TeamConfiguration, a: &CapabilityMatrix, b: &[f64]) -> Result<bool> {
    classify_with_tolerance(team, a, b, FEASIBILITY_TOLERANCE)
}

/// A capability matrix and requirement set with their sparsity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub capabilities: CapabilityMatrix,
    pub requirements: RequirementSet,
    pub sparsity: SparsityPattern,
}

impl Model {
    pub fn new(
        capabilities: CapabilityMatrix,
        requirements: RequirementSet,
        sparsity: SparsityPattern,
    ) -> Result<Self> {
        if capabilities.num_capabilities() != requirements.num_capabilities()
            || sparsity.num_capabilities() != capabilities.num_capabilities()
        {
            return Err(Error::DimensionMismatch {
                what: "capability count",
                expected: capabilities.num_capabilities(),
                found: requirements.num_capabilities(),
            });
        }
        if sparsity.num_agent_types() != capabilities.num_agent_types() {
            return Err(Error::DimensionMismatch {
                what: "agent type count",
                expected: capabilities.num_agent_types(),
                found: sparsity.num_agent_types(),
            });
        }
        if sparsity.num_tasks() != requirements.num_tasks() {
            return Err(Error::DimensionMismatch {
                what: "task count",
                expected: requirements.num_tasks(),
                found: sparsity.num_tasks(),
            });
        }
        Ok(Self { capabilities, requirements, sparsity })
    }

    pub fn num_tasks(&self) -> usize {
        self.requirements.num_tasks()
    }

    pub fn num_agent_types(&self) -> usize {
        self.capabilities.num_agent_types()
    }

    pub fn num_capabilities(&self) -> usize {
        self.capabilities.num_capabilities()
    }

    pub fn classify(&self, team: &TeamConfiguration, task: TaskId) -> Result<bool> {
        classify(team, &self.capabilities, self.requirements.task(task))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn team(v: &[u32]) -> TeamConfiguration {
        TeamConfiguration::new(v.to_vec())
    }

    #[test]
    fn zero_team_fails_positive_threshold() {
        let a = CapabilityMatrix::from_rows(vec![vec![0.3, 0.7], vec![1.0, 0.0]]).unwrap();
        assert!(!classify(&team(&[0, 0]), &a, &[0.0, 0.5]).unwrap());
    }

    #[test]
    fn boundary_equality_is_feasible() {
        let a = CapabilityMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        assert!(classify(&team(&[2, 0]), &a, &[1.0]).unwrap());
        assert!(!classify(&team(&[1, 0]), &a, &[1.0]).unwrap());
    }

    #[test]
    fn unit_team_selects_column() {
        let a = CapabilityMatrix::from_rows(vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]).unwrap();
        for k in 0..3 {
            let t = TeamConfiguration::unit(3, AgentTypeId(k));
            assert_eq!(team_capability(&t, &a).unwrap(), a.column(AgentTypeId(k)));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = CapabilityMatrix::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        assert!(matches!(classify(&team(&[1, 1, 1]), &a, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(classify(&team(&[1, 1]), &a, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn negative_capability_rejected() {
        assert!(CapabilityMatrix::from_rows(vec![vec![0.5, -0.1]]).is_err());
    }

    #[test]
    fn sparsity_requires_nonempty_rows() {
        let err = SparsityPattern::from_positive_sets(2, 2, 1, &[(CapabilityId(0), AgentTypeId(1))], &[]);
        assert!(err.is_err());
    }

    #[test]
    fn ids_render_one_based() {
        assert_eq!(TaskId(0).to_string(), "1");
        assert_eq!(AgentTypeId(4).to_string(), "5");
    }
}
