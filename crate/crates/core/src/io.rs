//! JSON file formats and output helpers.
//!
//! Indices in files are 1-based. JSON output is canonical: keys sorted, floats
//! rounded to 12 significant digits, pretty-printed, written atomically.

use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::alloc::{describe_route, AllocationInstance, AllocationPlan};
use crate::error::{Error, Result};
use crate::learner::{CapabilityReport, LearnedModel};
use crate::lp::SolveStatus;
use crate::model::{
    AgentTypeId, CapabilityId, CapabilityMatrix, Model, RequirementSet, SparsityPattern, TaskId, TeamConfiguration,
    TrainingSample, TrainingSet,
};

pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

fn round_floats(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            if let Some(f) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_significant(f)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Canonical pretty JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("output types serialize to JSON");
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("JSON values always print");
    s.push('\n');
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io { path: path.display().to_string(), source };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents).map_err(io_err)?;
    // Temporary files are created owner-only; outputs get ordinary permissions.
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644)).map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_canonical_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.display().to_string(), source })
}

/// Positive index pairs, 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityJson {
    #[serde(rename = "A1")]
    pub a1: Vec<[usize; 2]>,
    #[serde(rename = "B1")]
    pub b1: Vec<[usize; 2]>,
}

/// `sparsity.json`: the pattern together with its dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityFile {
    pub num_agent_types: usize,
    pub num_capabilities: usize,
    pub num_tasks: usize,
    #[serde(rename = "A1")]
    pub a1: Vec<[usize; 2]>,
    #[serde(rename = "B1")]
    pub b1: Vec<[usize; 2]>,
}

/// `model.json`. `b` has one row per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub num_agent_types: usize,
    pub num_capabilities: usize,
    pub num_tasks: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub sparsity: SparsityJson,
}

fn one_based_pairs(pairs: impl Iterator<Item = (usize, usize)>) -> Vec<[usize; 2]> {
    pairs.map(|(x, y)| [x + 1, y + 1]).collect()
}

fn zero_based(pair: [usize; 2], what: &str) -> Result<(usize, usize)> {
    if pair[0] == 0 || pair[1] == 0 {
        return Err(Error::InvalidData(format!("{what} indices are 1-based, got {pair:?}")));
    }
    Ok((pair[0] - 1, pair[1] - 1))
}

fn sparsity_json(p: &SparsityPattern) -> SparsityJson {
    SparsityJson {
        a1: one_based_pairs(p.positive_capability_pairs().into_iter().map(|(c, k)| (c.0, k.0))),
        b1: one_based_pairs(p.positive_requirement_pairs().into_iter().map(|(c, i)| (c.0, i.0))),
    }
}

fn pattern_from_json(nc: usize, nk: usize, nm: usize, json: &SparsityJson) -> Result<SparsityPattern> {
    let a1 = json
        .a1
        .iter()
        .map(|&p| zero_based(p, "A1").map(|(c, k)| (CapabilityId(c), AgentTypeId(k))))
        .collect::<Result<Vec<_>>>()?;
    let b1 = json
        .b1
        .iter()
        .map(|&p| zero_based(p, "B1").map(|(c, i)| (CapabilityId(c), TaskId(i))))
        .collect::<Result<Vec<_>>>()?;
    SparsityPattern::from_positive_sets(nc, nk, nm, &a1, &b1)
}

impl SparsityFile {
    pub fn from_pattern(p: &SparsityPattern) -> Self {
        let json = sparsity_json(p);
        Self {
            num_agent_types: p.num_agent_types(),
            num_capabilities: p.num_capabilities(),
            num_tasks: p.num_tasks(),
            a1: json.a1,
            b1: json.b1,
        }
    }

    pub fn to_pattern(&self) -> Result<SparsityPattern> {
        pattern_from_json(
            self.num_capabilities,
            self.num_agent_types,
            self.num_tasks,
            &SparsityJson { a1: self.a1.clone(), b1: self.b1.clone() },
        )
    }
}

impl ModelFile {
    pub fn from_model(m: &Model) -> Self {
        Self {
            num_agent_types: m.num_agent_types(),
            num_capabilities: m.num_capabilities(),
            num_tasks: m.num_tasks(),
            a: m.capabilities.rows(),
            b: m.requirements.rows(),
            sparsity: sparsity_json(&m.sparsity),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        let dims_ok = self.a.len() == self.num_capabilities
            && self.a.iter().all(|r| r.len() == self.num_agent_types)
            && self.b.len() == self.num_tasks
            && self.b.iter().all(|r| r.len() == self.num_capabilities);
        if !dims_ok {
            return Err(Error::InvalidData("model matrix shapes disagree with declared sizes".into()));
        }
        let a = if self.num_capabilities == 0 {
            CapabilityMatrix::zeros(0, self.num_agent_types)
        } else {
            CapabilityMatrix::from_rows(self.a.clone())?
        };
        let b = if self.num_tasks == 0 {
            RequirementSet::zeros(0, self.num_capabilities)
        } else {
            RequirementSet::from_rows(self.b.clone())?
        };
        let sparsity = pattern_from_json(self.num_capabilities, self.num_agent_types, self.num_tasks, &self.sparsity)?;
        Model::new(a, b, sparsity)
    }
}

pub fn read_model(path: &Path) -> Result<Model> {
    read_json::<ModelFile>(path)?.to_model()
}

pub fn write_model(path: &Path, model: &Model) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

/// Reads a sparsity pattern from either a `sparsity.json` or a `model.json`.
pub fn read_sparsity(path: &Path) -> Result<SparsityPattern> {
    let value: Value = read_json(path)?;
    if value.get("sparsity").is_some() {
        let file: ModelFile =
            serde_json::from_value(value).map_err(|source| Error::Json { path: path.display().to_string(), source })?;
        return pattern_from_json(file.num_capabilities, file.num_agent_types, file.num_tasks, &file.sparsity);
    }
    let file: SparsityFile =
        serde_json::from_value(value).map_err(|source| Error::Json { path: path.display().to_string(), source })?;
    file.to_pattern()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSamplesJson {
    /// 1-based.
    pub task_id: usize,
    pub samples: Vec<TrainingSample>,
}

/// `training.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingFile {
    pub num_agent_types: usize,
    pub tasks: Vec<TaskSamplesJson>,
}

impl TrainingFile {
    pub fn from_training(t: &TrainingSet) -> Self {
        Self {
            num_agent_types: t.num_agent_types,
            tasks: t
                .tasks
                .iter()
                .enumerate()
                .map(|(i, s)| TaskSamplesJson { task_id: i + 1, samples: s.clone() })
                .collect(),
        }
    }

    /// Tasks may appear in any order but must be exactly `1..=n`.
    pub fn to_training(&self) -> Result<TrainingSet> {
        let n = self.tasks.len();
        let mut slots: Vec<Option<Vec<TrainingSample>>> = vec![None; n];
        for t in &self.tasks {
            if t.task_id == 0 || t.task_id > n || slots[t.task_id - 1].is_some() {
                return Err(Error::InvalidData(format!("task ids must be exactly 1..={n}; got task_id {}", t.task_id)));
            }
            for s in &t.samples {
                if s.team.num_agent_types() != self.num_agent_types {
                    return Err(Error::DimensionMismatch {
                        what: "team configuration",
                        expected: self.num_agent_types,
                        found: s.team.num_agent_types(),
                    });
                }
            }
            slots[t.task_id - 1] = Some(t.samples.clone());
        }
        Ok(TrainingSet {
            num_agent_types: self.num_agent_types,
            tasks: slots.into_iter().map(|s| s.unwrap_or_default()).collect(),
        })
    }
}

pub fn read_training(path: &Path) -> Result<TrainingSet> {
    read_json::<TrainingFile>(path)?.to_training()
}

pub fn write_training(path: &Path, t: &TrainingSet) -> Result<()> {
    write_json(path, &TrainingFile::from_training(t))
}

/// One unlabeled sample: a single performance value or repeated draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub team: TeamConfiguration,
    #[serde(default)]
    pub performance: Option<f64>,
    #[serde(default)]
    pub draws: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTask {
    pub task_id: usize,
    /// Overrides the command-line threshold for this task.
    #[serde(default)]
    pub threshold: Option<f64>,
    pub samples: Vec<RawSample>,
}

/// Raw performance records awaiting labels (input of `label`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrainingFile {
    pub num_agent_types: usize,
    pub tasks: Vec<RawTask>,
}

/// `learn_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnReport {
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub total_objective: f64,
    pub total_solve_millis: f64,
    pub capabilities: Vec<CapabilityReportJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapabilityReportJson {
    /// 1-based.
    pub capability: usize,
    pub objective: f64,
    pub status: &'static str,
    pub solve_millis: f64,
    pub candidate_rows: usize,
    pub active_rows: usize,
    pub rounds: usize,
    pub closed_form: bool,
}

impl From<&CapabilityReport> for CapabilityReportJson {
    fn from(r: &CapabilityReport) -> Self {
        Self {
            capability: r.capability + 1,
            objective: r.objective,
            status: status_name(r.status),
            solve_millis: r.solve_millis,
            candidate_rows: r.candidate_rows,
            active_rows: r.active_rows,
            rounds: r.rounds,
            closed_form: r.closed_form,
        }
    }
}

pub fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::IterationLimit => "iteration_limit",
    }
}

impl LearnReport {
    pub fn new(learned: &LearnedModel, alpha_a: f64, alpha_b: f64, total_solve_millis: f64) -> Self {
        Self {
            alpha_a,
            alpha_b,
            total_objective: learned.total_objective(),
            total_solve_millis,
            capabilities: learned.per_capability.iter().map(CapabilityReportJson::from).collect(),
        }
    }
}

/// `instance.json`. Cost grids are dense `[k][i][j]` over nodes `1..=M+2`
/// (start `M+1`, terminal `M+2`); entries off the edge set are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub num_tasks: usize,
    pub num_agent_types: usize,
    /// Path of a `model.json`, relative to the instance file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub travel_time: Vec<Vec<Vec<f64>>>,
    /// `[k][i]` over tasks.
    pub task_time: Vec<Vec<f64>>,
    pub travel_energy: Vec<Vec<Vec<f64>>>,
    /// `null` means unlimited.
    pub energy_limit: Vec<Option<f64>>,
    pub fleet: Vec<u32>,
    pub energy_weight: f64,
    pub time_weight: f64,
    #[serde(default)]
    pub big_m: Option<f64>,
    #[serde(default)]
    pub team_size_cap: Option<u32>,
}

impl InstanceFile {
    pub fn from_instance(instance: &AllocationInstance, model_path: Option<String>) -> Self {
        Self {
            num_tasks: instance.num_tasks(),
            num_agent_types: instance.num_agent_types(),
            model: model_path,
            travel_time: instance.travel_time.clone(),
            task_time: instance.task_time.clone(),
            travel_energy: instance.travel_energy.clone(),
            energy_limit: instance.energy_limit.iter().map(|d| d.is_finite().then_some(*d)).collect(),
            fleet: instance.fleet.clone(),
            energy_weight: instance.energy_weight,
            time_weight: instance.time_weight,
            big_m: instance.big_m,
            team_size_cap: instance.team_size_cap,
        }
    }

    pub fn to_instance(&self, model: Model) -> Result<AllocationInstance> {
        if model.num_tasks() != self.num_tasks {
            return Err(Error::DimensionMismatch {
                what: "model tasks",
                expected: self.num_tasks,
                found: model.num_tasks(),
            });
        }
        if model.num_agent_types() != self.num_agent_types {
            return Err(Error::DimensionMismatch {
                what: "model agent types",
                expected: self.num_agent_types,
                found: model.num_agent_types(),
            });
        }
        let instance = AllocationInstance {
            model,
            travel_time: self.travel_time.clone(),
            task_time: self.task_time.clone(),
            travel_energy: self.travel_energy.clone(),
            energy_limit: self.energy_limit.iter().map(|d| d.unwrap_or(f64::INFINITY)).collect(),
            fleet: self.fleet.clone(),
            energy_weight: self.energy_weight,
            time_weight: self.time_weight,
            big_m: self.big_m,
            team_size_cap: self.team_size_cap,
        };
        instance.validate()?;
        Ok(instance)
    }
}

/// Reads an instance, loading the model from `model_path` or, failing that,
/// from the path named inside the instance file.
pub fn read_instance(path: &Path, model_path: Option<&Path>) -> Result<AllocationInstance> {
    let file: InstanceFile = read_json(path)?;
    let model = match (model_path, &file.model) {
        (Some(p), _) => read_model(p)?,
        (None, Some(rel)) => read_model(&path.parent().unwrap_or(Path::new(".")).join(rel))?,
        (None, None) => {
            return Err(Error::InvalidData(format!("{} names no model and none was given", path.display())));
        }
    };
    file.to_instance(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteJson {
    /// 1-based.
    pub agent_type: usize,
    pub count: u32,
    /// 1-based node numbers.
    pub nodes: Vec<usize>,
    /// Readable form, e.g. `s -> 2 -> u`.
    pub path: String,
}

/// `plan.json`. `flows` and `edge_used` are `[k][i][j]`, `teams` is
/// `[task][k]`, `start_times` covers every node with the mission time last.
/// `routes` is a summary and is ignored when reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub objective: f64,
    pub mission_time: f64,
    pub flows: Vec<Vec<Vec<u32>>>,
    pub edge_used: Vec<Vec<Vec<bool>>>,
    pub teams: Vec<Vec<u32>>,
    pub start_times: Vec<f64>,
    #[serde(default)]
    pub routes: Vec<RouteJson>,
}

impl PlanFile {
    pub fn from_plan(instance: &AllocationInstance, plan: &AllocationPlan) -> Self {
        let routes = plan
            .routes(instance.start(), instance.terminal())
            .into_iter()
            .map(|r| RouteJson {
                agent_type: r.agent_type.index() + 1,
                count: r.count,
                nodes: r.nodes.iter().map(|n| n + 1).collect(),
                path: describe_route(&r, instance.num_tasks()),
            })
            .collect();
        Self {
            objective: plan.objective,
            mission_time: plan.mission_time(),
            flows: plan.flows.clone(),
            edge_used: plan.edge_used.clone(),
            teams: plan.teams.clone(),
            start_times: plan.start_times.clone(),
            routes,
        }
    }

    pub fn to_plan(&self) -> AllocationPlan {
        AllocationPlan {
            flows: self.flows.clone(),
            edge_used: self.edge_used.clone(),
            teams: self.teams.clone(),
            start_times: self.start_times.clone(),
            objective: self.objective,
        }
    }
}

pub fn read_plan(path: &Path) -> Result<AllocationPlan> {
    Ok(read_json::<PlanFile>(path)?.to_plan())
}
