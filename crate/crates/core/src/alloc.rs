//! Team, route and schedule planning with learned capability constraints.
//!
//! Tasks are nodes `0..M`; the start node `s` is `M` and the terminal node `u`
//! is `M + 1`. Agents leave `s`, visit tasks and stop at `u`. Files and
//! messages show nodes 1-based.

use std::fmt;

use crate::error::{Error, Result};
use crate::lp::{solve_milp_with, LinearProgram, MilpOptions, MixedIntegerProgram, Relation, Sense, SolveStatus};
use crate::model::{dot_counts, AgentTypeId, CapabilityId, Model, TaskId};

/// Absolute tolerance used when checking plans.
pub const PLAN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationInstance {
    /// Learned capabilities and requirements.
    pub model: Model,
    /// `T[k][i][j]` over all nodes, seconds.
    pub travel_time: Vec<Vec<Vec<f64>>>,
    /// `T[k][i]` over tasks only; zero at `s` and `u`.
    pub task_time: Vec<Vec<f64>>,
    /// `d[k][i][j]` over all nodes.
    pub travel_energy: Vec<Vec<Vec<f64>>>,
    /// Total energy budget per agent type; may be infinite.
    pub energy_limit: Vec<f64>,
    pub fleet: Vec<u32>,
    pub energy_weight: f64,
    pub time_weight: f64,
    /// Overrides the default big-M constant when set.
    pub big_m: Option<f64>,
    /// Optional bound on the number of agents assigned to each task.
    pub team_size_cap: Option<u32>,
}

impl AllocationInstance {
    pub fn num_tasks(&self) -> usize {
        self.model.num_tasks()
    }

    pub fn num_agent_types(&self) -> usize {
        self.model.num_agent_types()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_tasks() + 2
    }

    pub fn start(&self) -> usize {
        self.num_tasks()
    }

    pub fn terminal(&self) -> usize {
        self.num_tasks() + 1
    }

    /// Directed edges of the task graph, row-major by `(from, to)`. Self-loops,
    /// edges into `s` and edges out of `u` are left out.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let (n, s, u) = (self.num_nodes(), self.start(), self.terminal());
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && j != s && i != u {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && j != self.start() && i != self.terminal()
    }

    /// Work time of type `k` at node `i` (zero at `s` and `u`).
    pub fn work_time(&self, k: usize, i: usize) -> f64 {
        if i < self.num_tasks() {
            self.task_time[k][i]
        } else {
            0.0
        }
    }

    /// Time that must separate `t_i` and `t_j` when type `k` uses edge `(i, j)`.
    pub fn edge_delay(&self, k: usize, i: usize, j: usize) -> f64 {
        self.travel_time[k][i][j] + self.work_time(k, i)
    }

    /// Explicit big-M, or the sum of all edge and task times plus one.
    pub fn big_m(&self) -> f64 {
        if let Some(m) = self.big_m {
            return m;
        }
        let travel: f64 = (0..self.num_agent_types())
            .flat_map(|k| self.edges().into_iter().map(move |(i, j)| (k, i, j)))
            .map(|(k, i, j)| self.travel_time[k][i][j])
            .sum();
        let work: f64 = self.task_time.iter().flatten().sum();
        travel + work + 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let (nk, nm, n) = (self.num_agent_types(), self.num_tasks(), self.num_nodes());
        check_len("travel time types", self.travel_time.len(), nk)?;
        check_len("travel energy types", self.travel_energy.len(), nk)?;
        check_len("task time types", self.task_time.len(), nk)?;
        check_len("energy limits", self.energy_limit.len(), nk)?;
        check_len("fleet", self.fleet.len(), nk)?;
        for k in 0..nk {
            check_len("task times", self.task_time[k].len(), nm)?;
            for grid in [&self.travel_time[k], &self.travel_energy[k]] {
                check_len("cost matrix rows", grid.len(), n)?;
                for row in grid.iter() {
                    check_len("cost matrix columns", row.len(), n)?;
                }
            }
        }
        let costs = self
            .travel_time
            .iter()
            .chain(&self.travel_energy)
            .flatten()
            .flatten()
            .chain(self.task_time.iter().flatten());
        for &v in costs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidData(format!("time and energy costs must be finite and >= 0, got {v}")));
            }
        }
        if self.energy_limit.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::InvalidData("energy limits must be >= 0".into()));
        }
        for w in [self.energy_weight, self.time_weight] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidData(format!("objective weights must be finite and >= 0, got {w}")));
            }
        }
        if let Some(m) = self.big_m {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::InvalidData(format!("big-M must be finite and positive, got {m}")));
            }
        }
        Ok(())
    }
}

fn check_len(what: &'static str, found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, found })
    }
}

/// Column positions of the allocation program's variables.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub edges: Vec<(usize, usize)>,
    num_agent_types: usize,
    num_tasks: usize,
}

impl VariableLayout {
    pub fn new(instance: &AllocationInstance) -> Self {
        Self { edges: instance.edges(), num_agent_types: instance.num_agent_types(), num_tasks: instance.num_tasks() }
    }

    fn per_type(&self) -> usize {
        self.num_agent_types * self.edges.len()
    }

    pub fn x(&self, k: usize, e: usize) -> usize {
        k * self.edges.len() + e
    }

    pub fn r(&self, k: usize, e: usize) -> usize {
        self.per_type() + k * self.edges.len() + e
    }

    pub fn y(&self, k: usize, m: usize) -> usize {
        2 * self.per_type() + k * self.num_tasks + m
    }

    pub fn t(&self, node: usize) -> usize {
        2 * self.per_type() + self.num_agent_types * self.num_tasks + node
    }

    pub fn num_vars(&self) -> usize {
        self.t(self.num_tasks + 2)
    }
}

/// Builds the allocation MILP. With `strict_integer` the flow variables are
/// declared integral as well as the edge indicators.
///
/// Besides the model's own constraint families the program carries implied
/// bounds on the start and mission times of tasks that must be visited; they
/// cut no integral plan but tighten the relaxation.
pub fn build_milp(instance: &AllocationInstance, strict_integer: bool) -> (MixedIntegerProgram, VariableLayout) {
    let layout = VariableLayout::new(instance);
    let (nk, nm) = (instance.num_agent_types(), instance.num_tasks());
    let (s, u) = (instance.start(), instance.terminal());
    let big_m = instance.big_m();
    let edges = &layout.edges;

    let mut objective = vec![0.0; layout.num_vars()];
    for k in 0..nk {
        for (e, &(i, j)) in edges.iter().enumerate() {
            objective[layout.x(k, e)] = instance.energy_weight * instance.travel_energy[k][i][j];
        }
    }
    objective[layout.t(u)] = instance.time_weight;
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for k in 0..nk {
        for e in 0..edges.len() {
            lp.set_bounds(layout.r(k, e), 0.0, 1.0);
        }
    }
    lp.set_bounds(layout.t(s), 0.0, 0.0);

    let a = &instance.model.capabilities;
    let b = &instance.model.requirements;
    for m in 0..nm {
        for c in 0..instance.model.num_capabilities() {
            let need = b.get(CapabilityId(c), TaskId(m));
            if need <= 0.0 {
                continue;
            }
            let terms = (0..nk)
                .filter_map(|k| {
                    let v = a.get(CapabilityId(c), AgentTypeId(k));
                    (v != 0.0).then(|| (layout.y(k, m), v))
                })
                .collect();
            lp.add_constraint(crate::lp::Constraint::new(terms, Relation::Ge, need).named(format!(
                "requirement_{}_{}",
                m + 1,
                c + 1
            )));
        }
    }

    for k in 0..nk {
        for (e, &(i, j)) in edges.iter().enumerate() {
            let delay = instance.edge_delay(k, i, j);
            lp.add_constraint(
                crate::lp::Constraint::new(
                    vec![(layout.t(i), 1.0), (layout.t(j), -1.0), (layout.r(k, e), big_m)],
                    Relation::Le,
                    big_m - delay,
                )
                .named(format!("time_{}_{}_{}", k + 1, i + 1, j + 1)),
            );
        }
    }

    for k in 0..nk {
        if instance.energy_limit[k].is_finite() {
            let terms = edges
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| instance.travel_energy[k][i][j] != 0.0)
                .map(|(e, &(i, j))| (layout.x(k, e), instance.travel_energy[k][i][j]))
                .collect();
            lp.add_constraint(
                crate::lp::Constraint::new(terms, Relation::Le, instance.energy_limit[k])
                    .named(format!("energy_{}", k + 1)),
            );
        }
    }

    for k in 0..nk {
        for m in 0..nm {
            let mut flow = Vec::new();
            let mut team = vec![(layout.y(k, m), 1.0)];
            for (e, &(i, j)) in edges.iter().enumerate() {
                if j == m {
                    flow.push((layout.x(k, e), 1.0));
                    team.push((layout.x(k, e), -1.0));
                } else if i == m {
                    flow.push((layout.x(k, e), -1.0));
                }
            }
            lp.add_constraint(crate::lp::Constraint::new(flow, Relation::Eq, 0.0).named(format!(
                "flow_{}_{}",
                k + 1,
                m + 1
            )));
            lp.add_constraint(crate::lp::Constraint::new(team, Relation::Eq, 0.0).named(format!(
                "team_{}_{}",
                k + 1,
                m + 1
            )));
        }
        let departures = edges
            .iter()
            .enumerate()
            .filter(|(_, &(i, j))| i == s && j < nm)
            .map(|(e, _)| (layout.x(k, e), 1.0))
            .collect();
        lp.add_constraint(
            crate::lp::Constraint::new(departures, Relation::Le, f64::from(instance.fleet[k]))
                .named(format!("fleet_{}", k + 1)),
        );
    }

    for k in 0..nk {
        let n_k = f64::from(instance.fleet[k]);
        for (e, &(i, j)) in edges.iter().enumerate() {
            let (x, r) = (layout.x(k, e), layout.r(k, e));
            let tag = format!("{}_{}_{}", k + 1, i + 1, j + 1);
            lp.add_constraint(
                crate::lp::Constraint::new(vec![(x, 1.0), (r, -1.0)], Relation::Ge, 0.0).named(format!("used_{tag}")),
            );
            lp.add_constraint(
                crate::lp::Constraint::new(vec![(x, 1.0), (r, -n_k)], Relation::Le, 0.0).named(format!("cap_{tag}")),
            );
        }
    }

    // Tasks with a positive requirement must be visited, which bounds their
    // start times and the mission time by shortest delays. Only valid when
    // every task-to-task move takes time, so flows cannot circulate without
    // leaving the depot.
    if cycles_take_time(instance) {
        let (to_task, from_task) = shortest_delays(instance);
        for m in 0..nm {
            let required = (0..instance.model.num_capabilities()).any(|c| b.get(CapabilityId(c), TaskId(m)) > 0.0);
            if !required {
                continue;
            }
            if to_task[m].is_finite() {
                lp.set_bounds(layout.t(m), to_task[m], f64::INFINITY);
            }
            if from_task[m].is_finite() {
                lp.add_constraint(
                    crate::lp::Constraint::new(
                        vec![(layout.t(u), 1.0), (layout.t(m), -1.0)],
                        Relation::Ge,
                        from_task[m],
                    )
                    .named(format!("exit_{}", m + 1)),
                );
            }
        }
    }

    if let Some(cap) = instance.team_size_cap {
        for m in 0..nm {
            let terms = (0..nk).map(|k| (layout.y(k, m), 1.0)).collect();
            lp.add_constraint(
                crate::lp::Constraint::new(terms, Relation::Le, f64::from(cap)).named(format!("team_size_{}", m + 1)),
            );
        }
    }

    let mut integer_vars: Vec<usize> =
        (0..nk).flat_map(|k| (0..edges.len()).map(move |e| (k, e))).map(|(k, e)| layout.r(k, e)).collect();
    if strict_integer {
        integer_vars.extend((0..nk).flat_map(|k| (0..edges.len()).map(move |e| (k, e))).map(|(k, e)| layout.x(k, e)));
    }
    (MixedIntegerProgram::new(lp, integer_vars), layout)
}

fn cycles_take_time(instance: &AllocationInstance) -> bool {
    let nm = instance.num_tasks();
    (0..instance.num_agent_types())
        .all(|k| (0..nm).all(|i| (0..nm).all(|j| i == j || instance.edge_delay(k, i, j) > 0.0)))
}

/// Per task, lower bounds on the delay from `s` to its start and from its
/// start to `u`. Each required capability must be brought by some type that
/// has it, so a bound is the smallest shortest-path delay over those types,
/// maximized over the task's required capabilities.
fn shortest_delays(instance: &AllocationInstance) -> (Vec<f64>, Vec<f64>) {
    let (n, nm, s, u) = (instance.num_nodes(), instance.num_tasks(), instance.start(), instance.terminal());
    let nk = instance.num_agent_types();
    let mut dist = Vec::with_capacity(nk);
    for k in 0..nk {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (i, j) in instance.edges() {
            d[i][j] = d[i][j].min(instance.edge_delay(k, i, j));
        }
        for via in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let through = d[i][via] + d[via][j];
                    if through < d[i][j] {
                        d[i][j] = through;
                    }
                }
            }
        }
        dist.push(d);
    }
    let a = &instance.model.capabilities;
    let b = &instance.model.requirements;
    let mut to_task = vec![0.0; nm];
    let mut from_task = vec![0.0; nm];
    for m in 0..nm {
        for c in 0..instance.model.num_capabilities() {
            if b.get(CapabilityId(c), TaskId(m)) <= 0.0 {
                continue;
            }
            let carriers = || (0..nk).filter(|&k| a.get(CapabilityId(c), AgentTypeId(k)) > 0.0);
            let arrive = carriers().map(|k| dist[k][s][m]).fold(f64::INFINITY, f64::min);
            let leave = carriers().map(|k| dist[k][m][u]).fold(f64::INFINITY, f64::min);
            to_task[m] = f64::max(to_task[m], arrive);
            from_task[m] = f64::max(from_task[m], leave);
        }
    }
    (to_task, from_task)
}

/// A concrete plan: integral flows and teams with a start-time schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    /// `x[k][i][j]` over all nodes; zero off the edge set.
    pub flows: Vec<Vec<Vec<u32>>>,
    /// `r[k][i][j]`.
    pub edge_used: Vec<Vec<Vec<bool>>>,
    /// Team per task: `teams[i][k]`.
    pub teams: Vec<Vec<u32>>,
    /// `t` per node; the last entry is the mission time.
    pub start_times: Vec<f64>,
    pub objective: f64,
}

/// Agents of one type that follow the same node sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub agent_type: AgentTypeId,
    pub count: u32,
    /// 0-based node indices from `s` to `u`.
    pub nodes: Vec<usize>,
}

impl AllocationPlan {
    pub fn mission_time(&self) -> f64 {
        self.start_times.last().copied().unwrap_or(0.0)
    }

    pub fn total_agents(&self, k: usize, start: usize) -> u32 {
        self.flows[k][start].iter().sum()
    }

    /// Splits each type's flow into `s`→`u` paths, always following the
    /// lowest-numbered successor with flow left.
    pub fn routes(&self, start: usize, terminal: usize) -> Vec<Route> {
        let mut routes = Vec::new();
        for (k, flows) in self.flows.iter().enumerate() {
            let mut rest = flows.clone();
            loop {
                let mut nodes = vec![start];
                let mut seen = vec![false; rest.len()];
                seen[start] = true;
                let mut cur = start;
                while cur != terminal {
                    match (0..rest.len()).find(|&j| rest[cur][j] > 0 && !seen[j]) {
                        Some(j) => {
                            seen[j] = true;
                            nodes.push(j);
                            cur = j;
                        }
                        None => break,
                    }
                }
                if cur != terminal || nodes.len() < 2 {
                    break;
                }
                let count = nodes.windows(2).map(|w| rest[w[0]][w[1]]).min().unwrap_or(0);
                for w in nodes.windows(2) {
                    rest[w[0]][w[1]] -= count;
                }
                routes.push(Route { agent_type: AgentTypeId(k), count, nodes });
            }
        }
        routes
    }
}

/// Formats a node sequence with `s`/`u` for the depot nodes.
pub fn describe_route(route: &Route, num_tasks: usize) -> String {
    route
        .nodes
        .iter()
        .map(|&n| match n {
            n if n == num_tasks => "s".to_string(),
            n if n == num_tasks + 1 => "u".to_string(),
            n => (n + 1).to_string(),
        })
        .collect::<Vec<_>>()
        .join(" -> ")
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AllocationOptions {
    /// Declare flows integral from the start instead of only on fallback.
    pub strict_integer: bool,
    pub milp: MilpOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSolution {
    pub plan: AllocationPlan,
    /// Objective reported by the MILP solver.
    pub solver_objective: f64,
    pub branchings: usize,
    pub pivots: usize,
    /// True when the continuous-flow program gave fractional flows and the
    /// strict-integer program was solved instead.
    pub used_strict_integer: bool,
}

pub fn solve_allocation(instance: &AllocationInstance) -> Result<AllocationPlan> {
    solve_allocation_with(instance, &AllocationOptions::default()).map(|s| s.plan)
}

/// Solves the allocation program and extracts an integral plan.
///
/// Flows are continuous unless `strict_integer` is set; if they come back
/// fractional the program is solved again with integral flows. The returned
/// schedule is the earliest one compatible with the chosen edges.
pub fn solve_allocation_with(instance: &AllocationInstance, options: &AllocationOptions) -> Result<AllocationSolution> {
    instance.validate()?;
    let mut strict = options.strict_integer;
    let mut branchings = 0;
    let mut pivots = 0;
    loop {
        let (mip, layout) = build_milp(instance, strict);
        let result = solve_milp_with(&mip, &options.milp);
        branchings += result.branchings;
        pivots += result.pivots;
        match result.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(Error::InfeasibleAllocation),
            SolveStatus::Unbounded => {
                return Err(Error::InvalidData("allocation program is unbounded".into()));
            }
            SolveStatus::IterationLimit => {
                let incumbent = if result.assignment.is_empty() {
                    None
                } else {
                    extract_plan(instance, &layout, &result.assignment).map(Box::new)
                };
                return Err(Error::AllocationLimit { incumbent });
            }
        }
        let integral = (0..instance.num_agent_types())
            .flat_map(|k| (0..layout.edges.len()).map(move |e| (k, e)))
            .all(|(k, e)| is_integral(result.assignment[layout.x(k, e)]));
        if !integral {
            if strict {
                return Err(Error::InvalidData("strict-integer solve returned fractional flows".into()));
            }
            strict = true;
            continue;
        }
        let plan = extract_plan(instance, &layout, &result.assignment)
            .ok_or_else(|| Error::InvalidData("solver flows admit no feasible schedule".into()))?;
        return Ok(AllocationSolution {
            plan,
            solver_objective: result.objective,
            branchings,
            pivots,
            used_strict_integer: strict && !options.strict_integer,
        });
    }
}

fn is_integral(v: f64) -> bool {
    (v - v.round()).abs() <= PLAN_TOLERANCE
}

fn extract_plan(instance: &AllocationInstance, layout: &VariableLayout, x: &[f64]) -> Option<AllocationPlan> {
    let (nk, n) = (instance.num_agent_types(), instance.num_nodes());
    let mut flows = vec![vec![vec![0u32; n]; n]; nk];
    for k in 0..nk {
        for (e, &(i, j)) in layout.edges.iter().enumerate() {
            flows[k][i][j] = x[layout.x(k, e)].round().max(0.0) as u32;
        }
    }
    plan_from_flows(instance, flows)
}

/// Completes integral flows into a plan: indicators and teams follow from the
/// flows, start times are the earliest feasible schedule.
pub fn plan_from_flows(instance: &AllocationInstance, flows: Vec<Vec<Vec<u32>>>) -> Option<AllocationPlan> {
    let (nk, nm) = (instance.num_agent_types(), instance.num_tasks());
    let edge_used: Vec<Vec<Vec<bool>>> =
        flows.iter().map(|grid| grid.iter().map(|row| row.iter().map(|&v| v >= 1).collect()).collect()).collect();
    let teams = (0..nm).map(|m| (0..nk).map(|k| flows[k].iter().map(|row| row[m]).sum()).collect()).collect();
    let start_times = earliest_schedule(instance, &edge_used)?;
    let mut plan = AllocationPlan { flows, edge_used, teams, start_times, objective: 0.0 };
    plan.objective = plan_objective(instance, &plan);
    Some(plan)
}

pub fn plan_objective(instance: &AllocationInstance, plan: &AllocationPlan) -> f64 {
    let mut energy = 0.0;
    for (k, grid) in plan.flows.iter().enumerate() {
        for (i, row) in grid.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                energy += instance.travel_energy[k][i][j] * f64::from(v);
            }
        }
    }
    instance.energy_weight * energy + instance.time_weight * plan.mission_time()
}

/// Pointwise-smallest start times satisfying every time constraint for the
/// given edge indicators, or `None` when no schedule exists.
///
/// The constraints are difference constraints `t_j ≥ t_i + w`, so the answer
/// is a longest-path computation from a virtual origin pinned at zero.
pub fn earliest_schedule(instance: &AllocationInstance, edge_used: &[Vec<Vec<bool>>]) -> Option<Vec<f64>> {
    let n = instance.num_nodes();
    let origin = n;
    let big_m = instance.big_m();
    let mut arcs: Vec<(usize, usize, f64)> = (0..n).map(|v| (origin, v, 0.0)).collect();
    arcs.push((instance.start(), origin, 0.0));
    for (k, used) in edge_used.iter().enumerate() {
        for (i, j) in instance.edges() {
            let delay = instance.edge_delay(k, i, j);
            let w = if used[i][j] { delay } else { delay - big_m };
            arcs.push((i, j, w));
        }
    }
    let mut dist = vec![f64::NEG_INFINITY; n + 1];
    dist[origin] = 0.0;
    for round in 0..=n + 1 {
        let mut changed = false;
        for &(a, b, w) in &arcs {
            if dist[a] > f64::NEG_INFINITY && dist[a] + w > dist[b] {
                dist[b] = dist[a] + w;
                changed = true;
            }
        }
        if !changed {
            if dist[origin] > 0.0 {
                return None;
            }
            dist.truncate(n);
            return Some(dist);
        }
        if round == n + 1 {
            return None;
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    Shape,
    EdgeSet,
    Requirement,
    Time,
    StartTime,
    Energy,
    FlowConservation,
    Fleet,
    TeamFlow,
    Indicator,
    TeamSize,
    Objective,
}

impl ConstraintFamily {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintFamily::Shape => "shape",
            ConstraintFamily::EdgeSet => "edge_set",
            ConstraintFamily::Requirement => "requirement",
            ConstraintFamily::Time => "time",
            ConstraintFamily::StartTime => "start_time",
            ConstraintFamily::Energy => "energy",
            ConstraintFamily::FlowConservation => "flow_conservation",
            ConstraintFamily::Fleet => "fleet",
            ConstraintFamily::TeamFlow => "team_flow",
            ConstraintFamily::Indicator => "indicator",
            ConstraintFamily::TeamSize => "team_size",
            ConstraintFamily::Objective => "objective",
        }
    }
}

/// One broken constraint. Indices are 1-based; `slack` is the amount by
/// which the constraint is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub family: ConstraintFamily,
    pub indices: Vec<(&'static str, usize)>,
    pub slack: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(f, "{} [{}] violated by {}", self.family.name(), idx.join(", "), self.slack)
    }
}

/// Re-checks every constraint family on a concrete plan.
pub fn validate_plan(instance: &AllocationInstance, plan: &AllocationPlan) -> Vec<Violation> {
    let mut out = Vec::new();
    let (nk, nm, n) = (instance.num_agent_types(), instance.num_tasks(), instance.num_nodes());
    let s = instance.start();
    let tol = PLAN_TOLERANCE;
    let mut push = |family, indices: Vec<(&'static str, usize)>, slack: f64| {
        out.push(Violation { family, indices, slack });
    };

    fn square<T>(grids: &[Vec<Vec<T>>], nk: usize, n: usize) -> bool {
        grids.len() == nk && grids.iter().all(|g| g.len() == n && g.iter().all(|r| r.len() == n))
    }
    let shape_ok = instance.validate().is_ok()
        && square(&plan.flows, nk, n)
        && square(&plan.edge_used, nk, n)
        && plan.teams.len() == nm
        && plan.teams.iter().all(|t| t.len() == nk)
        && plan.start_times.len() == n;
    if !shape_ok {
        push(ConstraintFamily::Shape, Vec::new(), 1.0);
        return out;
    }

    let x = |k: usize, i: usize, j: usize| f64::from(plan.flows[k][i][j]);
    let t = &plan.start_times;
    let big_m = instance.big_m();

    for k in 0..nk {
        for i in 0..n {
            for j in 0..n {
                if !instance.is_edge(i, j) && (plan.flows[k][i][j] > 0 || plan.edge_used[k][i][j]) {
                    push(
                        ConstraintFamily::EdgeSet,
                        vec![("k", k + 1), ("i", i + 1), ("j", j + 1)],
                        x(k, i, j).max(1.0),
                    );
                }
            }
        }
    }

    for m in 0..nm {
        for c in 0..instance.model.num_capabilities() {
            let need = instance.model.requirements.get(CapabilityId(c), TaskId(m));
            let have = dot_counts(instance.model.capabilities.row(CapabilityId(c)), &plan.teams[m]);
            if have < need - tol {
                push(ConstraintFamily::Requirement, vec![("task", m + 1), ("capability", c + 1)], need - have);
            }
        }
        if let Some(cap) = instance.team_size_cap {
            let size: u32 = plan.teams[m].iter().sum();
            if size > cap {
                push(ConstraintFamily::TeamSize, vec![("task", m + 1)], f64::from(size - cap));
            }
        }
    }

    for (node, &v) in t.iter().enumerate() {
        let bad = if node == s { v.abs() } else { (-v).max(0.0) };
        if !v.is_finite() || bad > tol {
            push(
                ConstraintFamily::StartTime,
                vec![("node", node + 1)],
                if v.is_finite() { bad } else { f64::INFINITY },
            );
        }
    }

    for k in 0..nk {
        for (i, j) in instance.edges() {
            let r = if plan.edge_used[k][i][j] { 1.0 } else { 0.0 };
            let lhs = t[i] - t[j] + instance.edge_delay(k, i, j);
            let rhs = big_m * (1.0 - r);
            if lhs > rhs + tol {
                push(ConstraintFamily::Time, vec![("k", k + 1), ("i", i + 1), ("j", j + 1)], lhs - rhs);
            }
            let flow = x(k, i, j);
            let n_k = f64::from(instance.fleet[k]);
            if flow < r - tol || flow > n_k * r + tol {
                let gap = if flow < r { r - flow } else { flow - n_k * r };
                push(ConstraintFamily::Indicator, vec![("k", k + 1), ("i", i + 1), ("j", j + 1)], gap);
            }
        }

        let energy: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| instance.travel_energy[k][i][j] * x(k, i, j))
            .sum();
        if energy > instance.energy_limit[k] + tol {
            push(ConstraintFamily::Energy, vec![("k", k + 1)], energy - instance.energy_limit[k]);
        }

        for m in 0..nm {
            let inflow: f64 = (0..n).map(|i| x(k, i, m)).sum();
            let outflow: f64 = (0..n).map(|j| x(k, m, j)).sum();
            if (inflow - outflow).abs() > tol {
                push(ConstraintFamily::FlowConservation, vec![("k", k + 1), ("task", m + 1)], (inflow - outflow).abs());
            }
            let team = f64::from(plan.teams[m][k]);
            if (team - inflow).abs() > tol {
                push(ConstraintFamily::TeamFlow, vec![("k", k + 1), ("task", m + 1)], (team - inflow).abs());
            }
        }

        let departures: f64 = (0..nm).map(|m| x(k, s, m)).sum();
        if departures > f64::from(instance.fleet[k]) + tol {
            push(ConstraintFamily::Fleet, vec![("k", k + 1)], departures - f64::from(instance.fleet[k]));
        }
    }

    let objective = plan_objective(instance, plan);
    if (objective - plan.objective).abs() > tol * (1.0 + objective.abs()) {
        push(ConstraintFamily::Objective, Vec::new(), (objective - plan.objective).abs());
    }
    out
}

/// Best plan by exhaustive search over integral flows.
///
/// Exponential in the number of edges; meant as a reference on instances with
/// a couple of tasks and agents. Fails when the search space exceeds `limit`
/// flow combinations.
pub fn brute_force_allocation(instance: &AllocationInstance, limit: f64) -> Result<Option<AllocationPlan>> {
    instance.validate()?;
    let edges = instance.edges();
    let (nk, nm, n) = (instance.num_agent_types(), instance.num_tasks(), instance.num_nodes());
    let s = instance.start();
    let space: f64 = instance.fleet.iter().map(|&f| f64::from(f + 1).powi(edges.len() as i32)).product();
    if space > limit {
        return Err(Error::InvalidData(format!("brute force space of {space} flow combinations exceeds {limit}")));
    }

    // Per-type flows that satisfy conservation, fleet and energy on their own.
    let mut per_type: Vec<Vec<Vec<Vec<u32>>>> = Vec::with_capacity(nk);
    for k in 0..nk {
        let fleet = instance.fleet[k];
        let mut options = Vec::new();
        let mut counts = vec![0u32; edges.len()];
        loop {
            let mut grid = vec![vec![0u32; n]; n];
            for (e, &(i, j)) in edges.iter().enumerate() {
                grid[i][j] = counts[e];
            }
            let conserved = (0..nm).all(|m| {
                let inflow: u32 = (0..n).map(|i| grid[i][m]).sum();
                let outflow: u32 = grid[m].iter().sum();
                inflow == outflow
            });
            let departures: u32 = (0..nm).map(|m| grid[s][m]).sum();
            let energy: f64 = edges.iter().map(|&(i, j)| instance.travel_energy[k][i][j] * f64::from(grid[i][j])).sum();
            if conserved && departures <= fleet && energy <= instance.energy_limit[k] + 1e-9 {
                options.push(grid);
            }
            // Odometer increment over 0..=fleet per edge.
            let mut e = 0;
            while e < counts.len() && counts[e] == fleet {
                counts[e] = 0;
                e += 1;
            }
            if e == counts.len() {
                break;
            }
            counts[e] += 1;
        }
        per_type.push(options);
    }

    let mut best: Option<AllocationPlan> = None;
    let mut choice = vec![0usize; nk];
    if per_type.iter().any(|o| o.is_empty()) {
        return Ok(None);
    }
    loop {
        let flows: Vec<Vec<Vec<u32>>> = (0..nk).map(|k| per_type[k][choice[k]].clone()).collect();
        if let Some(plan) = plan_from_flows(instance, flows) {
            let feasible = validate_plan(instance, &plan).is_empty();
            if feasible && best.as_ref().is_none_or(|b| plan.objective < b.objective - 1e-12) {
                best = Some(plan);
            }
        }
        let mut k = 0;
        while k < nk && choice[k] + 1 == per_type[k].len() {
            choice[k] = 0;
            k += 1;
        }
        if k == nk {
            break;
        }
        choice[k] += 1;
    }
    Ok(best)
}
