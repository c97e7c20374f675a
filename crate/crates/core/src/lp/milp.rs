//! Best-bound branch and bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_lp_with, SimplexOptions};
use super::{LinearProgram, MixedIntegerProgram, Sense, SolveResult, SolveStatus};

#[derive(Debug, Clone, Copy)]
pub struct MilpOptions {
    /// Maximum number of LP relaxations solved.
    pub node_limit: usize,
    /// Distance to the nearest integer accepted as integral.
    pub integrality_tolerance: f64,
    /// A node is pruned when its bound is within this (relative) gap of the incumbent.
    pub relative_gap: f64,
    /// Every this many nodes (and at the root) the integer variables are
    /// rounded up and the remaining LP solved to look for an incumbent.
    /// Zero disables the heuristic.
    pub rounding_interval: usize,
    pub simplex: SimplexOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            node_limit: 1_000_000,
            integrality_tolerance: 1e-6,
            relative_gap: 1e-9,
            rounding_interval: 20,
            simplex: SimplexOptions::default(),
        }
    }
}

pub fn solve_milp(mip: &MixedIntegerProgram) -> SolveResult {
    solve_milp_with(mip, &MilpOptions::default())
}

struct Node {
    /// Relaxation bound in minimization form.
    bound: f64,
    seq: usize,
    bounds: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then the most recent node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.seq.cmp(&other.seq))
    }
}

/// Solves `mip` by best-bound branch and bound, branching on the most
/// fractional integer variable (lowest index on ties). Until the first
/// integral solution is found the search is depth-first, visiting first the
/// child on the side the fractional value rounds to.
///
/// When the node limit is reached the best incumbent is returned with status
/// [`SolveStatus::IterationLimit`]; its assignment is empty if none was found.
pub fn solve_milp_with(mip: &MixedIntegerProgram, options: &MilpOptions) -> SolveResult {
    let sign = match mip.lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let tol = options.integrality_tolerance;
    let mut root_bounds = mip.lp.bounds.clone();
    for &j in &mip.integer_vars {
        let (lo, hi) = root_bounds[j];
        root_bounds[j] = (round_up(lo, tol), round_down(hi, tol));
        if root_bounds[j].0 > root_bounds[j].1 {
            return SolveResult::without_solution(SolveStatus::Infeasible, 0);
        }
    }

    let mut relaxation: LinearProgram = mip.lp.clone();
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, bounds: root_bounds });

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut pivots = 0usize;
    let mut branchings = 0usize;
    let mut solved = 0usize;
    let mut hit_limit = false;

    // Until the first incumbent appears the search runs depth-first.
    let mut stack: Vec<Node> = Vec::new();
    while let Some(node) = stack.pop().or_else(|| heap.pop()) {
        if let Some((best, _)) = &incumbent {
            if prunable(node.bound, *best, options.relative_gap) {
                continue;
            }
        }
        if solved >= options.node_limit {
            hit_limit = true;
            break;
        }
        solved += 1;
        relaxation.bounds = node.bounds;
        let result = solve_lp_with(&relaxation, &options.simplex);
        pivots += result.pivots;
        match result.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                if solved == 1 {
                    return SolveResult {
                        branchings,
                        pivots,
                        ..SolveResult::without_solution(SolveStatus::Unbounded, 0)
                    };
                }
                continue;
            }
            SolveStatus::IterationLimit => {
                hit_limit = true;
                continue;
            }
        }
        let value = sign * result.objective;
        if let Some((best, _)) = &incumbent {
            if prunable(value, *best, options.relative_gap) {
                continue;
            }
        }
        match most_fractional(&result.assignment, &mip.integer_vars, tol) {
            None => {
                let mut x = result.assignment;
                for &j in &mip.integer_vars {
                    x[j] = x[j].round();
                }
                let value = sign * mip.lp.objective_value(&x);
                if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    incumbent = Some((value, x));
                    heap.extend(stack.drain(..));
                }
            }
            Some(j) => {
                let interval = options.rounding_interval;
                if interval > 0 && (solved == 1 || solved.is_multiple_of(interval)) {
                    let mut fixed = relaxation.bounds.clone();
                    for &k in &mip.integer_vars {
                        let v = round_up(result.assignment[k], tol).min(fixed[k].1);
                        fixed[k] = (v, v);
                    }
                    let saved = std::mem::replace(&mut relaxation.bounds, fixed);
                    let rounded = solve_lp_with(&relaxation, &options.simplex);
                    relaxation.bounds = saved;
                    pivots += rounded.pivots;
                    if rounded.is_optimal() {
                        let value = sign * rounded.objective;
                        if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                            incumbent = Some((value, rounded.assignment));
                            heap.extend(stack.drain(..));
                        }
                    }
                }
                branchings += 1;
                let v = result.assignment[j];
                let parent = &relaxation.bounds;
                let mut down = parent.clone();
                down[j].1 = v.floor();
                let mut up = parent.clone();
                up[j].0 = v.ceil();
                seq += 1;
                let down = Node { bound: value, seq, bounds: down };
                seq += 1;
                let up = Node { bound: value, seq, bounds: up };
                if incumbent.is_none() {
                    let (near, far) = if v - v.floor() >= 0.5 { (up, down) } else { (down, up) };
                    stack.push(far);
                    stack.push(near);
                } else {
                    heap.push(down);
                    heap.push(up);
                }
            }
        }
    }

    let status = if hit_limit { SolveStatus::IterationLimit } else { SolveStatus::Optimal };
    match incumbent {
        Some((value, x)) => SolveResult { status, objective: sign * value, assignment: x, pivots, branchings },
        None if hit_limit => {
            SolveResult { branchings, ..SolveResult::without_solution(SolveStatus::IterationLimit, pivots) }
        }
        None => SolveResult { branchings, ..SolveResult::without_solution(SolveStatus::Infeasible, pivots) },
    }
}

fn prunable(bound: f64, incumbent: f64, gap: f64) -> bool {
    bound >= incumbent - gap * (1.0 + incumbent.abs())
}

fn round_up(v: f64, tol: f64) -> f64 {
    if v.is_finite() {
        (v - tol).ceil()
    } else {
        v
    }
}

fn round_down(v: f64, tol: f64) -> f64 {
    if v.is_finite() {
        (v + tol).floor()
    } else {
        v
    }
}

fn most_fractional(x: &[f64], integer_vars: &[usize], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &j in integer_vars {
        let frac = x[j] - x[j].floor();
        let distance = frac.min(1.0 - frac);
        if distance <= tol {
            continue;
        }
        if best.is_none_or(|(_, d)| distance > d) {
            best = Some((j, distance));
        }
    }
    best.map(|(j, _)| j)
}
