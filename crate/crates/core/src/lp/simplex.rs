//! Dense two-phase tableau simplex.

use super::{LinearProgram, Relation, Sense, SolveResult, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variable. Never cycles.
    Bland,
    /// Most negative reduced cost; falls back to Bland after a run of
    /// degenerate pivots.
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Pivot cap; `None` means `10_000 × number of variables`.
    pub max_pivots: Option<usize>,
    pub pivot_rule: PivotRule,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_pivots: None, pivot_rule: PivotRule::Bland }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> SolveResult {
    solve_lp_with(lp, &SimplexOptions::default())
}

/// Solves `lp`.
///
/// # Panics
///
/// Panics if the program is malformed (see [`LinearProgram::validate`]).
pub fn solve_lp_with(lp: &LinearProgram, options: &SimplexOptions) -> SolveResult {
    if let Err(msg) = lp.validate() {
        panic!("malformed linear program: {msg}");
    }
    let max_pivots = options.max_pivots.unwrap_or(10_000 * lp.num_vars().max(1));
    let standard = match StandardForm::build(lp) {
        Some(s) => s,
        None => return SolveResult::without_solution(SolveStatus::Infeasible, 0),
    };
    let mut tableau = Tableau::new(&standard);
    let outcome = tableau.run(max_pivots, options.pivot_rule);
    let pivots = tableau.pivots;
    match outcome {
        Outcome::Optimal => {
            let columns = tableau.column_values();
            let assignment = standard.recover(lp, &columns);
            let objective = standard.objective_constant + tableau.objective_value();
            let objective = match lp.sense {
                Sense::Minimize => objective,
                Sense::Maximize => -objective,
            };
            SolveResult { status: SolveStatus::Optimal, objective, assignment, pivots, branchings: 0 }
        }
        Outcome::Infeasible => SolveResult::without_solution(SolveStatus::Infeasible, pivots),
        Outcome::Unbounded => SolveResult::without_solution(SolveStatus::Unbounded, pivots),
        Outcome::Limit => SolveResult::without_solution(SolveStatus::IterationLimit, pivots),
    }
}

/// How an original variable is expressed in nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    Fixed(f64),
    /// `x = offset + col`
    Shifted {
        col: usize,
        offset: f64,
    },
    /// `x = offset − col`
    Mirrored {
        col: usize,
        offset: f64,
    },
    /// `x = pos − neg`
    Split {
        pos: usize,
        neg: usize,
    },
}

struct Row {
    terms: Vec<(usize, f64)>,
    /// `true` for `≤`, `false` for `≥`; rhs is nonnegative after normalization.
    le: bool,
    rhs: f64,
}

/// `min c·z, rows, z ≥ 0`.
struct StandardForm {
    maps: Vec<VarMap>,
    num_cols: usize,
    cost: Vec<f64>,
    objective_constant: f64,
    rows: Vec<Row>,
}

impl StandardForm {
    /// `None` when a constant row is violated.
    fn build(lp: &LinearProgram) -> Option<Self> {
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut num_cols = 0;
        let mut upper_rows = Vec::new();
        for &(lo, hi) in &lp.bounds {
            let map = if lo == hi {
                VarMap::Fixed(lo)
            } else if lo.is_finite() {
                let col = num_cols;
                num_cols += 1;
                if hi.is_finite() {
                    upper_rows.push((col, hi - lo));
                }
                VarMap::Shifted { col, offset: lo }
            } else if hi.is_finite() {
                let col = num_cols;
                num_cols += 1;
                VarMap::Mirrored { col, offset: hi }
            } else {
                let pos = num_cols;
                num_cols += 2;
                VarMap::Split { pos, neg: pos + 1 }
            };
            maps.push(map);
        }

        let mut cost = vec![0.0; num_cols];
        let mut objective_constant = 0.0;
        for (j, &c) in lp.objective.iter().enumerate() {
            let c = sign * c;
            match maps[j] {
                VarMap::Fixed(v) => objective_constant += c * v,
                VarMap::Shifted { col, offset } => {
                    cost[col] += c;
                    objective_constant += c * offset;
                }
                VarMap::Mirrored { col, offset } => {
                    cost[col] -= c;
                    objective_constant += c * offset;
                }
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut rows = Vec::with_capacity(lp.constraints.len() + upper_rows.len());
        let mut dense = vec![0.0; num_cols];
        let mut touched: Vec<usize> = Vec::new();
        for constraint in &lp.constraints {
            let mut rhs = constraint.rhs;
            for &(j, a) in &constraint.terms {
                let mut add = |col: usize, v: f64| {
                    if dense[col] == 0.0 {
                        touched.push(col);
                    }
                    dense[col] += v;
                };
                match maps[j] {
                    VarMap::Fixed(v) => rhs -= a * v,
                    VarMap::Shifted { col, offset } => {
                        add(col, a);
                        rhs -= a * offset;
                    }
                    VarMap::Mirrored { col, offset } => {
                        add(col, -a);
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        add(pos, a);
                        add(neg, -a);
                    }
                }
            }
            touched.sort_unstable();
            touched.dedup();
            let terms: Vec<(usize, f64)> = touched.iter().map(|&c| (c, dense[c])).filter(|(_, v)| *v != 0.0).collect();
            for &c in &touched {
                dense[c] = 0.0;
            }
            touched.clear();

            if terms.is_empty() {
                let ok = match constraint.relation {
                    Relation::Le => 0.0 <= rhs + 1e-9,
                    Relation::Ge => 0.0 >= rhs - 1e-9,
                    Relation::Eq => rhs.abs() <= 1e-9,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            // Equalities become a pair of opposing inequalities.
            match constraint.relation {
                Relation::Le => rows.push(Row { terms, le: true, rhs }),
                Relation::Ge => rows.push(Row { terms, le: false, rhs }),
                Relation::Eq => {
                    rows.push(Row { terms: terms.clone(), le: true, rhs });
                    rows.push(Row { terms, le: false, rhs });
                }
            }
        }
        for (col, width) in upper_rows {
            rows.push(Row { terms: vec![(col, 1.0)], le: true, rhs: width });
        }
        for row in &mut rows {
            // `≥ 0` rows are flipped too so the slack can start in the basis.
            if row.rhs < 0.0 || (row.rhs == 0.0 && !row.le) {
                row.rhs = -row.rhs;
                row.le = !row.le;
                for t in &mut row.terms {
                    t.1 = -t.1;
                }
            }
        }
        Some(Self { maps, num_cols, cost, objective_constant, rows })
    }

    fn recover(&self, lp: &LinearProgram, columns: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .zip(&lp.bounds)
            .map(|(map, &(lo, hi))| {
                let v = match *map {
                    VarMap::Fixed(v) => v,
                    VarMap::Shifted { col, offset } => offset + columns[col],
                    VarMap::Mirrored { col, offset } => offset - columns[col],
                    VarMap::Split { pos, neg } => columns[pos] - columns[neg],
                };
                v.clamp(lo, hi)
            })
            .collect()
    }
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    Limit,
}

struct Tableau {
    /// Row-major `m × width`; last column is the right-hand side.
    data: Vec<f64>,
    width: usize,
    m: usize,
    basis: Vec<usize>,
    /// Phase-2 reduced costs (last entry holds `−z`).
    cost_row: Vec<f64>,
    /// Phase-1 reduced costs.
    aux_row: Vec<f64>,
    num_structural: usize,
    first_artificial: usize,
    /// Rows whose artificial could not be pivoted out (linearly dependent).
    dead: Vec<bool>,
    rhs_scale: f64,
    pivots: usize,
    scratch: Vec<usize>,
}

impl Tableau {
    fn new(sf: &StandardForm) -> Self {
        let m = sf.rows.len();
        let n = sf.num_cols;
        let num_artificial = sf.rows.iter().filter(|r| !r.le).count();
        let first_artificial = n + m;
        let width = n + m + num_artificial + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut next_artificial = first_artificial;
        let mut aux_row = vec![0.0; width];
        let mut rhs_scale: f64 = 1.0;
        for (i, row) in sf.rows.iter().enumerate() {
            let base = i * width;
            for &(c, a) in &row.terms {
                data[base + c] = a;
            }
            data[base + width - 1] = row.rhs;
            rhs_scale = rhs_scale.max(row.rhs.abs());
            if row.le {
                data[base + n + i] = 1.0;
                basis[i] = n + i;
            } else {
                data[base + n + i] = -1.0;
                data[base + next_artificial] = 1.0;
                basis[i] = next_artificial;
                next_artificial += 1;
                for (d, v) in aux_row.iter_mut().zip(&data[base..base + width]) {
                    *d -= v;
                }
                aux_row[basis[i]] = 0.0;
            }
        }
        let mut cost_row = vec![0.0; width];
        cost_row[..n].copy_from_slice(&sf.cost);
        Self {
            data,
            width,
            m,
            basis,
            cost_row,
            aux_row,
            num_structural: n,
            first_artificial,
            dead: vec![false; m],
            rhs_scale,
            pivots: 0,
            scratch: Vec::new(),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn run(&mut self, max_pivots: usize, rule: PivotRule) -> Outcome {
        let has_artificials = self.first_artificial < self.width - 1;
        if has_artificials {
            match self.optimize(true, max_pivots, rule) {
                Outcome::Optimal => {}
                Outcome::Unbounded => unreachable!("phase one is bounded below by zero"),
                other => return other,
            }
            let infeasibility = -self.aux_row[self.width - 1];
            if infeasibility > 1e-7 * self.rhs_scale {
                return Outcome::Infeasible;
            }
            self.drive_out_artificials();
        }
        self.optimize(false, max_pivots, rule)
    }

    fn optimize(&mut self, phase_one: bool, max_pivots: usize, rule: PivotRule) -> Outcome {
        let limit = if phase_one { self.width - 1 } else { self.first_artificial };
        let mut degenerate_run = 0usize;
        loop {
            let use_bland = rule == PivotRule::Bland || degenerate_run > 50;
            let row = if phase_one { &self.aux_row } else { &self.cost_row };
            let entering = if use_bland {
                (0..limit).find(|&j| row[j] < -COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (j, &d) in row[..limit].iter().enumerate() {
                    if d < -COST_TOL && best.is_none_or(|(_, b)| d < b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(entering) = entering else {
                return Outcome::Optimal;
            };
            let Some(leaving) = self.ratio_test(entering) else {
                return Outcome::Unbounded;
            };
            if self.pivots >= max_pivots {
                return Outcome::Limit;
            }
            if self.rhs(leaving).abs() <= PIVOT_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(leaving, entering);
        }
    }

    /// Minimum-ratio row, ties broken by smallest basic column index.
    fn ratio_test(&self, entering: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if self.dead[i] {
                continue;
            }
            let a = self.at(i, entering);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs(i).max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    if ratio < br - RATIO_TIE * (1.0 + br.abs())
                        || (ratio <= br + RATIO_TIE * (1.0 + br.abs()) && self.basis[i] < self.basis[bi])
                    {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        self.pivots += 1;
        let w = self.width;
        let base = r * w;
        let inv = 1.0 / self.data[base + j];
        self.scratch.clear();
        for c in 0..w {
            let v = self.data[base + c];
            if v != 0.0 {
                self.data[base + c] = v * inv;
                self.scratch.push(c);
            }
        }
        self.data[base + j] = 1.0;
        let nonzero = std::mem::take(&mut self.scratch);
        let (before, rest) = self.data.split_at_mut(base);
        let (pivot_row, after) = rest.split_at_mut(w);
        let eliminate = |target: &mut [f64]| {
            let f = target[j];
            if f != 0.0 {
                for &c in &nonzero {
                    target[c] -= f * pivot_row[c];
                }
                target[j] = 0.0;
            }
        };
        for chunk in before.chunks_exact_mut(w) {
            eliminate(chunk);
        }
        for chunk in after.chunks_exact_mut(w) {
            eliminate(chunk);
        }
        eliminate(&mut self.cost_row);
        eliminate(&mut self.aux_row);
        self.scratch = nonzero;
        self.basis[r] = j;
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.first_artificial {
                continue;
            }
            let candidate = (0..self.first_artificial).find(|&j| self.at(i, j).abs() > PIVOT_TOL);
            match candidate {
                Some(j) => self.pivot(i, j),
                None => self.dead[i] = true,
            }
        }
    }

    fn column_values(&self) -> Vec<f64> {
        let mut values = vec![0.0; self.num_structural];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.num_structural && !self.dead[i] {
                values[b] = self.rhs(i).max(0.0);
            }
        }
        values
    }

    /// Current value of `c·z`.
    fn objective_value(&self) -> f64 {
        -self.cost_row[self.width - 1]
    }
}
