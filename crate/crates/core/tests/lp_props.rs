use capalloc::lp::{solve_lp, solve_milp, LinearProgram, MixedIntegerProgram, Relation, Sense, SolveStatus};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Program {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
    upper: Vec<f64>,
}

fn program(max_vars: usize) -> impl Strategy<Value = Program> {
    (1..=max_vars, 1usize..5).prop_flat_map(|(n, m)| {
        let coef = || (-4i32..=4).prop_map(f64::from);
        let row = (
            prop::collection::vec(coef(), n),
            prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)],
            (-6i32..=10).prop_map(f64::from),
        );
        (
            prop_oneof![Just(Sense::Maximize), Just(Sense::Minimize)],
            prop::collection::vec(coef(), n),
            prop::collection::vec(row, m),
            prop::collection::vec((1i32..=3).prop_map(f64::from), n),
        )
            .prop_map(|(sense, objective, rows, upper)| Program { sense, objective, rows, upper })
    })
}

fn build(p: &Program) -> LinearProgram {
    let mut lp = LinearProgram::new(p.sense, p.objective.clone());
    for (coefs, rel, rhs) in &p.rows {
        lp.add_dense(coefs, *rel, *rhs);
    }
    for (j, &u) in p.upper.iter().enumerate() {
        lp.set_bounds(j, 0.0, u);
    }
    lp
}

fn enumerate(p: &Program) -> Option<f64> {
    let lp = build(p);
    let n = p.upper.len();
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    loop {
        if lp.max_violation(&x) <= 1e-9 {
            let v = lp.objective_value(&x);
            let better = match (best, p.sense) {
                (None, _) => true,
                (Some(b), Sense::Maximize) => v > b,
                (Some(b), Sense::Minimize) => v < b,
            };
            if better {
                best = Some(v);
            }
        }
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            x[j] += 1.0;
            if x[j] <= p.upper[j] {
                break;
            }
            x[j] = 0.0;
            j += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn optimal_lp_objective_matches_assignment(p in program(6)) {
        let lp = build(&p);
        let result = solve_lp(&lp);
        if result.status == SolveStatus::Optimal {
            let recomputed = lp.objective_value(&result.assignment);
            prop_assert!((recomputed - result.objective).abs() <= 1e-6 * (1.0 + result.objective.abs()));
            prop_assert!(lp.max_violation(&result.assignment) <= 1e-6);
        }
    }

    #[test]
    fn milp_matches_enumeration(p in program(6)) {
        let lp = build(&p);
        let n = lp.num_vars();
        let result = solve_milp(&MixedIntegerProgram::new(lp, (0..n).collect()));
        match enumerate(&p) {
            Some(best) => {
                prop_assert_eq!(result.status, SolveStatus::Optimal);
                prop_assert!((result.objective - best).abs() <= 1e-6, "{} vs {}", result.objective, best);
            }
            None => prop_assert_eq!(result.status, SolveStatus::Infeasible),
        }
    }

    #[test]
    fn solves_are_deterministic(p in program(5)) {
        let lp = build(&p);
        let n = lp.num_vars();
        let mip = MixedIntegerProgram::new(lp.clone(), (0..n).collect());
        // Debug text so NaN objectives of infeasible results compare equal.
        prop_assert_eq!(format!("{:?}", solve_lp(&lp)), format!("{:?}", solve_lp(&lp)));
        prop_assert_eq!(format!("{:?}", solve_milp(&mip)), format!("{:?}", solve_milp(&mip)));
    }
}

#[test]
fn symmetric_two_variable_program() {
    // max b: 2a1 >= b, 2a2 >= b, a1 + a2 = 1
    let mut lp = LinearProgram::new(Sense::Maximize, vec![0.0, 0.0, 1.0]);
    lp.add_dense(&[2.0, 0.0, -1.0], Relation::Ge, 0.0);
    lp.add_dense(&[0.0, 2.0, -1.0], Relation::Ge, 0.0);
    lp.add_dense(&[1.0, 1.0, 0.0], Relation::Eq, 1.0);
    let result = solve_lp(&lp);
    assert_eq!(result.status, SolveStatus::Optimal);
    assert!((result.objective - 1.0).abs() < 1e-9);
}

#[test]
fn integral_relaxation_needs_no_branching() {
    let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
    lp.add_dense(&[1.0, 0.0], Relation::Le, 2.0);
    lp.add_dense(&[0.0, 1.0], Relation::Le, 3.0);
    let relaxed = solve_lp(&lp);
    let mip = solve_milp(&MixedIntegerProgram::new(lp, vec![0, 1]));
    assert_eq!(mip.branchings, 0);
    assert_eq!(mip.objective, relaxed.objective);
}
