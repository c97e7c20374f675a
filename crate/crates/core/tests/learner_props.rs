mod common;

use capalloc::bench::{generate_data, prediction_error, CaseSpec, TrainingMode};
use capalloc::learner::{learn, learn_joint_reference, LearnerConfig};
use capalloc::model::{
    AgentTypeId, CapabilityId, SparsityPattern, TaskId, TeamConfiguration, TrainingSample, TrainingSet,
};
use proptest::prelude::*;

fn dot(row: &[f64], team: &TeamConfiguration) -> f64 {
    row.iter().zip(team.counts()).map(|(a, &n)| a * f64::from(n)).sum()
}

fn positives_only(teams: &[Vec<u32>], nk: usize) -> TrainingSet {
    let samples = teams
        .iter()
        .map(|t| TrainingSample { team: TeamConfiguration::new(t.clone()), performance: 1.0, is_valid: true })
        .collect();
    TrainingSet { num_agent_types: nk, tasks: vec![samples] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn training_positives_stay_valid(seed in any::<u64>(), alpha_a in prop_oneof![Just(0.0), Just(0.25), Just(1.0)]) {
        let (training, sparsity) = common::small_learning_problem(seed, 4, 4, 3, 20);
        let learned = learn(&training, &sparsity, &LearnerConfig::with_alpha_a(alpha_a)).unwrap();
        for (i, samples) in training.tasks.iter().enumerate() {
            for s in samples.iter().filter(|s| s.is_valid) {
                prop_assert!(learned.model.classify(&s.team, TaskId(i)).unwrap());
            }
        }
    }

    #[test]
    fn rows_are_normalized_and_sparse(seed in any::<u64>()) {
        let (training, sparsity) = common::small_learning_problem(seed, 4, 4, 3, 20);
        let learned = learn(&training, &sparsity, &LearnerConfig::default()).unwrap();
        for c in 0..sparsity.num_capabilities() {
            let row = learned.capabilities().row(CapabilityId(c));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            for (k, &v) in row.iter().enumerate() {
                if !sparsity.capability_is_positive(CapabilityId(c), AgentTypeId(k)) {
                    prop_assert_eq!(v, 0.0);
                }
            }
            for i in 0..sparsity.num_tasks() {
                if !sparsity.requirement_is_positive(CapabilityId(c), TaskId(i)) {
                    prop_assert_eq!(learned.requirements().get(CapabilityId(c), TaskId(i)), 0.0);
                }
            }
        }
    }

    #[test]
    fn thresholds_are_tight_without_penalty(seed in any::<u64>()) {
        let (training, sparsity) = common::small_learning_problem(seed, 4, 4, 3, 20);
        let learned = learn(&training, &sparsity, &LearnerConfig::with_alpha_a(0.0)).unwrap();
        for (c, i) in sparsity.positive_requirement_pairs() {
            let row = learned.capabilities().row(c);
            let b = learned.requirements().get(c, i);
            let gap = training.positives(i).map(|y| dot(row, y) - b).fold(f64::INFINITY, f64::min);
            prop_assert!(gap <= 1e-5, "gap {} at ({:?}, {:?})", gap, c, i);
        }
    }

    #[test]
    fn decomposition_matches_joint_program(seed in any::<u64>()) {
        let (training, sparsity) = common::small_learning_problem(seed, 4, 4, 3, 20);
        let config = LearnerConfig::with_alpha_a(0.0);
        let split = learn(&training, &sparsity, &config).unwrap();
        let joint = learn_joint_reference(&training, &sparsity, &config).unwrap();
        prop_assert!((split.total_objective() - joint.total_objective()).abs() <= 1e-6);
    }

    #[test]
    fn more_positives_never_raise_the_objective(seed in any::<u64>(), keep in 1usize..20) {
        let (training, sparsity) = common::small_learning_problem(seed, 4, 4, 3, 20);
        let subset = TrainingSet {
            num_agent_types: training.num_agent_types,
            tasks: training
                .tasks
                .iter()
                .map(|samples| {
                    let positives: Vec<_> = samples.iter().filter(|s| s.is_valid).cloned().collect();
                    positives[..keep.min(positives.len())].to_vec()
                })
                .collect(),
        };
        for alpha_a in [0.0, 0.25] {
            let config = LearnerConfig::with_alpha_a(alpha_a);
            let small = learn(&subset, &sparsity, &config).unwrap();
            let full = learn(&training, &sparsity, &config).unwrap();
            for (s, f) in small.per_capability.iter().zip(&full.per_capability) {
                prop_assert!(f.objective <= s.objective + 1e-6);
            }
        }
    }

    #[test]
    fn single_type_thresholds_shrink_with_more_positives(
        teams in prop::collection::vec(prop::collection::vec(0u32..6, 3), 2..12),
        keep in 1usize..12,
    ) {
        let pattern = SparsityPattern::from_positive_sets(
            1,
            3,
            1,
            &[(CapabilityId(0), AgentTypeId(1))],
            &[(CapabilityId(0), TaskId(0))],
        )
        .unwrap();
        let full = learn(&positives_only(&teams, 3), &pattern, &LearnerConfig::default()).unwrap();
        let small = learn(&positives_only(&teams[..keep.min(teams.len())], 3), &pattern, &LearnerConfig::default()).unwrap();
        let b_full = full.requirements().get(CapabilityId(0), TaskId(0));
        let b_small = small.requirements().get(CapabilityId(0), TaskId(0));
        prop_assert!(b_full <= b_small);
        prop_assert_eq!(b_full, f64::from(teams.iter().map(|t| t[1]).min().unwrap()));
    }
}

#[test]
fn symmetric_positives_split_evenly() {
    let training = positives_only(&[vec![2, 0], vec![0, 2]], 2);
    let pattern = SparsityPattern::dense(1, 2, 1);
    for learned in [
        learn(&training, &pattern, &LearnerConfig::default()).unwrap(),
        learn_joint_reference(&training, &pattern, &LearnerConfig::default()).unwrap(),
    ] {
        let row = learned.capabilities().row(CapabilityId(0));
        assert!((row[0] - 0.5).abs() < 1e-9 && (row[1] - 0.5).abs() < 1e-9);
        assert!((learned.requirements().get(CapabilityId(0), TaskId(0)) - 1.0).abs() < 1e-9);
        assert!(learned.model.classify(&TeamConfiguration::new(vec![1, 1]), TaskId(0)).unwrap());
    }
}

#[test]
fn lone_positive_puts_all_weight_on_its_type() {
    let training = positives_only(&[vec![1, 0]], 2);
    let learned = learn(&training, &SparsityPattern::dense(1, 2, 1), &LearnerConfig::default()).unwrap();
    let row = learned.capabilities().row(CapabilityId(0));
    assert!((row[0] - 1.0).abs() < 1e-9 && row[1].abs() < 1e-9);
    assert!((learned.requirements().get(CapabilityId(0), TaskId(0)) - 1.0).abs() < 1e-9);
}

#[test]
fn robot_tables_are_recovered_up_to_row_scale() {
    let truth = common::robot_model();
    let learned = learn(&common::robot_training(), &truth.sparsity, &LearnerConfig::default()).unwrap();
    for team in common::robot_training().tasks[0].iter().map(|s| &s.team) {
        for i in 0..5 {
            assert_eq!(learned.model.classify(team, TaskId(i)).unwrap(), truth.classify(team, TaskId(i)).unwrap());
        }
    }
}

#[test]
fn penalty_weight_barely_moves_the_error() {
    let spec = CaseSpec::standard(0).unwrap().with_seed(11);
    let data = generate_data(&spec, TrainingMode::Entire, 0).unwrap();
    let errors: Vec<f64> = [0.1, 0.25, 0.5]
        .iter()
        .map(|&alpha_a| {
            let learned =
                learn(&data.training, data.ground_truth.sparsity(), &LearnerConfig::with_alpha_a(alpha_a)).unwrap();
            prediction_error(&learned.model, &data.pools, &data.labels).unwrap().total()
        })
        .collect();
    let spread = errors.iter().cloned().fold(f64::MIN, f64::max) - errors.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 0.02, "errors {errors:?}");
}

#[test]
fn full_pool_training_has_no_false_negatives() {
    let spec = CaseSpec::standard(0).unwrap().with_seed(3);
    let data = generate_data(&spec, TrainingMode::Entire, 0).unwrap();
    for alpha_a in [0.0, 0.25] {
        let learned =
            learn(&data.training, data.ground_truth.sparsity(), &LearnerConfig::with_alpha_a(alpha_a)).unwrap();
        let error = prediction_error(&learned.model, &data.pools, &data.labels).unwrap();
        assert_eq!(error.false_negative, 0.0);
    }
}
