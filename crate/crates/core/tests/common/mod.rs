#![allow(dead_code)]

use capalloc::alloc::AllocationInstance;
use capalloc::model::{
    CapabilityMatrix, Model, RequirementSet, SparsityPattern, TaskId, TeamConfiguration, TrainingSample, TrainingSet,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Capabilities of the five robot types (columns) for perception, light
/// manipulation, heavy manipulation, perception 2 and light manipulation 2.
pub fn robot_capabilities() -> CapabilityMatrix {
    CapabilityMatrix::from_rows(vec![
        vec![1.0, 2.0, 1.0, 1.0, 2.0],
        vec![0.0, 0.0, 0.0, 2.0, 1.0],
        vec![0.0, 0.0, 0.0, 0.0, 1.0],
        vec![1.0, 1.0, 1.0, 1.0, 1.0],
        vec![0.0, 0.0, 0.0, 1.0, 1.0],
    ])
    .unwrap()
}

/// Explore, pick light, pick mixed, pick heavy, find and pick.
pub fn robot_requirements() -> RequirementSet {
    RequirementSet::from_rows(vec![
        vec![2.0, 0.0, 0.0, 0.0, 0.0],
        vec![0.0, 4.0, 0.0, 0.0, 0.0],
        vec![0.0, 3.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 3.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 2.0, 1.0],
    ])
    .unwrap()
}

pub fn robot_model() -> Model {
    let a = robot_capabilities();
    let b = robot_requirements();
    let sparsity = SparsityPattern::from_model(&a, &b).unwrap();
    Model::new(a, b, sparsity).unwrap()
}

/// Every team of at most four robots, labeled by whether it can do each task.
pub fn robot_training() -> TrainingSet {
    let truth = robot_model();
    let mut tasks = vec![Vec::new(); 5];
    for code in 0..5usize.pow(5) {
        let counts: Vec<u32> = (0..5).map(|k| ((code / 5usize.pow(k)) % 5) as u32).collect();
        let team = TeamConfiguration::new(counts);
        if team.total() > 4 {
            continue;
        }
        for (i, samples) in tasks.iter_mut().enumerate() {
            let valid = truth.classify(&team, TaskId(i)).unwrap();
            samples.push(TrainingSample {
                team: team.clone(),
                performance: f64::from(u8::from(valid)),
                is_valid: valid,
            });
        }
    }
    TrainingSet { num_agent_types: 5, tasks }
}

/// Five tasks in a 30 m square with the depot in a corner, four robots of
/// each type and at most four robots per task.
pub fn robot_instance(model: Model) -> AllocationInstance {
    let points = [(5.0, 25.0), (25.0, 25.0), (15.0, 15.0), (25.0, 5.0), (8.0, 10.0), (0.0, 0.0), (0.0, 0.0)];
    let speed = [0.6, 0.6, 1.0, 1.0, 0.8];
    let energy_rate = [0.5, 0.5, 1.0, 1.0, 1.5];
    let mut time = vec![vec![vec![0.0; 7]; 7]; 5];
    let mut energy = time.clone();
    for k in 0..5 {
        for i in 0..7 {
            for j in 0..7 {
                let d: f64 = f64::hypot(points[i].0 - points[j].0, points[i].1 - points[j].1);
                time[k][i][j] = (d / speed[k]).round();
                energy[k][i][j] = (d * energy_rate[k]).round();
            }
        }
    }
    AllocationInstance {
        model,
        travel_time: time,
        task_time: vec![vec![30.0, 40.0, 40.0, 50.0, 30.0]; 5],
        travel_energy: energy,
        energy_limit: vec![f64::INFINITY; 5],
        fleet: vec![4; 5],
        energy_weight: 1.0,
        time_weight: 1.0,
        big_m: None,
        team_size_cap: Some(4),
    }
}

/// Random instance with at most two tasks, two agent types and two agents
/// per type.
pub fn small_instance(seed: u64) -> AllocationInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nm = rng.gen_range(1..=2);
    let nk = rng.gen_range(1..=2);
    let nc = rng.gen_range(1..=2);
    let n = nm + 2;
    let a_rows: Vec<Vec<f64>> = (0..nc)
        .map(|_| {
            let mut row: Vec<f64> = (0..nk)
                .map(|_| if rng.gen_bool(0.75) { f64::from(rng.gen_range(1..=4)) * 0.25 } else { 0.0 })
                .collect();
            if row.iter().all(|v| *v == 0.0) {
                row[rng.gen_range(0..nk)] = 0.5;
            }
            row
        })
        .collect();
    let b_rows: Vec<Vec<f64>> = (0..nm)
        .map(|_| {
            (0..nc).map(|_| if rng.gen_bool(0.7) { f64::from(rng.gen_range(1..=6)) * 0.25 } else { 0.0 }).collect()
        })
        .collect();
    let a = CapabilityMatrix::from_rows(a_rows).unwrap();
    let b = RequirementSet::from_rows(b_rows).unwrap();
    let sparsity = SparsityPattern::from_model(&a, &b).unwrap();
    let grid = |rng: &mut ChaCha8Rng| -> Vec<Vec<Vec<f64>>> {
        (0..nk).map(|_| (0..n).map(|_| (0..n).map(|_| f64::from(rng.gen_range(1..=9))).collect()).collect()).collect()
    };
    let travel_time = grid(&mut rng);
    let travel_energy = grid(&mut rng);
    let task_time = (0..nk).map(|_| (0..nm).map(|_| f64::from(rng.gen_range(1..=5))).collect()).collect();
    let energy_limit =
        (0..nk).map(|_| if rng.gen_bool(0.3) { f64::from(rng.gen_range(10..=40)) } else { f64::INFINITY }).collect();
    let fleet = (0..nk).map(|_| rng.gen_range(1..=2)).collect();
    AllocationInstance {
        model: Model::new(a, b, sparsity).unwrap(),
        travel_time,
        task_time,
        travel_energy,
        energy_limit,
        fleet,
        energy_weight: f64::from(rng.gen_range(1..=4)) * 0.5,
        time_weight: f64::from(rng.gen_range(1..=4)) * 0.5,
        big_m: None,
        team_size_cap: if rng.gen_bool(0.25) { Some(rng.gen_range(1..=3)) } else { None },
    }
}

/// Random learner instance: sparsity pattern and positive samples drawn from
/// a random ground truth so every required task has a positive sample.
pub fn small_learning_problem(
    seed: u64,
    max_c: usize,
    max_k: usize,
    max_m: usize,
    max_pos: usize,
) -> (TrainingSet, SparsityPattern) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nc = rng.gen_range(1..=max_c);
    let nk = rng.gen_range(1..=max_k);
    let nm = rng.gen_range(1..=max_m);
    let mut a_pos = Vec::new();
    for c in 0..nc {
        let mut any = false;
        for k in 0..nk {
            if rng.gen_bool(0.7) {
                a_pos.push((capalloc::model::CapabilityId(c), capalloc::model::AgentTypeId(k)));
                any = true;
            }
        }
        if !any {
            a_pos.push((capalloc::model::CapabilityId(c), capalloc::model::AgentTypeId(rng.gen_range(0..nk))));
        }
    }
    let mut b_pos = Vec::new();
    for c in 0..nc {
        for i in 0..nm {
            if rng.gen_bool(0.6) {
                b_pos.push((capalloc::model::CapabilityId(c), TaskId(i)));
            }
        }
    }
    let sparsity = SparsityPattern::from_positive_sets(nc, nk, nm, &a_pos, &b_pos).unwrap();
    let tasks = (0..nm)
        .map(|_| {
            let count = rng.gen_range(1..=max_pos);
            (0..count)
                .map(|_| {
                    let mut counts: Vec<u32> = (0..nk).map(|_| rng.gen_range(0..=4)).collect();
                    if counts.iter().all(|&v| v == 0) {
                        counts[0] = 1;
                    }
                    let valid = rng.gen_bool(0.85);
                    TrainingSample { team: TeamConfiguration::new(counts), performance: 1.0, is_valid: valid }
                })
                .collect::<Vec<_>>()
        })
        .map(|mut samples| {
            samples[0].is_valid = true;
            samples
        })
        .collect();
    (TrainingSet { num_agent_types: nk, tasks }, sparsity)
}
