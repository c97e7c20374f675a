//! `capalloc` command-line tool.
//!
//! Exit codes: 0 success, 1 domain error (bad data, infeasible problem,
//! violations found by `validate`), 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use capalloc::alloc::{solve_allocation_with, validate_plan, AllocationOptions};
use capalloc::bench::{generate_data, run_case, stochastic_label_with, BenchOptions, CaseSpec, TrainingMode};
use capalloc::io::{
    read_instance, read_json, read_plan, read_sparsity, read_training, write_atomic, write_json, write_model,
    write_training, LearnReport, PlanFile, RawTrainingFile, SparsityFile,
};
use capalloc::learner::{learn, LearnerConfig};
use capalloc::lp::MilpOptions;
use capalloc::model::{TrainingSample, TrainingSet};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "capalloc", version, about = "Learn task requirements from team samples and allocate agents to tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Entire,
    Random,
}

impl From<Mode> for TrainingMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Entire => TrainingMode::Entire,
            Mode::Random => TrainingMode::Random,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate one benchmark realization: ground truth, labeled pools and training set.
    GenBench {
        /// Standard case 0-7, or `custom` together with --spec.
        #[arg(long)]
        case: String,
        /// Case description (JSON) for `--case custom`.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Realization index (0-based).
        #[arg(long, default_value_t = 0)]
        realization: usize,
        #[arg(long, value_enum, default_value = "entire")]
        mode: Mode,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn raw performance records into a labeled training file.
    Label {
        /// Raw records (JSON).
        #[arg(long)]
        training: PathBuf,
        /// Performance threshold; a sample is valid when its value is at most this.
        /// Per-task thresholds in the file take precedence.
        #[arg(long)]
        threshold: Option<f64>,
        /// Require repeated draws per sample and label by pass fraction.
        #[arg(long)]
        stochastic: bool,
        /// Fraction of draws that must meet the threshold.
        #[arg(long, default_value_t = 0.8)]
        pass_fraction: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a capability matrix and requirement thresholds.
    Learn {
        #[arg(long)]
        training: PathBuf,
        #[arg(long)]
        sparsity: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        alpha_a: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha_b: f64,
        /// Model output (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-capability report; defaults to learn_report.json next to --out.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the synthetic accuracy benchmark and write one CSV row per realization.
    Bench {
        /// Standard case 0-7, or `custom` together with --spec.
        #[arg(long)]
        case: String,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        mode: Mode,
        #[arg(long, default_value_t = 200)]
        train_cap: usize,
        #[arg(long, default_value_t = 10)]
        realizations: usize,
        /// Fraction of sparsity entries to flip before learning.
        #[arg(long, default_value_t = 0.0)]
        sparsity_error: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        alpha_a: f64,
        /// Write 0 in the train_seconds column so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Solve the allocation problem for an instance.
    Allocate {
        #[arg(long)]
        instance: PathBuf,
        /// Model file; defaults to the one named in the instance.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Declare flows integral up front.
        #[arg(long)]
        strict_integer: bool,
        #[arg(long, default_value_t = 1_000_000)]
        node_limit: usize,
    },
    /// Check a plan against an instance. Exits 0 iff there are no violations.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        plan: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

macro_rules! fail {
    ($($arg:tt)*) => {
        return Err(Failure::Domain(anyhow::anyhow!($($arg)*)))
    };
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<capalloc::Error> for Failure {
    fn from(e: capalloc::Error) -> Self {
        Failure::Domain(e.into())
    }
}

fn case_spec(case: &str, spec: Option<&Path>) -> Result<CaseSpec, Failure> {
    match (case, spec) {
        ("custom", Some(path)) => Ok(read_json(path)?),
        ("custom", None) => Err(Failure::Usage("--case custom needs --spec".into())),
        (n, None) => n
            .parse()
            .ok()
            .and_then(CaseSpec::standard)
            .ok_or_else(|| Failure::Usage(format!("unknown case `{n}`; expected 0-7 or custom"))),
        (_, Some(_)) => Err(Failure::Usage("--spec is only valid with --case custom".into())),
    }
}

fn labeled_set(
    num_agent_types: usize,
    pools: &[Vec<capalloc::model::TeamConfiguration>],
    labels: &[Vec<bool>],
) -> TrainingSet {
    let tasks = pools
        .iter()
        .zip(labels)
        .map(|(pool, labels)| {
            pool.iter()
                .zip(labels)
                .map(|(team, &valid)| TrainingSample {
                    team: team.clone(),
                    performance: f64::from(u8::from(valid)),
                    is_valid: valid,
                })
                .collect()
        })
        .collect();
    TrainingSet { num_agent_types, tasks }
}

fn gen_bench(
    case: &str,
    spec: Option<&Path>,
    seed: u64,
    realization: usize,
    mode: Mode,
    out: &Path,
) -> Result<(), Failure> {
    let spec = case_spec(case, spec)?.with_seed(seed);
    let data = generate_data(&spec, mode.into(), realization)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("case.json"), &spec)?;
    write_model(&out.join("ground_truth.json"), &data.ground_truth.model)?;
    write_json(&out.join("sparsity.json"), &SparsityFile::from_pattern(data.ground_truth.sparsity()))?;
    write_training(&out.join("pools.json"), &labeled_set(spec.num_agent_types, &data.pools, &data.labels))?;
    write_training(&out.join("training.json"), &data.training)?;
    println!(
        "wrote case {} realization {} ({} mode) to {}",
        spec.label,
        realization,
        TrainingMode::from(mode),
        out.display()
    );
    Ok(())
}

fn label(raw: &Path, threshold: Option<f64>, stochastic: bool, pass_fraction: f64, out: &Path) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&pass_fraction) {
        return Err(Failure::Usage(format!("--pass-fraction {pass_fraction} outside [0, 1]")));
    }
    let raw: RawTrainingFile = read_json(raw)?;
    let mut tasks = vec![Vec::new(); raw.tasks.iter().map(|t| t.task_id).max().unwrap_or(0)];
    for task in &raw.tasks {
        if task.task_id == 0 || !tasks[task.task_id - 1].is_empty() {
            fail!("task_id {} is zero or repeated", task.task_id);
        }
        let Some(limit) = task.threshold.or(threshold) else {
            fail!("task {} has no threshold and --threshold was not given", task.task_id);
        };
        for (n, sample) in task.samples.iter().enumerate() {
            if sample.team.num_agent_types() != raw.num_agent_types {
                fail!(
                    "task {} sample {}: team has {} entries, expected {}",
                    task.task_id,
                    n + 1,
                    sample.team.num_agent_types(),
                    raw.num_agent_types
                );
            }
            let (performance, valid) = match (&sample.draws, sample.performance) {
                (Some(draws), _) if !draws.is_empty() => {
                    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
                    (mean, stochastic_label_with(draws, limit, pass_fraction))
                }
                (_, Some(p)) if !stochastic => (p, p <= limit),
                _ if stochastic => fail!("task {} sample {}: --stochastic needs draws", task.task_id, n + 1),
                _ => fail!("task {} sample {}: no performance value", task.task_id, n + 1),
            };
            tasks[task.task_id - 1].push(TrainingSample { team: sample.team.clone(), performance, is_valid: valid });
        }
    }
    let set = TrainingSet { num_agent_types: raw.num_agent_types, tasks };
    write_training(out, &set)?;
    let valid: usize = set.tasks.iter().map(|t| t.iter().filter(|s| s.is_valid).count()).sum();
    let total: usize = set.tasks.iter().map(Vec::len).sum();
    println!("labeled {total} samples, {valid} valid");
    Ok(())
}

fn learn_cmd(
    training: &Path,
    sparsity: &Path,
    alpha_a: f64,
    alpha_b: f64,
    out: &Path,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let config = LearnerConfig { alpha_a, alpha_b, ..LearnerConfig::default() };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let training = read_training(training)?;
    let sparsity = read_sparsity(sparsity)?;
    let started = Instant::now();
    let learned = learn(&training, &sparsity, &config)?;
    let millis = started.elapsed().as_secs_f64() * 1e3;
    write_model(out, &learned.model)?;
    let report_path = match report {
        Some(p) => p.to_path_buf(),
        None => out.with_file_name("learn_report.json"),
    };
    write_json(&report_path, &LearnReport::new(&learned, alpha_a, alpha_b, millis))?;
    println!(
        "learned {} capabilities, objective {:.6}, {:.1} ms",
        learned.per_capability.len(),
        learned.total_objective(),
        millis
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench(
    case: &str,
    spec: Option<&Path>,
    mode: Mode,
    train_cap: usize,
    realizations: usize,
    sparsity_error: f64,
    seed: u64,
    alpha_a: f64,
    no_timing: bool,
    out: &Path,
) -> Result<(), Failure> {
    let mut spec = case_spec(case, spec)?.with_seed(seed).with_realizations(realizations);
    spec.random_train_cap = train_cap;
    let options = BenchOptions { learner: LearnerConfig::with_alpha_a(alpha_a), ..BenchOptions::default() };
    options.learner.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let report = run_case(&spec, mode.into(), sparsity_error, &options)?;
    write_atomic(out, report.to_csv(!no_timing).as_bytes())?;
    println!(
        "case {} {}: mean error {:.4} (false negatives {:.4}), mean training time {:.4} s, {} failed realizations",
        report.case,
        report.mode,
        report.mean_error(),
        report.mean_false_negative(),
        report.mean_train_seconds(),
        report.failures()
    );
    Ok(())
}

fn allocate(
    instance: &Path,
    model: Option<&Path>,
    out: &Path,
    strict_integer: bool,
    node_limit: usize,
) -> Result<(), Failure> {
    let instance = read_instance(instance, model)?;
    let options = AllocationOptions { strict_integer, milp: MilpOptions { node_limit, ..MilpOptions::default() } };
    match solve_allocation_with(&instance, &options) {
        Ok(solution) => {
            let file = PlanFile::from_plan(&instance, &solution.plan);
            write_json(out, &file)?;
            println!("objective {}, mission time {}", file.objective, file.mission_time);
            for route in &file.routes {
                println!("  type {} x{}: {}", route.agent_type, route.count, route.path);
            }
            Ok(())
        }
        Err(capalloc::Error::AllocationLimit { incumbent: Some(plan) }) => {
            write_json(out, &PlanFile::from_plan(&instance, &plan))?;
            Err(Failure::Domain(anyhow::anyhow!(
                "node limit reached; best plan found so far (objective {}) written to {} without an optimality proof",
                plan.objective,
                out.display()
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn validate(instance: &Path, model: Option<&Path>, plan: &Path) -> Result<(), Failure> {
    let instance = read_instance(instance, model)?;
    let plan = read_plan(plan)?;
    let violations = validate_plan(&instance, &plan);
    if violations.is_empty() {
        println!("plan is valid");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Domain(anyhow::anyhow!("{} violation(s)", violations.len())))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("CAPALLOC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("CAPALLOC_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Failure::Domain(e.into()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::GenBench { case, spec, seed, realization, mode, out } => {
            gen_bench(&case, spec.as_deref(), seed, realization, mode, &out)
        }
        Command::Label { training, threshold, stochastic, pass_fraction, out } => {
            label(&training, threshold, stochastic, pass_fraction, &out)
        }
        Command::Learn { training, sparsity, alpha_a, alpha_b, out, report } => {
            learn_cmd(&training, &sparsity, alpha_a, alpha_b, &out, report.as_deref())
        }
        Command::Bench { case, spec, mode, train_cap, realizations, sparsity_error, seed, alpha_a, no_timing, out } => {
            bench(&case, spec.as_deref(), mode, train_cap, realizations, sparsity_error, seed, alpha_a, no_timing, &out)
        }
        Command::Allocate { instance, model, out, strict_integer, node_limit } => {
            allocate(&instance, model.as_deref(), &out, strict_integer, node_limit)
        }
        Command::Validate { instance, model, plan } => validate(&instance, model.as_deref(), &plan),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
