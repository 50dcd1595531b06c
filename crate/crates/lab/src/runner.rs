//! Replication runner and output writer.
//!
//! Output directory layout:
//!
//! * `regret.csv`: `instance_id, algo, seed, t, des_regret, external_regret` at
//!   every checkpoint of every replication.
//! * `summary.json`: per `(instance, algo)` checkpoint statistics, flags and
//!   learner reports.
//! * `plans/<instance_id>.json`: the benchmark plan.
//! * `manifest.json`: the resolved config, its hash and the hash of every file
//!   above. It is accepted as a config by `bdes run`.
//! * `timings.json`: wall-clock times. The only file that differs between reruns.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bdes_core::evaluation::{aggregate, default_checkpoints, EvalError, RunSummary};
use bdes_core::planner::PlanMethod;
use bdes_core::{
    benchmark_opt, Instance, LearnerError, Plan, PlanError, PlannerConfig, RegretCurve, Trajectory,
    TrajectoryFlag,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algos::Algo;
use crate::config::{ConfigError, ExperimentConfig, SweepPoint};
use crate::seeds::{replication_seed, streams};

pub const CSV_HEADER: [&str; 6] = [
    "instance_id",
    "algo",
    "seed",
    "t",
    "des_regret",
    "external_regret",
];

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("benchmark for {instance_id}: {source}")]
    Plan {
        instance_id: String,
        source: PlanError,
    },

    #[error("{algo} on {instance_id} (seed {seed}): {source}")]
    Learner {
        instance_id: String,
        algo: String,
        seed: u64,
        source: LearnerError,
    },

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory; overrides the config's `output`.
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub replications: usize,
    /// Replications whose trajectory carries at least one flag.
    pub flagged: usize,
}

/// Rounds written to the CSV when the config sets no checkpoints: powers of
/// two, every hundredth of the horizon, and the horizon.
pub fn curve_points(horizon: usize) -> Vec<usize> {
    let step = horizon.div_ceil(100).max(1);
    let mut points = default_checkpoints(horizon);
    points.extend((step..=horizon).step_by(step));
    points.sort_unstable();
    points.dedup();
    points
}

pub fn planner_config(config: &ExperimentConfig) -> PlannerConfig {
    let mut planner = PlannerConfig {
        epsilon: config.benchmark_epsilon,
        ..PlannerConfig::default()
    };
    if let Some(cap) = config.exact_cap {
        planner.exact_cap = cap;
    }
    planner
}

/// Plays one replication and returns the trajectory and the learner's report.
pub fn simulate(
    algo: &Algo,
    instance: &Instance,
    benchmark: &Plan,
    seed: u64,
) -> Result<(Trajectory, serde_json::Value), LearnerError> {
    let mut learner = algo.build(Some(benchmark))?;
    let (env_rng, mut rng) = streams(seed);
    let trajectory = learner.run(instance, env_rng, &mut rng)?;
    Ok((trajectory, learner.report()))
}

#[derive(Debug, Clone, Serialize)]
struct RunRecord {
    seed: u64,
    flags: Vec<TrajectoryFlag>,
    report: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
struct GroupSummary {
    instance_id: String,
    algo: String,
    replications: usize,
    flagged: usize,
    summary: RunSummary,
    runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkInfo {
    pub instance_id: String,
    pub method: PlanMethod,
    pub expected_total: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    name: &'a str,
    benchmarks: Vec<BenchmarkInfo>,
    groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanFile {
    pub instance_id: String,
    pub instance: Instance,
    pub method: PlanMethod,
    pub expected_total: f64,
    pub sequence: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub bdes_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// SHA-256 of every output file except timings, by relative path.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Default, Serialize)]
struct Timings {
    total_seconds: f64,
    benchmarks: Vec<(String, f64)>,
    replications: Vec<(String, String, u64, f64)>,
}

struct Replication {
    algo: String,
    seed_index: u64,
    curve: RegretCurve,
    flags: Vec<TrajectoryFlag>,
    report: serde_json::Value,
    seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The config as recorded in the manifest: no output path, so the hash and
/// the outputs do not depend on where they were written.
fn canonical(config: &ExperimentConfig) -> ExperimentConfig {
    let mut c = config.clone();
    c.output = None;
    c
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let text = serde_json::to_string(&canonical(config)).expect("config serializes");
    sha256_hex(text.as_bytes())
}

/// Runs every `(instance, algo, seed)` replication and writes the outputs.
pub fn run_experiment(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let algos = config.parsed_algos()?;
    let points = config.sweep()?;
    let seeds = config.seeds.expand();
    let out = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;

    let started = Instant::now();
    let planner = planner_config(config);
    let benchmarks: Vec<(Plan, f64)> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let t0 = Instant::now();
                let plan = benchmark_opt(&p.instance.clone().without_noise(), &planner).map_err(
                    |source| RunError::Plan {
                        instance_id: p.id.clone(),
                        source,
                    },
                )?;
                Ok((plan, t0.elapsed().as_secs_f64()))
            })
            .collect::<Result<_, RunError>>()
    })?;

    let plans_dir = out.join("plans");
    fs::create_dir_all(&plans_dir).map_err(io_err(&plans_dir))?;
    let mut outputs = BTreeMap::new();
    let mut timings = Timings::default();
    let mut groups = Vec::new();
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(CSV_HEADER)?;
    let mut replications = 0;
    let mut flagged = 0;

    for (point, (plan, seconds)) in points.iter().zip(&benchmarks) {
        timings.benchmarks.push((point.id.clone(), *seconds));
        let plan_file = PlanFile {
            instance_id: point.id.clone(),
            instance: point.instance.clone(),
            method: plan.method,
            expected_total: plan.expected_total,
            sequence: plan.sequence.clone(),
        };
        let rel = format!("plans/{}.json", point.id);
        write_output(&out, &rel, &to_json(&plan_file), &mut outputs)?;

        let results = pool.install(|| run_point(config, &algos, point, plan, &seeds))?;
        let checkpoints = config
            .checkpoints
            .clone()
            .unwrap_or_else(|| curve_points(point.instance.horizon()));
        for (a, spec) in config.algos.iter().enumerate() {
            let label = spec.label();
            let group: Vec<&Replication> = results[a * seeds.len()..(a + 1) * seeds.len()]
                .iter()
                .collect();
            for rep in &group {
                for &t in &checkpoints {
                    csv.write_record([
                        point.id.clone(),
                        rep.algo.clone(),
                        rep.seed_index.to_string(),
                        t.to_string(),
                        rep.curve.des_regret[t - 1].to_string(),
                        rep.curve.external_regret[t - 1].to_string(),
                    ])?;
                }
                timings.replications.push((
                    point.id.clone(),
                    rep.algo.clone(),
                    rep.seed_index,
                    rep.seconds,
                ));
            }
            let curves: Vec<RegretCurve> = group.iter().map(|r| r.curve.clone()).collect();
            let summary = aggregate(&curves, Some(&checkpoints))?;
            let group_flagged = group.iter().filter(|r| !r.flags.is_empty()).count();
            replications += group.len();
            flagged += group_flagged;
            groups.push(GroupSummary {
                instance_id: point.id.clone(),
                algo: label.to_string(),
                replications: group.len(),
                flagged: group_flagged,
                summary,
                runs: group
                    .iter()
                    .map(|r| RunRecord {
                        seed: r.seed_index,
                        flags: r.flags.clone(),
                        report: r.report.clone(),
                    })
                    .collect(),
            });
        }
    }

    let csv_bytes = csv.into_inner().map_err(|e| RunError::Io {
        path: out.join("regret.csv"),
        source: e.into_error(),
    })?;
    write_output(&out, "regret.csv", &csv_bytes, &mut outputs)?;
    let summary = Summary {
        name: &config.name,
        benchmarks: points
            .iter()
            .zip(&benchmarks)
            .map(|(p, (plan, _))| BenchmarkInfo {
                instance_id: p.id.clone(),
                method: plan.method,
                expected_total: plan.expected_total,
            })
            .collect(),
        groups,
    };
    write_output(&out, "summary.json", &to_json(&summary), &mut outputs)?;

    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        bdes_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config),
        config: canonical(config),
        outputs,
    };
    let path = out.join("manifest.json");
    fs::write(&path, to_json(&manifest)).map_err(io_err(&path))?;

    timings.total_seconds = started.elapsed().as_secs_f64();
    let path = out.join("timings.json");
    fs::write(&path, to_json(&timings)).map_err(io_err(&path))?;

    Ok(RunOutcome {
        out,
        replications,
        flagged,
    })
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
    bytes.push(b'\n');
    bytes
}

fn write_output(
    out: &Path,
    rel: &str,
    bytes: &[u8],
    hashes: &mut BTreeMap<String, String>,
) -> Result<(), RunError> {
    let path = out.join(rel);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    hashes.insert(rel.to_string(), sha256_hex(bytes));
    Ok(())
}

/// All replications of one instance, ordered by `(algo, seed)`.
fn run_point(
    config: &ExperimentConfig,
    algos: &[Algo],
    point: &SweepPoint,
    plan: &Plan,
    seeds: &[(u64, u64)],
) -> Result<Vec<Replication>, RunError> {
    let jobs: Vec<(usize, (u64, u64))> = (0..algos.len())
        .flat_map(|a| seeds.iter().map(move |&s| (a, s)))
        .collect();
    jobs.par_iter()
        .map(|&(a, (base, index))| {
            let label = config.algos[a].label();
            let seed = replication_seed(base, &point.id, label, index);
            let t0 = Instant::now();
            let (trajectory, report) =
                simulate(&algos[a], &point.instance, plan, seed).map_err(|source| {
                    RunError::Learner {
                        instance_id: point.id.clone(),
                        algo: label.to_string(),
                        seed: index,
                        source,
                    }
                })?;
            let curve =
                RegretCurve::compute(&point.id, label, index, &trajectory, plan, &point.instance)?;
            Ok(Replication {
                algo: label.to_string(),
                seed_index: index,
                curve,
                flags: trajectory.flags,
                report,
                seconds: t0.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Checks `regret.csv` against the schema and returns the number of data rows.
pub fn validate_regret_csv(path: &Path) -> Result<usize, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(format!("unexpected header {header:?}"));
    }
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("row {}: bad {what}: {record:?}", line + 1);
        if record[0].is_empty() || record[1].is_empty() {
            return Err(bad("id"));
        }
        record[2].parse::<u64>().map_err(|_| bad("seed"))?;
        let t: usize = record[3].parse().map_err(|_| bad("t"))?;
        if t == 0 {
            return Err(bad("t"));
        }
        for col in 4..6 {
            let v: f64 = record[col].parse().map_err(|_| bad("regret"))?;
            if !v.is_finite() {
                return Err(bad("regret"));
            }
        }
        rows += 1;
    }
    Ok(rows)
}
