//! Running suites of seeded learner runs and sweeps over them.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::aggregate::{aggregate, AggregateReport, ExcludedRun};
use super::config::{Environment, ExperimentConfig, LearnerSpec};
use crate::error::{Error, Result};
use crate::game::JointMdp;
use crate::neural::{bql_neural_train, iql_neural_train, MdpTask, NeuralConfig, NeuralTask};
use crate::oracle::optimal_return;
use crate::record::RunRecord;
use crate::tabular::{
    bql_single_buffer_train, bql_tabular_train, hysteretic_iql_train, iql_train, jql_train, ma2ql_train,
};

/// Runs one learner once on one environment instance.
pub fn run_single(learner: &LearnerSpec, env: &Environment, neural_horizon: usize, seed: u64) -> Result<RunRecord> {
    match env {
        Environment::Game(mdp) => run_on_game(learner, mdp, neural_horizon, seed),
        Environment::Differential(task) => match learner {
            LearnerSpec::BqlNeural(c) => Ok(bql_neural_train(task, c, seed)?.record),
            LearnerSpec::IqlNeural(c) => Ok(iql_neural_train(task, c, seed)?.record),
            other => Err(Error::config(format!(
                "learner `{}` cannot run on the differential game",
                other.name()
            ))),
        },
    }
}

fn run_on_game(learner: &LearnerSpec, mdp: &JointMdp, neural_horizon: usize, seed: u64) -> Result<RunRecord> {
    let neural = |c: &NeuralConfig, bql: bool| -> Result<RunRecord> {
        let task = MdpTask::new(mdp.clone(), neural_horizon)?;
        Ok(train_neural(&task, c, seed, bql)?.record)
    };
    Ok(match learner {
        LearnerSpec::Bql(c) => bql_tabular_train(mdp, c, seed)?.record,
        LearnerSpec::BqlSingle(c) => bql_single_buffer_train(mdp, c, seed)?.record,
        LearnerSpec::Iql(c) => iql_train(mdp, c, seed)?.record,
        LearnerSpec::HystereticIql(c) => hysteretic_iql_train(mdp, c, seed)?.record,
        LearnerSpec::Ma2ql(c) => ma2ql_train(mdp, c, seed)?.record,
        LearnerSpec::Jql(c) => jql_train(mdp, c, seed)?.record,
        LearnerSpec::BqlNeural(c) => neural(c, true)?,
        LearnerSpec::IqlNeural(c) => neural(c, false)?,
    })
}

fn train_neural<T: NeuralTask>(task: &T, c: &NeuralConfig, seed: u64, bql: bool) -> Result<crate::neural::NeuralRun> {
    if bql {
        bql_neural_train(task, c, seed)
    } else {
        iql_neural_train(task, c, seed)
    }
}

enum Cell {
    Done(RunRecord),
    Excluded(ExcludedRun),
}

/// Runs every (game, seed) cell of the experiment. Runs whose oracle fails
/// are excluded and listed in the report; any other error aborts.
pub fn run_experiment_in_memory(config: &ExperimentConfig) -> Result<AggregateReport> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let envs: Vec<std::result::Result<Environment, String>> = (0..config.n_games)
        .map(|g| {
            let env = config.build_env(g)?;
            if let Environment::Game(mdp) = &env {
                if let Err(e @ Error::NotConverged { .. }) = optimal_return(mdp) {
                    return Ok(Err(e.to_string()));
                }
            }
            Ok(Ok(env))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..config.n_games)
        .flat_map(|g| (0..config.n_seeds).map(move |k| (g, k)))
        .collect();
    let results: Vec<Result<Cell>> = cells
        .par_iter()
        .map(|&(g, k)| {
            let seed = config.run_seed(g, k);
            let env = match &envs[g] {
                Ok(env) => env,
                Err(reason) => {
                    return Ok(Cell::Excluded(ExcludedRun {
                        game_id: g,
                        seed,
                        reason: reason.clone(),
                    }))
                }
            };
            match run_single(&config.learner, env, config.neural_horizon, seed) {
                Ok(mut record) => {
                    record.game_id = g;
                    record.fingerprint = fingerprint.clone();
                    Ok(Cell::Done(record))
                }
                Err(e @ Error::NotConverged { .. }) => Ok(Cell::Excluded(ExcludedRun {
                    game_id: g,
                    seed,
                    reason: e.to_string(),
                })),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut runs = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            Cell::Done(record) => runs.push(record),
            Cell::Excluded(x) => excluded.push(x),
        }
    }
    if runs.is_empty() {
        return Err(Error::NotConverged {
            what: "oracle for every game of the experiment",
            iterations: 0,
            residual: f64::NAN,
        });
    }
    aggregate(config.learner.name(), &fingerprint, runs, excluded)
}

/// Runs the experiment and writes `runs/*.csv`, `aggregate.csv`,
/// `excluded.csv` and `config.json` under `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateReport> {
    let report = run_experiment_in_memory(config)?;
    write_report(config, &report, Path::new(&config.output))?;
    Ok(report)
}

pub fn write_report(config: &ExperimentConfig, report: &AggregateReport, dir: &Path) -> Result<()> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir)?;
    for run in &report.runs {
        let path = runs_dir.join(format!("{}_g{}_s{}.csv", run.learner, run.game_id, run.seed));
        run.write_csv(fs::File::create(path)?)?;
    }
    report.write_csv(fs::File::create(dir.join("aggregate.csv"))?)?;
    report.write_excluded_csv(fs::File::create(dir.join("excluded.csv"))?)?;
    fs::write(dir.join("config.json"), config.to_json()? + "\n")?;
    Ok(())
}

/// Final scores of one sweep value.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: AggregateReport,
}

pub const SWEEP_CSV_HEADER: [&str; 6] = ["parameter", "value", "final_mean", "final_std", "n_runs", "n_excluded"];

/// Runs the experiment once per value of `parameter`, with the same games
/// and seeds for every value. Writes each value's outputs under
/// `<output>/<parameter>=<value>/` and a summary `sweep.csv`.
pub fn sweep(config: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    let points = sweep_in_memory(config, parameter, values)?;
    let dir = PathBuf::from(&config.output);
    fs::create_dir_all(&dir)?;
    for p in &points {
        let sub = config.with_parameter(parameter, p.value)?;
        write_report(&sub, &p.report, &dir.join(format!("{parameter}={}", p.value)))?;
    }
    write_sweep_csv(parameter, &points, fs::File::create(dir.join("sweep.csv"))?)?;
    Ok(points)
}

pub fn sweep_in_memory(config: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&value| {
            let sub = config.with_parameter(parameter, value)?;
            Ok(SweepPoint {
                value,
                report: run_experiment_in_memory(&sub)?,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(parameter: &str, points: &[SweepPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for p in points {
        w.write_record([
            parameter.to_string(),
            p.value.to_string(),
            p.report.final_mean().to_string(),
            p.report.final_std().to_string(),
            p.report.runs.len().to_string(),
            p.report.excluded.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
