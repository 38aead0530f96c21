use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bql_core::harness::{
    merge_json, report, run_experiment, run_single, sweep, Environment, ExperimentConfig,
};
use bql_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bql", version, about = "Decentralized cooperative Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON). Merged over the preset when both are given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file for gen-game); overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Write game 0 of the configured suite as JSON.
    GenGame {
        #[command(flatten)]
        common: Common,
        /// Game index within the suite.
        #[arg(long, default_value_t = 0)]
        game: usize,
    },
    /// One run of the configured learner on one game.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        game: usize,
    },
    /// All (game, seed) runs of the configured suite.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the experiment for each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of lambda, buffer_capacity, subset_fraction, alpha, eps_tol.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Merge run CSVs (files, or directories of them) into mean ± std.
    Report {
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut doc = match common.preset {
        Some(Preset::Desk) => serde_json::to_value(ExperimentConfig::preset("desk")?)?,
        Some(Preset::Paper) => serde_json::to_value(ExperimentConfig::preset("paper")?)?,
        None => serde_json::Value::Null,
    };
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let patch: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if doc.is_null() {
            doc = patch;
        } else {
            if let Some(name) = patch.get("learner").and_then(|l| l.get("name")) {
                // A different learner replaces the preset's hyperparameters wholesale.
                if doc["learner"].get("name") != Some(name) {
                    doc["learner"] = serde_json::json!({});
                }
            }
            merge_json(&mut doc, patch);
        }
    }
    if doc.is_null() {
        return Err(Error::Config("either --config or --preset is required".into()));
    }
    let mut config = ExperimentConfig::from_value(doc)?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &common.out {
        config.output = out.display().to_string();
    }
    if let Some(n) = common.parallelism {
        if n == 0 {
            return Err(Error::Config("--parallelism must be positive".into()));
        }
        // Only fails if a global pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(config)
}

fn run_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let dir = if p.join("runs").is_dir() { p.join("runs") } else { p.clone() };
            let mut found: Vec<PathBuf> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::GenGame { common, game } => {
            let config = load_config(&common)?;
            let Environment::Game(mdp) = config.build_env(game)? else {
                return Err(Error::Config("gen-game needs a tabular game environment".into()));
            };
            let json = mdp.to_json()?;
            match &common.out {
                Some(path) => fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Train { common, game } => {
            let config = load_config(&common)?;
            if game >= config.n_games {
                return Err(Error::Config(format!("game {game} outside 0..{}", config.n_games)));
            }
            let env = config.build_env(game)?;
            let seed = config.run_seed(game, 0);
            let mut record = run_single(&config.learner, &env, config.neural_horizon, seed)?;
            record.game_id = game;
            record.fingerprint = config.fingerprint()?;
            let dir = Path::new(&config.output);
            fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}_g{game}_s{seed}.csv", record.learner));
            record.write_csv(fs::File::create(&path)?)?;
            let last = record.last().expect("runs record at least one evaluation");
            println!(
                "{} game {game}: return {:.4}, normalized {:.4} -> {}",
                record.learner,
                last.ret,
                last.normalized_return,
                path.display()
            );
        }
        Command::Experiment { common } => {
            let config = load_config(&common)?;
            let report = run_experiment(&config)?;
            for x in &report.excluded {
                eprintln!("warning: excluded game {} seed {}: {}", x.game_id, x.seed, x.reason);
            }
            println!("{}", report.summary());
            println!("wrote {}", config.output);
        }
        Command::Sweep { common, param, values } => {
            let config = load_config(&common)?;
            let points = sweep(&config, &param, &values)?;
            for p in &points {
                println!("{param}={}: {}", p.value, p.report.summary());
            }
            println!("wrote {}/sweep.csv", config.output);
        }
        Command::Report { paths, out } => {
            let files = run_files(&paths)?;
            let table = report(&files)?;
            print!("{}", table.to_text());
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                table.write_csv(fs::File::create(dir.join("report.csv"))?)?;
                fs::write(dir.join("report.txt"), table.to_text())?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Json(_) => 2,
        Error::NotConverged { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
