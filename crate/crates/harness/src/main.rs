use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smallcell_harness::config::{distortion_for, DistortionName, ThresholdSpec};
use smallcell_harness::experiment::{self, thread_pool};
use smallcell_harness::validate::{run_battery, BatterySize};
use smallcell_harness::{io, ExperimentConfig, HarnessError};
use smallcell_core::cela::target_occupancy;
use smallcell_core::{associate_cela, associate_min_distortion, EvalConfig, Position};

#[derive(Parser, Debug)]
#[command(name = "smallcell", version, about = "Small-cell AP placement and Monte Carlo evaluation")]
struct Cli {
    /// Experiment config (JSON, schema v1).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials; overrides the config.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one placement algorithm and save the deployment.
    Place {
        /// Algorithm name from the config (default: the first one).
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// Evaluate a saved deployment and partition.
    Evaluate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        deployment: Option<PathBuf>,
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Associate a new user with a saved deployment; prints the decision.
    Associate {
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, allow_negative_numbers = true)]
        y: f64,
        #[arg(long, value_enum, default_value_t = Method::MinDistortion)]
        method: Method,
        #[arg(long, value_enum, default_value_t = DistortionArg::Mse)]
        distortion: DistortionArg,
        #[arg(long, default_value_t = smallcell_harness::config::DEFAULT_KAPPA)]
        kappa: f64,
        /// Threshold scale for `cela`.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Needed by the interference distortion.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        deployment: Option<PathBuf>,
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Write the updated partition (cela only).
        #[arg(long)]
        save_partition: Option<PathBuf>,
    },
    /// Regenerate a reference experiment.
    Reproduce {
        #[arg(value_enum)]
        preset: Preset,
    },
    /// Run the randomized invariant battery.
    Validate {
        /// Smaller instance counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Gmm1,
    Gmm2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    MinDistortion,
    Cela,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistortionArg {
    Mse,
    Interference,
    InterAp,
}

impl From<DistortionArg> for DistortionName {
    fn from(d: DistortionArg) -> Self {
        match d {
            DistortionArg::Mse => DistortionName::Mse,
            DistortionArg::Interference => DistortionName::Interference,
            DistortionArg::InterAp => DistortionName::InterAp,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
            ExperimentConfig::from_json(&text).map_err(|e| match e {
                HarnessError::Schema(msg) => HarnessError::Schema(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => ExperimentConfig::default(),
    };
    apply_overrides(cli, &mut config);
    config.validate()?;
    Ok(config)
}

fn apply_overrides(cli: &Cli, config: &mut ExperimentConfig) {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
}

fn out_dir(config: &ExperimentConfig, fallback: &str) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn in_dir(explicit: &Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| dir.join(name))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let pool = thread_pool()?;
    match &cli.command {
        Command::Place { algorithm } => {
            let config = load_config(&cli)?;
            let spec = match algorithm {
                None => config.algorithms[0].clone(),
                Some(name) => config
                    .algorithms
                    .iter()
                    .find(|a| &a.label() == name)
                    .cloned()
                    .ok_or_else(|| HarnessError::Schema(format!("no algorithm named {name:?} in the config")))?,
            };
            let dir = out_dir(&config, "out");
            let scenario = experiment::build_scenario(&config)?;
            let initial = smallcell_core::initial_deployment(&scenario, config.aps, config.seed)
                .map_err(HarnessError::stage("initial deployment"))?;
            let (placement, moves) = pool.install(|| experiment::place(&scenario, &initial, &config, &spec))?;
            fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
            io::write_scenario(&dir.join("scenario.json"), &scenario)?;
            io::write_placement(&dir, &placement, moves.as_deref())?;
            println!(
                "{}: {} iterations, occupancy {:?}, written to {}",
                spec.label(),
                placement.trace.len(),
                placement.partition.occupancy,
                dir.display()
            );
        }
        Command::Evaluate { scenario, deployment, partition } => {
            let config = load_config(&cli)?;
            let dir = out_dir(&config, "out");
            let sc = io::read_scenario(&in_dir(scenario, &dir, "scenario.json"))?;
            let dep = io::read_deployment(&in_dir(deployment, &dir, "deployment.json"))?;
            let part = io::read_partition(&in_dir(partition, &dir, "partition.json"))?;
            let eval = EvalConfig { trials: config.trials, seed: config.seed, max_interferers: config.max_interferers };
            let report = pool.install(|| experiment::evaluate(&sc, &dep, &part, eval))?;
            fs::create_dir_all(&dir).map_err(|source| HarnessError::Io { path: dir.clone(), source })?;
            let path = dir.join("metrics.json");
            io::write_metrics(&path, "evaluated", &report)?;
            println!(
                "95%-likely rate {:e}, access rate {:e}, access fraction {:e}; written to {}",
                report.p95.rate,
                report.p95.access_rate,
                report.p95.access_fraction,
                path.display()
            );
        }
        Command::Associate { x, y, method, distortion, kappa, alpha, scenario, deployment, partition, save_partition } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let dep = io::read_deployment(&in_dir(deployment, &dir, "deployment.json"))?;
            let mut part = io::read_partition(&in_dir(partition, &dir, "partition.json"))?;
            let p = Position::new(*x, *y);
            if !p.is_finite() {
                return Err(HarnessError::Schema("user coordinates must be finite".into()));
            }
            let decision = match method {
                Method::MinDistortion => {
                    let kind = distortion_for((*distortion).into(), *kappa);
                    let users = match (distortion, scenario) {
                        (DistortionArg::Interference, _) => {
                            io::read_scenario(&in_dir(scenario, &dir, "scenario.json"))?.users
                        }
                        _ => Vec::new(),
                    };
                    associate_min_distortion(p, &users, &dep, &part, &kind).map_err(HarnessError::stage("association"))?
                }
                Method::Cela => {
                    let policy = ThresholdSpec::default().policy(*alpha)?;
                    let target = target_occupancy(part.num_users() + 1, part.num_cells());
                    let d = associate_cela(p, &dep, &mut part, &policy, target).map_err(HarnessError::stage("association"))?;
                    if let Some(path) = save_partition {
                        io::write_json(path, &part)?;
                    }
                    d
                }
            };
            print_json(&decision);
        }
        Command::Reproduce { preset } => {
            let seed = cli.seed.unwrap_or(1);
            let (mut config, name) = match preset {
                Preset::Gmm1 => (ExperimentConfig::reproduce_gmm1(seed), "gmm1"),
                Preset::Gmm2 => (ExperimentConfig::reproduce_gmm2(seed), "gmm2"),
            };
            apply_overrides(&cli, &mut config);
            let dir = out_dir(&config, &format!("reproduce_{name}"));
            let report = pool.install(|| experiment::run_experiment(&config))?;
            io::write_bundle(&report, &dir)?;
            for run in &report.runs {
                println!(
                    "{:<16} p95 rate {:.6e}  access rate {:.6e}  access fraction {:.6e}  occupancy {:?}",
                    run.label, run.report.p95.rate, run.report.p95.access_rate, run.report.p95.access_fraction,
                    run.placement.partition.occupancy
                );
            }
            for row in &report.improvements {
                println!("{:<16} {:<16} {:+.2}%", row.algorithm, row.metric.as_str(), row.improvement_pct);
            }
            println!("written to {}", dir.display());
        }
        Command::Validate { quick } => {
            let seed = cli.seed.unwrap_or(1);
            let size = if *quick { BatterySize::QUICK } else { BatterySize::FULL };
            let results = pool.install(|| run_battery(size, seed));
            let mut failed = 0;
            for r in &results {
                println!("[{}] {} ({} instances): {}", if r.passed { "pass" } else { "FAIL" }, r.name, r.instances, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(HarnessError::Validation(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
