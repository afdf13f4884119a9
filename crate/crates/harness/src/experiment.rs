//! One scenario, one shared initial deployment, every configured algorithm.

use rayon::prelude::*;
use serde::Serialize;
use smallcell_core::metrics::{self, Evaluator, RateAccumulator};
use smallcell_core::{
    initial_deployment, run_cela_alpha, run_interap_lloyd, run_interference_lloyd, run_lloyd, Deployment,
    DistortionKind, EvalConfig, MetricReport, Partition, Placement, Scenario, UreMove,
};

use crate::config::{distortion_for, AlgorithmSpec, ExperimentConfig, MetricName};
use crate::error::HarnessError;

/// Worker-count cap read from the environment.
pub const THREADS_ENV: &str = "SMALLCELL_THREADS";

#[derive(Clone, Debug)]
pub struct AlgorithmRun {
    pub label: String,
    pub spec: AlgorithmSpec,
    pub placement: Placement,
    /// URE moves of the final CELA iteration.
    pub ure_moves: Option<Vec<UreMove>>,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub algorithm: String,
    pub metric: MetricName,
    pub baseline_p95: f64,
    pub proposed_p95: f64,
    pub improvement_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Normalizers {
    pub rate: f64,
    pub access_rate: f64,
    pub access_fraction: f64,
}

impl Normalizers {
    pub fn get(&self, metric: MetricName) -> f64 {
        match metric {
            MetricName::Rate => self.rate,
            MetricName::AccessRate => self.access_rate,
            MetricName::AccessFraction => self.access_fraction,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub initial: Deployment,
    pub runs: Vec<AlgorithmRun>,
    pub improvements: Vec<ImprovementRow>,
    /// Largest value of each metric over all runs; CDFs divide by these.
    pub normalizers: Normalizers,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&AlgorithmRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

pub fn metric_values(report: &MetricReport, metric: MetricName) -> Vec<f64> {
    match metric {
        MetricName::Rate => report.rates(),
        MetricName::AccessRate => report.access_rates(),
        MetricName::AccessFraction => report.access_fractions(),
    }
}

pub fn metric_p95(report: &MetricReport, metric: MetricName) -> f64 {
    match metric {
        MetricName::Rate => report.p95.rate,
        MetricName::AccessRate => report.p95.access_rate,
        MetricName::AccessFraction => report.p95.access_fraction,
    }
}

/// Thread pool honouring `SMALLCELL_THREADS` (unset or 0: rayon's default).
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| HarnessError::Schema(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Schema(format!("thread pool: {e}")))
}

pub fn build_scenario(config: &ExperimentConfig) -> Result<Scenario, HarnessError> {
    let spec = config.scenario.resolve()?;
    Scenario::generate(&spec, config.users, config.region, config.channel, config.seed)
        .map_err(HarnessError::stage("scenario"))
}

/// Run one algorithm from `initial`.
pub fn place(
    scenario: &Scenario,
    initial: &Deployment,
    config: &ExperimentConfig,
    spec: &AlgorithmSpec,
) -> Result<(Placement, Option<Vec<UreMove>>), HarnessError> {
    let stage = format!("placement ({})", spec.label());
    let mut solver = config.solver;
    let result = match spec {
        AlgorithmSpec::Lloyd { .. } => run_lloyd(scenario, initial, &solver).map(|p| (p, None)),
        AlgorithmSpec::Interference { kappa, step_size, unit_per_km, .. } => {
            solver.step_size = step_size.unwrap_or(solver.step_size);
            let d = DistortionKind::interference(*kappa).with_unit_per_km(*unit_per_km);
            run_interference_lloyd(scenario, initial, &solver, &d).map(|p| (p, None))
        }
        AlgorithmSpec::InterAp { kappa, step_size, unit_per_km, .. } => {
            solver.step_size = step_size.unwrap_or(solver.step_size);
            let d = DistortionKind::inter_ap(*kappa).with_unit_per_km(*unit_per_km);
            run_interap_lloyd(scenario, initial, &solver, &d).map(|p| (p, None))
        }
        AlgorithmSpec::Cela { alpha, threshold, distortion, kappa, .. } => {
            let policy = threshold.policy(*alpha)?;
            run_cela_alpha(scenario, initial, &solver, &policy, &distortion_for(*distortion, *kappa))
                .map(|c| (c.placement, Some(c.last_ure.moves)))
        }
    };
    result.map_err(HarnessError::stage(stage))
}

/// Monte Carlo metrics with trial chunks spread over the current rayon pool.
/// Chunks are merged in trial order, so the result does not depend on the
/// number of workers.
pub fn evaluate(
    scenario: &Scenario,
    deployment: &Deployment,
    partition: &Partition,
    eval: EvalConfig,
) -> Result<MetricReport, HarnessError> {
    let stage = HarnessError::stage("evaluation");
    let evaluator = Evaluator::new(scenario, deployment, partition, eval).map_err(&stage)?;
    let parts: Vec<RateAccumulator> = evaluator
        .chunks()
        .into_par_iter()
        .map(|chunk| evaluator.run_trials(chunk))
        .collect::<Result<_, _>>()
        .map_err(&stage)?;
    let mut total = parts[0].clone();
    for part in &parts[1..] {
        total.merge(part);
    }
    // `total` started as chunk 0, so merge order is 0, 1, 2, ...
    evaluator.finish(&total).map_err(stage)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let scenario = build_scenario(config)?;
    let initial = initial_deployment(&scenario, config.aps, config.seed).map_err(HarnessError::stage("initial deployment"))?;
    let eval = EvalConfig { trials: config.trials, seed: config.seed, max_interferers: config.max_interferers };

    let runs: Vec<AlgorithmRun> = config
        .algorithms
        .par_iter()
        .map(|spec| {
            let (placement, ure_moves) = place(&scenario, &initial, config, spec)?;
            let report = evaluate(&scenario, &placement.deployment, &placement.partition, eval).map_err(|e| match e {
                HarnessError::Stage { source, .. } => {
                    HarnessError::Stage { stage: format!("evaluation ({})", spec.label()), source }
                }
                other => other,
            })?;
            Ok(AlgorithmRun { label: spec.label(), spec: spec.clone(), placement, ure_moves, report })
        })
        .collect::<Result<_, HarnessError>>()?;

    let max_of = |metric: MetricName| {
        runs.iter().flat_map(|r| metric_values(&r.report, metric)).fold(f64::NEG_INFINITY, f64::max)
    };
    let normalizers = Normalizers {
        rate: max_of(MetricName::Rate),
        access_rate: max_of(MetricName::AccessRate),
        access_fraction: max_of(MetricName::AccessFraction),
    };

    let mut improvements = Vec::new();
    if let Some(baseline) = runs.iter().find(|r| r.spec.is_baseline()) {
        for run in runs.iter().filter(|r| !r.spec.is_baseline()) {
            for &metric in &config.improvement_metrics {
                let base = metric_p95(&baseline.report, metric);
                let proposed = metric_p95(&run.report, metric);
                improvements.push(ImprovementRow {
                    algorithm: run.label.clone(),
                    metric,
                    baseline_p95: base,
                    proposed_p95: proposed,
                    improvement_pct: metrics::improvement_ratio(proposed, base)
                        .map_err(HarnessError::stage("improvement ratios"))?,
                });
            }
        }
    }

    Ok(ExperimentReport { config: config.clone(), scenario, initial, runs, improvements, normalizers })
}
