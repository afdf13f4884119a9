//! Artifact files. JSON is pretty-printed, CSV uses Rust's shortest
//! round-trip float formatting; both are byte-stable for a given report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use smallcell_core::lloyd::TraceRow;
use smallcell_core::metrics::cdf;
use smallcell_core::{Deployment, MetricReport, Partition, Placement, Scenario, UreMove};

use crate::config::MetricName;
use crate::error::HarnessError;
use crate::experiment::{metric_values, ExperimentReport};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_path_buf(), source: std::io::Error::other(e) }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse { path: path.to_path_buf(), message: e.to_string() })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), HarnessError> {
    write_csv(
        path,
        &["iteration", "distortion", "max_displacement_km"],
        trace.iter().map(|t| vec![t.iteration.to_string(), t.distortion.to_string(), t.max_displacement_km.to_string()]),
    )
}

pub fn write_moves(path: &Path, moves: &[UreMove]) -> Result<(), HarnessError> {
    write_csv(
        path,
        &["user", "from", "to", "distance_km", "threshold_km"],
        moves.iter().map(|m| {
            vec![m.user.to_string(), m.from.to_string(), m.to.to_string(), m.distance_km.to_string(), m.threshold_km.to_string()]
        }),
    )
}

/// `deployment.json`, `partition.json`, `trace.csv` and, for CELA, `ure_moves.csv`.
pub fn write_placement(dir: &Path, placement: &Placement, moves: Option<&[UreMove]>) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = vec![dir.join("deployment.json"), dir.join("partition.json"), dir.join("trace.csv")];
    write_json(&written[0], &placement.deployment)?;
    write_json(&written[1], &placement.partition)?;
    write_trace(&written[2], &placement.trace)?;
    if let Some(moves) = moves {
        let path = dir.join("ure_moves.csv");
        write_moves(&path, moves)?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_scenario(path: &Path, scenario: &Scenario) -> Result<(), HarnessError> {
    write_json(path, scenario)
}

pub fn read_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    read_json(path)
}

pub fn read_deployment(path: &Path) -> Result<Deployment, HarnessError> {
    read_json(path)
}

pub fn read_partition(path: &Path) -> Result<Partition, HarnessError> {
    read_json(path)
}

#[derive(Serialize)]
struct LabelledReport<'a> {
    algorithm: &'a str,
    #[serde(flatten)]
    report: &'a MetricReport,
}

pub fn write_metrics(path: &Path, algorithm: &str, report: &MetricReport) -> Result<(), HarnessError> {
    write_json(path, &LabelledReport { algorithm, report })
}

/// Everything an experiment produces, under `dir`:
/// `config.json`, `scenario.json`, `initial_deployment.json`,
/// `<alg>/{deployment.json, partition.json, trace.csv, ure_moves.csv}`,
/// `metrics_<alg>.json`, `cdf_<metric>.csv`, `occupancy.csv`,
/// `improvements.csv`, `normalizers.json`.
pub fn write_bundle(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    let mut config = report.config.clone();
    config.output_dir = None;
    write_json(&out("config.json"), &config)?;
    write_scenario(&out("scenario.json"), &report.scenario)?;
    write_json(&out("initial_deployment.json"), &report.initial)?;
    write_json(&out("normalizers.json"), &report.normalizers)?;

    for run in &report.runs {
        write_metrics(&out(&format!("metrics_{}.json", run.label)), &run.label, &run.report)?;
    }

    for metric in MetricName::ALL {
        let norm = report.normalizers.get(metric);
        let mut rows = Vec::new();
        for run in &report.runs {
            let points = cdf(&metric_values(&run.report, metric), norm).map_err(HarnessError::stage("cdf"))?;
            rows.extend(points.into_iter().map(|(v, p)| {
                vec![metric.as_str().to_string(), run.label.clone(), v.to_string(), p.to_string()]
            }));
        }
        write_csv(&out(&format!("cdf_{}.csv", metric.as_str())), &["metric", "algorithm", "value", "probability"], rows)?;
    }

    let cells = report.config.aps;
    let mut header = vec!["algorithm".to_string()];
    header.extend((0..cells).map(|c| format!("cell_{c}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &out("occupancy.csv"),
        &header_refs,
        report.runs.iter().map(|run| {
            let mut row = vec![run.label.clone()];
            row.extend(run.placement.partition.occupancy.iter().map(|n| n.to_string()));
            row
        }),
    )?;

    let metrics = &report.config.improvement_metrics;
    let mut header = vec!["algorithm".to_string()];
    header.extend(metrics.iter().map(|m| format!("{}_improvement_pct", m.as_str())));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for row in &report.improvements {
        if rows.last().is_none_or(|r| r[0] != row.algorithm) {
            rows.push(vec![row.algorithm.clone()]);
        }
        rows.last_mut().expect("row started").push(row.improvement_pct.to_string());
    }
    write_csv(&out("improvements.csv"), &header_refs, rows)?;

    for run in &report.runs {
        written.extend(write_placement(&dir.join(&run.label), &run.placement, run.ure_moves.as_deref())?);
    }
    Ok(written)
}
