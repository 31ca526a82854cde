//! CSV and manifest writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rss_coloc::eval::ScalingTable;
use rss_coloc::{Algorithm, ExperimentReport};
use serde::Serialize;

pub const NRMSE_FILE: &str = "nrmse.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SCALING_FILE: &str = "scaling.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Serialize)]
struct NrmseRow<'a> {
    axis: &'a str,
    axis_value: f64,
    algorithm: &'a str,
    run_index: usize,
    nrmse_run: f64,
    mean_nrmse: f64,
}

#[derive(Serialize)]
struct TimingRow<'a> {
    #[serde(rename = "M")]
    m: usize,
    algorithm: &'a str,
    mean_seconds: f64,
    std_seconds: f64,
}

#[derive(Serialize)]
struct ScalingRow {
    #[serde(rename = "M")]
    m: usize,
    mean_seconds: f64,
    std_seconds: f64,
}

/// Everything needed to trace and replay one invocation.
#[derive(Serialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub master_seed: u64,
    pub tool_version: String,
    pub out_dir: PathBuf,
    pub parallel: usize,
    pub outputs: Vec<String>,
    /// The resolved config, overrides applied. Running it reproduces the CSVs.
    pub config: String,
}

pub fn write_nrmse(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for report in reports {
        let axis = report.axis.map_or("base", |a| a.name());
        for &alg in &report.scenario.algorithms {
            let mean = report.nrmse(alg);
            for run in &report.runs {
                w.serialize(NrmseRow {
                    axis,
                    axis_value: report.axis_value,
                    algorithm: alg.name(),
                    run_index: run.run_index,
                    nrmse_run: report.run_nrmse(alg, run.run_index),
                    mean_nrmse: mean,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Per-run wall times pooled by target count and algorithm.
pub fn write_timing(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut groups: BTreeMap<(usize, Algorithm), Vec<f64>> = BTreeMap::new();
    for report in reports {
        for run in &report.runs {
            for r in &run.results {
                groups
                    .entry((report.scenario.num_targets, r.algorithm))
                    .or_default()
                    .push(r.seconds);
            }
        }
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for ((m, alg), secs) in &groups {
        let (mean_seconds, std_seconds) = mean_std(secs);
        w.serialize(TimingRow {
            m: *m,
            algorithm: alg.name(),
            mean_seconds,
            std_seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling(path: &Path, table: &ScalingTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for row in &table.rows {
        w.serialize(ScalingRow {
            m: row.num_targets,
            mean_seconds: row.mean_seconds,
            std_seconds: row.std_seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let text = toml::to_string(manifest).context("cannot serialize manifest")?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
