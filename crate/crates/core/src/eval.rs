//! Monte-Carlo experiments: scenario sampling, repeated runs, NRMSE and
//! wall-time bookkeeping.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{refine_from_truth, RefinerConfig};
use crate::cost::LocalizationProblem;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mpde::{DeConfig, MultiPopulationDe};
use crate::network::{reference_anchors, Aoi, NetworkTopology, Position};
use crate::rss_sim::{generate_measurements, PathLossParams};
use crate::seeding::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// MP-DE, best member of each population.
    #[serde(rename = "proposed")]
    Proposed,
    /// MP-DE, population midpoint.
    #[serde(rename = "proposed1")]
    Proposed1,
    /// Levenberg-Marquardt started at the truth.
    #[serde(rename = "ml-true")]
    MlTrue,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Proposed, Algorithm::Proposed1, Algorithm::MlTrue];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::Proposed1 => "proposed1",
            Algorithm::MlTrue => "ml-true",
        }
    }

    fn uses_mpde(self) -> bool {
        matches!(self, Algorithm::Proposed | Algorithm::Proposed1)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected proposed, proposed1 or ml-true)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    NumTargets,
    Sigma,
    Range,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NumTargets => "num-targets",
            SweepAxis::Sigma => "sigma",
            SweepAxis::Range => "range",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [SweepAxis::NumTargets, SweepAxis::Sigma, SweepAxis::Range]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown sweep axis `{s}` (expected num-targets, sigma or range)"))
    }
}

/// A fully resolved experiment point.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub anchors: Vec<Position>,
    pub aoi: Aoi,
    pub num_targets: usize,
    pub range: f64,
    pub radio: PathLossParams,
    pub optimizer: DeConfig,
    pub refiner: RefinerConfig,
    pub algorithms: Vec<Algorithm>,
    /// Monte-Carlo runs.
    pub runs: usize,
    /// Count measurement-less targets in the error metric.
    pub include_degenerate: bool,
    /// Square the error norms in the metric.
    pub conventional_rmse: bool,
}

impl Default for Scenario {
    /// Reference setup: nine anchors in a 100 m square, 30 targets, 40 m range,
    /// 4 dB shadowing, 100 runs of every algorithm.
    fn default() -> Self {
        Scenario {
            anchors: reference_anchors(),
            aoi: Aoi::square(100.0),
            num_targets: 30,
            range: 40.0,
            radio: PathLossParams::new(40.0, 3.0, 4.0),
            optimizer: DeConfig::default(),
            refiner: RefinerConfig::default(),
            algorithms: Algorithm::ALL.to_vec(),
            runs: 100,
            include_degenerate: false,
            conventional_rmse: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.aoi.validate()?;
        if self.runs < 1 {
            return Err(Error::param("runs", "need at least one Monte-Carlo run"));
        }
        if self.num_targets < 1 {
            return Err(Error::param("num_targets", "need at least one target"));
        }
        if self.anchors.is_empty() {
            return Err(Error::param("anchors", "need at least one anchor"));
        }
        if !(self.range > 0.0) {
            return Err(Error::param("range", format!("must be positive, got {}", self.range)));
        }
        if self.algorithms.is_empty() {
            return Err(Error::param("algorithms", "need at least one algorithm"));
        }
        self.radio.validate()?;
        self.optimizer.validate()?;
        self.refiner.validate()
    }

    /// The same scenario with one parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        match axis {
            SweepAxis::NumTargets => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::param(
                        "num_targets",
                        format!("sweep value must be a positive integer, got {value}"),
                    ));
                }
                s.num_targets = value as usize;
            }
            SweepAxis::Sigma => s.radio.sigma = value,
            SweepAxis::Range => s.range = value,
        }
        Ok(s)
    }

    pub fn axis_value(&self, axis: SweepAxis) -> f64 {
        match axis {
            SweepAxis::NumTargets => self.num_targets as f64,
            SweepAxis::Sigma => self.radio.sigma,
            SweepAxis::Range => self.range,
        }
    }

    fn describe(&self) -> String {
        format!(
            "M={} R={} sigma={} L={} G={}",
            self.num_targets, self.range, self.radio.sigma, self.optimizer.pop_size, self.optimizer.generations
        )
    }
}

/// Error metric over a set of per-target error norms:
/// `sqrt(mean(e))`, or `sqrt(mean(e^2))` when `conventional`.
pub fn nrmse_from_errors<I: IntoIterator<Item = f64>>(errors: I, conventional: bool) -> f64 {
    let (sum, count) = errors.into_iter().fold((0.0, 0usize), |(s, n), e| {
        (s + if conventional { e * e } else { e }, n + 1)
    });
    (sum / count as f64).sqrt()
}

/// NRMSE over `M_C` runs of `M` targets each.
pub fn nrmse(truth: &[Vec<Position>], estimates: &[Vec<Position>], conventional: bool) -> Result<f64> {
    if truth.len() != estimates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} runs of true positions, {} runs of estimates",
            truth.len(),
            estimates.len()
        )));
    }
    let mut errors = Vec::new();
    for (i, (t, e)) in truth.iter().zip(estimates).enumerate() {
        if t.len() != e.len() {
            return Err(Error::DimensionMismatch(format!(
                "run {i}: {} true positions, {} estimates",
                t.len(),
                e.len()
            )));
        }
        errors.extend(t.iter().zip(e).map(|(a, b)| a.distance(b)));
    }
    if errors.is_empty() {
        return Err(Error::DimensionMismatch("no positions".into()));
    }
    Ok(nrmse_from_errors(errors, conventional))
}

/// One algorithm's output for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub estimates: Vec<Position>,
    /// `|x - x_hat|` per target.
    pub errors: Vec<f64>,
    /// Wall time of the estimator call alone.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub truth: Vec<Position>,
    pub degenerate: Vec<bool>,
    pub results: Vec<AlgorithmRun>,
}

impl RunRecord {
    pub fn result(&self, algorithm: Algorithm) -> Option<&AlgorithmRun> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }

    /// Errors that enter the metric.
    pub fn counted_errors(&self, algorithm: Algorithm, include_degenerate: bool) -> Vec<f64> {
        self.result(algorithm)
            .map(|r| {
                r.errors
                    .iter()
                    .zip(&self.degenerate)
                    .filter(|(_, &d)| include_degenerate || !d)
                    .map(|(&e, _)| e)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn num_degenerate(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    /// Metric pooled over all runs.
    pub nrmse: f64,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Results at one experiment point.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub axis: Option<SweepAxis>,
    pub axis_index: usize,
    pub axis_value: f64,
    pub master_seed: u64,
    pub scenario: Scenario,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<AlgorithmSummary>,
}

impl ExperimentReport {
    fn new(
        axis: Option<SweepAxis>,
        axis_index: usize,
        axis_value: f64,
        master_seed: u64,
        scenario: Scenario,
        runs: Vec<RunRecord>,
    ) -> Self {
        let mut report = ExperimentReport {
            axis,
            axis_index,
            axis_value,
            master_seed,
            scenario,
            runs,
            summaries: Vec::new(),
        };
        report.summaries = report
            .scenario
            .algorithms
            .iter()
            .map(|&a| {
                let secs: Vec<f64> = report
                    .runs
                    .iter()
                    .filter_map(|r| r.result(a).map(|x| x.seconds))
                    .collect();
                let (mean_seconds, std_seconds) = mean_std(&secs);
                AlgorithmSummary {
                    algorithm: a,
                    nrmse: report.nrmse(a),
                    mean_seconds,
                    std_seconds,
                }
            })
            .collect();
        report
    }

    /// Metric pooled over every run, recomputed from the stored errors.
    pub fn nrmse(&self, algorithm: Algorithm) -> f64 {
        let include = self.scenario.include_degenerate;
        nrmse_from_errors(
            self.runs
                .iter()
                .flat_map(|r| r.counted_errors(algorithm, include)),
            self.scenario.conventional_rmse,
        )
    }

    pub fn run_nrmse(&self, algorithm: Algorithm, run_index: usize) -> f64 {
        nrmse_from_errors(
            self.runs[run_index].counted_errors(algorithm, self.scenario.include_degenerate),
            self.scenario.conventional_rmse,
        )
    }

    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn degenerate_count(&self) -> usize {
        self.runs.iter().map(RunRecord::num_degenerate).sum()
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Samples a network for one run: uniform target placement.
pub fn sample_topology(scenario: &Scenario, seed: u64) -> Result<NetworkTopology> {
    let mut rng = seeding::substream(seed, stream::PLACEMENT);
    let targets = (0..scenario.num_targets)
        .map(|_| scenario.aoi.sample_uniform(&mut rng))
        .collect();
    NetworkTopology::build(scenario.anchors.clone(), targets, scenario.range, scenario.aoi)
}

/// Executes one Monte-Carlo run with every configured algorithm.
pub fn run_once(scenario: &Scenario, run_index: usize, seed: u64) -> Result<RunRecord> {
    let topology = sample_topology(scenario, seed)?;
    let mut rng = seeding::substream(seed, stream::MEASUREMENT);
    let measurements = generate_measurements(&topology, &scenario.radio, &mut rng)?;
    let problem = LocalizationProblem::new(&topology, &measurements);
    let truth = topology.targets().to_vec();
    let errors = |est: &[Position]| -> Vec<f64> { truth.iter().zip(est).map(|(a, b)| a.distance(b)).collect() };

    let mut results = Vec::with_capacity(scenario.algorithms.len());
    let mut degenerate = topology
        .degenerate_targets()
        .into_iter()
        .fold(vec![false; truth.len()], |mut v, m| {
            v[m] = true;
            v
        });

    if scenario.algorithms.iter().any(|a| a.uses_mpde()) {
        let config = DeConfig {
            seed: seeding::derive(seed, stream::OPTIMIZER),
            ..scenario.optimizer.clone()
        };
        let start = Instant::now();
        let solution = MultiPopulationDe::new(config).run(&problem)?;
        let seconds = start.elapsed().as_secs_f64();
        degenerate = solution.degenerate.clone();
        for &a in scenario.algorithms.iter().filter(|a| a.uses_mpde()) {
            let estimates = match a {
                Algorithm::Proposed => solution.best.clone(),
                _ => solution.midpoint.clone(),
            };
            results.push(AlgorithmRun {
                algorithm: a,
                errors: errors(&estimates),
                estimates,
                seconds,
            });
        }
    }
    if scenario.algorithms.contains(&Algorithm::MlTrue) {
        let start = Instant::now();
        let estimates = refine_from_truth(&topology, &measurements, &scenario.refiner)?;
        let seconds = start.elapsed().as_secs_f64();
        results.push(AlgorithmRun {
            algorithm: Algorithm::MlTrue,
            errors: errors(&estimates),
            estimates,
            seconds,
        });
    }
    results.sort_by_key(|r| {
        scenario
            .algorithms
            .iter()
            .position(|&a| a == r.algorithm)
            .unwrap_or(usize::MAX)
    });

    Ok(RunRecord {
        run_index,
        seed,
        truth,
        degenerate,
        results,
    })
}

fn run_point(
    scenario: &Scenario,
    axis: Option<SweepAxis>,
    axis_index: usize,
    axis_value: f64,
    master_seed: u64,
    exec: Execution,
) -> Result<ExperimentReport> {
    scenario.validate()?;
    let outcomes = exec.map_indexed(scenario.runs, |i| {
        let seed = seeding::run_seed(master_seed, axis_index as u64, i as u64);
        run_once(scenario, i, seed).map_err(|e| Error::RunFailed {
            context: format!(
                "{}={} axis_index={} run_index={} master_seed={} {}",
                axis.map_or("base", SweepAxis::name),
                axis_value,
                axis_index,
                i,
                master_seed,
                scenario.describe()
            ),
            seed,
            source: Box::new(e),
        })
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(
        axis,
        axis_index,
        axis_value,
        master_seed,
        scenario.clone(),
        runs,
    ))
}

/// All runs of a single scenario (axis index 0).
pub fn run_scenario(scenario: &Scenario, master_seed: u64, exec: Execution) -> Result<ExperimentReport> {
    run_point(
        scenario,
        None,
        0,
        scenario.num_targets as f64,
        master_seed,
        exec,
    )
}

/// One report per sweep value. Run `i` at value index `j` uses the seed
/// [`seeding::run_seed`]`(master_seed, j, i)`.
pub fn run_sweep(
    base: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<ExperimentReport>> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    values
        .iter()
        .enumerate()
        .map(|(j, &v)| run_point(&base.with_axis(axis, v)?, Some(axis), j, v, master_seed, exec))
        .collect()
}

/// Mean and standard deviation of the optimizer wall time over `runs`
/// single-threaded runs of `scenario`.
pub fn mpde_runtime(scenario: &Scenario, runs: usize, seed: u64) -> Result<(f64, f64)> {
    let mut secs = Vec::with_capacity(runs);
    for i in 0..runs {
        let run_seed = seeding::run_seed(seed, u64::MAX, i as u64);
        let topology = sample_topology(scenario, run_seed)?;
        let mut rng = seeding::substream(run_seed, stream::MEASUREMENT);
        let measurements = generate_measurements(&topology, &scenario.radio, &mut rng)?;
        let problem = LocalizationProblem::new(&topology, &measurements);
        let config = DeConfig {
            seed: seeding::derive(run_seed, stream::OPTIMIZER),
            execution: Execution::Sequential,
            ..scenario.optimizer.clone()
        };
        let start = Instant::now();
        MultiPopulationDe::new(config).run(&problem)?;
        secs.push(start.elapsed().as_secs_f64());
    }
    Ok(mean_std(&secs))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub num_targets: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Slope of log time against log M.
    pub slope: f64,
}

/// Optimizer wall time as a function of the number of targets.
pub fn runtime_scaling(base: &Scenario, m_values: &[usize], runs: usize, seed: u64) -> Result<ScalingTable> {
    if m_values.len() < 3 {
        return Err(Error::param("m_values", "need at least three values of M"));
    }
    let mut rows = Vec::with_capacity(m_values.len());
    for &m in m_values {
        let scenario = Scenario {
            num_targets: m,
            ..base.clone()
        };
        let (mean_seconds, std_seconds) = mpde_runtime(&scenario, runs, seed)?;
        rows.push(ScalingRow {
            num_targets: m,
            mean_seconds,
            std_seconds,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.num_targets as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_seconds).collect();
    Ok(ScalingTable {
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}
