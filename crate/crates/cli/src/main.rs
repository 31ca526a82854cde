mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rss_coloc::config::{ExperimentConfig, SweepSection};
use rss_coloc::eval::{nrmse_from_errors, run_once, run_scenario, run_sweep, runtime_scaling};
use rss_coloc::seeding::run_seed;
use rss_coloc::{Algorithm, DeConfig, ExperimentReport, Execution, Finalize, PathLossParams, Scenario, SweepAxis};

use crate::output::RunManifest;

#[derive(Parser)]
#[command(name = "rss-coloc", version, about = "Cooperative RSS localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment described by a config file.
    Run(RunArgs),
    /// Localize one small random network and print the result.
    Demo(DemoArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads for Monte-Carlo runs; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Comma-separated algorithms, e.g. `proposed,ml-true`.
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    /// `axis=v1,v2,...`; replaces the sweeps of the config. Repeatable.
    #[arg(long = "sweep", value_parser = parse_sweep)]
    sweeps: Vec<SweepSection>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Shadowing standard deviation, dB.
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    #[arg(long, default_value_t = 150.0)]
    range: f64,
    #[arg(long, default_value_t = 200)]
    generations: usize,
    /// `proposed` (best member) or `proposed1` (population midpoint).
    #[arg(long, default_value = "proposed")]
    algorithm: Algorithm,
}

fn parse_sweep(s: &str) -> Result<SweepSection, String> {
    let (axis, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected axis=v1,v2,..., got `{s}`"))?;
    let axis: SweepAxis = axis.trim().parse()?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad sweep value `{v}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepSection { axis, values })
}

/// Exit code 1: bad input. Exit code 2: the experiment itself failed.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Demo(args) => cmd_demo(args).map_err(Failure::Runtime),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_toml_str(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.algorithm.is_empty() {
        config.experiment.algorithms = args.algorithm.clone();
    }
    if !args.sweeps.is_empty() {
        config.sweeps = args.sweeps.clone();
    }
    config.validate()?;
    Ok(config)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let config = load_config(&args).map_err(Failure::Usage)?;
    let exec = if args.parallel == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    let (reports, scaling) = pool.install(|| execute(&config, exec)).map_err(Failure::Runtime)?;
    write_outputs(&args, &config, &reports, scaling.as_ref()).map_err(Failure::Runtime)
}

fn execute(
    config: &ExperimentConfig,
    exec: Execution,
) -> anyhow::Result<(Vec<ExperimentReport>, Option<rss_coloc::eval::ScalingTable>)> {
    let base = config.scenario();
    let seed = config.seed;
    let mut reports = Vec::new();
    if config.sweeps.is_empty() {
        reports.push(run_scenario(&base, seed, exec)?);
    }
    for sweep in &config.sweeps {
        reports.extend(run_sweep(&base, sweep.axis, &sweep.values, seed, exec)?);
    }
    for r in &reports {
        let axis = r.axis.map_or("base", |a| a.name());
        let cells: Vec<String> = r
            .summaries
            .iter()
            .map(|s| format!("{} {:.4} m", s.algorithm, s.nrmse))
            .collect();
        println!("{axis}={}: {}", r.axis_value, cells.join(", "));
    }
    let scaling = match &config.timing {
        Some(t) => {
            let table = runtime_scaling(&base, &t.m_values, t.runs, seed)
                .with_context(|| format!("runtime scaling failed (master seed {seed})"))?;
            println!("runtime slope over M: {:.3}", table.slope);
            Some(table)
        }
        None => None,
    };
    Ok((reports, scaling))
}

fn write_outputs(
    args: &RunArgs,
    config: &ExperimentConfig,
    reports: &[ExperimentReport],
    scaling: Option<&rss_coloc::eval::ScalingTable>,
) -> anyhow::Result<()> {
    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    output::write_nrmse(&dir.join(output::NRMSE_FILE), reports)?;
    output::write_timing(&dir.join(output::TIMING_FILE), reports)?;
    let mut outputs = vec![output::NRMSE_FILE.to_string(), output::TIMING_FILE.to_string()];
    if let Some(table) = scaling {
        output::write_scaling(&dir.join(output::SCALING_FILE), table)?;
        outputs.push(output::SCALING_FILE.to_string());
    }
    let manifest = RunManifest {
        config_path: args.config.clone(),
        master_seed: config.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        out_dir: dir.clone(),
        parallel: args.parallel,
        outputs,
        config: config.to_toml_string(),
    };
    output::write_manifest(&dir.join(output::MANIFEST_FILE), &manifest)?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_demo(args: DemoArgs) -> anyhow::Result<()> {
    let finalize = match args.algorithm {
        Algorithm::Proposed => Finalize::BestIndividual,
        Algorithm::Proposed1 => Finalize::Midpoint,
        Algorithm::MlTrue => bail!("the demo runs proposed or proposed1"),
    };
    let scenario = Scenario {
        num_targets: 10,
        range: args.range,
        radio: PathLossParams::new(40.0, 3.0, args.sigma),
        optimizer: DeConfig {
            generations: args.generations,
            finalize,
            ..DeConfig::default()
        },
        algorithms: vec![args.algorithm],
        runs: 1,
        ..Scenario::default()
    };
    scenario.validate()?;
    let seed = run_seed(args.seed, 0, 0);
    let record = run_once(&scenario, 0, seed).map_err(|e| anyhow!("demo failed (seed {}): {e}", args.seed))?;
    let result = record
        .result(args.algorithm)
        .ok_or_else(|| anyhow!("no result for {}", args.algorithm))?;

    let mode = match finalize {
        Finalize::BestIndividual => "best individual",
        Finalize::Midpoint => "population midpoint",
    };
    println!(
        "{} demo: M=10, R={} m, sigma={} dB, G={}, seed {}, finalization: {mode}",
        args.algorithm, args.range, args.sigma, args.generations, args.seed
    );
    println!("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9}", "target", "true_x", "true_y", "est_x", "est_y", "error");
    for (m, (t, e)) in record.truth.iter().zip(&result.estimates).enumerate() {
        let flag = if record.degenerate[m] { "  (no measurements)" } else { "" };
        println!(
            "{m:>6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}{flag}",
            t.x,
            t.y,
            e.x,
            e.y,
            result.errors[m]
        );
    }
    let nrmse = nrmse_from_errors(record.counted_errors(args.algorithm, false), false);
    println!("NRMSE: {nrmse:.4} m");
    Ok(())
}
