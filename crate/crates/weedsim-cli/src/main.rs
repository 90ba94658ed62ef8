//! Command-line front end: run missions from scenario files, sweep one
//! parameter across values, or validate a configuration without running.
//!
//! Exit codes: 0 success, 2 configuration/validation failure, 3 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weedsim::detect::detection_csv;
use weedsim::field::FieldGrid;
use weedsim::scenario::{apply_axis, ResolvedScenario, Scenario};
use weedsim::sim::{
    aggregate_runs, metrics_to_csv, sweep_to_csv, MissionMetrics, MissionOutcome, SweepRow,
};
use weedsim::{Error, Result};

mod heatmap;

/// Output directory used when neither `--out` nor `WEEDSIM_OUT` is given.
const DEFAULT_OUT_DIR: &str = "weedsim-out";

#[derive(Parser)]
#[command(
    name = "weedsim",
    version,
    about = "Deterministic directed-energy weeding simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's missions; export metrics, plans, and detections.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Also render a per-cell final-lethality heat map for each run.
        #[arg(long)]
        plot: bool,
        /// Run exactly this seed instead of the scenario's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Override a scenario key, e.g. --set layout.honor_paper_16=true.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (default ./weedsim-out, or $WEEDSIM_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the scenario for each value of one parameter and aggregate.
    Sweep {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Parameter to vary: speed, wiggle_sigma, detector, target, cap.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long)]
        values: String,
        /// Override a scenario key before sweeping.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (default ./weedsim-out, or $WEEDSIM_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a scenario; print the resolved configuration.
    Validate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Override a scenario key before validating.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            plot,
            seed,
            set,
            out,
        } => cmd_run(&scenario, plot, seed, &parse_overrides(&set)?, out),
        Command::Sweep {
            scenario,
            axis,
            values,
            set,
            out,
        } => cmd_sweep(&scenario, &axis, &values, &parse_overrides(&set)?, out),
        Command::Validate { scenario, set } => cmd_validate(&scenario, &parse_overrides(&set)?),
    }
}

fn parse_overrides(pairs: &[String]) -> Result<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|raw| {
            raw.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| {
                    Error::Validation(format!("--set expects KEY=VALUE, got {raw:?}"))
                })
        })
        .collect()
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("WEEDSIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Load the scenario, resolve it, and read its field map when one is named.
fn load(
    scenario_path: &Path,
    overrides: &[(String, String)],
) -> Result<(ResolvedScenario, Option<FieldGrid>)> {
    let resolved = Scenario::load(scenario_path, overrides)?.resolve()?;
    let grid = match &resolved.map {
        Some(rel) => {
            let map_path = scenario_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(rel);
            Some(FieldGrid::load_field(&fs::read_to_string(map_path)?)?)
        }
        None => None,
    };
    Ok((resolved, grid))
}

fn run_one(resolved: &ResolvedScenario, grid: &Option<FieldGrid>, seed: u64) -> Result<MissionOutcome> {
    match grid {
        Some(g) => resolved.mission.run_on_grid(g, seed),
        None => resolved.mission.run_full(seed),
    }
}

fn describe(metrics: &MissionMetrics) -> String {
    let mut line = format!(
        "seed {}: kill {:.3} ({}/{} weeds), missed {}, underdosed {}, collateral {}, \
         mismatches {}, {:.1} s, {:.0} J",
        metrics.seed,
        metrics.weed_kill_fraction,
        metrics.killed,
        metrics.total_weeds,
        metrics.missed,
        metrics.underdosed,
        metrics.crop_collateral,
        metrics.mismatch_events,
        metrics.total_time_s,
        metrics.total_energy_j,
    );
    if let Some(verdict) = metrics.verdict {
        line.push_str(&format!(", {verdict}"));
    }
    line
}

fn cmd_run(
    scenario_path: &Path,
    plot: bool,
    seed: Option<u64>,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
) -> Result<()> {
    let (resolved, grid) = load(scenario_path, overrides)?;
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => resolved.seeds.clone(),
    };
    let dir = out_dir(out);
    fs::create_dir_all(&dir)?;

    let mut all_metrics = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let outcome = run_one(&resolved, &grid, s)?;
        fs::write(
            dir.join(format!("plan-{s}.csv")),
            outcome.executed.to_csv(&resolved.mission.layout)?,
        )?;
        fs::write(
            dir.join(format!("detections-{s}.csv")),
            detection_csv(&outcome.pre, &outcome.report)?,
        )?;
        if plot {
            heatmap::render(
                &outcome.post,
                &resolved.mission.layout.recipe,
                &dir.join(format!("heatmap-{s}.png")),
            )?;
        }
        println!("{}", describe(&outcome.metrics));
        all_metrics.push(outcome.metrics);
    }
    fs::write(dir.join("metrics.csv"), metrics_to_csv(&all_metrics)?)?;
    let summary = serde_json::json!({
        "mission": resolved.mission,
        "seeds": seeds,
        "runs": all_metrics,
    });
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Validation(e.to_string()))?,
    )?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(
    scenario_path: &Path,
    axis: &str,
    values: &str,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
) -> Result<()> {
    let (resolved, grid) = load(scenario_path, overrides)?;
    let values: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::Validation(
            "sweep needs at least one value; got an empty list".into(),
        ));
    }
    let seeds = resolved.sweep_seeds();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    for value in values {
        let mut mission = resolved.mission.clone();
        apply_axis(&mut mission, axis, value)?;
        let runs: Vec<MissionMetrics> = match &grid {
            Some(g) => seeds
                .iter()
                .map(|&s| mission.run_on_grid(g, s).map(|o| o.metrics))
                .collect::<Result<_>>()?,
            None => mission.run_batch(&seeds)?,
        };
        let row = aggregate_runs(axis, value, &runs)?;
        println!(
            "{axis} = {value}: mean kill {:.3} ± {:.3}, mean missed {:.2}, {} seeds",
            row.mean_weed_kill_fraction, row.std_weed_kill_fraction, row.mean_missed, row.seeds
        );
        rows.push(row);
    }
    let dir = out_dir(out);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("sweep.csv"), sweep_to_csv(&rows)?)?;
    println!("wrote {}", dir.join("sweep.csv").display());
    Ok(())
}

fn cmd_validate(scenario_path: &Path, overrides: &[(String, String)]) -> Result<()> {
    let (resolved, grid) = load(scenario_path, overrides)?;
    println!("{}", resolved.summary()?);
    if let Some(g) = &grid {
        println!(
            "field map: {}x{} cells, {} weeds",
            g.rows(),
            g.cols(),
            g.weed_count()
        );
    }
    println!("scenario OK");
    Ok(())
}
