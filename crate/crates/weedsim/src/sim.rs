//! Mission pipeline: generate or take a field, survey it, plan a pass,
//! execute the plan with lateral drift, and score the outcome.
//!
//! A mission is deterministic in its seed. Three decorrelated RNG streams
//! hang off the same seed: field generation (stream 0), classification
//! (stream 1), and drift (stream 2), so changing e.g. the drift magnitude
//! never reshuffles which cells the detector got wrong.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::detect::{accuracy, csv_io, survey_field, ConfusionSpec, DetectionReport};
use crate::dose::KILL_EPS;
use crate::error::{Error, Result};
use crate::field::{CellClass, FieldGrid};
use crate::sched::{
    plan_continuous, plan_move_then_dwell, simulate_plan, ActivationPlan, ArrayLayout,
    FeasibilityVerdict, StepMode,
};

/// RNG stream for lateral drift draws.
pub const RNG_STREAM_WIGGLE: u64 = 2;
/// Crop cells at or above this lethality count as collateral damage.
pub const DEFAULT_COLLATERAL_THRESHOLD: f64 = 0.25;

/// Drive-train behavior: speed, lateral drift, and course correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// Ground speed while moving, m/s. Doubles as the pass speed in
    /// continuous mode.
    pub transit_speed: f64,
    /// Lateral drift scale: the y offset random-walks with standard
    /// deviation `wiggle_sigma * sqrt(distance)` per moving segment.
    pub wiggle_sigma: f64,
    /// Re-zero the lateral offset at every dwell stop (the platform takes a
    /// fresh position fix while stationary).
    pub course_correction: bool,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            transit_speed: crate::sched::DEFAULT_TRANSIT_SPEED_MPS,
            wiggle_sigma: 0.0,
            course_correction: true,
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.transit_speed > 0.0) {
            return Err(Error::validation(format!(
                "transit speed must be positive, got {}",
                self.transit_speed
            )));
        }
        if !(self.wiggle_sigma >= 0.0) {
            return Err(Error::validation(format!(
                "wiggle sigma must be non-negative, got {}",
                self.wiggle_sigma
            )));
        }
        Ok(())
    }
}

/// Treatment strategy for a pass over the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissionMode {
    /// Stop over each weed group and fire cap-sized batches for the full
    /// required dwell.
    MoveThenDwell,
    /// Keep rolling and switch sources on over reported weeds as they pass.
    Continuous,
}

/// Everything needed to run one seeded mission end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mission {
    pub field_rows: usize,
    pub field_cols: usize,
    pub cell_pitch: f64,
    pub weed_fraction: f64,
    /// Fix the field across runs; `None` grows it from the run seed.
    pub field_seed: Option<u64>,
    pub layout: ArrayLayout,
    pub detector: ConfusionSpec,
    pub robot: RobotConfig,
    pub mode: MissionMode,
    /// Lethality every weed must reach.
    pub target: f64,
    pub collateral_threshold: f64,
}

impl Default for Mission {
    fn default() -> Self {
        Mission {
            field_rows: 7,
            field_cols: 15,
            cell_pitch: crate::field::DEFAULT_CELL_PITCH_M,
            weed_fraction: 0.2,
            field_seed: None,
            layout: ArrayLayout::default(),
            detector: ConfusionSpec::paper_98(),
            robot: RobotConfig::default(),
            mode: MissionMode::MoveThenDwell,
            target: 1.0,
            collateral_threshold: DEFAULT_COLLATERAL_THRESHOLD,
        }
    }
}

/// Outcome scores for one mission run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub seed: u64,
    pub total_weeds: usize,
    /// Weeds whose final lethality reached the target.
    pub killed: usize,
    /// Live weeds the detector reported as something else.
    pub missed: usize,
    /// Live weeds that were reported and treated but fell short of the
    /// target (e.g. drift or an infeasible pass speed).
    pub underdosed: usize,
    /// killed / total_weeds; defined as 1.0 on a weed-free field.
    pub weed_kill_fraction: f64,
    /// Crop cells dosed to at least the collateral threshold.
    pub crop_collateral: usize,
    /// crop_collateral / crop cell count; 0.0 when the field has no crop.
    pub collateral_fraction: f64,
    /// Active-source instants where drift moved the dose off the planned cell.
    pub mismatch_events: usize,
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub detection_accuracy: f64,
    pub total_time_s: f64,
    pub total_energy_j: f64,
    /// Continuous mode only.
    pub verdict: Option<FeasibilityVerdict>,
}

/// Flat, lossless CSV projection of [`MissionMetrics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsCsvRow {
    pub seed: u64,
    pub total_weeds: usize,
    pub killed: usize,
    pub missed: usize,
    pub underdosed: usize,
    pub weed_kill_fraction: f64,
    pub crop_collateral: usize,
    pub collateral_fraction: f64,
    pub mismatch_events: usize,
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub detection_accuracy: f64,
    pub total_time_s: f64,
    pub total_energy_j: f64,
    pub feasible: Option<bool>,
    pub window_s: Option<f64>,
    pub required_dwell_s: Option<f64>,
}

impl MissionMetrics {
    pub fn csv_row(&self) -> MetricsCsvRow {
        MetricsCsvRow {
            seed: self.seed,
            total_weeds: self.total_weeds,
            killed: self.killed,
            missed: self.missed,
            underdosed: self.underdosed,
            weed_kill_fraction: self.weed_kill_fraction,
            crop_collateral: self.crop_collateral,
            collateral_fraction: self.collateral_fraction,
            mismatch_events: self.mismatch_events,
            true_positives: self.true_positives,
            true_negatives: self.true_negatives,
            false_positives: self.false_positives,
            false_negatives: self.false_negatives,
            detection_accuracy: self.detection_accuracy,
            total_time_s: self.total_time_s,
            total_energy_j: self.total_energy_j,
            feasible: self.verdict.map(|v| v.feasible),
            window_s: self.verdict.map(|v| v.window_s),
            required_dwell_s: self.verdict.map(|v| v.required_dwell_s),
        }
    }
}

pub fn metrics_to_csv(metrics: &[MissionMetrics]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        w.serialize(m.csv_row()).map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn metrics_rows_from_csv(text: &str) -> Result<Vec<MetricsCsvRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsCsvRow>, _>>()
        .map_err(csv_io)
}

/// One aggregate row of a parameter sweep: mean and sample standard
/// deviation of each headline metric over that value's seed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: String,
    pub seeds: usize,
    pub mean_weed_kill_fraction: f64,
    pub std_weed_kill_fraction: f64,
    pub mean_missed: f64,
    pub std_missed: f64,
    pub mean_underdosed: f64,
    pub std_underdosed: f64,
    pub mean_crop_collateral: f64,
    pub std_crop_collateral: f64,
    pub mean_mismatch_events: f64,
    pub std_mismatch_events: f64,
    pub mean_detection_accuracy: f64,
    pub std_detection_accuracy: f64,
    pub mean_total_time_s: f64,
    pub std_total_time_s: f64,
    pub mean_total_energy_j: f64,
    pub std_total_energy_j: f64,
    /// Share of runs with a feasible verdict; empty outside continuous mode.
    pub feasible_fraction: Option<f64>,
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() < 2 {
        0.0
    } else {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Collapse one sweep point's runs into means and standard deviations.
pub fn aggregate_runs(axis: &str, value: &str, runs: &[MissionMetrics]) -> Result<SweepRow> {
    if runs.is_empty() {
        return Err(Error::UndefinedMetric("sweep aggregate of zero runs"));
    }
    let col = |f: &dyn Fn(&MissionMetrics) -> f64| -> (f64, f64) {
        mean_std(&runs.iter().map(f).collect::<Vec<f64>>())
    };
    let (mean_weed_kill_fraction, std_weed_kill_fraction) = col(&|m| m.weed_kill_fraction);
    let (mean_missed, std_missed) = col(&|m| m.missed as f64);
    let (mean_underdosed, std_underdosed) = col(&|m| m.underdosed as f64);
    let (mean_crop_collateral, std_crop_collateral) = col(&|m| m.crop_collateral as f64);
    let (mean_mismatch_events, std_mismatch_events) = col(&|m| m.mismatch_events as f64);
    let (mean_detection_accuracy, std_detection_accuracy) = col(&|m| m.detection_accuracy);
    let (mean_total_time_s, std_total_time_s) = col(&|m| m.total_time_s);
    let (mean_total_energy_j, std_total_energy_j) = col(&|m| m.total_energy_j);
    let feasible_fraction = if runs.iter().all(|m| m.verdict.is_some()) {
        let feasible = runs.iter().filter(|m| m.verdict.is_some_and(|v| v.feasible)).count();
        Some(feasible as f64 / runs.len() as f64)
    } else {
        None
    };
    Ok(SweepRow {
        axis: axis.to_string(),
        value: value.to_string(),
        seeds: runs.len(),
        mean_weed_kill_fraction,
        std_weed_kill_fraction,
        mean_missed,
        std_missed,
        mean_underdosed,
        std_underdosed,
        mean_crop_collateral,
        std_crop_collateral,
        mean_mismatch_events,
        std_mismatch_events,
        mean_detection_accuracy,
        std_detection_accuracy,
        mean_total_time_s,
        std_total_time_s,
        mean_total_energy_j,
        std_total_energy_j,
        feasible_fraction,
    })
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(csv_io)
}

/// Full artifacts of one run, for export and inspection.
#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub metrics: MissionMetrics,
    pub planned: ActivationPlan,
    pub executed: ActivationPlan,
    pub report: DetectionReport,
    /// The field as surveyed (no dose).
    pub pre: FieldGrid,
    /// The field after treatment, ledgers filled in.
    pub post: FieldGrid,
}

impl Mission {
    pub fn validate(&self) -> Result<()> {
        if self.field_rows < 1 || self.field_cols < 1 {
            return Err(Error::validation(format!(
                "field must have at least one cell, got {}x{}",
                self.field_rows, self.field_cols
            )));
        }
        if !(self.cell_pitch > 0.0) {
            return Err(Error::validation(format!(
                "cell pitch must be positive, got {}",
                self.cell_pitch
            )));
        }
        if !(0.0..=1.0).contains(&self.weed_fraction) {
            return Err(Error::validation(format!(
                "weed fraction must lie in [0, 1], got {}",
                self.weed_fraction
            )));
        }
        if !(self.target > 0.0 && self.target <= 1.0) {
            return Err(Error::validation(format!(
                "lethality target must lie in (0, 1], got {}",
                self.target
            )));
        }
        if !(0.0..=1.0).contains(&self.collateral_threshold) {
            return Err(Error::validation(format!(
                "collateral threshold must lie in [0, 1], got {}",
                self.collateral_threshold
            )));
        }
        self.layout.validate()?;
        self.detector.validate()?;
        self.robot.validate()
    }

    /// Generate the seeded field and run the full pipeline on it.
    pub fn run_full(&self, seed: u64) -> Result<MissionOutcome> {
        let grid = FieldGrid::build_field(
            self.field_rows,
            self.field_cols,
            self.cell_pitch,
            self.weed_fraction,
            self.field_seed.unwrap_or(seed),
        )?;
        self.run_on_grid(&grid, seed)
    }

    /// Run the pipeline on an existing field (e.g. one loaded from a map).
    pub fn run_on_grid(&self, grid: &FieldGrid, seed: u64) -> Result<MissionOutcome> {
        self.validate()?;
        let report = survey_field(grid, &self.detector, seed)?;

        let (planned, verdict) = match self.mode {
            MissionMode::MoveThenDwell => (
                plan_move_then_dwell(
                    grid,
                    &report,
                    &self.layout,
                    self.target,
                    self.robot.transit_speed,
                )?,
                None,
            ),
            MissionMode::Continuous => {
                let (plan, verdict) = plan_continuous(
                    grid,
                    &report,
                    &self.layout,
                    self.robot.transit_speed,
                    self.target,
                )?;
                (plan, Some(verdict))
            }
        };

        let executed = self.execute_with_wiggle(&planned, seed);
        let mut post = simulate_plan(grid, &executed, &self.layout)?;
        post.refresh_treated(&self.layout.recipe, self.target);

        let mismatch_events = self.count_mismatches(grid, &planned, &executed);
        let metrics = self.score(grid, &post, &report, &executed, mismatch_events, verdict, seed)?;
        Ok(MissionOutcome {
            metrics,
            planned,
            executed,
            report,
            pre: grid.clone(),
            post,
        })
    }

    /// Metrics-only convenience for batch runs.
    pub fn run(&self, seed: u64) -> Result<MissionMetrics> {
        Ok(self.run_full(seed)?.metrics)
    }

    /// Run one mission per seed across worker threads.
    #[cfg(feature = "parallel")]
    pub fn run_batch(&self, seeds: &[u64]) -> Result<Vec<MissionMetrics>> {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| self.run(s)).collect()
    }

    /// Run one mission per seed on the calling thread.
    #[cfg(not(feature = "parallel"))]
    pub fn run_batch(&self, seeds: &[u64]) -> Result<Vec<MissionMetrics>> {
        self.run_batch_seq(seeds)
    }

    /// Sequential batch runner, kept callable in every build for comparison.
    pub fn run_batch_seq(&self, seeds: &[u64]) -> Result<Vec<MissionMetrics>> {
        seeds.iter().map(|&s| self.run(s)).collect()
    }

    /// Overlay lateral drift on a plan: the y offset random-walks over every
    /// moving segment and, with course correction on, snaps back to zero at
    /// each dwell stop. Drift draws are standard normal scaled by
    /// `wiggle_sigma`, so runs with the same seed and different sigmas see
    /// the same underlying walk.
    fn execute_with_wiggle(&self, plan: &ActivationPlan, seed: u64) -> ActivationPlan {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(RNG_STREAM_WIGGLE);
        let mut y_off = 0.0;
        let steps = plan
            .steps
            .iter()
            .map(|step| {
                let mut executed = step.clone();
                match step.mode {
                    StepMode::Moving(_) => {
                        let distance = step.distance_m();
                        if distance > 0.0 {
                            let z: f64 = rng.sample(StandardNormal);
                            y_off += self.robot.wiggle_sigma * distance.sqrt() * z;
                        }
                        // one offset per segment, applied for its whole dose
                        executed.pose.y += y_off;
                    }
                    StepMode::Dwell => {
                        if self.robot.course_correction {
                            y_off = 0.0;
                        }
                        executed.pose.y += y_off;
                    }
                }
                executed
            })
            .collect();
        ActivationPlan::from_steps(steps, &self.layout)
    }

    /// Count active-source instants whose executed dose landed on a
    /// different cell (or off the field) than planned.
    fn count_mismatches(
        &self,
        grid: &FieldGrid,
        planned: &ActivationPlan,
        executed: &ActivationPlan,
    ) -> usize {
        planned
            .steps
            .iter()
            .zip(&executed.steps)
            .map(|(p, e)| {
                p.active
                    .iter()
                    .filter(|&&src| {
                        grid.cell_at(self.layout.source_center(p.pose, src))
                            != grid.cell_at(self.layout.source_center(e.pose, src))
                    })
                    .count()
            })
            .sum()
    }

    #[allow(clippy::too_many_arguments)]
    fn score(
        &self,
        pre: &FieldGrid,
        post: &FieldGrid,
        report: &DetectionReport,
        executed: &ActivationPlan,
        mismatch_events: usize,
        verdict: Option<FeasibilityVerdict>,
        seed: u64,
    ) -> Result<MissionMetrics> {
        let recipe = &self.layout.recipe;
        let mut total_weeds = 0;
        let mut killed = 0;
        let mut missed = 0;
        let mut underdosed = 0;
        let mut crop_total = 0;
        let mut crop_collateral = 0;
        for cell in post.cells() {
            let lethality = cell.ledger.lethality(recipe);
            match cell.truth {
                CellClass::Weed => {
                    total_weeds += 1;
                    if lethality >= self.target - KILL_EPS {
                        killed += 1;
                    } else if report.reported_at(cell.row, cell.col) == CellClass::Weed {
                        underdosed += 1;
                    } else {
                        missed += 1;
                    }
                }
                CellClass::Crop => {
                    crop_total += 1;
                    if lethality >= self.collateral_threshold {
                        crop_collateral += 1;
                    }
                }
                CellClass::Soil => {}
            }
        }
        debug_assert_eq!(killed + missed + underdosed, total_weeds);
        debug_assert_eq!(pre.weed_count(), total_weeds);

        let weed_kill_fraction = if total_weeds == 0 {
            1.0
        } else {
            killed as f64 / total_weeds as f64
        };
        let collateral_fraction = if crop_total == 0 {
            0.0
        } else {
            crop_collateral as f64 / crop_total as f64
        };
        let tally = &report.tally;
        Ok(MissionMetrics {
            seed,
            total_weeds,
            killed,
            missed,
            underdosed,
            weed_kill_fraction,
            crop_collateral,
            collateral_fraction,
            mismatch_events,
            true_positives: tally.true_positives,
            true_negatives: tally.true_negatives,
            false_positives: tally.false_positives,
            false_negatives: tally.false_negatives,
            detection_accuracy: accuracy(tally)?,
            total_time_s: executed.total_time,
            total_energy_j: executed.total_energy,
            verdict,
        })
    }
}
