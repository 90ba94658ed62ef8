//! Power-constrained activation planning.
//!
//! Two planners share one geometric model: the source array translates along
//! the field's column axis, and each source treats exactly the cell beneath
//! its center. The move-then-dwell planner pauses the array over detected
//! weeds and fires cap-sized batches for a computed dwell; the continuous
//! planner keeps the array rolling and switches each passing source on over
//! reported weeds, reporting whether the pass is long enough to reach the
//! lethality target. A guarded exhaustive oracle bounds the greedy planner's
//! suboptimality in tests.
//!
//! Travel convention: the array origin traverses from fully before the field
//! (`x = -array_width`) to fully past it (`x = field_width`), so total travel
//! distance is the same for every plan over a given field.

use serde::{Deserialize, Serialize};

use crate::detect::{csv_io, DetectionReport};
use crate::dose::{DoseRecipe, KILL_EPS};
use crate::error::{Error, Result};
use crate::field::{FieldGrid, WorldPose};

pub const DEFAULT_PER_SOURCE_POWER_W: f64 = 410.0;
pub const DEFAULT_POWER_BUDGET_W: f64 = 6400.0;
/// Reflectors sit 6 inches above the ground.
pub const DEFAULT_SOURCE_HEIGHT_M: f64 = 0.1524;
/// Cameras are mounted on the front bar, ahead of the sources.
pub const DEFAULT_CAMERA_LEAD_M: f64 = 0.5;
/// 1 km/h, the only speed the platform is rated for.
pub const DEFAULT_TRANSIT_SPEED_MPS: f64 = 1000.0 / 3600.0;

/// Source bank geometry, power limits, and the recipe it emits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub rows: usize,
    pub cols: usize,
    /// Center-to-center source spacing, meters. Planning assumes it equals
    /// the field's cell pitch (one source per cell).
    pub source_pitch: f64,
    pub per_source_power: f64,
    pub power_budget: f64,
    /// Explicit simultaneous-activation cap. `None` derives
    /// `floor(power_budget / per_source_power)`.
    pub max_simultaneous: Option<usize>,
    /// The published spec sheet allows 16 simultaneous sources even though
    /// 16 x 410 W exceeds the 6400 W budget. Setting this flag reproduces
    /// that figure; otherwise the budget-derived cap of 15 applies.
    pub honor_paper_16: bool,
    pub recipe: DoseRecipe,
    pub source_height: f64,
    pub camera_lead: f64,
}

impl Default for ArrayLayout {
    fn default() -> Self {
        ArrayLayout {
            rows: 7,
            cols: 15,
            source_pitch: crate::field::DEFAULT_CELL_PITCH_M,
            per_source_power: DEFAULT_PER_SOURCE_POWER_W,
            power_budget: DEFAULT_POWER_BUDGET_W,
            max_simultaneous: None,
            honor_paper_16: false,
            recipe: DoseRecipe::phase1(),
            source_height: DEFAULT_SOURCE_HEIGHT_M,
            camera_lead: DEFAULT_CAMERA_LEAD_M,
        }
    }
}

impl ArrayLayout {
    pub fn source_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Cap on simultaneously active sources.
    pub fn effective_cap(&self) -> usize {
        match self.max_simultaneous {
            Some(n) => n,
            None if self.honor_paper_16 => 16,
            None => (self.power_budget / self.per_source_power).floor() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::validation(format!(
                "array must have at least one source, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !(self.source_pitch > 0.0) {
            return Err(Error::validation(format!(
                "source pitch must be positive, got {}",
                self.source_pitch
            )));
        }
        if !(self.per_source_power > 0.0) || !(self.power_budget > 0.0) {
            return Err(Error::validation(
                "per-source power and power budget must be positive",
            ));
        }
        let cap = self.effective_cap();
        if cap < 1 {
            return Err(Error::validation(format!(
                "activation cap is {cap}; budget {} W cannot power one {} W source",
                self.power_budget, self.per_source_power
            )));
        }
        if cap as f64 * self.per_source_power > self.power_budget && !self.honor_paper_16 {
            return Err(Error::validation(format!(
                "cap {cap} x {} W = {} W exceeds the {} W budget; set honor_paper_16 \
                 to acknowledge the published 16-source figure",
                self.per_source_power,
                cap as f64 * self.per_source_power,
                self.power_budget
            )));
        }
        if !(self.source_height > 0.0) || self.camera_lead < 0.0 {
            return Err(Error::validation(
                "source height must be positive and camera lead non-negative",
            ));
        }
        self.recipe.validate()
    }

    pub fn source_index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn source_row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// World position of a source center with the array origin at `pose`.
    pub fn source_center(&self, pose: WorldPose, index: usize) -> WorldPose {
        let (row, col) = self.source_row_col(index);
        WorldPose::new(
            pose.x + (col as f64 + 0.5) * self.source_pitch,
            pose.y + (row as f64 + 0.5) * self.source_pitch,
            pose.heading,
        )
    }
}

/// Per-cell dwell required to reach `target` lethality under the layout's recipe.
pub fn required_dwell(layout: &ArrayLayout, target: f64) -> Result<f64> {
    layout.recipe.dwell_time_for_target(target)
}

/// Whether the array is holding position or rolling during a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepMode {
    Dwell,
    /// Constant translation along +x at the given speed, m/s.
    Moving(f64),
}

impl StepMode {
    fn encode(&self) -> String {
        match self {
            StepMode::Dwell => "dwell".into(),
            StepMode::Moving(v) => format!("moving:{v}"),
        }
    }
}

/// One scheduled interval: which sources are on, for how long, at what pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationStep {
    /// Active source indices, sorted ascending.
    pub active: Vec<usize>,
    pub duration: f64,
    pub pose: WorldPose,
    pub mode: StepMode,
}

impl ActivationStep {
    pub fn energy_j(&self, layout: &ArrayLayout) -> f64 {
        self.active.len() as f64 * layout.per_source_power * self.duration
    }

    /// Ground distance the array covers during this step.
    pub fn distance_m(&self) -> f64 {
        match self.mode {
            StepMode::Dwell => 0.0,
            StepMode::Moving(v) => v * self.duration,
        }
    }
}

/// Ordered activation schedule with precomputed totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationPlan {
    pub steps: Vec<ActivationStep>,
    pub total_time: f64,
    pub total_energy: f64,
}

impl ActivationPlan {
    pub fn from_steps(steps: Vec<ActivationStep>, layout: &ArrayLayout) -> Self {
        let total_time = steps.iter().map(|s| s.duration).sum();
        let total_energy = steps.iter().map(|s| s.energy_j(layout)).sum();
        ActivationPlan {
            steps,
            total_time,
            total_energy,
        }
    }

    /// Sum of dwell-step durations (excludes travel).
    pub fn dwell_time(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.mode == StepMode::Dwell)
            .map(|s| s.duration)
            .sum()
    }

    pub fn activation_steps(&self) -> impl Iterator<Item = &ActivationStep> {
        self.steps.iter().filter(|s| !s.active.is_empty())
    }

    pub fn validate(&self, layout: &ArrayLayout) -> Result<()> {
        layout.validate()?;
        let cap = layout.effective_cap();
        for (i, step) in self.steps.iter().enumerate() {
            if !(step.duration > 0.0) {
                return Err(Error::validation(format!(
                    "step {i}: duration must be positive, got {}",
                    step.duration
                )));
            }
            if step.active.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(format!(
                    "step {i}: active set must be sorted and unique"
                )));
            }
            if let Some(&max) = step.active.last() {
                if max >= layout.source_count() {
                    return Err(Error::validation(format!(
                        "step {i}: source index {max} out of range for a {}x{} array",
                        layout.rows, layout.cols
                    )));
                }
            }
            if step.active.len() > cap {
                return Err(Error::validation(format!(
                    "step {i}: {} active sources exceed the cap of {cap}",
                    step.active.len()
                )));
            }
            let draw = step.active.len() as f64 * layout.per_source_power;
            if draw > layout.power_budget && !layout.honor_paper_16 {
                return Err(Error::validation(format!(
                    "step {i}: draw {draw} W exceeds the {} W budget",
                    layout.power_budget
                )));
            }
        }
        let time: f64 = self.steps.iter().map(|s| s.duration).sum();
        let energy: f64 = self.steps.iter().map(|s| s.energy_j(layout)).sum();
        if (time - self.total_time).abs() > 1e-9 * time.max(1.0)
            || (energy - self.total_energy).abs() > 1e-9 * energy.max(1.0)
        {
            return Err(Error::validation(
                "plan totals are inconsistent with its steps",
            ));
        }
        Ok(())
    }

    pub fn csv_rows(&self, layout: &ArrayLayout) -> Vec<PlanCsvRow> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, step)| PlanCsvRow {
                step_index: i,
                mode: step.mode.encode(),
                pose_x: step.pose.x,
                pose_y: step.pose.y,
                duration_s: step.duration,
                active_source_indices: step
                    .active
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                step_energy_j: step.energy_j(layout),
            })
            .collect()
    }

    pub fn to_csv(&self, layout: &ArrayLayout) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.csv_rows(layout) {
            w.serialize(row).map_err(csv_io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<PlanCsvRow>> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        reader
            .deserialize()
            .collect::<std::result::Result<Vec<PlanCsvRow>, _>>()
            .map_err(csv_io)
    }
}

/// One row of the plan/activation-log CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCsvRow {
    pub step_index: usize,
    pub mode: String,
    pub pose_x: f64,
    pub pose_y: f64,
    pub duration_s: f64,
    pub active_source_indices: String,
    pub step_energy_j: f64,
}

/// Continuous-mode outcome: can a pass at this speed reach the target?
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    /// Time one cell spends under the passing source column.
    pub window_s: f64,
    pub required_dwell_s: f64,
    /// Earliest instant where weed demand exceeded the activation cap.
    pub cap_violation: Option<CapViolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapViolation {
    pub time_s: f64,
    pub demand: usize,
}

impl std::fmt::Display for FeasibilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.feasible {
            return write!(f, "feasible");
        }
        write!(f, "infeasible:")?;
        if self.window_s < self.required_dwell_s {
            write!(
                f,
                " window {:.3} s < required dwell {:.3} s",
                self.window_s, self.required_dwell_s
            )?;
        }
        if let Some(v) = self.cap_violation {
            write!(f, " demand {} exceeds cap at t={:.3} s", v.demand, v.time_s)?;
        }
        Ok(())
    }
}

/// Reported-weed cells grouped for planning, with reachability checked.
struct PlanningInput {
    /// (row, col) of reported weeds, row-major order.
    weeds: Vec<(usize, usize)>,
    /// Largest admissible array column offset.
    max_offset: usize,
    dwell: f64,
}

fn planning_input(
    grid: &FieldGrid,
    report: &DetectionReport,
    layout: &ArrayLayout,
    target: f64,
) -> Result<PlanningInput> {
    layout.validate()?;
    if !report.covers(grid) {
        return Err(Error::validation(
            "detection report does not cover the grid",
        ));
    }
    if (layout.source_pitch - grid.pitch_m()).abs() > 1e-12 {
        return Err(Error::validation(format!(
            "source pitch {} differs from cell pitch {}; planning assumes one source per cell",
            layout.source_pitch,
            grid.pitch_m()
        )));
    }
    let weeds = report.reported_weed_cells();
    let unreachable: Vec<(usize, usize)> = weeds
        .iter()
        .filter(|&&(r, _)| r >= layout.rows)
        .copied()
        .collect();
    if !unreachable.is_empty() {
        return Err(Error::UnreachableCells(unreachable));
    }
    Ok(PlanningInput {
        weeds,
        max_offset: grid.cols().saturating_sub(layout.cols),
        dwell: required_dwell(layout, target)?,
    })
}

/// Array-origin x where the traverse starts (array fully before the field).
fn traverse_start_x(layout: &ArrayLayout) -> f64 {
    -(layout.cols as f64) * layout.source_pitch
}

/// Array-origin x where the traverse ends (array fully past the field).
fn traverse_end_x(grid: &FieldGrid) -> f64 {
    grid.cols() as f64 * grid.pitch_m()
}

fn moving_step(from_x: f64, to_x: f64, speed: f64) -> Option<ActivationStep> {
    let distance = to_x - from_x;
    if distance <= 0.0 {
        return None;
    }
    Some(ActivationStep {
        active: Vec::new(),
        duration: distance / speed,
        pose: WorldPose::new(from_x, 0.0, 0.0),
        mode: StepMode::Moving(speed),
    })
}

/// Assemble a dwell plan from per-stop weed groups (offsets ascending).
fn assemble_dwell_plan(
    stops: &[(usize, Vec<(usize, usize)>)],
    grid: &FieldGrid,
    layout: &ArrayLayout,
    dwell: f64,
    transit_speed: f64,
) -> ActivationPlan {
    let cap = layout.effective_cap();
    let pitch = layout.source_pitch;
    let mut steps = Vec::new();
    let mut x = traverse_start_x(layout);
    for &(offset, ref cells) in stops {
        let stop_x = offset as f64 * pitch;
        steps.extend(moving_step(x, stop_x, transit_speed));
        x = stop_x;
        let pose = WorldPose::new(stop_x, 0.0, 0.0);
        for batch in cells.chunks(cap) {
            let mut active: Vec<usize> = batch
                .iter()
                .map(|&(r, c)| layout.source_index(r, c - offset))
                .collect();
            active.sort_unstable();
            steps.push(ActivationStep {
                active,
                duration: dwell,
                pose,
                mode: StepMode::Dwell,
            });
        }
    }
    steps.extend(moving_step(x, traverse_end_x(grid), transit_speed));
    ActivationPlan::from_steps(steps, layout)
}

/// Move-then-dwell planner.
///
/// Stops are chosen greedily left to right: the array's leading edge is
/// aligned with the leftmost not-yet-covered weed column (clamped to the
/// field edge), and every reported weed under the footprint is treated at
/// that stop, batched row-major into cap-sized groups, each fired for the
/// full required dwell. Travel between stops runs at `transit_speed`, and the
/// plan always traverses the whole field.
pub fn plan_move_then_dwell(
    grid: &FieldGrid,
    report: &DetectionReport,
    layout: &ArrayLayout,
    target: f64,
    transit_speed: f64,
) -> Result<ActivationPlan> {
    if !(transit_speed > 0.0) {
        return Err(Error::validation(format!(
            "transit speed must be positive, got {transit_speed}"
        )));
    }
    let input = planning_input(grid, report, layout, target)?;

    // greedy interval cover over weed columns; each weed joins its first stop
    let mut by_col = input.weeds.clone();
    by_col.sort_unstable_by_key(|&(r, c)| (c, r));
    let mut stops: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for &(r, c) in &by_col {
        let covered = stops
            .last()
            .map(|&(q, _)| c >= q && c < q + layout.cols)
            .unwrap_or(false);
        if !covered {
            stops.push((c.min(input.max_offset), Vec::new()));
        }
        stops.last_mut().expect("stop just ensured").1.push((r, c));
    }
    for (_, cells) in &mut stops {
        cells.sort_unstable(); // batch in row-major order
    }
    Ok(assemble_dwell_plan(
        &stops,
        grid,
        layout,
        input.dwell,
        transit_speed,
    ))
}

/// Continuous-motion planner.
///
/// The array rolls at constant `speed`; at each cell-width alignment the
/// sources sitting over reported weeds switch on for the alignment's
/// duration. When more weeds sit under the footprint than the cap allows,
/// the active set is truncated (lowest source indices win) so the emitted
/// plan never violates the power constraint, and the verdict records the
/// bottleneck instant.
pub fn plan_continuous(
    grid: &FieldGrid,
    report: &DetectionReport,
    layout: &ArrayLayout,
    speed: f64,
    target: f64,
) -> Result<(ActivationPlan, FeasibilityVerdict)> {
    if !(speed > 0.0) {
        return Err(Error::validation(format!(
            "speed must be positive, got {speed}"
        )));
    }
    let input = planning_input(grid, report, layout, target)?;
    let cap = layout.effective_cap();
    let pitch = layout.source_pitch;
    let segment = pitch / speed;
    let window = layout.cols as f64 * pitch / speed;

    let is_weed = |r: usize, c: i64| -> bool {
        c >= 0
            && (c as usize) < grid.cols()
            && report.reported_at(r, c as usize) == crate::field::CellClass::Weed
    };

    let mut steps = Vec::new();
    let mut cap_violation: Option<CapViolation> = None;
    let mut elapsed = 0.0;
    for m in -(layout.cols as i64)..grid.cols() as i64 {
        let mut active = Vec::new();
        for row in 0..layout.rows.min(grid.rows()) {
            for j in 0..layout.cols {
                if is_weed(row, m + j as i64) {
                    active.push(layout.source_index(row, j));
                }
            }
        }
        active.sort_unstable();
        if active.len() > cap {
            if cap_violation.is_none() {
                cap_violation = Some(CapViolation {
                    time_s: elapsed,
                    demand: active.len(),
                });
            }
            active.truncate(cap);
        }
        steps.push(ActivationStep {
            active,
            duration: segment,
            pose: WorldPose::new(m as f64 * pitch, 0.0, 0.0),
            mode: StepMode::Moving(speed),
        });
        elapsed += segment;
    }

    let verdict = FeasibilityVerdict {
        feasible: cap_violation.is_none() && window >= input.dwell - KILL_EPS,
        window_s: window,
        required_dwell_s: input.dwell,
        cap_violation,
    };
    Ok((ActivationPlan::from_steps(steps, layout), verdict))
}

/// Exhaustive minimum-time planner for small instances. Test oracle.
///
/// Searches every assignment of reported weeds to covering stop offsets with
/// branch-and-bound (the partial batch count only grows, so any partial cost
/// at or above the incumbent prunes). Ties between equal-cost plans resolve
/// to the lexicographically smallest assignment vector, making the result
/// deterministic regardless of search order internals.
pub fn brute_force_plan(
    grid: &FieldGrid,
    report: &DetectionReport,
    layout: &ArrayLayout,
    target: f64,
    transit_speed: f64,
) -> Result<ActivationPlan> {
    if !(transit_speed > 0.0) {
        return Err(Error::validation(format!(
            "transit speed must be positive, got {transit_speed}"
        )));
    }
    let input = planning_input(grid, report, layout, target)?;
    let n_weeds = input.weeds.len();
    let n_offsets = input.max_offset + 1;
    if n_weeds > 12 {
        return Err(Error::InstanceTooLarge(format!(
            "{n_weeds} reported weeds (oracle guard: 12)"
        )));
    }
    if n_offsets > 6 {
        return Err(Error::InstanceTooLarge(format!(
            "{n_offsets} candidate stop positions (oracle guard: 6)"
        )));
    }

    if n_weeds == 0 {
        return Ok(assemble_dwell_plan(&[], grid, layout, input.dwell, transit_speed));
    }

    let cap = layout.effective_cap();
    // covering offsets per weed, ascending
    let choices: Vec<Vec<usize>> = input
        .weeds
        .iter()
        .map(|&(_, c)| {
            (0..n_offsets)
                .filter(|&q| c >= q && c < q + layout.cols)
                .collect()
        })
        .collect();

    struct Search<'a> {
        choices: &'a [Vec<usize>],
        cap: usize,
        counts: Vec<usize>,
        assignment: Vec<usize>,
        best_cost: usize,
        best_assignment: Option<Vec<usize>>,
    }

    impl Search<'_> {
        fn cost(&self) -> usize {
            self.counts.iter().map(|&w| w.div_ceil(self.cap)).sum()
        }

        fn dfs(&mut self, weed: usize) {
            if self.cost() >= self.best_cost {
                return; // adding weeds never lowers the batch count
            }
            if weed == self.choices.len() {
                self.best_cost = self.cost();
                self.best_assignment = Some(self.assignment.clone());
                return;
            }
            for &q in &self.choices[weed] {
                self.counts[q] += 1;
                self.assignment.push(q);
                self.dfs(weed + 1);
                self.assignment.pop();
                self.counts[q] -= 1;
            }
        }
    }

    let mut search = Search {
        choices: &choices,
        cap,
        counts: vec![0; n_offsets],
        assignment: Vec::with_capacity(n_weeds),
        best_cost: usize::MAX,
        best_assignment: None,
    };
    search.dfs(0);
    let assignment = search.best_assignment.expect("every weed column is coverable");

    let mut stops: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    let mut offsets: Vec<usize> = assignment.clone();
    offsets.sort_unstable();
    offsets.dedup();
    for q in offsets {
        let mut cells: Vec<(usize, usize)> = input
            .weeds
            .iter()
            .zip(&assignment)
            .filter(|&(_, &a)| a == q)
            .map(|(&cell, _)| cell)
            .collect();
        cells.sort_unstable();
        stops.push((q, cells));
    }
    Ok(assemble_dwell_plan(
        &stops,
        grid,
        layout,
        input.dwell,
        transit_speed,
    ))
}

/// Apply a plan to a copy of the grid and return the treated field.
///
/// Every cell under an active source's center accumulates the layout recipe
/// for the step duration, whatever its ground truth; collateral dose on crop
/// cells is counted by the mission metrics downstream.
pub fn simulate_plan(
    grid: &FieldGrid,
    plan: &ActivationPlan,
    layout: &ArrayLayout,
) -> Result<FieldGrid> {
    plan.validate(layout)?;
    let mut post = grid.clone();
    for step in &plan.steps {
        for &source in &step.active {
            let center = layout.source_center(step.pose, source);
            if let Some((r, c)) = post.cell_at(center) {
                post.cell_mut(r, c).ledger.accumulate(&layout.recipe, step.duration)?;
            }
        }
    }
    Ok(post)
}
