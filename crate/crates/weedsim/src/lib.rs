//! Deterministic simulator and scheduler for a directed-energy weeding
//! platform: a robot carries a grid of radiant sources over a planted field,
//! a camera classifies each cell, and a planner decides which sources to
//! fire, where, and for how long — under a hard power budget.
//!
//! The crate is organized as a pipeline:
//!
//! * [`field`] — the world: cell grid, ground-truth classes, poses.
//! * [`dose`] — radiant exposure bookkeeping and the lethality model.
//! * [`detect`] — stochastic per-cell classification and its statistics.
//! * [`sched`] — activation planning under the simultaneous-source cap.
//! * [`sim`] — seeded end-to-end missions and their metrics.
//! * [`scenario`] — TOML mission descriptions with CLI-style overrides.
//!
//! Every stochastic stage is reproducible: one mission seed feeds three
//! decorrelated RNG streams (field, detection, drift), so any run can be
//! replayed bit-for-bit.
//!
//! ```
//! use weedsim::scenario::Scenario;
//!
//! let mission = Scenario::from_toml_str("")?.resolve()?.mission;
//! let metrics = mission.run(42)?;
//! assert_eq!(
//!     metrics.killed + metrics.missed + metrics.underdosed,
//!     metrics.total_weeds,
//! );
//! # Ok::<(), weedsim::Error>(())
//! ```

pub mod detect;
pub mod dose;
pub mod error;
pub mod field;
pub mod scenario;
pub mod sched;
pub mod sim;

pub use detect::{accuracy, mean_accuracy, survey_field, ConfusionSpec, DetectionReport};
pub use dose::{DoseRecipe, ExposureLedger, KILL_EPS};
pub use error::{Error, Result};
pub use field::{CellClass, FieldGrid, WorldPose};
pub use scenario::{ResolvedScenario, Scenario};
pub use sched::{
    plan_continuous, plan_move_then_dwell, required_dwell, simulate_plan, ActivationPlan,
    ActivationStep, ArrayLayout, FeasibilityVerdict, StepMode,
};
pub use sim::{
    aggregate_runs, metrics_to_csv, sweep_to_csv, Mission, MissionMetrics, MissionMode,
    MissionOutcome, RobotConfig, SweepRow,
};
