//! Scenario files: a TOML description of one mission, with dotted-path
//! command-line overrides and a human-readable resolution summary.
//!
//! Every key is optional; an empty document resolves to the stock
//! configuration (7x15 field and array, 0.102 m pitch, near-IR + UV-A
//! recipe, 98%-diagonal detector, move-then-dwell at 1 km/h).

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::detect::ConfusionSpec;
use crate::dose::DoseRecipe;
use crate::error::{Error, Result};
use crate::field::DEFAULT_CELL_PITCH_M;
use crate::sched::{required_dwell, ArrayLayout};
use crate::sim::{Mission, MissionMode, RobotConfig, DEFAULT_COLLATERAL_THRESHOLD};

/// Parameters accepted by `sweep --axis`.
pub const SWEEP_AXES: &str = "speed, wiggle_sigma, detector, target, cap";

/// Seed count a sweep pads up to when the scenario lists fewer.
pub const SWEEP_MIN_SEEDS: usize = 30;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub field: FieldSection,
    pub recipe: RecipeSection,
    pub layout: LayoutSection,
    pub robot: RobotSection,
    pub detector: DetectorSection,
    pub mission: MissionSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub rows: usize,
    pub cols: usize,
    pub pitch_m: f64,
    pub weed_fraction: f64,
    /// Fix the generated field independent of the run seed.
    pub seed: Option<u64>,
    /// Path to a field-map file; wins over generation when set.
    pub map: Option<String>,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            rows: 7,
            cols: 15,
            pitch_m: DEFAULT_CELL_PITCH_M,
            weed_fraction: 0.2,
            seed: None,
            map: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecipeSection {
    /// "phase1" (near-IR + UV-A, the default) or "phase2" (MWIR + IRID).
    pub preset: Option<String>,
    pub e_near_ir_w_m2: Option<f64>,
    pub e_uva_w_m2: Option<f64>,
    pub k_near_ir: Option<f64>,
    pub k_uva: Option<f64>,
}

impl RecipeSection {
    fn resolve(&self) -> Result<DoseRecipe> {
        let mut recipe = match self.preset.as_deref() {
            None | Some("phase1") => DoseRecipe::phase1(),
            Some("phase2") => DoseRecipe::phase2(),
            Some(other) => {
                return Err(Error::validation(format!(
                    "unknown recipe preset {other:?}; expected \"phase1\" or \"phase2\""
                )))
            }
        };
        let overridden = [
            (&mut recipe.e_near_ir, self.e_near_ir_w_m2),
            (&mut recipe.e_uva, self.e_uva_w_m2),
            (&mut recipe.k_near_ir, self.k_near_ir),
            (&mut recipe.k_uva, self.k_uva),
        ]
        .into_iter()
        .fold(false, |any, (slot, value)| match value {
            Some(v) => {
                *slot = v;
                true
            }
            None => any,
        });
        if overridden {
            recipe.label = format!("{}+custom", recipe.label);
        }
        recipe.validate()?;
        Ok(recipe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutSection {
    pub rows: usize,
    pub cols: usize,
    /// Defaults to the field's cell pitch.
    pub source_pitch_m: Option<f64>,
    pub per_source_power_w: f64,
    pub power_budget_w: f64,
    pub max_simultaneous: Option<usize>,
    pub honor_paper_16: bool,
    pub source_height_m: f64,
    pub camera_lead_m: f64,
}

impl Default for LayoutSection {
    fn default() -> Self {
        let stock = ArrayLayout::default();
        LayoutSection {
            rows: stock.rows,
            cols: stock.cols,
            source_pitch_m: None,
            per_source_power_w: stock.per_source_power,
            power_budget_w: stock.power_budget,
            max_simultaneous: None,
            honor_paper_16: false,
            source_height_m: stock.source_height,
            camera_lead_m: stock.camera_lead,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    /// "perfect", "paper-98", or "paper-95". Defaults to "paper-98".
    pub preset: Option<String>,
    /// Row-stochastic matrix with this diagonal and the remainder split
    /// evenly. Mutually exclusive with `preset`.
    pub diagonal: Option<f64>,
}

impl DetectorSection {
    fn resolve(&self) -> Result<ConfusionSpec> {
        match (&self.preset, self.diagonal) {
            (Some(_), Some(_)) => Err(Error::validation(
                "detector.preset and detector.diagonal are mutually exclusive",
            )),
            (Some(name), None) => ConfusionSpec::preset(name),
            (None, Some(p)) => {
                let spec = ConfusionSpec::with_diagonal(p);
                spec.validate()?;
                Ok(spec)
            }
            (None, None) => Ok(ConfusionSpec::paper_98()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotSection {
    pub transit_speed_mps: f64,
    pub wiggle_sigma: f64,
    pub course_correction: bool,
}

impl Default for RobotSection {
    fn default() -> Self {
        let stock = RobotConfig::default();
        RobotSection {
            transit_speed_mps: stock.transit_speed,
            wiggle_sigma: stock.wiggle_sigma,
            course_correction: stock.course_correction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MissionSection {
    pub mode: MissionMode,
    pub target: f64,
    pub collateral_threshold: f64,
    pub seeds: Vec<u64>,
}

impl Default for MissionSection {
    fn default() -> Self {
        MissionSection {
            mode: MissionMode::MoveThenDwell,
            target: 1.0,
            collateral_threshold: DEFAULT_COLLATERAL_THRESHOLD,
            seeds: vec![0],
        }
    }
}

/// A scenario with every default filled in and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub mission: Mission,
    pub seeds: Vec<u64>,
    /// Field-map path, relative to the scenario file's directory.
    pub map: Option<String>,
}

impl ResolvedScenario {
    pub fn default_seed(&self) -> u64 {
        self.seeds.first().copied().unwrap_or(0)
    }

    /// Seeds a sweep averages over: the configured list, padded to at least
    /// [`SWEEP_MIN_SEEDS`] by replacing short lists with `0..30`.
    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.seeds.len() >= SWEEP_MIN_SEEDS {
            self.seeds.clone()
        } else {
            (0..SWEEP_MIN_SEEDS as u64).collect()
        }
    }

    /// Human-readable resolution report for `validate`.
    pub fn summary(&self) -> Result<String> {
        let m = &self.mission;
        let recipe = &m.layout.recipe;
        let dwell = required_dwell(&m.layout, m.target)?;
        let window = m.layout.cols as f64 * m.layout.source_pitch / m.robot.transit_speed;
        let weed_recall = m
            .detector
            .classes
            .iter()
            .position(|&c| c == crate::field::CellClass::Weed)
            .map(|i| m.detector.matrix[i][i])
            .unwrap_or(0.0);
        let field_desc = match &self.map {
            Some(path) => format!("from map {path}"),
            None => format!(
                "{}x{} cells at {} m pitch, weed fraction {}",
                m.field_rows, m.field_cols, m.cell_pitch, m.weed_fraction
            ),
        };
        Ok(format!(
            "field: {field_desc}\n\
             recipe: {} ({} W/m^2 + {} W/m^2, k = {:e} / {:e})\n\
             array: {}x{} sources, {} W each, {} W budget, cap {}\n\
             detector: weed recall {:.4}\n\
             mode: {}; target lethality {}; {} configured seed(s)\n\
             required dwell per cell: {:.6} s\n\
             pass exposure window at {:.4} m/s: {:.6} s",
            recipe.label,
            recipe.e_near_ir,
            recipe.e_uva,
            recipe.k_near_ir,
            recipe.k_uva,
            m.layout.rows,
            m.layout.cols,
            m.layout.per_source_power,
            m.layout.power_budget,
            m.layout.effective_cap(),
            weed_recall,
            match m.mode {
                MissionMode::MoveThenDwell => "move-then-dwell",
                MissionMode::Continuous => "continuous",
            },
            m.target,
            self.seeds.len(),
            dwell,
            m.robot.transit_speed,
            window,
        ))
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("scenario parse error: {e}")))
    }

    /// Parse with `key.path=value` overrides applied before deserialization.
    pub fn from_toml_str_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::from_toml_str(text);
        }
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::validation(format!("scenario parse error: {e}")))?;
        let mut root = toml::Value::Table(table);
        for (path, raw) in overrides {
            apply_override(&mut root, path, raw)?;
        }
        root.try_into()
            .map_err(|e| Error::validation(format!("scenario parse error: {e}")))
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str_with_overrides(&text, overrides)
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let layout = ArrayLayout {
            rows: self.layout.rows,
            cols: self.layout.cols,
            source_pitch: self.layout.source_pitch_m.unwrap_or(self.field.pitch_m),
            per_source_power: self.layout.per_source_power_w,
            power_budget: self.layout.power_budget_w,
            max_simultaneous: self.layout.max_simultaneous,
            honor_paper_16: self.layout.honor_paper_16,
            recipe: self.recipe.resolve()?,
            source_height: self.layout.source_height_m,
            camera_lead: self.layout.camera_lead_m,
        };
        let mission = Mission {
            field_rows: self.field.rows,
            field_cols: self.field.cols,
            cell_pitch: self.field.pitch_m,
            weed_fraction: self.field.weed_fraction,
            field_seed: self.field.seed,
            layout,
            detector: self.detector.resolve()?,
            robot: RobotConfig {
                transit_speed: self.robot.transit_speed_mps,
                wiggle_sigma: self.robot.wiggle_sigma,
                course_correction: self.robot.course_correction,
            },
            mode: self.mission.mode,
            target: self.mission.target,
            collateral_threshold: self.mission.collateral_threshold,
        };
        mission.validate()?;
        Ok(ResolvedScenario {
            mission,
            seeds: self.mission.seeds.clone(),
            map: self.field.map.clone(),
        })
    }
}

/// Set one dotted-path key in a TOML tree, creating tables along the way.
fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::validation(format!(
            "override path {path:?} has an empty segment"
        )));
    }
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            Error::validation(format!("override path {path:?} crosses a non-table value"))
        })?;
        node = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        Error::validation(format!("override path {path:?} crosses a non-table value"))
    })?;
    table.insert(segments[segments.len() - 1].to_string(), parse_scalar(raw));
    Ok(())
}

/// Interpret an override value as TOML; fall back to a plain string so
/// `detector.preset=perfect` works without shell-quoted quotes.
fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").expect("v was just parsed"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Point one sweepable parameter at a new value.
pub fn apply_axis(mission: &mut Mission, axis: &str, value: &str) -> Result<()> {
    fn num(axis: &str, value: &str) -> Result<f64> {
        value.trim().parse().map_err(|_| {
            Error::validation(format!("axis {axis:?} expects a number, got {value:?}"))
        })
    }
    match axis {
        "speed" => mission.robot.transit_speed = num(axis, value)?,
        "wiggle_sigma" => mission.robot.wiggle_sigma = num(axis, value)?,
        "target" => mission.target = num(axis, value)?,
        "cap" => {
            mission.layout.max_simultaneous = Some(value.trim().parse().map_err(|_| {
                Error::validation(format!("axis \"cap\" expects an integer, got {value:?}"))
            })?)
        }
        "detector" => mission.detector = ConfusionSpec::preset(value.trim())?,
        other => {
            return Err(Error::UnknownAxis {
                axis: other.to_string(),
                known: SWEEP_AXES,
            })
        }
    }
    mission.validate()
}
