//! Dual-band radiant dose and lethality model.
//!
//! Lethality is a clamped linear function of per-band dose integrals:
//!
//! ```text
//! L = min(1, k_near_ir * D_near_ir + k_uva * D_uva),   D_band = integral of E_band dt
//! ```
//!
//! Working over dose integrals instead of constant `E x T` products keeps the
//! model well-defined when sources switch on and off or the array moves; for
//! constant irradiance the two forms coincide. `L` is the fraction of treated
//! plants dead in 30 days and is taken directly as the kill fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lethality coefficient for the near-IR band, per (W/m^2 * s).
pub const K_NEAR_IR_DEFAULT: f64 = 5.5e-6;
/// Default lethality coefficient for the UV-A band, per (W/m^2 * s).
pub const K_UVA_DEFAULT: f64 = 6.5e-5;

/// Default near-IR irradiance for the towed-array recipe, W/m^2.
///
/// The bulb's total output is published but not its near-IR fraction; this
/// default is chosen so the full-lethality dwell lands just under 30 s, the
/// irradiation time the prototype needed in practice. Configurable per scenario.
pub const PHASE1_E_NEAR_IR_W_M2: f64 = 5000.0;
/// UV-A irradiance of one bulb: 11 mW/cm^2 converted to W/m^2.
pub const PHASE1_E_UVA_W_M2: f64 = 110.0;

/// LED end-effector MWIR irradiance: 0.06 W/cm^2 converted to W/m^2.
pub const PHASE2_E_MWIR_W_M2: f64 = 600.0;
/// LED end-effector 450 nm irradiance: 0.85 W/cm^2 converted to W/m^2.
pub const PHASE2_E_IRID_W_M2: f64 = 8500.0;

/// Slack used when comparing accumulated lethality against a target, so a
/// dwell computed by inversion still counts as reaching it after f64 rounding.
pub const KILL_EPS: f64 = 1e-9;

/// Per-band irradiances and lethality coefficients.
///
/// The two band slots are named "near-IR" and "UV-A" after the first recipe;
/// the LED recipe reuses them for MWIR and 450 nm IRID, keeping the same
/// (overridable) coefficients in the absence of a refit for those bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseRecipe {
    pub label: String,
    /// Near-IR (or MWIR) irradiance at the target, W/m^2.
    pub e_near_ir: f64,
    /// UV-A (or 450 nm IRID) irradiance at the target, W/m^2.
    pub e_uva: f64,
    /// Lethality per unit near-IR dose, 1/(W/m^2 * s).
    pub k_near_ir: f64,
    /// Lethality per unit UV-A dose, 1/(W/m^2 * s).
    pub k_uva: f64,
}

impl DoseRecipe {
    pub fn new(label: impl Into<String>, e_near_ir: f64, e_uva: f64) -> Self {
        DoseRecipe {
            label: label.into(),
            e_near_ir,
            e_uva,
            k_near_ir: K_NEAR_IR_DEFAULT,
            k_uva: K_UVA_DEFAULT,
        }
    }

    /// Towed-array dual-band recipe (incandescent bulbs behind reflectors).
    pub fn phase1() -> Self {
        DoseRecipe::new("phase1", PHASE1_E_NEAR_IR_W_M2, PHASE1_E_UVA_W_M2)
    }

    /// LED end-effector recipe: MWIR in the near-IR slot, 450 nm IRID in the
    /// UV-A slot.
    pub fn phase2() -> Self {
        DoseRecipe::new("phase2", PHASE2_E_MWIR_W_M2, PHASE2_E_IRID_W_M2)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("e_near_ir", self.e_near_ir),
            ("e_uva", self.e_uva),
            ("k_near_ir", self.k_near_ir),
            ("k_uva", self.k_uva),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(format!(
                    "recipe {:?}: {name} must be finite and >= 0, got {v}",
                    self.label
                )));
            }
        }
        if self.e_near_ir == 0.0 && self.e_uva == 0.0 {
            return Err(Error::validation(format!(
                "recipe {:?}: at least one band must have positive irradiance",
                self.label
            )));
        }
        Ok(())
    }

    /// Instantaneous lethality rate under simultaneous full-band exposure, 1/s.
    pub fn dose_rate(&self) -> f64 {
        self.k_near_ir * self.e_near_ir + self.k_uva * self.e_uva
    }

    /// Exposure time after which simultaneous-band lethality reaches `target`.
    ///
    /// Inverts the linear model: `t = target / dose_rate`.
    pub fn dwell_time_for_target(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::validation(format!(
                "lethality target must be in (0, 1], got {target}"
            )));
        }
        let rate = self.dose_rate();
        if !(rate > 0.0) {
            return Err(Error::UnreachableTarget(format!(
                "recipe {:?} has zero dose rate",
                self.label
            )));
        }
        Ok(target / rate)
    }
}

/// Per-cell record of accumulated exposure, split by band.
///
/// All fields are non-decreasing; `dose_*` are integral of `E dt` in J/m^2 and
/// `t_*` count the seconds during which the band's irradiance was positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExposureLedger {
    pub t_near_ir: f64,
    pub t_uva: f64,
    pub dose_near_ir: f64,
    pub dose_uva: f64,
}

impl ExposureLedger {
    pub fn is_empty(&self) -> bool {
        self.dose_near_ir == 0.0 && self.dose_uva == 0.0
    }

    /// Add `dt` seconds of exposure under `recipe`.
    pub fn accumulate(&mut self, recipe: &DoseRecipe, dt: f64) -> Result<()> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::validation(format!(
                "exposure duration must be finite and >= 0, got {dt}"
            )));
        }
        self.dose_near_ir += recipe.e_near_ir * dt;
        self.dose_uva += recipe.e_uva * dt;
        if recipe.e_near_ir > 0.0 {
            self.t_near_ir += dt;
        }
        if recipe.e_uva > 0.0 {
            self.t_uva += dt;
        }
        Ok(())
    }

    /// Nominal lethality in [0, 1] for the accumulated dose under `recipe`'s
    /// coefficients. Zero for an empty ledger.
    pub fn lethality(&self, recipe: &DoseRecipe) -> f64 {
        let raw = recipe.k_near_ir * self.dose_near_ir + recipe.k_uva * self.dose_uva;
        raw.clamp(0.0, 1.0)
    }
}
