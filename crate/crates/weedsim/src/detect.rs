//! Stochastic stand-in for the CNN weed classifier.
//!
//! The trained networks themselves are out of scope; detection quality enters
//! the simulation as a row-stochastic confusion matrix. Presets carry the
//! reported 95% and 98% accuracy figures so missions can quantify how
//! classifier quality propagates to weeding outcomes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CellClass, FieldGrid};

/// Keeps the survey draw stream decorrelated from field generation when both
/// are keyed by the same mission seed.
const RNG_STREAM_DETECT: u64 = 1;

/// Row-stochastic confusion matrix: entry `(i, j)` is the probability that
/// truth class `i` is reported as class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSpec {
    pub classes: Vec<CellClass>,
    pub matrix: Vec<Vec<f64>>,
}

impl ConfusionSpec {
    pub fn new(classes: Vec<CellClass>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let spec = ConfusionSpec { classes, matrix };
        spec.validate()?;
        Ok(spec)
    }

    /// Identity matrix over all three classes.
    pub fn perfect() -> Self {
        Self::with_diagonal(1.0)
    }

    /// Diagonal 0.98, matching the best reported classification accuracy.
    pub fn paper_98() -> Self {
        Self::with_diagonal(0.98)
    }

    /// Diagonal 0.95, matching the accuracy most tested networks exceeded.
    pub fn paper_95() -> Self {
        Self::with_diagonal(0.95)
    }

    /// Diagonal `p`, off-diagonal mass split evenly among the wrong classes.
    pub fn with_diagonal(p: f64) -> Self {
        let classes = CellClass::ALL.to_vec();
        let n = classes.len();
        let off = (1.0 - p) / (n as f64 - 1.0);
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { p } else { off }).collect())
            .collect();
        ConfusionSpec { classes, matrix }
    }

    /// Resolve a named preset: `perfect`, `paper-98` or `paper-95`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "perfect" => Ok(Self::perfect()),
            "paper-98" => Ok(Self::paper_98()),
            "paper-95" => Ok(Self::paper_95()),
            other => Err(Error::validation(format!(
                "unknown detector preset {other:?} (known: perfect, paper-98, paper-95)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.classes.len();
        if n == 0 {
            return Err(Error::validation("confusion matrix has no classes"));
        }
        if self.matrix.len() != n {
            return Err(Error::validation(format!(
                "confusion matrix must be square: {} classes, {} rows",
                n,
                self.matrix.len()
            )));
        }
        for (i, row) in self.matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "confusion matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::validation(format!(
                    "confusion matrix row {i} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "confusion matrix row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    fn class_index(&self, class: CellClass) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| {
                Error::validation(format!("truth class {class:?} absent from confusion spec"))
            })
    }

    /// Sample the reported class for a cell of true class `truth`.
    pub fn classify_cell(&self, truth: CellClass, rng: &mut impl Rng) -> Result<CellClass> {
        let row = &self.matrix[self.class_index(truth)?];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(self.classes[j]);
            }
        }
        // row sums to 1 within tolerance; absorb the rounding residue
        Ok(*self.classes.last().expect("validated non-empty"))
    }
}

/// Binary outcome counts with weed as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationTally {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ClassificationTally {
    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }

    fn record(&mut self, truth: CellClass, reported: CellClass) {
        let truth_pos = truth == CellClass::Weed;
        let reported_pos = reported == CellClass::Weed;
        match (truth_pos, reported_pos) {
            (true, true) => self.true_positives += 1,
            (false, false) => self.true_negatives += 1,
            (false, true) => self.false_positives += 1,
            (true, false) => self.false_negatives += 1,
        }
    }
}

/// Classification accuracy `(TP + TN) / (TP + TN + FP + FN)`.
pub fn accuracy(t: &ClassificationTally) -> Result<f64> {
    let total = t.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("accuracy of an empty tally"));
    }
    Ok((t.true_positives + t.true_negatives) as f64 / total as f64)
}

/// Arithmetic mean of per-run accuracies.
pub fn mean_accuracy(runs: &[f64]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::UndefinedMetric("mean accuracy of zero runs"));
    }
    Ok(runs.iter().sum::<f64>() / runs.len() as f64)
}

/// Outcome of classifying every cell of a field once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    rows: usize,
    cols: usize,
    /// Reported class per cell, row-major.
    pub reported: Vec<CellClass>,
    pub tally: ClassificationTally,
    pub seed: u64,
}

impl DetectionReport {
    pub fn reported_at(&self, row: usize, col: usize) -> CellClass {
        self.reported[row * self.cols + col]
    }

    pub fn covers(&self, grid: &FieldGrid) -> bool {
        self.rows == grid.rows() && self.cols == grid.cols()
    }

    /// Row-major `(row, col)` of every cell reported as weed.
    pub fn reported_weed_cells(&self) -> Vec<(usize, usize)> {
        self.reported
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == CellClass::Weed)
            .map(|(i, _)| (i / self.cols, i % self.cols))
            .collect()
    }
}

/// Classify every cell of `grid` independently, reproducibly from `seed`.
pub fn survey_field(grid: &FieldGrid, spec: &ConfusionSpec, seed: u64) -> Result<DetectionReport> {
    if grid.is_empty() {
        return Err(Error::validation("cannot survey an empty grid"));
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(RNG_STREAM_DETECT);
    let mut reported = Vec::with_capacity(grid.len());
    let mut tally = ClassificationTally::default();
    for cell in grid.cells() {
        let r = spec.classify_cell(cell.truth, &mut rng)?;
        tally.record(cell.truth, r);
        reported.push(r);
    }
    Ok(DetectionReport {
        rows: grid.rows(),
        cols: grid.cols(),
        reported,
        tally,
        seed,
    })
}

/// Render a report as CSV with columns `row,col,truth,reported`.
pub fn detection_csv(grid: &FieldGrid, report: &DetectionReport) -> Result<String> {
    if !report.covers(grid) {
        return Err(Error::validation(
            "detection report does not cover the grid",
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "col", "truth", "reported"])
        .map_err(csv_io)?;
    for cell in grid.cells() {
        w.write_record([
            cell.row.to_string(),
            cell.col.to_string(),
            cell.truth.code().to_string(),
            report.reported_at(cell.row, cell.col).code().to_string(),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::validation(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_matrix_reports_truth() {
        let spec = ConfusionSpec::perfect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for truth in CellClass::ALL {
            for _ in 0..100 {
                assert_eq!(spec.classify_cell(truth, &mut rng).unwrap(), truth);
            }
        }
    }

    #[test]
    fn weed_recall_converges_to_diagonal() {
        let spec = ConfusionSpec::paper_98();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| spec.classify_cell(CellClass::Weed, &mut rng).unwrap() == CellClass::Weed)
            .count();
        let recall = hits as f64 / n as f64;
        assert!(
            (recall - 0.98).abs() <= 0.005,
            "weed recall {recall} outside 0.98 +/- 0.005"
        );
    }

    #[test]
    fn point_mass_row_always_reports_soil() {
        let spec = ConfusionSpec::new(
            CellClass::ALL.to_vec(),
            vec![
                vec![0.0, 0.0, 1.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            assert_eq!(
                spec.classify_cell(CellClass::Weed, &mut rng).unwrap(),
                CellClass::Soil
            );
        }
    }

    #[test]
    fn classify_rejects_absent_class() {
        let spec = ConfusionSpec::new(
            vec![CellClass::Weed, CellClass::Crop],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(spec.classify_cell(CellClass::Soil, &mut rng).is_err());
    }

    #[test]
    fn sampling_frequencies_fit_matrix_rows() {
        // Chi-squared goodness of fit per truth row, df = 2, alpha = 1e-3.
        const CHI2_CRIT_DF2: f64 = 13.816;
        let spec = ConfusionSpec::paper_95();
        let n = 100_000usize;
        for (i, truth) in CellClass::ALL.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
            let mut counts = [0usize; 3];
            for _ in 0..n {
                let r = spec.classify_cell(truth, &mut rng).unwrap();
                let j = CellClass::ALL.iter().position(|&c| c == r).unwrap();
                counts[j] += 1;
            }
            let chi2: f64 = counts
                .iter()
                .zip(&spec.matrix[i])
                .map(|(&obs, &p)| {
                    let exp = p * n as f64;
                    (obs as f64 - exp).powi(2) / exp
                })
                .sum();
            assert!(chi2 < CHI2_CRIT_DF2, "row {i}: chi2 = {chi2}");
        }
    }

    #[test]
    fn accuracy_examples() {
        let t = ClassificationTally {
            true_positives: 9,
            true_negatives: 9,
            false_positives: 1,
            false_negatives: 1,
        };
        assert_eq!(accuracy(&t).unwrap(), 0.9);

        let all_neg = ClassificationTally {
            true_negatives: 57,
            ..Default::default()
        };
        assert_eq!(accuracy(&all_neg).unwrap(), 1.0);

        // 600-image test set split: (294 + 288) / 600 = 0.97
        let test_set = ClassificationTally {
            true_positives: 294,
            true_negatives: 288,
            false_positives: 12,
            false_negatives: 6,
        };
        assert_eq!(accuracy(&test_set).unwrap(), 0.97);

        assert!(accuracy(&ClassificationTally::default()).is_err());
    }

    #[test]
    fn mean_accuracy_examples() {
        assert_eq!(mean_accuracy(&[0.9]).unwrap(), 0.9);
        approx::assert_abs_diff_eq!(
            mean_accuracy(&[0.98; 10]).unwrap(),
            0.98,
            epsilon = 1e-12
        );
        assert_eq!(mean_accuracy(&[0.96, 0.98]).unwrap(), 0.97);
        assert!(mean_accuracy(&[]).is_err());
    }

    #[test]
    fn survey_perfect_spec_has_no_errors() {
        let grid = FieldGrid::build_field(7, 15, 0.102, 0.4, 5).unwrap();
        let report = survey_field(&grid, &ConfusionSpec::perfect(), 1).unwrap();
        assert_eq!(report.tally.false_positives, 0);
        assert_eq!(report.tally.false_negatives, 0);
        assert_eq!(report.tally.total(), 105);
    }

    #[test]
    fn survey_all_weed_grid_false_negatives_in_poisson_bounds() {
        // 105 weeds at recall 0.98: expected FN = 2.1; the 99% Poisson
        // envelope for lambda = 2.1 is [0, 7].
        let grid = FieldGrid::build_field(7, 15, 0.102, 1.0, 3).unwrap();
        let report = survey_field(&grid, &ConfusionSpec::paper_98(), 17).unwrap();
        assert!(
            report.tally.false_negatives <= 7,
            "FN = {}",
            report.tally.false_negatives
        );
    }

    #[test]
    fn survey_no_weeds_perfect_specificity_schedules_nothing() {
        let grid = FieldGrid::build_field(3, 5, 0.102, 0.0, 4).unwrap();
        let report = survey_field(&grid, &ConfusionSpec::perfect(), 2).unwrap();
        assert!(report.reported_weed_cells().is_empty());
    }

    #[test]
    fn survey_is_seed_deterministic() {
        let grid = FieldGrid::build_field(5, 9, 0.102, 0.5, 21).unwrap();
        let spec = ConfusionSpec::paper_95();
        let a = survey_field(&grid, &spec, 99).unwrap();
        let b = survey_field(&grid, &spec, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn survey_accuracy_converges_to_matrix_implied() {
        // Balanced 100_000-cell grid; empirical binary accuracy within 1% of
        // the matrix-implied value.
        let truths: Vec<CellClass> = (0..99_999).map(|i| CellClass::ALL[i % 3]).collect();
        let grid = FieldGrid::from_truths(3, 33_333, 0.102, truths).unwrap();
        let spec = ConfusionSpec::paper_95();
        let report = survey_field(&grid, &spec, 8).unwrap();
        let emp = accuracy(&report.tally).unwrap();
        // weed row correct w.p. 0.95; non-weed rows report weed w.p. 0.025
        let implied = (1.0 / 3.0) * 0.95 + (2.0 / 3.0) * 0.975;
        assert!(
            (emp - implied).abs() < 0.01,
            "empirical {emp} vs implied {implied}"
        );
    }

    #[test]
    fn detection_csv_lists_every_cell() {
        let grid = FieldGrid::build_field(2, 3, 0.102, 0.5, 6).unwrap();
        let report = survey_field(&grid, &ConfusionSpec::perfect(), 0).unwrap();
        let text = detection_csv(&grid, &report).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("row,col,truth,reported\n"));
    }

    proptest! {
        // Accuracy depends on the counts only through TP+TN and the total.
        #[test]
        fn accuracy_swap_symmetry(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000) {
            prop_assume!(a + b + c + d > 0);
            let t1 = ClassificationTally {
                true_positives: a, true_negatives: b,
                false_positives: c, false_negatives: d,
            };
            let t2 = ClassificationTally {
                true_positives: b, true_negatives: a,
                false_positives: d, false_negatives: c,
            };
            prop_assert_eq!(accuracy(&t1).unwrap(), accuracy(&t2).unwrap());
        }

        // Row-stochasticity survives a serialization round trip.
        #[test]
        fn spec_round_trip_preserves_rows(p in 0.5f64..=1.0) {
            let spec = ConfusionSpec::with_diagonal(p);
            spec.validate().unwrap();
            let json = serde_json::to_string(&spec).unwrap();
            let back: ConfusionSpec = serde_json::from_str(&json).unwrap();
            back.validate().unwrap();
            prop_assert_eq!(spec, back);
        }
    }
}
