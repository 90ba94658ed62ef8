//! Crop field as a grid of treatment cells.
//!
//! Each cell is one reflector footprint (102 x 102 mm by default), carries a
//! ground-truth class and a per-band exposure ledger. World coordinates map
//! onto cells through half-open square footprints, so every interior point
//! belongs to exactly one cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dose::{DoseRecipe, ExposureLedger, KILL_EPS};
use crate::error::{Error, Result};

/// Ground-truth content of one treatment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Weed,
    Crop,
    Soil,
}

impl CellClass {
    pub const ALL: [CellClass; 3] = [CellClass::Weed, CellClass::Crop, CellClass::Soil];

    /// One-letter code used by the field-map format.
    pub fn code(self) -> char {
        match self {
            CellClass::Weed => 'W',
            CellClass::Crop => 'C',
            CellClass::Soil => 'S',
        }
    }

    pub fn from_code(c: char) -> Option<CellClass> {
        match c {
            'W' => Some(CellClass::Weed),
            'C' => Some(CellClass::Crop),
            'S' => Some(CellClass::Soil),
            _ => None,
        }
    }
}

impl std::fmt::Display for CellClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Robot or array-origin pose in world coordinates.
///
/// `heading` is normalized to `[-pi, pi)` on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl WorldPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        WorldPose {
            x,
            y,
            heading: normalize_heading(heading),
        }
    }
}

/// Wrap an angle into `[-pi, pi)`.
pub fn normalize_heading(h: f64) -> f64 {
    use std::f64::consts::PI;
    let wrapped = (h + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on 2*pi for inputs like -pi - eps
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// One treatment cell: grid index, ground truth, accumulated exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub truth: CellClass,
    pub ledger: ExposureLedger,
    /// True iff the ledger's lethality has reached the scenario target.
    /// Maintained by [`FieldGrid::refresh_treated`].
    pub treated: bool,
}

impl Cell {
    fn new(row: usize, col: usize, truth: CellClass) -> Self {
        Cell {
            row,
            col,
            truth,
            ledger: ExposureLedger::default(),
            treated: false,
        }
    }
}

/// Dense row-major grid of treatment cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    rows: usize,
    cols: usize,
    /// Cell edge length in meters. Matches the reflector pitch by default.
    pitch_m: f64,
    cells: Vec<Cell>,
}

/// Default cell pitch: the 102 mm reflector edge.
pub const DEFAULT_CELL_PITCH_M: f64 = 0.102;

impl FieldGrid {
    /// Build a grid from explicit truth labels, row-major.
    pub fn from_truths(rows: usize, cols: usize, pitch_m: f64, truths: Vec<CellClass>) -> Result<Self> {
        validate_dims(rows, cols, pitch_m)?;
        if truths.len() != rows * cols {
            return Err(Error::validation(format!(
                "expected {} cell labels for a {rows}x{cols} grid, got {}",
                rows * cols,
                truths.len()
            )));
        }
        let cells = truths
            .into_iter()
            .enumerate()
            .map(|(i, truth)| Cell::new(i / cols, i % cols, truth))
            .collect();
        Ok(FieldGrid {
            rows,
            cols,
            pitch_m,
            cells,
        })
    }

    /// Generate a field with each cell a weed with probability `weed_fraction`,
    /// remaining cells split evenly between crop and soil. Reproducible from `seed`.
    pub fn build_field(
        rows: usize,
        cols: usize,
        pitch_m: f64,
        weed_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        validate_dims(rows, cols, pitch_m)?;
        if !(0.0..=1.0).contains(&weed_fraction) {
            return Err(Error::validation(format!(
                "weed_fraction must be in [0, 1], got {weed_fraction}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truths = (0..rows * cols)
            .map(|_| {
                let u: f64 = rng.random();
                if u < weed_fraction {
                    CellClass::Weed
                } else if rng.random::<f64>() < 0.5 {
                    CellClass::Crop
                } else {
                    CellClass::Soil
                }
            })
            .collect();
        Self::from_truths(rows, cols, pitch_m, truths)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pitch_m(&self) -> f64 {
        self.pitch_m
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.cols + col]
    }

    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut Cell {
        &mut self.cells[row * self.cols + col]
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter()
    }

    pub fn cells_mut(&mut self) -> impl Iterator<Item = &mut Cell> {
        self.cells.iter_mut()
    }

    /// Row-major truth labels, e.g. for equality assertions.
    pub fn truths(&self) -> Vec<CellClass> {
        self.cells.iter().map(|c| c.truth).collect()
    }

    pub fn weed_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.truth == CellClass::Weed)
            .count()
    }

    /// Cell whose half-open footprint `[col*p, (col+1)*p) x [row*p, (row+1)*p)`
    /// contains `(pose.x, pose.y)`, or `None` outside the field.
    pub fn cell_at(&self, pose: WorldPose) -> Option<(usize, usize)> {
        let col = (pose.x / self.pitch_m).floor();
        let row = (pose.y / self.pitch_m).floor();
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        if row < self.rows && col < self.cols {
            Some((row, col))
        } else {
            None
        }
    }

    /// Recompute every cell's treated flag against `target` lethality.
    pub fn refresh_treated(&mut self, recipe: &DoseRecipe, target: f64) {
        for cell in &mut self.cells {
            cell.treated = cell.ledger.lethality(recipe) >= target - KILL_EPS;
        }
    }

    /// Serialize to the field-map text format (canonical form).
    pub fn save_field(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {} {}\n", self.rows, self.cols, self.pitch_m));
        for row in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|col| self.cell(row, col).truth.code().to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the field-map text format.
    ///
    /// First non-comment line is `rows cols pitch_m`; each following line
    /// holds `cols` space-separated cell codes (`W`, `C`, `S`). Lines starting
    /// with `#` are comments.
    pub fn load_field(document: &str) -> Result<Self> {
        let mut lines = document
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());

        let (header_line, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "empty field-map document".into(),
        })?;
        let mut parts = header.split_whitespace();
        let rows: usize = parse_header_field(&mut parts, header_line, header, "rows")?;
        let cols: usize = parse_header_field(&mut parts, header_line, header, "cols")?;
        let pitch: f64 = parse_header_field(&mut parts, header_line, header, "pitch_m")?;
        if let Some(extra) = parts.next() {
            return Err(Error::Parse {
                line: header_line,
                column: column_of(header, extra),
                message: format!("unexpected trailing token {extra:?} in header"),
            });
        }

        let mut truths = Vec::with_capacity(rows.saturating_mul(cols));
        let mut body_rows = 0usize;
        for (line_no, line) in lines {
            body_rows += 1;
            if body_rows > rows {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("more than the declared {rows} rows of cells"),
                });
            }
            let mut count = 0usize;
            for token in line.split_whitespace() {
                let mut chars = token.chars();
                let (c, rest) = (chars.next().unwrap(), chars.as_str());
                let class = if rest.is_empty() { CellClass::from_code(c) } else { None };
                match class {
                    Some(class) => truths.push(class),
                    None => {
                        return Err(Error::Parse {
                            line: line_no,
                            column: column_of(line, token),
                            message: format!("unknown cell code {token:?} (expected W, C or S)"),
                        })
                    }
                }
                count += 1;
            }
            if count != cols {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("row has {count} cells, expected {cols}"),
                });
            }
        }
        if body_rows != rows {
            return Err(Error::Parse {
                line: header_line,
                column: 1,
                message: format!("document has {body_rows} cell rows, header declares {rows}"),
            });
        }
        Self::from_truths(rows, cols, pitch, truths)
    }
}

fn validate_dims(rows: usize, cols: usize, pitch_m: f64) -> Result<()> {
    if rows < 1 || cols < 1 {
        return Err(Error::validation(format!(
            "grid dimensions must be at least 1x1, got {rows}x{cols}"
        )));
    }
    if !(pitch_m > 0.0) || !pitch_m.is_finite() {
        return Err(Error::validation(format!(
            "cell pitch must be positive and finite, got {pitch_m}"
        )));
    }
    Ok(())
}

fn parse_header_field<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    full_line: &str,
    name: &str,
) -> Result<T> {
    let token = parts.next().ok_or_else(|| Error::Parse {
        line,
        column: full_line.len() + 1,
        message: format!("missing header field {name}"),
    })?;
    token.parse().map_err(|_| Error::Parse {
        line,
        column: column_of(full_line, token),
        message: format!("cannot parse {name} from {token:?}"),
    })
}

fn column_of(line: &str, token: &str) -> usize {
    line.find(token).map(|i| i + 1).unwrap_or(1)
}
