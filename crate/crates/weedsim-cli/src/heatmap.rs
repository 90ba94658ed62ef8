//! Minimal field renderer: one colored block per cell on a lethality color
//! ramp, written as a PNG. No axes, no text — the artifact is meant for a
//! quick visual diff of where dose landed.

use std::path::Path;

use image::{ImageError, Rgb, RgbImage};
use weedsim::dose::DoseRecipe;
use weedsim::field::FieldGrid;

const CELL_PX: u32 = 20;
const GRID_PX: u32 = 1;

pub fn render(grid: &FieldGrid, recipe: &DoseRecipe, path: &Path) -> weedsim::Result<()> {
    let width = grid.cols() as u32 * CELL_PX + GRID_PX;
    let height = grid.rows() as u32 * CELL_PX + GRID_PX;
    let mut img = RgbImage::from_pixel(width, height, Rgb([30, 30, 34]));
    for cell in grid.cells() {
        let color = ramp(cell.ledger.lethality(recipe));
        for dy in GRID_PX..CELL_PX {
            for dx in GRID_PX..CELL_PX {
                img.put_pixel(
                    cell.col as u32 * CELL_PX + dx,
                    cell.row as u32 * CELL_PX + dy,
                    color,
                );
            }
        }
    }
    img.save(path).map_err(|e| match e {
        ImageError::IoError(io) => weedsim::Error::Io(io),
        other => weedsim::Error::Io(std::io::Error::other(other)),
    })
}

/// Dark slate at zero dose, through ember red, to bright yellow at full
/// lethality.
fn ramp(lethality: f64) -> Rgb<u8> {
    let l = lethality.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, t: f64| (a + (b - a) * t).round() as u8;
    if l < 0.5 {
        let t = l / 0.5;
        Rgb([lerp(24.0, 208.0, t), lerp(26.0, 52.0, t), lerp(36.0, 44.0, t)])
    } else {
        let t = (l - 0.5) / 0.5;
        Rgb([lerp(208.0, 255.0, t), lerp(52.0, 232.0, t), lerp(44.0, 72.0, t)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), Rgb([24, 26, 36]));
        assert_eq!(ramp(1.0), Rgb([255, 232, 72]));
        assert_eq!(ramp(-5.0), ramp(0.0));
        assert_eq!(ramp(5.0), ramp(1.0));
    }

    #[test]
    fn rendered_size_tracks_the_grid() {
        let grid = FieldGrid::build_field(3, 5, 0.102, 0.3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.png");
        render(&grid, &DoseRecipe::phase1(), &path).unwrap();
        let img = image::open(&path).unwrap();
        assert_eq!(img.width(), 5 * CELL_PX + GRID_PX);
        assert_eq!(img.height(), 3 * CELL_PX + GRID_PX);
    }
}
