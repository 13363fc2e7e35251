use serde::{Deserialize, Serialize};

use crate::IngestError;

/// Regular square grid; cell ids are row-major, `id = row * ncols + col`.
///
/// Cells are half-open, `[x0 + c·Δ, x0 + (c+1)·Δ)`, so a point on a shared
/// edge belongs to the cell with the larger index along that axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub ncols: usize,
    pub nrows: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(IngestError::InvalidConfig(format!(
                "cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.ncols == 0 || self.nrows == 0 {
            return Err(IngestError::InvalidConfig("grid has no cells".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn assign(&self, x: f64, y: f64) -> Result<usize, IngestError> {
        let fx = ((x - self.origin_x) / self.cell_size).floor();
        let fy = ((y - self.origin_y) / self.cell_size).floor();
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.ncols as f64 && fy < self.nrows as f64) {
            return Err(IngestError::OutOfBounds { x, y });
        }
        Ok(fy as usize * self.ncols + fx as usize)
    }

    pub fn row_col(&self, id: usize) -> (usize, usize) {
        (id / self.ncols, id % self.ncols)
    }

    pub fn centroid(&self, id: usize) -> (f64, f64) {
        let (row, col) = self.row_col(id);
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Centroid of `id` mapped to `[-1, 1]²` over the square bounding box
    /// of the grid (side = the longer grid dimension, centred on the grid).
    pub fn scaled_centroid(&self, id: usize) -> (f64, f64) {
        let (cx, cy) = self.centroid(id);
        let width = self.ncols as f64 * self.cell_size;
        let height = self.nrows as f64 * self.cell_size;
        let half = 0.5 * width.max(height);
        let mx = self.origin_x + 0.5 * width;
        let my = self.origin_y + 0.5 * height;
        ((cx - mx) / half, (cy - my) / half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec {
            origin_x: 0.0,
            origin_y: 0.0,
            cell_size: 1000.0,
            ncols: 10,
            nrows: 8,
        }
    }

    #[test]
    fn cell_center() {
        let g = grid();
        // cell (row 5, col 3)
        let id = 5 * 10 + 3;
        let (cx, cy) = g.centroid(id);
        assert_eq!(g.assign(cx, cy).unwrap(), id);
    }

    #[test]
    fn shared_edge_goes_right() {
        let g = grid();
        assert_eq!(g.assign(1000.0, 10.0).unwrap(), 1);
        assert_eq!(g.assign(10.0, 1000.0).unwrap(), 10);
    }

    #[test]
    fn hand_computed_id() {
        assert_eq!(grid().assign(2500.0, 500.0).unwrap(), 2);
    }

    #[test]
    fn outside_extent() {
        let g = grid();
        assert!(g.assign(-0.001, 5.0).is_err());
        assert!(g.assign(10_000.0, 5.0).is_err());
        assert!(g.assign(5.0, 8_000.0).is_err());
        assert!(g.assign(f64::NAN, 5.0).is_err());
    }

    #[test]
    fn scaled_centroids_in_unit_box() {
        let g = grid();
        for id in 0..g.n_cells() {
            let (lx, ly) = g.scaled_centroid(id);
            assert!(lx.abs() <= 1.0 && ly.abs() <= 1.0);
        }
        // the longer axis spans almost the whole interval
        let (l0, _) = g.scaled_centroid(0);
        assert!((l0 + 0.9).abs() < 1e-12);
    }
}
