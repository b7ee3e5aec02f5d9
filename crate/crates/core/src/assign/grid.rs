use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform BEV grid. Rows run along world y, columns along world x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub y_min: f64,
    pub cell_size: f64,
    pub n_rows: usize,
    pub n_cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

impl CellIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(&self, other: &CellIndex) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<CellIndex> for [usize; 2] {
    fn from(c: CellIndex) -> Self {
        [c.row, c.col]
    }
}

impl From<[usize; 2]> for CellIndex {
    fn from(v: [usize; 2]) -> Self {
        Self { row: v[0], col: v[1] }
    }
}

impl GridSpec {
    pub fn new(x_min: f64, y_min: f64, cell_size: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        let g = Self {
            x_min,
            y_min,
            cell_size,
            n_rows,
            n_cols,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell_size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::InvalidGrid(format!(
                "grid needs at least one cell, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        if !(self.x_min.is_finite() && self.y_min.is_finite()) {
            return Err(Error::InvalidGrid("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.n_cols as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.n_rows as f64 * self.cell_size
    }

    /// Row-major linear index.
    pub fn linear(&self, cell: CellIndex) -> usize {
        debug_assert!(cell.row < self.n_rows && cell.col < self.n_cols);
        cell.row * self.n_cols + cell.col
    }

    pub fn cell_at(&self, linear: usize) -> CellIndex {
        CellIndex::new(linear / self.n_cols, linear % self.n_cols)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.n_cells()).map(|i| self.cell_at(i))
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 2] {
        [
            self.x_min + (cell.col as f64 + 0.5) * self.cell_size,
            self.y_min + (cell.row as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Whether `(x, y)` lies inside the half-open extent of the grid.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max() && y >= self.y_min && y < self.y_max()
    }

    /// Floor-maps a world point to its cell. Points up to one cell outside
    /// the extent are clamped onto the border; anything further is rejected.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Result<CellIndex> {
        let col = ((x - self.x_min) / self.cell_size).floor();
        let row = ((y - self.y_min) / self.cell_size).floor();
        let ok = |v: f64, n: usize| v.is_finite() && v >= -1.0 && v <= n as f64;
        if !ok(col, self.n_cols) || !ok(row, self.n_rows) {
            return Err(Error::OffGrid { x, y });
        }
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        Ok(CellIndex::new(clamp(row, self.n_rows), clamp(col, self.n_cols)))
    }

    /// In-bounds cells within Manhattan distance `r` of `center`, in
    /// row-major order.
    pub fn cross_region(&self, center: CellIndex, r: usize) -> Vec<CellIndex> {
        let r0 = center.row.saturating_sub(r);
        let r1 = (center.row + r).min(self.n_rows - 1);
        let mut out = Vec::with_capacity(2 * r * (r + 1) + 1);
        for row in r0..=r1 {
            let slack = r - row.abs_diff(center.row);
            let c0 = center.col.saturating_sub(slack);
            let c1 = (center.col + slack).min(self.n_cols - 1);
            out.extend((c0..=c1).map(|col| CellIndex::new(row, col)));
        }
        out
    }
}
