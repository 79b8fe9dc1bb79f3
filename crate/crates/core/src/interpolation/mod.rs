//! Completing sparse RSS grids: k-NN mean imputation, inverse distance
//! weighting, truncated DCT fitting, and chained-equations imputation.

mod dct;
mod idw;
mod knn;
mod mice;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dct::{dct2_forward, dct2_inverse, dct_basis, dct_interpolate, zigzag_order, DctConvention, DctSpectrum};
pub use idw::idw_interpolate;
pub use knn::knn_impute;
pub use mice::{mice_impute, mice_impute_grids, mice_impute_with, MiceOptions};

pub const GRID_CSV_HEADER: &str = "row,col,rss_dbm,observed";

/// Gridded RSS values with an observed/missing mask (`true` = observed).
/// `cell_size` is `(height, width)` in meters and sets the metric used by
/// the distance-based imputers.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    pub values: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub cell_size: (f64, f64),
}

impl SparseGrid {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>, cell_size: (f64, f64)) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::domain("values and mask dimensions differ"));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::domain("grid must be nonempty"));
        }
        if !(cell_size.0 > 0.0 && cell_size.1 > 0.0) {
            return Err(Error::domain("cell size must be positive"));
        }
        if values.iter().zip(mask.iter()).any(|(v, &m)| m && !v.is_finite()) {
            return Err(Error::domain("observed values must be finite"));
        }
        Ok(SparseGrid { values, mask, cell_size })
    }

    /// Grid with unit cell spacing.
    pub fn unit(values: DMatrix<f64>, mask: DMatrix<bool>) -> Result<Self> {
        Self::new(values, mask, (1.0, 1.0))
    }

    pub fn fully_observed(values: DMatrix<f64>, cell_size: (f64, f64)) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask, cell_size)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Observed cells in row-major order as `(row, col, value)`.
    pub fn observed(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                if self.mask[(r, c)] {
                    out.push((r, c, self.values[(r, c)]));
                }
            }
        }
        out
    }

    /// Cell-center position `(x, y)` in meters.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        ((col as f64 + 0.5) * self.cell_size.1, (row as f64 + 0.5) * self.cell_size.0)
    }

    pub(crate) fn squared_distance(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dy = (a.0 as f64 - b.0 as f64) * self.cell_size.0;
        let dx = (a.1 as f64 - b.1 as f64) * self.cell_size.1;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    Idw,
    Dct,
    Mice,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Method::Knn),
            "idw" => Ok(Method::Idw),
            "dct" => Ok(Method::Dct),
            "mice" => Ok(Method::Mice),
            other => Err(Error::Config(format!("unknown interpolation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Largest absolute change of any imputed entry, per MICE sweep.
    pub max_change_per_sweep: Vec<f64>,
    /// `(sweep, column)` pairs where the regression was singular and the column mean was used.
    pub mean_fallbacks: Vec<(usize, usize)>,
    /// RMS residual of a least-squares fit at the observed cells (DCT).
    pub fit_rms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    pub completed: DMatrix<f64>,
    pub observed: DMatrix<bool>,
    pub method: Method,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
}

impl ImputationResult {
    /// Row-major dump: `row,col,rss_dbm,observed`.
    pub fn to_csv_string(&self) -> String {
        grid_to_csv(&self.completed, &self.observed)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

pub fn grid_to_csv(values: &DMatrix<f64>, observed: &DMatrix<bool>) -> String {
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for r in 0..values.nrows() {
        for c in 0..values.ncols() {
            let v = values[(r, c)];
            if v.is_finite() {
                let _ = writeln!(out, "{r},{c},{v},{}", u8::from(observed[(r, c)]));
            } else {
                let _ = writeln!(out, "{r},{c},,{}", u8::from(observed[(r, c)]));
            }
        }
    }
    out
}

/// Parses a grid dump. Missing cells may carry an empty `rss_dbm` field; the
/// grid extent is the largest index present plus one unless `shape` is given.
pub fn parse_grid_csv(text: &str, shape: Option<(usize, usize)>, cell_size: (f64, f64)) -> Result<SparseGrid> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == GRID_CSV_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{GRID_CSV_HEADER}`"))),
    }
    let mut cells = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(line_no, format!("expected 4 fields, got {}", f.len())));
        }
        let r: usize = f[0].parse().map_err(|_| Error::parse(line_no, format!("invalid row `{}`", f[0])))?;
        let c: usize = f[1].parse().map_err(|_| Error::parse(line_no, format!("invalid col `{}`", f[1])))?;
        let observed = match f[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::parse(line_no, format!("invalid observed flag `{other}`"))),
        };
        let v = if f[2].is_empty() {
            None
        } else {
            Some(
                f[2].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(line_no, format!("invalid rss_dbm `{}`", f[2])))?,
            )
        };
        if observed && v.is_none() {
            return Err(Error::parse(line_no, "observed cell without a value"));
        }
        cells.push((line_no, r, c, v, observed));
    }
    let (rows, cols) = match shape {
        Some(s) => s,
        None => (
            cells.iter().map(|c| c.1 + 1).max().unwrap_or(0),
            cells.iter().map(|c| c.2 + 1).max().unwrap_or(0),
        ),
    };
    let mut values = DMatrix::zeros(rows, cols);
    let mut mask = DMatrix::from_element(rows, cols, false);
    for (line_no, r, c, v, observed) in cells {
        if r >= rows || c >= cols {
            return Err(Error::parse(line_no, format!("cell ({r}, {c}) outside {rows}x{cols} grid")));
        }
        if observed {
            values[(r, c)] = v.unwrap_or(0.0);
            mask[(r, c)] = true;
        }
    }
    SparseGrid::new(values, mask, cell_size)
}

/// Tabular view of co-registered layers: one row per cell in row-major
/// order, columns `(x_center, y_center, rss_1, ..., rss_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub values: DMatrix<f64>,
    pub mask: DMatrix<bool>,
    pub rows: usize,
    pub cols: usize,
    pub cell_size: (f64, f64),
}

pub fn sparse_grid_to_table(layers: &[SparseGrid]) -> Result<GridTable> {
    let first = layers.first().ok_or_else(|| Error::domain("no layers"))?;
    let (rows, cols) = first.values.shape();
    if layers.iter().any(|l| l.values.shape() != (rows, cols) || l.cell_size != first.cell_size) {
        return Err(Error::domain("layers differ in dimensions or cell size"));
    }
    let n = rows * cols;
    let width = 2 + layers.len();
    let mut values = DMatrix::zeros(n, width);
    let mut mask = DMatrix::from_element(n, width, true);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let (x, y) = first.center(r, c);
            values[(i, 0)] = x;
            values[(i, 1)] = y;
            for (a, layer) in layers.iter().enumerate() {
                values[(i, 2 + a)] = layer.values[(r, c)];
                mask[(i, 2 + a)] = layer.mask[(r, c)];
            }
        }
    }
    Ok(GridTable { values, mask, rows, cols, cell_size: first.cell_size })
}

impl GridTable {
    pub fn layer_count(&self) -> usize {
        self.values.ncols() - 2
    }

    /// Inverse of [`sparse_grid_to_table`].
    pub fn to_grids(&self) -> Result<Vec<SparseGrid>> {
        (0..self.layer_count())
            .map(|a| {
                let values = DMatrix::from_fn(self.rows, self.cols, |r, c| self.values[(r * self.cols + c, 2 + a)]);
                let mask = DMatrix::from_fn(self.rows, self.cols, |r, c| self.mask[(r * self.cols + c, 2 + a)]);
                SparseGrid::new(values, mask, self.cell_size)
            })
            .collect()
    }
}

pub(crate) fn require_observed(g: &SparseGrid, need: usize, what: &str) -> Result<Vec<(usize, usize, f64)>> {
    let obs = g.observed();
    if obs.len() < need {
        return Err(Error::domain(format!("{what} needs at least {need} observed cells, grid has {}", obs.len())));
    }
    Ok(obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_3x2() -> SparseGrid {
        let values = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 0.0, 5.0, 6.0]);
        let mask = DMatrix::from_row_slice(3, 2, &[true, true, true, false, true, true]);
        SparseGrid::new(values, mask, (0.5, 2.0)).unwrap()
    }

    #[test]
    fn table_shape_for_lecture_hall() {
        let g = SparseGrid::new(DMatrix::zeros(30, 10), DMatrix::from_element(30, 10, false), (0.58, 1.075)).unwrap();
        let t = sparse_grid_to_table(&[g.clone(), g.clone(), g]).unwrap();
        assert_eq!(t.values.shape(), (300, 5));
    }

    #[test]
    fn table_round_trip() {
        let g = grid_3x2();
        let t = sparse_grid_to_table(&[g.clone(), g.clone()]).unwrap();
        let back = t.to_grids().unwrap();
        assert_eq!(back, vec![g.clone(), g]);
        assert_eq!(sparse_grid_to_table(&back).unwrap(), t);
        assert_eq!((t.values[(1, 0)], t.values[(1, 1)]), (3.0, 0.25));
    }

    #[test]
    fn table_rejects_mismatch() {
        let g = grid_3x2();
        let other = SparseGrid::unit(DMatrix::zeros(2, 2), DMatrix::from_element(2, 2, true)).unwrap();
        assert!(sparse_grid_to_table(&[g, other]).is_err());
        assert!(sparse_grid_to_table(&[]).is_err());
    }

    #[test]
    fn grid_csv_round_trip() {
        let g = grid_3x2();
        let text = grid_to_csv(&g.values, &g.mask);
        assert!(text.starts_with("row,col,rss_dbm,observed\n0,0,1,1\n"));
        let back = parse_grid_csv(&text, None, g.cell_size).unwrap();
        assert_eq!(back, g);
        assert!(parse_grid_csv("row,col,rss_dbm,observed\n0,0,x,1\n", None, (1.0, 1.0)).is_err());
    }
}
