//! CSV export of fields (`x[,y[,z]],re,im`, 17 significant digits) with a
//! JSON sidecar describing the grid.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexField, Grid, GridSpec};
use crate::error::{Error, Result};

const AXES: [&str; 3] = ["x", "y", "z"];

/// Sidecar written next to a field CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    #[serde(flatten)]
    pub grid: GridSpec,
    pub dx: f64,
    pub layout: String,
}

impl GridMetadata {
    pub fn of(grid: &Grid) -> Self {
        Self {
            grid: grid.spec(),
            dx: grid.dx(),
            layout: "row-major, axis 0 slowest".into(),
        }
    }
}

pub fn field_to_csv(field: &ComplexField) -> String {
    let grid = field.grid();
    let dim = grid.dim();
    let mut out = String::with_capacity(grid.len() * 24 * (dim + 2));
    out.push_str(&AXES[..dim].join(","));
    out.push_str(",re,im\n");
    for (i, v) in field.values().iter().enumerate() {
        let x = grid.node(i);
        for c in &x[..dim] {
            let _ = write!(out, "{c:.16e},");
        }
        let _ = writeln!(out, "{:.16e},{:.16e}", v.re, v.im);
    }
    out
}

/// Parses a field CSV written by [`field_to_csv`] onto `grid`.
pub fn field_from_csv(grid: &Arc<Grid>, text: &str) -> Result<ComplexField> {
    let dim = grid.dim();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Resampling("empty field CSV".into()))?;
    let expected = format!("{},re,im", AXES[..dim].join(","));
    if header.trim() != expected {
        return Err(Error::Resampling(format!("unexpected header {header:?}, wanted {expected:?}")));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != dim + 2 {
            return Err(Error::Resampling(format!("row {row}: expected {} columns", dim + 2)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Resampling(format!("row {row}: {e}")))
        };
        values.push(Complex64::new(parse(cols[dim])?, parse(cols[dim + 1])?));
    }
    ComplexField::from_values(grid, values)
}
