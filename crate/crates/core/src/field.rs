//! Scalar and vector fields sampled at the cell centers of a [`Grid`].

use std::io::{BufRead, Write};

use crate::domain::Grid;
use crate::error::{Error, Result};

/// Samples of a `components`-valued field, one vector per grid cell.
///
/// Cell `c` holds `data[c * components .. (c + 1) * components]`. Quadrature
/// uses the uniform midpoint weights of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    components: usize,
    data: Vec<f64>,
}

impl GridField {
    pub fn zeros(grid: Grid, components: usize) -> Self {
        assert!(components > 0, "fields need at least one component");
        GridField {
            grid,
            components,
            data: vec![0.0; grid.len() * components],
        }
    }

    pub fn from_data(grid: Grid, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 || data.len() != grid.len() * components {
            return Err(Error::Parameter(format!(
                "field data has {} values, expected {} cells x {components} components",
                data.len(),
                grid.len()
            )));
        }
        Ok(GridField { grid, components, data })
    }

    /// Scalar field `f(t, x)` sampled at cell centers.
    pub fn from_fn<F: Fn(f64, &[f64]) -> f64>(grid: Grid, f: F) -> Self {
        let data = (0..grid.len())
            .map(|c| {
                let (t, x) = grid.center(c);
                f(t, &x)
            })
            .collect();
        GridField {
            grid,
            components: 1,
            data,
        }
    }

    /// Vector field `f(t, x, out)` sampled at cell centers.
    pub fn from_vec_fn<F: Fn(f64, &[f64], &mut [f64])>(grid: Grid, components: usize, f: F) -> Self {
        let mut field = Self::zeros(grid, components);
        for c in 0..grid.len() {
            let (t, x) = grid.center(c);
            f(t, &x, field.cell_mut(c));
        }
        field
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        GridField {
            grid,
            components: 1,
            data: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.data[c * self.components..(c + 1) * self.components]
    }

    pub fn cell_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.components..(c + 1) * self.components]
    }

    /// Euclidean norm of the value at cell `c`.
    pub fn magnitude(&self, c: usize) -> f64 {
        let v = self.cell(c);
        if v.len() == 1 {
            v[0].abs()
        } else {
            v.iter().map(|a| a * a).sum::<f64>().sqrt()
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.magnitude(c)).collect()
    }

    /// Component `k` as a scalar field.
    pub fn component(&self, k: usize) -> GridField {
        assert!(k < self.components);
        GridField {
            grid: self.grid,
            components: 1,
            data: self.data.iter().skip(k).step_by(self.components).copied().collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> GridField {
        self.map(|v| alpha * v)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridField {
        GridField {
            grid: self.grid,
            components: self.components,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check_compatible(&self, other: &GridField) -> Result<()> {
        if !self.grid.same_shape(&other.grid) || self.components != other.components {
            return Err(Error::Domain(format!(
                "fields live on different grids or have different component counts ({}x{} vs {}x{})",
                self.grid.len(),
                self.components,
                other.grid.len(),
                other.components
            )));
        }
        Ok(())
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridField, f: F) -> Result<GridField> {
        self.check_compatible(other)?;
        Ok(GridField {
            grid: self.grid,
            components: self.components,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `Σ_c w · value_c · other_c` (dot product over components).
    pub fn pairing(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.grid.weight() * self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum::<f64>())
    }

    /// `Σ_c w · |value_c|`.
    pub fn l1_norm(&self) -> f64 {
        self.grid.weight() * (0..self.len()).map(|c| self.magnitude(c)).sum::<f64>()
    }

    /// `(Σ_c w · |value_c|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.weight() * self.data.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the CSV layout `t,x[,y],c0[,c1,...]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["t".to_string(), "x".to_string()];
        if self.grid.dim() == 2 {
            header.push("y".into());
        }
        header.extend((0..self.components).map(|k| format!("c{k}")));
        writeln!(out, "{}", header.join(","))?;
        for c in 0..self.len() {
            let (t, x) = self.grid.center(c);
            let row: Vec<String> = std::iter::once(t)
                .chain(x)
                .chain(self.cell(c).iter().copied())
                .map(fmt_f64)
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`GridField::write_csv`] onto `grid`.
    /// Rows must follow the grid's cell order and match its centers.
    pub fn read_csv<R: BufRead>(grid: Grid, input: R) -> Result<GridField> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty field CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        let coords = 1 + grid.dim();
        let expected: Vec<&str> = ["t", "x", "y"][..coords].to_vec();
        if cols.len() <= coords || cols[..coords] != expected[..] {
            return Err(Error::Parameter(format!(
                "field CSV header must start with {} followed by components, got `{header}`",
                expected.join(",")
            )));
        }
        let components = cols.len() - coords;
        for (k, name) in cols[coords..].iter().enumerate() {
            if *name != format!("c{k}") {
                return Err(Error::Parameter(format!("unexpected component column `{name}`")));
            }
        }
        let mut data = Vec::with_capacity(grid.len() * components);
        let mut row_count = 0;
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parameter(format!("row {}: {e}", idx + 2)))?;
            if values.len() != cols.len() {
                return Err(Error::Parameter(format!("row {} has {} columns, expected {}", idx + 2, values.len(), cols.len())));
            }
            if row_count >= grid.len() {
                return Err(Error::Parameter("field CSV has more rows than grid cells".into()));
            }
            let (t, x) = grid.center(row_count);
            let scale = grid.domain.t_len.max(grid.domain.omega.extents().iter().cloned().fold(0.0, f64::max));
            let mismatch = std::iter::once(t).chain(x).zip(&values).any(|(a, b)| (a - b).abs() > 1e-9 * scale);
            if mismatch {
                return Err(Error::Domain(format!("row {} does not sit at the center of cell {row_count}", idx + 2)));
            }
            data.extend_from_slice(&values[coords..]);
            row_count += 1;
        }
        if row_count != grid.len() {
            return Err(Error::Parameter(format!("field CSV has {row_count} rows, grid has {} cells", grid.len())));
        }
        GridField::from_data(grid, components, data)
    }
}

/// Shortest-roundtrip-safe formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
