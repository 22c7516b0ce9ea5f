//! Space-time cylinders `Q = (0,T) × Ω` and their tensor midpoint grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial domain. Intervals are `(0, length)`, rectangles `(0, lx) × (0, ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Omega {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Omega {
    pub fn unit_interval() -> Self {
        Omega::Interval { length: 1.0 }
    }

    pub fn unit_square() -> Self {
        Omega::Rectangle { lx: 1.0, ly: 1.0 }
    }

    pub fn dim(&self) -> usize {
        match self {
            Omega::Interval { .. } => 1,
            Omega::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Omega::Interval { length } => length,
            Omega::Rectangle { lx, ly } => lx * ly,
        }
    }

    /// Side lengths, one per spatial axis.
    pub fn extents(&self) -> Vec<f64> {
        match *self {
            Omega::Interval { length } => vec![length],
            Omega::Rectangle { lx, ly } => vec![lx, ly],
        }
    }

    pub fn contains_closure(&self, x: &[f64]) -> bool {
        let ext = self.extents();
        x.len() == ext.len()
            && x
                .iter()
                .zip(&ext)
                .all(|(&xi, &li)| xi >= -1e-12 * li && xi <= li * (1.0 + 1e-12))
    }

    /// Euclidean distance from `x` to the boundary (assumes `x` in the closure).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.extents()
            .iter()
            .zip(x)
            .map(|(&l, &xi)| xi.min(l - xi))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.extents().iter().all(|l| l.is_finite() && *l > 0.0) {
            Ok(())
        } else {
            Err(Error::Parameter(format!("degenerate spatial domain {self:?}")))
        }
    }
}

/// The cylinder `Q = (0, t_len) × Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTime {
    pub t_len: f64,
    pub omega: Omega,
}

impl SpaceTime {
    pub fn new(t_len: f64, omega: Omega) -> Result<Self> {
        if !(t_len.is_finite() && t_len > 0.0) {
            return Err(Error::Parameter(format!("time length must be positive, got {t_len}")));
        }
        omega.validate()?;
        Ok(SpaceTime { t_len, omega })
    }

    pub fn unit_interval() -> Self {
        SpaceTime {
            t_len: 1.0,
            omega: Omega::unit_interval(),
        }
    }

    pub fn unit_square() -> Self {
        SpaceTime {
            t_len: 1.0,
            omega: Omega::unit_square(),
        }
    }

    pub fn measure(&self) -> f64 {
        self.t_len * self.omega.measure()
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn contains_closure(&self, t: f64, x: &[f64]) -> bool {
        t >= -1e-12 * self.t_len && t <= self.t_len * (1.0 + 1e-12) && self.omega.contains_closure(x)
    }

    pub fn check_point(&self, t: f64, x: &[f64]) -> Result<()> {
        if self.contains_closure(t, x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point (t={t}, x={x:?}) lies outside the closure of Q")))
        }
    }
}

/// Tensor midpoint grid on `Q`: `nt` time cells times `nx` (× `ny`) space cells.
///
/// Cells are ordered time-major: `c = (it * nx + ix) * ny + iy`, with `ny = 1`
/// on intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: SpaceTime,
    pub nt: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(domain: SpaceTime, nt: usize, nx: usize, ny: usize) -> Result<Self> {
        domain.omega.validate()?;
        let ny = match domain.omega {
            Omega::Interval { .. } => {
                if ny > 1 {
                    return Err(Error::Parameter("interval grids take ny = 1".into()));
                }
                1
            }
            Omega::Rectangle { .. } => ny,
        };
        if nt == 0 || nx == 0 || ny == 0 {
            return Err(Error::Parameter(format!("empty grid {nt}x{nx}x{ny}")));
        }
        Ok(Grid { domain, nt, nx, ny })
    }

    /// Interval grid `nt × nx`.
    pub fn interval(domain: SpaceTime, nt: usize, nx: usize) -> Result<Self> {
        Self::new(domain, nt, nx, 1)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn space_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.nt * self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.domain.t_len / self.nt as f64
    }

    /// Spatial steps per axis.
    pub fn dx(&self) -> Vec<f64> {
        match self.domain.omega {
            Omega::Interval { length } => vec![length / self.nx as f64],
            Omega::Rectangle { lx, ly } => vec![lx / self.nx as f64, ly / self.ny as f64],
        }
    }

    /// Quadrature weight of every cell (uniform midpoint rule).
    pub fn weight(&self) -> f64 {
        self.domain.measure() / self.len() as f64
    }

    pub fn space_weight(&self) -> f64 {
        self.domain.omega.measure() / self.space_cells() as f64
    }

    pub fn time_center(&self, it: usize) -> f64 {
        (it as f64 + 0.5) * self.dt()
    }

    /// Center of the spatial cell `s = ix * ny + iy`, written into `out`.
    pub fn space_center_into(&self, s: usize, out: &mut [f64]) {
        let dx = self.dx();
        let (ix, iy) = (s / self.ny, s % self.ny);
        out[0] = (ix as f64 + 0.5) * dx[0];
        if dx.len() > 1 {
            out[1] = (iy as f64 + 0.5) * dx[1];
        }
    }

    pub fn space_center(&self, s: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.space_center_into(s, &mut x);
        x
    }

    /// `(t, x)` of cell `c`.
    pub fn center(&self, c: usize) -> (f64, Vec<f64>) {
        let sc = self.space_cells();
        (self.time_center(c / sc), self.space_center(c % sc))
    }

    /// All spatial centers, in spatial-cell order.
    pub fn space_centers(&self) -> Vec<Vec<f64>> {
        (0..self.space_cells()).map(|s| self.space_center(s)).collect()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}
