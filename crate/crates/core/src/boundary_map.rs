//! The interior-shift map `Ψ^δ`: a near-identity map of `Ω` into itself that
//! keeps every image point at distance `≥ K₁δ` from `∂Ω`.
//!
//! Intervals compress each endpoint collar affinely, rectangles use the
//! tensor product of two interval maps, and disks compose chart maps
//! `γ^δ(x', x_d) = (x', T_ε + (1−δ)(x_d − T_ε))` over overlapping angular
//! charts.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Omega;
use crate::error::{Error, Result};
use crate::numerics::{smoothstep, smoothstep_derivative};

/// Domain on which a [`BoundaryMap`] acts. Disks are centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDomain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
    Disk { radius: f64 },
}

impl From<Omega> for MapDomain {
    fn from(o: Omega) -> Self {
        match o {
            Omega::Interval { length } => MapDomain::Interval { length },
            Omega::Rectangle { lx, ly } => MapDomain::Rectangle { lx, ly },
        }
    }
}

impl MapDomain {
    pub fn dim(&self) -> usize {
        match self {
            MapDomain::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn min_extent(&self) -> f64 {
        match *self {
            MapDomain::Interval { length } => length,
            MapDomain::Rectangle { lx, ly } => lx.min(ly),
            MapDomain::Disk { radius } => radius,
        }
    }

    pub fn contains_closure(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let tol = 1e-12 * self.min_extent();
        match *self {
            MapDomain::Interval { length } => x[0] >= -tol && x[0] <= length + tol,
            MapDomain::Rectangle { lx, ly } => x[0] >= -tol && x[0] <= lx + tol && x[1] >= -tol && x[1] <= ly + tol,
            MapDomain::Disk { radius } => x[0].hypot(x[1]) <= radius + tol,
        }
    }

    /// Distance to the boundary for points of the closure.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match *self {
            MapDomain::Interval { length } => x[0].min(length - x[0]),
            MapDomain::Rectangle { lx, ly } => x[0].min(lx - x[0]).min(x[1]).min(ly - x[1]),
            MapDomain::Disk { radius } => radius - x[0].hypot(x[1]),
        }
    }
}

/// Optional construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapOptions {
    /// Collar width; defaults to a quarter of the smallest extent (or radius).
    pub collar: Option<f64>,
    /// Number of angular charts on the disk.
    pub charts: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions { collar: None, charts: 8 }
    }
}

/// Measured constants of a built map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapConstants {
    /// `inf dist(Ψ(x), ∂Ω) / δ`.
    pub k1: f64,
    /// `sup |Ψ(x) − x| / δ`.
    pub k2: f64,
    /// `sup |∇Ψ(x) − 1|` (spectral norm) away from the kink set.
    pub grad_dev: f64,
    pub samples: usize,
    pub maps_into: bool,
    pub injective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryMap {
    domain: MapDomain,
    delta: f64,
    epsilon: f64,
    collar: f64,
    charts: usize,
    /// Chart half-width in angle.
    chart_h: f64,
}

impl BoundaryMap {
    /// Builds `Ψ^δ` with default options.
    pub fn build(domain: MapDomain, delta: f64, epsilon: f64) -> Result<Self> {
        Self::build_with(domain, delta, epsilon, MapOptions::default())
    }

    pub fn build_with(domain: MapDomain, delta: f64, epsilon: f64, options: MapOptions) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("δ must lie in (0, 1), got {delta}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter(format!("ε must lie in (0, 1), got {epsilon}")));
        }
        let ext = domain.min_extent();
        if !(ext.is_finite() && ext > 0.0) {
            return Err(Error::Parameter(format!("degenerate domain {domain:?}")));
        }
        let collar = options.collar.unwrap_or(0.25 * ext);
        let half = match domain {
            MapDomain::Disk { .. } => 1.0,
            _ => 0.5,
        };
        if !(collar > 0.0 && collar < half * ext) {
            return Err(Error::Parameter(format!(
                "collar width {collar} must lie in (0, {})",
                half * ext
            )));
        }
        if options.charts < 3 {
            return Err(Error::Parameter("a disk needs at least 3 charts".into()));
        }
        let charts = options.charts;
        Ok(BoundaryMap {
            domain,
            delta,
            epsilon,
            collar,
            charts,
            chart_h: 1.2 * PI / (charts as f64 * (1.0 - epsilon)),
        })
    }

    pub fn domain(&self) -> MapDomain {
        self.domain
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    /// `Ψ^δ(x)` with a domain check.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.domain.contains_closure(x) {
            return Err(Error::Domain(format!("{x:?} lies outside the closure of {:?}", self.domain)));
        }
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    /// `Ψ^δ(x)` without checks.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self.domain {
            MapDomain::Interval { length } => out[0] = self.collar_map(x[0], length).0,
            MapDomain::Rectangle { lx, ly } => {
                out[0] = self.collar_map(x[0], lx).0;
                out[1] = self.collar_map(x[1], ly).0;
            }
            MapDomain::Disk { radius } => {
                let (p, _) = self.disk_map(x, radius);
                out[..2].copy_from_slice(&p);
            }
        }
    }

    /// Diagonal of `∇Ψ^δ` on intervals and rectangles (one-sided at the kink).
    pub fn jacobian_diag(&self, x: &[f64]) -> [f64; 2] {
        match self.domain {
            MapDomain::Interval { length } => [self.collar_map(x[0], length).1, 1.0],
            MapDomain::Rectangle { lx, ly } => [self.collar_map(x[0], lx).1, self.collar_map(x[1], ly).1],
            MapDomain::Disk { .. } => panic!("disk maps have a full Jacobian"),
        }
    }

    /// One-dimensional collar compression on `[0, length]`: value and slope.
    fn collar_map(&self, x: f64, length: f64) -> (f64, f64) {
        let (w, d) = (self.collar, self.delta);
        if x < w {
            (d * w + (1.0 - d) * x, 1.0 - d)
        } else if x > length - w {
            (length - (d * w + (1.0 - d) * (length - x)), 1.0 - d)
        } else {
            (x, 1.0)
        }
    }

    /// Bump profile `T_ε` in the chart coordinate `x'`.
    fn bump_t(&self, xp: f64) -> (f64, f64) {
        let a = xp.abs();
        let e = self.epsilon;
        if a <= 1.0 - e {
            (1.0, 0.0)
        } else if a >= 1.0 {
            (0.0, 0.0)
        } else {
            let s = (1.0 - a) / e;
            (smoothstep(s), -smoothstep_derivative(s) / e * xp.signum())
        }
    }

    /// Chart composition on the disk. Also returns the smallest chart distance
    /// `w·|x_d − T_ε|` to a kink met along the way.
    fn disk_map(&self, x: &[f64], radius: f64) -> ([f64; 2], f64) {
        let r = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]);
        let w = self.collar;
        let mut xd = (radius - r) / w;
        let mut kink_dist = f64::INFINITY;
        let mut moved = false;
        for alpha in 0..self.charts {
            let center = 2.0 * PI * alpha as f64 / self.charts as f64;
            let xp = wrap(theta - center) / self.chart_h;
            let (t, _) = self.bump_t(xp);
            if t > 0.0 {
                kink_dist = kink_dist.min(w * (xd - t).abs());
            }
            if xd < t {
                xd = t + (1.0 - self.delta) * (xd - t);
                moved = true;
            }
        }
        if !moved {
            return ([x[0], x[1]], kink_dist);
        }
        let r_new = radius - w * xd;
        ([r_new * theta.cos(), r_new * theta.sin()], kink_dist)
    }

    fn kink_distance(&self, x: &[f64]) -> f64 {
        match self.domain {
            MapDomain::Interval { length } => {
                let w = self.collar;
                (x[0] - w).abs().min((x[0] - (length - w)).abs())
            }
            MapDomain::Rectangle { lx, ly } => {
                let w = self.collar;
                (x[0] - w)
                    .abs()
                    .min((x[0] - (lx - w)).abs())
                    .min((x[1] - w).abs())
                    .min((x[1] - (ly - w)).abs())
            }
            MapDomain::Disk { radius } => self.disk_map(x, radius).1,
        }
    }

    fn sample_points(&self, count: usize) -> (Vec<Vec<f64>>, f64) {
        match self.domain {
            MapDomain::Interval { length } => {
                let h = length / (count - 1) as f64;
                ((0..count).map(|i| vec![i as f64 * h]).collect(), h)
            }
            MapDomain::Rectangle { lx, ly } => {
                let m = (count as f64).sqrt().ceil() as usize;
                let (hx, hy) = (lx / (m - 1) as f64, ly / (m - 1) as f64);
                let pts = (0..m)
                    .flat_map(|i| (0..m).map(move |j| vec![i as f64 * hx, j as f64 * hy]))
                    .collect();
                (pts, hx.min(hy))
            }
            MapDomain::Disk { radius } => {
                let m = ((count as f64 / PI).sqrt() * 2.0).ceil() as usize;
                let h = 2.0 * radius / (m - 1) as f64;
                let mut pts: Vec<Vec<f64>> = (0..m)
                    .flat_map(|i| (0..m).map(move |j| vec![-radius + i as f64 * h, -radius + j as f64 * h]))
                    .filter(|p| p[0].hypot(p[1]) <= radius)
                    .collect();
                let rim = (2.0 * PI * radius / h).ceil() as usize;
                pts.extend((0..rim).map(|k| {
                    let th = 2.0 * PI * k as f64 / rim as f64;
                    vec![radius * th.cos(), radius * th.sin()]
                }));
                (pts, h)
            }
        }
    }

    /// Measures `K₁`, `K₂` and `sup|∇Ψ − 1|` on about `sample_count` points,
    /// and checks `Ψ(Ω) ⊆ Ω` and injectivity at resolution `δ/4`.
    pub fn verify(&self, sample_count: usize) -> Result<MapConstants> {
        if sample_count < 1000 {
            return Err(Error::Parameter(format!("verify needs at least 1000 samples, got {sample_count}")));
        }
        let (pts, eta) = self.sample_points(sample_count);
        let dim = self.domain.dim();
        let fd = 1e-3 * eta;
        let per_point: Vec<(f64, f64, f64, bool)> = pts
            .par_iter()
            .map(|x| {
                let mut y = [0.0; 2];
                self.apply_into(x, &mut y);
                let y = &y[..dim];
                let inside = self.domain.contains_closure(y);
                let dist = self.domain.distance_to_boundary(y);
                let disp = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                let smooth = self.domain.distance_to_boundary(x) > 2.0 * eta && self.kink_distance(x) > 2.0 * eta;
                let dev = if smooth { self.fd_deviation(x, fd) } else { 0.0 };
                (dist, disp, dev, inside)
            })
            .collect();
        let k1 = per_point.iter().map(|p| p.0).fold(f64::INFINITY, f64::min) / self.delta;
        let k2 = per_point.iter().map(|p| p.1).fold(0.0, f64::max) / self.delta;
        let grad_dev = per_point.iter().map(|p| p.2).fold(0.0, f64::max);
        let maps_into = per_point.iter().all(|p| p.3);
        Ok(MapConstants {
            k1,
            k2,
            grad_dev,
            samples: pts.len(),
            maps_into,
            injective: self.injective_on_lattice(),
        })
    }

    /// Spectral norm of the central-difference Jacobian minus the identity.
    fn fd_deviation(&self, x: &[f64], h: f64) -> f64 {
        let dim = self.domain.dim();
        let mut j = [[0.0; 2]; 2];
        for k in 0..dim {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let (mut yp, mut ym) = ([0.0; 2], [0.0; 2]);
            self.apply_into(&xp, &mut yp);
            self.apply_into(&xm, &mut ym);
            for i in 0..dim {
                j[i][k] = (yp[i] - ym[i]) / (2.0 * h) - if i == k { 1.0 } else { 0.0 };
            }
        }
        if dim == 1 {
            return j[0][0].abs();
        }
        let (a, b, c, d) = (j[0][0], j[0][1], j[1][0], j[1][1]);
        let s = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
    }

    /// Maps a lattice of spacing `δ/2` and checks that no two points land in
    /// the same bin of side `δ/4`.
    fn injective_on_lattice(&self) -> bool {
        let (h, bin) = (0.5 * self.delta, 0.25 * self.delta);
        let lattice: Vec<Vec<f64>> = match self.domain {
            MapDomain::Interval { length } => {
                let n = (length / h).floor() as usize;
                (0..=n).map(|i| vec![i as f64 * h]).collect()
            }
            MapDomain::Rectangle { lx, ly } => {
                let (nx, ny) = ((lx / h).floor() as usize, (ly / h).floor() as usize);
                (0..=nx)
                    .flat_map(|i| (0..=ny).map(move |j| vec![i as f64 * h, j as f64 * h]))
                    .collect()
            }
            MapDomain::Disk { radius } => {
                let n = (radius / h).floor() as i64;
                (-n..=n)
                    .flat_map(|i| (-n..=n).map(move |j| vec![i as f64 * h, j as f64 * h]))
                    .filter(|p| p[0].hypot(p[1]) <= radius)
                    .collect()
            }
        };
        let mut bins: HashMap<(i64, i64), usize> = HashMap::with_capacity(lattice.len());
        for (idx, x) in lattice.iter().enumerate() {
            let mut y = [0.0; 2];
            self.apply_into(x, &mut y);
            let key = ((y[0] / bin).floor() as i64, (y[1] / bin).floor() as i64);
            if bins.insert(key, idx).is_some() {
                return false;
            }
        }
        true
    }
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> MapDomain {
        MapDomain::Interval { length: 1.0 }
    }

    #[test]
    fn interval_examples() {
        let m = BoundaryMap::build(unit(), 0.1, 0.5).unwrap();
        assert_eq!(m.apply(&[0.5]).unwrap(), vec![0.5]);
        let k1 = m.verify(1000).unwrap().k1;
        assert!(m.apply(&[0.0]).unwrap()[0] >= k1 * 0.1 - 1e-15);
        let right = m.apply(&[1.0]).unwrap()[0];
        assert!((right - (1.0 - 0.25 * 0.1)).abs() < 1e-15);
        assert!(matches!(m.apply(&[1.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BoundaryMap::build(unit(), 1.0, 0.5).is_err());
        assert!(BoundaryMap::build(unit(), 0.0, 0.5).is_err());
        assert!(BoundaryMap::build(MapDomain::Disk { radius: 1.0 }, 0.1, 1.0).is_err());
        let m = BoundaryMap::build(unit(), 0.1, 0.5).unwrap();
        assert!(m.verify(10).is_err());
    }

    #[test]
    fn interval_constants_are_exact() {
        for delta in [0.1, 0.05, 0.025] {
            let c = BoundaryMap::build(unit(), delta, 0.5).unwrap().verify(2001).unwrap();
            assert!((c.k1 - 0.25).abs() < 1e-12 && (c.k2 - 0.25).abs() < 1e-12);
            assert!((c.grad_dev - delta).abs() < 1e-6, "{c:?}");
            assert!(c.maps_into && c.injective);
        }
    }

    #[test]
    fn rectangle_is_a_tensor_product() {
        let m = BoundaryMap::build(MapDomain::Rectangle { lx: 2.0, ly: 1.0 }, 0.1, 0.5).unwrap();
        let y = m.apply(&[0.0, 0.5]).unwrap();
        assert!((y[0] - 0.025).abs() < 1e-15 && y[1] == 0.5);
        let c = m.verify(4000).unwrap();
        assert!(c.maps_into && c.injective && c.k1 > 0.2);
    }

    #[test]
    fn disk_pushes_boundary_inward() {
        let m = BoundaryMap::build(MapDomain::Disk { radius: 1.0 }, 0.05, 0.3).unwrap();
        let y = m.apply(&[1.0, 0.0]).unwrap();
        assert!(y[1].abs() < 1e-15 && y[0] < 1.0 - 0.25 * 0.05 * 0.99);
        assert_eq!(m.apply(&[0.1, 0.2]).unwrap(), vec![0.1, 0.2]);
        let c = m.verify(20000).unwrap();
        assert!(c.maps_into && c.injective && c.k1 > 0.2 && c.k2 < 1.0, "{c:?}");
    }

    #[test]
    fn disk_displacement_vanishes_with_delta() {
        let sup = |delta: f64| {
            let m = BoundaryMap::build(MapDomain::Disk { radius: 1.0 }, delta, 0.3).unwrap();
            m.verify(5000).unwrap().k2 * delta
        };
        let (a, b) = (sup(0.1), sup(0.0125));
        assert!(b < a / 4.0, "{a} {b}");
    }
}
