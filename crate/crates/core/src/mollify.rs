//! Space-time mollification `(S_δ z)(t,x) = ∫ S_δ(t−s, Ψ^δ(x)−y) z(s,y) ds dy`.
//!
//! The kernel is sampled on the field's own lattice and divided by its
//! discrete mass over the whole (unbounded) lattice, so constants away from
//! the boundary are reproduced exactly. Data are extended by zero outside `Q`.

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary_map::{BoundaryMap, MapDomain, MapOptions};
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::modular::{self, ModularReport};
use crate::nfunction::NFunction;
use crate::numerics;

/// Normalised bump `S` on the unit ball of `ℝ^{d+1}`, scaled to radius `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernel {
    pub delta: f64,
    /// Spatial dimension `d`.
    pub dim: usize,
    /// `∫_{ℝ^{d+1}} exp(1/(|z|²−1)) dz`.
    pub mass: f64,
}

impl Kernel {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("kernel width must be positive, got {delta}")));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::Parameter(format!("spatial dimension {dim} not supported")));
        }
        let n = dim + 1;
        let sphere = match n {
            2 => 2.0 * std::f64::consts::PI,
            _ => 4.0 * std::f64::consts::PI,
        };
        let radial = numerics::integrate(|r| numerics::bump(r) * r.powi(n as i32 - 1), 0.0, 1.0, 64);
        Ok(Kernel {
            delta,
            dim,
            mass: sphere * radial,
        })
    }

    /// `S_δ(t, x) = δ^{−(d+1)} S(t/δ, x/δ)`.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let r2 = (t * t + x.iter().map(|v| v * v).sum::<f64>()) / (self.delta * self.delta);
        if r2 >= 1.0 {
            return 0.0;
        }
        (1.0 / (r2 - 1.0)).exp() / (self.mass * self.delta.powi(self.dim as i32 + 1))
    }
}

/// How the field is extended before convolving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Zero outside `Ω` (and outside `(0,T)`).
    #[default]
    ZeroOutsideDomain,
    /// Additionally zero on cells outside `Ψ^δ(Ω)`.
    ZeroOutsideImage,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    dk: i32,
    m: u32,
    w: f64,
    g: [f64; 2],
}

/// Precomputed convolution weights for one grid, kernel and map.
///
/// For each spatial output cell the stencil is the same at every time level.
#[derive(Debug, Clone)]
pub struct Smoother {
    grid: Grid,
    stencils: Vec<Vec<Entry>>,
}

impl Smoother {
    pub fn new(grid: Grid, kernel: &Kernel, map: &BoundaryMap, extension: Extension) -> Result<Self> {
        if (kernel.delta - map.delta()).abs() > 1e-15 * kernel.delta {
            return Err(Error::Parameter(format!(
                "kernel δ = {} does not match map δ = {}",
                kernel.delta,
                map.delta()
            )));
        }
        if map.domain() != MapDomain::from(grid.domain.omega) || kernel.dim != grid.dim() {
            return Err(Error::Parameter("boundary map and kernel must live on the field's domain".into()));
        }
        let delta = kernel.delta;
        let dt = grid.dt();
        let dx = grid.dx();
        let dim = grid.dim();
        let (nx, ny) = (grid.nx as i64, grid.ny as i64);
        let kmax = (delta / dt).floor() as i32;
        let in_image = |y: &[f64]| match extension {
            Extension::ZeroOutsideDomain => true,
            Extension::ZeroOutsideImage => {
                let shift = map.delta() * map.collar();
                grid.domain
                    .omega
                    .extents()
                    .iter()
                    .zip(y)
                    .all(|(l, v)| *v >= shift && *v <= l - shift)
            }
        };
        let stencils = (0..grid.space_cells())
            .into_par_iter()
            .map(|j| {
                let xj = grid.space_center(j);
                let mut ystar = [0.0; 2];
                map.apply_into(&xj, &mut ystar);
                let jac = map.jacobian_diag(&xj);
                let mut raw = Vec::new();
                let (mut mass, mut dmass) = (0.0, [0.0; 2]);
                let range = |a: usize| -> (i64, i64) {
                    if a >= dim {
                        return (0, 0);
                    }
                    let lo = ((ystar[a] - delta) / dx[a] - 0.5).ceil() as i64;
                    let hi = ((ystar[a] + delta) / dx[a] - 0.5).floor() as i64;
                    (lo, hi)
                };
                let (x_lo, x_hi) = range(0);
                let (y_lo, y_hi) = range(1);
                for dk in -kmax..=kmax {
                    let tau = dk as f64 * dt;
                    let rt = tau * tau;
                    if rt >= delta * delta {
                        continue;
                    }
                    for ix in x_lo..=x_hi {
                        for iy in y_lo..=y_hi {
                            let idx = [ix, iy];
                            let mut diff = [0.0; 2];
                            let mut r2 = rt;
                            for a in 0..dim {
                                diff[a] = ystar[a] - (idx[a] as f64 + 0.5) * dx[a];
                                r2 += diff[a] * diff[a];
                            }
                            let q = r2 / (delta * delta) - 1.0;
                            if q >= 0.0 {
                                continue;
                            }
                            let s = (1.0 / q).exp();
                            let ds = [
                                -s / (q * q) * 2.0 * diff[0] / (delta * delta),
                                -s / (q * q) * 2.0 * diff[1] / (delta * delta),
                            ];
                            mass += s;
                            dmass[0] += ds[0];
                            dmass[1] += ds[1];
                            let inside = ix >= 0 && ix < nx && iy >= 0 && iy < ny;
                            if inside {
                                let m = (ix * ny + iy) as usize;
                                let mut ym = [0.0; 2];
                                grid.space_center_into(m, &mut ym);
                                if in_image(&ym[..dim]) {
                                    raw.push((dk, m as u32, s, ds));
                                }
                            }
                        }
                    }
                }
                raw.into_iter()
                    .map(|(dk, m, s, ds)| {
                        let w = s / mass;
                        let mut g = [0.0; 2];
                        for a in 0..dim {
                            g[a] = jac[a] * (ds[a] - w * dmass[a]) / mass;
                        }
                        Entry { dk, m, w, g }
                    })
                    .collect()
            })
            .collect();
        Ok(Smoother { grid, stencils })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn convolve<F>(&self, z: &[f64], stride: usize, offset: usize, out_comps: usize, weight: F) -> Vec<f64>
    where
        F: Fn(&Entry, usize) -> f64 + Sync,
    {
        let sc = self.grid.space_cells();
        let nt = self.grid.nt as i64;
        let mut out = vec![0.0; self.grid.len() * out_comps];
        out.par_chunks_mut(sc * out_comps).enumerate().for_each(|(i, row)| {
            for (j, stencil) in self.stencils.iter().enumerate() {
                let mut acc = [0.0; 2];
                for e in stencil {
                    let src = i as i64 - e.dk as i64;
                    if src < 0 || src >= nt {
                        continue;
                    }
                    let v = z[(src as usize * sc + e.m as usize) * stride + offset];
                    for (k, a) in acc.iter_mut().enumerate().take(out_comps) {
                        *a += weight(e, k) * v;
                    }
                }
                row[j * out_comps..(j + 1) * out_comps].copy_from_slice(&acc[..out_comps]);
            }
        });
        out
    }

    fn check(&self, field: &GridField) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::Domain("field does not live on the smoother's grid".into()));
        }
        Ok(())
    }

    /// `S_δ z`, componentwise.
    pub fn smooth(&self, field: &GridField) -> Result<GridField> {
        self.check(field)?;
        let nc = field.components();
        let mut data = vec![0.0; field.data().len()];
        for k in 0..nc {
            let comp = self.convolve(field.data(), nc, k, 1, |e, _| e.w);
            for (c, v) in comp.into_iter().enumerate() {
                data[c * nc + k] = v;
            }
        }
        GridField::from_data(self.grid, nc, data)
    }

    /// Exact spatial gradient of the discrete `S_δ z` for a scalar `z`.
    pub fn gradient(&self, field: &GridField) -> Result<GridField> {
        self.check(field)?;
        if field.components() != 1 {
            return Err(Error::Parameter("gradient takes a scalar field".into()));
        }
        let d = self.grid.dim();
        let data = self.convolve(field.data(), 1, 0, d, |e, k| e.g[k]);
        GridField::from_data(self.grid, d, data)
    }
}

/// One-shot `S_δ z` with the given kernel and map.
pub fn smooth(field: &GridField, kernel: &Kernel, map: &BoundaryMap, extension: Extension) -> Result<GridField> {
    Smoother::new(*field.grid(), kernel, map, extension)?.smooth(field)
}

/// Parameters shared by the ladder diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MollifyOptions {
    /// Bump transition width passed to the boundary map.
    pub epsilon: f64,
    pub map: MapOptionsSer,
    pub extension: Extension,
    /// Scale `λ` in the convergence residual `ρ_M((∇v^δ − ∇u)/λ)`.
    pub lambda: f64,
}

/// Serializable mirror of [`MapOptions`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapOptionsSer {
    pub collar: Option<f64>,
    pub charts: usize,
}

impl From<MapOptionsSer> for MapOptions {
    fn from(m: MapOptionsSer) -> Self {
        MapOptions {
            collar: m.collar,
            charts: m.charts,
        }
    }
}

impl Default for MollifyOptions {
    fn default() -> Self {
        MollifyOptions {
            epsilon: 0.5,
            map: MapOptionsSer {
                collar: None,
                charts: 8,
            },
            extension: Extension::ZeroOutsideDomain,
            lambda: 1.0,
        }
    }
}

fn build_pair(grid: &Grid, delta: f64, options: &MollifyOptions) -> Result<(Kernel, BoundaryMap)> {
    let kernel = Kernel::new(delta, grid.dim())?;
    let map = BoundaryMap::build_with(grid.domain.omega.into(), delta, options.epsilon, options.map.into())?;
    Ok((kernel, map))
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformBoundReport {
    pub deltas: Vec<f64>,
    /// `ρ_M(S_δ z) / ρ_M(z)` per `δ`.
    pub ratios: Vec<f64>,
    /// Factor by which `z` was divided to bring its Luxembourg norm to ≤ 1.
    pub normalization: f64,
    /// `max` of the ratios over the ladder.
    pub c_measured: f64,
    /// The same maximum without the finest level.
    pub c_coarser: f64,
    /// Relative change of `C` caused by the finest level.
    pub extension_change: f64,
    /// Smoothed modular nonzero while `ρ_M(z) = 0`.
    pub inconsistent: bool,
}

/// Ratios `ρ_M(S_δ z)/ρ_M(z)` along a `δ` ladder, with `z` rescaled to
/// Luxembourg norm 1 when its norm exceeds 1.
pub fn uniform_bound_check(
    nf: &NFunction,
    field: &GridField,
    deltas: &[f64],
    options: &MollifyOptions,
) -> Result<UniformBoundReport> {
    if deltas.is_empty() {
        return Err(Error::Parameter("empty δ ladder".into()));
    }
    let norm = modular::luxembourg_norm(nf, field)?;
    let normalization = norm.max(1.0);
    let z = field.scaled(1.0 / normalization);
    let base = modular::modular(nf, &z)?.value;
    let mut ratios = Vec::with_capacity(deltas.len());
    let mut inconsistent = false;
    for &delta in deltas {
        let (kernel, map) = build_pair(field.grid(), delta, options)?;
        let sz = Smoother::new(*field.grid(), &kernel, &map, options.extension)?.smooth(&z)?;
        let smoothed = modular::modular(nf, &sz)?.value;
        ratios.push(if base == 0.0 {
            if smoothed != 0.0 {
                inconsistent = true;
            }
            1.0
        } else {
            smoothed / base
        });
    }
    let c_measured = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_coarser = if ratios.len() > 1 {
        ratios[..ratios.len() - 1].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        c_measured
    };
    Ok(UniformBoundReport {
        deltas: deltas.to_vec(),
        ratios,
        normalization,
        c_measured,
        c_coarser,
        extension_change: (c_measured - c_coarser).abs() / c_coarser.abs().max(f64::MIN_POSITIVE),
        inconsistent,
    })
}

/// One level of the approximation ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxLevel {
    pub delta: f64,
    /// `sup|∇Ψ^δ − 1|` measured on the map.
    pub grad_dev: f64,
    /// `ρ_M((∇v^δ − ∇u)/λ)`.
    pub convergence_residual: f64,
    /// `ρ_M((∇S_δ u − S_δ∇u)/λ₁)`.
    pub commutator_residual: f64,
    /// `(grad_dev/λ₁)·ρ_M(|S_δ∇u|)`.
    pub commutator_bound: f64,
    pub commutator_ok: bool,
    #[serde(skip)]
    pub v: GridField,
    #[serde(skip)]
    pub grad_v: GridField,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApproxReport {
    pub levels: Vec<ApproxLevel>,
    pub lambda: f64,
    /// Fixed commutator scale `λ₁ = max(grad_dev(δ_max), 1e-6)`.
    pub lambda1: f64,
    /// Convergence residuals strictly decrease along the ladder.
    pub monotone: bool,
    pub commutator_ok: bool,
}

/// Smooth approximations `v^δ = S_δ u` with exact gradients, convergence and
/// commutator diagnostics. `deltas` is expected in decreasing order.
pub fn approximation_sequence(
    nf: &NFunction,
    u: &GridField,
    grad_u: &GridField,
    deltas: &[f64],
    options: &MollifyOptions,
) -> Result<ApproxReport> {
    if deltas.is_empty() {
        return Err(Error::Parameter("empty δ ladder".into()));
    }
    if u.components() != 1 || grad_u.components() != u.grid().dim() || grad_u.grid() != u.grid() {
        return Err(Error::Parameter("u must be scalar and ∇u must have one component per axis".into()));
    }
    let grid = *u.grid();
    let samples = if grid.dim() == 1 { 2001 } else { 4096 };
    let mut built = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (kernel, map) = build_pair(&grid, delta, options)?;
        let grad_dev = map.verify(samples)?.grad_dev;
        built.push((delta, kernel, map, grad_dev));
    }
    let dev_max = built
        .iter()
        .cloned()
        .fold((0.0, 0.0), |acc, b| if b.0 > acc.0 { (b.0, b.3) } else { acc })
        .1;
    let lambda1 = f64::max(dev_max, 1e-6);
    let mut levels = Vec::with_capacity(built.len());
    for (delta, kernel, map, grad_dev) in built {
        let smoother = Smoother::new(grid, &kernel, &map, options.extension)?;
        let v = smoother.smooth(u)?;
        let grad_v = smoother.gradient(u)?;
        let s_grad_u = smoother.smooth(grad_u)?;
        let comm = grad_v.sub(&s_grad_u)?.scaled(1.0 / lambda1);
        let commutator_residual = modular::modular(nf, &comm)?.value;
        let ModularReport { value: s_mod, .. } = modular::modular(nf, &s_grad_u)?;
        let commutator_bound = grad_dev / lambda1 * s_mod;
        let convergence_residual = modular::modular(nf, &grad_v.sub(grad_u)?.scaled(1.0 / options.lambda))?.value;
        levels.push(ApproxLevel {
            delta,
            grad_dev,
            convergence_residual,
            commutator_residual,
            commutator_bound,
            commutator_ok: commutator_residual <= commutator_bound * (1.0 + 1e-9) + 1e-14,
            v,
            grad_v,
        });
    }
    let monotone = levels
        .windows(2)
        .all(|w| w[1].convergence_residual < w[0].convergence_residual);
    let commutator_ok = levels.iter().all(|l| l.commutator_ok);
    Ok(ApproxReport {
        levels,
        lambda: options.lambda,
        lambda1,
        monotone,
        commutator_ok,
    })
}

/// Simple-function approximation: rounds each value to the nearest multiple
/// of `max|z| / levels`.
pub fn quantize(field: &GridField, levels: usize) -> GridField {
    let top = field.max_abs();
    if top == 0.0 || levels == 0 {
        return field.map(|_| 0.0);
    }
    let step = top / levels as f64;
    field.map(|v| step * (v / step).round())
}
