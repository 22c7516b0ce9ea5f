//! Galerkin approximation of `u_t − div A(t,x,∇u) = f` with `A ∈ 𝒜` and zero
//! Dirichlet data: Dirichlet-Laplacian sine basis, implicit midpoint in time
//! with a Newton inner solve on the mollified selection `A^ε`, the discrete
//! energy identity, the a priori bound and Minty-type inclusion diagnostics.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Grid, Omega, SpaceTime};
use crate::error::{Error, Result};
use crate::field::{fmt_f64, GridField};
use crate::graph::{check_axioms, maximality_residual, probe_ladder, GraphCertificate, MollifiedSelection, MonotoneGraph, Selection};
use crate::numerics::quantile;

/// One eigenpair `(ω, λ)` of the Dirichlet Laplacian, indexed by its wave numbers.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Mode {
    pub k: [usize; 2],
    pub lambda: f64,
}

/// Normalised sine eigenfunctions sampled at the cell centers of a spatial grid.
///
/// On the midpoint grid the discrete Gram matrix is the identity up to
/// roundoff as long as every wave number stays below the grid size.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    omega: Omega,
    nx: usize,
    ny: usize,
    modes: Vec<Mode>,
    /// `values[i][s]`.
    values: Vec<Vec<f64>>,
    /// `grads[i][s * d + j]`.
    grads: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
    weight: f64,
}

/// Coefficients of `P^n u₀` and the reconstruction error `‖P^n u₀ − u₀‖₂`.
#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    pub error: f64,
    pub norm_u0: f64,
    pub norm_projection: f64,
}

fn sine(l: f64, k: usize, x: f64) -> (f64, f64) {
    let a = (2.0 / l).sqrt();
    let w = k as f64 * std::f64::consts::PI / l;
    (a * (w * x).sin(), a * w * (w * x).cos())
}

impl GalerkinBasis {
    /// First `n` modes on `Ω` sampled on an `nx` (× `ny`) midpoint grid.
    /// Wave numbers are limited to a quarter of the grid size per axis.
    pub fn build(omega: Omega, n: usize, nx: usize, ny: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("the basis needs n ≥ 1".into()));
        }
        let grid = Grid::new(SpaceTime::new(1.0, omega)?, 1, nx, ny)?;
        let (nx, ny) = (grid.nx, grid.ny);
        let ext = omega.extents();
        let kmax_x = nx / 4;
        let mut modes = Vec::new();
        match omega {
            Omega::Interval { length } => {
                for k in 1..=kmax_x {
                    let w = k as f64 * std::f64::consts::PI / length;
                    modes.push(Mode { k: [k, 0], lambda: w * w });
                }
            }
            Omega::Rectangle { lx, ly } => {
                for k in 1..=kmax_x {
                    for m in 1..=ny / 4 {
                        let (wx, wy) = (k as f64 * std::f64::consts::PI / lx, m as f64 * std::f64::consts::PI / ly);
                        modes.push(Mode {
                            k: [k, m],
                            lambda: wx * wx + wy * wy,
                        });
                    }
                }
                modes.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap().then(a.k.cmp(&b.k)));
            }
        }
        if n > modes.len() {
            return Err(Error::Resolution(format!(
                "n = {n} modes exceed the Nyquist guard of a {nx}x{ny} grid ({} available)",
                modes.len()
            )));
        }
        modes.truncate(n);
        let centers = grid.space_centers();
        let d = omega.dim();
        let mut values = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for m in &modes {
            let mut v = Vec::with_capacity(centers.len());
            let mut g = Vec::with_capacity(centers.len() * d);
            for x in &centers {
                let (sx, dsx) = sine(ext[0], m.k[0], x[0]);
                if d == 1 {
                    v.push(sx);
                    g.push(dsx);
                } else {
                    let (sy, dsy) = sine(ext[1], m.k[1], x[1]);
                    v.push(sx * sy);
                    g.push(dsx * sy);
                    g.push(sx * dsy);
                }
            }
            values.push(v);
            grads.push(g);
        }
        Ok(GalerkinBasis {
            omega,
            nx,
            ny,
            modes,
            values,
            grads,
            centers,
            weight: grid.space_weight(),
        })
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn omega(&self) -> Omega {
        self.omega
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Spatial quadrature weight of one cell.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `ω_i` at an arbitrary point.
    pub fn eval(&self, i: usize, x: &[f64]) -> f64 {
        let ext = self.omega.extents();
        let m = self.modes[i];
        let (sx, _) = sine(ext[0], m.k[0], x[0]);
        if self.dim() == 1 {
            sx
        } else {
            sx * sine(ext[1], m.k[1], x[1]).0
        }
    }

    /// Discrete inner product `Σ_s w a_s b_s`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    /// Discrete Gram matrix `⟨ω_i, ω_j⟩`.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.inner(&self.values[i], &self.values[j])).collect())
            .collect()
    }

    /// Discrete Rayleigh quotient `⟨∇ω_i, ∇ω_i⟩ / ⟨ω_i, ω_i⟩`.
    pub fn rayleigh(&self, i: usize) -> f64 {
        self.inner(&self.grads[i], &self.grads[i]) / self.inner(&self.values[i], &self.values[i])
    }

    /// `Σ c_i ω_i` at the cell centers.
    pub fn reconstruct(&self, c: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.cells()];
        for (ci, v) in c.iter().zip(&self.values) {
            for (a, b) in u.iter_mut().zip(v) {
                *a += ci * b;
            }
        }
        u
    }

    /// `Σ c_i ∇ω_i` at the cell centers, `d` values per cell.
    pub fn gradient(&self, c: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.cells() * self.dim()];
        for (ci, v) in c.iter().zip(&self.grads) {
            for (a, b) in g.iter_mut().zip(v) {
                *a += ci * b;
            }
        }
        g
    }

    /// `P^n u₀` from cell-center samples of `u₀`.
    pub fn project(&self, u0: &[f64]) -> Result<Projection> {
        if u0.len() != self.cells() {
            return Err(Error::Domain(format!(
                "initial datum has {} samples, the basis grid has {} cells",
                u0.len(),
                self.cells()
            )));
        }
        let coefficients: Vec<f64> = self.values.iter().map(|v| self.inner(u0, v)).collect();
        let pu = self.reconstruct(&coefficients);
        let diff: Vec<f64> = pu.iter().zip(u0).map(|(a, b)| a - b).collect();
        Ok(Projection {
            error: self.inner(&diff, &diff).sqrt(),
            norm_u0: self.inner(u0, u0).sqrt(),
            norm_projection: self.inner(&pu, &pu).sqrt(),
            coefficients,
        })
    }

    /// `P^n u₀` for `u₀` given pointwise.
    pub fn project_fn<F: Fn(&[f64]) -> f64>(&self, u0: F) -> Result<Projection> {
        let samples: Vec<f64> = self.centers.iter().map(|x| u0(x)).collect();
        self.project(&samples)
    }
}

type SourceFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Right-hand side `f ∈ L^∞(Q)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Function(Arc<SourceFn>),
    /// Piecewise constant in time on the field's time cells; the spatial grid
    /// must match the basis grid.
    Field(GridField),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Forcing::Zero"),
            Forcing::Function(_) => write!(f, "Forcing::Function"),
            Forcing::Field(g) => write!(f, "Forcing::Field({} cells)", g.len()),
        }
    }
}

impl Forcing {
    pub fn function<F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Function(Arc::new(f))
    }

    fn check(&self, basis: &GalerkinBasis) -> Result<()> {
        if let Forcing::Field(g) = self {
            let (nx, ny) = basis.shape();
            if g.components() != 1 || g.grid().nx != nx || g.grid().ny != ny || g.grid().domain.omega != basis.omega() {
                return Err(Error::Domain("forcing field does not live on the basis grid".into()));
            }
        }
        Ok(())
    }

    /// Samples at time `t` on the basis cells.
    fn sample(&self, basis: &GalerkinBasis, t: f64, out: &mut [f64]) {
        match self {
            Forcing::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Forcing::Function(f) => {
                for (o, x) in out.iter_mut().zip(basis.centers()) {
                    *o = f(t, x);
                }
            }
            Forcing::Field(g) => {
                let grid = g.grid();
                let it = ((t / grid.dt()).floor() as usize).min(grid.nt - 1);
                let sc = grid.space_cells();
                out.copy_from_slice(&g.data()[it * sc..(it + 1) * sc]);
            }
        }
    }

    /// `‖f‖_∞`, sampled at the given times for analytic sources.
    fn sup_norm(&self, basis: &GalerkinBasis, times: &[f64]) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Field(g) => g.max_abs(),
            Forcing::Function(_) => {
                let mut buf = vec![0.0; basis.cells()];
                let mut m = 0.0_f64;
                for &t in times {
                    self.sample(basis, t, &mut buf);
                    m = buf.iter().fold(m, |a, v| a.max(v.abs()));
                }
                m
            }
        }
    }
}

/// Time stepping controls.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Newton stops once `‖G‖_∞` falls below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Smallest admissible substep as a fraction of `dt`.
    pub min_dt_fraction: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            t_end: 0.1,
            dt: 1e-3,
            newton_tol: 1e-10,
            max_newton: 40,
            min_dt_fraction: 1.0 / 1024.0,
        }
    }
}

/// Initial datum `u₀(x)`.
pub type InitialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A Galerkin problem: graph, data and spatial resolution.
#[derive(Clone)]
pub struct Problem {
    pub graph: MonotoneGraph,
    pub forcing: Forcing,
    pub u0: Arc<InitialFn>,
    pub omega: Omega,
    pub nx: usize,
    pub ny: usize,
    pub options: SolveOptions,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("graph", &self.graph)
            .field("forcing", &self.forcing)
            .field("omega", &self.omega)
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("options", &self.options)
            .finish()
    }
}

impl Problem {
    pub fn new<U: Fn(&[f64]) -> f64 + Send + Sync + 'static>(
        graph: MonotoneGraph,
        forcing: Forcing,
        u0: U,
        omega: Omega,
        nx: usize,
        options: SolveOptions,
    ) -> Self {
        let ny = if omega.dim() == 2 { nx } else { 1 };
        Problem {
            graph,
            forcing,
            u0: Arc::new(u0),
            omega,
            nx,
            ny,
            options,
        }
    }

    pub fn basis(&self, n: usize) -> Result<GalerkinBasis> {
        GalerkinBasis::build(self.omega, n, self.nx, self.ny)
    }

    /// Runs the Galerkin scheme with `n` modes and mollification `ε`.
    pub fn solve(&self, eps: f64, n: usize) -> Result<GalerkinTrajectory> {
        let basis = Arc::new(self.basis(n)?);
        let projection = basis.project_fn(|x| (self.u0)(x))?;
        solve(&basis, &self.graph, &self.forcing, &projection.coefficients, eps, &self.options)
    }

    /// Coercivity certificate of the graph on a `3 × 3` sample of `Q` and
    /// `|ξ| ≤ 4`.
    pub fn certificate(&self) -> GraphCertificate {
        graph_certificate(&self.graph, self.omega, self.options.t_end)
    }
}

/// `(c_*, k)` for `graph` from samples spread over `Q = (0,T) × Ω`.
pub fn graph_certificate(graph: &MonotoneGraph, omega: Omega, t_end: f64) -> GraphCertificate {
    let ext = omega.extents();
    let mut points = Vec::new();
    for it in 0..3 {
        let t = (it as f64 + 0.5) * t_end / 3.0;
        for ix in 0..3 {
            let x0 = (ix as f64 + 0.5) * ext[0] / 3.0;
            if ext.len() == 1 {
                points.push((t, vec![x0]));
            } else {
                for iy in 0..3 {
                    points.push((t, vec![x0, (iy as f64 + 0.5) * ext[1] / 3.0]));
                }
            }
        }
    }
    let radius = 4.0;
    let xis: Vec<Vec<f64>> = if ext.len() == 1 {
        (0..=80).map(|i| vec![-radius + 2.0 * radius * i as f64 / 80.0]).collect()
    } else {
        let mut v = Vec::new();
        for i in 0..=40 {
            let r = radius * i as f64 / 40.0;
            for k in 0..8 {
                let th = k as f64 * std::f64::consts::FRAC_PI_4;
                v.push(vec![r * th.cos(), r * th.sin()]);
            }
        }
        v
    };
    let measure = t_end * omega.measure();
    check_axioms(graph, graph.nfunction(), &points, &xis, measure / points.len() as f64)
}

/// Coefficient paths and energy ledger of one Galerkin run.
#[derive(Debug, Clone)]
pub struct GalerkinTrajectory {
    pub eps: f64,
    basis: Arc<GalerkinBasis>,
    graph: MonotoneGraph,
    selection: MollifiedSelection,
    forcing: Forcing,
    /// Mesh times `t_0 = 0 < … < t_N`.
    pub times: Vec<f64>,
    /// `c(t_k)`.
    pub coefficients: Vec<Vec<f64>>,
    /// Midpoint states `(c_k + c_{k+1})/2`.
    pub midpoints: Vec<Vec<f64>>,
    /// `Δt_k ⟨A^ε(∇u_mid), ∇u_mid⟩`.
    pub dissipation: Vec<f64>,
    /// `Δt_k ⟨f(t_mid), u_mid⟩`.
    pub work: Vec<f64>,
    /// Final Newton residual of each step.
    pub newton_residuals: Vec<f64>,
    /// Number of halvings that were needed.
    pub halvings: usize,
}

/// Mid-cell samples of a trajectory on a uniform space-time grid.
#[derive(Debug, Clone)]
pub struct TrajectoryFields {
    pub u: GridField,
    pub grad_u: GridField,
    pub flux: GridField,
}

struct Stage<'a> {
    basis: &'a GalerkinBasis,
    sel: &'a MollifiedSelection,
    fbuf: Vec<f64>,
}

impl Stage<'_> {
    /// `F(t, m)` and, optionally, `K = ∂(−F)/∂m`.
    fn rhs(&mut self, forcing: &Forcing, t: f64, m: &[f64], jac: Option<&mut DMatrix<f64>>) -> (Vec<f64>, f64, f64) {
        let b = self.basis;
        let (n, d, w) = (b.n(), b.dim(), b.weight());
        forcing.sample(b, t, &mut self.fbuf);
        let grad = b.gradient(m);
        let u = b.reconstruct(m);
        let mut flux = vec![0.0; grad.len()];
        let mut jcells = vec![[[0.0; 2]; 2]; b.cells()];
        for s in 0..b.cells() {
            self.sel
                .eval_with_jacobian(t, &b.centers[s], &grad[s * d..(s + 1) * d], &mut flux[s * d..(s + 1) * d], &mut jcells[s]);
        }
        let mut f = vec![0.0; n];
        for (i, fi) in f.iter_mut().enumerate() {
            let load = b.inner(&self.fbuf, &b.values[i]);
            let stiff = b.inner(&flux, &b.grads[i]);
            *fi = load - stiff;
        }
        if let Some(k) = jac {
            k.fill(0.0);
            for (s, js) in jcells.iter().enumerate().take(b.cells()) {
                for i in 0..n {
                    let gi = &b.grads[i][s * d..(s + 1) * d];
                    // gᵢᵀ J
                    let mut row = [0.0; 2];
                    for (q, r) in row.iter_mut().enumerate().take(d) {
                        *r = (0..d).map(|p| gi[p] * js[p][q]).sum();
                    }
                    for j in 0..n {
                        let gj = &b.grads[j][s * d..(s + 1) * d];
                        k[(i, j)] += w * (0..d).map(|q| row[q] * gj[q]).sum::<f64>();
                    }
                }
            }
        }
        let dissipation = b.inner(&flux, &grad);
        let work = b.inner(&self.fbuf, &u);
        (f, dissipation, work)
    }
}

/// Integrates `c' = ⟨f, ω_i⟩ − ⟨A^ε(∇u), ∇ω_i⟩` from `c0` by the implicit
/// midpoint rule. Steps whose Newton iteration stalls are split in halves.
pub fn solve(
    basis: &Arc<GalerkinBasis>,
    graph: &MonotoneGraph,
    forcing: &Forcing,
    c0: &[f64],
    eps: f64,
    opts: &SolveOptions,
) -> Result<GalerkinTrajectory> {
    if c0.len() != basis.n() {
        return Err(Error::Parameter(format!("{} initial coefficients for {} modes", c0.len(), basis.n())));
    }
    if !(opts.t_end > 0.0 && opts.dt > 0.0 && opts.dt <= opts.t_end) {
        return Err(Error::Parameter(format!("need 0 < dt ≤ T, got dt = {}, T = {}", opts.dt, opts.t_end)));
    }
    if !(eps >= 1e-8) {
        return Err(Error::Resolution(format!("ε = {eps} is below the ξ-quadrature resolution 1e-8")));
    }
    forcing.check(basis)?;
    let sel = graph.mollified(eps)?;
    let mut stage = Stage {
        basis,
        sel: &sel,
        fbuf: vec![0.0; basis.cells()],
    };
    let n = basis.n();
    let steps = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let dt = opts.t_end / steps as f64;
    let mut traj = GalerkinTrajectory {
        eps,
        basis: basis.clone(),
        graph: graph.clone(),
        selection: sel.clone(),
        forcing: forcing.clone(),
        times: vec![0.0],
        coefficients: vec![c0.to_vec()],
        midpoints: Vec::new(),
        dissipation: Vec::new(),
        work: Vec::new(),
        newton_residuals: Vec::new(),
        halvings: 0,
    };
    let mut kmat = DMatrix::zeros(n, n);
    for step in 0..steps {
        let target = (step + 1) as f64 * dt;
        let mut pending = vec![dt];
        while let Some(h) = pending.pop() {
            let t0 = *traj.times.last().unwrap();
            let h = if pending.is_empty() { target - t0 } else { h };
            let c = traj.coefficients.last().unwrap().clone();
            match midpoint_step(&mut stage, forcing, t0, h, &c, opts, &mut kmat) {
                Some((mid, res, diss, work)) => {
                    let next: Vec<f64> = mid.iter().zip(&c).map(|(m, c)| 2.0 * m - c).collect();
                    traj.times.push(t0 + h);
                    traj.coefficients.push(next);
                    traj.midpoints.push(mid);
                    traj.newton_residuals.push(res);
                    traj.dissipation.push(h * diss);
                    traj.work.push(h * work);
                }
                None => {
                    if h / 2.0 < opts.min_dt_fraction * dt {
                        return Err(Error::Solver(format!(
                            "Newton failed at t = {t0} with the smallest substep {h:e}"
                        )));
                    }
                    traj.halvings += 1;
                    pending.push(h / 2.0);
                    pending.push(h / 2.0);
                }
            }
        }
    }
    Ok(traj)
}

fn midpoint_step(
    stage: &mut Stage<'_>,
    forcing: &Forcing,
    t0: f64,
    h: f64,
    c: &[f64],
    opts: &SolveOptions,
    kmat: &mut DMatrix<f64>,
) -> Option<(Vec<f64>, f64, f64, f64)> {
    let n = c.len();
    let tm = t0 + 0.5 * h;
    let mut m = c.to_vec();
    for _ in 0..opts.max_newton {
        let (f, _, _) = stage.rhs(forcing, tm, &m, Some(kmat));
        let g: Vec<f64> = (0..n).map(|i| m[i] - c[i] - 0.5 * h * f[i]).collect();
        let res = g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !res.is_finite() {
            return None;
        }
        if res <= opts.newton_tol {
            let (_, diss, work) = stage.rhs(forcing, tm, &m, None);
            return Some((m, res, diss, work));
        }
        let jac = DMatrix::identity(n, n) + &*kmat * (0.5 * h);
        let delta = jac.lu().solve(&DVector::from_vec(g))?;
        for i in 0..n {
            m[i] -= delta[i];
        }
    }
    None
}

impl GalerkinTrajectory {
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn basis(&self) -> &GalerkinBasis {
        &self.basis
    }

    pub fn graph(&self) -> &MonotoneGraph {
        &self.graph
    }

    /// `u(t_k)` at the basis cell centers.
    pub fn u_at(&self, k: usize) -> Vec<f64> {
        self.basis.reconstruct(&self.coefficients[k])
    }

    /// `‖u(t_k)‖₂²` for every mesh time.
    pub fn l2_squared(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.iter().map(|v| v * v).sum()).collect()
    }

    /// `‖u(T) − u_exact(T)‖₂` against a pointwise reference.
    pub fn l2_error_final<F: Fn(&[f64]) -> f64>(&self, exact: F) -> f64 {
        let u = self.u_at(self.times.len() - 1);
        let diff: Vec<f64> = u.iter().zip(self.basis.centers()).map(|(a, x)| a - exact(x)).collect();
        self.basis.inner(&diff, &diff).sqrt()
    }

    /// Coefficients at time `t` by linear interpolation on the mesh.
    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.coefficients[k - 1]
            .iter()
            .zip(&self.coefficients[k])
            .map(|(x, y)| (1.0 - a) * x + a * y)
            .collect()
    }

    /// `u`, `∇u` and `A^ε(∇u)` at the centers of a uniform grid with `nt`
    /// time cells on `(0, T) × Ω`.
    pub fn fields(&self, nt: usize) -> Result<TrajectoryFields> {
        let t_end = *self.times.last().unwrap();
        let (nx, ny) = self.basis.shape();
        let grid = Grid::new(SpaceTime::new(t_end, self.basis.omega())?, nt, nx, ny)?;
        let d = self.basis.dim();
        let sc = grid.space_cells();
        let mut u = GridField::zeros(grid, 1);
        let mut grad = GridField::zeros(grid, d);
        let mut flux = GridField::zeros(grid, d);
        for it in 0..nt {
            let t = grid.time_center(it);
            let c = self.coefficients_at(t);
            let uu = self.basis.reconstruct(&c);
            let gg = self.basis.gradient(&c);
            u.data_mut()[it * sc..(it + 1) * sc].copy_from_slice(&uu);
            grad.data_mut()[it * sc * d..(it + 1) * sc * d].copy_from_slice(&gg);
            for s in 0..sc {
                let x = &self.basis.centers()[s];
                self.selection.flux(t, x, &gg[s * d..(s + 1) * d], flux.cell_mut(it * sc + s));
            }
        }
        Ok(TrajectoryFields { u, grad_u: grad, flux })
    }

    /// Writes `t,c_1,…,c_n`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=self.n()).map(|i| format!("c_{i}"))).collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, c) in self.times.iter().zip(&self.coefficients) {
            let row: Vec<String> = std::iter::once(*t).chain(c.iter().copied()).map(fmt_f64).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `L(h) = max_i max_{|s₁−s₂| = h} |c_i(s₁) − c_i(s₂)|` on `h = 2^j Δt`.
    pub fn equicontinuity(&self) -> Vec<(f64, f64)> {
        let steps = self.coefficients.len() - 1;
        let t_end = *self.times.last().unwrap();
        let mut out = Vec::new();
        let mut lag = 1;
        while lag <= steps {
            let h = lag as f64 * t_end / steps as f64;
            let mut l = 0.0_f64;
            for k in 0..=steps - lag {
                for (a, b) in self.coefficients[k].iter().zip(&self.coefficients[k + lag]) {
                    l = l.max((a - b).abs());
                }
            }
            out.push((h, l));
            lag *= 2;
        }
        out
    }
}

/// Energy identity and a priori bound along one trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// `|½‖u(s)‖² + ∫₀^s⟨A^ε,∇u⟩ − ½‖u(0)‖² − ∫₀^s⟨f,u⟩|` per mesh time.
    pub identity_residuals: Vec<f64>,
    pub max_identity_residual: f64,
    pub energy_scale: f64,
    pub identity_tolerance: f64,
    pub identity_ok: bool,
    pub sup_l2_squared: f64,
    pub rho_m_grad: f64,
    pub rho_mstar_flux: f64,
    pub c_star: f64,
    pub k_l1: f64,
    pub f_sup: f64,
    pub u0_l2_squared: f64,
    /// `c` with `LHS = c·(‖u₀‖² + ‖f‖_∞ + ‖k‖₁)`.
    pub realized_c: f64,
}

/// Checks the discrete energy identity and evaluates the a priori bound
/// with the certificate `(c_*, k)`.
pub fn energy_report(traj: &GalerkinTrajectory, cert: &GraphCertificate) -> EnergyReport {
    let e = traj.l2_squared();
    let mut residuals = vec![0.0];
    let (mut diss, mut work) = (0.0, 0.0);
    for k in 0..traj.midpoints.len() {
        diss += traj.dissipation[k];
        work += traj.work[k];
        residuals.push((0.5 * e[k + 1] + diss - 0.5 * e[0] - work).abs());
    }
    let scale = e.iter().cloned().fold(0.0, f64::max).max(diss.abs()).max(work.abs());
    let max_res = residuals.iter().cloned().fold(0.0, f64::max);
    let dt_max = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let tol = 10.0 * dt_max * dt_max * scale + 1e-12;

    let basis = &traj.basis;
    let nf = traj.graph.nfunction();
    let d = basis.dim();
    let (mut rho_m, mut rho_ms) = (0.0, 0.0);
    let mut flux = vec![0.0; d];
    for (k, mid) in traj.midpoints.iter().enumerate() {
        let h = traj.times[k + 1] - traj.times[k];
        let t = traj.times[k] + 0.5 * h;
        let g = basis.gradient(mid);
        let (mut sm, mut sms) = (0.0, 0.0);
        for s in 0..basis.cells() {
            let x = &basis.centers()[s];
            let gs = &g[s * d..(s + 1) * d];
            traj.selection.flux(t, x, gs, &mut flux);
            let r = gs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let a = flux.iter().map(|v| v * v).sum::<f64>().sqrt();
            sm += nf.value(t, x, r);
            sms += nf.conjugate_value(t, x, a).unwrap_or(f64::INFINITY);
        }
        rho_m += h * basis.weight() * sm;
        rho_ms += h * basis.weight() * sms;
    }
    let c_star = cert.c_star.unwrap_or(0.0);
    let k_l1 = cert.k_integral;
    let f_sup = traj.forcing.sup_norm(basis, &traj.times);
    let sup = e.iter().cloned().fold(0.0, f64::max);
    let lhs = sup + c_star * (rho_m + rho_ms);
    let base = e[0] + f_sup + k_l1;
    let realized = if lhs == 0.0 { 0.0 } else { lhs / base };
    EnergyReport {
        max_identity_residual: max_res,
        identity_residuals: residuals,
        energy_scale: scale,
        identity_tolerance: tol,
        identity_ok: max_res <= tol,
        sup_l2_squared: sup,
        rho_m_grad: rho_m,
        rho_mstar_flux: rho_ms,
        c_star,
        k_l1,
        f_sup,
        u0_l2_squared: e[0],
        realized_c: realized,
    }
}

/// Settings for the inclusion diagnostics.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MintyOptions {
    /// Residuals below `−floor` count as violations.
    pub floor: f64,
    /// Cells with `||∇u| − r_jump| < band·ε` form the smoothing band.
    pub band: f64,
    /// Time samples per trajectory.
    pub time_samples: usize,
    /// Allowed violation fraction outside the band on the finest level.
    pub max_violation_fraction: f64,
    /// Relative slack in the limsup pairing check.
    pub pairing_tolerance: f64,
}

impl Default for MintyOptions {
    fn default() -> Self {
        MintyOptions {
            floor: 1e-6,
            band: 1.0,
            time_samples: 32,
            max_violation_fraction: 0.01,
            pairing_tolerance: 1e-2,
        }
    }
}

const QUANTILES: [f64; 4] = [0.5, 0.9, 0.99, 1.0];

#[derive(Debug, Clone, Serialize)]
pub struct MintyLevel {
    pub eps: f64,
    /// `∫_Q A^ε·∇u^ε`.
    pub pairing: f64,
    /// Quantiles `0.5, 0.9, 0.99, 1` of `max(0, −residual)` over all cells.
    pub violation_quantiles: Vec<f64>,
    pub min_residual: f64,
    pub cells: usize,
    pub band_cells: usize,
    /// Fraction of cells outside the band with residual below `−floor`.
    pub violation_fraction_outside_band: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MintyReport {
    pub levels: Vec<MintyLevel>,
    /// Richardson limit of the pairings.
    pub extrapolated_pairing: f64,
    /// Pairing of the Richardson limits of `A^ε` and `∇u^ε`.
    pub limit_pairing: f64,
    pub pairings_bounded: bool,
    pub limsup_ok: bool,
    pub quantiles_monotone: bool,
    pub inclusion_ok: bool,
    pub passed: bool,
}

/// Inclusion diagnostics for trajectories on a decreasing `ε` ladder.
pub fn minty_check(trajs: &[GalerkinTrajectory], opts: &MintyOptions) -> Result<MintyReport> {
    if trajs.len() < 3 {
        return Err(Error::Parameter("the Minty check needs at least three ε levels".into()));
    }
    if trajs.windows(2).any(|w| w[1].eps >= w[0].eps) {
        return Err(Error::Parameter("ε ladder must be strictly decreasing".into()));
    }
    let fields: Vec<TrajectoryFields> = trajs.iter().map(|t| t.fields(opts.time_samples)).collect::<Result<_>>()?;
    let grid = *fields[0].u.grid();
    if fields.iter().any(|f| !f.u.grid().same_shape(&grid)) {
        return Err(Error::Domain("trajectories live on different grids".into()));
    }
    let graph = trajs[0].graph.clone();
    let jumps = graph.jump_radii();
    let levels: Vec<MintyLevel> = trajs
        .par_iter()
        .zip(&fields)
        .map(|(traj, f)| {
            let residuals: Vec<(f64, bool)> = (0..grid.len())
                .map(|c| {
                    let (t, x) = grid.center(c);
                    let xi = f.grad_u.cell(c);
                    let a = f.flux.cell(c);
                    let r = f.grad_u.magnitude(c);
                    let in_band = jumps.iter().any(|j| (r - j).abs() < opts.band * traj.eps);
                    let probes = probe_ladder(xi, 2.0 * r.max(1.0), 24, 8);
                    (maximality_residual(&graph, t, &x, xi, a, &probes), in_band)
                })
                .collect();
            let mut viol: Vec<f64> = residuals.iter().map(|(r, _)| (-r).max(0.0)).collect();
            viol.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let outside: Vec<f64> = residuals.iter().filter(|(_, b)| !b).map(|(r, _)| *r).collect();
            let bad = outside.iter().filter(|&&r| r < -opts.floor).count();
            MintyLevel {
                eps: traj.eps,
                pairing: f.flux.pairing(&f.grad_u).unwrap_or(f64::NAN),
                violation_quantiles: QUANTILES.iter().map(|&q| quantile(&viol, q)).collect(),
                min_residual: residuals.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
                cells: residuals.len(),
                band_cells: residuals.len() - outside.len(),
                violation_fraction_outside_band: if outside.is_empty() { 0.0 } else { bad as f64 / outside.len() as f64 },
            }
        })
        .collect();
    let l = levels.len();
    let (fa, fb) = (&fields[l - 2], &fields[l - 1]);
    let ratio = levels[l - 2].eps / levels[l - 1].eps;
    // first-order Richardson in ε
    let rich = |coarse: f64, fine: f64| (ratio * fine - coarse) / (ratio - 1.0);
    let extrapolated = rich(levels[l - 2].pairing, levels[l - 1].pairing);
    let a_lim = fa.flux.zip_with(&fb.flux, rich)?;
    let g_lim = fa.grad_u.zip_with(&fb.grad_u, rich)?;
    let limit_pairing = a_lim.pairing(&g_lim)?;
    let limsup_ok = extrapolated <= limit_pairing + opts.pairing_tolerance * limit_pairing.abs().max(1e-12);
    let pairings_bounded = levels.iter().all(|v| v.pairing.is_finite());
    let quantiles_monotone = levels
        .windows(2)
        .all(|w| w[1].violation_quantiles.iter().zip(&w[0].violation_quantiles).all(|(f, c)| *f <= c + 1e-12));
    let inclusion_ok = levels[l - 1].violation_fraction_outside_band < opts.max_violation_fraction;
    Ok(MintyReport {
        passed: pairings_bounded && limsup_ok && quantiles_monotone && inclusion_ok,
        levels,
        extrapolated_pairing: extrapolated,
        limit_pairing,
        pairings_bounded,
        limsup_ok,
        quantiles_monotone,
        inclusion_ok,
    })
}

/// One `(ε, n)` entry of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub eps: f64,
    pub n: usize,
    pub realized_c: f64,
    pub rho_m_grad: f64,
    pub rho_mstar_flux: f64,
    pub sup_l2_squared: f64,
    pub identity_residual: f64,
    pub projection_error: f64,
    /// `L(h)` at the smallest and largest lag.
    pub modulus_min_lag: f64,
    pub modulus_max_lag: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub eps_ladder: Vec<f64>,
    pub n_ladder: Vec<usize>,
    pub entries: Vec<SweepEntry>,
    pub certificate_c_star: Option<f64>,
    /// Every tabulated quantity has `max/min ≤ bound_ratio` over the table.
    pub bound_ratio: f64,
    pub uniformly_bounded: bool,
    /// Projection error of `u₀` is nonincreasing in `n`.
    pub projection_monotone: bool,
    /// `L(h_min)` shrinks relative to `L(h_max)` on every entry.
    pub equicontinuous: bool,
    pub passed: bool,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "eps,n,realized_c,rho_m_grad,rho_mstar_flux,sup_l2_squared,identity_residual,projection_error,modulus_min_lag,modulus_max_lag"
        )?;
        for e in &self.entries {
            let vals = [
                e.realized_c,
                e.rho_m_grad,
                e.rho_mstar_flux,
                e.sup_l2_squared,
                e.identity_residual,
                e.projection_error,
                e.modulus_min_lag,
                e.modulus_max_lag,
            ];
            let row: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "{},{},{}", fmt_f64(e.eps), e.n, row.join(","))?;
        }
        Ok(())
    }
}

/// Runs every `(ε, n)` pair of the ladders and cross-tabulates the energy
/// quantities.
pub fn sweep(problem: &Problem, eps_ladder: &[f64], n_ladder: &[usize]) -> Result<SweepReport> {
    if eps_ladder.len() < 3 || n_ladder.len() < 3 {
        return Err(Error::Parameter("sweeps need ladders of length ≥ 3".into()));
    }
    if eps_ladder.windows(2).any(|w| w[1] >= w[0]) || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("ε ladder must decrease and n ladder must increase".into()));
    }
    let cert = problem.certificate();
    let pairs: Vec<(f64, usize)> = eps_ladder.iter().flat_map(|&e| n_ladder.iter().map(move |&n| (e, n))).collect();
    let entries: Vec<SweepEntry> = pairs
        .par_iter()
        .map(|&(eps, n)| -> Result<SweepEntry> {
            let basis = Arc::new(problem.basis(n)?);
            let proj = basis.project_fn(|x| (problem.u0)(x))?;
            let traj = solve(&basis, &problem.graph, &problem.forcing, &proj.coefficients, eps, &problem.options)?;
            let energy = energy_report(&traj, &cert);
            let modulus = traj.equicontinuity();
            Ok(SweepEntry {
                eps,
                n,
                realized_c: energy.realized_c,
                rho_m_grad: energy.rho_m_grad,
                rho_mstar_flux: energy.rho_mstar_flux,
                sup_l2_squared: energy.sup_l2_squared,
                identity_residual: energy.max_identity_residual,
                projection_error: proj.error,
                modulus_min_lag: modulus.first().map_or(0.0, |m| m.1),
                modulus_max_lag: modulus.last().map_or(0.0, |m| m.1),
            })
        })
        .collect::<Result<_>>()?;
    let bound_ratio = 2.0;
    let bounded = |get: fn(&SweepEntry) -> f64| {
        let vals: Vec<f64> = entries.iter().map(get).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &v| (a.min(v), b.max(v)));
        vals.iter().all(|v| v.is_finite()) && (hi == 0.0 || hi <= bound_ratio * lo)
    };
    let uniformly_bounded = bounded(|e| e.realized_c)
        && bounded(|e| e.rho_m_grad)
        && bounded(|e| e.rho_mstar_flux)
        && bounded(|e| e.sup_l2_squared);
    let projection_monotone = eps_ladder.iter().all(|&eps| {
        let row: Vec<f64> = entries.iter().filter(|e| e.eps == eps).map(|e| e.projection_error).collect();
        row.windows(2).all(|w| w[1] <= w[0] + 1e-14)
    });
    let equicontinuous = entries
        .iter()
        .all(|e| e.modulus_max_lag == 0.0 || e.modulus_min_lag <= 0.5 * e.modulus_max_lag);
    Ok(SweepReport {
        eps_ladder: eps_ladder.to_vec(),
        n_ladder: n_ladder.to_vec(),
        passed: uniformly_bounded && projection_monotone && equicontinuous,
        entries,
        certificate_c_star: cert.c_star,
        bound_ratio,
        uniformly_bounded,
        projection_monotone,
        equicontinuous,
    })
}
