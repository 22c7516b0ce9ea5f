//! Isotropic maximal monotone graphs `𝒜(t,x) ⊂ ℝ^d × ℝ^d`, their selections,
//! mollified selections `A^ε`, coercivity certificates and the 1-Lipschitz
//! representation `d − e = Φ(d + e)`.
//!
//! Every graph is radial: `Ã(t,x,ξ) = a(t,x,|ξ|) ξ/|ξ|` with `a` nondecreasing,
//! continuous off a finite set of jump radii. At a jump the graph contains the
//! whole segment between the one-sided limits and the selection takes its
//! midpoint.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nfunction::{CustomParts, ExponentField, NFunction};
use crate::numerics::{self, bump, bump_derivative};

type RadialFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Profile {
    Linear { slope: f64 },
    Power { p: ExponentField },
    Jump { p: ExponentField },
    Table { r: Vec<f64>, a: Vec<f64> },
    Potential { w: Arc<RadialFn>, kinks: Vec<f64> },
    Radial { a: Arc<RadialFn> },
}

const JUMP_RADIUS: f64 = 1.0;

fn jump_lower(p: f64, r: f64) -> f64 {
    r.powf(p) * r.ln_1p()
}

fn jump_upper(p: f64, r: f64) -> f64 {
    (p * r).exp_m1()
}

/// `∫_0^r s^p ln(1+s) ds` for `r ≤ 1`.
fn jump_lower_integral(p: f64, r: f64) -> f64 {
    numerics::integrate(|s| jump_lower(p, s), 0.0, r, 4)
}

fn jump_potential(p: f64, r: f64) -> f64 {
    if r <= JUMP_RADIUS {
        jump_lower_integral(p, r)
    } else {
        jump_lower_integral(p, 1.0) + ((p * r).exp() - p.exp()) / p - (r - 1.0)
    }
}

fn jump_inverse(p: f64, b: f64) -> f64 {
    if b <= 0.0 {
        0.0
    } else if b < jump_lower(p, 1.0) {
        numerics::bisect_increasing(|r| jump_lower(p, r), b, 0.0, 1.0, 1e-16)
    } else if b <= jump_upper(p, 1.0) {
        1.0
    } else {
        b.ln_1p() / p
    }
}

fn table_eval(r: &[f64], a: &[f64], v: f64, right: bool) -> f64 {
    let n = r.len();
    if v >= r[n - 1] {
        let (r0, r1, a0, a1) = (r[n - 2], r[n - 1], a[n - 2], a[n - 1]);
        if v == r1 && !right {
            let first = r.partition_point(|&x| x < v);
            return a[first];
        }
        let slope = if r1 > r0 { (a1 - a0) / (r1 - r0) } else { 0.0 };
        return a1 + slope * (v - r1);
    }
    let hi = r.partition_point(|&x| x <= v);
    let lo = r.partition_point(|&x| x < v);
    if lo < hi {
        // v is a node, possibly repeated
        return if right { a[hi - 1] } else { a[lo] };
    }
    let i = hi - 1;
    let (r0, r1) = (r[i], r[i + 1]);
    a[i] + (a[i + 1] - a[i]) * (v - r0) / (r1 - r0)
}

fn table_integral(r: &[f64], a: &[f64], v: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..r.len() - 1 {
        let (r0, r1) = (r[i], r[i + 1].min(v));
        if r1 <= r0 {
            if r[i] >= v {
                break;
            }
            continue;
        }
        let a1 = table_eval(r, a, r1, false).min(a[i + 1]).max(a[i]);
        total += 0.5 * (a[i] + a1) * (r1 - r0);
    }
    if v > r[r.len() - 1] {
        let last = r[r.len() - 1];
        let a_last = a[a.len() - 1];
        let av = table_eval(r, a, v, true);
        total += 0.5 * (a_last + av) * (v - last);
    }
    total
}

impl Profile {
    fn left(&self, t: f64, x: &[f64], r: f64) -> f64 {
        match self {
            Profile::Linear { slope } => slope * r,
            Profile::Power { p } => power_mag(p.eval(t, x), r),
            Profile::Jump { p } => {
                let p = p.eval(t, x);
                if r <= JUMP_RADIUS {
                    jump_lower(p, r)
                } else {
                    jump_upper(p, r)
                }
            }
            Profile::Table { r: rs, a } => table_eval(rs, a, r, false),
            Profile::Potential { w, kinks } => potential_slope(w.as_ref(), kinks, t, x, r, false),
            Profile::Radial { a } => a(t, x, r),
        }
    }

    fn right(&self, t: f64, x: &[f64], r: f64) -> f64 {
        match self {
            Profile::Jump { p } => {
                let p = p.eval(t, x);
                if r < JUMP_RADIUS {
                    jump_lower(p, r)
                } else {
                    jump_upper(p, r)
                }
            }
            Profile::Table { r: rs, a } => table_eval(rs, a, r, true),
            Profile::Potential { w, kinks } => potential_slope(w.as_ref(), kinks, t, x, r, true),
            _ => self.left(t, x, r),
        }
    }

    fn jumps(&self) -> Vec<f64> {
        match self {
            Profile::Jump { .. } => vec![JUMP_RADIUS],
            Profile::Table { r, .. } => {
                let mut j: Vec<f64> = r.windows(2).filter(|w| w[0] == w[1]).map(|w| w[0]).collect();
                j.dedup();
                j
            }
            Profile::Potential { kinks, .. } => kinks.clone(),
            _ => Vec::new(),
        }
    }

    fn potential(&self, t: f64, x: &[f64], r: f64) -> Option<f64> {
        match self {
            Profile::Linear { slope } => Some(0.5 * slope * r * r),
            Profile::Power { p } => {
                let p = p.eval(t, x);
                Some(r.powf(p) / p)
            }
            Profile::Jump { p } => Some(jump_potential(p.eval(t, x), r)),
            Profile::Table { r: rs, a } => Some(table_integral(rs, a, r)),
            Profile::Potential { w, .. } => Some(w(t, x, r)),
            Profile::Radial { .. } => None,
        }
    }
}

fn power_mag(p: f64, r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r.powf(p - 1.0)
    }
}

/// One-sided derivative of a radial potential by second-order differences.
fn potential_slope(w: &RadialFn, kinks: &[f64], t: f64, x: &[f64], r: f64, right: bool) -> f64 {
    let h = 1e-4 * r.max(1e-2);
    let f = |s: f64| w(t, x, s);
    let near_kink = kinks.iter().any(|k| (k - r).abs() < 2.0 * h);
    if !near_kink && r >= 2.0 * h {
        return (f(r + h) - f(r - h)) / (2.0 * h);
    }
    if right || r < 2.0 * h {
        (-3.0 * f(r) + 4.0 * f(r + h) - f(r + 2.0 * h)) / (2.0 * h)
    } else {
        (3.0 * f(r) - 4.0 * f(r - h) + f(r - 2.0 * h)) / (2.0 * h)
    }
}

/// Anything that maps `(t, x, ξ)` to a flux vector.
pub trait Selection: Send + Sync {
    /// Writes the flux at `ξ` into `out` (same length as `ξ`).
    fn flux(&self, t: f64, x: &[f64], xi: &[f64], out: &mut [f64]);
}

/// An isotropic maximal monotone graph with its associated N-function.
#[derive(Clone)]
pub struct MonotoneGraph {
    profile: Arc<Profile>,
    nf: NFunction,
    name: String,
}

impl fmt::Debug for MonotoneGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonotoneGraph({})", self.name)
    }
}

impl MonotoneGraph {
    /// `Ã(ξ) = slope·ξ`.
    pub fn linear(slope: f64, nf: NFunction) -> Result<Self> {
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::Construction(format!("slope {slope} is not monotone")));
        }
        Ok(MonotoneGraph {
            profile: Arc::new(Profile::Linear { slope }),
            nf,
            name: format!("linear({slope})"),
        })
    }

    /// Subdifferential of `|ξ|^p/p`: `Ã(ξ) = |ξ|^{p−2}ξ`, with `M(a) = a^p/p`.
    pub fn potential_power(p: ExponentField) -> Result<Self> {
        let nf = NFunction::power_normalized(p.clone()).map_err(|e| Error::Construction(e.to_string()))?;
        Ok(MonotoneGraph {
            name: format!("potential_power(p={})", p.label()),
            profile: Arc::new(Profile::Power { p }),
            nf,
        })
    }

    /// Jump graph: `a(r) = r^p ln(1+r)` below `r = 1`, `e^{pr} − 1` above, and
    /// the full segment in between at `r = 1`. It is the subdifferential of the
    /// glued potential `W`, which also serves as its N-function.
    pub fn jump(p: ExponentField) -> Result<Self> {
        let (pv, pw, pc) = (p.clone(), p.clone(), p.clone());
        let nf = NFunction::custom(CustomParts {
            name: format!("jump potential (p={})", p.label()),
            value: Arc::new(move |t, x, r| jump_potential(pv.eval(t, x), r.abs())),
            derivative: Some(Arc::new(move |t, x, r| {
                let p = pw.eval(t, x);
                if r < 1.0 {
                    jump_lower(p, r)
                } else {
                    jump_upper(p, r)
                }
            })),
            conjugate: Some(Arc::new(move |t, x, b| {
                let p = pc.eval(t, x);
                let b = b.abs();
                let r = jump_inverse(p, b);
                (b * r - jump_potential(p, r)).max(0.0)
            })),
        });
        Ok(MonotoneGraph {
            name: format!("jump(p={})", p.label()),
            profile: Arc::new(Profile::Jump { p }),
            nf,
        })
    }

    /// Radial table `r_i ↦ a_i`, linear in between and beyond the last node.
    /// Repeated radii encode jumps.
    pub fn from_table(r: Vec<f64>, a: Vec<f64>, nf: NFunction) -> Result<Self> {
        if r.len() < 2 || r.len() != a.len() {
            return Err(Error::Construction("table needs at least two (r, a) pairs".into()));
        }
        if r[0] != 0.0 || a[0] != 0.0 {
            return Err(Error::Construction("table must pass through the origin".into()));
        }
        if r.windows(2).any(|w| w[1] < w[0]) || a.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Construction("table radii and values must be nondecreasing".into()));
        }
        if r.windows(3).any(|w| w[0] == w[1] && w[1] == w[2]) || r[r.len() - 1] == r[r.len() - 2] {
            return Err(Error::Construction("jumps need one node on each side".into()));
        }
        Ok(MonotoneGraph {
            name: format!("table({} nodes)", r.len()),
            profile: Arc::new(Profile::Table { r, a }),
            nf,
        })
    }

    /// Subdifferential of a radial convex potential `W(t,x,|ξ|)` with kinks at
    /// the given radii. Convexity and `W(0) = 0` are checked at `check_points`.
    pub fn from_potential<F>(
        name: impl Into<String>,
        w: F,
        kinks: Vec<f64>,
        nf: NFunction,
        check_points: &[(f64, Vec<f64>)],
    ) -> Result<Self>
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        let r_max = 4.0 * kinks.iter().cloned().fold(1.0, f64::max);
        for (t, x) in check_points {
            let w0 = w(*t, x, 0.0);
            if w0 != 0.0 {
                return Err(Error::Construction(format!("W({t},{x:?},0) = {w0}, expected 0")));
            }
            let n = 400;
            for i in 0..n {
                for step in [1usize, 7, 50] {
                    let (r1, r2) = (r_max * i as f64 / n as f64, r_max * (i + step) as f64 / n as f64);
                    let mid = w(*t, x, 0.5 * (r1 + r2));
                    let chord = 0.5 * (w(*t, x, r1) + w(*t, x, r2));
                    if mid > chord + 1e-12 * chord.abs().max(1.0) {
                        return Err(Error::Construction(format!(
                            "potential is not convex on [{r1}, {r2}] at ({t}, {x:?})"
                        )));
                    }
                }
            }
        }
        Ok(MonotoneGraph {
            name: name.into(),
            profile: Arc::new(Profile::Potential { w: Arc::new(w), kinks }),
            nf,
        })
    }

    /// Graph given directly by a continuous radial magnitude `a(t,x,r)`.
    pub fn from_radial<F>(name: impl Into<String>, a: F, nf: NFunction) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        MonotoneGraph {
            name: name.into(),
            profile: Arc::new(Profile::Radial { a: Arc::new(a) }),
            nf,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nfunction(&self) -> &NFunction {
        &self.nf
    }

    /// Radii where the graph is multivalued.
    pub fn jump_radii(&self) -> Vec<f64> {
        self.profile.jumps()
    }

    /// Radial selection magnitude `a(t,x,r)` (segment midpoint at jumps).
    pub fn magnitude(&self, t: f64, x: &[f64], r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let (lo, hi) = (self.profile.left(t, x, r), self.profile.right(t, x, r));
        if lo == hi {
            lo
        } else {
            0.5 * (lo + hi)
        }
    }

    /// Interval `[a(r−), a(r+)]` of magnitudes the graph contains at radius `r`.
    pub fn magnitude_interval(&self, t: f64, x: &[f64], r: f64) -> (f64, f64) {
        if r == 0.0 {
            return (0.0, 0.0);
        }
        (self.profile.left(t, x, r), self.profile.right(t, x, r))
    }

    /// Radial potential `W(t,x,r)` when the graph is a subdifferential.
    pub fn potential(&self, t: f64, x: &[f64], r: f64) -> Option<f64> {
        self.profile.potential(t, x, r)
    }

    /// `Ã(t,x,ξ)`.
    pub fn select(&self, t: f64, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; xi.len()];
        self.flux(t, x, xi, &mut out);
        out
    }

    /// Mollified selection `A^ε = Ã * K^ε` in `ξ`.
    pub fn mollified(&self, eps: f64) -> Result<MollifiedSelection> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Parameter(format!("ε must be positive, got {eps}")));
        }
        Ok(MollifiedSelection {
            graph: self.clone(),
            eps,
            angles: 32,
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    if v.len() == 1 {
        v[0].abs()
    } else {
        v.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Selection for MonotoneGraph {
    fn flux(&self, t: f64, x: &[f64], xi: &[f64], out: &mut [f64]) {
        let r = norm(xi);
        if r == 0.0 {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let scale = self.magnitude(t, x, r) / r;
        for (o, v) in out.iter_mut().zip(xi) {
            *o = scale * v;
        }
    }
}

/// `A^ε(t,x,ξ) = ∫ Ã(t,x,ξ − εz) K(z) dz` with a radial bump `K` on the unit
/// ball of `ℝ^d`.
///
/// The radial integral is split at every point where the shifted argument
/// crosses a jump sphere or the origin and each piece uses 16-point
/// Gauss–Legendre; the weights are renormalised to unit mass so affine
/// selections are reproduced exactly.
#[derive(Clone, Debug)]
pub struct MollifiedSelection {
    graph: MonotoneGraph,
    eps: f64,
    angles: usize,
}

impl MollifiedSelection {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn graph(&self) -> &MonotoneGraph {
        &self.graph
    }

    /// Flux and Jacobian `∂A^ε_i/∂ξ_j` (only the leading `d × d` block is used).
    pub fn eval_with_jacobian(&self, t: f64, x: &[f64], xi: &[f64], out: &mut [f64], jac: &mut [[f64; 2]; 2]) {
        match xi.len() {
            1 => {
                let (v, d) = self.eval_1d(t, x, xi[0]);
                out[0] = v;
                jac[0][0] = d;
            }
            2 => self.eval_2d_radial(t, x, [xi[0], xi[1]], out, jac),
            n => panic!("unsupported dimension {n}"),
        }
    }

    fn scalar_select(&self, t: f64, x: &[f64], z: f64) -> f64 {
        let m = self.graph.magnitude(t, x, z.abs());
        if z < 0.0 {
            -m
        } else {
            m
        }
    }

    fn eval_1d(&self, t: f64, x: &[f64], xi: f64) -> (f64, f64) {
        let eps = self.eps;
        let mut cuts = vec![0.0, 1.0];
        for r in self.graph.jump_radii().into_iter().chain(std::iter::once(0.0)) {
            for target in [r, -r] {
                for s in [(xi - target) / eps, (target - xi) / eps] {
                    if s > 0.0 && s < 1.0 {
                        cuts.push(s);
                    }
                }
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let (nodes, weights) = numerics::gl16();
        let (mut mass, mut val, mut dnorm, mut dval) = (0.0, 0.0, 0.0, 0.0);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            for (n, wt) in nodes.iter().zip(weights) {
                let s = a + half * (1.0 + n);
                let ws = wt * half;
                let (k, dk) = (bump(s), bump_derivative(s));
                let lo = self.scalar_select(t, x, xi - eps * s);
                let hi = self.scalar_select(t, x, xi + eps * s);
                mass += ws * k;
                val += ws * k * (lo + hi);
                dnorm += ws * dk * s;
                dval += ws * dk * (lo - hi);
            }
        }
        (val / (2.0 * mass), dval / (-2.0 * eps * dnorm))
    }

    /// `A^ε` is radial, so it is evaluated at `(|ξ|, 0)` and rotated back:
    /// `J = α' ê êᵀ + (α/r)(I − ê êᵀ)`.
    fn eval_2d_radial(&self, t: f64, x: &[f64], xi: [f64; 2], out: &mut [f64], jac: &mut [[f64; 2]; 2]) {
        let r = xi[0].hypot(xi[1]);
        let mut o = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        self.eval_2d(t, x, [r, 0.0], &mut o, &mut j);
        if r == 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            *jac = [[j[0][0], 0.0], [0.0, j[0][0]]];
            return;
        }
        let (alpha, dalpha) = (o[0], j[0][0]);
        let e = [xi[0] / r, xi[1] / r];
        let tangential = alpha / r;
        for i in 0..2 {
            out[i] = alpha * e[i];
            for k in 0..2 {
                let id = if i == k { 1.0 } else { 0.0 };
                jac[i][k] = dalpha * e[i] * e[k] + tangential * (id - e[i] * e[k]);
            }
        }
    }

    fn eval_2d(&self, t: f64, x: &[f64], xi: [f64; 2], out: &mut [f64], jac: &mut [[f64; 2]; 2]) {
        let eps = self.eps;
        let jumps = self.graph.jump_radii();
        let (nodes, weights) = numerics::gl16();
        let mut mass = 0.0;
        let mut val = [0.0; 2];
        let mut dnorm = [0.0; 2];
        let mut dval = [[0.0; 2]; 2];
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        let xi2 = xi[0] * xi[0] + xi[1] * xi[1];
        for k in 0..self.angles {
            let phi = (k as f64 + 0.5) * std::f64::consts::PI / self.angles as f64;
            let e = [phi.cos(), phi.sin()];
            let proj = xi[0] * e[0] + xi[1] * e[1];
            let mut cuts = vec![0.0, 1.0];
            let closest = proj.abs() / eps;
            if closest > 0.0 && closest < 1.0 {
                cuts.push(closest);
            }
            for &r in &jumps {
                let disc = proj * proj - xi2 + r * r;
                if disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                for s in [proj - sq, proj + sq, -proj - sq, -proj + sq] {
                    let s = s / eps;
                    if s > 0.0 && s < 1.0 {
                        cuts.push(s);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let half = 0.5 * (b - a);
                for (n, wt) in nodes.iter().zip(weights) {
                    let s = a + half * (1.0 + n);
                    let ws = wt * half * s;
                    let (kv, dk) = (bump(s), bump_derivative(s));
                    let zm = [xi[0] - eps * s * e[0], xi[1] - eps * s * e[1]];
                    let zp = [xi[0] + eps * s * e[0], xi[1] + eps * s * e[1]];
                    self.graph.flux(t, x, &zm, &mut lo);
                    self.graph.flux(t, x, &zp, &mut hi);
                    mass += ws * kv;
                    for i in 0..2 {
                        val[i] += ws * kv * (lo[i] + hi[i]);
                        dnorm[i] += ws * dk * s * e[i] * e[i];
                        for j in 0..2 {
                            dval[i][j] += ws * dk * e[j] * (lo[i] - hi[i]);
                        }
                    }
                }
            }
        }
        for i in 0..2 {
            out[i] = val[i] / (2.0 * mass);
            for j in 0..2 {
                jac[i][j] = dval[i][j] / (-2.0 * eps * dnorm[j]);
            }
        }
    }
}

impl Selection for MollifiedSelection {
    fn flux(&self, t: f64, x: &[f64], xi: &[f64], out: &mut [f64]) {
        let mut jac = [[0.0; 2]; 2];
        self.eval_with_jacobian(t, x, xi, out, &mut jac);
    }
}

/// Fitted coercivity data `A·ξ ≥ −k + c_*(M(|ξ|) + M*(|A|))`.
#[derive(Debug, Clone, Serialize)]
pub struct GraphCertificate {
    pub monotone: bool,
    /// `min (A(ξ₁) − A(ξ₂))·(ξ₁ − ξ₂)` over sampled pairs.
    pub min_monotonicity: f64,
    /// Largest feasible `c_*` on the ladder `2^{−k}`; `None` when infeasible.
    pub c_star: Option<f64>,
    /// Per-point `k` for the chosen `c_*`.
    pub k_cells: Vec<f64>,
    /// `Σ w·k`.
    pub k_integral: f64,
    /// Graph is an M-graph on the samples.
    pub feasible: bool,
}

/// Checks sampled monotonicity and fits `(c_*, k)` for any selection.
///
/// A candidate `c` is feasible when `∫k` over the full sample ball stays
/// within `1.5×` of `∫k` over the half-radius ball: deficits that keep growing
/// with `|ξ|` signal failing coercivity.
pub fn check_axioms<S: Selection + ?Sized>(
    sel: &S,
    nf: &NFunction,
    points: &[(f64, Vec<f64>)],
    xis: &[Vec<f64>],
    weight: f64,
) -> GraphCertificate {
    let r_max = xis.iter().map(|v| norm(v)).fold(0.0, f64::max);
    let mut min_mono = f64::INFINITY;
    let mut table = Vec::with_capacity(points.len());
    for (t, x) in points {
        let fluxes: Vec<Vec<f64>> = xis
            .iter()
            .map(|xi| {
                let mut out = vec![0.0; xi.len()];
                sel.flux(*t, x, xi, &mut out);
                out
            })
            .collect();
        for i in 0..xis.len() {
            for j in (i + 1..xis.len()).step_by(3) {
                let da: Vec<f64> = fluxes[i].iter().zip(&fluxes[j]).map(|(a, b)| a - b).collect();
                let dx: Vec<f64> = xis[i].iter().zip(&xis[j]).map(|(a, b)| a - b).collect();
                min_mono = min_mono.min(dot(&da, &dx));
            }
        }
        let rows: Vec<(f64, f64, bool)> = xis
            .iter()
            .zip(&fluxes)
            .map(|(xi, a)| {
                let m = nf.value(*t, x, norm(xi));
                let ms = nf.conjugate_value(*t, x, norm(a)).unwrap_or(f64::INFINITY);
                (dot(a, xi), m + ms, norm(xi) <= 0.5 * r_max)
            })
            .collect();
        table.push(rows);
    }
    let deficits = |c: f64, half_only: bool| -> Vec<f64> {
        table
            .iter()
            .map(|rows| {
                rows.iter()
                    .filter(|r| !half_only || r.2)
                    .map(|(pair, q, _)| (c * q - pair).max(0.0))
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let mut chosen = None;
    for k in 0..=30 {
        let c = 2f64.powi(-k);
        let full = deficits(c, false);
        let half = deficits(c, true);
        let int_full: f64 = weight * full.iter().sum::<f64>();
        let int_half: f64 = weight * half.iter().sum::<f64>();
        if int_full.is_finite() && int_full <= 1.5 * int_half + 1e-9 {
            chosen = Some((c, full, int_full));
            break;
        }
    }
    let monotone = min_mono >= -1e-12;
    match chosen {
        Some((c, k_cells, k_integral)) => GraphCertificate {
            monotone,
            min_monotonicity: min_mono,
            c_star: Some(c),
            k_cells,
            k_integral,
            feasible: monotone,
        },
        None => GraphCertificate {
            monotone,
            min_monotonicity: min_mono,
            c_star: None,
            k_cells: Vec::new(),
            k_integral: f64::INFINITY,
            feasible: false,
        },
    }
}

/// `min_B (A₀ − Ã(B))·(ξ₀ − B)` over the probes, refined by golden-section
/// search along the ray from `ξ₀` through the best probe.
pub fn maximality_residual<S: Selection + ?Sized>(
    sel: &S,
    t: f64,
    x: &[f64],
    xi0: &[f64],
    a0: &[f64],
    probes: &[Vec<f64>],
) -> f64 {
    let f = |b: &[f64]| {
        let mut buf = vec![0.0; xi0.len()];
        sel.flux(t, x, b, &mut buf);
        a0.iter()
            .zip(&buf)
            .zip(xi0.iter().zip(b))
            .map(|((a, s), (x0, bb))| (a - s) * (x0 - bb))
            .sum::<f64>()
    };
    let mut best = f64::INFINITY;
    let mut best_b: Option<&Vec<f64>> = None;
    for b in probes {
        let v = f(b);
        if v < best {
            best = v;
            best_b = Some(b);
        }
    }
    let Some(b) = best_b else {
        return best;
    };
    let dir: Vec<f64> = b.iter().zip(xi0).map(|(b, x0)| b - x0).collect();
    if norm(&dir) == 0.0 {
        return best;
    }
    let point = |s: f64| -> Vec<f64> { xi0.iter().zip(&dir).map(|(x0, d)| x0 + s * d).collect() };
    let (_, refined) = numerics::golden_max(|s| -f(&point(s)), 0.5, 1.5, 1e-12);
    best.min(-refined)
}

/// Probe set `ξ₀ + r·e` over radii `radius·2^{−k}` and `directions` unit vectors.
pub fn probe_ladder(xi0: &[f64], radius: f64, levels: usize, per_level: usize) -> Vec<Vec<f64>> {
    let mut probes = vec![xi0.to_vec()];
    for k in 0..levels {
        let r = radius * 0.5f64.powi(k as i32);
        for i in 1..=per_level {
            let frac = i as f64 / per_level as f64;
            if xi0.len() == 1 {
                probes.push(vec![xi0[0] + r * frac]);
                probes.push(vec![xi0[0] - r * frac]);
            } else {
                let th = 2.0 * std::f64::consts::PI * frac;
                probes.push(vec![xi0[0] + r * th.cos(), xi0[1] + r * th.sin()]);
            }
        }
    }
    probes
}

/// `Φ(t,x,·)` at a fixed point: the contraction with `d − e = Φ(d + e)` for
/// every graph pair `(e, d) = (ξ, Ã(ξ))`.
///
/// Stored radially as a piecewise-linear table `σ = r + a ↦ φ = a − r`, with
/// every jump contributing a slope-one segment.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzRep {
    pub sigma: Vec<f64>,
    pub phi: Vec<f64>,
    /// Sampled Lipschitz constant of the radial extension.
    pub lipschitz: f64,
}

impl LipschitzRep {
    /// Tabulates `Φ` from the graph at `(t, x)` on `n` radii up to `r_max`.
    pub fn build(graph: &MonotoneGraph, t: f64, x: &[f64], r_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(r_max > 0.0) {
            return Err(Error::Parameter("need r_max > 0 and at least two radii".into()));
        }
        let mut radii: Vec<f64> = (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect();
        let jumps: Vec<f64> = graph.jump_radii().into_iter().filter(|&r| r > 0.0 && r < r_max).collect();
        radii.retain(|r| !jumps.iter().any(|j| (j - r).abs() < 1e-14 * r_max));
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(radii.len() + 2 * jumps.len());
        for r in radii {
            let a = graph.magnitude(t, x, r);
            pts.push((r + a, a - r));
        }
        for j in jumps {
            let (lo, hi) = graph.magnitude_interval(t, x, j);
            pts.push((j + lo, lo - j));
            pts.push((j + hi, hi - j));
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        let (sigma, phi): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if sigma.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Representation(
                "σ = r + a(r) is not strictly increasing: the input is not monotone".into(),
            ));
        }
        let mut lip = 0.0_f64;
        for i in 0..sigma.len() - 1 {
            lip = lip.max(((phi[i + 1] - phi[i]) / (sigma[i + 1] - sigma[i])).abs());
        }
        for (s, p) in sigma.iter().zip(&phi) {
            if *s > 0.0 {
                lip = lip.max((p / s).abs());
            }
        }
        if lip > 1.0 + 1e-10 {
            return Err(Error::Representation(format!("sampled Lipschitz constant {lip} exceeds 1")));
        }
        if sigma[0] != 0.0 || phi[0] != 0.0 {
            return Err(Error::Representation("Φ(0) ≠ 0".into()));
        }
        Ok(LipschitzRep {
            sigma,
            phi,
            lipschitz: lip,
        })
    }

    fn radial(&self, s: f64) -> f64 {
        interp(&self.sigma, &self.phi, s)
    }

    /// `Φ(s)` for a vector `s`.
    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        let r = norm(s);
        if r == 0.0 {
            return vec![0.0; s.len()];
        }
        let scale = self.radial(r) / r;
        s.iter().map(|v| v * scale).collect()
    }

    /// Recovers the selection from `Φ`: solves `σ − φ(σ) = 2|ξ|` and returns
    /// `(σ + φ(σ))/2` along `ξ/|ξ|`. On a jump segment the midpoint is taken.
    pub fn reconstruct(&self, xi: &[f64]) -> Vec<f64> {
        let r = norm(xi);
        if r == 0.0 {
            return vec![0.0; xi.len()];
        }
        let g: Vec<f64> = self.sigma.iter().zip(&self.phi).map(|(s, p)| s - p).collect();
        let target = 2.0 * r;
        let n = g.len();
        let sigma = if target >= g[n - 1] {
            let (g0, g1) = (g[n - 2], g[n - 1]);
            self.sigma[n - 1] + (target - g1) * (self.sigma[n - 1] - self.sigma[n - 2]) / (g1 - g0)
        } else {
            let lo = g.partition_point(|&v| v < target);
            let hi = g.partition_point(|&v| v <= target);
            if hi > lo {
                0.5 * (self.sigma[lo] + self.sigma[hi - 1])
            } else {
                let i = lo - 1;
                self.sigma[i] + (target - g[i]) * (self.sigma[i + 1] - self.sigma[i]) / (g[i + 1] - g[i])
            }
        };
        let a = 0.5 * (sigma + self.radial(sigma));
        xi.iter().map(|v| v * a / r).collect()
    }

    /// Checks `d·e ≥ −k + c(M(|d|) + M*(|e|))` with `(e, d) = (ξ, Ã(ξ))`
    /// recovered from `Φ`, and reports the largest `c` that works with `k = 0`.
    pub fn transfer_check(&self, nf: &NFunction, t: f64, x: &[f64], c: f64, k: f64, xis: &[Vec<f64>]) -> TransferReport {
        let mut min_margin = f64::INFINITY;
        let mut best_c = f64::INFINITY;
        for xi in xis {
            let d = self.reconstruct(xi);
            let lhs = dot(&d, xi);
            let q = nf.value(t, x, norm(&d)) + nf.conjugate_value(t, x, norm(xi)).unwrap_or(f64::INFINITY);
            min_margin = min_margin.min(lhs + k - c * q);
            if q > 0.0 {
                best_c = best_c.min(lhs / q);
            }
        }
        TransferReport {
            min_margin,
            holds: min_margin >= -1e-10,
            empirical_c: best_c,
        }
    }
}

fn interp(xs: &[f64], ys: &[f64], v: f64) -> f64 {
    let n = xs.len();
    if v <= xs[0] {
        return ys[0];
    }
    if v >= xs[n - 1] {
        let slope = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        return ys[n - 1] + slope * (v - xs[n - 1]);
    }
    let i = xs.partition_point(|&x| x <= v) - 1;
    ys[i] + (ys[i + 1] - ys[i]) * (v - xs[i]) / (xs[i + 1] - xs[i])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransferReport {
    pub min_margin: f64,
    pub holds: bool,
    /// Largest `c` with `d·e ≥ c(M(|d|) + M*(|e|))` on the samples.
    pub empirical_c: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ExponentField {
        ExponentField::constant(v).unwrap()
    }

    fn square() -> NFunction {
        NFunction::power(p(2.0)).unwrap()
    }

    fn line(n: usize, r: f64) -> Vec<Vec<f64>> {
        (0..=n).map(|i| vec![-r + 2.0 * r * i as f64 / n as f64]).collect()
    }

    #[test]
    fn potential_examples() {
        let quad = MonotoneGraph::from_potential("|ξ|²/2", |_, _, r| 0.5 * r * r, vec![], square(), &[(0.0, vec![0.0])]).unwrap();
        let s = quad.select(0.0, &[0.0], &[0.7, -0.2]);
        assert!((s[0] - 0.7).abs() < 1e-8 && (s[1] + 0.2).abs() < 1e-8);

        let cubic = MonotoneGraph::from_potential("|ξ|³/3", |_, _, r| r.powi(3) / 3.0, vec![], square(), &[(0.0, vec![0.0])]).unwrap();
        let s = cubic.select(0.0, &[0.0], &[1.5]);
        assert!((s[0] - 2.25).abs() < 1e-7);

        let jump = MonotoneGraph::jump(p(1.0)).unwrap();
        let mid = jump.select(0.0, &[0.0], &[1.0])[0];
        let expect = 0.5 * (2f64.ln() + std::f64::consts::E - 1.0);
        assert!((mid - expect).abs() < 1e-15);
        let glued = MonotoneGraph::from_potential(
            "glued",
            |_, _, r| jump_potential(1.0, r),
            vec![1.0],
            jump.nfunction().clone(),
            &[(0.0, vec![0.0])],
        )
        .unwrap();
        assert!((glued.select(0.0, &[0.0], &[1.0])[0] - expect).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_potential_is_rejected() {
        let r = MonotoneGraph::from_potential("bad", |_, _, r| r.sin().abs(), vec![], square(), &[(0.0, vec![0.0])]);
        assert!(matches!(r, Err(Error::Construction(_))));
    }

    #[test]
    fn mollified_linear_is_exact() {
        let g = MonotoneGraph::linear(2.0, square()).unwrap();
        let m = g.mollified(0.3).unwrap();
        for xi in [-1.3, 0.0, 0.1, 2.0] {
            let mut out = [0.0];
            let mut jac = [[0.0; 2]; 2];
            m.eval_with_jacobian(0.0, &[0.0], &[xi], &mut out, &mut jac);
            assert!((out[0] - 2.0 * xi).abs() < 1e-14, "{xi}: {}", out[0]);
            assert!((jac[0][0] - 2.0).abs() < 1e-12);
        }
        let mut out = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        m.eval_with_jacobian(0.0, &[0.0, 0.0], &[0.4, -0.9], &mut out, &mut jac);
        assert!((out[0] - 0.8).abs() < 1e-13 && (out[1] + 1.8).abs() < 1e-13);
        assert!((jac[0][0] - 2.0).abs() < 1e-10 && jac[0][1].abs() < 1e-10, "{jac:?}");
    }

    #[test]
    fn mollified_jump_is_smooth_monotone_and_local() {
        let g = MonotoneGraph::jump(p(1.0)).unwrap();
        for eps in [0.1, 0.05, 0.025] {
            let m = g.mollified(eps).unwrap();
            let xs: Vec<f64> = (0..=800).map(|i| -2.0 + 4.0 * i as f64 / 800.0).collect();
            let vals: Vec<f64> = xs.iter().map(|&x| m.select_1d(x)).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            let far = xs
                .iter()
                .zip(&vals)
                .filter(|(x, _)| (x.abs() - 1.0).abs() >= 2.0 * eps)
                .map(|(x, v)| (v - g.select(0.0, &[0.0], &[*x])[0]).abs())
                .fold(0.0, f64::max);
            assert!(far < 10.0 * eps, "ε={eps}: {far}");
        }
    }

    impl MollifiedSelection {
        fn select_1d(&self, x: f64) -> f64 {
            let mut out = [0.0];
            self.flux(0.0, &[0.0], &[x], &mut out);
            out[0]
        }
    }

    #[test]
    fn mollified_derivative_matches_differences() {
        let g = MonotoneGraph::jump(p(1.5)).unwrap();
        let m = g.mollified(0.1).unwrap();
        for xi in [0.3, 0.95, 1.02, 1.5] {
            let mut out = [0.0];
            let mut jac = [[0.0; 2]; 2];
            m.eval_with_jacobian(0.0, &[0.0], &[xi], &mut out, &mut jac);
            let h = 1e-6;
            let fd = (m.select_1d(xi + h) - m.select_1d(xi - h)) / (2.0 * h);
            assert!((fd - jac[0][0]).abs() < 1e-5 * fd.abs().max(1.0), "{xi}: {fd} vs {}", jac[0][0]);
        }
    }

    #[test]
    fn certificates() {
        let pts = vec![(0.5, vec![0.5])];
        let xis = line(40, 4.0);
        let quad = MonotoneGraph::linear(2.0, square()).unwrap();
        let c = check_axioms(&quad, quad.nfunction(), &pts, &xis, 1.0);
        assert_eq!(c.c_star, Some(1.0));
        assert!(c.k_integral <= 1e-10 && c.feasible);

        let pw = MonotoneGraph::potential_power(p(3.0)).unwrap();
        let c = check_axioms(&pw, pw.nfunction(), &pts, &xis, 1.0);
        assert_eq!(c.c_star, Some(1.0));
        assert!(c.k_integral <= 1e-10);

        let zero = MonotoneGraph::from_radial("zero", |_, _, _| 0.0, square());
        let c = check_axioms(&zero, zero.nfunction(), &pts, &xis, 1.0);
        assert!(!c.feasible && c.c_star.is_none());

        let jump = MonotoneGraph::jump(p(1.0)).unwrap();
        let c = check_axioms(&jump, jump.nfunction(), &pts, &line(40, 2.0), 1.0);
        assert_eq!(c.c_star, Some(1.0));
        assert!(c.k_integral <= 1e-9, "{}", c.k_integral);
    }

    #[test]
    fn maximality_examples() {
        let g = MonotoneGraph::linear(2.0, square()).unwrap();
        let probes = line(50, 3.0);
        let on = maximality_residual(&g, 0.0, &[0.0], &[0.7], &[1.4], &probes);
        assert!(on >= -1e-12);
        let off = maximality_residual(&g, 0.0, &[0.0], &[1.0], &[0.0], &line(37, 3.0));
        assert!((off + 0.5).abs() < 1e-10, "{off}");

        let jump = MonotoneGraph::jump(p(1.0)).unwrap();
        let probes = probe_ladder(&[1.0], 1.0, 12, 16);
        let seg = maximality_residual(&jump, 0.0, &[0.0], &[1.0], &[1.2], &probes);
        assert!(seg >= -1e-12);
        let outside = maximality_residual(&jump, 0.0, &[0.0], &[1.0], &[0.2], &probes);
        assert!(outside < -1e-3);
    }

    #[test]
    fn lipschitz_examples() {
        let lin2 = MonotoneGraph::linear(2.0, square()).unwrap();
        let rep = LipschitzRep::build(&lin2, 0.0, &[0.0], 5.0, 64).unwrap();
        assert!((rep.eval(&[3.0])[0] - 1.0).abs() < 1e-14);
        assert!((rep.lipschitz - 1.0 / 3.0).abs() < 1e-12);
        for xi in [0.3, 2.0, -4.5] {
            assert!((rep.reconstruct(&[xi])[0] - 2.0 * xi).abs() < 1e-12);
        }
        let lin1 = MonotoneGraph::linear(1.0, square()).unwrap();
        let rep = LipschitzRep::build(&lin1, 0.0, &[0.0], 5.0, 16).unwrap();
        assert!(rep.phi.iter().all(|&v| v == 0.0));

        let jump = MonotoneGraph::jump(p(1.0)).unwrap();
        let rep = LipschitzRep::build(&jump, 0.0, &[0.0], 2.0, 401).unwrap();
        assert!(rep.lipschitz <= 1.0);
        // continuity across the segment: consecutive samples stay close
        let gaps = rep.sigma.windows(2).zip(rep.phi.windows(2)).map(|(s, f)| (f[1] - f[0]).abs() / (s[1] - s[0]));
        assert!(gaps.fold(0.0, f64::max) <= 1.0 + 1e-10);
        let back = rep.reconstruct(&[1.0])[0];
        assert!((back - jump.select(0.0, &[0.0], &[1.0])[0]).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_input_fails_representation() {
        let g = MonotoneGraph::from_radial("bad", |_, _, r| -3.0 * r, square());
        assert!(matches!(LipschitzRep::build(&g, 0.0, &[0.0], 2.0, 20), Err(Error::Representation(_))));
    }

    #[test]
    fn table_graph_with_jump() {
        let g = MonotoneGraph::from_table(vec![0.0, 1.0, 1.0, 2.0], vec![0.0, 1.0, 3.0, 4.0], square()).unwrap();
        assert_eq!(g.jump_radii(), vec![1.0]);
        assert_eq!(g.magnitude(0.0, &[0.0], 1.0), 2.0);
        assert_eq!(g.magnitude_interval(0.0, &[0.0], 1.0), (1.0, 3.0));
        assert!((g.magnitude(0.0, &[0.0], 0.5) - 0.5).abs() < 1e-15);
        assert!((g.magnitude(0.0, &[0.0], 3.0) - 5.0).abs() < 1e-15);
        assert!((g.potential(0.0, &[0.0], 2.0).unwrap() - (0.5 + 3.5)).abs() < 1e-14);
        assert!(MonotoneGraph::from_table(vec![0.0, 1.0], vec![0.0, -1.0], square()).is_err());
    }

    #[test]
    fn jump_nfunction_is_consistent() {
        let g = MonotoneGraph::jump(p(1.0)).unwrap();
        let w = g.nfunction();
        let report = w.check_axioms(&[(0.0, vec![0.0])]);
        assert!(report.passed, "{:?}", report.violations);
        // the conjugate closed form agrees with the numeric transform
        for b in [0.3, 1.0, 1.5, 4.0] {
            let closed = w.conjugate_value(0.0, &[0.0], b).unwrap();
            let numeric = numerics::legendre(|a| w.value(0.0, &[0.0], a), b).unwrap();
            assert!((closed - numeric).abs() < 1e-9 * closed.max(1.0), "{b}: {closed} {numeric}");
        }
    }
}
