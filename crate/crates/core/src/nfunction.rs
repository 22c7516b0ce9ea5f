//! `(t,x)`-dependent N-functions `M(t,x,a)` and their conjugates.
//!
//! An [`NFunction`] is an immutable, cheaply clonable evaluator. Analytic
//! families carry closed-form conjugates and inverses; everything else falls
//! back to a numeric Legendre transform (golden-section search on the concave
//! map `a ↦ a·b − M(a)`).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::SpaceTime;
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::numerics::{self, ConvexSpline};

type PointFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
type ValueFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// A variable exponent `p(t,x)` with declared bounds `p_minus ≤ p ≤ p_plus`.
#[derive(Clone)]
pub struct ExponentField {
    eval: Arc<PointFn>,
    p_minus: f64,
    p_plus: f64,
    constant: Option<f64>,
    label: String,
}

impl ExponentField {
    /// The bounds must satisfy `1 ≤ p_minus ≤ p_plus < ∞`.
    pub fn from_fn<F>(label: impl Into<String>, f: F, p_minus: f64, p_plus: f64) -> Result<Self>
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(p_minus >= 1.0 && p_plus.is_finite() && p_minus <= p_plus) {
            return Err(Error::Parameter(format!(
                "exponent bounds must satisfy 1 <= p_min <= p_max < inf, got [{p_minus}, {p_plus}]"
            )));
        }
        Ok(ExponentField {
            eval: Arc::new(f),
            p_minus,
            p_plus,
            constant: None,
            label: label.into(),
        })
    }

    pub fn constant(p: f64) -> Result<Self> {
        let mut field = Self::from_fn(format!("{p}"), move |_, _| p, p, p)?;
        field.constant = Some(p);
        Ok(field)
    }

    /// Exponent given as an expression in `t`, `x`, `y`.
    pub fn from_expr(source: &str, p_minus: f64, p_plus: f64) -> Result<Self> {
        let expr = ScalarExpr::parse(source)?;
        Self::from_fn(source, move |t, x| expr.eval(t, x), p_minus, p_plus)
    }

    /// Exponent tabulated on a `(t, x)` lattice and interpolated bilinearly.
    ///
    /// `values[i][j]` is `p(ts[i], xs[j])`. Repeated `xs` entries encode jumps.
    /// Only the first spatial coordinate is used.
    pub fn from_table(ts: Vec<f64>, xs: Vec<f64>, values: Vec<Vec<f64>>, p_minus: f64, p_plus: f64) -> Result<Self> {
        if ts.is_empty() || xs.is_empty() || values.len() != ts.len() || values.iter().any(|r| r.len() != xs.len()) {
            return Err(Error::Parameter("exponent table shape does not match its axes".into()));
        }
        if ts.windows(2).any(|w| w[1] < w[0]) || xs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Parameter("exponent table axes must be nondecreasing".into()));
        }
        let label = format!("table {}x{}", ts.len(), xs.len());
        Self::from_fn(
            label,
            move |t, x| {
                let (i0, i1, wt) = locate(&ts, t);
                let (j0, j1, wx) = locate(&xs, x[0]);
                let row = |i: usize| values[i][j0] * (1.0 - wx) + values[i][j1] * wx;
                row(i0) * (1.0 - wt) + row(i1) * wt
            },
            p_minus,
            p_plus,
        )
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self.constant {
            Some(p) => p,
            None => (self.eval)(t, x),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.p_minus, self.p_plus)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Checks `p_minus ≤ p(t,x) ≤ p_plus` at every cell center of `grid`.
    pub fn check_on_grid(&self, grid: &crate::domain::Grid) -> Result<()> {
        for c in 0..grid.len() {
            let (t, x) = grid.center(c);
            let p = self.eval(t, &x);
            if !(p >= self.p_minus - 1e-12 && p <= self.p_plus + 1e-12) {
                return Err(Error::Parameter(format!(
                    "p({t}, {x:?}) = {p} outside declared bounds [{}, {}]",
                    self.p_minus, self.p_plus
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ExponentField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExponentField({}, [{}, {}])", self.label, self.p_minus, self.p_plus)
    }
}

fn locate(axis: &[f64], v: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || v <= axis[0] {
        return (0, 0, 0.0);
    }
    if v >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let i = axis.partition_point(|&a| a <= v) - 1;
    let (a, b) = (axis[i], axis[i + 1]);
    if b > a {
        (i, i + 1, (v - a) / (b - a))
    } else {
        (i + 1, i + 1, 0.0)
    }
}

/// Family tag of an [`NFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NKind {
    Power,
    ExpPower,
    PowerLog,
    Tabulated,
    ConjugateOf,
    SobolevConjugate,
    Custom,
}

/// User-supplied N-function with optional derivative and conjugate.
#[derive(Clone)]
pub struct CustomParts {
    pub name: String,
    pub value: Arc<ValueFn>,
    pub derivative: Option<Arc<ValueFn>>,
    pub conjugate: Option<Arc<ValueFn>>,
}

#[derive(Clone)]
enum Repr {
    Power { p: ExponentField, normalized: bool },
    ExpPower { p: ExponentField },
    PowerLog { p: ExponentField },
    Tabulated(ConvexSpline),
    ConjugateOf(NFunction),
    Sobolev { base: NFunction, dim: usize, normalized: bool },
    Custom(CustomParts),
}

/// Two space-time points `((t, x), (s, y))`.
pub type PointPair = ((f64, Vec<f64>), (f64, Vec<f64>));

/// Sampling grid in `a` used by the structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AGrid {
    pub a_max: f64,
    pub a_points: usize,
    pub growth_margin: f64,
}

impl Default for AGrid {
    fn default() -> Self {
        AGrid {
            a_max: 10.0,
            a_points: 64,
            growth_margin: 2.0,
        }
    }
}

impl AGrid {
    pub fn points(&self) -> Vec<f64> {
        (1..=self.a_points)
            .map(|i| self.a_max * i as f64 / self.a_points as f64)
            .collect()
    }
}

/// An N-function `M(t,x,a)`: convex in `a`, zero exactly at zero, superlinear.
#[derive(Clone)]
pub struct NFunction {
    repr: Arc<Repr>,
    domain: Option<SpaceTime>,
    a_grid: AGrid,
}

impl fmt::Debug for NFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NFunction({})", self.label())
    }
}

impl NFunction {
    fn from_repr(repr: Repr) -> Self {
        NFunction {
            repr: Arc::new(repr),
            domain: None,
            a_grid: AGrid::default(),
        }
    }

    /// `M(t,x,a) = a^{p(t,x)}`; requires `p_minus > 1`.
    pub fn power(p: ExponentField) -> Result<Self> {
        if p.p_minus <= 1.0 {
            return Err(Error::NotAnNFunction(format!(
                "a^p with p_min = {} is not superlinear",
                p.p_minus
            )));
        }
        Ok(Self::from_repr(Repr::Power { p, normalized: false }))
    }

    /// `M(t,x,a) = a^{p(t,x)} / p(t,x)`; requires `p_minus > 1`.
    pub fn power_normalized(p: ExponentField) -> Result<Self> {
        let mut nf = Self::power(p)?;
        if let Repr::Power { p, .. } = &*nf.repr {
            nf.repr = Arc::new(Repr::Power {
                p: p.clone(),
                normalized: true,
            });
        }
        Ok(nf)
    }

    /// `M(t,x,a) = (e^a)^{p(t,x)} − 1`.
    pub fn exp_power(p: ExponentField) -> Self {
        Self::from_repr(Repr::ExpPower { p })
    }

    /// `M(t,x,a) = a^{p(t,x)} ln(a + 1)`.
    pub fn power_log(p: ExponentField) -> Self {
        Self::from_repr(Repr::PowerLog { p })
    }

    /// `(t,x)`-independent N-function through convex data, starting at `(0, 0)`.
    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.first() != Some(&0.0) || values.first() != Some(&0.0) {
            return Err(Error::NotAnNFunction("tabulated data must start at (0, 0)".into()));
        }
        if values.iter().skip(1).any(|&v| v <= 0.0) {
            return Err(Error::NotAnNFunction("tabulated values must be positive for a > 0".into()));
        }
        let a_max = *nodes.last().unwrap();
        let spline = ConvexSpline::new(nodes, values)?;
        let mut nf = Self::from_repr(Repr::Tabulated(spline));
        nf.a_grid.a_max = a_max;
        Ok(nf)
    }

    /// N-function from closures. Without a derivative, one-sided differences
    /// are used; without a conjugate, the numeric Legendre transform.
    pub fn custom(parts: CustomParts) -> Self {
        Self::from_repr(Repr::Custom(parts))
    }

    /// Shorthand for [`NFunction::custom`] with only a value closure.
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self::custom(CustomParts {
            name: name.into(),
            value: Arc::new(f),
            derivative: None,
            conjugate: None,
        })
    }

    /// Builtin families by kind name: `power`, `exp_power`, `power_log`.
    pub fn builtin(kind: NKind, p: ExponentField) -> Result<Self> {
        match kind {
            NKind::Power => Self::power(p),
            NKind::ExpPower => Ok(Self::exp_power(p)),
            NKind::PowerLog => Ok(Self::power_log(p)),
            other => Err(Error::Parameter(format!("{other:?} is not a builtin family"))),
        }
    }

    pub fn with_domain(mut self, domain: SpaceTime) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn with_a_grid(mut self, a_grid: AGrid) -> Self {
        self.a_grid = a_grid;
        self
    }

    pub fn domain(&self) -> Option<&SpaceTime> {
        self.domain.as_ref()
    }

    pub fn a_grid(&self) -> AGrid {
        self.a_grid
    }

    pub fn kind(&self) -> NKind {
        match &*self.repr {
            Repr::Power { .. } => NKind::Power,
            Repr::ExpPower { .. } => NKind::ExpPower,
            Repr::PowerLog { .. } => NKind::PowerLog,
            Repr::Tabulated(_) => NKind::Tabulated,
            Repr::ConjugateOf(_) => NKind::ConjugateOf,
            Repr::Sobolev { .. } => NKind::SobolevConjugate,
            Repr::Custom(_) => NKind::Custom,
        }
    }

    pub fn label(&self) -> String {
        match &*self.repr {
            Repr::Power { p, normalized: false } => format!("a^p, p={}", p.label()),
            Repr::Power { p, normalized: true } => format!("a^p/p, p={}", p.label()),
            Repr::ExpPower { p } => format!("(e^a)^p-1, p={}", p.label()),
            Repr::PowerLog { p } => format!("a^p ln(a+1), p={}", p.label()),
            Repr::Tabulated(s) => format!("tabulated({} nodes)", s.nodes().len()),
            Repr::ConjugateOf(m) => format!("conjugate of [{}]", m.label()),
            Repr::Sobolev { base, dim, .. } => format!("Sobolev conjugate (d={dim}) of [{}]", base.label()),
            Repr::Custom(c) => c.name.clone(),
        }
    }

    /// Exponent field of the analytic families.
    pub fn exponent(&self) -> Option<&ExponentField> {
        match &*self.repr {
            Repr::Power { p, .. } | Repr::ExpPower { p } | Repr::PowerLog { p } => Some(p),
            _ => None,
        }
    }

    /// True when `M` does not depend on `(t, x)`.
    pub fn is_constant_in_tx(&self) -> bool {
        match &*self.repr {
            Repr::Power { p, .. } | Repr::ExpPower { p } | Repr::PowerLog { p } => p.constant.is_some(),
            Repr::Tabulated(_) => true,
            Repr::ConjugateOf(m) => m.is_constant_in_tx(),
            Repr::Sobolev { base, .. } => base.is_constant_in_tx(),
            Repr::Custom(_) => false,
        }
    }

    fn check_point(&self, t: f64, x: &[f64]) -> Result<()> {
        match &self.domain {
            Some(q) => q.check_point(t, x),
            None => Ok(()),
        }
    }

    /// `M(t,x,a)` with argument checks.
    pub fn eval(&self, t: f64, x: &[f64], a: f64) -> Result<f64> {
        if a.is_nan() || a < 0.0 {
            return Err(Error::Domain(format!("N-functions take a >= 0, got {a}")));
        }
        self.check_point(t, x)?;
        Ok(self.value(t, x, a))
    }

    /// `M(t,x,a)` without checks; `a` is taken by absolute value.
    ///
    /// Returns `+∞` where the value is infinite (conjugates of functions that
    /// are not superlinear, Sobolev conjugates beyond their finite range).
    pub fn value(&self, t: f64, x: &[f64], a: f64) -> f64 {
        let a = a.abs();
        match &*self.repr {
            Repr::Power { p, normalized } => {
                let p = p.eval(t, x);
                let v = a.powf(p);
                if *normalized {
                    v / p
                } else {
                    v
                }
            }
            Repr::ExpPower { p } => (p.eval(t, x) * a).exp_m1(),
            Repr::PowerLog { p } => a.powf(p.eval(t, x)) * a.ln_1p(),
            Repr::Tabulated(s) => s.eval(a),
            Repr::ConjugateOf(m) => m.conjugate_value(t, x, a).unwrap_or(f64::INFINITY),
            Repr::Sobolev { base, dim, normalized } => sobolev_value(base, *dim, *normalized, t, x, a),
            Repr::Custom(c) => (c.value)(t, x, a),
        }
    }

    /// Right derivative `∂M/∂a (t,x,a)`.
    pub fn derivative(&self, t: f64, x: &[f64], a: f64) -> f64 {
        let a = a.abs();
        match &*self.repr {
            Repr::Power { p, normalized } => {
                let p = p.eval(t, x);
                if a == 0.0 {
                    return 0.0;
                }
                let v = a.powf(p - 1.0);
                if *normalized {
                    v
                } else {
                    p * v
                }
            }
            Repr::ExpPower { p } => {
                let p = p.eval(t, x);
                p * (p * a).exp()
            }
            Repr::PowerLog { p } => {
                let p = p.eval(t, x);
                if a == 0.0 {
                    return 0.0;
                }
                p * a.powf(p - 1.0) * a.ln_1p() + a.powf(p) / (1.0 + a)
            }
            Repr::Tabulated(s) => s.derivative(a),
            Repr::ConjugateOf(m) => m.conjugate_argmax(t, x, a).unwrap_or(f64::INFINITY),
            Repr::Custom(CustomParts {
                derivative: Some(d), ..
            }) => d(t, x, a),
            _ => {
                let h = 1e-7 * a.max(1e-3);
                (self.value(t, x, a + h) - self.value(t, x, a)) / h
            }
        }
    }

    /// `M*(t,x,b) = sup_{a ≥ 0}(a·b − M(t,x,a))` with argument checks.
    pub fn conjugate_eval(&self, t: f64, x: &[f64], b: f64) -> Result<f64> {
        if b.is_nan() || b < 0.0 {
            return Err(Error::Domain(format!("conjugates take b >= 0, got {b}")));
        }
        self.check_point(t, x)?;
        self.conjugate_value(t, x, b)
    }

    /// Conjugate without the domain checks; closed forms where available.
    pub fn conjugate_value(&self, t: f64, x: &[f64], b: f64) -> Result<f64> {
        let b = b.abs();
        if b == 0.0 {
            return Ok(0.0);
        }
        match &*self.repr {
            Repr::Power { p, normalized } => {
                let p = p.eval(t, x);
                let q = p / (p - 1.0);
                Ok(if *normalized {
                    b.powf(q) / q
                } else {
                    (p - 1.0) * (b / p).powf(q)
                })
            }
            Repr::ExpPower { p } => {
                let p = p.eval(t, x);
                if b <= p {
                    Ok(0.0)
                } else {
                    let a = (b / p).ln() / p;
                    Ok(a * b - (b / p - 1.0))
                }
            }
            Repr::ConjugateOf(m) => Ok(m.value(t, x, b)),
            Repr::Custom(CustomParts {
                conjugate: Some(c), ..
            }) => Ok(c(t, x, b)),
            _ => numerics::legendre(|a| self.value(t, x, a), b),
        }
    }

    /// Maximiser `a*(b)` of `a·b − M(t,x,a)`, i.e. a subgradient of `M*` at `b`.
    pub fn conjugate_argmax(&self, t: f64, x: &[f64], b: f64) -> Result<f64> {
        let b = b.abs();
        match &*self.repr {
            Repr::Power { p, normalized } => {
                let p = p.eval(t, x);
                Ok(if *normalized {
                    b.powf(1.0 / (p - 1.0))
                } else {
                    (b / p).powf(1.0 / (p - 1.0))
                })
            }
            Repr::ExpPower { p } => {
                let p = p.eval(t, x);
                Ok(if b <= p { 0.0 } else { (b / p).ln() / p })
            }
            Repr::ConjugateOf(m) => Ok(m.derivative(t, x, b)),
            _ => {
                if b == 0.0 {
                    return Ok(0.0);
                }
                let mut a_max = 1.0;
                while self.value(t, x, a_max) / a_max <= b {
                    a_max *= 2.0;
                    if a_max > 1e150 {
                        return Err(Error::UnboundedConjugate { b, a_max });
                    }
                }
                Ok(numerics::golden_max(|a| a * b - self.value(t, x, a), 0.0, a_max, 1e-13).0)
            }
        }
    }

    /// The conjugate N-function `M*` as an [`NFunction`]; its conjugate is `M`.
    pub fn conjugate(&self) -> NFunction {
        if let Repr::ConjugateOf(m) = &*self.repr {
            return m.clone();
        }
        let mut out = Self::from_repr(Repr::ConjugateOf(self.clone()));
        out.domain = self.domain;
        out
    }

    /// Inverse `M^{-1}(t,x,v)`: the unique `a ≥ 0` with `M(t,x,a) = v`.
    pub fn inverse(&self, t: f64, x: &[f64], v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        match &*self.repr {
            Repr::Power { p, normalized } => {
                let p = p.eval(t, x);
                if *normalized {
                    (p * v).powf(1.0 / p)
                } else {
                    v.powf(1.0 / p)
                }
            }
            Repr::ExpPower { p } => v.ln_1p() / p.eval(t, x),
            _ => {
                let mut hi = 1.0;
                while self.value(t, x, hi) < v {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return f64::INFINITY;
                    }
                }
                let lo = if hi > 1.0 { 0.5 * hi } else { 0.0 };
                numerics::bisect_increasing(|a| self.value(t, x, a), v, lo, hi, 1e-15 * hi)
            }
        }
    }

    /// Tabulates `b ↦ M*(t,x,b)` on `b_grid`.
    pub fn tabulate_conjugate(&self, t: f64, x: &[f64], b_grid: &[f64]) -> Result<ConjugateTable> {
        let values = b_grid
            .iter()
            .map(|&b| self.conjugate_value(t, x, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConjugateTable {
            b: b_grid.to_vec(),
            values,
        })
    }

    /// Checks the N-function axioms on the configured `a`-grid at each point.
    pub fn check_axioms(&self, points: &[(f64, Vec<f64>)]) -> AxiomReport {
        let grid = self.a_grid.points();
        let mut report = AxiomReport {
            passed: true,
            zero_at_zero: true,
            positive: true,
            convex: true,
            superlinear: true,
            min_growth_ratio: f64::INFINITY,
            violations: Vec::new(),
        };
        for (t, x) in points {
            let (t, x) = (*t, x.as_slice());
            let m0 = self.value(t, x, 0.0);
            if m0 != 0.0 {
                report.zero_at_zero = false;
                report.violations.push(format!("M({t},{x:?},0) = {m0}"));
            }
            let vals: Vec<f64> = grid.iter().map(|&a| self.value(t, x, a)).collect();
            if let Some((a, v)) = grid.iter().zip(&vals).find(|(_, v)| !(**v > 0.0)) {
                report.positive = false;
                report.violations.push(format!("M({t},{x:?},{a}) = {v} is not positive"));
            }
            let mut all = vec![0.0];
            all.extend(&grid);
            for w in all.windows(2) {
                let (a1, a2) = (w[0], w[1]);
                let mid = self.value(t, x, 0.5 * (a1 + a2));
                let chord = 0.5 * (self.value(t, x, a1) + self.value(t, x, a2));
                if mid > chord * (1.0 + 1e-12) + 1e-300 {
                    report.convex = false;
                    report.violations.push(format!("midpoint convexity fails on [{a1}, {a2}] at ({t},{x:?})"));
                }
            }
            for i in 0..grid.len() {
                for j in (i + 2..grid.len()).step_by(7) {
                    let (a1, a2) = (grid[i], grid[j]);
                    let mid = self.value(t, x, 0.5 * (a1 + a2));
                    if mid > 0.5 * (vals[i] + vals[j]) * (1.0 + 1e-12) {
                        report.convex = false;
                        report.violations.push(format!("midpoint convexity fails on [{a1}, {a2}] at ({t},{x:?})"));
                    }
                }
            }
            let first = vals[0] / grid[0];
            let last = vals[vals.len() - 1] / grid[grid.len() - 1];
            let ratio = last / first;
            report.min_growth_ratio = report.min_growth_ratio.min(ratio);
            if !(ratio >= self.a_grid.growth_margin) {
                report.superlinear = false;
                report.violations.push(format!(
                    "growth ratio M(a_max)/a_max : M(a_min)/a_min = {ratio} below margin {} at ({t},{x:?})",
                    self.a_grid.growth_margin
                ));
            }
        }
        report.violations.dedup();
        report.passed = report.zero_at_zero && report.positive && report.convex && report.superlinear;
        report
    }

    /// `max |M** − M|` over samples, with both transforms computed numerically.
    pub fn biconjugate_residual(&self, samples: &[(f64, Vec<f64>, f64)]) -> Result<BiconjugateResidual> {
        let mut out = BiconjugateResidual {
            absolute: 0.0,
            relative: 0.0,
        };
        for (t, x, a) in samples {
            let (t, x, a) = (*t, x.as_slice(), *a);
            let m = self.value(t, x, a);
            let mstar = |b: f64| numerics::legendre(|s| self.value(t, x, s), b).unwrap_or(f64::INFINITY);
            let mss = numerics::legendre(mstar, a)?;
            let abs = (mss - m).abs();
            out.absolute = out.absolute.max(abs);
            out.relative = out.relative.max(abs / m.abs().max(1.0));
        }
        Ok(out)
    }

    /// Checks `M(t,x,a)/M(s,y,a) ≤ a^{H / ln(1/(|t−s|+|x−y|))}` on all pairs and
    /// all `a ≥ 1`.
    pub fn check_log_holder(
        &self,
        h: f64,
        pairs: &[PointPair],
        a_samples: &[f64],
    ) -> Result<LogHolderReport> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!("log-Hölder constant must be positive, got {h}")));
        }
        if let Some(a) = a_samples.iter().find(|&&a| !(a >= 1.0)) {
            return Err(Error::Precondition(format!("log-Hölder check takes a >= 1, got {a}")));
        }
        let mut report = LogHolderReport {
            passed: true,
            max_violation_ratio: 0.0,
            violations: Vec::new(),
        };
        for (idx, ((t, x), (s, y))) in pairs.iter().enumerate() {
            let dist = (t - s).abs() + euclid(x, y);
            if dist > 0.5 {
                return Err(Error::Precondition(format!("pair {idx} is {dist} apart, more than 1/2")));
            }
            for &a in a_samples {
                let ratio = self.value(*t, x, a) / self.value(*s, y, a);
                let bound = if dist == 0.0 { 1.0 } else { a.powf(h / (1.0 / dist).ln()) };
                let excess = ratio / bound;
                report.max_violation_ratio = report.max_violation_ratio.max(excess);
                if excess > 1.0 + 1e-12 {
                    report.violations.push(LogHolderViolation {
                        pair: idx,
                        a,
                        distance: dist,
                        ratio,
                        bound,
                    });
                }
            }
        }
        report.passed = report.violations.is_empty();
        Ok(report)
    }

    /// Smallest `c` with `M(t,x,2a) ≤ c·M(t,x,a)` over the samples (`h ≡ 0`).
    ///
    /// The constant is declared unbounded when the fit over all samples
    /// exceeds the fit over the lower half of the `a`-range by more than 10%.
    pub fn check_delta2(&self, samples: &[(f64, Vec<f64>, f64)]) -> Delta2Report {
        let a_top = samples.iter().map(|s| s.2).fold(0.0, f64::max);
        let (mut c_all, mut c_half) = (1.0_f64, 1.0_f64);
        for (t, x, a) in samples {
            if *a <= 0.0 {
                continue;
            }
            let r = self.value(*t, x, 2.0 * a) / self.value(*t, x, *a);
            c_all = c_all.max(r);
            if *a <= 0.5 * a_top {
                c_half = c_half.max(r);
            }
        }
        let bounded = c_all <= 1.1 * c_half;
        Delta2Report {
            constant: bounded.then_some(c_all),
            sup_ratio: c_all,
            bounded,
        }
    }

    /// Sobolev conjugate `M_*` in dimension `d`, defined through
    /// `M_*^{-1}(ξ) = ∫_0^ξ M^{-1}(ζ) / ζ^{(d+1)/d} dζ`.
    ///
    /// With `normalize`, `M` is first replaced by `M(1)·a` on `[0,1]`.
    /// Integrability at zero is checked at the domain center (or the origin).
    pub fn sobolev_conjugate(&self, d: usize, normalize: bool) -> Result<NFunction> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        let (t, x) = self.reference_point();
        sobolev_inverse(self, d, normalize, t, &x, 1.0)?;
        let mut out = Self::from_repr(Repr::Sobolev {
            base: self.clone(),
            dim: d,
            normalized: normalize,
        });
        out.domain = self.domain;
        Ok(out)
    }

    /// `M_*^{-1}(t,x,ξ)` for a Sobolev conjugate; errors for other kinds.
    pub fn sobolev_inverse(&self, t: f64, x: &[f64], xi: f64) -> Result<f64> {
        match &*self.repr {
            Repr::Sobolev { base, dim, normalized } => sobolev_inverse(base, *dim, *normalized, t, x, xi),
            _ => Err(Error::Parameter("not a Sobolev conjugate".into())),
        }
    }

    /// `ℓ(t,x) = lim_{ξ→∞} M_*^{-1}(t,x,ξ)`; `None` when infinite.
    pub fn sobolev_limit(&self, t: f64, x: &[f64]) -> Result<Option<f64>> {
        match &*self.repr {
            Repr::Sobolev { base, dim, normalized } => {
                let below = sobolev_inverse(base, *dim, *normalized, t, x, 1.0)?;
                Ok(sobolev_upper(base, *dim, *normalized, t, x).map(|up| below + up))
            }
            _ => Err(Error::Parameter("not a Sobolev conjugate".into())),
        }
    }

    fn reference_point(&self) -> (f64, Vec<f64>) {
        match &self.domain {
            Some(q) => (
                0.5 * q.t_len,
                q.omega.extents().iter().map(|l| 0.5 * l).collect(),
            ),
            None => (0.0, vec![0.0]),
        }
    }
}

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn normalized_inverse(base: &NFunction, normalized: bool, t: f64, x: &[f64], v: f64) -> f64 {
    if normalized {
        let m1 = base.value(t, x, 1.0);
        if v <= m1 {
            return v / m1;
        }
    }
    base.inverse(t, x, v)
}

/// Sums `∫ g(u) du` over unit panels walking away from `start` in direction
/// `dir` (±1), with panel edges snapped to `kink`. Returns `None` when the
/// panel contributions stop decaying geometrically.
fn integrate_tail<G: Fn(f64) -> f64>(g: G, start: f64, dir: f64, kink: Option<f64>) -> Option<f64> {
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut u = start;
    for k in 0..6000 {
        let mut next = u + dir;
        if let Some(kk) = kink {
            if (kk - u) * dir > 0.0 && (next - kk) * dir > 0.0 {
                next = kk;
            }
        }
        let (lo, hi) = if dir < 0.0 { (next, u) } else { (u, next) };
        let c = numerics::integrate(&g, lo, hi, 1);
        total += c;
        if !total.is_finite() {
            return None;
        }
        let full_panel = ((next - u).abs() - 1.0).abs() < 1e-12;
        if full_panel && prev.is_finite() && prev > 0.0 && k >= 8 {
            let q = c / prev;
            if q < 0.999 {
                let tail = c * q / (1.0 - q);
                if tail <= 1e-15 * total.abs() {
                    return Some(total + tail);
                }
            } else if k >= 60 {
                return None;
            }
        }
        if full_panel {
            prev = c;
        }
        u = next;
    }
    None
}

fn sobolev_inverse(base: &NFunction, d: usize, normalized: bool, t: f64, x: &[f64], xi: f64) -> Result<f64> {
    if xi <= 0.0 {
        return Ok(0.0);
    }
    let inv_d = 1.0 / d as f64;
    let g = |u: f64| normalized_inverse(base, normalized, t, x, u.exp()) * (-u * inv_d).exp();
    let kink = normalized.then(|| base.value(t, x, 1.0).ln());
    let top = xi.ln();
    let below = integrate_tail(g, top.min(0.0), -1.0, kink).ok_or_else(|| {
        Error::NonIntegrable(format!(
            "∫_0 M^-1(ζ)/ζ^((d+1)/d) dζ diverges at 0 for [{}], d = {d}",
            base.label()
        ))
    })?;
    if top <= 0.0 {
        return Ok(below);
    }
    let mut edges = vec![0.0];
    if let Some(k) = kink.filter(|&k| k > 0.0 && k < top) {
        edges.push(k);
    }
    edges.push(top);
    let upper: f64 = edges
        .windows(2)
        .map(|w| numerics::integrate(g, w[0], w[1], (w[1] - w[0]).ceil().max(1.0) as usize))
        .sum();
    Ok(below + upper)
}

fn sobolev_upper(base: &NFunction, d: usize, normalized: bool, t: f64, x: &[f64]) -> Option<f64> {
    let inv_d = 1.0 / d as f64;
    let g = |u: f64| normalized_inverse(base, normalized, t, x, u.exp()) * (-u * inv_d).exp();
    let kink = normalized.then(|| base.value(t, x, 1.0).ln());
    integrate_tail(g, 0.0, 1.0, kink)
}

fn sobolev_value(base: &NFunction, d: usize, normalized: bool, t: f64, x: &[f64], a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let n = |s: f64| sobolev_inverse(base, d, normalized, t, x, s).unwrap_or(f64::INFINITY);
    let mut hi = 1.0;
    while n(hi) < a {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.5 * hi;
    while lo > 1e-300 && n(lo) > a {
        lo *= 0.5;
    }
    numerics::bisect_increasing(n, a, lo, hi, 1e-14 * hi)
}

/// Result of [`NFunction::check_axioms`].
#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub passed: bool,
    pub zero_at_zero: bool,
    pub positive: bool,
    pub convex: bool,
    pub superlinear: bool,
    pub min_growth_ratio: f64,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BiconjugateResidual {
    pub absolute: f64,
    /// Residual divided by `max(M, 1)`.
    pub relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogHolderViolation {
    pub pair: usize,
    pub a: f64,
    pub distance: f64,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogHolderReport {
    pub passed: bool,
    /// `max ratio / bound` over all pairs and samples.
    pub max_violation_ratio: f64,
    pub violations: Vec<LogHolderViolation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Delta2Report {
    /// Fitted constant, `None` when unbounded within the sample range.
    pub constant: Option<f64>,
    pub sup_ratio: f64,
    pub bounded: bool,
}

/// Tabulated conjugate `b ↦ M*(t,x,b)` at a fixed `(t,x)`.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugateTable {
    pub b: Vec<f64>,
    pub values: Vec<f64>,
}

impl ConjugateTable {
    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[1].abs().max(1.0))
    }

    /// Discrete convexity of the table (nondecreasing secant slopes).
    pub fn is_convex(&self) -> bool {
        let slopes: Vec<f64> = (0..self.b.len().saturating_sub(1))
            .map(|i| (self.values[i + 1] - self.values[i]) / (self.b[i + 1] - self.b[i]))
            .collect();
        slopes
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs().max(w[1].abs()).max(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ExponentField {
        ExponentField::constant(v).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sq = NFunction::power(p(2.0)).unwrap();
        assert_eq!(sq.eval(0.0, &[0.5], 0.0).unwrap(), 0.0);
        assert!((sq.eval(0.0, &[0.5], 3.0).unwrap() - 9.0).abs() < 1e-14);
        let m1 = NFunction::exp_power(p(1.0));
        assert!((m1.eval(0.0, &[0.5], 1.0).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let sq = NFunction::power(p(2.0)).unwrap().with_domain(SpaceTime::unit_interval());
        assert!(matches!(sq.eval(0.5, &[0.5], -1.0), Err(Error::Domain(_))));
        assert!(matches!(sq.eval(0.5, &[1.5], 1.0), Err(Error::Domain(_))));
        assert!(matches!(sq.eval(2.0, &[0.5], 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn builtin_examples() {
        let pl = NFunction::builtin(NKind::PowerLog, p(1.0)).unwrap();
        assert!((pl.value(0.0, &[0.0], 1.0) - 2f64.ln()).abs() < 1e-15);
        let ep = NFunction::builtin(NKind::ExpPower, p(2.0)).unwrap();
        assert_eq!(ep.value(0.0, &[0.0], 0.0), 0.0);
        assert!(matches!(
            NFunction::builtin(NKind::Power, p(1.0)),
            Err(Error::NotAnNFunction(_))
        ));
        assert!(ExponentField::constant(0.5).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let sq = NFunction::power(p(2.0)).unwrap();
        assert!((sq.conjugate_eval(0.0, &[0.0], 2.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(sq.conjugate_eval(0.0, &[0.0], 0.0).unwrap(), 0.0);
        let cube = NFunction::power_normalized(p(3.0)).unwrap();
        assert!((cube.conjugate_eval(0.0, &[0.0], 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        let pl = NFunction::power_log(p(2.0));
        assert_eq!(pl.conjugate_eval(0.0, &[0.0], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn numeric_conjugate_matches_closed_form() {
        let closed = NFunction::power_normalized(p(1.5)).unwrap();
        let numeric = NFunction::from_fn("a^1.5/1.5", |_, _, a| a.powf(1.5) / 1.5);
        for i in 0..=40 {
            let b = i as f64 * 0.25;
            let c = closed.conjugate_value(0.0, &[0.0], b).unwrap();
            let n = numeric.conjugate_value(0.0, &[0.0], b).unwrap();
            assert!((c - n).abs() <= 1e-9 * c.max(1e-300) + 1e-300, "b={b}: {c} vs {n}");
        }
    }

    #[test]
    fn linear_function_has_unbounded_conjugate() {
        let lin = NFunction::from_fn("a", |_, _, a| a);
        assert!(matches!(
            lin.conjugate_eval(0.0, &[0.0], 2.0),
            Err(Error::UnboundedConjugate { .. })
        ));
        let report = lin.check_axioms(&[(0.0, vec![0.0])]);
        assert!(!report.superlinear && !report.passed);
    }

    #[test]
    fn axioms_hold_for_builtins() {
        let pts = vec![(0.1, vec![0.2]), (0.9, vec![0.7])];
        let field = ExponentField::from_expr("2 + 0.5*sin(pi*x)*sin(pi*t)", 1.5, 2.5).unwrap();
        for nf in [
            NFunction::power(field.clone()).unwrap(),
            NFunction::exp_power(field.clone()),
            NFunction::power_log(field),
        ] {
            let r = nf.check_axioms(&pts);
            assert!(r.passed, "{}: {:?}", nf.label(), r.violations);
        }
    }

    #[test]
    fn biconjugate_of_square_and_table() {
        let sq = NFunction::power(p(2.0)).unwrap();
        let samples: Vec<_> = (0..20).map(|i| (0.0, vec![0.0], 0.25 * i as f64)).collect();
        let r = sq.biconjugate_residual(&samples).unwrap();
        assert!(r.absolute <= 1e-8, "{r:?}");

        let nodes: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = nodes.iter().map(|a| a.exp() - 1.0 - a).collect();
        let tab = NFunction::tabulated(nodes.clone(), values).unwrap();
        let samples: Vec<_> = (0..30).map(|i| (0.0, vec![0.0], 0.2 * i as f64 + 0.05)).collect();
        let r = tab.biconjugate_residual(&samples).unwrap();
        assert!(r.relative <= 1e-6, "{r:?}");
        // dense-grid oracle for the interpolation error itself
        for (_, _, a) in &samples {
            let exact = a.exp() - 1.0 - a;
            assert!((tab.value(0.0, &[0.0], *a) - exact).abs() <= 2e-3 * exact + 1e-4);
        }
    }

    #[test]
    fn conjugate_table_is_convex_and_monotone() {
        let nf = NFunction::power_log(p(1.5));
        let bs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let table = nf.tabulate_conjugate(0.0, &[0.0], &bs).unwrap();
        assert!(table.is_nondecreasing());
        assert!(table.is_convex());
    }

    #[test]
    fn log_holder_constant_exponent_passes() {
        let nf = NFunction::power(p(3.0)).unwrap();
        let pairs = vec![((0.1, vec![0.1]), (0.2, vec![0.3])), ((0.5, vec![0.5]), (0.5, vec![0.5]))];
        let r = nf.check_log_holder(0.1, &pairs, &[1.0, 2.0, 100.0]).unwrap();
        assert!(r.passed);
        assert!((r.max_violation_ratio - 1.0).abs() < 1e-12 || r.max_violation_ratio < 1.0);
    }

    #[test]
    fn log_holder_smooth_exponent_passes_with_derived_constant() {
        let eps = 0.3;
        let field = ExponentField::from_fn("2+eps sin", move |_, x| 2.0 + eps * (std::f64::consts::PI * x[0]).sin(), 2.0 - eps, 2.0 + eps).unwrap();
        let nf = NFunction::power(field).unwrap();
        // |p(x)-p(y)| <= eps*pi*r <= H/ln(1/r) with H = eps*pi*max r ln(1/r) = eps*pi/e
        let h = eps * std::f64::consts::PI / std::f64::consts::E;
        let mut pairs = Vec::new();
        for i in 0..40 {
            for j in [1usize, 3, 10, 40] {
                let x = i as f64 / 40.0;
                let y = (x + j as f64 / 100.0).min(1.0);
                pairs.push(((0.5, vec![x]), (0.5, vec![y])));
            }
        }
        let r = nf.check_log_holder(h, &pairs, &[1.0, 2.0, 10.0, 1e3]).unwrap();
        assert!(r.passed, "{:?}", r.violations.first());
    }

    #[test]
    fn log_holder_step_exponent_fails_near_the_jump() {
        let field = ExponentField::from_fn("step", |_, x| if x[0] < 0.5 { 2.0 } else { 3.0 }, 2.0, 3.0).unwrap();
        let nf = NFunction::power(field).unwrap();
        let pairs: Vec<_> = [1e-1, 1e-2, 1e-4]
            .iter()
            .map(|&eta| ((0.5, vec![0.5 + eta]), (0.5, vec![0.5 - eta])))
            .collect();
        let r = nf.check_log_holder(0.5, &pairs, &[10.0]).unwrap();
        assert!(!r.passed);
        assert!(r.violations.iter().any(|v| v.pair == 2));
    }

    #[test]
    fn log_holder_preconditions() {
        let nf = NFunction::power(p(2.0)).unwrap();
        let far = vec![((0.0, vec![0.0]), (0.4, vec![0.4]))];
        assert!(matches!(nf.check_log_holder(1.0, &far, &[2.0]), Err(Error::Precondition(_))));
        let near = vec![((0.0, vec![0.0]), (0.1, vec![0.1]))];
        assert!(matches!(nf.check_log_holder(1.0, &near, &[0.5]), Err(Error::Precondition(_))));
    }

    #[test]
    fn delta2_examples() {
        let sq = NFunction::power(p(2.0)).unwrap();
        let samples: Vec<_> = (1..50).map(|i| (0.0, vec![0.0], 0.3 * i as f64)).collect();
        let r = sq.check_delta2(&samples);
        assert!(r.bounded);
        assert!((r.constant.unwrap() - 4.0).abs() < 1e-12);

        let expo = NFunction::from_fn("e^a-1-a", |_, _, a| a.exp_m1() - a);
        let r = expo.check_delta2(&samples);
        assert!(!r.bounded && r.constant.is_none());

        let zeros = vec![(0.0, vec![0.0], 0.0); 4];
        assert_eq!(sq.check_delta2(&zeros).constant, Some(1.0));
    }

    #[test]
    fn sobolev_conjugate_of_square_in_three_dimensions() {
        let sq = NFunction::power(p(2.0)).unwrap();
        let ms = sq.sobolev_conjugate(3, false).unwrap();
        for xi in [0.01, 0.5, 1.0, 7.0, 300.0] {
            let inv = ms.sobolev_inverse(0.0, &[0.0], xi).unwrap();
            assert!((inv - 6.0 * xi.powf(1.0 / 6.0)).abs() < 1e-10 * inv, "xi={xi}: {inv}");
        }
        assert_eq!(ms.sobolev_inverse(0.0, &[0.0], 0.0).unwrap(), 0.0);
        for a in [0.5, 3.0, 9.0] {
            let v = ms.value(0.0, &[0.0], a);
            let exact = (a / 6.0f64).powi(6);
            assert!((v - exact).abs() <= 1e-8 * exact, "a={a}: {v} vs {exact}");
        }
        assert_eq!(ms.sobolev_limit(0.0, &[0.0]).unwrap(), None);
    }

    #[test]
    fn sobolev_conjugate_normalized_has_kinked_inverse() {
        let sq = NFunction::power(p(2.0)).unwrap();
        let ms = sq.sobolev_conjugate(3, true).unwrap();
        let below = ms.sobolev_inverse(0.0, &[0.0], 0.5).unwrap();
        assert!((below - 1.5 * 0.5f64.powf(2.0 / 3.0)).abs() < 1e-12);
        let above = ms.sobolev_inverse(0.0, &[0.0], 64.0).unwrap();
        assert!((above - (6.0 * 2.0 - 4.5)).abs() < 1e-10);
    }

    #[test]
    fn sobolev_conjugate_diverges_in_one_dimension() {
        let sq = NFunction::power(p(2.0)).unwrap();
        assert!(matches!(sq.sobolev_conjugate(1, false), Err(Error::NonIntegrable(_))));
        assert!(matches!(sq.sobolev_conjugate(1, true), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn sobolev_limit_is_finite_above_the_dimension() {
        // p = 4 > d = 3: ∫_0^∞ ζ^{1/4 - 4/3} dζ converges at infinity but not at 0
        // without normalisation; with it, ℓ is finite.
        let nf = NFunction::power(p(4.0)).unwrap();
        let ms = nf.sobolev_conjugate(3, true).unwrap();
        let ell = ms.sobolev_limit(0.0, &[0.0]).unwrap().unwrap();
        // 3/2 + ∫_1^∞ ζ^{-13/12} dζ = 3/2 + 12
        assert!((ell - 13.5).abs() < 1e-8, "{ell}");
        assert!(ms.value(0.0, &[0.0], 14.0).is_infinite());
    }

    #[test]
    fn exponent_table_interpolates_and_encodes_jumps() {
        let f = ExponentField::from_table(
            vec![0.0, 1.0],
            vec![0.0, 0.5, 0.5, 1.0],
            vec![vec![2.0, 2.0, 3.0, 3.0], vec![2.0, 2.0, 3.0, 3.0]],
            2.0,
            3.0,
        )
        .unwrap();
        assert!((f.eval(0.3, &[0.25]) - 2.0).abs() < 1e-14);
        assert!((f.eval(0.3, &[0.75]) - 3.0).abs() < 1e-14);
        assert!((f.eval(0.3, &[0.5]) - 3.0).abs() < 1e-14);
        assert!((f.eval(0.3, &[0.4]) - 2.0).abs() < 1e-14);
    }
}
