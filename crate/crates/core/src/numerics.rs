//! Numerical kernels shared across modules.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximises a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, max)`. The endpoints are compared against the interior
/// estimate so that maxima attained at the boundary are reported exactly.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let scale = hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..400 {
        if (b - a) <= rel_tol * scale {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(lo, f(lo)), (hi, f(hi)), (c, fc), (d, fd), (mid, f(mid))]
        .into_iter()
        .fold((mid, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

/// Legendre transform `sup_{a ≥ 0} (a·b − m(a))` of a convex, superlinear `m`.
///
/// The bracket `[0, A]` is doubled until `m(A)/A > b`; convexity then confines
/// the maximiser to the bracket.
pub fn legendre<F: Fn(f64) -> f64>(m: F, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Ok(0.0);
    }
    let mut a_max = 1.0;
    while m(a_max) / a_max <= b {
        a_max *= 2.0;
        if a_max > 1e150 {
            return Err(Error::UnboundedConjugate { b, a_max });
        }
    }
    let (_, v) = golden_max(|a| a * b - m(a), 0.0, a_max, 1e-13);
    Ok(v.max(0.0))
}

/// Finds `x` in `[lo, hi]` with `g(x) = target` for nondecreasing `g` by
/// bisection, to absolute tolerance `tol` in `x`.
pub fn bisect_increasing<F: Fn(f64) -> f64>(g: F, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

static GL16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

/// Cached 16-point Gauss–Legendre rule.
pub fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    GL16.get_or_init(|| gauss_legendre(16))
}

/// `∫_a^b f` with composite 16-point Gauss–Legendre on `panels` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(w) {
            sum += wi * f(c + 0.5 * h * xi);
        }
    }
    0.5 * h * sum
}

/// Unnormalised bump profile `exp(1/(r²−1))` for `r < 1`, zero otherwise.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 / (r * r - 1.0)).exp()
    }
}

/// Derivative of [`bump`] with respect to `r`.
pub fn bump_derivative(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        let q = r * r - 1.0;
        -2.0 * r / (q * q) * (1.0 / q).exp()
    }
}

/// Quintic smoothstep on `[0,1]`: value 0 → 1 with vanishing first and second
/// derivatives at both ends.
pub fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

pub fn smoothstep_derivative(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    30.0 * s * s * (1.0 - s) * (1.0 - s)
}

/// Empirical quantile by linear interpolation of the sorted sample.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    let frac = pos - i as f64;
    sorted[i] * (1.0 - frac) + sorted[j] * frac
}

/// C¹ convexity-preserving quadratic spline through convex data.
///
/// Each interval carries at most one extra knot placed so that the derivative
/// is piecewise linear and nondecreasing (Schumaker's construction). Beyond
/// the last node the spline continues linearly with the final slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSpline {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl ConvexSpline {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 || values.len() != n {
            return Err(Error::Parameter("convex spline needs at least two (a, M) pairs".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("spline nodes must be strictly increasing".into()));
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (values[i + 1] - values[i]) / (nodes[i + 1] - nodes[i]))
            .collect();
        for w in secants.windows(2) {
            if w[1] < w[0] - 1e-12 * w[0].abs().max(w[1].abs()).max(1.0) {
                return Err(Error::NotAnNFunction("tabulated values are not convex".into()));
            }
        }
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            slopes[i] = 0.5 * (secants[i - 1] + secants[i]);
        }
        slopes[0] = if n > 2 {
            (2.0 * secants[0] - slopes[1]).clamp(0.0_f64.min(secants[0]), secants[0])
        } else {
            secants[0]
        };
        slopes[n - 1] = if n > 2 {
            (2.0 * secants[n - 2] - slopes[n - 2]).max(secants[n - 2])
        } else {
            secants[0]
        };
        Ok(ConvexSpline { nodes, values, slopes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interval(&self, a: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.partial_cmp(&a).unwrap()) {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        }
    }

    /// Knot position inside interval `i` and the slope there.
    fn knot(&self, i: usize) -> (f64, f64) {
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let delta = (self.values[i + 1] - self.values[i]) / (b - a);
        let lower = delta - self.slopes[i];
        let upper = self.slopes[i + 1] - delta;
        let theta = if lower + upper > 0.0 { upper / (lower + upper) } else { 0.5 };
        (a + theta * (b - a), delta)
    }

    pub fn eval(&self, a: f64) -> f64 {
        let n = self.nodes.len();
        if a >= self.nodes[n - 1] {
            return self.values[n - 1] + self.slopes[n - 1] * (a - self.nodes[n - 1]);
        }
        if a <= self.nodes[0] {
            return self.values[0] + self.slopes[0] * (a - self.nodes[0]);
        }
        let i = self.interval(a);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (k, sk) = self.knot(i);
        let (s0, s1) = (self.slopes[i], self.slopes[i + 1]);
        if a <= k {
            let h = a - x0;
            let curv = if k > x0 { (sk - s0) / (k - x0) } else { 0.0 };
            self.values[i] + s0 * h + 0.5 * curv * h * h
        } else {
            let h = x1 - a;
            let curv = if x1 > k { (s1 - sk) / (x1 - k) } else { 0.0 };
            self.values[i + 1] - s1 * h + 0.5 * curv * h * h
        }
    }

    /// Derivative of the spline (continuous).
    pub fn derivative(&self, a: f64) -> f64 {
        let n = self.nodes.len();
        if a >= self.nodes[n - 1] {
            return self.slopes[n - 1];
        }
        if a <= self.nodes[0] {
            return self.slopes[0];
        }
        let i = self.interval(a);
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (k, sk) = self.knot(i);
        let (s0, s1) = (self.slopes[i], self.slopes[i + 1]);
        if a <= k {
            if k > x0 {
                s0 + (sk - s0) * (a - x0) / (k - x0)
            } else {
                sk
            }
        } else if x1 > k {
            sk + (s1 - sk) * (a - k) / (x1 - k)
        } else {
            sk
        }
    }
}
