//! Modulars, Luxembourg and Orlicz norms, and convergence diagnostics on
//! [`GridField`]s.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::nfunction::NFunction;

/// Largest scale tried when bracketing a norm.
pub const LAMBDA_MAX: f64 = 1e12;

/// `Σ_c f(t_c, x_c, c)` and `max_c f`, parallel over time slices.
pub(crate) fn cell_sum_max<F>(grid: &Grid, f: F) -> (f64, f64)
where
    F: Fn(f64, &[f64], usize) -> f64 + Sync,
{
    let sc = grid.space_cells();
    (0..grid.nt)
        .into_par_iter()
        .map(|it| {
            let t = grid.time_center(it);
            let mut x = [0.0; 2];
            let mut sum = 0.0;
            let mut max = 0.0_f64;
            for s in 0..sc {
                grid.space_center_into(s, &mut x);
                let v = f(t, &x[..grid.dim()], it * sc + s);
                sum += v;
                max = max.max(v);
            }
            (sum, max)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1.max(b.1)))
}

fn check_domain(nf: &NFunction, field: &GridField) -> Result<()> {
    match nf.domain() {
        Some(q) if *q != field.grid().domain => Err(Error::Domain(format!(
            "N-function is defined on {q:?}, field lives on {:?}",
            field.grid().domain
        ))),
        _ => Ok(()),
    }
}

fn same_grid(a: &GridField, b: &GridField) -> Result<()> {
    if a.grid() != b.grid() || a.components() != b.components() {
        return Err(Error::Domain("fields do not share a grid".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModularReport {
    /// `ρ_M(field) = Σ_c w · M(t_c, x_c, |field_c|)`.
    pub value: f64,
    /// Largest single weighted cell contribution.
    pub max_cell: f64,
    pub finite: bool,
}

/// `ρ_M(field)`.
pub fn modular(nf: &NFunction, field: &GridField) -> Result<ModularReport> {
    check_domain(nf, field)?;
    Ok(scaled_modular(nf, field, 1.0))
}

/// `ρ_M(field / λ)` without domain checks.
pub(crate) fn scaled_modular(nf: &NFunction, field: &GridField, lambda: f64) -> ModularReport {
    let w = field.grid().weight();
    let (sum, max) = cell_sum_max(field.grid(), |t, x, c| nf.value(t, x, field.magnitude(c) / lambda));
    ModularReport {
        value: w * sum,
        max_cell: w * max,
        finite: sum.is_finite(),
    }
}

/// `ρ_{M*}(field)` using the conjugate of `nf`.
pub fn conjugate_modular(nf: &NFunction, field: &GridField) -> Result<ModularReport> {
    modular(&nf.conjugate(), field)
}

/// Luxembourg norm `inf{λ > 0 : ρ_M(field/λ) ≤ 1}` by bisection on `λ`.
pub fn luxembourg_norm(nf: &NFunction, field: &GridField) -> Result<f64> {
    check_domain(nf, field)?;
    luxembourg_unchecked(nf, field)
}

fn luxembourg_unchecked(nf: &NFunction, field: &GridField) -> Result<f64> {
    if field.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let rho = |lambda: f64| scaled_modular(nf, field, lambda).value;
    let mut hi = 1.0;
    while !(rho(hi) <= 1.0) {
        hi *= 2.0;
        if hi > LAMBDA_MAX {
            return Err(Error::Divergence(format!(
                "modular stays above 1 up to λ = {LAMBDA_MAX:e}"
            )));
        }
    }
    let mut lo = 0.5 * hi;
    while rho(lo) <= 1.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Divergence("modular stays below 1 as λ → 0".into()));
        }
    }
    while hi - lo > 1e-12_f64.min(1e-14 * hi).max(1e-15 * hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rho(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Orlicz norm `sup{Σ w η·field : ρ_{M*}(η) ≤ 1}`.
///
/// The maximiser is `η = M'(κ|field|)·field/|field|` with `κ` fixed by
/// `ρ_{M*}(η) = 1`; along it `M*(M'(s)) = s·M'(s) − M(s)`.
pub fn orlicz_norm(nf: &NFunction, field: &GridField) -> Result<f64> {
    check_domain(nf, field)?;
    if field.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let grid = field.grid();
    let w = grid.weight();
    let dual = |kappa: f64| {
        w * cell_sum_max(grid, |t, x, c| {
            let s = kappa * field.magnitude(c);
            if s == 0.0 {
                0.0
            } else {
                (s * nf.derivative(t, x, s) - nf.value(t, x, s)).max(0.0)
            }
        })
        .0
    };
    let mut hi = 1.0;
    while dual(hi) < 1.0 {
        hi *= 2.0;
        if hi > LAMBDA_MAX {
            return Err(Error::Divergence("dual modular stays below 1".into()));
        }
    }
    let mut lo = 0.5 * hi;
    while dual(lo) >= 1.0 {
        hi = lo;
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Divergence("dual modular stays above 1 as κ → 0".into()));
        }
    }
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dual(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = 0.5 * (lo + hi);
    let (sum, _) = cell_sum_max(grid, |t, x, c| {
        let m = field.magnitude(c);
        if m == 0.0 {
            0.0
        } else {
            nf.derivative(t, x, kappa * m) * m
        }
    });
    Ok(w * sum)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HoelderReport {
    /// `|Σ w ξ·η|`.
    pub pairing: f64,
    pub norm_m: f64,
    pub norm_m_conjugate: f64,
    /// Constant under test.
    pub constant: f64,
    /// Smallest constant that would make the inequality hold.
    pub empirical_constant: f64,
    pub passed: bool,
}

/// Checks `|Σ w ξ·η| ≤ 2 ‖ξ‖_M ‖η‖_{M*}`.
pub fn hoelder_check(nf: &NFunction, xi: &GridField, eta: &GridField) -> Result<HoelderReport> {
    check_domain(nf, xi)?;
    same_grid(xi, eta)?;
    let pairing = xi.pairing(eta)?.abs();
    let norm_m = luxembourg_unchecked(nf, xi)?;
    let norm_m_conjugate = luxembourg_unchecked(&nf.conjugate(), eta)?;
    let denom = norm_m * norm_m_conjugate;
    let empirical_constant = if denom > 0.0 { pairing / denom } else { 0.0 };
    Ok(HoelderReport {
        pairing,
        norm_m,
        norm_m_conjugate,
        constant: 2.0,
        empirical_constant,
        passed: pairing <= 2.0 * denom * (1.0 + 1e-12) + 1e-300,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceOptions {
    /// The final residual must not exceed this.
    pub tol: f64,
    /// Ladder exponents: `λ = 2^k` for `k` in `k_min..=k_max`.
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions {
            tol: 1e-3,
            k_min: 0,
            k_max: 40,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModularConvergence {
    /// First admissible `λ` of the ladder, if any.
    pub lambda: Option<f64>,
    /// `ρ_M((z_j − z)/λ)` at the reported `λ` (at `λ = 2^{k_max}` when none works).
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Residuals `ρ_M((z_j − z)/λ)` along a sequence.
pub fn modular_residuals(nf: &NFunction, sequence: &[GridField], limit: &GridField, lambda: f64) -> Result<Vec<f64>> {
    check_domain(nf, limit)?;
    sequence
        .iter()
        .map(|z| {
            let diff = z.sub(limit)?;
            Ok(scaled_modular(nf, &diff, lambda).value)
        })
        .collect()
}

fn tail_nonincreasing(r: &[f64]) -> bool {
    r[r.len() / 2..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300)
}

/// Scans the ladder `λ = 2^k` upward and returns the first `λ` for which the
/// residuals are nonincreasing over the second half of the sequence and end
/// below `tol`.
pub fn modular_convergence(
    nf: &NFunction,
    sequence: &[GridField],
    limit: &GridField,
    options: ConvergenceOptions,
) -> Result<ModularConvergence> {
    if sequence.is_empty() {
        return Err(Error::Parameter("empty sequence".into()));
    }
    let mut last = Vec::new();
    for k in options.k_min..=options.k_max {
        let lambda = 2f64.powi(k);
        let r = modular_residuals(nf, sequence, limit, lambda)?;
        let ok = r.iter().all(|v| v.is_finite()) && tail_nonincreasing(&r) && *r.last().unwrap() <= options.tol;
        if ok {
            return Ok(ModularConvergence {
                lambda: Some(lambda),
                residuals: r,
                converged: true,
            });
        }
        last = r;
    }
    Ok(ModularConvergence {
        lambda: None,
        residuals: last,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UiOptions {
    /// Thresholds `R = 2^0, ..., 2^max_log2`.
    pub max_log2: u32,
    pub tol: f64,
}

impl Default for UiOptions {
    fn default() -> Self {
        UiOptions { max_log2: 12, tol: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UiReport {
    pub thresholds: Vec<f64>,
    /// `sup_j Σ_{M(λ|z_j|) ≥ R} w·M(λ|z_j|)`.
    pub modular_tails: Vec<f64>,
    /// `sup_j Σ_{λ|z_j| ≥ R} w·λ|z_j|`.
    pub l1_tails: Vec<f64>,
    /// Verdict for the family `{M(λ|z_j|)}`.
    pub uniformly_integrable: bool,
    /// Verdict for the family `{λ|z_j|}` in `L¹`.
    pub l1_uniformly_integrable: bool,
}

/// Tail sums of `M(λ|z_j|)` and of `λ|z_j|` over a ladder of thresholds.
pub fn uniform_integrability(nf: &NFunction, sequence: &[GridField], lambda: f64, options: UiOptions) -> Result<UiReport> {
    if let Some(z) = sequence.first() {
        check_domain(nf, z)?;
    }
    let thresholds: Vec<f64> = (0..=options.max_log2).map(|k| 2f64.powi(k as i32)).collect();
    let mut modular_tails = vec![0.0_f64; thresholds.len()];
    let mut l1_tails = vec![0.0_f64; thresholds.len()];
    for z in sequence {
        let grid = z.grid();
        let w = grid.weight();
        let mut mvals = Vec::with_capacity(z.len());
        let mut x = [0.0; 2];
        for c in 0..z.len() {
            let sc = grid.space_cells();
            let t = grid.time_center(c / sc);
            grid.space_center_into(c % sc, &mut x);
            let a = lambda * z.magnitude(c);
            mvals.push((nf.value(t, &x[..grid.dim()], a), a));
        }
        for (i, &r) in thresholds.iter().enumerate() {
            let mt: f64 = mvals.iter().filter(|(m, _)| *m >= r).map(|(m, _)| w * m).sum();
            let lt: f64 = mvals.iter().filter(|(_, a)| *a >= r).map(|(_, a)| w * a).sum();
            modular_tails[i] = modular_tails[i].max(mt);
            l1_tails[i] = l1_tails[i].max(lt);
        }
    }
    Ok(UiReport {
        uniformly_integrable: *modular_tails.last().unwrap() <= options.tol,
        l1_uniformly_integrable: *l1_tails.last().unwrap() <= options.tol,
        thresholds,
        modular_tails,
        l1_tails,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductReport {
    /// `Σ w |ψ_j·φ_j − ψ·φ|` per index.
    pub distances: Vec<f64>,
    pub psi_convergence: ModularConvergence,
    pub phi_convergence: ModularConvergence,
    pub decays: bool,
}

/// Discrete `L¹` distance between `ψ_j·φ_j` and `ψ·φ`, with the modular
/// convergence of both factors (in `L_M` and `L_{M*}`) checked alongside.
pub fn product_convergence_check(
    nf: &NFunction,
    psi_seq: &[GridField],
    psi: &GridField,
    phi_seq: &[GridField],
    phi: &GridField,
) -> Result<ProductReport> {
    if psi_seq.len() != phi_seq.len() || psi_seq.is_empty() {
        return Err(Error::Parameter("sequences must be nonempty and of equal length".into()));
    }
    same_grid(psi, phi)?;
    let psi_convergence = modular_convergence(nf, psi_seq, psi, ConvergenceOptions::default())?;
    let phi_convergence = modular_convergence(&nf.conjugate(), phi_seq, phi, ConvergenceOptions::default())?;
    let limit = dot(psi, phi);
    let distances = psi_seq
        .iter()
        .zip(phi_seq)
        .map(|(a, b)| {
            same_grid(a, psi)?;
            same_grid(b, phi)?;
            let w = a.grid().weight();
            let prod = dot(a, b);
            Ok(w * prod.iter().zip(&limit).map(|(p, q)| (p - q).abs()).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let first = distances[0];
    let last = *distances.last().unwrap();
    let decays = tail_nonincreasing(&distances) && (last < first || last == 0.0);
    Ok(ProductReport {
        distances,
        psi_convergence,
        phi_convergence,
        decays,
    })
}

fn dot(a: &GridField, b: &GridField) -> Vec<f64> {
    (0..a.len())
        .map(|c| a.cell(c).iter().zip(b.cell(c)).map(|(x, y)| x * y).sum())
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoincareReport {
    /// `‖u‖_M / Σ_j ‖D_j u‖_M`; `+∞` when the gradient vanishes but `u` does not.
    pub ratio: f64,
    pub norm_u: f64,
    pub gradient_norms: [f64; 2],
    pub infinite: bool,
}

/// Spatial partial derivatives of a scalar field by central differences.
///
/// Values beyond the boundary are taken as the odd reflection `−u`, which
/// encodes a zero trace on `∂Ω`.
pub fn central_gradient(u: &GridField) -> Result<Vec<GridField>> {
    if u.components() != 1 {
        return Err(Error::Parameter("central_gradient takes a scalar field".into()));
    }
    let grid = *u.grid();
    let dx = grid.dx();
    let (nx, ny) = (grid.nx, grid.ny);
    let sc = grid.space_cells();
    let v = u.data();
    let mut out = Vec::new();
    for (axis, &h) in dx.iter().enumerate().take(grid.dim()) {
        let mut d = GridField::zeros(grid, 1);
        for it in 0..grid.nt {
            for ix in 0..nx {
                for iy in 0..ny {
                    let at = |jx: isize, jy: isize| -> f64 {
                        let (cx, sx) = reflect(jx, nx);
                        let (cy, sy) = reflect(jy, ny);
                        sx * sy * v[it * sc + cx * ny + cy]
                    };
                    let (ix, iy) = (ix as isize, iy as isize);
                    let val = if axis == 0 {
                        (at(ix + 1, iy) - at(ix - 1, iy)) / (2.0 * h)
                    } else {
                        (at(ix, iy + 1) - at(ix, iy - 1)) / (2.0 * h)
                    };
                    d.data_mut()[it * sc + ix as usize * ny + iy as usize] = val;
                }
            }
        }
        out.push(d);
    }
    Ok(out)
}

fn reflect(i: isize, n: usize) -> (usize, f64) {
    if i < 0 {
        (0, -1.0)
    } else if i as usize >= n {
        (n - 1, -1.0)
    } else {
        (i as usize, 1.0)
    }
}

/// Estimates the Poincaré constant as `‖u‖_M / Σ_j ‖D_j u‖_M`.
pub fn poincare_ratio(nf: &NFunction, u: &GridField) -> Result<PoincareReport> {
    check_domain(nf, u)?;
    let norm_u = luxembourg_unchecked(nf, u)?;
    let mut gradient_norms = [0.0; 2];
    for (j, d) in central_gradient(u)?.iter().enumerate() {
        gradient_norms[j] = luxembourg_unchecked(nf, d)?;
    }
    let total: f64 = gradient_norms.iter().sum();
    let (ratio, infinite) = if norm_u == 0.0 {
        (0.0, false)
    } else if total == 0.0 {
        (f64::INFINITY, true)
    } else {
        (norm_u / total, false)
    };
    Ok(PoincareReport {
        ratio,
        norm_u,
        gradient_norms,
        infinite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SpaceTime;
    use crate::nfunction::ExponentField;
    use std::f64::consts::PI;

    fn square() -> NFunction {
        NFunction::power(ExponentField::constant(2.0).unwrap()).unwrap()
    }

    fn unit_q(n: usize) -> Grid {
        Grid::new(SpaceTime::unit_interval(), n, n, 1).unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = unit_q(16);
        assert_eq!(modular(&square(), &GridField::zeros(g, 1)).unwrap().value, 0.0);
        let r = modular(&square(), &GridField::constant(g, 3.0)).unwrap();
        assert!((r.value - 9.0).abs() < 1e-12);
        let p = ExponentField::from_expr("2 + t", 2.0, 3.0).unwrap();
        let nf = NFunction::power(p).unwrap();
        assert!((modular(&nf, &GridField::constant(g, 1.0)).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modular_checks_domain() {
        let nf = square().with_domain(SpaceTime::unit_square());
        assert!(matches!(modular(&nf, &GridField::zeros(unit_q(4), 1)), Err(Error::Domain(_))));
    }

    #[test]
    fn luxembourg_examples() {
        let g = unit_q(8);
        assert_eq!(luxembourg_norm(&square(), &GridField::zeros(g, 1)).unwrap(), 0.0);
        let n = luxembourg_norm(&square(), &GridField::constant(g, 2.5)).unwrap();
        assert!((n - 2.5).abs() < 1e-12, "{n}");
        let f = GridField::from_fn(g, |t, x| (3.0 * x[0] + t).sin() + 0.2);
        let n1 = luxembourg_norm(&square(), &f).unwrap();
        let n2 = luxembourg_norm(&square(), &f.scaled(2.0)).unwrap();
        assert!((n2 - 2.0 * n1).abs() <= 1e-10 * n2);
    }

    #[test]
    fn orlicz_norm_of_constant_for_square() {
        let g = unit_q(8);
        let c = 1.7;
        let o = orlicz_norm(&square(), &GridField::constant(g, c)).unwrap();
        // Amemiya oracle: inf_k (1 + ρ(k c)) / k over a dense k-scan.
        let amemiya = (1..200000)
            .map(|i| {
                let k = i as f64 * 1e-5;
                (1.0 + k * k * c * c) / k
            })
            .fold(f64::INFINITY, f64::min);
        assert!((o - amemiya).abs() < 1e-6, "{o} vs {amemiya}");
        assert!(o >= c && o <= 2.0 * c + 1e-12);
    }

    #[test]
    fn hoelder_pairing_holds() {
        let g = unit_q(12);
        let xi = GridField::from_fn(g, |t, x| (5.0 * x[0] - t).cos());
        let eta = GridField::from_fn(g, |t, x| x[0] * x[0] - t);
        let r = hoelder_check(&square(), &xi, &eta).unwrap();
        assert!(r.passed && r.empirical_constant <= 2.0);
    }

    #[test]
    fn modular_convergence_examples() {
        let g = unit_q(8);
        let z = GridField::from_fn(g, |t, x| t * x[0]);
        let w = GridField::from_fn(g, |_, x| (PI * x[0]).sin());
        let same = vec![z.clone(); 5];
        let r = modular_convergence(&square(), &same, &z, ConvergenceOptions::default()).unwrap();
        assert_eq!(r.lambda, Some(1.0));
        assert!(r.residuals.iter().all(|&v| v == 0.0));

        let seq: Vec<_> = (1..=40).map(|j| z.add(&w.scaled(1.0 / j as f64)).unwrap()).collect();
        let r = modular_convergence(&square(), &seq, &z, ConvergenceOptions::default()).unwrap();
        assert_eq!(r.lambda, Some(1.0));
        let rho_w = modular(&square(), &w).unwrap().value;
        for (j, res) in r.residuals.iter().enumerate() {
            let expect = rho_w / ((j + 1) as f64).powi(2);
            assert!((res - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn modular_convergence_reports_failure() {
        let g = unit_q(4);
        let z = GridField::zeros(g, 1);
        let seq: Vec<_> = (1..=6).map(|j| GridField::constant(g, j as f64)).collect();
        let r = modular_convergence(&square(), &seq, &z, ConvergenceOptions::default()).unwrap();
        assert!(!r.converged && r.lambda.is_none());
    }

    #[test]
    fn uniform_integrability_separates_levels() {
        let g = Grid::interval(SpaceTime::unit_interval(), 64, 64).unwrap();
        let seq: Vec<_> = (1..=64usize)
            .map(|j| {
                let cells = (4096 / (j * j)).max(1);
                let mut data = vec![0.0; g.len()];
                data[..cells].iter_mut().for_each(|v| *v = j as f64);
                GridField::from_data(g, 1, data).unwrap()
            })
            .collect();
        let r = uniform_integrability(&square(), &seq, 1.0, UiOptions::default()).unwrap();
        assert!(!r.uniformly_integrable);
        assert!(r.l1_uniformly_integrable);
        assert!(*r.modular_tails.last().unwrap() >= 0.9);

        let bounded: Vec<_> = (1..5).map(|j| GridField::constant(g, 1.0 + 1.0 / j as f64)).collect();
        let r = uniform_integrability(&square(), &bounded, 1.0, UiOptions::default()).unwrap();
        assert!(r.uniformly_integrable && r.l1_uniformly_integrable);
        assert_eq!(*r.modular_tails.last().unwrap(), 0.0);
    }

    #[test]
    fn product_convergence_examples() {
        let g = unit_q(8);
        let psi = GridField::from_fn(g, |t, x| t + x[0]);
        let phi = GridField::from_fn(g, |_, x| x[0].cos());
        let r = product_convergence_check(&square(), &vec![psi.clone(); 3], &psi, &vec![phi.clone(); 3], &phi).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0) && r.decays);

        let e1 = GridField::constant(g, 1.0);
        let psis: Vec<_> = (1..=20).map(|j| psi.add(&e1.scaled(1.0 / j as f64)).unwrap()).collect();
        let r = product_convergence_check(&square(), &psis, &psi, &vec![phi.clone(); 20], &phi).unwrap();
        let c = phi.l1_norm();
        for (j, d) in r.distances.iter().enumerate() {
            assert!(*d <= c / (j + 1) as f64 * (1.0 + 1e-12));
        }
        assert!(r.decays && r.psi_convergence.converged && r.phi_convergence.converged);
    }

    #[test]
    fn poincare_examples() {
        let g = Grid::interval(SpaceTime::unit_interval(), 2, 400).unwrap();
        let u = GridField::from_fn(g, |_, x| (PI * x[0]).sin());
        let r = poincare_ratio(&square(), &u).unwrap();
        assert!((r.ratio - 1.0 / PI).abs() < 1e-4, "{}", r.ratio);
        assert_eq!(poincare_ratio(&square(), &GridField::zeros(g, 1)).unwrap().ratio, 0.0);

        let g = Grid::new(SpaceTime::unit_square(), 1, 200, 200).unwrap();
        let u = GridField::from_fn(g, |_, x| (PI * x[0]).sin() * (PI * x[1]).sin());
        let r = poincare_ratio(&square(), &u).unwrap();
        assert!((r.ratio - 1.0 / (2.0 * PI)).abs() < 1e-4, "{}", r.ratio);
    }
}
