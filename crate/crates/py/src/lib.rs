//! Python bindings: `import musielak`.
//!
//! Reports come back as plain dicts; space-time points are `(t, [x, ...])`.

use std::sync::Arc;

use musielak::boundary_map::{BoundaryMap as CoreMap, MapDomain, MapOptions};
use musielak::domain::{Grid as CoreGrid, Omega, SpaceTime};
use musielak::expr::ScalarExpr;
use musielak::field::GridField as CoreField;
use musielak::graph::{self, LipschitzRep, MonotoneGraph as CoreGraph, Selection};
use musielak::modular;
use musielak::nfunction::{ExponentField as CoreExponent, NFunction as CoreNFunction};
use musielak::solver::{energy_report, Forcing, Problem, SolveOptions};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(musielak, MusielakError, PyException);

fn err(e: musielak::Error) -> PyErr {
    MusielakError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| MusielakError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn expr(src: &str) -> PyResult<ScalarExpr> {
    ScalarExpr::parse(src).map_err(err)
}

fn omega(kind: &str, lx: f64, ly: Option<f64>) -> PyResult<Omega> {
    match kind {
        "interval" => Ok(Omega::Interval { length: lx }),
        "rectangle" => Ok(Omega::Rectangle { lx, ly: ly.unwrap_or(lx) }),
        other => Err(MusielakError::new_err(format!("unknown domain kind `{other}`"))),
    }
}

/// Variable exponent `p(t, x)` with declared bounds.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct ExponentField {
    inner: CoreExponent,
}

#[pymethods]
impl ExponentField {
    #[staticmethod]
    fn constant(p: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreExponent::constant(p).map_err(err)?,
        })
    }

    /// Expression in `t`, `x`, `y`, e.g. `"2 + t*x"`.
    #[staticmethod]
    fn from_expr(source: &str, p_minus: f64, p_plus: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreExponent::from_expr(source, p_minus, p_plus).map_err(err)?,
        })
    }

    fn __call__(&self, t: f64, x: Vec<f64>) -> f64 {
        self.inner.eval(t, &x)
    }

    fn bounds(&self) -> (f64, f64) {
        self.inner.bounds()
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct NFunction {
    inner: CoreNFunction,
}

#[pymethods]
impl NFunction {
    /// `M = a^p`.
    #[staticmethod]
    fn power(p: ExponentField) -> PyResult<Self> {
        Ok(Self {
            inner: CoreNFunction::power(p.inner).map_err(err)?,
        })
    }

    /// `M = a^p / p`.
    #[staticmethod]
    fn power_normalized(p: ExponentField) -> PyResult<Self> {
        Ok(Self {
            inner: CoreNFunction::power_normalized(p.inner).map_err(err)?,
        })
    }

    /// `M = exp(a^p) − 1`.
    #[staticmethod]
    fn exp_power(p: ExponentField) -> Self {
        Self {
            inner: CoreNFunction::exp_power(p.inner),
        }
    }

    /// `M = a^p ln(1 + a)`.
    #[staticmethod]
    fn power_log(p: ExponentField) -> Self {
        Self {
            inner: CoreNFunction::power_log(p.inner),
        }
    }

    #[staticmethod]
    fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreNFunction::tabulated(nodes, values).map_err(err)?,
        })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    fn value(&self, t: f64, x: Vec<f64>, a: f64) -> PyResult<f64> {
        self.inner.eval(t, &x, a).map_err(err)
    }

    fn derivative(&self, t: f64, x: Vec<f64>, a: f64) -> f64 {
        self.inner.derivative(t, &x, a)
    }

    fn conjugate_value(&self, t: f64, x: Vec<f64>, b: f64) -> PyResult<f64> {
        self.inner.conjugate_eval(t, &x, b).map_err(err)
    }

    fn check_axioms<'py>(&self, py: Python<'py>, points: Vec<(f64, Vec<f64>)>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.check_axioms(&points))
    }

    /// Samples are `(t, [x...], a)`.
    fn biconjugate_residual<'py>(&self, py: Python<'py>, samples: Vec<(f64, Vec<f64>, f64)>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.biconjugate_residual(&samples).map_err(err)?)
    }

    fn check_delta2<'py>(&self, py: Python<'py>, samples: Vec<(f64, Vec<f64>, f64)>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.check_delta2(&samples))
    }
}

/// Midpoint grid on `(0, t_len) × Ω`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Grid {
    inner: CoreGrid,
}

#[pymethods]
impl Grid {
    #[new]
    #[pyo3(signature = (t_len, kind, nt, nx, lx = 1.0, ly = None, ny = None))]
    fn new(t_len: f64, kind: &str, nt: usize, nx: usize, lx: f64, ly: Option<f64>, ny: Option<usize>) -> PyResult<Self> {
        let om = omega(kind, lx, ly)?;
        let ny = if om.dim() == 2 { ny.unwrap_or(nx) } else { 1 };
        let st = SpaceTime::new(t_len, om).map_err(err)?;
        Ok(Self {
            inner: CoreGrid::new(st, nt, nx, ny).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(t, [x...])` for every cell in storage order.
    fn centers(&self) -> Vec<(f64, Vec<f64>)> {
        (0..self.inner.len()).map(|c| self.inner.center(c)).collect()
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct GridField {
    inner: CoreField,
}

#[pymethods]
impl GridField {
    #[staticmethod]
    #[pyo3(signature = (grid, values, components = 1))]
    fn from_values(grid: &Grid, values: Vec<f64>, components: usize) -> PyResult<Self> {
        Ok(Self {
            inner: CoreField::from_data(grid.inner, components, values).map_err(err)?,
        })
    }

    /// Scalar field from an expression in `t`, `x`, `y`.
    #[staticmethod]
    fn from_expr(grid: &Grid, source: &str) -> PyResult<Self> {
        let e = expr(source)?;
        Ok(Self {
            inner: CoreField::from_fn(grid.inner, |t, x| e.eval(t, x)),
        })
    }

    fn values(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn scaled(&self, alpha: f64) -> Self {
        Self {
            inner: self.inner.scaled(alpha),
        }
    }

    fn __add__(&self, other: &GridField) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.add(&other.inner).map_err(err)?,
        })
    }

    fn pairing(&self, other: &GridField) -> PyResult<f64> {
        self.inner.pairing(&other.inner).map_err(err)
    }
}

fn bind(nf: &NFunction, field: &GridField) -> CoreNFunction {
    nf.inner.clone().with_domain(field.inner.grid().domain)
}

/// `ρ_M(field)`.
#[pyfunction]
fn modular_value(nf: &NFunction, field: &GridField) -> PyResult<f64> {
    Ok(modular::modular(&bind(nf, field), &field.inner).map_err(err)?.value)
}

#[pyfunction]
fn luxembourg_norm(nf: &NFunction, field: &GridField) -> PyResult<f64> {
    modular::luxembourg_norm(&bind(nf, field), &field.inner).map_err(err)
}

#[pyfunction]
fn orlicz_norm(nf: &NFunction, field: &GridField) -> PyResult<f64> {
    modular::orlicz_norm(&bind(nf, field), &field.inner).map_err(err)
}

#[pyfunction]
fn hoelder_check<'py>(py: Python<'py>, nf: &NFunction, xi: &GridField, eta: &GridField) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &modular::hoelder_check(&bind(nf, xi), &xi.inner, &eta.inner).map_err(err)?)
}

#[pyclass(frozen)]
struct BoundaryMap {
    inner: CoreMap,
}

#[pymethods]
impl BoundaryMap {
    /// `kind` is `interval`, `rectangle` or `disk`; `size` the length or radius.
    #[new]
    #[pyo3(signature = (kind, size, delta, epsilon = 0.5, size_y = None, collar = None))]
    fn new(kind: &str, size: f64, delta: f64, epsilon: f64, size_y: Option<f64>, collar: Option<f64>) -> PyResult<Self> {
        let domain = match kind {
            "interval" => MapDomain::Interval { length: size },
            "rectangle" => MapDomain::Rectangle {
                lx: size,
                ly: size_y.unwrap_or(size),
            },
            "disk" => MapDomain::Disk { radius: size },
            other => return Err(MusielakError::new_err(format!("unknown domain kind `{other}`"))),
        };
        let options = MapOptions {
            collar,
            ..MapOptions::default()
        };
        Ok(Self {
            inner: CoreMap::build_with(domain, delta, epsilon, options).map_err(err)?,
        })
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.apply(&x).map_err(err)
    }

    #[pyo3(signature = (samples = 4000))]
    fn verify<'py>(&self, py: Python<'py>, samples: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.verify(samples).map_err(err)?)
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct MonotoneGraph {
    inner: CoreGraph,
}

#[pymethods]
impl MonotoneGraph {
    /// `Ã(ξ) = slope·ξ` paired with the N-function `nf`.
    #[staticmethod]
    fn linear(slope: f64, nf: NFunction) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGraph::linear(slope, nf.inner).map_err(err)?,
        })
    }

    /// `Ã(ξ) = |ξ|^{p−2}ξ`.
    #[staticmethod]
    fn potential_power(p: ExponentField) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGraph::potential_power(p.inner).map_err(err)?,
        })
    }

    /// Graph with a vertical segment at `|ξ| = 1`.
    #[staticmethod]
    fn jump(p: ExponentField) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGraph::jump(p.inner).map_err(err)?,
        })
    }

    /// Radial table; a repeated radius is a jump.
    #[staticmethod]
    fn from_table(r: Vec<f64>, a: Vec<f64>, nf: NFunction) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGraph::from_table(r, a, nf.inner).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    fn jump_radii(&self) -> Vec<f64> {
        self.inner.jump_radii()
    }

    fn select(&self, t: f64, x: Vec<f64>, xi: Vec<f64>) -> Vec<f64> {
        self.inner.select(t, &x, &xi)
    }

    /// Mollified selection `A^ε(t, x, ξ)`.
    fn mollified(&self, eps: f64, t: f64, x: Vec<f64>, xi: Vec<f64>) -> PyResult<Vec<f64>> {
        let m = self.inner.mollified(eps).map_err(err)?;
        let mut out = vec![0.0; xi.len()];
        m.flux(t, &x, &xi, &mut out);
        Ok(out)
    }

    /// Coercivity certificate `(c_*, k)` on the sample points.
    #[pyo3(signature = (points, xis, weight = 1.0))]
    fn certificate<'py>(&self, py: Python<'py>, points: Vec<(f64, Vec<f64>)>, xis: Vec<Vec<f64>>, weight: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &graph::check_axioms(&self.inner, self.inner.nfunction(), &points, &xis, weight))
    }

    fn maximality_residual(&self, t: f64, x: Vec<f64>, xi0: Vec<f64>, a0: Vec<f64>, probes: Vec<Vec<f64>>) -> f64 {
        graph::maximality_residual(&self.inner, t, &x, &xi0, &a0, &probes)
    }

    /// `(sigma, phi, lipschitz)` of the 1-Lipschitz representation.
    fn lipschitz(&self, t: f64, x: Vec<f64>, r_max: f64, n: usize) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
        let rep = LipschitzRep::build(&self.inner, t, &x, r_max, n).map_err(err)?;
        Ok((rep.sigma.clone(), rep.phi.clone(), rep.lipschitz))
    }
}

/// Galerkin run on an interval or rectangle.
#[pyclass(frozen)]
struct Trajectory {
    inner: musielak::solver::GalerkinTrajectory,
    certificate: musielak::graph::GraphCertificate,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    #[getter]
    fn coefficients(&self) -> Vec<Vec<f64>> {
        self.inner.coefficients.clone()
    }

    /// `‖u(T) − exact(x)‖₂` with `exact` an expression in `x`, `y`.
    fn l2_error_final(&self, exact: &str) -> PyResult<f64> {
        let e = expr(exact)?;
        let t = *self.inner.times.last().unwrap_or(&0.0);
        Ok(self.inner.l2_error_final(|x| e.eval(t, x)))
    }

    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &energy_report(&self.inner, &self.certificate))
    }
}

#[pyfunction]
#[pyo3(signature = (graph, u0, eps, n, f = "0", kind = "interval", nx = 64, t_end = 0.1, dt = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    graph: &MonotoneGraph,
    u0: &str,
    eps: f64,
    n: usize,
    f: &str,
    kind: &str,
    nx: usize,
    t_end: f64,
    dt: f64,
) -> PyResult<Trajectory> {
    let u0 = expr(u0)?;
    let forcing = if f.trim() == "0" {
        Forcing::Zero
    } else {
        let fe = expr(f)?;
        Forcing::Function(Arc::new(move |t, x| fe.eval(t, x)))
    };
    let options = SolveOptions {
        t_end,
        dt,
        ..SolveOptions::default()
    };
    let problem = Problem::new(graph.inner.clone(), forcing, move |x| u0.eval(0.0, x), omega(kind, 1.0, None)?, nx, options);
    py.detach(|| {
        let inner = problem.solve(eps, n)?;
        Ok(Trajectory {
            inner,
            certificate: problem.certificate(),
        })
    })
    .map_err(err)
}

/// Runs the command-line interface in-process; returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv = std::iter::once("musielak".to_string()).chain(args);
    py.detach(|| musielak::cli::main_with_args(argv))
}

#[pymodule]
#[pyo3(name = "musielak")]
fn musielak_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MusielakError", m.py().get_type::<MusielakError>())?;
    m.add_class::<ExponentField>()?;
    m.add_class::<NFunction>()?;
    m.add_class::<Grid>()?;
    m.add_class::<GridField>()?;
    m.add_class::<BoundaryMap>()?;
    m.add_class::<MonotoneGraph>()?;
    m.add_class::<Trajectory>()?;
    m.add_function(wrap_pyfunction!(modular_value, m)?)?;
    m.add_function(wrap_pyfunction!(luxembourg_norm, m)?)?;
    m.add_function(wrap_pyfunction!(orlicz_norm, m)?)?;
    m.add_function(wrap_pyfunction!(hoelder_check, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
