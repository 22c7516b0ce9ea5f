//! JSON experiment configuration for the command-line runner.
//!
//! The file is validated in two passes: first the required keys of the
//! requested subcommand are looked up on the raw JSON value so that every
//! missing key is reported at once, then the value is deserialized with the
//! full path of any offending key in the error.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::boundary_map::MapDomain;
use crate::domain::{Grid, Omega, SpaceTime};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::graph::MonotoneGraph;
use crate::mollify::Extension;
use crate::nfunction::{ExponentField, NFunction};

/// Subcommands of the runner, in the order they appear in `--help`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    CheckNfunction,
    Norms,
    Boundary,
    Mollify,
    Graph,
    Solve,
    Sweep,
}

impl Subcommand {
    /// Top-level keys the subcommand cannot run without.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            Subcommand::CheckNfunction => &["nfunction"],
            Subcommand::Norms => &["domain", "nfunction", "norms"],
            Subcommand::Boundary => &["boundary"],
            Subcommand::Mollify => &["domain", "nfunction", "mollifier"],
            Subcommand::Graph => &["graph"],
            Subcommand::Solve | Subcommand::Sweep => &["domain", "graph", "solver"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CheckNfunction => "check-nfunction",
            Subcommand::Norms => "norms",
            Subcommand::Boundary => "boundary",
            Subcommand::Mollify => "mollify",
            Subcommand::Graph => "graph",
            Subcommand::Solve => "solve",
            Subcommand::Sweep => "sweep",
        }
    }
}

/// Exponent `p(t,x)`: a number or an expression with explicit bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentParams {
    Constant(f64),
    Expr { expr: String, bounds: [f64; 2] },
}

impl ExponentParams {
    pub fn build(&self) -> Result<ExponentField> {
        match self {
            ExponentParams::Constant(p) => ExponentField::constant(*p),
            ExponentParams::Expr { expr, bounds } => ExponentField::from_expr(expr, bounds[0], bounds[1]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NFunctionParams {
    /// `a^p`.
    Power { p: ExponentParams },
    /// `a^p / p`.
    PowerNormalized { p: ExponentParams },
    ExpPower { p: ExponentParams },
    PowerLog { p: ExponentParams },
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl NFunctionParams {
    pub fn build(&self) -> Result<NFunction> {
        match self {
            NFunctionParams::Power { p } => NFunction::power(p.build()?),
            NFunctionParams::PowerNormalized { p } => NFunction::power_normalized(p.build()?),
            NFunctionParams::ExpPower { p } => Ok(NFunction::exp_power(p.build()?)),
            NFunctionParams::PowerLog { p } => Ok(NFunction::power_log(p.build()?)),
            NFunctionParams::Tabulated { nodes, values } => NFunction::tabulated(nodes.clone(), values.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphParams {
    /// `Ã(ξ) = slope·ξ` with the given N-function.
    Linear { slope: f64, nfunction: NFunctionParams },
    /// `Ã(ξ) = |ξ|^{p−2}ξ`, `M = a^p/p`.
    #[serde(alias = "potential_power")]
    Power { p: ExponentParams },
    /// Exponential jump graph with its glued potential as `M`.
    Jump { p: ExponentParams },
    /// Radial table with repeated radii for jumps.
    #[serde(alias = "custom_table")]
    Table { r: Vec<f64>, a: Vec<f64>, nfunction: NFunctionParams },
}

impl GraphParams {
    pub fn build(&self) -> Result<MonotoneGraph> {
        match self {
            GraphParams::Linear { slope, nfunction } => MonotoneGraph::linear(*slope, nfunction.build()?),
            GraphParams::Power { p } => MonotoneGraph::potential_power(p.build()?),
            GraphParams::Jump { p } => MonotoneGraph::jump(p.build()?),
            GraphParams::Table { r, a, nfunction } => MonotoneGraph::from_table(r.clone(), a.clone(), nfunction.build()?),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    pub t_len: f64,
    pub omega: Omega,
    pub nt: usize,
    pub nx: usize,
    #[serde(default)]
    pub ny: Option<usize>,
}

impl DomainParams {
    pub fn grid(&self) -> Result<Grid> {
        let ny = match self.omega {
            Omega::Interval { .. } => 1,
            Omega::Rectangle { .. } => self.ny.unwrap_or(self.nx),
        };
        Grid::new(SpaceTime::new(self.t_len, self.omega)?, self.nt, self.nx, ny)
    }
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_charts() -> usize {
    8
}

fn default_map_samples() -> usize {
    4000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryParams {
    pub domain: MapDomain,
    /// Strictly decreasing `δ` ladder.
    pub deltas: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub collar: Option<f64>,
    #[serde(default = "default_charts")]
    pub charts: usize,
    #[serde(default = "default_map_samples")]
    pub samples: usize,
}

fn default_pairs() -> usize {
    100
}

fn default_amplitude() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsParams {
    /// Number of random field pairs.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Random cell values are drawn from `[−amplitude, amplitude]`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierParams {
    /// Strictly decreasing `δ` ladder.
    pub deltas: Vec<f64>,
    /// Scalar test fields for the uniform modular bound.
    #[serde(default)]
    pub fields: Vec<String>,
    /// Zero-trace `u` and its gradient for the approximation sequence.
    #[serde(default)]
    pub u: Option<String>,
    #[serde(default)]
    pub grad_u: Option<Vec<String>>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub extension: Extension,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Allowed change of the measured constant under ladder extension.
    #[serde(default = "default_extension_tol")]
    pub extension_tolerance: f64,
}

fn default_extension_tol() -> f64 {
    0.05
}

fn default_zero() -> String {
    "0".into()
}

fn default_eps_ladder() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_n_ladder() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_t_end() -> f64 {
    0.1
}

fn default_dt() -> f64 {
    1e-3
}

fn default_time_samples() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    pub u0: String,
    #[serde(default = "default_zero")]
    pub f: String,
    /// Closed-form solution `u(t,x)` for an L² error at the final time.
    #[serde(default)]
    pub exact: Option<String>,
    #[serde(default = "default_eps_ladder")]
    pub eps: Vec<f64>,
    #[serde(default = "default_n_ladder")]
    pub n: Vec<usize>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Run the inclusion diagnostics over the `ε` ladder.
    #[serde(default)]
    pub minty: bool,
    #[serde(default = "default_time_samples")]
    pub time_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphCheckParams {
    /// Largest `|ξ|` sampled.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_mollify_eps")]
    pub eps: f64,
}

fn default_radius() -> f64 {
    4.0
}

fn default_mollify_eps() -> f64 {
    0.1
}

impl Default for GraphCheckParams {
    fn default() -> Self {
        GraphCheckParams {
            radius: default_radius(),
            eps: default_mollify_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NFunctionCheckParams {
    /// Log-Hölder constant to test, if any.
    #[serde(default)]
    pub log_holder: Option<f64>,
    /// Largest `a` sampled.
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_sample_count")]
    pub samples: usize,
}

fn default_a_max() -> f64 {
    10.0
}

fn default_sample_count() -> usize {
    64
}

impl Default for NFunctionCheckParams {
    fn default() -> Self {
        NFunctionCheckParams {
            log_holder: None,
            a_max: default_a_max(),
            samples: default_sample_count(),
        }
    }
}

/// One experiment. Sections not needed by a subcommand may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub domain: Option<DomainParams>,
    #[serde(default)]
    pub nfunction: Option<NFunctionParams>,
    #[serde(default)]
    pub nfunction_check: Option<NFunctionCheckParams>,
    #[serde(default)]
    pub graph: Option<GraphParams>,
    #[serde(default)]
    pub graph_check: Option<GraphCheckParams>,
    #[serde(default)]
    pub boundary: Option<BoundaryParams>,
    #[serde(default)]
    pub norms: Option<NormsParams>,
    #[serde(default)]
    pub mollifier: Option<MollifierParams>,
    #[serde(default)]
    pub solver: Option<SolverParams>,
}

/// Parsed configuration plus the hash of its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Hex SHA-256 of the raw file contents.
    pub hash: String,
}

fn require<'a, T>(section: &'a Option<T>, key: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| Error::Config {
        path: key.into(),
        message: "missing required key".into(),
    })
}

impl ExperimentConfig {
    pub fn domain(&self) -> Result<&DomainParams> {
        require(&self.domain, "domain")
    }

    pub fn nfunction(&self) -> Result<&NFunctionParams> {
        require(&self.nfunction, "nfunction")
    }

    pub fn graph(&self) -> Result<&GraphParams> {
        require(&self.graph, "graph")
    }

    pub fn boundary(&self) -> Result<&BoundaryParams> {
        require(&self.boundary, "boundary")
    }

    pub fn norms(&self) -> Result<&NormsParams> {
        require(&self.norms, "norms")
    }

    pub fn mollifier(&self) -> Result<&MollifierParams> {
        require(&self.mollifier, "mollifier")
    }

    pub fn solver(&self) -> Result<&SolverParams> {
        require(&self.solver, "solver")
    }

    /// Cross-field checks that serde cannot express.
    fn check_ladders(&self) -> Result<()> {
        let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        if let Some(b) = &self.boundary {
            if b.deltas.is_empty() || !decreasing(&b.deltas) {
                return Err(ladder_error("boundary.deltas", "must be non-empty and strictly decreasing"));
            }
        }
        if let Some(m) = &self.mollifier {
            if m.deltas.is_empty() || !decreasing(&m.deltas) {
                return Err(ladder_error("mollifier.deltas", "must be non-empty and strictly decreasing"));
            }
            if m.u.is_some() != m.grad_u.is_some() {
                return Err(ladder_error("mollifier.grad_u", "`u` and `grad_u` must be given together"));
            }
        }
        if let Some(s) = &self.solver {
            if s.eps.is_empty() || !decreasing(&s.eps) {
                return Err(ladder_error("solver.eps", "must be non-empty and strictly decreasing"));
            }
            if s.n.is_empty() || s.n.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ladder_error("solver.n", "must be non-empty and strictly increasing"));
            }
        }
        Ok(())
    }
}

fn ladder_error(path: &str, message: &str) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a config for `command`.
pub fn parse(text: &str, command: Subcommand) -> Result<LoadedConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
        path: "<root>".into(),
        message: format!("invalid JSON: {e}"),
    })?;
    let Value::Object(map) = &value else {
        return Err(Error::Config {
            path: "<root>".into(),
            message: "config must be a JSON object".into(),
        });
    };
    let missing: Vec<&str> = command.required_keys().iter().copied().filter(|k| !map.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Config {
            path: "<root>".into(),
            message: format!("missing required keys for `{}`: {}", command.name(), missing.join(", ")),
        });
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.check_ladders()?;
    let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    Ok(LoadedConfig { config, hash })
}

/// Parses a list of expressions, reporting the offending config path.
pub fn parse_exprs(path: &str, sources: &[String]) -> Result<Vec<ScalarExpr>> {
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            ScalarExpr::parse(s).map_err(|e| Error::Config {
                path: format!("{path}[{i}]"),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_expr(path: &str, source: &str) -> Result<ScalarExpr> {
    ScalarExpr::parse(source).map_err(|e| Error::Config {
        path: path.into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_all_missing_keys() {
        let err = parse("{}", Subcommand::Solve).unwrap_err().to_string();
        for key in ["domain", "graph", "solver"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn bad_value_reports_its_path() {
        let text = r#"{"nfunction": {"kind": "power", "p": {"expr": "2", "bounds": [2]}}}"#;
        let err = parse(text, Subcommand::CheckNfunction).unwrap_err();
        let Error::Config { path, .. } = err else { panic!("{err:?}") };
        assert!(path.starts_with("nfunction"), "{path}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"nfunction": {"kind": "power", "p": 2}, "bogus": 1}"#;
        assert!(parse(text, Subcommand::CheckNfunction).is_err());
    }

    #[test]
    fn ladders_must_be_ordered() {
        let text = r#"{"boundary": {"domain": {"kind": "interval", "length": 1}, "deltas": [0.1, 0.2]}}"#;
        let err = parse(text, Subcommand::Boundary).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "boundary.deltas"));
    }

    #[test]
    fn hash_is_stable() {
        let text = r#"{"nfunction": {"kind": "power_normalized", "p": 3}}"#;
        let a = parse(text, Subcommand::CheckNfunction).unwrap();
        let b = parse(text, Subcommand::CheckNfunction).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.hash.len(), 64);
        a.config.nfunction().unwrap().build().unwrap();
    }
}
