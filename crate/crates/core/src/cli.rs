//! Config-driven experiment runner behind the `musielak` binary.
//!
//! Every subcommand writes `report.json` and CSV artifacts into `--out`.
//! The report embeds the config hash and the tolerances used.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::boundary_map::{BoundaryMap, MapOptions};
use crate::config::{self, ExperimentConfig, LoadedConfig, Subcommand};
use crate::domain::Omega;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, GridField};
use crate::graph::{check_axioms, maximality_residual, probe_ladder, LipschitzRep, Selection};
use crate::modular::{self, ConvergenceOptions};
use crate::mollify::{self, MapOptionsSer, MollifyOptions};
use crate::solver::{self, energy_report, minty_check, Forcing, MintyOptions, Problem, SolveOptions};

#[derive(Debug, Parser)]
#[command(name = "musielak", version, about = "Musielak-Orlicz modulars, monotone graphs and Galerkin runs from a JSON config")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Strict,
    Default,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed for sample-based checks; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ToleranceProfile::Default)]
    pub tolerance_profile: ToleranceProfile,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Structural checks of an N-function and its conjugate.
    CheckNfunction(CommonArgs),
    /// Norm and pairing checks on random fields.
    Norms(CommonArgs),
    /// Build and verify the boundary-shift map along a δ ladder.
    Boundary(CommonArgs),
    /// Uniform modular bound and approximation sequence of the smoother.
    Mollify(CommonArgs),
    /// Graph axioms and the Lipschitz representation.
    Graph(CommonArgs),
    /// One Galerkin run with energy report and optional inclusion diagnostics.
    Solve(CommonArgs),
    /// Galerkin runs over the ε × n ladders.
    Sweep(CommonArgs),
}

impl Command {
    fn split(&self) -> (Subcommand, &CommonArgs) {
        match self {
            Command::CheckNfunction(a) => (Subcommand::CheckNfunction, a),
            Command::Norms(a) => (Subcommand::Norms, a),
            Command::Boundary(a) => (Subcommand::Boundary, a),
            Command::Mollify(a) => (Subcommand::Mollify, a),
            Command::Graph(a) => (Subcommand::Graph, a),
            Command::Solve(a) => (Subcommand::Solve, a),
            Command::Sweep(a) => (Subcommand::Sweep, a),
        }
    }
}

/// Thresholds used by the checks; embedded in every report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub biconjugate: f64,
    pub norm_homogeneity: f64,
    pub energy_identity: f64,
    pub l2_error: f64,
    pub modular_convergence: f64,
    pub roundtrip: f64,
    pub residual_floor: f64,
    pub violation_fraction: f64,
}

impl Tolerances {
    pub fn for_profile(profile: ToleranceProfile) -> Self {
        match profile {
            ToleranceProfile::Default => Tolerances {
                biconjugate: 1e-6,
                norm_homogeneity: 1e-8,
                energy_identity: 1e-8,
                l2_error: 1e-6,
                modular_convergence: 1e-4,
                roundtrip: 1e-8,
                residual_floor: 1e-6,
                violation_fraction: 0.01,
            },
            ToleranceProfile::Strict => Tolerances {
                biconjugate: 1e-8,
                norm_homogeneity: 1e-10,
                energy_identity: 1e-10,
                l2_error: 1e-7,
                modular_convergence: 1e-5,
                roundtrip: 1e-10,
                residual_floor: 1e-8,
                violation_fraction: 0.005,
            },
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub out_dir: PathBuf,
    pub report: Value,
}

struct Ctx {
    cfg: ExperimentConfig,
    tol: Tolerances,
    rng: ChaCha8Rng,
    out: PathBuf,
    checks: Map<String, Value>,
    results: Map<String, Value>,
}

impl Ctx {
    fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.into(), Value::Bool(ok));
    }

    fn result<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.results.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    fn csv(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn field_csv(&self, name: &str, field: &GridField) -> Result<()> {
        let mut w = self.csv(name)?;
        field.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

const DEFAULT_SEED: u64 = 0x5eed;

/// Runs one subcommand and writes its artifacts.
pub fn run(command: &Command) -> Result<Outcome> {
    let (sub, args) = command.split();
    let text = fs::read_to_string(&args.config).map_err(|e| Error::Config {
        path: args.config.display().to_string(),
        message: format!("cannot read config: {e}"),
    })?;
    let LoadedConfig { config: cfg, hash } = config::parse(&text, sub)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let tol = Tolerances::for_profile(args.tolerance_profile);
    let mut ctx = Ctx {
        cfg,
        tol,
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: out.clone(),
        checks: Map::new(),
        results: Map::new(),
    };
    match sub {
        Subcommand::CheckNfunction => check_nfunction(&mut ctx).map_err(|e| e.in_module("nfunction"))?,
        Subcommand::Norms => norms(&mut ctx).map_err(|e| e.in_module("modular"))?,
        Subcommand::Boundary => boundary(&mut ctx).map_err(|e| e.in_module("boundary_map"))?,
        Subcommand::Mollify => mollify_cmd(&mut ctx).map_err(|e| e.in_module("mollify"))?,
        Subcommand::Graph => graph_cmd(&mut ctx).map_err(|e| e.in_module("graph"))?,
        Subcommand::Solve => solve_cmd(&mut ctx).map_err(|e| e.in_module("solver"))?,
        Subcommand::Sweep => sweep_cmd(&mut ctx).map_err(|e| e.in_module("solver"))?,
    }
    let passed = ctx.checks.values().all(|v| v.as_bool() == Some(true));
    let report = json!({
        "subcommand": sub.name(),
        "config_hash": hash,
        "seed": seed,
        "tolerance_profile": args.tolerance_profile,
        "tolerances": tol,
        "passed": passed,
        "checks": Value::Object(ctx.checks),
        "results": Value::Object(ctx.results),
    });
    let mut w = BufWriter::new(File::create(out.join("report.json"))?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(Outcome {
        passed,
        out_dir: out,
        report,
    })
}

/// `(t, x)` sample points spread over `Q`, or the unit cylinder when no
/// domain is configured.
fn sample_points(cfg: &ExperimentConfig) -> Vec<(f64, Vec<f64>)> {
    let (t_len, omega) = cfg
        .domain
        .as_ref()
        .map_or((1.0, Omega::unit_interval()), |d| (d.t_len, d.omega));
    let ext = omega.extents();
    let mut pts = Vec::new();
    for it in 0..3 {
        let t = (it as f64 + 0.5) * t_len / 3.0;
        for ix in 0..3 {
            let x = (ix as f64 + 0.5) * ext[0] / 3.0;
            if ext.len() == 1 {
                pts.push((t, vec![x]));
            } else {
                pts.push((t, vec![x, 0.5 * ext[1]]));
            }
        }
    }
    pts
}

fn check_nfunction(ctx: &mut Ctx) -> Result<()> {
    let nf = ctx.cfg.nfunction()?.build()?;
    let params = ctx.cfg.nfunction_check.clone().unwrap_or_default();
    let points = sample_points(&ctx.cfg);
    let axioms = nf.check_axioms(&points);
    ctx.check("axioms", axioms.passed);
    ctx.result("axioms", &axioms)?;

    let a_top = params.a_max.min(4.0);
    let samples: Vec<(f64, Vec<f64>, f64)> = (0..params.samples)
        .map(|i| {
            let (t, x) = points[i % points.len()].clone();
            (t, x, a_top * ctx.rng.gen::<f64>())
        })
        .collect();
    let biconj = nf.biconjugate_residual(&samples)?;
    ctx.check("biconjugate", biconj.relative <= ctx.tol.biconjugate);
    ctx.result("biconjugate", &biconj)?;

    let d2_samples: Vec<(f64, Vec<f64>, f64)> = points
        .iter()
        .flat_map(|(t, x)| (1..=32).map(move |k| (*t, x.clone(), params.a_max * k as f64 / 32.0)))
        .collect();
    ctx.result("delta2", &nf.check_delta2(&d2_samples))?;

    if let Some(h) = params.log_holder {
        let pairs: Vec<_> = (0..params.samples)
            .map(|i| {
                let (t, x) = points[i % points.len()].clone();
                let dt = 0.1 * (ctx.rng.gen::<f64>() - 0.5);
                let y: Vec<f64> = x.iter().map(|v| v + 0.1 * (ctx.rng.gen::<f64>() - 0.5)).collect();
                ((t, x), (t + dt, y))
            })
            .collect();
        let a: Vec<f64> = (0..8).map(|k| 2f64.powi(k)).collect();
        let report = nf.check_log_holder(h, &pairs, &a)?;
        ctx.check("log_holder", report.passed);
        ctx.result("log_holder", &json!({"passed": report.passed, "max_violation_ratio": report.max_violation_ratio, "violations": report.violations.len()}))?;
    }

    let (t, x) = points[points.len() / 2].clone();
    let b: Vec<f64> = (0..=64).map(|k| params.a_max * k as f64 / 64.0).collect();
    let table = nf.tabulate_conjugate(t, &x, &b)?;
    let mut w = ctx.csv("conjugate.csv")?;
    writeln!(w, "b,m_star")?;
    for (b, v) in table.b.iter().zip(&table.values) {
        writeln!(w, "{},{}", fmt_f64(*b), fmt_f64(*v))?;
    }
    w.flush()?;
    Ok(())
}

fn random_field(grid: crate::domain::Grid, amplitude: f64, rng: &mut ChaCha8Rng) -> GridField {
    let data = (0..grid.len()).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    GridField::from_data(grid, 1, data).expect("sized to the grid")
}

fn norms(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.cfg.domain()?.grid()?;
    let nf = ctx.cfg.nfunction()?.build()?.with_domain(grid.domain);
    let params = ctx.cfg.norms()?.clone();
    let (mut hoelder_bad, mut homog_err, mut triangle_bad, mut orlicz_bad) = (0usize, 0.0_f64, 0usize, 0usize);
    let mut worst_constant = 0.0_f64;
    let mut first = None;
    for i in 0..params.pairs {
        let xi = random_field(grid, params.amplitude, &mut ctx.rng);
        let eta = random_field(grid, params.amplitude, &mut ctx.rng);
        let h = modular::hoelder_check(&nf, &xi, &eta)?;
        hoelder_bad += usize::from(!h.passed);
        worst_constant = worst_constant.max(h.empirical_constant);
        let n_xi = modular::luxembourg_norm(&nf, &xi)?;
        let n_eta = modular::luxembourg_norm(&nf, &eta)?;
        let scaled = modular::luxembourg_norm(&nf, &xi.scaled(2.5))?;
        homog_err = homog_err.max((scaled - 2.5 * n_xi).abs() / n_xi.max(f64::MIN_POSITIVE));
        let sum = modular::luxembourg_norm(&nf, &xi.add(&eta)?)?;
        triangle_bad += usize::from(sum > (n_xi + n_eta) * (1.0 + 1e-10));
        if i < 5 {
            let o = modular::orlicz_norm(&nf, &xi)?;
            orlicz_bad += usize::from(!(o >= n_xi * (1.0 - 1e-6) && o <= 2.0 * n_xi * (1.0 + 1e-6)));
        }
        if first.is_none() {
            first = Some(xi);
        }
    }
    ctx.check("hoelder", hoelder_bad == 0);
    ctx.check("homogeneity", homog_err <= ctx.tol.norm_homogeneity);
    ctx.check("triangle", triangle_bad == 0);
    ctx.check("orlicz_equivalence", orlicz_bad == 0);
    ctx.result(
        "norms",
        &json!({
            "pairs": params.pairs,
            "hoelder_violations": hoelder_bad,
            "max_empirical_constant": worst_constant,
            "max_homogeneity_error": homog_err,
            "triangle_violations": triangle_bad,
            "orlicz_violations": orlicz_bad,
        }),
    )?;
    if let Some(xi) = first {
        ctx.field_csv("fields_xi.csv", &xi)?;
    }
    Ok(())
}

fn boundary(ctx: &mut Ctx) -> Result<()> {
    let params = ctx.cfg.boundary()?.clone();
    let opts = MapOptions {
        collar: params.collar,
        charts: params.charts,
    };
    let mut rows = Vec::new();
    for &delta in &params.deltas {
        let map = BoundaryMap::build_with(params.domain, delta, params.epsilon, opts)?;
        rows.push((delta, map.verify(params.samples)?));
    }
    let k1_floor = rows.iter().map(|r| r.1.k1).fold(f64::INFINITY, f64::min);
    let k2_ceiling = rows.iter().map(|r| r.1.k2).fold(0.0, f64::max);
    let devs: Vec<f64> = rows.iter().map(|r| r.1.grad_dev).collect();
    let decreasing = devs.windows(2).all(|w| w[1] < w[0]);
    let span = params.deltas[0] / params.deltas[params.deltas.len() - 1];
    let scaling = span < 8.0 || devs[devs.len() - 1] <= devs[0] / 4.0;
    ctx.check("maps_into", rows.iter().all(|r| r.1.maps_into));
    ctx.check("injective", rows.iter().all(|r| r.1.injective));
    ctx.check("k1_floor", k1_floor > 0.0);
    ctx.check("k2_ceiling", k2_ceiling.is_finite());
    ctx.check("grad_dev_decreasing", decreasing);
    ctx.check("grad_dev_scaling", scaling);
    let levels: Vec<Value> = rows.iter().map(|(d, c)| json!({"delta": d, "constants": c})).collect();
    ctx.result("levels", &levels)?;
    ctx.result("k1_floor", &k1_floor)?;
    ctx.result("k2_ceiling", &k2_ceiling)?;
    let mut w = ctx.csv("boundary.csv")?;
    writeln!(w, "delta,k1,k2,grad_dev")?;
    for (d, c) in &rows {
        writeln!(w, "{},{},{},{}", fmt_f64(*d), fmt_f64(c.k1), fmt_f64(c.k2), fmt_f64(c.grad_dev))?;
    }
    w.flush()?;
    Ok(())
}

fn mollify_cmd(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.cfg.domain()?.grid()?;
    let nf = ctx.cfg.nfunction()?.build()?.with_domain(grid.domain);
    let params = ctx.cfg.mollifier()?.clone();
    let opts = MollifyOptions {
        epsilon: params.epsilon,
        map: MapOptionsSer {
            collar: None,
            charts: 8,
        },
        extension: params.extension,
        lambda: params.lambda,
    };
    let exprs = config::parse_exprs("mollifier.fields", &params.fields)?;
    let mut bounds = Vec::new();
    for e in &exprs {
        let z = GridField::from_fn(grid, |t, x| e.eval(t, x));
        let r = mollify::uniform_bound_check(&nf, &z, &params.deltas, &opts)?;
        bounds.push(json!({"field": e.source(), "report": r}));
        ctx.check(
            &format!("uniform_bound[{}]", e.source()),
            !r.inconsistent && r.c_measured.is_finite() && r.extension_change < params.extension_tolerance,
        );
    }
    ctx.result("uniform_bound", &bounds)?;
    if let (Some(u), Some(grad)) = (&params.u, &params.grad_u) {
        let ue = config::parse_expr("mollifier.u", u)?;
        let ge = config::parse_exprs("mollifier.grad_u", grad)?;
        if ge.len() != grid.dim() {
            return Err(Error::Config {
                path: "mollifier.grad_u".into(),
                message: format!("expected {} components", grid.dim()),
            });
        }
        let uf = GridField::from_fn(grid, |t, x| ue.eval(t, x));
        let gf = GridField::from_vec_fn(grid, ge.len(), |t, x, out| {
            for (o, e) in out.iter_mut().zip(&ge) {
                *o = e.eval(t, x);
            }
        });
        let report = mollify::approximation_sequence(&nf, &uf, &gf, &params.deltas, &opts)?;
        let seq: Vec<GridField> = report.levels.iter().map(|l| l.grad_v.clone()).collect();
        let conv = modular::modular_convergence(
            &nf,
            &seq,
            &gf,
            ConvergenceOptions {
                tol: ctx.tol.modular_convergence,
                ..Default::default()
            },
        )?;
        ctx.check("commutator", report.commutator_ok);
        ctx.check("modular_convergence", conv.converged);
        if let Some(last) = report.levels.last() {
            ctx.field_csv("fields_v.csv", &last.v)?;
        }
        ctx.result("approximation", &report)?;
        ctx.result("modular_convergence", &conv)?;
    }
    Ok(())
}

fn graph_cmd(ctx: &mut Ctx) -> Result<()> {
    let g = ctx.cfg.graph()?.build()?;
    let params = ctx.cfg.graph_check.clone().unwrap_or_default();
    let points = sample_points(&ctx.cfg);
    let dim = points[0].1.len();
    let xis: Vec<Vec<f64>> = (0..=80)
        .map(|i| {
            let r = -params.radius + 2.0 * params.radius * i as f64 / 80.0;
            if dim == 1 {
                vec![r]
            } else {
                vec![r * 0.6, r * 0.8]
            }
        })
        .collect();
    let weight = 1.0 / points.len() as f64;
    let cert = check_axioms(&g, g.nfunction(), &points, &xis, weight);
    let moll = g.mollified(params.eps)?;
    let cert_eps = check_axioms(&moll, g.nfunction(), &points, &xis, weight);
    ctx.check("certificate", cert.feasible);
    ctx.check(
        "mollified_certificate",
        cert_eps.monotone && matches!((cert.c_star, cert_eps.c_star), (Some(a), Some(b)) if b >= 0.5 * a),
    );

    let mut on_graph_min = f64::INFINITY;
    for (t, x) in &points {
        for _ in 0..16 {
            let xi: Vec<f64> = (0..dim).map(|_| params.radius * (2.0 * ctx.rng.gen::<f64>() - 1.0)).collect();
            let a = g.select(*t, x, &xi);
            let probes = probe_ladder(&xi, params.radius, 16, 8);
            on_graph_min = on_graph_min.min(maximality_residual(&g, *t, x, &xi, &a, &probes));
        }
    }
    ctx.check("maximality_on_graph", on_graph_min >= -ctx.tol.residual_floor);

    let (t, x) = points[points.len() / 2].clone();
    let n = 257;
    let rep = LipschitzRep::build(&g, t, &x, params.radius, n)?;
    let mut roundtrip = 0.0_f64;
    for i in 0..n {
        let r = params.radius * i as f64 / (n - 1) as f64;
        let mut xi = vec![0.0; dim];
        xi[0] = r;
        let back = rep.reconstruct(&xi);
        let a = g.select(t, &x, &xi);
        roundtrip = roundtrip.max((back[0] - a[0]).abs() / a[0].abs().max(1.0));
    }
    ctx.check("lipschitz", rep.lipschitz <= 1.0 + 1e-12);
    ctx.check("roundtrip", roundtrip <= ctx.tol.roundtrip);
    let transfer = rep.transfer_check(g.nfunction(), t, &x, cert.c_star.unwrap_or(0.0), cert.k_integral, &xis);
    ctx.result("certificate", &cert)?;
    ctx.result("mollified_certificate", &json!({"c_star": cert_eps.c_star, "k_integral": cert_eps.k_integral, "monotone": cert_eps.monotone}))?;
    ctx.result("maximality_on_graph_min", &on_graph_min)?;
    ctx.result("lipschitz", &rep.lipschitz)?;
    ctx.result("roundtrip_error", &roundtrip)?;
    ctx.result("transfer", &transfer)?;

    let mut w = ctx.csv("phi.csv")?;
    writeln!(w, "sigma,phi")?;
    for (s, p) in rep.sigma.iter().zip(&rep.phi) {
        writeln!(w, "{},{}", fmt_f64(*s), fmt_f64(*p))?;
    }
    w.flush()?;
    let mut w = ctx.csv("selection.csv")?;
    writeln!(w, "xi,a,a_eps")?;
    let mut buf = vec![0.0; dim];
    for xi in &xis {
        let a = g.select(t, &x, xi);
        moll.flux(t, &x, xi, &mut buf);
        writeln!(w, "{},{},{}", fmt_f64(xi[0]), fmt_f64(a[0]), fmt_f64(buf[0]))?;
    }
    w.flush()?;
    Ok(())
}

fn problem(cfg: &ExperimentConfig) -> Result<Problem> {
    let domain = cfg.domain()?;
    let s = cfg.solver()?;
    let graph = cfg.graph()?.build()?;
    let u0 = config::parse_expr("solver.u0", &s.u0)?;
    let forcing = if s.f.trim() == "0" {
        Forcing::Zero
    } else {
        let f = config::parse_expr("solver.f", &s.f)?;
        Forcing::function(move |t, x| f.eval(t, x))
    };
    let grid = domain.grid()?;
    Ok(Problem {
        graph,
        forcing,
        u0: Arc::new(move |x| u0.eval(0.0, x)),
        omega: domain.omega,
        nx: grid.nx,
        ny: grid.ny,
        options: SolveOptions {
            t_end: s.t_end,
            dt: s.dt,
            ..Default::default()
        },
    })
}

fn solve_cmd(ctx: &mut Ctx) -> Result<()> {
    let prob = problem(&ctx.cfg)?;
    let s = ctx.cfg.solver()?.clone();
    let n = *s.n.last().expect("validated non-empty");
    let eps = *s.eps.last().expect("validated non-empty");
    let traj = prob.solve(eps, n)?;
    let cert = prob.certificate();
    let energy = energy_report(&traj, &cert);
    ctx.check("energy_identity", energy.identity_ok && energy.max_identity_residual <= ctx.tol.energy_identity);
    if let Some(exact) = &s.exact {
        let e = config::parse_expr("solver.exact", exact)?;
        let err = traj.l2_error_final(|x| e.eval(s.t_end, x));
        ctx.check("l2_error", err <= ctx.tol.l2_error);
        ctx.result("l2_error", &err)?;
    }
    let mut summary = serde_json::to_value(&energy)?;
    if let Value::Object(m) = &mut summary {
        m.remove("identity_residuals");
    }
    ctx.result("energy", &summary)?;
    ctx.result("certificate", &json!({"c_star": cert.c_star, "k_integral": cert.k_integral, "feasible": cert.feasible}))?;
    ctx.result("run", &json!({"eps": eps, "n": n, "steps": traj.midpoints.len(), "halvings": traj.halvings}))?;
    let mut w = ctx.csv("trajectory.csv")?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    let fields = traj.fields(s.time_samples)?;
    ctx.field_csv("fields_u.csv", &fields.u)?;
    ctx.field_csv("fields_grad_u.csv", &fields.grad_u)?;
    ctx.field_csv("fields_flux.csv", &fields.flux)?;
    if s.minty {
        let trajs = s.eps.iter().map(|&e| prob.solve(e, n)).collect::<Result<Vec<_>>>()?;
        let report = minty_check(
            &trajs,
            &MintyOptions {
                floor: ctx.tol.residual_floor,
                time_samples: s.time_samples,
                max_violation_fraction: ctx.tol.violation_fraction,
                ..Default::default()
            },
        )?;
        ctx.check("minty", report.passed);
        ctx.result("minty", &report)?;
    }
    Ok(())
}

fn sweep_cmd(ctx: &mut Ctx) -> Result<()> {
    let prob = problem(&ctx.cfg)?;
    let s = ctx.cfg.solver()?.clone();
    let report = solver::sweep(&prob, &s.eps, &s.n)?;
    ctx.check("uniformly_bounded", report.uniformly_bounded);
    ctx.check("projection_monotone", report.projection_monotone);
    ctx.check("equicontinuous", report.equicontinuous);
    let mut w = ctx.csv("sweep.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    ctx.result("sweep", &report)?;
    Ok(())
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(outcome) => {
            let status = if outcome.passed { "PASS" } else { "FAIL" };
            println!("{status}: report written to {}", outcome.out_dir.join("report.json").display());
            i32::from(!outcome.passed)
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Whether `path` holds a report that passed.
pub fn report_passed(path: &Path) -> Result<bool> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(v.get("passed").and_then(Value::as_bool) == Some(true))
}
