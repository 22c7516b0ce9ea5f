//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use musielak::boundary_map::{BoundaryMap, MapDomain};
use musielak::domain::{Grid, Omega, SpaceTime};
use musielak::field::GridField;
use musielak::graph::{check_axioms, maximality_residual, LipschitzRep, MonotoneGraph};
use musielak::modular::{self, ConvergenceOptions};
use musielak::mollify::{self, MollifyOptions};
use musielak::nfunction::{ExponentField, NFunction};
use musielak::solver::{energy_report, minty_check, Forcing, MintyOptions, Problem, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn p_const(p: f64) -> ExponentField {
    ExponentField::constant(p).unwrap()
}

fn p_smooth() -> ExponentField {
    ExponentField::from_fn(
        "2+0.5sin(pi x)sin(pi t)",
        |t, x: &[f64]| 2.0 + 0.5 * (PI * x[0]).sin() * (PI * t).sin(),
        2.0,
        2.5,
    )
    .unwrap()
}

/// Every builtin family on a smooth variable exponent, plus a table.
fn builtin_kinds() -> Vec<NFunction> {
    let nodes: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    let values = nodes.iter().map(|a| a * a + 0.1 * a.powi(3)).collect();
    vec![
        NFunction::power(p_smooth()).unwrap(),
        NFunction::power_normalized(p_smooth()).unwrap(),
        NFunction::exp_power(p_const(1.5)),
        NFunction::power_log(p_smooth()),
        NFunction::tabulated(nodes, values).unwrap(),
    ]
}

fn rel_close(got: f64, want: f64, tol: f64) -> bool {
    if want == 0.0 {
        got.abs() <= 1e-300
    } else {
        (got - want).abs() <= tol * want.abs()
    }
}

fn runtime_ok(start: Instant, limit: Duration) -> (bool, String) {
    let el = start.elapsed();
    (el < limit, format!("{:.2}s/{}s", el.as_secs_f64(), limit.as_secs()))
}

fn conjugate_correctness() -> Verdict {
    let start = Instant::now();
    let b: Vec<f64> = (0..=100).map(|k| 0.1 * k as f64).collect();
    let mut worst = 0.0_f64;
    let mut ok = true;
    let square = NFunction::from_fn("a^2", |_, _, a: f64| a * a);
    for &bv in &b {
        let got = square.conjugate_value(0.5, &[0.5], bv).unwrap();
        let want = bv * bv / 4.0;
        ok &= rel_close(got, want, 1e-8);
        if want > 0.0 {
            worst = worst.max((got - want).abs() / want);
        }
    }
    for p in [1.5, 2.0, 3.0] {
        let m = NFunction::from_fn("a^p/p", move |_, _, a: f64| a.powf(p) / p);
        let q = p / (p - 1.0);
        for &bv in &b {
            let got = m.conjugate_value(0.5, &[0.5], bv).unwrap();
            let want = bv.powf(q) / q;
            ok &= rel_close(got, want, 1e-8);
            if want > 0.0 {
                worst = worst.max((got - want).abs() / want);
            }
        }
    }
    let mut bic = 0.0_f64;
    for nf in builtin_kinds() {
        let samples: Vec<(f64, Vec<f64>, f64)> = nf
            .a_grid()
            .points()
            .into_iter()
            .enumerate()
            .map(|(i, a)| (0.25 + 0.5 * (i % 2) as f64, vec![0.3 + 0.4 * (i % 3) as f64 / 2.0], a))
            .collect();
        bic = bic.max(nf.biconjugate_residual(&samples).unwrap().relative);
    }
    let (fast, rt) = runtime_ok(start, Duration::from_secs(1));
    verdict(
        ok && bic <= 1e-6 && fast,
        format!("max rel err {worst:.2e} (≤1e-8), biconjugate {bic:.2e} (≤1e-6), {rt}"),
    )
}

fn fenchel_young() -> Verdict {
    let kinds = builtin_kinds();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_gap, mut worst_eq) = (f64::NEG_INFINITY, 0.0_f64);
    for i in 0..10_000 {
        let nf = &kinds[i % kinds.len()];
        let (t, x) = (rng.gen::<f64>(), [rng.gen::<f64>()]);
        let a = 3.0 * rng.gen::<f64>();
        let b = 10.0 * rng.gen::<f64>();
        let gap = a * b - nf.value(t, &x, a) - nf.conjugate_value(t, &x, b).unwrap();
        worst_gap = worst_gap.max(gap);
        let slope = nf.derivative(t, &x, a);
        let eq = nf.value(t, &x, a) + nf.conjugate_value(t, &x, slope).unwrap() - a * slope;
        worst_eq = worst_eq.max(eq.abs() / (a * slope).max(1.0));
    }
    verdict(
        worst_gap <= 1e-10 && worst_eq <= 1e-6,
        format!("max ab−M−M* {worst_gap:.2e} (≤1e-10), equality gap {worst_eq:.2e} (≤1e-6)"),
    )
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> GridField {
    let scale = 0.1 + 3.0 * rng.gen::<f64>();
    let data = (0..grid.len()).map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    GridField::from_data(grid, 1, data).unwrap()
}

fn luxembourg() -> Verdict {
    let start = Instant::now();
    let grid = Grid::new(SpaceTime::unit_interval(), 8, 8, 1).unwrap();
    let square = NFunction::power(p_const(2.0)).unwrap().with_domain(grid.domain);
    let mut const_err = 0.0_f64;
    for c in [0.1, 1.0, 2.5, 7.0] {
        let n = modular::luxembourg_norm(&square, &GridField::constant(grid, c)).unwrap();
        const_err = const_err.max((n - c).abs() / c);
    }
    let nf = NFunction::power(p_smooth()).unwrap().with_domain(grid.domain);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut homog, mut tri_bad) = (0.0_f64, 0usize);
    for i in 0..1000 {
        let (x, y) = (random_field(grid, &mut rng), random_field(grid, &mut rng));
        let alpha = [1.0 / 3.0, 2.0, 10.0][i % 3];
        let nx = modular::luxembourg_norm(&nf, &x).unwrap();
        let ny = modular::luxembourg_norm(&nf, &y).unwrap();
        let nax = modular::luxembourg_norm(&nf, &x.scaled(alpha)).unwrap();
        homog = homog.max((nax - alpha * nx).abs() / (alpha * nx));
        let sum = modular::luxembourg_norm(&nf, &x.add(&y).unwrap()).unwrap();
        tri_bad += usize::from(sum > (nx + ny) * (1.0 + 1e-12));
    }
    let mut unit = 0.0_f64;
    for nf in builtin_kinds().into_iter().take(4) {
        let nf = nf.with_domain(grid.domain);
        for _ in 0..5 {
            let x = random_field(grid, &mut rng);
            let n = modular::luxembourg_norm(&nf, &x).unwrap();
            let rho = modular::modular(&nf, &x.scaled(1.0 / n)).unwrap().value;
            unit = unit.max((rho - 1.0).abs());
        }
    }
    let (fast, rt) = runtime_ok(start, Duration::from_secs(10));
    verdict(
        const_err <= 1e-10 && homog <= 1e-10 && tri_bad == 0 && unit <= 1e-8 && fast,
        format!(
            "constant {const_err:.1e} (≤1e-10), homogeneity {homog:.1e} (≤1e-10), triangle violations {tri_bad}, |ρ(ξ/‖ξ‖)−1| {unit:.1e} (≤1e-8), {rt}"
        ),
    )
}

fn hoelder() -> Verdict {
    let grid = Grid::new(SpaceTime::unit_interval(), 8, 8, 1).unwrap();
    let kinds = [
        NFunction::power(p_smooth()).unwrap(),
        NFunction::power_normalized(p_smooth()).unwrap(),
        NFunction::exp_power(p_const(1.5)),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut bad, mut worst) = (0usize, 0.0_f64);
    for i in 0..1000 {
        let nf = kinds[i % kinds.len()].clone().with_domain(grid.domain);
        let r = modular::hoelder_check(&nf, &random_field(grid, &mut rng), &random_field(grid, &mut rng)).unwrap();
        bad += usize::from(!r.passed);
        worst = worst.max(r.empirical_constant);
    }
    verdict(bad == 0, format!("{bad} violations in 1000 pairs, largest empirical constant {worst:.3} (≤2)"))
}

fn boundary_map() -> Verdict {
    let start = Instant::now();
    let deltas = [0.1, 0.05, 0.025, 0.0125];
    let mut ok = true;
    let mut detail = Vec::new();
    for domain in [MapDomain::Interval { length: 1.0 }, MapDomain::Disk { radius: 1.0 }] {
        let cs: Vec<_> = deltas
            .iter()
            .map(|&d| BoundaryMap::build(domain, d, 0.5).unwrap().verify(4000).unwrap())
            .collect();
        let k1 = cs.iter().map(|c| c.k1).fold(f64::INFINITY, f64::min);
        let k2 = cs.iter().map(|c| c.k2).fold(0.0, f64::max);
        let dev: Vec<f64> = cs.iter().map(|c| c.grad_dev).collect();
        let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
        let ratio = dev[3] / dev[0];
        ok &= k1 > 0.0 && k2.is_finite() && decreasing && ratio <= 0.25 && cs.iter().all(|c| c.maps_into && c.injective);
        detail.push(format!(
            "{}: K1≥{k1:.3} K2≤{k2:.3} dev ratio {ratio:.3} (≤0.25)",
            match domain {
                MapDomain::Disk { .. } => "disk",
                _ => "interval",
            }
        ));
    }
    let (fast, rt) = runtime_ok(start, Duration::from_secs(30));
    verdict(ok && fast, format!("{}, {rt}", detail.join("; ")))
}

fn uniform_bound() -> Verdict {
    let start = Instant::now();
    let grid = Grid::new(SpaceTime::unit_interval(), 128, 128, 1).unwrap();
    let t_len = grid.domain.t_len;
    let p = ExponentField::from_fn(
        "2+0.5sin(pi x)sin(pi t/T)",
        move |t, x: &[f64]| 2.0 + 0.5 * (PI * x[0]).sin() * (PI * t / t_len).sin(),
        2.0,
        2.5,
    )
    .unwrap();
    let nf = NFunction::power(p).unwrap().with_domain(grid.domain);
    let fields: [fn(f64, f64) -> f64; 5] = [
        |t, x| (PI * x).sin() * (PI * t).sin(),
        |_, x| x * (1.0 - x),
        |t, x| if x > 0.5 { 1.0 } else { -1.0 } * (1.0 + t),
        |t, x| 3.0 * (-20.0 * ((x - 0.3).powi(2) + (t - 0.6).powi(2))).exp(),
        |t, x| (5.0 * PI * x).cos() * t,
    ];
    let ladder = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let opts = MollifyOptions::default();
    let mut worst_change = 0.0_f64;
    let mut worst_c = 0.0_f64;
    for f in fields {
        let z = GridField::from_fn(grid, |t, x| f(t, x[0]));
        let r = mollify::uniform_bound_check(&nf, &z, &ladder, &opts).unwrap();
        worst_change = worst_change.max(r.extension_change);
        worst_c = worst_c.max(r.c_measured);
    }
    let (fast, rt) = runtime_ok(start, Duration::from_secs(120));
    verdict(
        worst_change < 0.05 && worst_c.is_finite() && fast,
        format!("C_measured ≤ {worst_c:.4}, change on extension {:.2}% (<5%), {rt}", 100.0 * worst_change),
    )
}

fn modular_convergence() -> Verdict {
    let grid = Grid::new(SpaceTime::unit_interval(), 400, 400, 1).unwrap();
    let nf = NFunction::power(p_smooth()).unwrap().with_domain(grid.domain);
    let u = GridField::from_fn(grid, |t, x| (PI * x[0]).sin() * (PI * t).sin());
    let grad = GridField::from_fn(grid, |t, x| PI * (PI * x[0]).cos() * (PI * t).sin());
    let deltas = [0.1, 0.05, 0.025];
    let report = mollify::approximation_sequence(&nf, &u, &grad, &deltas, &MollifyOptions::default()).unwrap();
    let seq: Vec<GridField> = report.levels.iter().map(|l| l.grad_v.clone()).collect();
    let conv = modular::modular_convergence(
        &nf,
        &seq,
        &grad,
        ConvergenceOptions {
            tol: 1e-4,
            ..Default::default()
        },
    )
    .unwrap();
    let monotone = conv.residuals.windows(2).all(|w| w[1] < w[0]);
    let last = *conv.residuals.last().unwrap();
    verdict(
        conv.converged && monotone && last <= 1e-4 && report.commutator_ok,
        format!(
            "λ={:?}, residuals {:?} (last ≤1e-4), commutator within bound at every δ: {}",
            conv.lambda,
            conv.residuals.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>(),
            report.commutator_ok
        ),
    )
}

fn heat_graph() -> MonotoneGraph {
    MonotoneGraph::linear(1.0, NFunction::power_normalized(p_const(2.0)).unwrap()).unwrap()
}

fn heat_oracle() -> Verdict {
    let start = Instant::now();
    let opts = SolveOptions {
        t_end: 0.1,
        dt: 1e-4,
        ..Default::default()
    };
    let prob = Problem::new(heat_graph(), Forcing::Zero, |x| (PI * x[0]).sin(), Omega::unit_interval(), 64, opts);
    let traj = prob.solve(0.05, 4).unwrap();
    let err = traj.l2_error_final(|x| (-PI * PI * 0.1f64).exp() * (PI * x[0]).sin());
    let energy = energy_report(&traj, &prob.certificate());
    let (fast, rt) = runtime_ok(start, Duration::from_secs(10));
    verdict(
        err <= 1e-6 && energy.max_identity_residual <= 1e-8 && fast,
        format!("L² error {err:.2e} (≤1e-6), identity residual {:.2e} (≤1e-8), {rt}", energy.max_identity_residual),
    )
}

fn a_priori_bound() -> Verdict {
    let p = ExponentField::from_fn("2+tx", |t, x: &[f64]| 2.0 + t * x[0], 2.0, 3.0).unwrap();
    let graphs = [
        ("power 2+tx", MonotoneGraph::potential_power(p).unwrap()),
        ("jump", MonotoneGraph::jump(p_const(1.0)).unwrap()),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, g) in graphs {
        let mut cs = Vec::new();
        for dt in [2e-3, 1e-3] {
            let opts = SolveOptions {
                t_end: 0.1,
                dt,
                ..Default::default()
            };
            let prob = Problem::new(
                g.clone(),
                Forcing::function(|_, _| 1.0),
                |x| (PI * x[0]).sin(),
                Omega::unit_interval(),
                64,
                opts,
            );
            let cert = prob.certificate();
            for eps in [0.1, 0.05, 0.025] {
                let traj = prob.solve(eps, 8).unwrap();
                let e = energy_report(&traj, &cert);
                ok &= e.identity_ok;
                cs.push(e.realized_c);
            }
        }
        let reference = cs[0];
        let spread = cs.iter().map(|c| (c / reference - 1.0).abs()).fold(0.0, f64::max);
        ok &= cs.iter().all(|c| c.is_finite()) && spread <= 0.1;
        detail.push(format!("{name}: c={reference:.4} spread {:.2}% (≤10%)", 100.0 * spread));
    }
    verdict(ok, detail.join("; "))
}

fn graph_machinery() -> Verdict {
    let square = NFunction::power(p_const(2.0)).unwrap();
    let quad = MonotoneGraph::linear(2.0, square.clone()).unwrap();
    let pts = vec![(0.5, vec![0.5])];
    let xis: Vec<Vec<f64>> = (0..=80).map(|i| vec![-4.0 + 0.1 * i as f64]).collect();
    let cert = check_axioms(&quad, quad.nfunction(), &pts, &xis, 1.0);
    let c_star = cert.c_star.unwrap_or(f64::NAN);
    let cert_ok = (c_star - 1.0).abs() <= 1e-10 && cert.k_integral <= 1e-10;

    let probes: Vec<Vec<f64>> = (0..=60).map(|i| vec![-3.0 + 0.1 * i as f64]).collect();
    let res = maximality_residual(&quad, 0.5, &[0.5], &[1.0], &[0.0], &probes);
    let max_ok = (res + 0.5).abs() <= 1e-10;

    let rep = LipschitzRep::build(&quad, 0.5, &[0.5], 5.0, 101).unwrap();
    let roundtrip = (0..=200)
        .map(|i| -5.0 + 0.05 * i as f64)
        .map(|xi| (rep.reconstruct(&[xi])[0] - 2.0 * xi).abs())
        .fold(0.0, f64::max);

    let p = ExponentField::from_fn("2+tx", |t, x: &[f64]| 2.0 + t * x[0], 2.0, 3.0).unwrap();
    let builtins = [
        quad.clone(),
        MonotoneGraph::potential_power(p_const(1.5)).unwrap(),
        MonotoneGraph::potential_power(p_const(3.0)).unwrap(),
        MonotoneGraph::potential_power(p).unwrap(),
        MonotoneGraph::jump(p_const(1.0)).unwrap(),
        MonotoneGraph::from_table(vec![0.0, 1.0, 1.0, 2.0], vec![0.0, 1.0, 3.0, 4.0], square).unwrap(),
    ];
    let lip = builtins
        .iter()
        .map(|g| LipschitzRep::build(g, 0.5, &[0.5], 3.0, 301).unwrap().lipschitz)
        .fold(0.0, f64::max);
    verdict(
        cert_ok && max_ok && roundtrip <= 1e-8 && lip <= 1.0,
        format!(
            "(c_*, ∫k)=({c_star}, {:.1e}), residual {res:.12} (−0.5±1e-10), round trip {roundtrip:.1e} (≤1e-8), max Lipschitz {lip:.4} (≤1)",
            cert.k_integral
        ),
    )
}

fn minty() -> Verdict {
    let opts = SolveOptions {
        t_end: 0.1,
        dt: 1e-3,
        ..Default::default()
    };
    let prob = Problem::new(
        MonotoneGraph::jump(p_const(1.0)).unwrap(),
        Forcing::Zero,
        |x| (PI * x[0]).sin(),
        Omega::unit_interval(),
        128,
        opts,
    );
    let trajs: Vec<_> = [0.1, 0.05, 0.025].iter().map(|&e| prob.solve(e, 16).unwrap()).collect();
    let r = minty_check(&trajs, &MintyOptions::default()).unwrap();
    let finest = r.levels.last().unwrap();
    verdict(
        r.quantiles_monotone && finest.violation_fraction_outside_band < 0.01,
        format!(
            "quantiles monotone: {}, finest outside-band violations {:.3}% (<1%)",
            r.quantiles_monotone,
            100.0 * finest.violation_fraction_outside_band
        ),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("conjugate correctness", conjugate_correctness),
        ("Fenchel-Young", fenchel_young),
        ("Luxembourg norm", luxembourg),
        ("Hölder pairing", hoelder),
        ("boundary map", boundary_map),
        ("uniform modular bound", uniform_bound),
        ("modular convergence", modular_convergence),
        ("heat-equation oracle", heat_oracle),
        ("a priori bound", a_priori_bound),
        ("graph machinery", graph_machinery),
        ("Minty inclusion", minty),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = run();
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {name}: {}", i + 1, v.detail);
        failed += usize::from(!v.passed);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
