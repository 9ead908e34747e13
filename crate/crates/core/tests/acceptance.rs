//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits nonzero if any fails.
//!
//! `cargo test -p twolevel-core --test acceptance -- slab consistency` runs
//! only the criteria whose names contain one of the given words.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use twolevel_core::assembly::{
    assemble_mass, assemble_neumann_load, assemble_stiffness, element_mass, element_stiffness, Coefficient, MaterialModel, SourceSpec,
};
use twolevel_core::coupling::{assemble_delta_jump_load, assemble_gamma_density_load, build_gamma_quadrature};
use twolevel_core::experiments::{
    empirical_orders, run_consistency_study, run_slab_verification, run_steady_study, run_unsteady_study, CoefficientSpec, ExperimentConfig, LaserParams,
    MeshSpec, SourceKind, TimeSpec,
};
use twolevel_core::fe::{FeSpace, Field, TriangleRule};
use twolevel_core::geometry::{build_gamma, generate_rect_mesh, BoundaryTag, GammaClass, Mesh, Point, Rect, SideTags};
use twolevel_core::metrics::relative_l2_error;
use twolevel_core::solvers::{
    l2_norm, solve_monolithic_steady_tol, solve_monolithic_unsteady, solve_two_level_steady, solve_two_level_unsteady, Theta, TimeConfig, TwoLevelConfig,
};
use twolevel_core::sparse::CsrMatrix;

type Outcome = Result<String, String>;

/// Driver name with its unweighted and capacity-weighted norm sequences.
type NormRun = (String, Vec<f64>, Vec<f64>);

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn(&mut Vec<String>) -> Outcome,
    /// Extra diagnostics run after the timed part.
    supplement: Option<fn(&mut Vec<String>)>,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_errors(values: &[f64]) -> String {
    values.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn rel(a: &Field, b: &Field) -> f64 {
    relative_l2_error(a, b).expect("same domain").relative_l2
}

// 1

fn slab_fixed_point(notes: &mut Vec<String>) -> Outcome {
    let mut cfg = ExperimentConfig::slab();
    cfg.two_level.theta = Theta::Fixed(0.5);
    cfg.two_level.tol = 1e-10;

    let mut auto = cfg.clone();
    auto.two_level.theta = Theta::Auto;
    match run_slab_verification(&auto, None) {
        Ok(c) => notes.push(format!(
            "theta auto ({}): {} iterations, global {:.2e}, local {:.2e}, u(top) = {:.10}",
            c[0].theta, c[0].iterations, c[0].global_error, c[0].local_error, c[0].top_value
        )),
        Err(e) => notes.push(format!("theta auto: {e}")),
    }

    let checks = run_slab_verification(&cfg, None).map_err(|e| e.to_string())?;
    let c = &checks[0];
    check(
        c.global_error <= 1e-8 && c.local_error <= 1e-8 && (c.top_value - 20.9525).abs() <= 1e-8,
        format!("{} iterations, global {:.2e}, local {:.2e}, u(top) = {:.10}", c.iterations, c.global_error, c.local_error, c.top_value),
    )
}

// 2

fn degenerate_equivalence(_: &mut Vec<String>) -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.material.beta_minus = CoefficientSpec::Constant(1.0);
    let material = cfg.material.to_model();
    let strip = cfg.geometry.strip().unwrap();
    let global = cfg.global_space(20).unwrap();
    let local = cfg.local_space(80).unwrap();
    let gamma = build_gamma(global.mesh(), strip).unwrap();
    let sources = cfg.source.to_sources(cfg.boundary_temperature);
    let mono = solve_monolithic_steady_tol(&global, &material, strip, &sources, 1e-13).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut iterations = Vec::new();
    for theta in [Theta::Fixed(0.5), Theta::Auto] {
        let tl = TwoLevelConfig { theta, tol: 1e-10, cg_tol: 1e-13, ..TwoLevelConfig::default() };
        let r = solve_two_level_steady(&global, &local, &material, &gamma, &sources, &tl).map_err(|e| e.to_string())?;
        iterations.push(r.iterations);
        worst = worst.max(rel(&r.global_field, &mono));
    }

    // unsteady: equal conductivities and capacities, moving laser
    let mut ucfg = ExperimentConfig { source: SourceKind::Laser(LaserParams::default()), ..ExperimentConfig::default() };
    ucfg.material.beta_minus = CoefficientSpec::Constant(1.0);
    ucfg.material.rho_minus = CoefficientSpec::Constant(1.0);
    let material = ucfg.material.to_model();
    let global = ucfg.global_space(20).unwrap();
    let local = ucfg.local_space(80).unwrap();
    let gamma = build_gamma(global.mesh(), strip).unwrap();
    let sources = ucfg.source.to_sources(ucfg.boundary_temperature);
    let mut time = TimeConfig::new(0.01, 0.0, 0.2);
    time.per_step = TwoLevelConfig { theta: Theta::Fixed(0.5), tol: 1e-10, cg_tol: 1e-13, ..TwoLevelConfig::default() };
    let tl = solve_two_level_unsteady(&global, &local, &material, &gamma, &sources, &time).map_err(|e| e.to_string())?;
    let mono = solve_monolithic_unsteady(&global, &material, strip, &sources, &time).map_err(|e| e.to_string())?;
    for (r, u) in tl.iter().zip(&mono[1..]) {
        iterations.push(r.iterations);
        worst = worst.max(rel(&r.global_field, u));
    }
    check(
        iterations.iter().all(|&k| k == 1) && worst <= 1e-10,
        format!("{} runs, iterations {:?}, max difference {worst:.2e}", iterations.len(), iterations.iter().max().unwrap()),
    )
}

// 3

fn steady_config(theta: Theta) -> ExperimentConfig {
    let mut cfg = ExperimentConfig { mesh: MeshSpec { global_n: vec![20], local_n: vec![80, 160, 240], reference_n: 200, degree: 2 }, ..Default::default() };
    cfg.two_level.theta = theta;
    cfg
}

fn steady_monotonicity(_: &mut Vec<String>) -> Outcome {
    let study = run_steady_study(&steady_config(Theta::Fixed(0.5)), None).map_err(|e| e.to_string())?;
    let level = &study.levels[0];
    let errors: Vec<f64> = level.two_level.iter().map(|r| r.error.relative_l2).collect();
    let mono = level.monolithic.relative_l2;
    check(errors.len() == 3 && strictly_decreasing(&errors) && errors[2] < 0.5 * mono, format!("two-level {}, monolithic {mono:.3e}", fmt_errors(&errors)))
}

fn steady_monotonicity_auto(notes: &mut Vec<String>) {
    match run_steady_study(&steady_config(Theta::Auto), None) {
        Ok(study) => {
            let level = &study.levels[0];
            let errors: Vec<f64> = level.two_level.iter().map(|r| r.error.relative_l2).collect();
            notes.push(format!(
                "theta auto: two-level {} (iterations {:?}), monolithic {:.3e}, decreasing {}",
                fmt_errors(&errors),
                level.two_level.iter().map(|r| r.iterations).collect::<Vec<_>>(),
                level.monolithic.relative_l2,
                strictly_decreasing(&errors)
            ));
        }
        Err(e) => notes.push(format!("theta auto: {e}")),
    }
}

// 4

fn unsteady_reproduction(_: &mut Vec<String>) -> Outcome {
    let cfg = ExperimentConfig {
        material: twolevel_core::experiments::MaterialSpec { rho_minus: CoefficientSpec::Constant(5.0), ..Default::default() },
        source: SourceKind::Laser(LaserParams::default()),
        mesh: MeshSpec { global_n: vec![20], local_n: vec![80, 100, 120], reference_n: 200, degree: 2 },
        time: Some(TimeSpec { dt: 0.01, t0: 0.0, t_end: 0.85, ..TimeSpec::default() }),
        ..ExperimentConfig::default()
    };
    let study = run_unsteady_study(&cfg, None).map_err(|e| e.to_string())?;
    let level = &study.levels[0];
    let mono = level.monolithic.mean_error();
    let e: Vec<f64> = level.two_level.iter().map(|r| r.mean_error()).collect();
    check(
        e.len() == 3 && e[2] <= e[1] && e[1] <= e[0] && e[0] <= mono && e[2] < 0.7 * mono,
        format!("time-averaged two-level {} for 1/80, 1/100, 1/120; monolithic {mono:.3e}", fmt_errors(&e)),
    )
}

// 5

fn consistency(notes: &mut Vec<String>) -> Outcome {
    let levels = run_consistency_study(&ExperimentConfig::consistency(), None).map_err(|e| e.to_string())?;
    let d: Vec<f64> = levels.iter().map(|l| l.difference).collect();
    let orders = empirical_orders(&d);

    let mut p1 = ExperimentConfig::consistency();
    p1.mesh.degree = 1;
    match run_consistency_study(&p1, None) {
        Ok(l) => {
            let d1: Vec<f64> = l.iter().map(|l| l.difference).collect();
            notes.push(format!("P1: differences {}, orders {:.2?}", fmt_errors(&d1), empirical_orders(&d1)));
        }
        Err(e) => notes.push(format!("P1: {e}")),
    }
    check(orders.iter().all(|&p| p >= 1.0), format!("differences {} for h = 1/10, 1/20, 1/40, orders {orders:.2?}", fmt_errors(&d)))
}

// 6

fn deviation_norms(traj: &[&Field], w: &CsrMatrix, t0: f64) -> Vec<f64> {
    traj.iter().map(|u| l2_norm(w, &u.values().iter().map(|v| v - t0).collect::<Vec<_>>())).collect()
}

fn first_increase(norms: &[f64]) -> Option<(usize, f64, f64)> {
    norms.windows(2).enumerate().find(|(_, p)| p[1] > p[0] + 1e-12).map(|(k, p)| (k + 1, p[0], p[1]))
}

/// Norm sequences (unweighted, capacity-weighted) of the monolithic and
/// two-level trajectories with `f = q = 0`, starting from a warm profile
/// with a hot spot inside the strip.
fn hot_spot_runs(rho_minus: f64) -> Result<[NormRun; 2], String> {
    let mut cfg = ExperimentConfig { source: SourceKind::None, ..ExperimentConfig::default() };
    cfg.material.rho_minus = CoefficientSpec::Constant(rho_minus);
    let material = cfg.material.to_model();
    let strip = cfg.geometry.strip().unwrap();
    let global = cfg.global_space(20).unwrap();
    let local = cfg.local_space(80).unwrap();
    let gamma = build_gamma(global.mesh(), strip).unwrap();
    let t0 = cfg.boundary_temperature;
    let sources = SourceSpec::new(t0)
        .with_initial(move |p| t0 + 5.0 * p.y + (3.0 * p.x).sin() * p.y + 30.0 * (-(p.x - 0.3).powi(2) / 0.01 - (p.y - 0.97).powi(2) / 0.001).exp());
    let time = TimeConfig::new(0.01, 0.0, 0.3);
    let plain = assemble_mass(&global, |_| 1.0);
    let weighted = assemble_mass(&global, |p| material.rho_at(p, &strip));

    let mono = solve_monolithic_unsteady(&global, &material, strip, &sources, &time).map_err(|e| e.to_string())?;
    let mono: Vec<&Field> = mono.iter().collect();
    let initial = Field::from_fn(Arc::clone(&global), |p| (sources.initial)(p));
    let tl = solve_two_level_unsteady(&global, &local, &material, &gamma, &sources, &time).map_err(|e| e.to_string())?;
    let tl: Vec<&Field> = std::iter::once(&initial).chain(tl.iter().map(|r| &r.global_field)).collect();
    Ok([
        ("monolithic".into(), deviation_norms(&mono, &plain, t0), deviation_norms(&mono, &weighted, t0)),
        ("two-level".into(), deviation_norms(&tl, &plain, t0), deviation_norms(&tl, &weighted, t0)),
    ])
}

fn dissipation(notes: &mut Vec<String>) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for rho_minus in [1.0, 5.0] {
        for (driver, plain, weighted) in hot_spot_runs(rho_minus)? {
            match first_increase(&plain) {
                None => detail.push(format!("rho- = {rho_minus} {driver}: nonincreasing over {} steps", plain.len() - 1)),
                Some((k, a, b)) => {
                    ok = false;
                    detail.push(format!("rho- = {rho_minus} {driver}: increases at step {k} ({a:.6} -> {b:.6})"));
                }
            }
            let w = match first_increase(&weighted) {
                None => "nonincreasing".to_string(),
                Some((k, a, b)) => format!("increases at step {k} ({a:.6} -> {b:.6})"),
            };
            notes.push(format!("capacity-weighted norm, rho- = {rho_minus} {driver}: {w}"));
        }
    }
    check(ok, detail.join("; "))
}

// 7

fn variable_coefficient(notes: &mut Vec<String>) -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.material.beta_minus = CoefficientSpec::Affine(twolevel_core::experiments::Affine { c0: 20.0, cx: 0.0, cy: 5.0 });
    cfg.mesh = MeshSpec { global_n: vec![20], local_n: vec![80, 160], reference_n: 200, degree: 2 };
    let study = run_steady_study(&cfg, None).map_err(|e| e.to_string())?;
    let level = &study.levels[0];
    let errors: Vec<f64> = level.two_level.iter().map(|r| r.error.relative_l2).collect();
    notes.push(format!("monolithic h = 1/20: {:.3e}", level.monolithic.relative_l2));

    // constant data through the constant and the variable code paths
    let c = ExperimentConfig::default();
    let strip = c.geometry.strip().unwrap();
    let global = c.global_space(20).unwrap();
    let local = c.local_space(80).unwrap();
    let gamma = build_gamma(global.mesh(), strip).unwrap();
    let sources = c.source.to_sources(c.boundary_temperature);
    let constant = MaterialModel::constant(1.0, 20.0, 1.0, 1.0);
    let variable = MaterialModel { beta_plus: Coefficient::affine(1.0, 0.0, 0.0), beta_minus: Coefficient::affine(20.0, 0.0, 0.0), ..constant.clone() };
    let tl = TwoLevelConfig { tol: 1e-10, cg_tol: 1e-13, ..TwoLevelConfig::default() };
    let a = solve_two_level_steady(&global, &local, &constant, &gamma, &sources, &tl).map_err(|e| e.to_string())?;
    let b = solve_two_level_steady(&global, &local, &variable, &gamma, &sources, &tl).map_err(|e| e.to_string())?;
    let ma = solve_monolithic_steady_tol(&global, &constant, strip, &sources, 1e-13).map_err(|e| e.to_string())?;
    let mb = solve_monolithic_steady_tol(&global, &variable, strip, &sources, 1e-13).map_err(|e| e.to_string())?;
    let path = rel(&b.global_field, &a.global_field).max(rel(&b.local_field, &a.local_field)).max(rel(&mb, &ma));

    check(
        errors.len() == 2 && strictly_decreasing(&errors) && path <= 1e-12,
        format!("two-level {} for 1/80, 1/160; constant vs variable path {path:.2e}", fmt_errors(&errors)),
    )
}

// 8

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let left = (m - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + m)) + f(m));
    let right = (b - m) / 6.0 * (f(m) + 4.0 * f(0.5 * (m + b)) + f(b));
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right
    } else {
        simpson(f, a, m, tol / 2.0, depth - 1) + simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

fn unit_oracles(_: &mut Vec<String>) -> Outcome {
    let mut failures = Vec::new();
    let tri = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
    let rule = TriangleRule::order2();
    let k = element_stiffness(&tri, 1, &rule, |_| 1.0);
    let k2 = element_stiffness(&tri, 1, &rule, |_| 2.0);
    let m = element_mass(&tri, 1, &rule, |_| 1.0);
    let m3 = element_mass(&tri, 1, &rule, |_| 3.0);
    let k_hand = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let mut dk = 0.0f64;
    let mut dm = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let m_hand = if a == b { 2.0 / 24.0 } else { 1.0 / 24.0 };
            dk = dk.max((k[a][b] - k_hand[a][b]).abs()).max((k2[a][b] - 2.0 * k_hand[a][b]).abs());
            dm = dm.max((m[a][b] - m_hand).abs()).max((m3[a][b] - 3.0 * m_hand).abs());
        }
    }
    if dk > 1e-14 || dm > 1e-14 {
        failures.push(format!("element matrices off by {dk:.1e} / {dm:.1e}"));
    }

    let space = |n: usize, p: usize| FeSpace::new(Arc::new(generate_rect_mesh(Rect::unit_square(), n, n).unwrap()), p).unwrap();
    for p in [1, 2] {
        let s = space(6, p);
        let ones = vec![1.0; s.n_dofs()];
        let kr = assemble_stiffness(&s, |q| 1.0 + q.x).matvec(&ones).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let total: f64 = assemble_mass(&s, |_| 3.0).matvec(&ones).iter().sum();
        if kr > 1e-13 || (total - 3.0).abs() > 1e-13 {
            failures.push(format!("P{p}: stiffness row sum {kr:.1e}, total mass {total}"));
        }
    }

    let mut pu = 0.0f64;
    for (n, rect, nx, ny, p) in [
        (20, Rect::new(0.0, 0.95, 1.0, 1.0).unwrap(), 80, 4, 2),
        (7, Rect::new(0.0, 0.95, 1.0, 1.0).unwrap(), 13, 1, 1),
        (5, Rect::new(0.13, 0.4, 0.71, 0.66).unwrap(), 9, 5, 2),
    ] {
        let g = space(n, p);
        let l = FeSpace::new(Arc::new(Mesh::structured(rect, nx, ny, SideTags::INTERFACE).unwrap()), p).unwrap();
        let gq = build_gamma_quadrature(&g, &l, &build_gamma(g.mesh(), rect).unwrap()).unwrap();
        let sum: f64 = assemble_gamma_density_load(&gq, |_| 1.0).iter().sum();
        pu = pu.max((sum - gq.total_length()).abs());
        if gq.subsegments().iter().any(|s| s.class == GammaClass::OnDirichletBoundary) {
            failures.push("subregion touches the Dirichlet side".into());
        }
    }
    if pu > 1e-12 {
        failures.push(format!("delta-load partition of unity off by {pu:.1e}"));
    }

    // layered-slab flux through the strip: the bottom side carries 0.95, the top -0.95
    let strip = Rect::new(0.0, 0.95, 1.0, 1.0).unwrap();
    let g = space(20, 1);
    let l = FeSpace::new(Arc::new(Mesh::structured(strip, 20, 1, SideTags::INTERFACE).unwrap()), 1).unwrap();
    let gq = build_gamma_quadrature(&g, &l, &build_gamma(g.mesh(), strip).unwrap()).unwrap();
    let u = Field::from_fn(Arc::clone(&l), |p| 20.95 + (p.y - 0.95) / 20.0);
    let bottom: f64 = assemble_gamma_density_load(&gq, |gp| {
        if gp.normal != [0.0, -1.0] {
            return 0.0;
        }
        let d = u.gradient_in(gp.local_triangle, gp.local_bary);
        -19.0 * (d[0] * gp.normal[0] + d[1] * gp.normal[1])
    })
    .iter()
    .sum();
    let full: f64 = assemble_delta_jump_load(&gq, &u, &MaterialModel::constant(1.0, 20.0, 1.0, 1.0)).unwrap().iter().sum();
    if (bottom - 0.95).abs() > 1e-12 || full.abs() > 1e-12 {
        failures.push(format!("slab jump load: bottom {bottom}, total {full}"));
    }

    let q = |x: f64| 2000.0 * (-(0.1 - x).powi(2) / 0.0004).exp();
    let oracle = simpson(&q, 0.0, 1.0, 1e-10, 40);
    let load: f64 = assemble_neumann_load(&space(20, 2), |x, _| q(x), 0.0, &[BoundaryTag::NeumannTop]).iter().sum();
    let unit: f64 = assemble_neumann_load(&space(20, 2), |_, _| 1.0, 0.0, &[BoundaryTag::NeumannTop]).iter().sum();
    if (load - oracle).abs() > 1e-2 || (unit - 1.0).abs() > 1e-14 {
        failures.push(format!("Neumann load {load:.4} vs oracle {oracle:.4}, unit flux {unit}"));
    }

    let detail = format!("Gaussian flux load {load:.4} (oracle {oracle:.4}), partition of unity {pu:.1e}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(failures.join("; "))
    }
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "slab fixed point", limit: Duration::from_secs(5), run: slab_fixed_point, supplement: None },
    Criterion { id: 2, name: "degenerate equivalence", limit: Duration::from_secs(5), run: degenerate_equivalence, supplement: None },
    Criterion { id: 3, name: "steady monotonicity", limit: Duration::from_secs(300), run: steady_monotonicity, supplement: Some(steady_monotonicity_auto) },
    Criterion { id: 4, name: "unsteady reproduction", limit: Duration::from_secs(900), run: unsteady_reproduction, supplement: None },
    Criterion { id: 5, name: "consistency", limit: Duration::from_secs(120), run: consistency, supplement: None },
    Criterion { id: 6, name: "dissipation", limit: Duration::from_secs(60), run: dissipation, supplement: None },
    Criterion { id: 7, name: "variable coefficient", limit: Duration::from_secs(300), run: variable_coefficient, supplement: None },
    Criterion { id: 8, name: "unit oracles", limit: Duration::from_secs(10), run: unit_oracles, supplement: None },
];

fn main() -> ExitCode {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    let mut ran = 0;
    for c in CRITERIA.iter().filter(|c| selected(c.name)) {
        ran += 1;
        let mut notes = Vec::new();
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)(&mut notes))).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; runtime over {:?}", c.limit)),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!("criterion {} ({}): {} [{:.1} s] {detail}", c.id, c.name, if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        if let Some(extra) = c.supplement {
            extra(&mut notes);
        }
        for n in notes {
            println!("    {n}");
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
