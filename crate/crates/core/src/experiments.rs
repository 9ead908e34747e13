//! Experiment configuration and the study drivers behind the CLI.
//!
//! Mesh sizes are given as division counts `n` (cell size `1/n`). Every
//! config field has a default, so a file only needs the values it changes.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};

use crate::assembly::{Coefficient, MaterialModel, SourceSpec};
use crate::error::{Error, Result};
use crate::fe::{AnalyticField, FeSpace, Field};
use crate::geometry::{build_gamma, generate_rect_mesh, Mesh, Point, Rect, SideTags};
use crate::io::{ensure_dir, write_csv, write_vtk, Table, Value};
use crate::metrics::{composite_relative_l2_error, probe_timeseries, relative_l2_error_refined, subdivisions_for, CompositeField, ErrorReport, ProbeRow};
use crate::solvers::{
    solve_monolithic_steady_tol, solve_monolithic_unsteady_with, solve_two_level_steady, solve_two_level_unsteady_with, Theta, TimeConfig, TwoLevelConfig,
    TwoLevelResult, DEFAULT_MAX_ITER, DEFAULT_STEADY_TOL, DEFAULT_STEP_TOL,
};
use crate::sparse::DEFAULT_CG_TOL;

/// Slack for deciding which phase of a laser cycle a step time falls in.
const PHASE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    pub length: f64,
    pub height: f64,
    /// Thickness of the subregion along the top of the domain.
    pub strip_height: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { length: 1.0, height: 1.0, strip_height: 0.05 }
    }
}

impl Geometry {
    pub fn domain(&self) -> Result<Rect> {
        Rect::new(0.0, 0.0, self.length, self.height)
    }

    pub fn strip(&self) -> Result<Rect> {
        Rect::new(0.0, self.height - self.strip_height, self.length, self.height)
    }
}

/// `c0 + cx x + cy y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub c0: f64,
    #[serde(default)]
    pub cx: f64,
    #[serde(default)]
    pub cy: f64,
}

/// A number, or an affine function written as `{"c0": .., "cx": .., "cy": ..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(f64),
    Affine(Affine),
}

impl CoefficientSpec {
    pub fn to_coefficient(self) -> Coefficient {
        match self {
            CoefficientSpec::Constant(c) => Coefficient::Constant(c),
            CoefficientSpec::Affine(a) => Coefficient::affine(a.c0, a.cx, a.cy),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialSpec {
    pub beta_plus: CoefficientSpec,
    pub beta_minus: CoefficientSpec,
    pub rho_plus: CoefficientSpec,
    pub rho_minus: CoefficientSpec,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        Self {
            beta_plus: CoefficientSpec::Constant(1.0),
            beta_minus: CoefficientSpec::Constant(20.0),
            rho_plus: CoefficientSpec::Constant(1.0),
            rho_minus: CoefficientSpec::Constant(5.0),
        }
    }
}

impl MaterialSpec {
    pub fn to_model(&self) -> MaterialModel {
        MaterialModel {
            beta_plus: self.beta_plus.to_coefficient(),
            beta_minus: self.beta_minus.to_coefficient(),
            rho_plus: self.rho_plus.to_coefficient(),
            rho_minus: self.rho_minus.to_coefficient(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserParams {
    pub amplitude: f64,
    pub width: f64,
    /// Sweep speed of the spot along the top side.
    pub speed: f64,
    pub heating: f64,
    pub cooling: f64,
}

impl Default for LaserParams {
    fn default() -> Self {
        Self { amplitude: 2000.0, width: 0.0005, speed: 10.0, heating: 0.1, cooling: 0.07 }
    }
}

/// Flux of the moving spot: a Gaussian centred at `speed * (t - t_start)`
/// during the heating part of each cycle, zero while cooling.
pub fn laser_flux(p: &LaserParams, x: f64, t: f64) -> f64 {
    let cycle = p.heating + p.cooling;
    let start = ((t + PHASE_EPS) / cycle).floor() * cycle;
    let s = t - start;
    if s <= p.heating + PHASE_EPS {
        p.amplitude * (-(p.speed * s - x).powi(2) / p.width).exp()
    } else {
        0.0
    }
}

/// Flux on the top side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    /// `amplitude * exp(-(center - x)^2 / width)`.
    GaussianFlux {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    Laser(LaserParams),
    ConstantFlux {
        value: f64,
    },
    None,
}

impl Default for SourceKind {
    fn default() -> Self {
        SourceKind::GaussianFlux { amplitude: 2000.0, center: 0.1, width: 0.0004 }
    }
}

impl SourceKind {
    pub fn to_sources(self, boundary_temperature: f64) -> SourceSpec {
        let s = SourceSpec::new(boundary_temperature);
        match self {
            SourceKind::GaussianFlux { amplitude, center, width } => s.with_flux(move |x, _| amplitude * (-(center - x).powi(2) / width).exp()),
            SourceKind::Laser(p) => s.with_flux(move |x, t| laser_flux(&p, x, t)),
            SourceKind::ConstantFlux { value } => s.with_flux(move |_, _| value),
            SourceKind::None => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshSpec {
    /// Global division counts, one study level each.
    pub global_n: Vec<usize>,
    /// Local division counts along the strip length.
    pub local_n: Vec<usize>,
    pub reference_n: usize,
    pub degree: usize,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { global_n: vec![20], local_n: vec![80, 160, 240], reference_n: 200, degree: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoLevelSpec {
    /// A number in `(0, 1]` or `"auto"`.
    #[serde(with = "theta_serde")]
    pub theta: Theta,
    pub tol: f64,
    pub max_iter: usize,
    pub fail_on_max_iter: bool,
    pub cg_tol: f64,
}

impl Default for TwoLevelSpec {
    fn default() -> Self {
        Self { theta: Theta::Auto, tol: DEFAULT_STEADY_TOL, max_iter: DEFAULT_MAX_ITER, fail_on_max_iter: true, cg_tol: DEFAULT_CG_TOL }
    }
}

impl TwoLevelSpec {
    pub fn to_config(&self) -> TwoLevelConfig {
        TwoLevelConfig { theta: self.theta, tol: self.tol, max_iter: self.max_iter, fail_on_max_iter: self.fail_on_max_iter, cg_tol: self.cg_tol }
    }
}

mod theta_serde {
    use super::Theta;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Keyword(String),
    }

    pub fn serialize<S: Serializer>(theta: &Theta, s: S) -> Result<S::Ok, S::Error> {
        match theta {
            Theta::Fixed(t) => Repr::Value(*t),
            Theta::Auto => Repr::Keyword("auto".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Theta, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(t) => Ok(Theta::Fixed(t)),
            Repr::Keyword(k) if k == "auto" => Ok(Theta::Auto),
            Repr::Keyword(k) => Err(serde::de::Error::custom(format!("theta must be a number or \"auto\", got {k:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeSpec {
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Two-level tolerance per time step.
    pub step_tol: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { dt: 0.01, t0: 0.0, t_end: 0.85, step_tol: DEFAULT_STEP_TOL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub vtk: bool,
    /// Unsteady VTK snapshot interval in steps; 0 writes the final step only.
    pub snapshot_every: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), vtk: false, snapshot_every: 0 }
    }
}

fn default_probes() -> Vec<[f64; 2]> {
    [0.5, 0.9, 0.95, 0.975, 1.0].iter().map(|&y| [0.5, y]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub geometry: Geometry,
    pub material: MaterialSpec,
    pub source: SourceKind,
    pub boundary_temperature: f64,
    pub mesh: MeshSpec,
    pub two_level: TwoLevelSpec,
    /// Present for unsteady runs.
    pub time: Option<TimeSpec>,
    pub probes: Vec<[f64; 2]>,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            material: MaterialSpec::default(),
            source: SourceKind::default(),
            boundary_temperature: 20.0,
            mesh: MeshSpec::default(),
            two_level: TwoLevelSpec::default(),
            time: None,
            probes: default_probes(),
            output: OutputSpec::default(),
        }
    }
}

fn is_whole(v: f64) -> bool {
    (v - v.round()).abs() < 1e-9 && v.round() >= 1.0
}

impl ExperimentConfig {
    /// Layered slab with a uniform unit flux, matched meshes, P1.
    pub fn slab() -> Self {
        Self {
            material: MaterialSpec { rho_minus: CoefficientSpec::Constant(1.0), ..MaterialSpec::default() },
            source: SourceKind::ConstantFlux { value: 1.0 },
            mesh: MeshSpec { global_n: vec![20], local_n: vec![20], reference_n: 200, degree: 1 },
            two_level: TwoLevelSpec { tol: 1e-10, cg_tol: 1e-13, ..TwoLevelSpec::default() },
            ..Self::default()
        }
    }

    /// Smooth-flux configuration for the two-level versus monolithic
    /// comparison under simultaneous refinement.
    pub fn consistency() -> Self {
        Self {
            geometry: Geometry { strip_height: 0.2, ..Geometry::default() },
            source: SourceKind::GaussianFlux { amplitude: 10.0, center: 0.5, width: 0.05 },
            mesh: MeshSpec { global_n: vec![10, 20, 40], local_n: vec![], reference_n: 200, degree: 2 },
            two_level: TwoLevelSpec { tol: 1e-10, cg_tol: 1e-12, ..TwoLevelSpec::default() },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let g = &self.geometry;
        if !(g.length > 0.0 && g.height > 0.0) {
            return bad(format!("domain size must be positive, got {} x {}", g.length, g.height));
        }
        if !(g.strip_height > 0.0 && g.strip_height < g.height) {
            return bad(format!("strip_height must lie in (0, height), got {}", g.strip_height));
        }
        if self.mesh.degree != 1 && self.mesh.degree != 2 {
            return bad(format!("degree must be 1 or 2, got {}", self.mesh.degree));
        }
        if self.mesh.global_n.is_empty() {
            return bad("mesh.global_n is empty".into());
        }
        for &n in self.mesh.global_n.iter().chain([&self.mesh.reference_n]) {
            if n == 0 || !is_whole(g.length * n as f64) || !is_whole(g.height * n as f64) {
                return bad(format!("mesh size 1/{n} does not divide the {} x {} domain", g.length, g.height));
            }
        }
        for &n in &self.mesh.local_n {
            if n == 0 || !is_whole(g.length * n as f64) {
                return bad(format!("local mesh size 1/{n} does not divide the length {}", g.length));
            }
        }
        if let SourceKind::Laser(p) = self.source {
            if !(p.width > 0.0 && p.heating > 0.0 && p.cooling >= 0.0) {
                return bad("laser width and heating time must be positive".into());
            }
        }
        let domain = g.domain()?;
        if let Some(p) = self.probes.iter().find(|p| !domain.contains(Point::new(p[0], p[1]), 1e-12)) {
            return bad(format!("probe ({}, {}) lies outside the domain", p[0], p[1]));
        }
        self.two_level.to_config().validate()?;
        if let Some(t) = &self.time {
            self.time_config(t).validate()?;
        }
        Ok(())
    }

    fn time_config(&self, t: &TimeSpec) -> TimeConfig {
        let mut tc = TimeConfig::new(t.dt, t.t0, t.t_end);
        tc.per_step = TwoLevelConfig { tol: t.step_tol, ..self.two_level.to_config() };
        tc
    }

    pub fn global_space(&self, n: usize) -> Result<Arc<FeSpace>> {
        let g = &self.geometry;
        let mesh = generate_rect_mesh(g.domain()?, (g.length * n as f64).round() as usize, (g.height * n as f64).round() as usize)?;
        FeSpace::new(Arc::new(mesh), self.mesh.degree)
    }

    /// Local mesh with `n_local` divisions per unit length; the strip gets
    /// `max(1, round(strip_height * n_local))` layers.
    pub fn local_space(&self, n_local: usize) -> Result<Arc<FeSpace>> {
        let g = &self.geometry;
        let nx = (g.length * n_local as f64).round() as usize;
        let ny = ((g.strip_height * n_local as f64).round() as usize).max(1);
        FeSpace::new(Arc::new(Mesh::structured(g.strip()?, nx, ny, SideTags::INTERFACE)?), self.mesh.degree)
    }

    fn probe_points(&self) -> Vec<Point> {
        self.probes.iter().map(|p| Point::new(p[0], p[1])).collect()
    }
}

/// Reads a JSON config. Unknown keys are rejected, all of them listed.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.to_path_buf(), message },
        other => other,
    })
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let parse_err = |message: String| Error::Parse { path: PathBuf::from("<config>"), message };
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_ignored::deserialize(&mut de, |p| unknown.push(p.to_string())).map_err(|e| parse_err(e.to_string()))?;
    de.end().map_err(|e| parse_err(e.to_string()))?;
    if !unknown.is_empty() {
        return Err(parse_err(format!("unknown keys: {}", unknown.join(", "))));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn context<T>(what: impl FnOnce() -> String) -> impl FnOnce(Error) -> Result<T> {
    move |e| Err(Error::Study { context: what(), source: Box::new(e) })
}

fn h_value(n: usize) -> Value {
    Value::Float(1.0 / n as f64)
}

fn output_dir(out: Option<&Path>) -> Result<Option<&Path>> {
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoLevelRun {
    pub n_local: usize,
    pub iterations: usize,
    pub theta: f64,
    /// Local field on the subregion, global field elsewhere.
    pub error: ErrorReport,
    /// Global field alone.
    pub global_error: ErrorReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyLevel {
    pub n_global: usize,
    pub monolithic: ErrorReport,
    pub two_level: Vec<TwoLevelRun>,
}

impl SteadyLevel {
    /// `h_minus,rel_l2_error`, with the monolithic solution as the `h_minus = h` row.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["h_minus", "rel_l2_error"]);
        t.push(vec![h_value(self.n_global), self.monolithic.relative_l2.into()]);
        for r in &self.two_level {
            t.push(vec![h_value(r.n_local), r.error.relative_l2.into()]);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStudy {
    pub reference_n: usize,
    pub levels: Vec<SteadyLevel>,
}

impl SteadyStudy {
    pub fn summary(&self) -> Table {
        let mut t = Table::new(&["h", "h_minus", "iterations", "theta", "rel_l2_error", "global_rel_l2_error"]);
        for l in &self.levels {
            t.push(vec![
                h_value(l.n_global),
                h_value(l.n_global),
                0usize.into(),
                Value::Float(f64::NAN),
                l.monolithic.relative_l2.into(),
                l.monolithic.relative_l2.into(),
            ]);
            for r in &l.two_level {
                t.push(vec![
                    h_value(l.n_global),
                    h_value(r.n_local),
                    r.iterations.into(),
                    r.theta.into(),
                    r.error.relative_l2.into(),
                    r.global_error.relative_l2.into(),
                ]);
            }
        }
        t
    }
}

/// Fine monolithic reference, then per global level the monolithic
/// solution and a two-level solution for every local size finer than the
/// global one.
pub fn run_steady_study(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SteadyStudy> {
    cfg.validate()?;
    let out = output_dir(out)?;
    let material = cfg.material.to_model();
    let sources = cfg.source.to_sources(cfg.boundary_temperature);
    let strip = cfg.geometry.strip()?;
    let tl_cfg = cfg.two_level.to_config();

    info!("reference: h = 1/{}", cfg.mesh.reference_n);
    let reference_space = cfg.global_space(cfg.mesh.reference_n)?;
    let reference = solve_monolithic_steady_tol(&reference_space, &material, strip, &sources, tl_cfg.cg_tol)
        .or_else(context(|| format!("reference solve (h = 1/{})", cfg.mesh.reference_n)))?;
    if let (Some(dir), true) = (out, cfg.output.vtk) {
        write_vtk(&reference, "u", dir.join("reference.vtk"))?;
    }
    let h_ref = 1.0 / cfg.mesh.reference_n as f64;

    let mut levels = Vec::new();
    for &n in &cfg.mesh.global_n {
        let global = cfg.global_space(n)?;
        let s_global = subdivisions_for(1.0 / n as f64, h_ref);
        let mono =
            solve_monolithic_steady_tol(&global, &material, strip, &sources, tl_cfg.cg_tol).or_else(context(|| format!("monolithic solve (h = 1/{n})")))?;
        let monolithic = relative_l2_error_refined(&mono, &reference, s_global)?;
        info!("h = 1/{n}: monolithic error {:.4e}", monolithic.relative_l2);
        if let (Some(dir), true) = (out, cfg.output.vtk) {
            write_vtk(&mono, "u", dir.join(format!("monolithic_h{n}.vtk")))?;
        }
        let gamma = build_gamma(global.mesh(), strip)?;
        let mut two_level = Vec::new();
        for &nl in cfg.mesh.local_n.iter().filter(|&&nl| nl > n) {
            let local = cfg.local_space(nl)?;
            let r = solve_two_level_steady(&global, &local, &material, &gamma, &sources, &tl_cfg)
                .or_else(context(|| format!("two-level solve (h = 1/{n}, h_minus = 1/{nl}, theta = {:?})", tl_cfg.theta)))?;
            let error = composite_relative_l2_error(&r.global_field, &r.local_field, &reference, s_global, subdivisions_for(1.0 / nl as f64, h_ref))?;
            let global_error = relative_l2_error_refined(&r.global_field, &reference, s_global)?;
            info!("h = 1/{n}, h_minus = 1/{nl}: {} iterations, error {:.4e}", r.iterations, error.relative_l2);
            if let (Some(dir), true) = (out, cfg.output.vtk) {
                write_vtk(&r.global_field, "u", dir.join(format!("two_level_h{n}_hm{nl}_global.vtk")))?;
                write_vtk(&r.local_field, "u", dir.join(format!("two_level_h{n}_hm{nl}_local.vtk")))?;
            }
            two_level.push(TwoLevelRun { n_local: nl, iterations: r.iterations, theta: r.theta, error, global_error });
        }
        let level = SteadyLevel { n_global: n, monolithic, two_level };
        if let Some(dir) = out {
            write_csv(&level.table(), dir.join(format!("steady_h{n}.csv")))?;
        }
        levels.push(level);
    }
    let study = SteadyStudy { reference_n: cfg.mesh.reference_n, levels };
    if let Some(dir) = out {
        write_csv(&study.summary(), dir.join("steady_summary.csv"))?;
    }
    Ok(study)
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnsteadyRun {
    /// `None` for the monolithic run.
    pub n_local: Option<usize>,
    /// Relative L2 error at steps `1..=N`.
    pub step_errors: Vec<f64>,
    /// Two-level iterations per step; empty for the monolithic run.
    pub iterations: Vec<usize>,
    pub probes: Vec<ProbeRow>,
}

impl UnsteadyRun {
    pub fn mean_error(&self) -> f64 {
        self.step_errors.iter().sum::<f64>() / self.step_errors.len().max(1) as f64
    }

    fn label(&self) -> String {
        match self.n_local {
            Some(nl) => format!("two_level_hm{nl}"),
            None => "monolithic".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnsteadyLevel {
    pub n_global: usize,
    pub monolithic: UnsteadyRun,
    pub two_level: Vec<UnsteadyRun>,
}

impl UnsteadyLevel {
    /// Time-averaged errors as `h_minus,rel_l2_error`, monolithic row first.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["h_minus", "rel_l2_error"]);
        t.push(vec![h_value(self.n_global), self.monolithic.mean_error().into()]);
        for r in &self.two_level {
            t.push(vec![h_value(r.n_local.expect("two-level run")), r.mean_error().into()]);
        }
        t
    }

    /// Per-step errors, one column per run.
    pub fn error_table(&self, times: &[f64]) -> Table {
        let runs: Vec<&UnsteadyRun> = std::iter::once(&self.monolithic).chain(&self.two_level).collect();
        let labels: Vec<String> = runs.iter().map(|r| r.label()).collect();
        let mut header = vec!["t"];
        header.extend(labels.iter().map(String::as_str));
        let mut t = Table::new(&header);
        for (k, &time) in times.iter().enumerate() {
            let mut row = vec![Value::Float(time)];
            row.extend(runs.iter().map(|r| Value::Float(r.step_errors[k])));
            t.push(row);
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnsteadyStudy {
    /// Step times `t_1..t_N`.
    pub times: Vec<f64>,
    pub reference_probes: Vec<ProbeRow>,
    pub levels: Vec<UnsteadyLevel>,
}

pub fn probe_table(rows: &[ProbeRow]) -> Table {
    let mut t = Table::new(&["t", "point_id", "value"]);
    for r in rows {
        t.push(vec![r.t.into(), r.point_id.into(), r.value.into()]);
    }
    t
}

fn snapshot_due(cfg: &ExperimentConfig, n: usize, n_steps: usize) -> bool {
    cfg.output.vtk && (n == n_steps || (cfg.output.snapshot_every > 0 && n.is_multiple_of(cfg.output.snapshot_every)))
}

/// Backward Euler reference on the fine mesh, then per global level a
/// monolithic trajectory and one two-level trajectory per local size.
/// Errors are taken at every step against the reference at the same time.
pub fn run_unsteady_study(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<UnsteadyStudy> {
    cfg.validate()?;
    let out = output_dir(out)?;
    let time_spec = cfg.time.as_ref().ok_or_else(|| Error::InvalidConfig("unsteady study needs a \"time\" section".into()))?;
    let time = cfg.time_config(time_spec);
    let n_steps = time.n_steps();
    let material = cfg.material.to_model();
    let sources = cfg.source.to_sources(cfg.boundary_temperature);
    let strip = cfg.geometry.strip()?;
    let points = cfg.probe_points();
    let h_ref = 1.0 / cfg.mesh.reference_n as f64;

    info!("reference: h = 1/{}, {n_steps} steps", cfg.mesh.reference_n);
    let reference_space = cfg.global_space(cfg.mesh.reference_n)?;
    let mut reference = Vec::with_capacity(n_steps + 1);
    let mut reference_probes = Vec::new();
    solve_monolithic_unsteady_with(&reference_space, &material, strip, &sources, &time, |n, t, u| {
        reference_probes.extend(probe_timeseries(&[(t, u)], &points)?);
        if let (Some(dir), true) = (out, snapshot_due(cfg, n, n_steps)) {
            write_vtk(u, "u", dir.join(format!("reference_{n:04}.vtk")))?;
        }
        reference.push(u.clone());
        Ok(())
    })
    .or_else(context(|| format!("reference run (h = 1/{})", cfg.mesh.reference_n)))?;
    if let Some(dir) = out {
        write_csv(&probe_table(&reference_probes), dir.join("probes_reference.csv"))?;
    }

    let mut levels = Vec::new();
    for &n in &cfg.mesh.global_n {
        let global = cfg.global_space(n)?;
        let s_global = subdivisions_for(1.0 / n as f64, h_ref);
        let mut mono = UnsteadyRun { n_local: None, step_errors: Vec::with_capacity(n_steps), iterations: vec![], probes: vec![] };
        solve_monolithic_unsteady_with(&global, &material, strip, &sources, &time, |k, t, u| {
            mono.probes.extend(probe_timeseries(&[(t, u)], &points)?);
            if k > 0 {
                mono.step_errors.push(relative_l2_error_refined(u, &reference[k], s_global)?.relative_l2);
            }
            if let (Some(dir), true) = (out, snapshot_due(cfg, k, n_steps)) {
                write_vtk(u, "u", dir.join(format!("monolithic_h{n}_{k:04}.vtk")))?;
            }
            Ok(())
        })
        .or_else(context(|| format!("monolithic run (h = 1/{n})")))?;
        info!("h = 1/{n}: monolithic mean error {:.4e}", mono.mean_error());

        let gamma = build_gamma(global.mesh(), strip)?;
        let mut two_level = Vec::new();
        for &nl in cfg.mesh.local_n.iter().filter(|&&nl| nl > n) {
            let local = cfg.local_space(nl)?;
            let s_local = subdivisions_for(1.0 / nl as f64, h_ref);
            let initial = Field::from_fn(Arc::clone(&global), |p| (sources.initial)(p));
            let initial_local = Field::from_fn(Arc::clone(&local), |p| (sources.initial)(p));
            let mut run = UnsteadyRun { n_local: Some(nl), step_errors: Vec::with_capacity(n_steps), iterations: vec![], probes: vec![] };
            run.probes.extend(probe_timeseries(&[(time.t0, CompositeField { global: &initial, local: &initial_local })], &points)?);
            solve_two_level_unsteady_with(&global, &local, &material, &gamma, &sources, &time, |k, t, r: &TwoLevelResult| {
                let pair = CompositeField { global: &r.global_field, local: &r.local_field };
                run.probes.extend(probe_timeseries(&[(t, pair)], &points)?);
                run.step_errors.push(composite_relative_l2_error(&r.global_field, &r.local_field, &reference[k], s_global, s_local)?.relative_l2);
                run.iterations.push(r.iterations);
                if let (Some(dir), true) = (out, snapshot_due(cfg, k, n_steps)) {
                    write_vtk(&r.global_field, "u", dir.join(format!("two_level_h{n}_hm{nl}_global_{k:04}.vtk")))?;
                    write_vtk(&r.local_field, "u", dir.join(format!("two_level_h{n}_hm{nl}_local_{k:04}.vtk")))?;
                }
                Ok(())
            })
            .or_else(context(|| format!("two-level run (h = 1/{n}, h_minus = 1/{nl}, theta = {:?})", time.per_step.theta)))?;
            info!("h = 1/{n}, h_minus = 1/{nl}: mean error {:.4e}, {} iterations", run.mean_error(), run.iterations.iter().sum::<usize>());
            two_level.push(run);
        }
        let level = UnsteadyLevel { n_global: n, monolithic: mono, two_level };
        if let Some(dir) = out {
            let times: Vec<f64> = (1..=n_steps).map(|k| time.time(k)).collect();
            write_csv(&level.table(), dir.join(format!("unsteady_h{n}.csv")))?;
            write_csv(&level.error_table(&times), dir.join(format!("unsteady_errors_h{n}.csv")))?;
            write_csv(&probe_table(&level.monolithic.probes), dir.join(format!("probes_monolithic_h{n}.csv")))?;
            for r in &level.two_level {
                write_csv(&probe_table(&r.probes), dir.join(format!("probes_h{n}_hm{}.csv", r.n_local.expect("two-level run"))))?;
            }
        }
        levels.push(level);
    }
    Ok(UnsteadyStudy { times: (1..=n_steps).map(|k| time.time(k)).collect(), reference_probes, levels })
}

/// Exact solution of the layered slab: unit flux `q` through the top,
/// temperature `T0` at the bottom, no dependence on x.
pub fn slab_profile(cfg: &ExperimentConfig) -> Result<impl Fn(Point) -> f64> {
    let (q, bp, bm) = match (cfg.source, cfg.material.beta_plus, cfg.material.beta_minus) {
        (SourceKind::ConstantFlux { value }, CoefficientSpec::Constant(bp), CoefficientSpec::Constant(bm)) => (value, bp, bm),
        _ => return Err(Error::InvalidConfig("slab verification needs a constant flux and constant conductivities".into())),
    };
    let t0 = cfg.boundary_temperature;
    let y_gamma = cfg.geometry.height - cfg.geometry.strip_height;
    Ok(move |p: Point| if p.y <= y_gamma { t0 + q * p.y / bp } else { t0 + q * y_gamma / bp + q * (p.y - y_gamma) / bm })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlabCheck {
    pub n_global: usize,
    pub n_local: usize,
    pub iterations: usize,
    pub theta: f64,
    pub global_error: f64,
    pub local_error: f64,
    /// Global solution at the middle of the top side.
    pub top_value: f64,
}

/// Two-level solutions of the slab compared with the exact profile. Local
/// sizes not finer than the global one are included here.
pub fn run_slab_verification(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<SlabCheck>> {
    cfg.validate()?;
    let out = output_dir(out)?;
    let exact = slab_profile(cfg)?;
    let material = cfg.material.to_model();
    let sources = cfg.source.to_sources(cfg.boundary_temperature);
    let strip = cfg.geometry.strip()?;
    let tl_cfg = cfg.two_level.to_config();
    let mut checks = Vec::new();
    for &n in &cfg.mesh.global_n {
        let global = cfg.global_space(n)?;
        let gamma = build_gamma(global.mesh(), strip)?;
        let mut table = Table::new(&["h_minus", "rel_l2_error"]);
        for &nl in &cfg.mesh.local_n {
            let local = cfg.local_space(nl)?;
            let r = solve_two_level_steady(&global, &local, &material, &gamma, &sources, &tl_cfg)
                .or_else(context(|| format!("slab two-level solve (h = 1/{n}, h_minus = 1/{nl}, theta = {:?})", tl_cfg.theta)))?;
            let global_error = relative_l2_error_refined(&r.global_field, &AnalyticField(&exact), 1)?.relative_l2;
            let local_error = relative_l2_error_refined(&r.local_field, &AnalyticField(&exact), 1)?.relative_l2;
            let top_value = r.global_field.value_at(Point::new(0.5 * cfg.geometry.length, cfg.geometry.height))?;
            table.push(vec![h_value(nl), global_error.max(local_error).into()]);
            checks.push(SlabCheck { n_global: n, n_local: nl, iterations: r.iterations, theta: r.theta, global_error, local_error, top_value });
        }
        if let Some(dir) = out {
            write_csv(&table, dir.join(format!("slab_h{n}.csv")))?;
        }
    }
    Ok(checks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyLevel {
    pub n: usize,
    pub iterations: usize,
    /// Two-level pair against the monolithic solution on the same mesh size.
    pub difference: f64,
    /// Local field against the global field on the subregion.
    pub local_vs_global: f64,
}

/// Empirical orders between successive levels of a halving sequence.
pub fn empirical_orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Two-level against monolithic with `h_minus = h` for every global size;
/// the `local_n` list is not used.
pub fn run_consistency_study(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<ConsistencyLevel>> {
    cfg.validate()?;
    let out = output_dir(out)?;
    let material = cfg.material.to_model();
    let sources = cfg.source.to_sources(cfg.boundary_temperature);
    let strip = cfg.geometry.strip()?;
    let tl_cfg = cfg.two_level.to_config();
    let mut levels = Vec::new();
    for &n in &cfg.mesh.global_n {
        let global = cfg.global_space(n)?;
        let local = cfg.local_space(n)?;
        let mono =
            solve_monolithic_steady_tol(&global, &material, strip, &sources, tl_cfg.cg_tol).or_else(context(|| format!("monolithic solve (h = 1/{n})")))?;
        let gamma = build_gamma(global.mesh(), strip)?;
        let r = solve_two_level_steady(&global, &local, &material, &gamma, &sources, &tl_cfg)
            .or_else(context(|| format!("two-level solve (h = h_minus = 1/{n}, theta = {:?})", tl_cfg.theta)))?;
        let difference = composite_relative_l2_error(&r.global_field, &r.local_field, &mono, 1, 1)?.relative_l2;
        let local_vs_global = relative_l2_error_refined(&r.local_field, &r.global_field, 1)?.relative_l2;
        info!("h = 1/{n}: difference {difference:.4e}, {} iterations", r.iterations);
        levels.push(ConsistencyLevel { n, iterations: r.iterations, difference, local_vs_global });
    }
    if let Some(dir) = out {
        let orders = empirical_orders(&levels.iter().map(|l| l.difference).collect::<Vec<_>>());
        let mut t = Table::new(&["h", "rel_l2_difference", "order", "local_vs_global", "iterations"]);
        for (k, l) in levels.iter().enumerate() {
            let order = if k == 0 { f64::NAN } else { orders[k - 1] };
            t.push(vec![h_value(l.n), l.difference.into(), order.into(), l.local_vs_global.into(), l.iterations.into()]);
        }
        write_csv(&t, dir.join("consistency.csv"))?;
    }
    Ok(levels)
}

/// Parsed config echoed back as pretty JSON.
pub fn echo_config(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serialises")
}
