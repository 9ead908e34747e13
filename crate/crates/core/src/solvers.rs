//! Monolithic and two-level drivers for the steady and unsteady problems.

use std::sync::Arc;

use log::{debug, warn};

use crate::assembly::{add_scaled, assemble_mass, assemble_neumann_load, assemble_stiffness, assemble_volume_load, MaterialModel, Region, SourceSpec};
use crate::coupling::{
    assemble_delta_jump_load, assemble_unsteady_volumetric_coupling, assemble_variable_coeff_coupling, build_gamma_quadrature, extract_trace_dirichlet,
    GammaQuadrature, OmegaMinusQuadrature,
};
use crate::error::{Error, Result};
use crate::fe::{FeSpace, Field};
use crate::geometry::{BoundaryTag, GammaPolyline, Rect};
use crate::sparse::{dot, ConstrainedSystem, CsrMatrix, DEFAULT_CG_TOL};

pub const DEFAULT_STEADY_TOL: f64 = 1e-8;
pub const DEFAULT_STEP_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Boundary tags that receive the flux `q`; the remaining Neumann sides are insulated.
pub const FLUX_TAGS: [BoundaryTag; 1] = [BoundaryTag::NeumannTop];

/// Relaxation parameter: a fixed value in `(0, 1]`, or `min(1, beta_plus / beta_minus)`
/// at the subregion centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theta {
    Fixed(f64),
    Auto,
}

impl Theta {
    pub fn resolve(self, material: &MaterialModel, omega_minus: &Rect) -> f64 {
        match self {
            Theta::Fixed(t) => t,
            Theta::Auto => material.beta_ratio(omega_minus.centroid()).min(1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelConfig {
    pub theta: Theta,
    /// Bound on the relative successive change in the global L2 norm.
    pub tol: f64,
    pub max_iter: usize,
    pub fail_on_max_iter: bool,
    pub cg_tol: f64,
}

impl Default for TwoLevelConfig {
    fn default() -> Self {
        Self { theta: Theta::Auto, tol: DEFAULT_STEADY_TOL, max_iter: DEFAULT_MAX_ITER, fail_on_max_iter: true, cg_tol: DEFAULT_CG_TOL }
    }
}

impl TwoLevelConfig {
    /// Defaults for the per-step iteration of the unsteady driver.
    pub fn per_step() -> Self {
        Self { tol: DEFAULT_STEP_TOL, ..Self::default() }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Theta::Fixed(theta);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if let Theta::Fixed(t) = self.theta {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidConfig(format!("theta must lie in (0, 1], got {t}")));
            }
        }
        if !(self.tol > 0.0) || !(self.cg_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub per_step: TwoLevelConfig,
}

impl TimeConfig {
    pub fn new(dt: f64, t0: f64, t_end: f64) -> Self {
        Self { dt, t0, t_end, per_step: TwoLevelConfig::per_step() }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_end > self.t0) {
            return Err(Error::InvalidConfig(format!("need dt > 0 and t_end > t0, got dt={}, [{}, {}]", self.dt, self.t0, self.t_end)));
        }
        let steps = (self.t_end - self.t0) / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("t_end - t0 = {} is not a multiple of dt = {}", self.t_end - self.t0, self.dt)));
        }
        self.per_step.validate()
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t0) / self.dt).round() as usize
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }
}

#[derive(Clone, Debug)]
pub struct TwoLevelResult {
    pub global_field: Field,
    pub local_field: Field,
    pub iterations: usize,
    pub convergence_history: Vec<f64>,
    pub converged: bool,
    pub theta: f64,
}

/// L2 norm through the unit mass matrix.
pub fn l2_norm(mass: &CsrMatrix, v: &[f64]) -> f64 {
    dot(v, &mass.matvec(v)).max(0.0).sqrt()
}

fn unit_mass(space: &FeSpace) -> CsrMatrix {
    assemble_mass(space, |_| 1.0)
}

fn dirichlet_system(space: &FeSpace, a: CsrMatrix, t0: f64) -> Result<(ConstrainedSystem, Vec<f64>)> {
    let dofs = space.boundary_dofs(BoundaryTag::DirichletBottom).to_vec();
    let values = vec![t0; dofs.len()];
    Ok((ConstrainedSystem::new(a, &dofs)?, values))
}

fn plain_load(space: &FeSpace, sources: &SourceSpec, t: f64) -> Vec<f64> {
    let mut b = match &sources.volume {
        Some(f) => assemble_volume_load(space, |p| f(p, t), Region::All),
        None => vec![0.0; space.n_dofs()],
    };
    if let Some(q) = &sources.flux {
        add_scaled(&mut b, 1.0, &assemble_neumann_load(space, |x, t| q(x, t), t, &FLUX_TAGS));
    }
    b
}

/// `int_{Omega+} f v + int_{Omega-} (beta_plus / beta_minus) f v + int_{Gamma_N} q v`.
fn split_load(space: &FeSpace, material: &MaterialModel, omega_minus: Rect, sources: &SourceSpec, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; space.n_dofs()];
    if let Some(f) = &sources.volume {
        add_scaled(&mut b, 1.0, &assemble_volume_load(space, |p| f(p, t), Region::Outside(omega_minus)));
        add_scaled(&mut b, 1.0, &assemble_volume_load(space, |p| material.beta_ratio(p) * f(p, t), Region::Inside(omega_minus)));
    }
    if let Some(q) = &sources.flux {
        add_scaled(&mut b, 1.0, &assemble_neumann_load(space, |x, t| q(x, t), t, &FLUX_TAGS));
    }
    b
}

fn local_volume_load(space: &FeSpace, sources: &SourceSpec, t: f64) -> Vec<f64> {
    match &sources.volume {
        Some(f) => assemble_volume_load(space, |p| f(p, t), Region::All),
        None => vec![0.0; space.n_dofs()],
    }
}

/// Discontinuous-coefficient solve on a single mesh.
pub fn solve_monolithic_steady(space: &Arc<FeSpace>, material: &MaterialModel, omega_minus: Rect, sources: &SourceSpec) -> Result<Field> {
    solve_monolithic_steady_tol(space, material, omega_minus, sources, DEFAULT_CG_TOL)
}

pub fn solve_monolithic_steady_tol(space: &Arc<FeSpace>, material: &MaterialModel, omega_minus: Rect, sources: &SourceSpec, cg_tol: f64) -> Result<Field> {
    let k = assemble_stiffness(space, |p| material.beta_at(p, &omega_minus));
    let (sys, values) = dirichlet_system(space, k, sources.dirichlet_value)?;
    let b = plain_load(space, sources, 0.0);
    let (u, rep) = sys.solve(&b, &values, None, cg_tol, None)?;
    debug!("monolithic steady: {} dofs, {} CG iterations", space.n_dofs(), rep.iterations);
    Field::new(Arc::clone(space), u)
}

/// Backward Euler on a single mesh; `observer` sees every field from `t0` on.
pub fn solve_monolithic_unsteady_with(
    space: &Arc<FeSpace>,
    material: &MaterialModel,
    omega_minus: Rect,
    sources: &SourceSpec,
    time: &TimeConfig,
    mut observer: impl FnMut(usize, f64, &Field) -> Result<()>,
) -> Result<()> {
    time.validate()?;
    let m = assemble_mass(space, |p| material.rho_at(p, &omega_minus));
    let k = assemble_stiffness(space, |p| material.beta_at(p, &omega_minus));
    let a = m.linear_combination(1.0 / time.dt, &k, 1.0)?;
    let (sys, values) = dirichlet_system(space, a, sources.dirichlet_value)?;
    let mut u = Field::from_fn(Arc::clone(space), |p| (sources.initial)(p));
    observer(0, time.t0, &u)?;
    for n in 1..=time.n_steps() {
        let t = time.time(n);
        let mut b = plain_load(space, sources, t);
        add_scaled(&mut b, 1.0 / time.dt, &m.matvec(u.values()));
        let (next, _) = sys.solve(&b, &values, Some(u.values()), time.per_step.cg_tol, None)?;
        u = Field::new(Arc::clone(space), next)?;
        observer(n, t, &u)?;
    }
    Ok(())
}

/// Fields at `t0, t0 + dt, ..., t_end`.
pub fn solve_monolithic_unsteady(
    space: &Arc<FeSpace>,
    material: &MaterialModel,
    omega_minus: Rect,
    sources: &SourceSpec,
    time: &TimeConfig,
) -> Result<Vec<Field>> {
    let mut out = Vec::with_capacity(time.n_steps() + 1);
    solve_monolithic_unsteady_with(space, material, omega_minus, sources, time, |_, _, u| {
        out.push(u.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Mesh-dependent data shared by the two-level drivers.
struct TwoLevelSetup {
    global: Arc<FeSpace>,
    local: Arc<FeSpace>,
    omega_minus: Rect,
    gq: GammaQuadrature,
    omq: OmegaMinusQuadrature,
    l2: CsrMatrix,
}

impl TwoLevelSetup {
    fn new(global: &Arc<FeSpace>, local: &Arc<FeSpace>, material: &MaterialModel, gamma: &GammaPolyline) -> Result<Self> {
        let omega_minus = *gamma.rect();
        crate::assembly::check_positive(local, &material.beta_minus, Region::All)?;
        crate::assembly::check_positive(global, &material.beta_plus, Region::All)?;
        Ok(Self {
            global: Arc::clone(global),
            local: Arc::clone(local),
            omega_minus,
            gq: build_gamma_quadrature(global, local, gamma)?,
            omq: OmegaMinusQuadrature::new(global, local)?,
            l2: unit_mass(global),
        })
    }

    fn local_system(&self, a: CsrMatrix) -> Result<ConstrainedSystem> {
        ConstrainedSystem::new(a, &self.local.all_boundary_dofs())
    }
}

/// Outcome of one pass of steps k.1 and k.2.
struct Update {
    u_hat: Vec<f64>,
    local: Field,
}

/// Steps k.3 and k.4 around `update`, starting from `u0`.
fn relaxation_loop(
    setup: &TwoLevelSetup,
    cfg: &TwoLevelConfig,
    theta: f64,
    u0: Field,
    mut update: impl FnMut(&Field, Option<&Field>, &[f64]) -> Result<Update>,
) -> Result<TwoLevelResult> {
    let norm0 = l2_norm(&setup.l2, u0.values());
    let blowup = 1e10 * (norm0 + 1.0);
    let mut u = u0;
    let mut local: Option<Field> = None;
    let mut history = Vec::new();
    let mut guess = u.values().to_vec();
    for k in 1..=cfg.max_iter {
        let Update { u_hat, local: lf } = update(&u, local.as_ref(), &guess)?;
        let prev = u.values().to_vec();
        let mut next = prev.clone();
        for (x, h) in next.iter_mut().zip(&u_hat) {
            *x = theta * h + (1.0 - theta) * *x;
        }
        let diff: Vec<f64> = next.iter().zip(&prev).map(|(a, b)| a - b).collect();
        let norm = l2_norm(&setup.l2, &next);
        let change = if norm > 0.0 { l2_norm(&setup.l2, &diff) / norm } else { l2_norm(&setup.l2, &diff) };
        history.push(change);
        guess = u_hat;
        u = Field::new(Arc::clone(&setup.global), next)?;
        local = Some(lf);
        debug!("two-level iteration {k}: relative change {change:e}");
        if !change.is_finite() || !norm.is_finite() || norm > blowup {
            return Err(Error::TwoLevelDiverged { iteration: k, change });
        }
        if change <= cfg.tol {
            return Ok(TwoLevelResult {
                global_field: u,
                local_field: local.expect("set above"),
                iterations: k,
                convergence_history: history,
                converged: true,
                theta,
            });
        }
    }
    let last = *history.last().unwrap_or(&f64::NAN);
    if cfg.fail_on_max_iter {
        return Err(Error::TwoLevelNotConverged { iterations: cfg.max_iter, last_change: last });
    }
    warn!("two-level iteration stopped after {} iterations (relative change {last:e})", cfg.max_iter);
    Ok(TwoLevelResult {
        global_field: u,
        local_field: local.expect("max_iter >= 1"),
        iterations: cfg.max_iter,
        convergence_history: history,
        converged: false,
        theta,
    })
}

/// Steady two-level iteration: global uniform-coefficient solves coupled to
/// a local subregion solve through the interface jump load.
pub fn solve_two_level_steady(
    global: &Arc<FeSpace>,
    local: &Arc<FeSpace>,
    material: &MaterialModel,
    gamma: &GammaPolyline,
    sources: &SourceSpec,
    cfg: &TwoLevelConfig,
) -> Result<TwoLevelResult> {
    cfg.validate()?;
    let setup = TwoLevelSetup::new(global, local, material, gamma)?;
    let theta = cfg.theta.resolve(material, &setup.omega_minus);
    let kg = assemble_stiffness(global, |p| material.beta_plus.value(p));
    let (gsys, gvalues) = dirichlet_system(global, kg, sources.dirichlet_value)?;
    let lsys = setup.local_system(assemble_stiffness(local, |p| material.beta_minus.value(p)))?;

    let b0 = plain_load(global, sources, 0.0);
    let (u0, _) = gsys.solve(&b0, &gvalues, None, cfg.cg_tol, None)?;
    let u0 = Field::new(Arc::clone(global), u0)?;

    let b_split = split_load(global, material, setup.omega_minus, sources, 0.0);
    let b_local = local_volume_load(local, sources, 0.0);
    relaxation_loop(&setup, cfg, theta, u0, |u_prev, local_prev, guess| {
        let trace = extract_trace_dirichlet(u_prev, local)?;
        let (ul, _) = lsys.solve(&b_local, &trace.values, local_prev.map(|f| f.values()), cfg.cg_tol, None)?;
        let ul = Field::new(Arc::clone(local), ul)?;
        let mut b = b_split.clone();
        add_scaled(&mut b, 1.0, &assemble_delta_jump_load(&setup.gq, &ul, material)?);
        if material.has_variable_conductivity() {
            add_scaled(&mut b, 1.0, &assemble_variable_coeff_coupling(&setup.omq, &ul, material)?);
        }
        let (u_hat, _) = gsys.solve(&b, &gvalues, Some(guess), cfg.cg_tol, None)?;
        Ok(Update { u_hat, local: ul })
    })
}

/// Unsteady two-level iteration; `observer` sees every converged step
/// (the initial state is not reported).
#[allow(clippy::too_many_arguments)]
pub fn solve_two_level_unsteady_with(
    global: &Arc<FeSpace>,
    local: &Arc<FeSpace>,
    material: &MaterialModel,
    gamma: &GammaPolyline,
    sources: &SourceSpec,
    time: &TimeConfig,
    mut observer: impl FnMut(usize, f64, &TwoLevelResult) -> Result<()>,
) -> Result<()> {
    time.validate()?;
    let cfg = &time.per_step;
    let setup = TwoLevelSetup::new(global, local, material, gamma)?;
    let theta = cfg.theta.resolve(material, &setup.omega_minus);
    let inv_dt = 1.0 / time.dt;

    let mg = assemble_mass(global, |p| material.rho_plus.value(p));
    let kg = assemble_stiffness(global, |p| material.beta_plus.value(p));
    let (gsys, gvalues) = dirichlet_system(global, mg.linear_combination(inv_dt, &kg, 1.0)?, sources.dirichlet_value)?;
    let ml = assemble_mass(local, |p| material.rho_minus.value(p));
    let kl = assemble_stiffness(local, |p| material.beta_minus.value(p));
    let lsys = setup.local_system(ml.linear_combination(inv_dt, &kl, 1.0)?)?;

    let mut u_prev = Field::from_fn(Arc::clone(global), |p| (sources.initial)(p));
    let mut local_state = Field::from_fn(Arc::clone(local), |p| (sources.initial)(p));
    for n in 1..=time.n_steps() {
        let t = time.time(n);
        let mass_prev: Vec<f64> = mg.matvec(u_prev.values()).into_iter().map(|v| v * inv_dt).collect();

        let mut b0 = plain_load(global, sources, t);
        add_scaled(&mut b0, 1.0, &mass_prev);
        let (u0, _) = gsys.solve(&b0, &gvalues, Some(u_prev.values()), cfg.cg_tol, None)?;
        let u0 = Field::new(Arc::clone(global), u0)?;

        let prev_on_local = u_prev.interpolate(local)?;
        let mut b_local = local_volume_load(local, sources, t);
        add_scaled(&mut b_local, inv_dt, &ml.matvec(prev_on_local.values()));
        let mut b_split = split_load(global, material, setup.omega_minus, sources, t);
        add_scaled(&mut b_split, 1.0, &mass_prev);

        let warm_local = local_state.clone();
        let result = relaxation_loop(&setup, cfg, theta, u0, |uk, local_prev, guess| {
            let trace = extract_trace_dirichlet(uk, local)?;
            let start = local_prev.unwrap_or(&warm_local);
            let (ul, _) = lsys.solve(&b_local, &trace.values, Some(start.values()), cfg.cg_tol, None)?;
            let ul = Field::new(Arc::clone(local), ul)?;
            let mut b = b_split.clone();
            add_scaled(&mut b, 1.0, &assemble_delta_jump_load(&setup.gq, &ul, material)?);
            add_scaled(&mut b, 1.0, &assemble_unsteady_volumetric_coupling(&setup.omq, &ul, &u_prev, material, time.dt)?);
            if material.has_variable_conductivity() {
                add_scaled(&mut b, 1.0, &assemble_variable_coeff_coupling(&setup.omq, &ul, material)?);
            }
            let (u_hat, _) = gsys.solve(&b, &gvalues, Some(guess), cfg.cg_tol, None)?;
            Ok(Update { u_hat, local: ul })
        })?;
        debug!("step {n} (t = {t}): {} iterations", result.iterations);
        observer(n, t, &result)?;
        u_prev = result.global_field.clone();
        local_state = result.local_field.clone();
    }
    Ok(())
}

pub fn solve_two_level_unsteady(
    global: &Arc<FeSpace>,
    local: &Arc<FeSpace>,
    material: &MaterialModel,
    gamma: &GammaPolyline,
    sources: &SourceSpec,
    time: &TimeConfig,
) -> Result<Vec<TwoLevelResult>> {
    let mut out = Vec::with_capacity(time.n_steps());
    solve_two_level_unsteady_with(global, local, material, gamma, sources, time, |_, _, r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}
