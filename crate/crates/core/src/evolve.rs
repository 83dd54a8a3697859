//! Explicit time integration of
//!
//! ```text
//! phi_tt = phi_xx - 4 phi (phi^2 + psi^2 - 1)
//! psi_tt = psi_xx - 4 psi (phi^2 + psi^2 - 1) - lambda psi
//! ```
//!
//! with a kick-drift-kick leapfrog, plus boosted-soliton initial data for
//! collision experiments.

use std::collections::VecDeque;

use thiserror::Error;

use crate::interp::UniformSpline;
use crate::lattice::{
    charge_density, gradient, pcac_residual_from_currents, topological_charge, trapezoid, DiagnosticsSample,
    FieldState, Grid,
};
use crate::model::{grad_potential, potential, FieldPoint, ModelParams};
use crate::static_solver::StaticProfile;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("time step {dt} violates the CFL bound dt <= 0.5 dx = {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("invalid evolution settings: {0}")]
    InvalidConfig(String),
    #[error("velocity {0} is not inside (-1, 1)")]
    InvalidVelocity(f64),
    #[error("boosted profile support [{need_lo:.3}, {need_hi:.3}] does not fit the grid [{x_min}, {x_max}]")]
    SupportClipped {
        need_lo: f64,
        need_hi: f64,
        x_min: f64,
        x_max: f64,
    },
    #[error("solitons do not share a middle vacuum: left ends at {left:?}, right starts at {right:?}")]
    IncompatibleVacua { left: FieldPoint, right: FieldPoint },
    #[error("initial separation {separation:.3} is below the required {required:.3}")]
    Overlap { separation: f64, required: f64 },
    #[error("non-finite field values at t = {time}")]
    NumericalFailure {
        time: f64,
        last_good: Box<FieldState>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Dirichlet ends held at their initial vacuum values.
    PinnedVacuum,
    /// Pinned ends plus a damping layer that absorbs outgoing radiation.
    Sponge,
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::PinnedVacuum => "pinned_vacuum",
            Boundary::Sponge => "sponge",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "pinned_vacuum" => Some(Boundary::PinnedVacuum),
            "sponge" => Some(Boundary::Sponge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub sponge_width: f64,
    pub sponge_strength: f64,
    pub snapshot_stride: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 0.004,
            t_end: 60.0,
            boundary: Boundary::PinnedVacuum,
            sponge_width: 5.0,
            sponge_strength: 1.0,
            snapshot_stride: 125,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self, grid: &Grid) -> Result<(), EvolveError> {
        let limit = 0.5 * grid.dx();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EvolveError::InvalidConfig("dt must be positive".into()));
        }
        if self.dt > limit * (1.0 + 1e-12) {
            return Err(EvolveError::CflViolation { dt: self.dt, limit });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(EvolveError::InvalidConfig("t_end must be >= 0".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(EvolveError::InvalidConfig("snapshot_stride must be >= 1".into()));
        }
        if self.boundary == Boundary::Sponge {
            if !(self.sponge_width > 0.0 && self.sponge_width < 0.25 * grid.length()) {
                return Err(EvolveError::InvalidConfig(format!(
                    "sponge_width must lie in (0, {})",
                    0.25 * grid.length()
                )));
            }
            if !(self.sponge_strength >= 0.0 && self.sponge_strength * self.dt < 1.0) {
                return Err(EvolveError::InvalidConfig(
                    "sponge_strength must satisfy 0 <= strength * dt < 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

pub fn lorentz_gamma(v: f64) -> f64 {
    1.0 / (1.0 - v * v).sqrt()
}

const SUPPORT_TOL: f64 = 1e-6;

/// Range of profile coordinates where the fields differ from their end
/// values by more than `SUPPORT_TOL`.
fn support(p: &StaticProfile) -> (f64, f64) {
    let s = &p.state;
    let n = s.len();
    let off = |i: usize, j: usize| {
        (s.phi[i] - s.phi[j]).abs() > SUPPORT_TOL || (s.psi[i] - s.psi[j]).abs() > SUPPORT_TOL
    };
    let lo = (0..n).find(|&i| off(i, 0)).unwrap_or(0);
    let hi = (0..n).rev().find(|&i| off(i, n - 1)).unwrap_or(n - 1);
    (s.grid.x(lo), s.grid.x(hi))
}

/// Centre of a static profile: the charge-weighted mean position for a kink
/// or antikink, the origin otherwise.
pub fn profile_centre(p: &StaticProfile) -> f64 {
    let s = &p.state;
    let q = topological_charge(s);
    if q.abs() < 0.5 {
        return 0.0;
    }
    let j = charge_density(s);
    let g = s.grid;
    let (mut w, mut wx) = (0.0, 0.0);
    for (i, v) in j.iter().enumerate() {
        w += v;
        wx += v * g.x(i);
    }
    wx / w
}

/// Lorentz-boosted copy of a static profile with its centre moved to `x0`:
/// `f(x) -> f(c + gamma (x - x0))`, `f_t = -v gamma f'(c + gamma (x - x0))`,
/// with `c` from [`profile_centre`], resampled on `grid` with a natural
/// cubic spline.
pub fn boost_profile(
    p: &StaticProfile,
    v: f64,
    x0: f64,
    grid: Grid,
) -> Result<FieldState, EvolveError> {
    if !(v.abs() < 1.0) {
        return Err(EvolveError::InvalidVelocity(v));
    }
    let gamma = lorentz_gamma(v);
    let c = profile_centre(p);
    let (lo, hi) = support(p);
    let need_lo = x0 + (lo - c) / gamma;
    let need_hi = x0 + (hi - c) / gamma;
    if need_lo < grid.x_min() || need_hi > grid.x_max() {
        return Err(EvolveError::SupportClipped {
            need_lo,
            need_hi,
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    let src = &p.state;
    let h = src.grid.dx();
    let phi_spline = UniformSpline::new(src.grid.x_min(), h, &src.phi);
    let psi_spline = UniformSpline::new(src.grid.x_min(), h, &src.psi);
    let n = grid.len();
    let mut out = FieldState::uniform(grid, FieldPoint::new(0.0, 0.0));
    for i in 0..n {
        let xi = c + gamma * (grid.x(i) - x0);
        let (f, df) = phi_spline.eval(xi);
        let (g, dg) = psi_spline.eval(xi);
        out.phi[i] = f;
        out.psi[i] = g;
        out.phi_dot[i] = -v * gamma * df;
        out.psi_dot[i] = -v * gamma * dg;
    }
    Ok(out)
}

/// Two boosted static solitons to be superposed.
#[derive(Debug, Clone)]
pub struct CollisionSetup {
    pub left: StaticProfile,
    pub right: StaticProfile,
    pub x_left: f64,
    pub x_right: f64,
    pub v_left: f64,
    pub v_right: f64,
    pub model: ModelParams,
}

impl CollisionSetup {
    /// Vacuum between the two solitons.
    pub fn shared_vacuum(&self) -> Result<FieldPoint, EvolveError> {
        let left = self.left.boundary_vacua.1;
        let right = self.right.boundary_vacua.0;
        if left.distance(&right) > SUPPORT_TOL {
            return Err(EvolveError::IncompatibleVacua { left, right });
        }
        Ok(left)
    }

    /// Minimum allowed start separation: twice the summed rest-frame widths.
    pub fn required_separation(&self) -> f64 {
        2.0 * (self.left.width().unwrap_or(0.0) + self.right.width().unwrap_or(0.0))
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        for v in [self.v_left, self.v_right] {
            if !(v.abs() < 1.0) {
                return Err(EvolveError::InvalidVelocity(v));
            }
        }
        self.shared_vacuum()?;
        let separation = self.x_right - self.x_left;
        let required = self.required_separation();
        if !(separation >= required) {
            return Err(EvolveError::Overlap {
                separation,
                required,
            });
        }
        Ok(())
    }

    /// Midpoint of the two start positions.
    pub fn centre(&self) -> f64 {
        0.5 * (self.x_left + self.x_right)
    }
}

/// Additive superposition `f = f_left + f_right - f_shared_vacuum` of the two
/// boosted solitons. Time derivatives add. Endpoints are set exactly to the
/// outer vacua with zero velocity.
pub fn compose_collision(setup: &CollisionSetup, grid: Grid) -> Result<FieldState, EvolveError> {
    setup.validate()?;
    let shared = setup.shared_vacuum()?;
    let left = boost_profile(&setup.left, setup.v_left, setup.x_left, grid)?;
    let right = boost_profile(&setup.right, setup.v_right, setup.x_right, grid)?;
    let n = grid.len();
    let mut out = left;
    for i in 0..n {
        out.phi[i] = out.phi[i] + right.phi[i] - shared.phi;
        out.psi[i] = out.psi[i] + right.psi[i] - shared.psi;
        out.phi_dot[i] += right.phi_dot[i];
        out.psi_dot[i] += right.psi_dot[i];
    }
    let (outer_left, outer_right) = (setup.left.boundary_vacua.0, setup.right.boundary_vacua.1);
    out.phi[0] = outer_left.phi;
    out.psi[0] = outer_left.psi;
    out.phi[n - 1] = outer_right.phi;
    out.psi[n - 1] = outer_right.psi;
    for arr in [&mut out.phi_dot, &mut out.psi_dot] {
        arr[0] = 0.0;
        arr[n - 1] = 0.0;
    }
    out.time = 0.0;
    Ok(out)
}

/// Sponge profile: quadratic ramp from 0 at the inner edge of the layer to 1
/// at the grid ends.
fn sponge_mask(grid: &Grid, width: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            let d = (x - grid.x_min()).min(grid.x_max() - x);
            if d < width {
                let r = (width - d) / width;
                r * r
            } else {
                0.0
            }
        })
        .collect()
}

/// Leapfrog integrator holding the current state and its accelerations.
#[derive(Debug, Clone)]
pub(crate) struct Stepper {
    state: FieldState,
    model: ModelParams,
    dt: f64,
    start_time: f64,
    steps_taken: usize,
    acc_phi: Vec<f64>,
    acc_psi: Vec<f64>,
    damping: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(mut state: FieldState, model: ModelParams, cfg: &EvolveConfig) -> Result<Self, EvolveError> {
        cfg.validate(&state.grid)?;
        let n = state.len();
        for arr in [&mut state.phi_dot, &mut state.psi_dot] {
            arr[0] = 0.0;
            arr[n - 1] = 0.0;
        }
        let damping = (cfg.boundary == Boundary::Sponge).then(|| {
            sponge_mask(&state.grid, cfg.sponge_width)
                .into_iter()
                .map(|w| 1.0 - cfg.sponge_strength * w * cfg.dt)
                .collect()
        });
        let mut stepper = Self {
            start_time: state.time,
            state,
            model,
            dt: cfg.dt,
            steps_taken: 0,
            acc_phi: vec![0.0; n],
            acc_psi: vec![0.0; n],
            damping,
        };
        stepper.update_accelerations();
        Ok(stepper)
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn into_state(self) -> FieldState {
        self.state
    }

    fn update_accelerations(&mut self) {
        let s = &self.state;
        let n = s.len();
        let dx = s.grid.dx();
        let inv = 1.0 / (dx * dx);
        for i in 1..n - 1 {
            let (vp, vq) = grad_potential(FieldPoint::new(s.phi[i], s.psi[i]), self.model);
            self.acc_phi[i] = ((s.phi[i + 1] + s.phi[i - 1]) - 2.0 * s.phi[i]) * inv - vp;
            self.acc_psi[i] = ((s.psi[i + 1] + s.psi[i - 1]) - 2.0 * s.psi[i]) * inv - vq;
        }
    }

    /// One kick-drift-kick step. Endpoints never move. A non-finite value
    /// anywhere is reported as the time at which it appeared.
    pub fn advance(&mut self) -> Result<(), f64> {
        let n = self.state.len();
        let dt = self.dt;
        let half = 0.5 * dt;
        {
            let s = &mut self.state;
            for i in 1..n - 1 {
                s.phi_dot[i] += half * self.acc_phi[i];
                s.psi_dot[i] += half * self.acc_psi[i];
                s.phi[i] += dt * s.phi_dot[i];
                s.psi[i] += dt * s.psi_dot[i];
            }
        }
        self.update_accelerations();
        let s = &mut self.state;
        for i in 1..n - 1 {
            s.phi_dot[i] += half * self.acc_phi[i];
            s.psi_dot[i] += half * self.acc_psi[i];
        }
        if let Some(damp) = &self.damping {
            for i in 1..n - 1 {
                s.phi_dot[i] *= damp[i];
                s.psi_dot[i] *= damp[i];
            }
        }
        self.steps_taken += 1;
        s.time = self.start_time + self.steps_taken as f64 * dt;
        let finite = s
            .phi
            .iter()
            .chain(&s.psi)
            .chain(&s.phi_dot)
            .chain(&s.psi_dot)
            .all(|v| v.is_finite());
        if !finite {
            return Err(s.time);
        }
        Ok(())
    }
}

/// Advances `s` by one step of `cfg.dt`.
pub fn step(s: &FieldState, m: ModelParams, cfg: &EvolveConfig) -> Result<FieldState, EvolveError> {
    let mut stepper = Stepper::new(s.clone(), m, cfg)?;
    match stepper.advance() {
        Ok(()) => Ok(stepper.into_state()),
        Err(time) => Err(EvolveError::NumericalFailure {
            time,
            last_good: Box::new(s.clone()),
        }),
    }
}

/// Snapshots plus the per-step diagnostics series of one evolution.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ModelParams,
    pub grid: Grid,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub snapshots: Vec<FieldState>,
    pub diagnostics: Vec<DiagnosticsSample>,
}

impl Trajectory {
    pub fn initial(&self) -> &FieldState {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }
}

/// Per-step quantities kept until the following step supplies the forward
/// time difference needed by the PCAC residual.
struct PendingSample {
    sample: DiagnosticsSample,
    density: Vec<f64>,
    flux: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

fn measure(s: &FieldState, m: ModelParams) -> PendingSample {
    let n = s.len();
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    let mut energy = vec![0.0; n];
    let mut density = vec![0.0; n];
    let mut flux = vec![0.0; n];
    let mut fi_max = 0.0_f64;
    for i in 0..n {
        let v = potential(FieldPoint::new(s.phi[i], s.psi[i]), m);
        let grad2 = 0.5 * (dphi[i] * dphi[i] + dpsi[i] * dpsi[i]);
        energy[i] = 0.5 * (s.phi_dot[i] * s.phi_dot[i] + s.psi_dot[i] * s.psi_dot[i]) + grad2 + v;
        fi_max = fi_max.max((grad2 - v).abs());
        density[i] = 2.0 * (s.psi[i] * s.phi_dot[i] - s.phi[i] * s.psi_dot[i]);
        flux[i] = 2.0 * (s.phi[i] * dpsi[i] - s.psi[i] * dphi[i]);
    }
    PendingSample {
        sample: DiagnosticsSample {
            time: s.time,
            total_energy: trapezoid(&energy, dx),
            topological_charge: topological_charge(s),
            noether_charge: trapezoid(&density, dx),
            max_first_integral_deviation: fi_max,
            max_pcac_residual: 0.0,
        },
        density,
        flux,
        phi: s.phi.clone(),
        psi: s.psi.clone(),
    }
}

fn pcac_max(before: &[f64], after: &[f64], mid: &PendingSample, dx: f64, span: f64, m: ModelParams) -> f64 {
    pcac_residual_from_currents(before, after, &mid.flux, &mid.phi, &mid.psi, dx, span, m)
        .into_iter()
        .fold(0.0, f64::max)
}

/// `a·x + b·y + c·z`, used to express one-sided second-order differences as
/// a difference of two arrays over `2dt`.
fn combine(a: f64, x: &[f64], b: f64, y: &[f64], c: f64, z: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(y)
        .zip(z)
        .map(|((x, y), z)| a * x + b * y + c * z)
        .collect()
}

/// Evolves `s0` to `cfg.t_end`, recording a snapshot every
/// `cfg.snapshot_stride` steps (plus the final state) and a diagnostics
/// sample at every step.
///
/// The PCAC residual uses a centred time difference at interior samples and
/// second-order one-sided differences at the first and last samples.
pub fn run(s0: &FieldState, m: ModelParams, cfg: &EvolveConfig) -> Result<Trajectory, EvolveError> {
    let mut stepper = Stepper::new(s0.clone(), m, cfg)?;
    let dx = s0.grid.dx();
    let dt = cfg.dt;
    let steps = cfg.steps();
    let mut snapshots = vec![stepper.state().clone()];
    let mut diagnostics = Vec::with_capacity(steps + 1);

    // the last three measured states, oldest first
    let mut window = VecDeque::from([measure(stepper.state(), m)]);
    for k in 1..=steps {
        if let Err(time) = stepper.advance() {
            return Err(EvolveError::NumericalFailure {
                time,
                last_good: Box::new(snapshots.pop().expect("initial snapshot present")),
            });
        }
        if window.len() == 3 {
            window.pop_front();
        }
        window.push_back(measure(stepper.state(), m));
        if window.len() == 3 {
            let (j0, j1, j2) = (&window[0].density, &window[1].density, &window[2].density);
            if k == 2 {
                let mut first = window[0].sample;
                let after = combine(4.0, j1, -1.0, j2, -2.0, j0);
                first.max_pcac_residual = pcac_max(j0, &after, &window[0], dx, 2.0 * dt, m);
                diagnostics.push(first);
            }
            let mut mid = window[1].sample;
            mid.max_pcac_residual = pcac_max(j0, j2, &window[1], dx, 2.0 * dt, m);
            diagnostics.push(mid);
        }
        if k % cfg.snapshot_stride == 0 || k == steps {
            snapshots.push(stepper.state().clone());
        }
    }
    match window.len() {
        1 => diagnostics.push(window[0].sample),
        2 => {
            let (j0, j1) = (&window[0].density, &window[1].density);
            for w in &window {
                let mut sample = w.sample;
                sample.max_pcac_residual = pcac_max(j0, j1, w, dx, dt, m);
                diagnostics.push(sample);
            }
        }
        _ => {
            let (j0, j1, j2) = (&window[0].density, &window[1].density, &window[2].density);
            let mut last = window[2].sample;
            let before = combine(4.0, j1, -1.0, j0, -2.0, j2);
            last.max_pcac_residual = pcac_max(&before, j2, &window[2], dx, 2.0 * dt, m);
            diagnostics.push(last);
        }
    }

    Ok(Trajectory {
        model: m,
        grid: s0.grid,
        dt,
        snapshot_stride: cfg.snapshot_stride,
        snapshots,
        diagnostics,
    })
}
