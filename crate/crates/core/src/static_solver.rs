//! Minimum-energy static solutions.
//!
//! The reference method is stochastic relaxation: local random changes of
//! the fields are kept only when they lower the total energy. A gradient-flow
//! descent of the same energy functional is provided as a deterministic
//! accelerator and is normally run after the stochastic stage to polish the
//! result.
//!
//! Both methods minimize the lattice energy
//!
//! ```text
//! E_h = sum_links dx/2 ((f[i+1]-f[i])/dx)^2  +  trapezoid(V)
//! ```
//!
//! whose Euler-Lagrange equations use the same three-point Laplacian as the
//! time integrator, so relaxed profiles are exact discrete static solutions
//! of the evolution. Reported energies use [`crate::lattice::total_energy`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::{
    first_integral_deviation, max_abs, topological_charge, total_energy, FieldState, Grid,
};
use crate::model::{grad_potential, potential, FieldPoint, ModelParams};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Error)]
pub enum RelaxError {
    #[error("grid [{x_min}, {x_max}] too narrow for a kink guess; need |x| >= {needed:.3} at both ends")]
    GridTooNarrow { x_min: f64, x_max: f64, needed: f64 },
    #[error("invalid relaxation schedule: {0}")]
    InvalidSchedule(String),
    #[error("gradient-flow step {step} violates step < dx^2/2 = {limit}")]
    UnstableStep { step: f64, limit: f64 },
    #[error("endpoints of the initial state are not at a vacuum (off by {0:.3e})")]
    EndpointsNotVacuum(f64),
    #[error("not converged after {iterations} iterations ({method:?})")]
    NotConverged {
        method: RelaxMethod,
        iterations: usize,
        best: Box<StaticProfile>,
    },
    #[error("gradient flow diverged at iteration {iteration}: energy rose from {before} to {after}")]
    Diverged {
        iteration: usize,
        before: f64,
        after: f64,
        last_good: Box<StaticProfile>,
    },
}

impl RelaxError {
    /// Best profile reached before the failure, if any.
    pub fn best_profile(&self) -> Option<&StaticProfile> {
        match self {
            RelaxError::NotConverged { best, .. } => Some(best),
            RelaxError::Diverged { last_good, .. } => Some(last_good),
            _ => None,
        }
    }
}

/// Starting configurations. `Psi*` variants are kinks (`phi: -1 -> +1`)
/// seeded with a psi bump of the given sign; `AntiPsi*` are the matching
/// antikinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedKind {
    Kink,
    Antikink,
    PsiPlus,
    PsiMinus,
    AntiPsiPlus,
    AntiPsiMinus,
}

impl SeedKind {
    pub const ALL: [SeedKind; 6] = [
        SeedKind::Kink,
        SeedKind::Antikink,
        SeedKind::PsiPlus,
        SeedKind::PsiMinus,
        SeedKind::AntiPsiPlus,
        SeedKind::AntiPsiMinus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SeedKind::Kink => "kink",
            SeedKind::Antikink => "antikink",
            SeedKind::PsiPlus => "psi_plus",
            SeedKind::PsiMinus => "psi_minus",
            SeedKind::AntiPsiPlus => "anti_psi_plus",
            SeedKind::AntiPsiMinus => "anti_psi_minus",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }

    /// +1 for kinks, -1 for antikinks.
    pub fn orientation(&self) -> f64 {
        match self {
            SeedKind::Kink | SeedKind::PsiPlus | SeedKind::PsiMinus => 1.0,
            _ => -1.0,
        }
    }

    fn psi_seed(&self) -> f64 {
        match self {
            SeedKind::Kink | SeedKind::Antikink => 0.0,
            SeedKind::PsiPlus | SeedKind::AntiPsiPlus => 0.5,
            SeedKind::PsiMinus | SeedKind::AntiPsiMinus => -0.5,
        }
    }
}

/// Half-width beyond which `tanh(sqrt(2) x)` is within `1e-6` of its limit.
fn required_half_width() -> f64 {
    // 1 - tanh(a) = 2 / (exp(2a) + 1) < 1e-6
    (2.0e6_f64 - 1.0).ln() / (2.0 * SQRT2)
}

/// The exact `lambda = 0` kink `phi = ±tanh(sqrt(2) x)`, optionally dressed
/// with `psi = ±0.5 sech(sqrt(2) x)` to select one of the two psi branches.
/// Endpoints are set exactly to the vacua.
pub fn initial_kink_guess(
    grid: Grid,
    kind: SeedKind,
    _m: ModelParams,
) -> Result<FieldState, RelaxError> {
    let needed = required_half_width();
    if grid.x_min() > -needed || grid.x_max() < needed {
        return Err(RelaxError::GridTooNarrow {
            x_min: grid.x_min(),
            x_max: grid.x_max(),
            needed,
        });
    }
    let sign = kind.orientation();
    let seed = kind.psi_seed();
    let mut s = FieldState::from_fn(grid, |x| {
        let a = SQRT2 * x;
        (sign * a.tanh(), seed / a.cosh())
    });
    let n = s.len();
    s.phi[0] = -sign;
    s.phi[n - 1] = sign;
    s.psi[0] = 0.0;
    s.psi[n - 1] = 0.0;
    Ok(s)
}

/// Trial kink-antikink bound state: `phi = 2/(1+x^2) - 1`, `psi = x/(1+x^2)`.
/// The grid is expected to be centred on 0. The algebraic tails do not reach
/// the vacuum, so both endpoints are set to `(-1, 0)`.
pub fn molecule_guess(grid: Grid) -> FieldState {
    let mut s = FieldState::from_fn(grid, |x| {
        let d = 1.0 + x * x;
        (2.0 / d - 1.0, x / d)
    });
    let n = s.len();
    for i in [0, n - 1] {
        s.phi[i] = -1.0;
        s.psi[i] = 0.0;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationSchedule {
    pub initial_amplitude: f64,
    pub amplitude_decay: f64,
    /// `None` means ten trials per grid point.
    pub trials_per_stage: Option<usize>,
    pub max_stages: usize,
    pub convergence_tol: f64,
    pub rng_seed: u64,
}

impl Default for RelaxationSchedule {
    fn default() -> Self {
        Self {
            initial_amplitude: 0.1,
            amplitude_decay: 0.5,
            trials_per_stage: None,
            max_stages: 40,
            convergence_tol: 1e-8,
            rng_seed: 0,
        }
    }
}

impl RelaxationSchedule {
    pub fn validate(&self) -> Result<(), RelaxError> {
        let bad = |m: &str| Err(RelaxError::InvalidSchedule(m.to_string()));
        if !(self.initial_amplitude > 0.0 && self.initial_amplitude.is_finite()) {
            return bad("initial_amplitude must be > 0");
        }
        if !(self.amplitude_decay > 0.0 && self.amplitude_decay < 1.0) {
            return bad("amplitude_decay must lie in (0, 1)");
        }
        if !(self.convergence_tol > 0.0 && self.convergence_tol.is_finite()) {
            return bad("convergence_tol must be > 0");
        }
        if self.trials_per_stage == Some(0) {
            return bad("trials_per_stage must be positive");
        }
        if self.max_stages == 0 {
            return bad("max_stages must be positive");
        }
        Ok(())
    }

    pub fn trials_for(&self, n: usize) -> usize {
        self.trials_per_stage.unwrap_or(10 * n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxMethod {
    Stochastic,
    GradientFlow,
}

impl RelaxMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RelaxMethod::Stochastic => "stochastic",
            RelaxMethod::GradientFlow => "gradient_flow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticProfile {
    pub state: FieldState,
    pub energy: f64,
    /// Vacua at the left and right ends.
    pub boundary_vacua: (FieldPoint, FieldPoint),
    pub method: RelaxMethod,
    pub iterations_used: usize,
    /// Lattice energy `E_h` after every accepted stage (stochastic) or
    /// after every iteration block (gradient flow).
    pub energy_history: Vec<f64>,
}

impl StaticProfile {
    /// Wraps a static state, reading the boundary vacua off its endpoints.
    pub fn from_state(
        mut state: FieldState,
        m: ModelParams,
        method: RelaxMethod,
        iterations_used: usize,
    ) -> Self {
        state.phi_dot.iter_mut().for_each(|v| *v = 0.0);
        state.psi_dot.iter_mut().for_each(|v| *v = 0.0);
        let n = state.len();
        let boundary_vacua = (state.point(0), state.point(n - 1));
        let energy = total_energy(&state, m);
        Self {
            state,
            energy,
            boundary_vacua,
            method,
            iterations_used,
            energy_history: Vec::new(),
        }
    }

    pub fn charge(&self) -> f64 {
        topological_charge(&self.state)
    }

    pub fn first_integral_max(&self, m: ModelParams) -> f64 {
        max_abs(&first_integral_deviation(&self.state, m))
    }

    pub fn static_residual_max(&self, m: ModelParams) -> f64 {
        let (a, b) = static_residual(&self.state, m);
        max_abs(&a).max(max_abs(&b))
    }

    /// The psi-mirror partner on the other degenerate branch.
    pub fn mirrored_psi(&self) -> Self {
        let mut out = self.clone();
        out.state = self.state.mirrored_psi();
        out.boundary_vacua = (
            self.boundary_vacua.0.mirrored(),
            self.boundary_vacua.1.mirrored(),
        );
        out
    }

    /// Spatial reflection `x -> -x`; turns a kink into an antikink.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.state = self.state.reflected();
        out.boundary_vacua = (self.boundary_vacua.1, self.boundary_vacua.0);
        out
    }

    /// Distance between the points where `phi` crosses `±tanh(1)` of its
    /// asymptotic range, i.e. twice the kink half-width.
    pub fn width(&self) -> Option<f64> {
        kink_width(&self.state)
    }
}

/// Width of the single kink or antikink in `s`, measured between the
/// crossings of `mid ± tanh(1) * half_range`.
pub fn kink_width(s: &FieldState) -> Option<f64> {
    let n = s.len();
    let lo = s.phi[0];
    let hi = s.phi[n - 1];
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    if half.abs() < 1e-9 {
        return None;
    }
    let t = 1.0_f64.tanh();
    let a = crossing(s, mid - t * half)?;
    let b = crossing(s, mid + t * half)?;
    Some((b - a).abs())
}

fn crossing(s: &FieldState, level: f64) -> Option<f64> {
    let g = s.grid;
    (0..s.len() - 1).find_map(|i| {
        let (a, b) = (s.phi[i] - level, s.phi[i + 1] - level);
        if a == 0.0 {
            Some(g.x(i))
        } else if a * b < 0.0 {
            Some(g.x(i) + g.dx() * a / (a - b))
        } else {
            None
        }
    })
}

/// `(phi'' - dV/dphi, psi'' - dV/dpsi)` with the three-point Laplacian;
/// endpoints are left at 0.
pub fn static_residual(s: &FieldState, m: ModelParams) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let inv = 1.0 / (s.grid.dx() * s.grid.dx());
    let mut rphi = vec![0.0; n];
    let mut rpsi = vec![0.0; n];
    for i in 1..n - 1 {
        let (vp, vq) = grad_potential(s.point(i), m);
        rphi[i] = ((s.phi[i + 1] + s.phi[i - 1]) - 2.0 * s.phi[i]) * inv - vp;
        rpsi[i] = ((s.psi[i + 1] + s.psi[i - 1]) - 2.0 * s.psi[i]) * inv - vq;
    }
    (rphi, rpsi)
}

/// Lattice energy `E_h` minimized by both relaxation methods.
pub fn lattice_energy(phi: &[f64], psi: &[f64], dx: f64, m: ModelParams) -> f64 {
    let n = phi.len();
    let mut grad = 0.0;
    for i in 0..n - 1 {
        let dp = phi[i + 1] - phi[i];
        let dq = psi[i + 1] - psi[i];
        grad += dp * dp + dq * dq;
    }
    let mut pot = 0.0;
    for i in 1..n - 1 {
        pot += potential(FieldPoint::new(phi[i], psi[i]), m);
    }
    pot += 0.5
        * (potential(FieldPoint::new(phi[0], psi[0]), m)
            + potential(FieldPoint::new(phi[n - 1], psi[n - 1]), m));
    0.5 * grad / dx + dx * pot
}

/// Contribution to `E_h` of links `[lo, hi)` and interior sites `[lo, hi]`
/// restricted to `1..n-1`.
fn local_energy(phi: &[f64], psi: &[f64], lo: usize, hi: usize, dx: f64, m: ModelParams) -> f64 {
    let mut grad = 0.0;
    for i in lo..hi {
        let dp = phi[i + 1] - phi[i];
        let dq = psi[i + 1] - psi[i];
        grad += dp * dp + dq * dq;
    }
    let mut pot = 0.0;
    for i in lo.max(1)..=hi {
        pot += potential(FieldPoint::new(phi[i], psi[i]), m);
    }
    0.5 * grad / dx + dx * pot
}

fn check_vacuum_ends(s: &FieldState, m: ModelParams) -> Result<(), RelaxError> {
    let n = s.len();
    let worst = potential(s.point(0), m).max(potential(s.point(n - 1), m));
    if worst > 1e-10 {
        return Err(RelaxError::EndpointsNotVacuum(worst.sqrt()));
    }
    Ok(())
}

/// Gaussian bump width (in grid points) and truncation radius.
const BUMP_SIGMA: f64 = 3.0;
const BUMP_RADIUS: usize = 12;
const LOW_ACCEPTANCE: f64 = 0.05;

/// Stochastic relaxation: random local Gaussian bumps are applied to one
/// field at a time and kept only if `E_h` decreases.
///
/// Each trial picks an interior site, a field and an amplitude in `[-a, a]`.
/// The amplitude `a` is multiplied by `amplitude_decay` whenever a stage
/// accepts fewer than 5% of its trials. The run stops when a stage lowers the
/// energy by less than `convergence_tol`.
///
/// Psi amplitudes are expressed relative to the psi orientation of the
/// initial state (sign of `sum psi`), so a psi-mirrored start with the same
/// seed follows the mirrored trajectory exactly.
pub fn relax_stochastic(
    initial: &FieldState,
    m: ModelParams,
    sched: &RelaxationSchedule,
) -> Result<StaticProfile, RelaxError> {
    sched.validate()?;
    check_vacuum_ends(initial, m)?;
    let n = initial.len();
    let dx = initial.grid.dx();
    let mut phi = initial.phi.clone();
    let mut psi = initial.psi.clone();
    let psi_orientation = if psi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };

    let weights: Vec<f64> = (0..=BUMP_RADIUS)
        .map(|k| (-0.5 * (k as f64 / BUMP_SIGMA).powi(2)).exp())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sched.rng_seed);
    let trials = sched.trials_for(n);
    let mut amplitude = sched.initial_amplitude;
    let mut energy = lattice_energy(&phi, &psi, dx, m);
    let mut history = vec![energy];
    let mut backup = [0.0; 2 * BUMP_RADIUS + 1];
    let mut trials_done = 0;

    for _stage in 0..sched.max_stages {
        let stage_start = energy;
        let mut accepted = 0usize;
        for _ in 0..trials {
            let centre = rng.gen_range(1..n - 1);
            let on_psi = rng.gen_bool(0.5);
            let u: f64 = rng.gen_range(-amplitude..=amplitude);
            let lo = centre.saturating_sub(BUMP_RADIUS).max(1);
            let hi = (centre + BUMP_RADIUS).min(n - 2);
            // links lo-1..=hi and sites lo..=hi change
            let before = local_energy(&phi, &psi, lo - 1, hi + 1, dx, m);
            let (field, amp) = if on_psi {
                (&mut psi, u * psi_orientation)
            } else {
                (&mut phi, u)
            };
            backup[..=hi - lo].copy_from_slice(&field[lo..=hi]);
            for i in lo..=hi {
                field[i] += amp * weights[centre.abs_diff(i)];
            }
            let after = local_energy(&phi, &psi, lo - 1, hi + 1, dx, m);
            if after < before {
                accepted += 1;
            } else {
                let field = if on_psi { &mut psi } else { &mut phi };
                field[lo..=hi].copy_from_slice(&backup[..=hi - lo]);
            }
        }
        trials_done += trials;
        energy = lattice_energy(&phi, &psi, dx, m);
        history.push(energy);
        let drop = stage_start - energy;
        if drop < sched.convergence_tol {
            let mut profile = finish(initial, phi, psi, m, RelaxMethod::Stochastic, trials_done);
            profile.energy_history = history;
            return Ok(profile);
        }
        if (accepted as f64) < LOW_ACCEPTANCE * trials as f64 {
            amplitude *= sched.amplitude_decay;
        }
    }
    let mut best = finish(initial, phi, psi, m, RelaxMethod::Stochastic, trials_done);
    best.energy_history = history;
    Err(RelaxError::NotConverged {
        method: RelaxMethod::Stochastic,
        iterations: trials_done,
        best: Box::new(best),
    })
}

fn finish(
    initial: &FieldState,
    phi: Vec<f64>,
    psi: Vec<f64>,
    m: ModelParams,
    method: RelaxMethod,
    iterations: usize,
) -> StaticProfile {
    let n = phi.len();
    let state = FieldState {
        grid: initial.grid,
        phi,
        psi,
        phi_dot: vec![0.0; n],
        psi_dot: vec![0.0; n],
        time: initial.time,
    };
    StaticProfile::from_state(state, m, method, iterations)
}

/// Largest admissible gradient-flow step for spacing `dx`.
pub fn max_flow_step(dx: f64) -> f64 {
    0.5 * dx * dx
}

/// Default gradient-flow step, 80% of the stability limit.
pub fn default_flow_step(dx: f64) -> f64 {
    0.8 * max_flow_step(dx)
}

/// Explicit gradient descent `f <- f - step * (dV/df - f'')` with pinned
/// endpoints. Stops once the largest pointwise update drops below `tol`.
pub fn relax_gradient_flow(
    initial: &FieldState,
    m: ModelParams,
    step: f64,
    tol: f64,
    max_iters: usize,
) -> Result<StaticProfile, RelaxError> {
    let dx = initial.grid.dx();
    let limit = max_flow_step(dx);
    if !(step > 0.0 && step < limit) {
        return Err(RelaxError::UnstableStep { step, limit });
    }
    check_vacuum_ends(initial, m)?;
    let n = initial.len();
    let mut phi = initial.phi.clone();
    let mut psi = initial.psi.clone();
    let mut next_phi = phi.clone();
    let mut next_psi = psi.clone();
    let inv = 1.0 / (dx * dx);
    let mut energy = lattice_energy(&phi, &psi, dx, m);
    let mut history = vec![energy];
    const HISTORY_STRIDE: usize = 1000;

    for iter in 1..=max_iters {
        let mut max_update = 0.0_f64;
        for i in 1..n - 1 {
            let (vp, vq) = grad_potential(FieldPoint::new(phi[i], psi[i]), m);
            let dp = step * (((phi[i + 1] + phi[i - 1]) - 2.0 * phi[i]) * inv - vp);
            let dq = step * (((psi[i + 1] + psi[i - 1]) - 2.0 * psi[i]) * inv - vq);
            next_phi[i] = phi[i] + dp;
            next_psi[i] = psi[i] + dq;
            max_update = max_update.max(dp.abs()).max(dq.abs());
        }
        let new_energy = lattice_energy(&next_phi, &next_psi, dx, m);
        if new_energy > energy + 1e-12 * (1.0 + energy.abs()) {
            let mut last_good = finish(initial, phi, psi, m, RelaxMethod::GradientFlow, iter - 1);
            last_good.energy_history = history;
            return Err(RelaxError::Diverged {
                iteration: iter,
                before: energy,
                after: new_energy,
                last_good: Box::new(last_good),
            });
        }
        std::mem::swap(&mut phi, &mut next_phi);
        std::mem::swap(&mut psi, &mut next_psi);
        energy = new_energy;
        if iter % HISTORY_STRIDE == 0 {
            history.push(energy);
        }
        if max_update < tol {
            history.push(energy);
            let mut profile = finish(initial, phi, psi, m, RelaxMethod::GradientFlow, iter);
            profile.energy_history = history;
            return Ok(profile);
        }
    }
    let mut best = finish(initial, phi, psi, m, RelaxMethod::GradientFlow, max_iters);
    best.energy_history = history;
    Err(RelaxError::NotConverged {
        method: RelaxMethod::GradientFlow,
        iterations: max_iters,
        best: Box::new(best),
    })
}

/// Settings for the gradient-flow polish that follows stochastic relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolishOptions {
    pub enabled: bool,
    /// `None` selects [`default_flow_step`].
    pub step: Option<f64>,
    /// Tolerance on the static residual `max |f'' - dV/df|`.
    pub residual_tol: f64,
    pub max_iters: usize,
}

impl Default for PolishOptions {
    fn default() -> Self {
        Self {
            enabled: true,
            step: None,
            residual_tol: 1e-4,
            max_iters: 5_000_000,
        }
    }
}

/// Outcome of [`relax`]: the final profile plus the stochastic stage on its
/// own, whether or not that stage converged.
#[derive(Debug, Clone)]
pub struct RelaxReport {
    pub profile: StaticProfile,
    pub stochastic: StaticProfile,
    pub stochastic_converged: bool,
}

/// Stochastic relaxation followed, when enabled, by a gradient-flow polish
/// down to `polish.residual_tol`.
pub fn relax(
    initial: &FieldState,
    m: ModelParams,
    sched: &RelaxationSchedule,
    polish: &PolishOptions,
) -> Result<RelaxReport, RelaxError> {
    let (stochastic, stochastic_converged) = match relax_stochastic(initial, m, sched) {
        Ok(p) => (p, true),
        Err(RelaxError::NotConverged { best, .. }) if polish.enabled => (*best, false),
        Err(e) => return Err(e),
    };
    if !polish.enabled {
        return Ok(RelaxReport {
            profile: stochastic.clone(),
            stochastic,
            stochastic_converged,
        });
    }
    let dx = initial.grid.dx();
    let step = polish.step.unwrap_or_else(|| default_flow_step(dx));
    let mut profile = relax_gradient_flow(
        &stochastic.state,
        m,
        step,
        polish.residual_tol * step,
        polish.max_iters,
    )?;
    profile.iterations_used += stochastic.iterations_used;
    let mut history = stochastic.energy_history.clone();
    history.extend_from_slice(&profile.energy_history[1..]);
    profile.energy_history = history;
    Ok(RelaxReport {
        profile,
        stochastic,
        stochastic_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lam(l: f64) -> ModelParams {
        ModelParams::new(l).unwrap()
    }

    fn grid(half: f64, dx: f64) -> Grid {
        Grid::with_spacing(-half, half, dx).unwrap()
    }

    fn non_increasing(h: &[f64]) -> bool {
        h.windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()))
    }

    #[test]
    fn kink_guess_shapes() {
        let g = grid(10.0, 0.01);
        let m = lam(0.0);
        let k = initial_kink_guess(g, SeedKind::Kink, m).unwrap();
        let mid = g.len() / 2;
        assert_eq!(k.phi[mid], 0.0);
        assert_eq!((k.phi[0], k.phi[g.len() - 1]), (-1.0, 1.0));
        assert!(k.psi.iter().all(|&v| v == 0.0));
        // tanh(sqrt2 x) solves phi'' = 4 phi (phi^2 - 1)
        let (rp, _) = static_residual(&k, m);
        assert!(max_abs(&rp) < 1e-2);

        let a = initial_kink_guess(g, SeedKind::Antikink, m).unwrap();
        assert!((topological_charge(&a) + 1.0).abs() < 1e-15);
        let p = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let q = initial_kink_guess(g, SeedKind::PsiMinus, m).unwrap();
        assert_eq!(p.mirrored_psi(), q);
        assert!(p.psi[mid] == 0.5);
    }

    #[test]
    fn narrow_grid_rejected() {
        let g = grid(4.0, 0.01);
        assert!(matches!(
            initial_kink_guess(g, SeedKind::Kink, lam(0.0)),
            Err(RelaxError::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn molecule_guess_shape() {
        let g = grid(20.0, 0.01);
        let s = molecule_guess(g);
        let mid = g.len() / 2;
        assert_eq!(s.phi[mid], 1.0);
        assert_eq!(s.psi[mid], 0.0);
        let at = |x: f64| g.nearest_index(x);
        assert!((s.psi[at(1.0)] - 0.5).abs() < 1e-12);
        assert!((s.psi[at(-1.0)] + 0.5).abs() < 1e-12);
        assert!(s.phi[1] < -0.99 && s.phi[g.len() - 2] < -0.99);
        assert_eq!((s.phi[0], s.psi[g.len() - 1]), (-1.0, 0.0));
        assert_eq!(topological_charge(&s), 0.0);
    }

    #[test]
    fn schedule_validation() {
        let mut s = RelaxationSchedule::default();
        assert!(s.validate().is_ok());
        s.amplitude_decay = 1.0;
        assert!(s.validate().is_err());
        let s = RelaxationSchedule {
            initial_amplitude: 0.0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn local_energy_matches_full_difference() {
        let g = grid(6.0, 0.05);
        let m = lam(1.3);
        let s = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let dx = g.dx();
        let mut phi = s.phi.clone();
        let psi = s.psi.clone();
        let full0 = lattice_energy(&phi, &psi, dx, m);
        let (lo, hi) = (40, 60);
        let l0 = local_energy(&phi, &psi, lo - 1, hi + 1, dx, m);
        for v in &mut phi[lo..=hi] {
            *v += 0.01;
        }
        let full1 = lattice_energy(&phi, &psi, dx, m);
        let l1 = local_energy(&phi, &psi, lo - 1, hi + 1, dx, m);
        assert!(((full1 - full0) - (l1 - l0)).abs() < 1e-12);
    }

    #[test]
    fn stochastic_is_deterministic_and_monotone() {
        let g = grid(8.0, 0.05);
        let m = lam(1.0);
        let s0 = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let sched = RelaxationSchedule {
            max_stages: 6,
            rng_seed: 7,
            ..Default::default()
        };
        let run = || match relax_stochastic(&s0, m, &sched) {
            Ok(p) => p,
            Err(RelaxError::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(non_increasing(&a.energy_history));
        assert!(a.energy_history.last() < a.energy_history.first());
        assert_eq!(a.state.phi[0], -1.0);
        assert_eq!(a.state.psi[g.len() - 1], 0.0);
    }

    #[test]
    fn stochastic_is_psi_mirror_equivariant() {
        let g = grid(8.0, 0.05);
        let m = lam(1.0);
        let plus = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let minus = initial_kink_guess(g, SeedKind::PsiMinus, m).unwrap();
        let sched = RelaxationSchedule {
            max_stages: 4,
            rng_seed: 3,
            ..Default::default()
        };
        let best = |s: &FieldState| match relax_stochastic(s, m, &sched) {
            Ok(p) => p,
            Err(RelaxError::NotConverged { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        let a = best(&plus);
        let b = best(&minus);
        assert_eq!(a.state.mirrored_psi().psi, b.state.psi);
        assert_eq!(a.state.phi, b.state.phi);
        assert_eq!(a.energy, b.energy);
    }

    #[test]
    fn endpoints_must_be_vacuum() {
        let g = grid(6.0, 0.05);
        let s = FieldState::uniform(g, FieldPoint::new(0.0, 0.0));
        assert!(matches!(
            relax_stochastic(&s, lam(1.0), &RelaxationSchedule::default()),
            Err(RelaxError::EndpointsNotVacuum(_))
        ));
    }

    #[test]
    fn flow_rejects_unstable_step() {
        let g = grid(6.0, 0.05);
        let s = initial_kink_guess(g, SeedKind::Kink, lam(0.0)).unwrap();
        assert!(matches!(
            relax_gradient_flow(&s, lam(0.0), 0.6 * 0.05 * 0.05, 1e-9, 10),
            Err(RelaxError::UnstableStep { .. })
        ));
    }

    #[test]
    fn exact_kink_is_nearly_fixed_point_of_flow() {
        let g = grid(10.0, 0.01);
        let m = lam(0.0);
        let s = initial_kink_guess(g, SeedKind::Kink, m).unwrap();
        let step = default_flow_step(g.dx());
        // discrete residual of the continuum kink is O(dx^2)
        let p = relax_gradient_flow(&s, m, step, 1e-2 * step, 10).unwrap();
        assert_eq!(p.iterations_used, 1);
        assert!(p.state.psi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flow_reaches_dressed_kink_at_lambda_one() {
        // exact continuum solution: phi = tanh x, psi = ±sqrt(1/2) sech x, E = 5/3
        let g = grid(12.0, 0.04);
        let m = lam(1.0);
        let s = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let step = default_flow_step(g.dx());
        let p = relax_gradient_flow(&s, m, step, 1e-5 * step, 2_000_000).unwrap();
        assert!(non_increasing(&p.energy_history));
        assert!((p.energy - 5.0 / 3.0).abs() < 2e-3, "{}", p.energy);
        let mid = g.len() / 2;
        assert!((p.state.psi[mid] - 0.5_f64.sqrt()).abs() < 2e-3);
        assert!(p.static_residual_max(m) < 1e-4);
    }

    #[test]
    fn profile_symmetries() {
        let g = grid(8.0, 0.05);
        let m = lam(1.0);
        let s = initial_kink_guess(g, SeedKind::PsiPlus, m).unwrap();
        let p = StaticProfile::from_state(s, m, RelaxMethod::Stochastic, 0);
        let r = p.reflected();
        assert!((r.charge() + 1.0).abs() < 1e-15);
        assert_eq!(r.boundary_vacua.0, FieldPoint::new(1.0, 0.0));
        let w = p.width().unwrap();
        // tanh(sqrt2 x) crosses ±tanh(1) at ±1/sqrt2
        assert!((w - SQRT2).abs() < 1e-3, "{w}");
        assert!((r.width().unwrap() - w).abs() < 1e-12);
        assert_eq!(p.mirrored_psi().mirrored_psi(), p);
    }
}
