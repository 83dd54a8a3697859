//! Uniform 1D grid, sampled field configurations and the pointwise and
//! integrated diagnostics computed from them.
//!
//! Spatial derivatives use second-order central differences in the interior
//! and second-order one-sided differences at the two ends. Integrals use the
//! trapezoidal rule.

use thiserror::Error;

use crate::model::{potential, FieldPoint, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("grid needs at least 8 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid bounds must be finite with x_min < x_max, got [{0}, {1}]")]
    BadBounds(f64, f64),
    #[error("array `{name}` has length {len}, expected {expected}")]
    LengthMismatch {
        name: &'static str,
        len: usize,
        expected: usize,
    },
    #[error("array `{name}` has a non-finite entry at index {index}")]
    NonFinite { name: &'static str, index: usize },
    #[error("snapshots live on different grids")]
    GridMismatch,
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self, LatticeError> {
        if n < 8 {
            return Err(LatticeError::TooFewPoints(n));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(LatticeError::BadBounds(x_min, x_max));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Grid covering `[x_min, x_max]` with spacing as close to `dx` as an
    /// integer point count allows.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self, LatticeError> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(LatticeError::BadBounds(x_min, x_max));
        }
        let cells = ((x_max - x_min) / dx).round();
        if !(cells.is_finite() && cells >= 0.0) {
            return Err(LatticeError::BadBounds(x_min, x_max));
        }
        Self::new(x_min, x_max, cells as usize + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Coordinate of sample `i`. Written as a weighted mean of the two ends
    /// so that a grid symmetric about 0 gives `x(n-1-i) == -x(i)` exactly.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        let last = (self.n - 1) as f64;
        let i = i as f64;
        (self.x_min * (last - i) + self.x_max * i) / last
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Index of the sample nearest to `x`, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let t = ((x - self.x_min) / self.dx()).round();
        t.clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Fields and their time derivatives on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn new(
        grid: Grid,
        phi: Vec<f64>,
        psi: Vec<f64>,
        phi_dot: Vec<f64>,
        psi_dot: Vec<f64>,
        time: f64,
    ) -> Result<Self, LatticeError> {
        let s = Self {
            grid,
            phi,
            psi,
            phi_dot,
            psi_dot,
            time,
        };
        s.validate()?;
        Ok(s)
    }

    /// Uniform configuration sitting at `value` with zero time derivatives.
    pub fn uniform(grid: Grid, value: FieldPoint) -> Self {
        let n = grid.len();
        Self {
            grid,
            phi: vec![value.phi; n],
            psi: vec![value.psi; n],
            phi_dot: vec![0.0; n],
            psi_dot: vec![0.0; n],
            time: 0.0,
        }
    }

    /// Static configuration sampled from `f(x) -> (phi, psi)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> (f64, f64)) -> Self {
        let n = grid.len();
        let (phi, psi) = (0..n).map(|i| f(grid.x(i))).unzip();
        Self {
            grid,
            phi,
            psi,
            phi_dot: vec![0.0; n],
            psi_dot: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let expected = self.grid.len();
        for (name, arr) in [
            ("phi", &self.phi),
            ("psi", &self.psi),
            ("phi_dot", &self.phi_dot),
            ("psi_dot", &self.psi_dot),
        ] {
            if arr.len() != expected {
                return Err(LatticeError::LengthMismatch {
                    name,
                    len: arr.len(),
                    expected,
                });
            }
            if let Some(index) = arr.iter().position(|v| !v.is_finite()) {
                return Err(LatticeError::NonFinite { name, index });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn point(&self, i: usize) -> FieldPoint {
        FieldPoint::new(self.phi[i], self.psi[i])
    }

    pub fn is_static(&self) -> bool {
        self.phi_dot.iter().chain(&self.psi_dot).all(|&v| v == 0.0)
    }

    /// Image under `psi -> -psi`.
    pub fn mirrored_psi(&self) -> Self {
        let mut out = self.clone();
        out.psi.iter_mut().for_each(|v| *v = -*v);
        out.psi_dot.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Image under `x -> -x` (array reversal on a grid symmetric about 0).
    /// Time derivatives are kept, so the image of a static kink is a static
    /// antikink.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.grid = Grid {
            x_min: -self.grid.x_max,
            x_max: -self.grid.x_min,
            n: self.grid.n,
        };
        out.phi.reverse();
        out.psi.reverse();
        out.phi_dot.reverse();
        out.psi_dot.reverse();
        out
    }

    /// Image under `phi -> -phi`, exchanging kinks and antikinks.
    pub fn negated_phi(&self) -> Self {
        let mut out = self.clone();
        out.phi.iter_mut().for_each(|v| *v = -*v);
        out.phi_dot.iter_mut().for_each(|v| *v = -*v);
        out
    }
}

/// Second-order first derivative with one-sided ends.
pub fn gradient(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let inv2 = 0.5 / dx;
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * inv2;
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv2;
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv2;
    out
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Hamiltonian density `T^00`.
pub fn energy_density(s: &FieldState, m: ModelParams) -> Vec<f64> {
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    (0..s.len())
        .map(|i| {
            0.5 * (s.phi_dot[i] * s.phi_dot[i]
                + s.psi_dot[i] * s.psi_dot[i]
                + dphi[i] * dphi[i]
                + dpsi[i] * dpsi[i])
                + potential(s.point(i), m)
        })
        .collect()
}

pub fn total_energy(s: &FieldState, m: ModelParams) -> f64 {
    trapezoid(&energy_density(s, m), s.grid.dx())
}

/// Momentum density `-T^01 = -(phi_t phi_x + psi_t psi_x)`; positive for a
/// right-moving kink.
pub fn momentum_density(s: &FieldState) -> Vec<f64> {
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    (0..s.len())
        .map(|i| -(s.phi_dot[i] * dphi[i] + s.psi_dot[i] * dpsi[i]))
        .collect()
}

/// `Q = (phi(+inf) - phi(-inf)) / 2` read off the grid endpoints.
pub fn topological_charge(s: &FieldState) -> f64 {
    0.5 * (s.phi[s.len() - 1] - s.phi[0])
}

/// True when both ends are flat to `tol`, i.e. when the endpoint values are
/// a fair stand-in for the asymptotic ones in [`topological_charge`].
pub fn boundaries_flat(s: &FieldState, tol: f64) -> bool {
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    let n = s.len();
    [0, n - 1]
        .iter()
        .all(|&i| dphi[i].abs() < tol && dpsi[i].abs() < tol)
}

/// Topological charge density `J^0 = phi_x / 2`.
pub fn charge_density(s: &FieldState) -> Vec<f64> {
    let mut d = gradient(&s.phi, s.grid.dx());
    d.iter_mut().for_each(|v| *v *= 0.5);
    d
}

/// Time component of the U(1) current, `J^0_N = 2 (psi phi_t - phi psi_t)`.
///
/// With this sign the matching spatial component is
/// `J^1_N = 2 (phi psi_x - psi phi_x)` and the divergence obeys
/// `d_t J^0_N + d_x J^1_N = 2 lambda phi psi` on solutions. A configuration
/// `R(x) e^{i w t}` carries `Q_N = -2 w \int R^2 dx` in this convention.
pub fn noether_density(s: &FieldState) -> Vec<f64> {
    (0..s.len())
        .map(|i| 2.0 * (s.psi[i] * s.phi_dot[i] - s.phi[i] * s.psi_dot[i]))
        .collect()
}

/// Spatial component `J^1_N = 2 (phi psi_x - psi phi_x)`.
pub fn noether_flux(s: &FieldState) -> Vec<f64> {
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    (0..s.len())
        .map(|i| 2.0 * (s.phi[i] * dpsi[i] - s.psi[i] * dphi[i]))
        .collect()
}

pub fn noether_charge(s: &FieldState) -> f64 {
    trapezoid(&noether_density(s), s.grid.dx())
}

/// Pointwise `|d_t J^0_N + d_x J^1_N - 2 lambda phi psi|` at `s`, from three
/// consecutive snapshots spaced by `dt`. The two nodes at each end are left at 0.
pub fn pcac_residual(
    prev: &FieldState,
    s: &FieldState,
    next: &FieldState,
    dt: f64,
    m: ModelParams,
) -> Result<Vec<f64>, LatticeError> {
    if prev.grid != s.grid || next.grid != s.grid {
        return Err(LatticeError::GridMismatch);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LatticeError::BadTimeStep(dt));
    }
    Ok(pcac_residual_from_currents(
        &noether_density(prev),
        &noether_density(next),
        &noether_flux(s),
        &s.phi,
        &s.psi,
        s.grid.dx(),
        2.0 * dt,
        m,
    ))
}

/// Residual given the charge densities at the two bracketing times
/// (`time_span` apart) and the flux and fields at the middle time.
///
/// Only nodes whose flux stencil is centred on both sides are evaluated; at
/// the node next to an endpoint the one-sided end gradient would make the
/// divergence first order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pcac_residual_from_currents(
    density_before: &[f64],
    density_after: &[f64],
    flux: &[f64],
    phi: &[f64],
    psi: &[f64],
    dx: f64,
    time_span: f64,
    m: ModelParams,
) -> Vec<f64> {
    let n = phi.len();
    let inv2dx = 0.5 / dx;
    let mut out = vec![0.0; n];
    for i in 2..n.saturating_sub(2) {
        let dt_j0 = (density_after[i] - density_before[i]) / time_span;
        let dx_j1 = (flux[i + 1] - flux[i - 1]) * inv2dx;
        let source = 2.0 * m.lambda() * phi[i] * psi[i];
        out[i] = (dt_j0 + dx_j1 - source).abs();
    }
    out
}

/// Pointwise `(phi')^2/2 + (psi')^2/2 - V`; zero for a localized static
/// solution. Time derivatives are ignored.
pub fn first_integral_deviation(s: &FieldState, m: ModelParams) -> Vec<f64> {
    let dx = s.grid.dx();
    let dphi = gradient(&s.phi, dx);
    let dpsi = gradient(&s.psi, dx);
    (0..s.len())
        .map(|i| 0.5 * (dphi[i] * dphi[i] + dpsi[i] * dpsi[i]) - potential(s.point(i), m))
        .collect()
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// One row of the per-step diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsSample {
    pub time: f64,
    pub total_energy: f64,
    pub topological_charge: f64,
    pub noether_charge: f64,
    pub max_first_integral_deviation: f64,
    pub max_pcac_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn grid(x0: f64, x1: f64, dx: f64) -> Grid {
        Grid::with_spacing(x0, x1, dx).unwrap()
    }

    fn kink(g: Grid) -> FieldState {
        FieldState::from_fn(g, |x| ((SQRT2 * x).tanh(), 0.0))
    }

    fn lam(l: f64) -> ModelParams {
        ModelParams::new(l).unwrap()
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::new(0.0, 1.0, 7).is_err());
        assert!(Grid::new(1.0, 1.0, 10).is_err());
        let g = grid(-10.0, 10.0, 0.01);
        assert_eq!(g.len(), 2001);
        assert!((g.dx() - 0.01).abs() < 1e-15);
        for i in 0..g.len() {
            assert_eq!(g.x(g.len() - 1 - i), -g.x(i));
        }
        assert_eq!(g.x(0), -10.0);
        assert_eq!(g.x(2000), 10.0);
    }

    #[test]
    fn state_validation() {
        let g = grid(0.0, 1.0, 0.1);
        let n = g.len();
        let bad = FieldState::new(g, vec![0.0; n], vec![0.0; n - 1], vec![0.0; n], vec![0.0; n], 0.0);
        assert!(matches!(bad, Err(LatticeError::LengthMismatch { name: "psi", .. })));
        let mut phi = vec![0.0; n];
        phi[3] = f64::NAN;
        let bad = FieldState::new(g, phi, vec![0.0; n], vec![0.0; n], vec![0.0; n], 0.0);
        assert!(matches!(bad, Err(LatticeError::NonFinite { name: "phi", index: 3 })));
    }

    #[test]
    fn vacuum_diagnostics_vanish() {
        let s = FieldState::uniform(grid(-5.0, 5.0, 0.05), FieldPoint::new(1.0, 0.0));
        let m = lam(1.0);
        assert!(energy_density(&s, m).iter().all(|&e| e == 0.0));
        assert_eq!(total_energy(&s, m), 0.0);
        assert!(charge_density(&s).iter().all(|&q| q == 0.0));
        assert_eq!(noether_charge(&s), 0.0);
        assert!(first_integral_deviation(&s, m).iter().all(|&v| v == 0.0));
        let r = pcac_residual(&s, &s, &s, 0.01, m).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kink_energy_density_peak() {
        let s = kink(grid(-10.0, 10.0, 0.01));
        let e = energy_density(&s, lam(0.0));
        let mid = s.len() / 2;
        assert_eq!(s.grid.x(mid), 0.0);
        assert!((e[mid] - 2.0).abs() < 1e-3, "{}", e[mid]);
    }

    /// `int (phi')^2 dx` for `phi = tanh(sqrt2 x)` by composite Simpson on
    /// [-20, 20]; equals 4 sqrt2 / 3.
    fn kink_mass_oracle() -> f64 {
        let n = 40_000;
        let h = 40.0 / n as f64;
        let f = |x: f64| {
            let s = 1.0 / (SQRT2 * x).cosh();
            2.0 * s.powi(4)
        };
        let mut acc = f(-20.0) + f(20.0);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(-20.0 + h * k as f64);
        }
        acc * h / 3.0
    }

    #[test]
    fn kink_mass_oracle_closed_form() {
        assert!((kink_mass_oracle() - 4.0 * SQRT2 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kink_total_energy_matches_bogomolny_value() {
        let s = kink(grid(-10.0, 10.0, 0.01));
        let exact = kink_mass_oracle();
        let e = total_energy(&s, lam(0.0));
        assert!((e - exact).abs() / exact < 5e-3);
        // potential does not depend on lambda when psi = 0
        assert_eq!(e, total_energy(&s, lam(3.0)));
    }

    #[test]
    fn well_separated_pair_is_additive() {
        let g = grid(-20.0, 20.0, 0.01);
        let pair = FieldState::from_fn(g, |x| {
            ((SQRT2 * (x + 6.0)).tanh() - (SQRT2 * (x - 6.0)).tanh() - 1.0, 0.0)
        });
        let single = kink_mass_oracle();
        let e = total_energy(&pair, lam(1.0));
        assert!((e / (2.0 * single) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn charges_of_kink_and_antikink() {
        let g = grid(-10.0, 10.0, 0.01);
        let k = kink(g);
        let a = k.negated_phi();
        assert!((topological_charge(&k) - 1.0).abs() < 1e-10);
        assert!((topological_charge(&a) + 1.0).abs() < 1e-10);
        assert!(boundaries_flat(&k, 1e-6));
        let dk = charge_density(&k);
        let mid = k.len() / 2;
        assert!(dk.iter().all(|&v| v >= 0.0));
        assert_eq!(
            dk.iter().cloned().fold(f64::MIN, f64::max),
            dk[mid]
        );
        assert!((trapezoid(&dk, g.dx()) - topological_charge(&k)).abs() < 1e-10);
        let da = charge_density(&a);
        assert!(da.iter().all(|&v| v <= 0.0));
        assert!((trapezoid(&da, g.dx()) - topological_charge(&a)).abs() < 1e-10);
    }

    #[test]
    fn noether_charge_static_and_rotating() {
        let g = grid(-10.0, 10.0, 0.01);
        let k = FieldState::from_fn(g, |x| (x.tanh(), 0.5 / x.cosh()));
        assert_eq!(noether_charge(&k), 0.0);

        // R(x) e^{i w t} at t = 0: phi = R, psi = 0, phi_t = 0, psi_t = w R
        let w = 0.7;
        let r = |x: f64| (-x * x).exp();
        let mut s = FieldState::from_fn(g, |x| (r(x), 0.0));
        for i in 0..g.len() {
            s.psi_dot[i] = w * r(g.x(i));
        }
        // \int exp(-2x^2) dx = sqrt(pi/2)
        let expected = 2.0 * w * (std::f64::consts::PI / 2.0).sqrt();
        assert!((noether_charge(&s) + expected).abs() < 1e-8);
    }

    #[test]
    fn pcac_rejects_mismatched_grids() {
        let a = FieldState::uniform(grid(-1.0, 1.0, 0.1), FieldPoint::new(1.0, 0.0));
        let b = FieldState::uniform(grid(-1.0, 1.0, 0.05), FieldPoint::new(1.0, 0.0));
        assert_eq!(
            pcac_residual(&a, &b, &a, 0.1, lam(1.0)),
            Err(LatticeError::GridMismatch)
        );
    }

    #[test]
    fn static_pcac_spatial_part_converges() {
        // Exact static dressed kink at lambda = 1: phi = tanh x, psi = sqrt(1/2) sech x.
        let m = lam(1.0);
        let b = 0.5_f64.sqrt();
        let max_res = |dx: f64| {
            let s = FieldState::from_fn(grid(-10.0, 10.0, dx), |x| (x.tanh(), b / x.cosh()));
            max_abs(&pcac_residual(&s, &s, &s, 0.01, m).unwrap())
        };
        let coarse = max_res(0.02);
        let fine = max_res(0.01);
        assert!(coarse < 1e-3);
        let ratio = coarse / fine;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn first_integral_examples() {
        let m = lam(0.0);
        let exact = kink(grid(-10.0, 10.0, 0.01));
        assert!(max_abs(&first_integral_deviation(&exact, m)) < 1e-3);
        let coarse = kink(grid(-10.0, 10.0, 0.02));
        assert!(
            max_abs(&first_integral_deviation(&coarse, m))
                > 3.0 * max_abs(&first_integral_deviation(&exact, m))
        );
        let wide = FieldState::from_fn(grid(-10.0, 10.0, 0.01), |x| (x.tanh(), 0.0));
        let dev = first_integral_deviation(&wide, m);
        let mid = wide.len() / 2;
        assert!((dev[mid] + 0.5).abs() < 1e-4);
    }

    #[test]
    fn momentum_of_moving_kink_is_positive() {
        let g = grid(-10.0, 10.0, 0.01);
        let v: f64 = 0.5;
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        let mut s = kink(g);
        for i in 0..g.len() {
            let x = g.x(i);
            let sech = 1.0 / (SQRT2 * gamma * x).cosh();
            s.phi[i] = (SQRT2 * gamma * x).tanh();
            s.phi_dot[i] = -v * gamma * SQRT2 * sech * sech;
        }
        let p = trapezoid(&momentum_density(&s), g.dx());
        // P = gamma m v with m the rest energy
        let expected = gamma * kink_mass_oracle() * v;
        assert!((p - expected).abs() / expected < 1e-3);
    }

    fn arb_state() -> impl Strategy<Value = FieldState> {
        (8usize..40, prop::collection::vec(-2.0f64..2.0, 4 * 40)).prop_map(|(n, vals)| {
            let g = Grid::new(-3.0, 3.0, n).unwrap();
            FieldState::new(
                g,
                vals[..n].to_vec(),
                vals[40..40 + n].to_vec(),
                vals[80..80 + n].to_vec(),
                vals[120..120 + n].to_vec(),
                0.0,
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn energy_density_nonnegative(s in arb_state(), l in 0.0f64..8.0) {
            let m = lam(l);
            prop_assert!(energy_density(&s, m).iter().all(|&e| e >= 0.0));
        }

        #[test]
        fn psi_mirror_preserves_diagnostics(s in arb_state(), l in 0.0f64..8.0) {
            let m = lam(l);
            let mirror = s.mirrored_psi();
            let e = total_energy(&s, m);
            prop_assert!((e - total_energy(&mirror, m)).abs() <= 1e-12 * (1.0 + e.abs()));
            prop_assert_eq!(topological_charge(&s), topological_charge(&mirror));
            prop_assert_eq!(noether_charge(&s), -noether_charge(&mirror));
            let fi = first_integral_deviation(&s, m);
            let fim = first_integral_deviation(&mirror, m);
            prop_assert!(fi.iter().zip(&fim).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs())));
        }

        #[test]
        fn spatial_reflection_flips_charge(s in arb_state()) {
            let r = s.reflected().negated_phi();
            prop_assert_eq!(topological_charge(&r), topological_charge(&s));
            let q = charge_density(&s);
            let qr = charge_density(&s.reflected());
            let n = q.len();
            for i in 0..n {
                prop_assert!((q[i] + qr[n - 1 - i]).abs() <= 1e-12 * (1.0 + q[i].abs()));
            }
        }
    }
}
