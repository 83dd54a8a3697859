//! Analytic layer for the two-field potential
//!
//! ```text
//! V(phi, psi) = (phi^2 + psi^2 - 1)^2 + lambda/2 * psi^2
//! ```
//!
//! `lambda = 0` restores the global U(1) symmetry of the complex field
//! `phi + i psi`; `lambda > 0` breaks it explicitly and gives `psi` a mass.
//! For `0 < lambda < 4` the psi axis carries two saddle points, for
//! `lambda >= 4` only the origin is stationary on that axis.

use thiserror::Error;

/// Errors raised while building model parameters.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coupling lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
}

/// Coupling of the explicit U(1)-breaking term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    lambda: f64,
}

impl ModelParams {
    /// Coupling at which the model has an exact global U(1) symmetry.
    pub const U1_SYMMETRIC_LAMBDA: f64 = 0.0;
    /// Coupling above which the psi-axis saddles disappear.
    pub const PHI4_THRESHOLD_LAMBDA: f64 = 4.0;

    pub fn new(lambda: f64) -> Result<Self, ModelError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ModelError::InvalidLambda(lambda));
        }
        Ok(Self { lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// A point in field space, `Phi = phi + i psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub phi: f64,
    pub psi: f64,
}

impl FieldPoint {
    pub const fn new(phi: f64, psi: f64) -> Self {
        Self { phi, psi }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.psi.is_finite()
    }

    /// Image under `psi -> -psi`.
    pub fn mirrored(&self) -> Self {
        Self::new(self.phi, -self.psi)
    }

    pub fn distance(&self, other: &FieldPoint) -> f64 {
        (self.phi - other.phi).hypot(self.psi - other.psi)
    }
}

/// The two true vacua `(-1, 0)` and `(+1, 0)`.
pub const VACUA: [FieldPoint; 2] = [FieldPoint::new(-1.0, 0.0), FieldPoint::new(1.0, 0.0)];

#[inline]
pub fn potential(p: FieldPoint, m: ModelParams) -> f64 {
    let r = p.phi * p.phi + p.psi * p.psi - 1.0;
    r * r + 0.5 * m.lambda * p.psi * p.psi
}

/// `(dV/dphi, dV/dpsi)`.
#[inline]
pub fn grad_potential(p: FieldPoint, m: ModelParams) -> (f64, f64) {
    let r = p.phi * p.phi + p.psi * p.psi - 1.0;
    (4.0 * p.phi * r, 4.0 * p.psi * r + m.lambda * p.psi)
}

/// Symmetric 2x2 matrix of second partials of `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hessian {
    pub phi_phi: f64,
    pub phi_psi: f64,
    pub psi_psi: f64,
}

impl Hessian {
    pub fn as_matrix(&self) -> [[f64; 2]; 2] {
        [[self.phi_phi, self.phi_psi], [self.phi_psi, self.psi_psi]]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.phi_phi + self.psi_psi);
        let half_diff = 0.5 * (self.phi_phi - self.psi_psi);
        let radius = half_diff.hypot(self.phi_psi);
        (mean - radius, mean + radius)
    }
}

pub fn hessian(p: FieldPoint, m: ModelParams) -> Hessian {
    let r = p.phi * p.phi + p.psi * p.psi - 1.0;
    Hessian {
        phi_phi: 4.0 * r + 8.0 * p.phi * p.phi,
        phi_psi: 8.0 * p.phi * p.psi,
        psi_psi: 4.0 * r + 8.0 * p.psi * p.psi + m.lambda,
    }
}

/// Curvatures of `V` at the vacuum `(±1, 0)`: `(m_chi, m_psi) = (8, lambda)`.
///
/// These are the diagonal Hessian entries, i.e. what field theory usually
/// calls squared masses. No square root is taken.
pub fn vacuum_masses(m: ModelParams) -> (f64, f64) {
    let h = hessian(VACUA[1], m);
    (h.phi_phi, h.psi_psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalKind {
    Minimum,
    Saddle,
    LocalMaximum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub location: FieldPoint,
    pub kind: CriticalKind,
    pub potential_value: f64,
    /// Set when a Hessian eigenvalue vanishes; `kind` then only reflects the
    /// semi-definite sign pattern, not a higher-order analysis.
    pub degenerate: bool,
}

const DEGENERACY_EPS: f64 = 1e-12;

/// Kind implied by the Hessian sign pattern. Zero eigenvalues are treated as
/// compatible with either sign.
pub fn kind_from_hessian(h: &Hessian) -> (CriticalKind, bool) {
    let (lo, hi) = h.eigenvalues();
    let degenerate = lo.abs() < DEGENERACY_EPS || hi.abs() < DEGENERACY_EPS;
    let kind = if lo > -DEGENERACY_EPS {
        CriticalKind::Minimum
    } else if hi < DEGENERACY_EPS {
        CriticalKind::LocalMaximum
    } else {
        CriticalKind::Saddle
    };
    (kind, degenerate)
}

fn critical_point(location: FieldPoint, m: ModelParams) -> CriticalPoint {
    let (kind, degenerate) = kind_from_hessian(&hessian(location, m));
    CriticalPoint {
        location,
        kind,
        potential_value: potential(location, m),
        degenerate,
    }
}

/// All stationary points of `V`.
///
/// Besides the origin and the vacua, the only other solutions of
/// `grad V = 0` lie on the psi axis at `psi^2 = 1 - lambda/4`, which exist
/// for `lambda < 4`. At `lambda = 0` they are two representatives of the
/// degenerate vacuum circle.
pub fn classify_extrema(m: ModelParams) -> Vec<CriticalPoint> {
    let mut points = vec![
        critical_point(VACUA[0], m),
        critical_point(VACUA[1], m),
        critical_point(FieldPoint::new(0.0, 0.0), m),
    ];
    if m.lambda < ModelParams::PHI4_THRESHOLD_LAMBDA {
        let psi = (1.0 - 0.25 * m.lambda).sqrt();
        points.push(critical_point(FieldPoint::new(0.0, -psi), m));
        points.push(critical_point(FieldPoint::new(0.0, psi), m));
    }
    points
}
