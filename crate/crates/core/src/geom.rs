//! Primitives on the two-sphere and the rotation group.
//!
//! Everything here is a pure function of value types. Unit vectors and
//! rotations are validated newtypes: a small defect (integrator roundoff) is
//! absorbed by re-normalizing, a large one is rejected.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Accepted deviation of `‖q‖` from one.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Accepted `‖RᵀR − I‖_F` and `|det R − 1|`.
pub const ROTATION_TOL: f64 = 1e-10;
/// Accepted `|q·ω|` for a tangent state on S².
pub const TANGENCY_TOL: f64 = 1e-10;
/// Accepted `‖M + Mᵀ‖_F` for the vee map.
pub const SKEW_TOL: f64 = 1e-9;
/// Rodrigues switches to its Taylor expansion below this angle.
pub const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeomError {
    #[error("matrix is not skew-symmetric (‖M + Mᵀ‖_F = {0:e})")]
    NotSkew(f64),
    #[error("vector is not unit length (|‖q‖ − 1| = {0:e})")]
    NotUnit(f64),
    #[error("matrix is not a rotation (‖RᵀR − I‖_F = {orth:e}, det = {det})")]
    NotRotation { orth: f64, det: f64 },
    #[error("velocity is not tangent to the sphere (|q·ω| = {0:e})")]
    NotTangent(f64),
    #[error("gain matrix must be diagonal with positive entries")]
    BadGains,
    #[error("non-finite value")]
    NonFinite,
}

/// Validation thresholds. The defaults are the module constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub unit_norm: f64,
    pub rotation: f64,
    pub tangency: f64,
    pub skew: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unit_norm: UNIT_NORM_TOL,
            rotation: ROTATION_TOL,
            tangency: TANGENCY_TOL,
            skew: SKEW_TOL,
        }
    }
}

fn is_finite3(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Skew-symmetric matrix with `hat(v)·y = v × y`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Takes the skew part of `m`, so `hat(vee(m))` is that
/// skew part exactly.
pub fn vee(m: &Mat3) -> Result<Vec3, GeomError> {
    vee_with(m, SKEW_TOL)
}

pub fn vee_with(m: &Mat3, tol: f64) -> Result<Vec3, GeomError> {
    let defect = (m + m.transpose()).norm();
    if !defect.is_finite() {
        return Err(GeomError::NonFinite);
    }
    if defect > tol {
        return Err(GeomError::NotSkew(defect));
    }
    Ok(vee_unchecked(m))
}

/// Vee of the skew part, no precondition check.
pub(crate) fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// `(1 − cos θ)/θ²` and `sin θ/θ` without cancellation.
fn rodrigues_coefficients(theta: f64) -> (f64, f64) {
    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        let half = 0.5 * theta;
        let s = half.sin() / half;
        (theta.sin() / theta, 0.5 * s * s)
    }
}

/// Exponential map `so(3) → SO(3)` via the Rodrigues formula.
pub fn exp_rot(v: &Vec3) -> Rotation {
    let theta = v.norm();
    let (a, b) = rodrigues_coefficients(theta);
    let k = hat(v);
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// Right Jacobian of the exponential map:
/// `exp(hat(v + δ)) ≈ exp(hat(v)) · exp(hat(jr(v) δ))`.
pub fn exp_right_jacobian(v: &Vec3) -> Mat3 {
    let theta = v.norm();
    let k = hat(v);
    let (c1, c2) = if theta < 1e-4 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        let half = 0.5 * theta;
        let s = half.sin() / half;
        (0.5 * s * s, (theta - theta.sin()) / (t2 * theta))
    };
    Mat3::identity() - k * c1 + k * k * c2
}

/// Orthogonal projection of `v` onto the tangent plane at `q`, i.e. `−hat(q)² v`.
pub fn tangent_project(q: &UnitVector, v: &Vec3) -> Vec3 {
    let q = q.as_vec();
    v - q * q.dot(v)
}

/// Configuration error `1 − q·q_d` on S², in `[0, 2]`.
pub fn psi_s2(q: &UnitVector, qd: &UnitVector) -> f64 {
    // ½‖q − q_d‖² equals 1 − q·q_d on the sphere and keeps full relative
    // precision near q = q_d.
    0.5 * (q.as_vec() - qd.as_vec()).norm_squared()
}

/// Attitude error function `½ tr[(I − R_dᵀR) G]`.
pub fn psi_so3(r: &Rotation, rd: &Rotation, g: &PositiveDiagonal) -> f64 {
    // Same value written as ¼ Σ g_j ‖R e_j − R_d e_j‖², which does not
    // cancel for R close to R_d.
    (0..3)
        .map(|j| g.0[j] * (r.0.column(j) - rd.0.column(j)).norm_squared())
        .sum::<f64>()
        * 0.25
}

/// Attitude error vector `e_R = ½ (G R_dᵀR − RᵀR_d G)^∨`.
pub fn attitude_error_vector(r: &Rotation, rd: &Rotation, g: &PositiveDiagonal) -> Vec3 {
    let e = rd.0.transpose() * r.0;
    let gm = g.matrix();
    0.5 * vee_unchecked(&(gm * e - e.transpose() * gm))
}

/// Distance on T S²: `√Ψ(q₁, q₂) + ‖ω₁ − ω₂‖`.
pub fn dist_ts2(a: &TangentStateS2, b: &TangentStateS2) -> f64 {
    psi_s2(&a.q, &b.q).sqrt() + (a.omega - b.omega).norm()
}

/// Distance on T SO(3): `√Ψ(R₁, R₂) + ‖Ω₁ − Ω₂‖`.
pub fn dist_tso3(a: &TangentStateSO3, b: &TangentStateSO3, g: &PositiveDiagonal) -> f64 {
    psi_so3(&a.r, &b.r, g).sqrt() + (a.omega - b.omega).norm()
}

/// Diagonal matrix with strictly positive entries (inertia, error weights).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveDiagonal([f64; 3]);

impl PositiveDiagonal {
    pub fn new(d: [f64; 3]) -> Result<Self, GeomError> {
        if d.iter().all(|x| x.is_finite() && *x > 0.0) {
            Ok(Self(d))
        } else {
            Err(GeomError::BadGains)
        }
    }

    pub fn from_matrix(m: &Mat3) -> Result<Self, GeomError> {
        for i in 0..3 {
            for j in 0..3 {
                if i != j && m[(i, j)] != 0.0 {
                    return Err(GeomError::BadGains);
                }
            }
        }
        Self::new([m[(0, 0)], m[(1, 1)], m[(2, 2)]])
    }

    pub fn diag(&self) -> [f64; 3] {
        self.0
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.0))
    }

    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mul(&self, v: &Vec3) -> Vec3 {
        Vec3::new(self.0[0] * v.x, self.0[1] * v.y, self.0[2] * v.z)
    }

    pub fn solve(&self, v: &Vec3) -> Vec3 {
        Vec3::new(v.x / self.0[0], v.y / self.0[1], v.z / self.0[2])
    }
}

/// Point on S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector(Vec3);

impl UnitVector {
    pub fn new(v: Vec3) -> Result<Self, GeomError> {
        Self::with_tolerance(v, UNIT_NORM_TOL)
    }

    /// Accepts `v` as is when `|‖v‖ − 1| ≤ tol`, re-normalizes up to `10·tol`,
    /// rejects beyond that.
    pub fn with_tolerance(v: Vec3, tol: f64) -> Result<Self, GeomError> {
        if !is_finite3(&v) {
            return Err(GeomError::NonFinite);
        }
        let n = v.norm();
        let defect = (n - 1.0).abs();
        if defect <= tol {
            Ok(Self(v))
        } else if defect <= 10.0 * tol {
            Ok(Self(v / n))
        } else {
            Err(GeomError::NotUnit(defect))
        }
    }

    /// Direction of an arbitrary nonzero vector.
    pub fn normalize(v: Vec3) -> Result<Self, GeomError> {
        let n = v.norm();
        if !n.is_finite() {
            return Err(GeomError::NonFinite);
        }
        if n == 0.0 {
            return Err(GeomError::NotUnit(1.0));
        }
        Ok(Self(v / n))
    }

    /// Wraps `v` without checking. Used by the integrators, whose updates
    /// preserve the norm by construction.
    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        Self(v)
    }

    pub fn e1() -> Self {
        Self(Vec3::x())
    }

    pub fn e2() -> Self {
        Self(Vec3::y())
    }

    pub fn e3() -> Self {
        Self(Vec3::z())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }
}

impl std::ops::Neg for UnitVector {
    type Output = UnitVector;

    fn neg(self) -> UnitVector {
        UnitVector(-self.0)
    }
}

/// Element of SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn new(m: Mat3) -> Result<Self, GeomError> {
        Self::with_tolerance(m, ROTATION_TOL)
    }

    /// Accepts `m` when its orthogonality and determinant defects are within
    /// `tol`, projects it onto SO(3) up to `10·tol`, rejects beyond that.
    pub fn with_tolerance(m: Mat3, tol: f64) -> Result<Self, GeomError> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        let (orth, det) = rotation_defects(&m);
        let worst = orth.max((det - 1.0).abs());
        if worst <= tol {
            Ok(Self(m))
        } else if worst <= 10.0 * tol {
            let svd = m.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            Ok(Self(u * vt))
        } else {
            Err(GeomError::NotRotation { orth, det })
        }
    }

    pub(crate) fn new_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// `(‖RᵀR − I‖_F, det R)`.
    pub fn defects(&self) -> (f64, f64) {
        rotation_defects(&self.0)
    }
}

fn rotation_defects(m: &Mat3) -> (f64, f64) {
    ((m.transpose() * m - Mat3::identity()).norm(), m.determinant())
}

/// Point of T S²: direction `q` and angular velocity `ω ⊥ q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentStateS2 {
    pub q: UnitVector,
    pub omega: Vec3,
}

impl TangentStateS2 {
    pub fn new(q: UnitVector, omega: Vec3) -> Result<Self, GeomError> {
        Self::with_tolerance(q, omega, TANGENCY_TOL)
    }

    pub fn with_tolerance(q: UnitVector, omega: Vec3, tol: f64) -> Result<Self, GeomError> {
        if !is_finite3(&omega) {
            return Err(GeomError::NonFinite);
        }
        let dot = q.as_vec().dot(&omega).abs();
        if dot > tol {
            return Err(GeomError::NotTangent(dot));
        }
        Ok(Self { q, omega })
    }

    pub fn at_rest(q: UnitVector) -> Self {
        Self { q, omega: Vec3::zeros() }
    }

    pub fn speed(&self) -> f64 {
        self.omega.norm()
    }
}

/// Point of T SO(3): attitude `R` and body angular velocity `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentStateSO3 {
    pub r: Rotation,
    pub omega: Vec3,
}

impl TangentStateSO3 {
    pub fn new(r: Rotation, omega: Vec3) -> Result<Self, GeomError> {
        if !is_finite3(&omega) {
            return Err(GeomError::NonFinite);
        }
        Ok(Self { r, omega })
    }

    pub fn at_rest(r: Rotation) -> Self {
        Self { r, omega: Vec3::zeros() }
    }

    pub fn speed(&self) -> f64 {
        self.omega.norm()
    }
}
