//! Closed-loop vector fields of the controlled spherical pendulum (on T S²)
//! and the controlled 3D pendulum (on T SO(3)).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geom::{
    attitude_error_vector, exp_rot, psi_s2, psi_so3, PositiveDiagonal, Rotation, TangentStateS2,
    TangentStateSO3, UnitVector, Vec3,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("unknown model `{0}` (expected s2 or so3)")]
    UnknownModel(String),
    #[error("unknown equilibrium `{0}`")]
    UnknownEquilibrium(String),
    #[error("equilibrium `{equilibrium}` does not exist for model {model}")]
    EquilibriumModelMismatch { equilibrium: EquilibriumId, model: ModelKind },
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::InvalidParameter { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    S2,
    SO3,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::S2 => "s2",
            ModelKind::SO3 => "so3",
        })
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s2" => Ok(ModelKind::S2),
            "so3" => Ok(ModelKind::SO3),
            other => Err(ModelError::UnknownModel(other.to_string())),
        }
    }
}

/// Named equilibria. `Hanging`/`Inverted` live on T S², the rest on T SO(3);
/// `Flip(i)` is the desired attitude rotated by π about body axis `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EquilibriumId {
    Hanging,
    Inverted,
    Desired,
    Flip(usize),
}

impl EquilibriumId {
    pub fn model(&self) -> ModelKind {
        match self {
            EquilibriumId::Hanging | EquilibriumId::Inverted => ModelKind::S2,
            EquilibriumId::Desired | EquilibriumId::Flip(_) => ModelKind::SO3,
        }
    }

    pub fn check_model(&self, model: ModelKind) -> Result<(), ModelError> {
        if self.model() == model {
            Ok(())
        } else {
            Err(ModelError::EquilibriumModelMismatch { equilibrium: *self, model })
        }
    }
}

impl fmt::Display for EquilibriumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquilibriumId::Hanging => f.write_str("hanging"),
            EquilibriumId::Inverted => f.write_str("inverted"),
            EquilibriumId::Desired => f.write_str("desired"),
            EquilibriumId::Flip(i) => write!(f, "e{i}"),
        }
    }
}

impl FromStr for EquilibriumId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hanging" => Ok(EquilibriumId::Hanging),
            "inverted" => Ok(EquilibriumId::Inverted),
            "desired" | "identity" => Ok(EquilibriumId::Desired),
            "e1" => Ok(EquilibriumId::Flip(1)),
            "e2" => Ok(EquilibriumId::Flip(2)),
            "e3" => Ok(EquilibriumId::Flip(3)),
            other => Err(ModelError::UnknownEquilibrium(other.to_string())),
        }
    }
}

/// Spherical pendulum with the PD law on S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S2Params {
    /// Mass (kg).
    pub m: f64,
    /// Link length (m).
    pub l: f64,
    /// Gravity (m/s²).
    pub g: f64,
    pub k_q: f64,
    pub k_omega: f64,
    pub q_d: UnitVector,
}

impl S2Params {
    pub fn new(
        m: f64,
        l: f64,
        g: f64,
        k_q: f64,
        k_omega: f64,
        q_d: UnitVector,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            m: positive("m", m)?,
            l: positive("l", l)?,
            g: positive("g", g)?,
            k_q: positive("kq", k_q)?,
            k_omega: positive("komega", k_omega)?,
            q_d,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        Self::new(self.m, self.l, self.g, self.k_q, self.k_omega, self.q_d).map(|_| ())
    }

    pub fn ml2(&self) -> f64 {
        self.m * self.l * self.l
    }

    /// Closed-loop moment per unit `ml²`, i.e. `−k_ω ω − k_q q_d × q`.
    pub fn reduced_moment(&self, q: &Vec3, omega: &Vec3) -> Vec3 {
        -self.k_omega * omega - self.k_q * self.q_d.as_vec().cross(q)
    }
}

impl Default for S2Params {
    fn default() -> Self {
        Self { m: 1.0, l: 1.0, g: 9.81, k_q: 1.0, k_omega: 1.0, q_d: UnitVector::e3() }
    }
}

/// 3D pendulum with the PD law on SO(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SO3Params {
    /// Inertia about the pivot (kg·m²).
    pub inertia: PositiveDiagonal,
    /// Pivot to center of mass, body frame (m).
    pub rho: Vec3,
    pub m: f64,
    pub g: f64,
    /// Weights of the attitude error function.
    pub weights: PositiveDiagonal,
    pub k_r: f64,
    pub k_omega: f64,
    pub r_d: Rotation,
}

impl SO3Params {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        inertia: PositiveDiagonal,
        rho: Vec3,
        m: f64,
        g: f64,
        weights: PositiveDiagonal,
        k_r: f64,
        k_omega: f64,
        r_d: Rotation,
    ) -> Result<Self, ModelError> {
        if !rho.iter().all(|x| x.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "rho", value: f64::NAN });
        }
        Ok(Self {
            inertia,
            rho,
            m: positive("m", m)?,
            g: positive("g", g)?,
            weights,
            k_r: positive("kR", k_r)?,
            k_omega: positive("kOmega", k_omega)?,
            r_d,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        Self::new(
            self.inertia,
            self.rho,
            self.m,
            self.g,
            self.weights,
            self.k_r,
            self.k_omega,
            self.r_d,
        )
        .map(|_| ())
    }

    /// Closed-loop moment `−k_R e_R − k_Ω Ω`, gravity already cancelled.
    pub fn closed_loop_moment(&self, r: &Rotation, omega: &Vec3) -> Vec3 {
        -self.k_r * attitude_error_vector(r, &self.r_d, &self.weights) - self.k_omega * omega
    }
}

impl Default for SO3Params {
    fn default() -> Self {
        Self {
            inertia: PositiveDiagonal::new([3.0, 2.0, 1.0]).unwrap(),
            rho: Vec3::new(0.0, 0.0, 0.5),
            m: 1.0,
            g: 9.81,
            weights: PositiveDiagonal::new([0.9, 1.0, 1.1]).unwrap(),
            k_r: 1.0,
            k_omega: 1.0,
            r_d: Rotation::identity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivS2 {
    pub q_dot: Vec3,
    pub omega_dot: Vec3,
}

/// `Ṙ = R hat(generator)`; the generator is the body angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivSO3 {
    pub generator: Vec3,
    pub omega_dot: Vec3,
}

/// Control moment `u = ml²(−k_ω ω − k_q q_d × q − (g/l) q × e₃)` in N·m.
pub fn s2_control_moment(s: &TangentStateS2, p: &S2Params) -> Vec3 {
    let q = s.q.as_vec();
    let gravity = (p.g / p.l) * q.cross(&Vec3::z());
    p.ml2() * (p.reduced_moment(q, &s.omega) - gravity)
}

pub fn s2_vector_field(s: &TangentStateS2, p: &S2Params) -> StateDerivS2 {
    let q = s.q.as_vec();
    StateDerivS2 {
        q_dot: s.omega.cross(q),
        omega_dot: p.reduced_moment(q, &s.omega),
    }
}

/// Control moment `u = −k_R e_R − k_Ω Ω − m g ρ × Rᵀe₃`.
pub fn so3_control_moment(s: &TangentStateSO3, p: &SO3Params) -> Vec3 {
    let gravity = p.m * p.g * p.rho.cross(&(s.r.matrix().transpose() * Vec3::z()));
    p.closed_loop_moment(&s.r, &s.omega) - gravity
}

pub fn so3_vector_field(s: &TangentStateSO3, p: &SO3Params) -> StateDerivSO3 {
    let j_omega = p.inertia.mul(&s.omega);
    let rhs = -s.omega.cross(&j_omega) + p.closed_loop_moment(&s.r, &s.omega);
    StateDerivSO3 { generator: s.omega, omega_dot: p.inertia.solve(&rhs) }
}

/// `V = ½ ω·ω + k_q Ψ(q, q_d)`.
pub fn lyapunov_s2(s: &TangentStateS2, p: &S2Params) -> f64 {
    0.5 * s.omega.norm_squared() + p.k_q * psi_s2(&s.q, &p.q_d)
}

/// `V = ½ Ω·JΩ + k_R Ψ(R, R_d)`.
pub fn lyapunov_so3(s: &TangentStateSO3, p: &SO3Params) -> f64 {
    0.5 * s.omega.dot(&p.inertia.mul(&s.omega)) + p.k_r * psi_so3(&s.r, &p.r_d, &p.weights)
}

/// `[(q_d, 0), (−q_d, 0)]`: hanging, then inverted.
pub fn s2_equilibria(p: &S2Params) -> [TangentStateS2; 2] {
    [TangentStateS2::at_rest(p.q_d), TangentStateS2::at_rest(-p.q_d)]
}

/// `[(R_d, 0), (R_d exp(π ê_i), 0) for i = 1, 2, 3]`.
pub fn so3_equilibria(p: &SO3Params) -> [TangentStateSO3; 4] {
    let flip = |i: usize| {
        let mut axis = Vec3::zeros();
        axis[i] = PI;
        TangentStateSO3::at_rest(p.r_d.compose(&exp_rot(&axis)))
    };
    [TangentStateSO3::at_rest(p.r_d), flip(0), flip(1), flip(2)]
}

/// Closed-loop system with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    S2(S2Params),
    SO3(SO3Params),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::S2(_) => ModelKind::S2,
            Model::SO3(_) => ModelKind::SO3,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::S2 => Model::S2(S2Params::default()),
            ModelKind::SO3 => Model::SO3(SO3Params::default()),
        }
    }
}

/// A state of either system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    S2(TangentStateS2),
    SO3(TangentStateSO3),
}

/// All equilibria of `model`, in the order of [`s2_equilibria`] / [`so3_equilibria`].
pub fn equilibria(model: &Model) -> Vec<State> {
    match model {
        Model::S2(p) => s2_equilibria(p).into_iter().map(State::S2).collect(),
        Model::SO3(p) => so3_equilibria(p).into_iter().map(State::SO3).collect(),
    }
}

/// The state of a named equilibrium.
pub fn equilibrium(model: &Model, id: EquilibriumId) -> Result<State, ModelError> {
    id.check_model(model.kind())?;
    let all = equilibria(model);
    Ok(match id {
        EquilibriumId::Hanging | EquilibriumId::Desired => all[0],
        EquilibriumId::Inverted => all[1],
        EquilibriumId::Flip(i) if (1..=3).contains(&i) => all[i],
        EquilibriumId::Flip(_) => return Err(ModelError::UnknownEquilibrium(id.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2(q: Vec3, w: Vec3) -> TangentStateS2 {
        TangentStateS2::new(UnitVector::new(q).unwrap(), w).unwrap()
    }

    fn so3(r: Rotation, w: Vec3) -> TangentStateSO3 {
        TangentStateSO3::new(r, w).unwrap()
    }

    #[test]
    fn s2_control_moment_examples() {
        let p = S2Params::default();
        assert_eq!(s2_control_moment(&s2(Vec3::z(), Vec3::zeros()), &p), Vec3::zeros());
        let u = s2_control_moment(&s2(Vec3::x(), Vec3::zeros()), &p);
        assert!((u - Vec3::new(0.0, 8.81, 0.0)).norm() < 1e-14);
        let u = s2_control_moment(&s2(Vec3::z(), 0.1 * Vec3::x()), &p);
        assert!((u - Vec3::new(-0.1, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn s2_vector_field_examples() {
        let p = S2Params::default();
        for q in [Vec3::z(), -Vec3::z()] {
            let d = s2_vector_field(&s2(q, Vec3::zeros()), &p);
            assert_eq!(d.q_dot, Vec3::zeros());
            assert_eq!(d.omega_dot, Vec3::zeros());
        }
        let d = s2_vector_field(&s2(Vec3::x(), Vec3::zeros()), &p);
        assert_eq!(d.omega_dot, Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(d.q_dot, Vec3::zeros());
    }

    #[test]
    fn s2_vector_field_is_tangent() {
        let p = S2Params::default();
        let q = UnitVector::normalize(Vec3::new(0.3, -0.4, 0.8)).unwrap();
        let w = crate::geom::tangent_project(&q, &Vec3::new(1.0, 2.0, -0.5));
        let s = TangentStateS2::new(q, w).unwrap();
        let d = s2_vector_field(&s, &p);
        assert!(d.q_dot.dot(q.as_vec()).abs() < 1e-15);
        // d/dt (q·ω) = ω̇·q + ω·q̇
        assert!((d.omega_dot.dot(q.as_vec()) + w.dot(&d.q_dot)).abs() < 1e-14);
    }

    #[test]
    fn so3_control_moment_examples() {
        let p = SO3Params::default();
        let id = Rotation::identity();
        assert!(so3_control_moment(&so3(id, Vec3::zeros()), &p).norm() < 1e-15);
        assert_eq!(so3_control_moment(&so3(id, Vec3::z()), &p), Vec3::new(0.0, 0.0, -1.0));
        let r = exp_rot(&(0.1 * Vec3::z()));
        let u = so3_control_moment(&so3(r, Vec3::zeros()), &p);
        assert!((u - Vec3::new(0.0, 0.0, -0.95 * 0.1f64.sin())).norm() < 1e-15);
    }

    #[test]
    fn so3_gravity_cancels() {
        let p = SO3Params { rho: Vec3::new(0.2, -0.1, 0.4), ..SO3Params::default() };
        let s = so3(exp_rot(&Vec3::new(0.4, 1.0, -0.3)), Vec3::new(0.1, 0.2, 0.3));
        let u = so3_control_moment(&s, &p);
        let gravity = p.m * p.g * p.rho.cross(&(s.r.matrix().transpose() * Vec3::z()));
        assert!((u + gravity - p.closed_loop_moment(&s.r, &s.omega)).norm() < 1e-14);
    }

    #[test]
    fn so3_vector_field_examples() {
        let p = SO3Params::default();
        let d = so3_vector_field(&so3(Rotation::identity(), Vec3::zeros()), &p);
        assert_eq!(d.omega_dot, Vec3::zeros());
        let d = so3_vector_field(&so3(exp_rot(&(PI * Vec3::y())), Vec3::zeros()), &p);
        assert!(d.omega_dot.norm() < 1e-15);
        let d = so3_vector_field(&so3(Rotation::identity(), Vec3::z()), &p);
        assert_eq!(d.omega_dot, Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(d.generator, Vec3::z());
    }

    #[test]
    fn lyapunov_examples() {
        let p = S2Params::default();
        assert_eq!(lyapunov_s2(&s2(Vec3::z(), Vec3::zeros()), &p), 0.0);
        assert_eq!(lyapunov_s2(&s2(-Vec3::z(), Vec3::zeros()), &p), 2.0);
        assert_eq!(lyapunov_s2(&s2(Vec3::z(), Vec3::x()), &p), 0.5);

        let p = SO3Params::default();
        assert_eq!(lyapunov_so3(&so3(Rotation::identity(), Vec3::zeros()), &p), 0.0);
        assert_eq!(lyapunov_so3(&so3(Rotation::identity(), Vec3::x()), &p), 1.5);
        let v = lyapunov_so3(&so3(exp_rot(&(PI * Vec3::x())), Vec3::zeros()), &p);
        assert!((v - 2.1).abs() < 1e-14);
    }

    #[test]
    fn equilibria_examples() {
        let p = S2Params::default();
        let eq = s2_equilibria(&p);
        assert_eq!(eq[0].q.as_vec(), &Vec3::z());
        assert_eq!(eq[1].q.as_vec(), &-Vec3::z());

        let p = SO3Params::default();
        let eq = so3_equilibria(&p);
        let diags = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
        for (s, d) in eq.iter().zip(diags) {
            let expected = crate::geom::Mat3::from_diagonal(&Vec3::from(d));
            assert!((s.r.matrix() - expected).norm() < 1e-15);
            let f = so3_vector_field(s, &p);
            assert!(f.omega_dot.norm() < 1e-12);
            assert!(attitude_error_vector(&s.r, &p.r_d, &p.weights).norm() < 1e-12);
        }

        let rd = exp_rot(&(0.3 * Vec3::x()));
        let p = SO3Params { r_d: rd, ..SO3Params::default() };
        for (i, s) in so3_equilibria(&p).iter().enumerate().skip(1) {
            let mut axis = Vec3::zeros();
            axis[i - 1] = PI;
            let expected = rd.matrix() * exp_rot(&axis).matrix();
            assert!((s.r.matrix() - expected).norm() < 1e-15);
            assert!(so3_vector_field(s, &p).omega_dot.norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_gains() {
        assert!(matches!(
            S2Params::new(1.0, 1.0, 9.81, 0.0, 1.0, UnitVector::e3()),
            Err(ModelError::InvalidParameter { name: "kq", .. })
        ));
        let p = SO3Params { k_omega: -1.0, ..SO3Params::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn named_equilibria() {
        let m = Model::default_for(ModelKind::SO3);
        let e2: EquilibriumId = "e2".parse().unwrap();
        let State::SO3(s) = equilibrium(&m, e2).unwrap() else { panic!() };
        assert!((s.r.matrix()[(0, 0)] + 1.0).abs() < 1e-15);
        assert!(equilibrium(&m, EquilibriumId::Inverted).is_err());
        assert!("e4".parse::<EquilibriumId>().is_err());
    }
}
