//! Variational integrators for both closed loops, in forward and backward
//! form.
//!
//! The S² scheme keeps `‖q‖ = 1` through its square-root update; the SO(3)
//! scheme composes the attitude with an exact rotation each step. In both,
//! the moment at the unknown end of the step is affine in the unknown
//! velocity, so that end is solved in closed form. The forward and backward
//! maps are exact inverses of the same discrete equations.

use thiserror::Error;

use crate::geom::{
    attitude_error_vector, dist_ts2, dist_tso3, exp_right_jacobian, exp_rot, vee_unchecked,
    Mat3, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3,
};
use crate::models::{S2Params, SO3Params};

/// Default time step (s).
pub const DEFAULT_STEP: f64 = 0.002;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-14;
pub const DEFAULT_NEWTON_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("invalid step specification: {0}")]
    InvalidStep(String),
    #[error("step too large: square-root argument 1 − ‖f‖² = {0:e} is not positive")]
    StepTooLarge(f64),
    #[error("Newton iteration for the relative rotation stalled after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("duration {duration} is not a whole number of steps of {h}")]
    NotMultiple { duration: f64, h: f64 },
    #[error("step {index} failed: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<IntegratorError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    /// Time step (s).
    pub h: f64,
    pub direction: Direction,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

impl StepSpec {
    pub fn new(h: f64, direction: Direction) -> Self {
        Self {
            h,
            direction,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iters: DEFAULT_NEWTON_MAX_ITERS,
        }
    }

    pub fn forward(h: f64) -> Self {
        Self::new(h, Direction::Forward)
    }

    pub fn backward(h: f64) -> Self {
        Self::new(h, Direction::Backward)
    }

    pub fn reversed(&self) -> Self {
        let direction = match self.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        };
        Self { direction, ..*self }
    }

    fn validate_common(&self) -> Result<(), IntegratorError> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(IntegratorError::InvalidStep(format!("h must be positive, got {}", self.h)));
        }
        if !(self.newton_tol >= 1e-15) {
            return Err(IntegratorError::InvalidStep(format!(
                "newton_tol must be at least 1e-15, got {}",
                self.newton_tol
            )));
        }
        if self.newton_max_iters == 0 {
            return Err(IntegratorError::InvalidStep("newton_max_iters must be positive".into()));
        }
        Ok(())
    }

    /// Requires `h k_ω < 2`.
    pub fn validate_s2(&self, p: &S2Params) -> Result<(), IntegratorError> {
        self.validate_common()?;
        if self.h * p.k_omega >= 2.0 {
            return Err(IntegratorError::InvalidStep(format!(
                "h·k_ω = {} must be below 2",
                self.h * p.k_omega
            )));
        }
        Ok(())
    }

    /// Requires `h k_Ω / 2 < min J_i`.
    pub fn validate_so3(&self, p: &SO3Params) -> Result<(), IntegratorError> {
        self.validate_common()?;
        if 0.5 * self.h * p.k_omega >= p.inertia.min() {
            return Err(IntegratorError::InvalidStep(format!(
                "h·k_Ω/2 = {} must be below min J_i = {}",
                0.5 * self.h * p.k_omega,
                p.inertia.min()
            )));
        }
        Ok(())
    }
}

impl Default for StepSpec {
    fn default() -> Self {
        Self::forward(DEFAULT_STEP)
    }
}

/// Attitude and angular momentum `Π = JΩ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumState {
    pub r: Rotation,
    pub pi: Vec3,
}

impl MomentumState {
    pub fn from_tangent(s: &TangentStateSO3, p: &SO3Params) -> Self {
        Self { r: s.r, pi: p.inertia.mul(&s.omega) }
    }

    pub fn to_tangent(&self, p: &SO3Params) -> TangentStateSO3 {
        TangentStateSO3 { r: self.r, omega: p.inertia.solve(&self.pi) }
    }
}

/// `√arg − 1` without cancellation. Adding a small increment to `q` keeps
/// the norm drift at roundoff level instead of compounding a scaling error.
fn sqrt_minus_one(arg: f64) -> f64 {
    (arg - 1.0) / (1.0 + arg.sqrt())
}

pub fn s2_step_backward(
    s_next: &TangentStateS2,
    spec: &StepSpec,
    p: &S2Params,
) -> Result<TangentStateS2, IntegratorError> {
    let h = spec.h;
    let q1 = s_next.q.as_vec();
    let w1 = s_next.omega;
    let m1 = p.reduced_moment(q1, &w1);
    let f = h * w1 - (0.5 * h * h) * m1;
    let arg = 1.0 - f.norm_squared();
    if !(arg > 0.0) {
        return Err(IntegratorError::StepTooLarge(arg));
    }
    let q0 = q1 + (sqrt_minus_one(arg) * q1 - f.cross(q1));
    let qd = p.q_d.as_vec();
    let half_damp = 0.5 * h * p.k_omega;
    let w0 = ((1.0 + half_damp) * w1 + (0.5 * h * p.k_q) * qd.cross(&(q0 + q1))) / (1.0 - half_damp);
    Ok(TangentStateS2 { q: UnitVector::new_unchecked(q0), omega: w0 })
}

pub fn s2_step_forward(
    s: &TangentStateS2,
    spec: &StepSpec,
    p: &S2Params,
) -> Result<TangentStateS2, IntegratorError> {
    let h = spec.h;
    let q0 = s.q.as_vec();
    let w0 = s.omega;
    let m0 = p.reduced_moment(q0, &w0);
    let f = h * w0 + (0.5 * h * h) * m0;
    let arg = 1.0 - f.norm_squared();
    if !(arg > 0.0) {
        return Err(IntegratorError::StepTooLarge(arg));
    }
    let q1 = q0 + (sqrt_minus_one(arg) * q0 + f.cross(q0));
    let qd = p.q_d.as_vec();
    let w1 = (w0 + (0.5 * h) * m0 - (0.5 * h * p.k_q) * qd.cross(&q1)) / (1.0 + 0.5 * h * p.k_omega);
    Ok(TangentStateS2 { q: UnitVector::new_unchecked(q1), omega: w1 })
}

/// `J_d = ½ tr[J] I − J`.
pub fn nonstandard_inertia(p: &SO3Params) -> Mat3 {
    Mat3::identity() * (0.5 * p.inertia.trace()) - p.inertia.matrix()
}

/// Solution of the implicit attitude update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeRotation {
    pub f: Rotation,
    pub iterations: usize,
}

/// Solves `(J_d F − Fᵀ J_d)^∨ = a` for `F ∈ SO(3)`.
///
/// Newton iteration on `F = exp(f̂)` with the Jacobian
/// `(tr[J_d F] I − Fᵀ J_d) · J_r(f)`, started from the leading-order
/// solution `f₀ = (tr[J_d] I − J_d)⁻¹ a` (that matrix is `J`). Converged
/// when `‖residual‖ ≤ tol · max(1, ‖a‖)`.
pub fn so3_solve_relative_rotation(
    a: &Vec3,
    j_d: &Mat3,
    tol: f64,
    max_iters: usize,
) -> Result<RelativeRotation, IntegratorError> {
    let j = Mat3::identity() * j_d.trace() - j_d;
    let j_inv = j
        .try_inverse()
        .ok_or_else(|| IntegratorError::InvalidStep("singular inertia".into()))?;
    let mut f = j_inv * a;
    let threshold = tol * a.norm().max(1.0);
    let mut residual = f64::INFINITY;
    for iteration in 0..=max_iters {
        let rot = exp_rot(&f);
        let fm = rot.matrix();
        let jdf = j_d * fm;
        let g = vee_unchecked(&(jdf - jdf.transpose())) - a;
        residual = g.norm();
        if !residual.is_finite() {
            break;
        }
        if residual <= threshold {
            return Ok(RelativeRotation { f: rot, iterations: iteration });
        }
        if iteration == max_iters {
            break;
        }
        let jac = (Mat3::identity() * jdf.trace() - fm.transpose() * j_d) * exp_right_jacobian(&f);
        let Some(step) = jac.lu().solve(&g) else { break };
        f -= step;
    }
    Err(IntegratorError::NewtonDiverged { iterations: max_iters, residual })
}

pub fn so3_step_backward(
    s_next: &MomentumState,
    spec: &StepSpec,
    p: &SO3Params,
) -> Result<MomentumState, IntegratorError> {
    let h = spec.h;
    let r1 = s_next.r;
    let pi1 = s_next.pi;
    let m1 = p.closed_loop_moment(&r1, &p.inertia.solve(&pi1));
    let a = h * (pi1 - (0.5 * h) * m1);
    let j_d = nonstandard_inertia(p);
    let f = so3_solve_relative_rotation(&a, &j_d, spec.newton_tol, spec.newton_max_iters)?.f;
    let r0 = Rotation::new_unchecked(r1.matrix() * f.matrix().transpose());
    let e_r = attitude_error_vector(&r0, &p.r_d, &p.weights);
    let rhs = f.apply(&(pi1 - (0.5 * h) * m1)) + (0.5 * h * p.k_r) * e_r;
    let j = p.inertia.diag();
    let pi0 = Vec3::from_fn(|i, _| rhs[i] / (1.0 - 0.5 * h * p.k_omega / j[i]));
    Ok(MomentumState { r: r0, pi: pi0 })
}

pub fn so3_step_forward(
    s: &MomentumState,
    spec: &StepSpec,
    p: &SO3Params,
) -> Result<MomentumState, IntegratorError> {
    let h = spec.h;
    let r0 = s.r;
    let pi0 = s.pi;
    let m0 = p.closed_loop_moment(&r0, &p.inertia.solve(&pi0));
    let b = h * pi0 + (0.5 * h * h) * m0;
    let j_d = nonstandard_inertia(p);
    // F J_d − J_d Fᵀ = b̂ is the backward equation for Fᵀ with −b.
    let ft = so3_solve_relative_rotation(&(-b), &j_d, spec.newton_tol, spec.newton_max_iters)?.f;
    let r1 = Rotation::new_unchecked(r0.matrix() * ft.matrix().transpose());
    let e_r = attitude_error_vector(&r1, &p.r_d, &p.weights);
    let rhs = ft.apply(&(pi0 + (0.5 * h) * m0)) - (0.5 * h * p.k_r) * e_r;
    let j = p.inertia.diag();
    let pi1 = Vec3::from_fn(|i, _| rhs[i] / (1.0 + 0.5 * h * p.k_omega / j[i]));
    Ok(MomentumState { r: r1, pi: pi1 })
}

/// A closed loop with a discrete flow map.
pub trait DiscreteFlow: Sync {
    type State: Copy + Send + Sync;

    fn step_forward(&self, s: &Self::State, spec: &StepSpec) -> Result<Self::State, IntegratorError>;
    fn step_backward(&self, s: &Self::State, spec: &StepSpec) -> Result<Self::State, IntegratorError>;
    fn validate_spec(&self, spec: &StepSpec) -> Result<(), IntegratorError>;
    /// `‖ω‖` or `‖Ω‖` (rad/s).
    fn speed(&self, s: &Self::State) -> f64;
    /// Distance on the tangent bundle.
    fn distance(&self, a: &Self::State, b: &Self::State) -> f64;

    fn step(&self, s: &Self::State, spec: &StepSpec) -> Result<Self::State, IntegratorError> {
        match spec.direction {
            Direction::Forward => self.step_forward(s, spec),
            Direction::Backward => self.step_backward(s, spec),
        }
    }
}

impl DiscreteFlow for S2Params {
    type State = TangentStateS2;

    fn step_forward(&self, s: &TangentStateS2, spec: &StepSpec) -> Result<TangentStateS2, IntegratorError> {
        s2_step_forward(s, spec, self)
    }

    fn step_backward(&self, s: &TangentStateS2, spec: &StepSpec) -> Result<TangentStateS2, IntegratorError> {
        s2_step_backward(s, spec, self)
    }

    fn validate_spec(&self, spec: &StepSpec) -> Result<(), IntegratorError> {
        spec.validate_s2(self)
    }

    fn speed(&self, s: &TangentStateS2) -> f64 {
        s.speed()
    }

    fn distance(&self, a: &TangentStateS2, b: &TangentStateS2) -> f64 {
        dist_ts2(a, b)
    }
}

impl DiscreteFlow for SO3Params {
    type State = MomentumState;

    fn step_forward(&self, s: &MomentumState, spec: &StepSpec) -> Result<MomentumState, IntegratorError> {
        so3_step_forward(s, spec, self)
    }

    fn step_backward(&self, s: &MomentumState, spec: &StepSpec) -> Result<MomentumState, IntegratorError> {
        so3_step_backward(s, spec, self)
    }

    fn validate_spec(&self, spec: &StepSpec) -> Result<(), IntegratorError> {
        spec.validate_so3(self)
    }

    fn speed(&self, s: &MomentumState) -> f64 {
        self.inertia.solve(&s.pi).norm()
    }

    fn distance(&self, a: &MomentumState, b: &MomentumState) -> f64 {
        dist_tso3(&a.to_tangent(self), &b.to_tangent(self), &self.weights)
    }
}

/// States recorded along a run. `times` is elapsed time `k h` (so for a
/// backward run the state at `t` is `F^{-t}` of the start).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S: Copy> Trajectory<S> {
    pub fn last(&self) -> S {
        *self.states.last().expect("trajectory holds at least the start state")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// A run that stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFailure {
    /// Index of the step that failed (1-based: the step producing state `index`).
    pub index: usize,
    pub error: IntegratorError,
}

/// Number of steps for `duration`, which must be a whole multiple of `h`.
pub fn step_count(duration: f64, h: f64) -> Result<usize, IntegratorError> {
    if !(duration.is_finite() && duration >= 0.0 && h > 0.0) {
        return Err(IntegratorError::NotMultiple { duration, h });
    }
    let n = (duration / h).round();
    if (n * h - duration).abs() > 1e-12 * duration.max(1.0) {
        return Err(IntegratorError::NotMultiple { duration, h });
    }
    Ok(n as usize)
}

/// Runs `n` steps, recording every `stride`-th state and the last one, and
/// stops at the first failing step.
pub fn flow_steps<M: DiscreteFlow>(
    model: &M,
    start: M::State,
    n: usize,
    spec: &StepSpec,
    stride: usize,
) -> (Trajectory<M::State>, Option<StepFailure>) {
    let stride = stride.max(1);
    let capacity = n / stride + 2;
    let mut traj = Trajectory { times: Vec::with_capacity(capacity), states: Vec::with_capacity(capacity) };
    traj.times.push(0.0);
    traj.states.push(start);
    let mut state = start;
    for k in 1..=n {
        match model.step(&state, spec) {
            Ok(next) => state = next,
            Err(error) => return (traj, Some(StepFailure { index: k, error })),
        }
        if k % stride == 0 || k == n {
            traj.times.push(k as f64 * spec.h);
            traj.states.push(state);
        }
    }
    (traj, None)
}

/// Flow map over `duration` (a whole number of steps), in the direction of
/// `spec`.
pub fn flow<M: DiscreteFlow>(
    model: &M,
    start: M::State,
    duration: f64,
    spec: &StepSpec,
    stride: usize,
) -> Result<Trajectory<M::State>, IntegratorError> {
    model.validate_spec(spec)?;
    let n = step_count(duration, spec.h)?;
    match flow_steps(model, start, n, spec, stride) {
        (traj, None) => Ok(traj),
        (_, Some(StepFailure { index, error })) => Err(IntegratorError::AtStep { index, source: Box::new(error) }),
    }
}

/// Final state only, without recording.
pub fn flow_to_end<M: DiscreteFlow>(
    model: &M,
    start: M::State,
    n: usize,
    spec: &StepSpec,
) -> Result<M::State, IntegratorError> {
    let mut state = start;
    for k in 1..=n {
        state = model
            .step(&state, spec)
            .map_err(|e| IntegratorError::AtStep { index: k, source: Box::new(e) })?;
    }
    Ok(state)
}

/// Residual `‖(J_d F − Fᵀ J_d)^∨ − a‖` of a relative rotation.
pub fn relative_rotation_residual(f: &Rotation, j_d: &Mat3, a: &Vec3) -> f64 {
    let jdf = j_d * f.matrix();
    (vee_unchecked(&(jdf - jdf.transpose())) - a).norm()
}

#[cfg(test)]
mod reference;
