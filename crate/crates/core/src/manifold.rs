//! Stable manifolds of saddle equilibria, grown from a δ-ball in the stable
//! eigenspace by the backward discrete flow.

use std::f64::consts::PI;

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{
    dist_ts2, dist_tso3, exp_rot, tangent_project, GeomError, Rotation, TangentStateS2, TangentStateSO3,
    UnitVector, Vec3,
};
use crate::integrators::{flow_steps, flow_to_end, step_count, Direction, DiscreteFlow, IntegratorError, MomentumState, StepSpec};
use crate::linearization::a_matrix_so3;
use crate::models::{equilibrium, EquilibriumId, Model, ModelError, ModelKind, S2Params, SO3Params, State};
use crate::spectral::{eigen_decompose, stable_subspace, SpectralError};

/// Largest admissible ball radius.
pub const MAX_RADIUS: f64 = 0.1;
pub const DEFAULT_RADIUS: f64 = 1e-6;
/// Bisection budget for the SO(3) radius.
const SCALE_ITERS: usize = 60;
/// Stored times match a requested time within this.
const TIME_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("ball radius {0} must lie in (0, 0.1]")]
    BadRadius(f64),
    #[error("{n} seeds requested, need at least {min}")]
    TooFewPoints { n: usize, min: usize },
    #[error("equilibrium {0} is not a saddle of the selected model")]
    NotSaddle(EquilibriumId),
    #[error("time {0} is not on the stored grid")]
    TimeNotStored(f64),
    #[error("seed {0} does not exist")]
    NoSuchSeed(usize),
    #[error("seed {seed} has no stored state at t = {t} (its run stopped at step {step})")]
    SeedFailed { seed: usize, t: f64, step: usize },
    #[error("could not scale seed {0} to the ball radius")]
    Scaling(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Seeds on the sphere of radius δ about an equilibrium, inside its stable
/// eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBall {
    pub model: Model,
    pub equilibrium: EquilibriumId,
    pub center: State,
    pub delta: f64,
    pub seeds: Vec<State>,
    /// Unit direction of each seed in the stable-space coordinates `α`.
    pub directions: Vec<Vec<f64>>,
}

impl SeedBall {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }
}

/// Stable root of `λ² + k_ω λ − k_q = 0`, the double stable eigenvalue of
/// the inverted pendulum.
pub fn s2_stable_rate(p: &S2Params) -> f64 {
    -0.5 * (p.k_omega + (p.k_omega * p.k_omega + 4.0 * p.k_q).sqrt())
}

fn check_radius(delta: f64) -> Result<(), ManifoldError> {
    if delta.is_finite() && delta > 0.0 && delta <= MAX_RADIUS {
        Ok(())
    } else {
        Err(ManifoldError::BadRadius(delta))
    }
}

/// Minimum seed count for a `d`-dimensional stable space.
pub fn min_points(d: usize) -> usize {
    (2 * d).max(4)
}

/// Orthonormal pair spanning the plane normal to `q_d`, equal to `(e1, e2)`
/// when `q_d = e3`.
fn normal_frame(q_d: &UnitVector) -> (Vec3, Vec3) {
    let z = Vec3::z();
    let axis = z.cross(q_d.as_vec());
    let rot = if axis.norm() < 1e-12 {
        if q_d.as_vec()[2] > 0.0 {
            Rotation::identity()
        } else {
            exp_rot(&(PI * Vec3::x()))
        }
    } else {
        let angle = axis.norm().atan2(z.dot(q_d.as_vec()));
        exp_rot(&(angle * axis.normalize()))
    };
    (rot.apply(&Vec3::x()), rot.apply(&Vec3::y()))
}

/// δ-ball about the inverted equilibrium `(−q_d, 0)`: seeds at angles
/// `θ_j = 2πj/n` with `q = exp(α̂)(−q_d)`, `ω = λ_s P_q α`, and
/// `‖α‖ = δ/(1/√2 + |λ_s|)`.
pub fn build_seed_ball_s2(p: &S2Params, delta: f64, n: usize) -> Result<SeedBall, ManifoldError> {
    check_radius(delta)?;
    if n < min_points(2) {
        return Err(ManifoldError::TooFewPoints { n, min: min_points(2) });
    }
    let lambda = s2_stable_rate(p);
    let kappa = delta / (std::f64::consts::FRAC_1_SQRT_2 + lambda.abs());
    let center = -p.q_d;
    let (u1, u2) = normal_frame(&p.q_d);
    let mut seeds = Vec::with_capacity(n);
    let mut directions = Vec::with_capacity(n);
    for j in 0..n {
        let theta = 2.0 * PI * j as f64 / n as f64;
        let (s, c) = theta.sin_cos();
        let alpha = kappa * (c * u1 + s * u2);
        let q = UnitVector::new(exp_rot(&alpha).apply(center.as_vec()))?;
        let omega = tangent_project(&q, &(lambda * alpha));
        seeds.push(State::S2(TangentStateS2::new(q, omega)?));
        directions.push(vec![c, s]);
    }
    Ok(SeedBall {
        model: Model::S2(*p),
        equilibrium: EquilibriumId::Inverted,
        center: State::S2(TangentStateS2::at_rest(center)),
        delta,
        seeds,
        directions,
    })
}

/// Stable eigenvectors at `R_d exp(π ê_i)`, ordered by the axis they
/// displace (`e1`, `e2`, `e3`), as `(η, δΩ)` pairs.
pub fn so3_stable_basis(i: usize, p: &SO3Params) -> Result<Vec<(Vec3, Vec3)>, ManifoldError> {
    let id = EquilibriumId::Flip(i);
    let State::SO3(eq) = equilibrium(&Model::SO3(*p), id)? else { unreachable!() };
    let e = eigen_decompose(&a_matrix_so3(&eq, p).a)?;
    let basis = stable_subspace(&e, None)?;
    let mut vectors: Vec<(usize, Vec3, Vec3)> = basis
        .vectors
        .iter()
        .map(|v| {
            let eta = Vec3::new(v[0], v[1], v[2]);
            let d_omega = Vec3::new(v[3], v[4], v[5]);
            let axis = if eta.amax() > 1e-12 { eta.iamax() } else { d_omega.iamax() };
            (axis, eta, d_omega)
        })
        .collect();
    vectors.sort_by_key(|(axis, _, _)| *axis);
    Ok(vectors.into_iter().map(|(_, eta, d)| (eta, d)).collect())
}

/// δ-ball about the saddle `R_d exp(π ê_i)`: directions on the unit sphere
/// of the stable coordinates, each scaled by bisection so that
/// `dist_tso3(seed, equilibrium) = δ`.
pub fn build_seed_ball_so3(i: usize, p: &SO3Params, delta: f64, n: usize) -> Result<SeedBall, ManifoldError> {
    let id = EquilibriumId::Flip(i);
    if !(1..=3).contains(&i) {
        return Err(ManifoldError::NotSaddle(id));
    }
    check_radius(delta)?;
    let basis = so3_stable_basis(i, p)?;
    let d = basis.len();
    if n < min_points(d) {
        return Err(ManifoldError::TooFewPoints { n, min: min_points(d) });
    }
    let State::SO3(center) = equilibrium(&Model::SO3(*p), id)? else { unreachable!() };
    let dirs = sphere_points(d, n);
    let mut seeds = Vec::with_capacity(n);
    for (j, u) in dirs.iter().enumerate() {
        let (eta, d_omega) = basis
            .iter()
            .zip(u)
            .fold((Vec3::zeros(), Vec3::zeros()), |(a, b), ((e, w), c)| (a + *c * e, b + *c * w));
        let at = |s: f64| TangentStateSO3 { r: center.r.compose(&exp_rot(&(s * eta))), omega: s * d_omega };
        let dist = |s: f64| dist_tso3(&at(s), &center, &p.weights);
        let s = scale_to_radius(dist, delta).ok_or(ManifoldError::Scaling(j))?;
        let seed = at(s);
        seeds.push(State::SO3(TangentStateSO3::new(Rotation::new(*seed.r.matrix())?, seed.omega)?));
    }
    Ok(SeedBall { model: Model::SO3(*p), equilibrium: id, center: State::SO3(center), delta, seeds, directions: dirs })
}

/// Scale `s` with `dist(s) = δ`, by bracketing then bisection.
fn scale_to_radius(dist: impl Fn(f64) -> f64, delta: f64) -> Option<f64> {
    let probe = dist(delta);
    if !(probe.is_finite() && probe > 0.0) {
        return None;
    }
    let mut hi = 2.0 * delta * delta / probe;
    let mut grow = 0;
    while dist(hi) < delta {
        hi *= 2.0;
        grow += 1;
        if grow > SCALE_ITERS {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..SCALE_ITERS {
        let mid = 0.5 * (lo + hi);
        let d = dist(mid);
        if (d - delta).abs() <= 1e-12 * delta {
            return Some(mid);
        }
        if d < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `n` deterministic points on the unit sphere `S^{d−1}`: uniform angles for
/// `d = 2`, a Fibonacci lattice for `d = 3`, and Halton points mapped through
/// Box–Muller and normalized for `d ≥ 4`.
pub fn sphere_points(d: usize, n: usize) -> Vec<Vec<f64>> {
    match d {
        0 => Vec::new(),
        1 => (0..n).map(|j| vec![if j % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..n)
            .map(|j| {
                let (s, c) = (2.0 * PI * j as f64 / n as f64).sin_cos();
                vec![c, s]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|j| {
                    let z = 1.0 - (2 * j + 1) as f64 / n as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let (s, c) = (golden * j as f64).sin_cos();
                    vec![r * c, r * s, z]
                })
                .collect()
        }
        _ => {
            let pairs = d.div_ceil(2);
            (0..n)
                .map(|j| {
                    let index = j as u64 + 1;
                    let mut x = Vec::with_capacity(2 * pairs);
                    for k in 0..pairs {
                        let u1 = radical_inverse(index, PRIMES[2 * k]);
                        let u2 = radical_inverse(index, PRIMES[2 * k + 1]);
                        let r = (-2.0 * u1.ln()).sqrt();
                        let (s, c) = (2.0 * PI * u2).sin_cos();
                        x.push(r * c);
                        x.push(r * s);
                    }
                    x.truncate(d);
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    x.iter().map(|v| v / norm).collect()
                })
                .collect()
        }
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut scale = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale /= base as f64;
    }
    result
}

/// Builds the ball for any saddle: `inverted` on S², `e1`–`e3` on SO(3).
pub fn build_seed_ball(model: &Model, id: EquilibriumId, delta: f64, n: usize) -> Result<SeedBall, ManifoldError> {
    id.check_model(model.kind())?;
    match (model, id) {
        (Model::S2(p), EquilibriumId::Inverted) => build_seed_ball_s2(p, delta, n),
        (Model::SO3(p), EquilibriumId::Flip(i)) => build_seed_ball_so3(i, p, delta, n),
        _ => Err(ManifoldError::NotSaddle(id)),
    }
}

/// Where a seed's backward run stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    /// Step that failed; the trajectory holds the states before it.
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedTrajectory {
    pub states: Vec<State>,
    pub failure: Option<SeedFailure>,
}

/// Backward trajectories of every seed on a common time grid. A failed
/// seed's states are a prefix of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldBundle {
    pub model: Model,
    pub equilibrium: EquilibriumId,
    pub delta: f64,
    pub h: f64,
    pub duration: f64,
    pub stride: usize,
    /// Backward time `t` of each stored state.
    pub times: Vec<f64>,
    pub trajectories: Vec<SeedTrajectory>,
}

impl ManifoldBundle {
    pub fn equilibrium_state(&self) -> Result<State, ManifoldError> {
        Ok(equilibrium(&self.model, self.equilibrium)?)
    }

    pub fn time_index(&self, t: f64) -> Result<usize, ManifoldError> {
        let tol = TIME_MATCH_TOL * t.abs().max(1.0);
        let k = self.times.partition_point(|&x| x < t - tol);
        match self.times.get(k) {
            Some(&x) if (x - t).abs() <= tol => Ok(k),
            _ => Err(ManifoldError::TimeNotStored(t)),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &SeedFailure)> {
        self.trajectories.iter().enumerate().filter_map(|(i, s)| s.failure.as_ref().map(|f| (i, f)))
    }

    /// Stored state of `seed` at `t`.
    pub fn state_at(&self, seed: usize, t: f64) -> Result<State, ManifoldError> {
        let k = self.time_index(t)?;
        let traj = self.trajectories.get(seed).ok_or(ManifoldError::NoSuchSeed(seed))?;
        traj.states.get(k).copied().ok_or_else(|| ManifoldError::SeedFailed {
            seed,
            t,
            step: traj.failure.as_ref().map_or(0, |f| f.step),
        })
    }
}

/// `‖ω‖` or `‖Ω‖`.
pub fn speed(state: &State) -> f64 {
    match state {
        State::S2(s) => s.speed(),
        State::SO3(s) => s.speed(),
    }
}

/// Tangent-bundle distance between two states of `model`.
pub fn distance(model: &Model, a: &State, b: &State) -> f64 {
    match (model, a, b) {
        (Model::S2(_), State::S2(a), State::S2(b)) => dist_ts2(a, b),
        (Model::SO3(p), State::SO3(a), State::SO3(b)) => dist_tso3(a, b, &p.weights),
        _ => f64::NAN,
    }
}

/// Default storage stride: every step on S², every tenth on SO(3).
pub fn default_stride(kind: ModelKind) -> usize {
    match kind {
        ModelKind::S2 => 1,
        ModelKind::SO3 => 10,
    }
}

/// Integrates every seed backward for `duration`, storing every
/// `stride`-th state. Seeds run in parallel; results keep seed order.
pub fn globalize(ball: &SeedBall, duration: f64, spec: &StepSpec, stride: usize) -> Result<ManifoldBundle, ManifoldError> {
    let spec = StepSpec { direction: Direction::Backward, ..*spec };
    let n = step_count(duration, spec.h)?;
    let stride = stride.max(1);
    let trajectories: Vec<SeedTrajectory> = match &ball.model {
        Model::S2(p) => {
            p.validate_spec(&spec)?;
            ball.seeds
                .par_iter()
                .map(|seed| {
                    let State::S2(s) = seed else { unreachable!() };
                    let (traj, failure) = flow_steps(p, *s, n, &spec, stride);
                    seed_trajectory(traj.states.into_iter().map(State::S2).collect(), failure)
                })
                .collect()
        }
        Model::SO3(p) => {
            p.validate_spec(&spec)?;
            ball.seeds
                .par_iter()
                .map(|seed| {
                    let State::SO3(s) = seed else { unreachable!() };
                    let (traj, failure) = flow_steps(p, MomentumState::from_tangent(s, p), n, &spec, stride);
                    let states = traj.states.iter().map(|m| State::SO3(m.to_tangent(p))).collect();
                    seed_trajectory(states, failure)
                })
                .collect()
        }
    };
    Ok(ManifoldBundle {
        model: ball.model,
        equilibrium: ball.equilibrium,
        delta: ball.delta,
        h: spec.h,
        duration,
        stride,
        times: grid(n, stride, spec.h),
        trajectories,
    })
}

fn seed_trajectory(states: Vec<State>, failure: Option<crate::integrators::StepFailure>) -> SeedTrajectory {
    SeedTrajectory {
        states,
        failure: failure.map(|f| SeedFailure { step: f.index, message: f.error.to_string() }),
    }
}

/// Stored times for `n` steps at `stride`, always including the last step.
pub fn grid(n: usize, stride: usize, h: f64) -> Vec<f64> {
    let stride = stride.max(1);
    let mut ks: Vec<usize> = (0..=n).step_by(stride).collect();
    if *ks.last().unwrap() != n {
        ks.push(n);
    }
    ks.into_iter().map(|k| k as f64 * h).collect()
}

/// States of the successful seeds at one stored time.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceStats {
    pub t: f64,
    /// `(seed, state)` for every seed whose run did not fail.
    pub states: Vec<(usize, State)>,
    pub max_speed: f64,
    /// Seeds left out because their run failed.
    pub excluded: Vec<usize>,
}

pub fn slice_stats(bundle: &ManifoldBundle, t: f64) -> Result<SliceStats, ManifoldError> {
    let k = bundle.time_index(t)?;
    let mut states = Vec::with_capacity(bundle.trajectories.len());
    let mut excluded = Vec::new();
    for (seed, traj) in bundle.trajectories.iter().enumerate() {
        if traj.failure.is_some() {
            excluded.push(seed);
        } else {
            states.push((seed, traj.states[k]));
        }
    }
    let max_speed = states.iter().map(|(_, s)| speed(s)).fold(0.0, f64::max);
    Ok(SliceStats { t: bundle.times[k], states, max_speed, excluded })
}

/// Integrates the stored state of `seed` at `t` forward for `t` and returns
/// its distance to the equilibrium, which should be close to δ.
pub fn validate_forward(bundle: &ManifoldBundle, seed: usize, t: f64, spec: &StepSpec) -> Result<f64, ManifoldError> {
    let start = bundle.state_at(seed, t)?;
    let spec = StepSpec { direction: Direction::Forward, h: bundle.h, ..*spec };
    let n = step_count(bundle.times[bundle.time_index(t)?], bundle.h)?;
    let end = match (&bundle.model, start) {
        (Model::S2(p), State::S2(s)) => {
            p.validate_spec(&spec)?;
            State::S2(flow_to_end(p, s, n, &spec)?)
        }
        (Model::SO3(p), State::SO3(s)) => {
            p.validate_spec(&spec)?;
            State::SO3(flow_to_end(p, MomentumState::from_tangent(&s, p), n, &spec)?.to_tangent(p))
        }
        _ => unreachable!("bundle states match the bundle model"),
    };
    Ok(distance(&bundle.model, &end, &bundle.equilibrium_state()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::DEFAULT_STEP;
    use crate::linearization::{a_matrix_s2, c_matrix_s2};

    #[test]
    fn s2_rate_matches_spectrum() {
        let p = S2Params::default();
        let inv = TangentStateS2::at_rest(-UnitVector::e3());
        let lin = a_matrix_s2(&inv, &p);
        let e = eigen_decompose(&lin.a).unwrap();
        let basis = stable_subspace(&e, Some(&c_matrix_s2(&inv))).unwrap();
        assert_eq!(basis.dim(), 2);
        for l in &basis.eigenvalues {
            assert!((l.re - s2_stable_rate(&p)).abs() < 1e-10);
        }
        assert!((s2_stable_rate(&p) + (5f64.sqrt() + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn s2_ball_examples() {
        let p = S2Params::default();
        let ball = build_seed_ball_s2(&p, 1e-6, 100).unwrap();
        assert_eq!(ball.len(), 100);
        let State::S2(center) = ball.center else { panic!() };
        for seed in &ball.seeds {
            let State::S2(s) = seed else { panic!() };
            assert!((dist_ts2(s, &center) - 1e-6).abs() <= 1e-9);
        }
        let State::S2(s0) = ball.seeds[0] else { panic!() };
        // q = exp(α₁ ê₁)(−e3) = −cos α₁ e3 + sin α₁ e2
        let alpha1 = s0.q.as_vec()[1].asin();
        assert!((alpha1 - 4.3008e-7).abs() < 1e-11);
        assert!(s0.q.as_vec()[0].abs() < 1e-20);
        let State::S2(s25) = ball.seeds[25] else { panic!() };
        assert!((s25.q.as_vec()[0] + alpha1.sin()).abs() < 1e-18);
        assert!(s25.q.as_vec()[1].abs() < 1e-18);
        assert!((s25.omega[1] - s0.omega[0]).abs() < 1e-18);

        assert!(matches!(build_seed_ball_s2(&p, 0.0, 100), Err(ManifoldError::BadRadius(_))));
        assert!(matches!(build_seed_ball_s2(&p, 0.2, 100), Err(ManifoldError::BadRadius(_))));
        assert!(matches!(build_seed_ball_s2(&p, 1e-6, 3), Err(ManifoldError::TooFewPoints { .. })));
    }

    #[test]
    fn s2_ball_follows_target() {
        let q_d = UnitVector::normalize(Vec3::new(1.0, -2.0, 0.5)).unwrap();
        let p = S2Params { q_d, ..S2Params::default() };
        let ball = build_seed_ball_s2(&p, 1e-4, 8).unwrap();
        let State::S2(center) = ball.center else { panic!() };
        assert_eq!(center.q, -q_d);
        for seed in &ball.seeds {
            let State::S2(s) = seed else { panic!() };
            assert!((dist_ts2(s, &center) - 1e-4).abs() <= 1e-9);
        }
        let (u1, u2) = normal_frame(&-UnitVector::e3());
        assert!((u1 - Vec3::x()).norm() < 1e-15 && (u2 + Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn so3_basis_and_balls() {
        let p = SO3Params::default();
        let dims: Vec<usize> = (1..=3).map(|i| so3_stable_basis(i, &p).unwrap().len()).collect();
        assert_eq!(dims, vec![3, 4, 5]);

        let basis = so3_stable_basis(1, &p).unwrap();
        let (eta, d_omega) = basis[2];
        assert!((eta - Vec3::z()).norm() < 1e-12);
        assert!((d_omega[2] + 1.0477).abs() < 5e-5);

        let ball = build_seed_ball_so3(1, &p, 1e-6, 112).unwrap();
        assert_eq!(ball.len(), 112);
        assert_eq!(ball.dimension(), 3);
        let State::SO3(center) = ball.center else { panic!() };
        for seed in &ball.seeds {
            let State::SO3(s) = seed else { panic!() };
            assert!((dist_tso3(s, &center, &p.weights) - 1e-6).abs() <= 1e-9);
        }
        let ball = build_seed_ball_so3(3, &p, 1e-6, 976).unwrap();
        assert_eq!((ball.len(), ball.dimension()), (976, 5));
        assert!(matches!(build_seed_ball_so3(0, &p, 1e-6, 100), Err(ManifoldError::NotSaddle(_))));
    }

    #[test]
    fn sphere_points_are_unit() {
        for d in 1..=5 {
            let pts = sphere_points(d, 50);
            assert_eq!(pts.len(), 50);
            for x in &pts {
                assert_eq!(x.len(), d);
                assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        // the lattice is roughly balanced
        let mean: Vec<f64> = (0..3).map(|k| sphere_points(3, 500).iter().map(|x| x[k]).sum::<f64>() / 500.0).collect();
        assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");
        let mean5: f64 = sphere_points(5, 1000).iter().map(|x| x[4]).sum::<f64>() / 1000.0;
        assert!(mean5.abs() < 0.05);
    }

    #[test]
    fn globalize_and_slice() {
        let p = S2Params::default();
        let ball = build_seed_ball_s2(&p, 1e-6, 8).unwrap();
        let b0 = globalize(&ball, 0.0, &StepSpec::backward(DEFAULT_STEP), 1).unwrap();
        assert_eq!(b0.times, vec![0.0]);
        for (traj, seed) in b0.trajectories.iter().zip(&ball.seeds) {
            assert_eq!(traj.states, vec![*seed]);
        }

        let bundle = globalize(&ball, 1.0, &StepSpec::forward(DEFAULT_STEP), 1).unwrap();
        assert_eq!(bundle.times.len(), 501);
        assert!(bundle.trajectories.iter().all(|t| t.states.len() == 501 && t.failure.is_none()));
        let s0 = slice_stats(&bundle, 0.0).unwrap();
        assert!(s0.max_speed < 1e-5);
        let s1 = slice_stats(&bundle, 1.0).unwrap();
        // backward growth at the stable rate
        let rate = (s1.max_speed / s0.max_speed).ln();
        assert!((rate - 1.618).abs() < 0.01, "{rate}");
        assert!(matches!(slice_stats(&bundle, 0.0011), Err(ManifoldError::TimeNotStored(_))));

        let d = validate_forward(&bundle, 3, 1.0, &StepSpec::default()).unwrap();
        assert!((d - 1e-6).abs() < 1e-9, "{d}");
        assert!((validate_forward(&bundle, 3, 0.0, &StepSpec::default()).unwrap() - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn parallel_runs_are_deterministic() {
        let p = SO3Params::default();
        let ball = build_seed_ball_so3(1, &p, 1e-6, 12).unwrap();
        let spec = StepSpec::backward(DEFAULT_STEP);
        let a = globalize(&ball, 0.2, &spec, 10).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| globalize(&ball, 0.2, &spec, 10).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.times.len(), 11);
    }

    #[test]
    fn failures_are_recorded_and_excluded() {
        let p = S2Params::default();
        let mut ball = build_seed_ball_s2(&p, 1e-6, 4).unwrap();
        let q = UnitVector::e1();
        ball.seeds[2] = State::S2(TangentStateS2::new(q, 600.0 * Vec3::z()).unwrap());
        let bundle = globalize(&ball, 0.1, &StepSpec::backward(DEFAULT_STEP), 1).unwrap();
        let failures: Vec<usize> = bundle.failures().map(|(i, _)| i).collect();
        assert_eq!(failures, vec![2]);
        let stats = slice_stats(&bundle, 0.0).unwrap();
        assert_eq!(stats.excluded, vec![2]);
        assert_eq!(stats.states.len(), 3);
        assert!(matches!(bundle.state_at(2, 0.1), Err(ManifoldError::SeedFailed { seed: 2, .. })));
    }

    #[test]
    fn grid_keeps_last_step() {
        let g = grid(7, 3, 0.5);
        assert_eq!(g, vec![0.0, 1.5, 3.0, 3.5]);
        assert_eq!(grid(0, 10, 0.1), vec![0.0]);
    }
}
