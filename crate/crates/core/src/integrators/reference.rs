//! Adaptive RK4 with step doubling on the continuous vector fields, in
//! ambient coordinates. Used only as a test oracle.

use crate::geom::{hat, Mat3, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3};
use crate::models::{S2Params, SO3Params};
use nalgebra::SVector;

type Y<const N: usize> = SVector<f64, N>;

const TOL: f64 = 1e-13;

fn rk4<const N: usize>(f: &impl Fn(&Y<N>) -> Y<N>, y: &Y<N>, h: f64) -> Y<N> {
    let k1 = f(y);
    let k2 = f(&(y + 0.5 * h * k1));
    let k3 = f(&(y + 0.5 * h * k2));
    let k4 = f(&(y + h * k3));
    y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates over signed time `t`.
fn integrate<const N: usize>(f: impl Fn(&Y<N>) -> Y<N>, mut y: Y<N>, t: f64) -> Y<N> {
    let sign = t.signum();
    let mut remaining = t.abs();
    let mut h = remaining.min(1e-3);
    while remaining > 0.0 {
        h = h.min(remaining);
        let full = rk4(&f, &y, sign * h);
        let half = rk4(&f, &rk4(&f, &y, 0.5 * sign * h), 0.5 * sign * h);
        let err = (full - half).amax() / 15.0;
        if err <= TOL || h < 1e-9 {
            y = half + (half - full) / 15.0;
            remaining -= h;
            if err < 0.1 * TOL {
                h *= 1.5;
            }
        } else {
            h *= 0.5;
        }
    }
    y
}

pub fn s2_reference(s: &TangentStateS2, t: f64, p: &S2Params) -> TangentStateS2 {
    let field = |y: &Y<6>| {
        let q = Vec3::new(y[0], y[1], y[2]);
        let w = Vec3::new(y[3], y[4], y[5]);
        let qd = w.cross(&q);
        let wd = p.reduced_moment(&q, &w);
        Y::<6>::from_iterator(qd.iter().chain(wd.iter()).copied())
    };
    let y0 = Y::<6>::from_iterator(s.q.as_vec().iter().chain(s.omega.iter()).copied());
    let y = integrate(field, y0, t);
    TangentStateS2 {
        q: UnitVector::new_unchecked(Vec3::new(y[0], y[1], y[2])),
        omega: Vec3::new(y[3], y[4], y[5]),
    }
}

pub fn so3_reference(s: &TangentStateSO3, t: f64, p: &SO3Params) -> TangentStateSO3 {
    let unpack = |y: &Y<12>| {
        let r = Mat3::from_row_slice(&y.as_slice()[..9]);
        (r, Vec3::new(y[9], y[10], y[11]))
    };
    let pack = |r: &Mat3, w: &Vec3| {
        let rows: Vec<f64> = r.transpose().iter().copied().chain(w.iter().copied()).collect();
        Y::<12>::from_row_slice(&rows)
    };
    let field = |y: &Y<12>| {
        let (r, w) = unpack(y);
        let rot = Rotation::new_unchecked(r);
        let jw = p.inertia.mul(&w);
        let wd = p.inertia.solve(&(-w.cross(&jw) + p.closed_loop_moment(&rot, &w)));
        pack(&(r * hat(&w)), &wd)
    };
    let y = integrate(field, pack(s.r.matrix(), &s.omega), t);
    let (r, w) = unpack(&y);
    TangentStateSO3 { r: Rotation::new_unchecked(r), omega: w }
}
