//! Coordinate-free linearization of both closed loops.
//!
//! Variations are `q^ε = exp(ε ξ̂) q, ω^ε = ω + ε δω` on T S² and
//! `R^ε = R exp(ε η̂), Ω^ε = Ω + ε δΩ` on T SO(3); the linear state is
//! `x = [ξ; δω]` or `x = [η; δΩ]`.

use nalgebra::{SMatrix, SVector};

use crate::geom::{hat, Mat3, TangentStateS2, TangentStateSO3};
use crate::models::{S2Params, SO3Params, State};

pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat26 = SMatrix<f64, 2, 6>;
pub type Vec6 = SVector<f64, 6>;
/// Linear state `[ξ; δω]` or `[η; δΩ]`.
pub type LinState = Vec6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub a: Mat6,
    /// Admissibility constraint `C x = 0`, present for S² only.
    pub c: Option<Mat26>,
    pub base: State,
}

fn blocks(tl: &Mat3, tr: &Mat3, bl: &Mat3, br: &Mat3) -> Mat6 {
    let mut a = Mat6::zeros();
    a.fixed_view_mut::<3, 3>(0, 0).copy_from(tl);
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(tr);
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(bl);
    a.fixed_view_mut::<3, 3>(3, 3).copy_from(br);
    a
}

/// `A = [[q qᵀ ω̂, I − q qᵀ], [k_q q̂_d q̂, −k_ω I]]`, with `C` attached.
pub fn a_matrix_s2(s: &TangentStateS2, p: &S2Params) -> LinearizedSystem {
    let q = s.q.as_vec();
    let qqt = q * q.transpose();
    let a = blocks(
        &(qqt * hat(&s.omega)),
        &(Mat3::identity() - qqt),
        &(p.k_q * hat(p.q_d.as_vec()) * hat(q)),
        &(-p.k_omega * Mat3::identity()),
    );
    LinearizedSystem { a, c: Some(c_matrix_s2(s)), base: State::S2(*s) }
}

/// Rows `[qᵀ, 0]` and `[−ωᵀ q̂, qᵀ]`.
pub fn c_matrix_s2(s: &TangentStateS2) -> Mat26 {
    let q = s.q.as_vec();
    // −ωᵀ q̂ = (q × ω)ᵀ
    let qw = q.cross(&s.omega);
    let mut c = Mat26::zeros();
    for k in 0..3 {
        c[(0, k)] = q[k];
        c[(1, k)] = qw[k];
        c[(1, k + 3)] = q[k];
    }
    c
}

/// `A = [[−Ω̂, I], [−½ k_R J⁻¹ H, J⁻¹(hat(JΩ) − Ω̂ J − k_Ω I)]]` with
/// `H = tr[RᵀR_d G] I − RᵀR_d G`.
pub fn a_matrix_so3(s: &TangentStateSO3, p: &SO3Params) -> LinearizedSystem {
    let j = p.inertia.matrix();
    let j_inv = Mat3::from_diagonal(&p.inertia.solve(&nalgebra::Vector3::repeat(1.0)));
    let m = s.r.matrix().transpose() * p.r_d.matrix() * p.weights.matrix();
    let h = Mat3::identity() * m.trace() - m;
    let omega_hat = hat(&s.omega);
    let a = blocks(
        &(-omega_hat),
        &Mat3::identity(),
        &(-0.5 * p.k_r * j_inv * h),
        &(j_inv * (hat(&(j * s.omega)) - omega_hat * j - p.k_omega * Mat3::identity())),
    );
    LinearizedSystem { a, c: None, base: State::SO3(*s) }
}
