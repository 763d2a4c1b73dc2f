//! Global analysis of closed-loop attitude dynamics on S² and SO(3).
//!
//! The crate linearizes the controlled spherical pendulum and 3D pendulum,
//! classifies their equilibria, and grows the stable manifolds of the saddle
//! equilibria by integrating a δ-ball of seeds backward in time with
//! variational integrators.

// `!(x > 0.0)` style guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod config;
pub mod geom;
pub mod integrators;
pub mod linearization;
pub mod manifold;
pub mod models;
pub mod spectral;

pub use geom::{Mat3, Rotation, TangentStateS2, TangentStateSO3, UnitVector, Vec3};
pub use models::{EquilibriumId, Model, ModelKind, S2Params, SO3Params, State};
