//! Mechanics on the manifold of 1-jets.
//!
//! Kinematical states are sections `a ↦ (a, x(a), ẋ(a))` of the source projection of
//! `J¹(O; M)`, sampled on a regular parameter grid. The dynamical state is a
//! fundamental 1-form `φ = F_μ dx^μ + Π^i_μ dx^μ_i` supplied as a pair of evaluators,
//! with no requirement that it be the differential of a Lagrangian. From it the crate
//! derives the Euler operator `D*φ`, the virtual-work functional, Noether currents and
//! the balance identity `∂_i J^i = Φ_i δa^i`, plus exactness diagnostics and the
//! point-mass, rigid-body and strain specializations.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64` aliases at the
//! crate root fix the scalar to `f64`.

// `!(x > 0)` is deliberate throughout: unlike `x <= 0` it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod dynamics;
pub mod error;
pub mod jet;
pub mod noether;
pub mod numeric;
pub mod pointmech;
pub mod rigidbody;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

// `f64` instantiations of the main types.
pub type ParameterGrid64 = jet::ParameterGrid<f64>;
pub type Jet1Point64 = jet::Jet1Point<f64>;
pub type SampledSection64 = jet::SampledSection<f64>;
pub type Variation64 = jet::Variation<f64>;
pub type FundamentalOneForm64 = dynamics::FundamentalOneForm<f64>;
pub type GammaTensor64 = dynamics::GammaTensor<f64>;
pub type BalanceReport64 = noether::BalanceReport<f64>;
pub type GroupActionLinearization64 = noether::GroupActionLinearization<f64>;
pub type PointMassSystem64 = pointmech::PointMassSystem<f64>;
pub type Trajectory64 = pointmech::Trajectory<f64>;
pub type Iso3Element64 = rigidbody::Iso3Element<f64>;
pub type So3Vector64 = rigidbody::So3Vector<f64>;
pub type RigidBodyParams64 = rigidbody::RigidBodyParams<f64>;
pub type RigidBodyState64 = rigidbody::RigidBodyState<f64>;
pub type RigidTrajectory64 = rigidbody::RigidTrajectory<f64>;
pub type DisplacementField64 = continuum::DisplacementField<f64>;

// `f32` instantiations, for callers that trade precision for footprint.
pub type ParameterGrid32 = jet::ParameterGrid<f32>;
pub type SampledSection32 = jet::SampledSection<f32>;
pub type FundamentalOneForm32 = dynamics::FundamentalOneForm<f32>;
pub type Iso3Element32 = rigidbody::Iso3Element<f32>;
