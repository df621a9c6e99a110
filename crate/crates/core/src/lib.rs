//! Information measures, Eve-channel constructions and feasibility searches
//! for finite tripartite distributions `P(X, Y, Z)`.
//!
//! Numeric routines are generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the documented
//! tolerances assume.

pub mod candidates;
pub mod channel;
pub mod dist;
pub mod error;
pub mod feasibility;
pub mod intrinsic;
pub mod itv;
pub mod lp;
pub mod measures;
pub mod scalar;
pub mod verify;

pub use channel::{binarize, product_binarization, zshape_decompose};
pub use dist::{tuple_label, Alphabet, Axis};
pub use error::{Error, Result};
pub use scalar::{Real, EQ_TOL, SUM_TOL};
pub use verify::{run as run_verification, VerificationReport, VerifyOptions};

pub type JointDistribution = dist::JointDistribution<f64>;
pub type ConditionalSlice = dist::ConditionalSlice<f64>;
pub type Channel = channel::Channel<f64>;
pub type Binarization = channel::Binarization<f64>;
pub type ZShapeDecomposition = channel::ZShapeDecomposition<f64>;
pub type TargetAssignment = itv::TargetAssignment<f64>;
pub type WeightedItv = itv::WeightedItv<f64>;
pub type Table4 = itv::Table4<f64>;
