//! Ricci-Bourguignon flow on the Heisenberg groups `H_n` and the quaternion
//! groups `Q_n`.
//!
//! The crate covers curvature of left-invariant metrics computed from
//! structure constants, integration of the diagonal flow systems, their
//! exact solutions and conserved quantities, the spectral behaviour of the
//! `j(Z)` maps along the flow, and geodesic periods and length scaling on the
//! resulting nilmanifolds.

pub mod algebra;
pub mod curvature;
pub mod error;
pub mod flow;
pub mod format;
pub mod joperator;
pub mod spectrum;
pub mod suite;
pub mod tensor;

pub use algebra::{build_group, GroupFamily, LieAlgebraSpec, MetricState, EPS_POS};
pub use error::{NilflowError, Result};
