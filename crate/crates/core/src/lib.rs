//! Lagrangian-descriptor fields for dissipative systems: computation, ridge
//! extraction, and transition classification on energy sections.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dynsys;
pub mod error;
pub mod extract;
pub mod hamsec;
pub mod integrate;
pub mod io;
pub mod ldfield;

pub use dynsys::{Equilibrium, Stability, StateVec, SystemId, SystemSpec, VectorField};
pub use error::{Error, Result};
pub use integrate::{
    accumulate_ld, integrate_trajectory, strobe_map, Direction, EscapeRegion, IntegratorConfig,
    LDAccumResult, Method, StrobeResult, Termination, Trajectory,
};
pub use ldfield::{compute_ld_field, normalize_field, GridSpec2D, LDConfig, LDField, Layer, Normalization};
pub use extract::{extract_ridges, ridge_distance, Operator, RidgeSet};
pub use hamsec::{SectionId, SectionSpec, TransitionLabel};

/// Engine version recorded in field files.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
