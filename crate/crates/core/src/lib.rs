//! Discrete Hutchinson operators on finite nets.
//!
//! Renders attractors of iterated function systems (IFS), their fuzzy
//! counterparts (IFZS), generalized systems whose maps take m-tuples (GIFS)
//! and fuzzy generalized systems (GIFZS). Each map is discretized onto a
//! finite net of a box, and the discrete operator is iterated from any finite
//! start. With net fineness ε and contraction constant α the n-th iterate is
//! within `5ε/(1-α) + αⁿ·D` of the true attractor.
//!
//! The crate is `no_std` with `alloc`. File formats, config parsing and the
//! command line live in the `ifsnet` crate.
//!
//! Module map:
//! - [`expr`]: expression language for maps and grey-level functions
//! - [`nets`]: boxes, uniform and aleatory nets, projections
//! - [`systems`]: system specs, Lipschitz constants, resolution planning
//! - [`operators`]: crisp and fuzzy (generalized) Hutchinson steps, Φ⁻¹ tables
//! - [`metrics`]: Hausdorff distance, d∞, stopping rule
//! - [`draw`]: iteration drivers

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod draw;
pub mod expr;
mod math;
pub mod metrics;
pub mod nets;
pub mod operators;
pub mod rng;
pub mod systems;

pub use expr::{Expression, GreyMap, PiecewiseMap};

pub use metrics::{d_infinity, hausdorff, should_stop, IterationHistory, StopReason};
pub use nets::{Domain, Grid, GridIndex, Net, NetKind, Point};

pub use operators::{DiscreteFuzzySet, DiscreteSet, Membership};
pub use systems::{MapSpec, ResolutionPlan, SystemSpec};
