//! Doubly-fed induction generator model with first-order, super-twisting
//! and fused multimodel sliding-mode torque controllers.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, plotting and
//! the command line live in the `smmc` crate.

#![no_std]

extern crate alloc;

pub mod control;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod multimodel;
pub mod plant;
pub mod sim;
pub mod stability;

pub use control::{ControllerConfig, ControllerMode, SurfaceSpec, SwitchFn};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{compute_metrics, Metrics};
pub use multimodel::{BankSpec, SubModel, ValidityVector};
pub use plant::{MachineParams, Plant, PlantInput, PlantState, ReferenceState, SignConvention};
pub use sim::{run_scenario, Sample, Scenario, Signal, SimTrace};
pub use stability::StabilityCertificate;
