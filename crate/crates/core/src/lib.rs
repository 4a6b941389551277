#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod density;
pub mod design;
pub mod domain;
pub mod emulator;
pub mod engine;
pub mod error;
pub mod implausibility;
pub mod linalg;
pub mod models;
mod par;
pub mod rng;
pub mod simbank;
pub mod stats;

pub use domain::{
    Check, CheckKind, CheckOutcome, ConstraintSet, HyperBox, HyperPoint, ImplausibilityResult, PValueEstimate,
    Scale, SummaryConstraint, SummaryVector,
};
pub use error::{Error, Result};
pub use implausibility::{implausibility, satisfies};
