//! Sections of the approximate functional equation of the Riemann zeta
//! function and the motion of their zeros.
//!
//! * [`special`]: log-gamma, chi, theta, Lambert W, reference zeta.
//! * [`sections`]: classical and Euler-accelerated sections, rearrangements.
//! * [`atlas`]: closed-form zero predictions and Gram points.
//! * [`tracker`]: zero continuation in the section index, collision events.
//! * [`rearranger`]: summation-order experiments.
//! * [`dh`]: the Davenport-Heilbronn control family.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::inconsistent_digit_grouping)]

pub mod atlas;
pub mod config;
pub mod dh;
pub mod error;
pub mod exec;
pub mod roots;
pub mod rearranger;
pub mod sections;
pub mod special;
pub mod tracker;

pub use error::{Error, Result};
pub use exec::{ExecMode, Executor};
pub use sections::{Family, Rearrangement, Section, SectionSpec};
pub use special::{ComplexPoint, Tolerance, C64};
