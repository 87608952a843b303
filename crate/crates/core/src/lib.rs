//! Numerical laboratory for kinematic expansiveness of flows.
//!
//! Planar and toral vector fields are integrated with a fixed-step
//! Runge–Kutta scheme; suspension flows are evaluated exactly from their
//! base map and return time.

pub mod annulus_robust;
pub mod catalog;
pub mod flowcore;
pub mod split_circle;
pub mod separation;
pub mod suspension;
