//! 2D mass-spring-damper simulation of the arm.
//!
//! The body is a grid of point masses connected by viscous-elastic elements
//! (spring and damper in parallel, both acting along the element axis). The
//! top row of nodes is kinematically driven: its horizontal position follows
//! the excitation waveform, the vertical coordinate stays clamped at rest.
//! Free nodes are integrated with RK4 at `record_dt / substeps`.

mod body;
mod excitation;
mod sim;
mod trajectory;

pub use body::{build_body, element_force, BodyConfig, BodyModel, BodyState, Element, Node};
pub use excitation::{excitation, excitation_velocity, ExcitationParams};
pub use sim::{mechanical_energy, simulate, step, SimParams};
pub use trajectory::Trajectory;
