//! Right-hand sides of the flow variants and their time integration.

mod config;
mod integrate;
mod rhs;
mod state;

pub use config::{Background, FlowConfig, Gauge, PhiLine, Renormalize, Variant};
pub use integrate::{stable_dt, RunOutput, StepOutcome};
pub use rhs::{FlowSystem, Kinematics};
pub use state::{FlowState, Tangent};

#[cfg(test)]
mod tests;
