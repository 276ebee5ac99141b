//! Post-stall fixed-wing motion planning and control stack: flat-plate
//! aircraft dynamics, a voxel distance-field environment, RRT seed
//! planning with continuous-curvature smoothing, Hermite-Simpson
//! feasibility trajectory optimization, TVLQR stabilization, and a
//! closed-loop receding-horizon simulation harness.

pub mod dynamics;
pub mod environment;
pub mod harness;
pub mod planner;
pub mod params;
pub mod state;
pub mod trajopt;
pub mod tvlqr;

pub use params::{AeroSurface, AircraftParams};
pub use state::{AircraftState, ControlInput, InputVec, StateVec, INPUT_DIM, STATE_DIM};
