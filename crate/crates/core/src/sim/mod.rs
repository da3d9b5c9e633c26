//! Synthetic world: paths, scenarios, sensor synthesis and log persistence

pub mod log;
pub mod scenario;
pub mod synth;
pub mod trajectory;

pub use scenario::Scenario;
pub use synth::{synthesize, SimData};
pub use trajectory::{PathModel, Segment, Trajectory, TruthSample};
