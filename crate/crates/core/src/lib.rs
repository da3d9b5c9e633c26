pub mod association;
pub mod camera;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod geometry;
pub mod lidar;
pub mod pole_map;
pub mod run;
pub mod sim;

pub use error::{Error, Result};
