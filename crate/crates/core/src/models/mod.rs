//! Benchmark systems.

pub mod mcl;
pub mod ugm;

pub use mcl::{MclModel, OccupancyMap, Rect, RobotState, World};
pub use ugm::Ugm1d;
