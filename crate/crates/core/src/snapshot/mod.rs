//! Byzantine-tolerant atomic snapshot built on reliable broadcast.

pub mod array;
mod byz;
mod monitor;
mod process;
pub mod proof;

pub use byz::twisted;
pub use monitor::SnapMonitor;
pub use process::{SnapNode, SnapObserver};
