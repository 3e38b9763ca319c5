//! Byzantine-tolerant shared-memory objects on a deterministic simulator.

pub mod checker;
pub mod codec;
pub mod histfile;
pub mod rbcast;
pub mod scenario;
pub mod sim;
pub mod snapshot;
pub mod transfer;
