//! A simulated nursery: an infant body in a small room, a scripted caregiver,
//! a staged curriculum and a sparse-distributed speech channel, served to
//! learning agents one step at a time.

pub mod agents;
pub mod body;
pub mod caregiver;
pub mod curriculum;
pub mod drives;
pub mod error;
pub mod instincts;
pub mod observation;
pub mod probes;
pub mod rng;
pub mod runner;
pub mod sdr;
pub mod session;
pub mod world;

pub use error::{Error, Result};
