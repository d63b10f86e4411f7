//! Simulator for mmWave vehicle-to-vehicle link scheduling with
//! context-aware many-to-many matching.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod matching;
pub mod mobility;
pub mod queueing;
pub mod simulator;

pub use error::{Result, SimError};
