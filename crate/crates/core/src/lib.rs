//! Discrete-time simulator of sensing-based semi-persistent scheduling for
//! sidelink V2X broadcast, with blind message replicas on auxiliary sub-bands.
//!
//! The pipeline per 100 ms window is: mobility snapshot, channel update,
//! reception evaluation, metrics accumulation, scheduler step.

pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod plan;
pub mod reception;
pub mod report;
pub mod rng;
pub mod sps;
pub mod trace;

pub use config::RunConfig;
pub use engine::{run, SimConfig, SimulationResult};
pub use error::{ConfigError, SimError, TraceError};
pub use grid::{GridConfig, SubchannelId, WindowIndex};
pub use trace::MobilityTrace;
