//! Session service for the Gridlock tutor: the event-sourced engine, its
//! HTTP routes, and the offline operations used by the `gridlock` CLI.

pub mod engine;
pub mod error;
pub mod http;
pub mod ops;
pub mod session;

pub use engine::{AssistanceDecision, Delivery, Engine, EngineConfig};
pub use error::ServiceError;
