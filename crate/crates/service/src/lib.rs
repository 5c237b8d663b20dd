//! Experiment platform service: campaigns, participant screening, trial sessions and result
//! aggregation over HTTP, persisted as an append-only event log.

pub mod app;
pub mod events;
pub mod http;
pub mod state;
pub mod store;

pub use app::{ApiError, Platform, PlatformConfig, StepView, SubmitOutcome};
pub use events::{Event, EventRecord};
pub use state::PlatformState;
pub use store::{EventStore, JsonlStore, MemoryStore};
