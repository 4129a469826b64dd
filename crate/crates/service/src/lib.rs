//! Persistence, HTTP API, event stream and command line for logic-of-behavior projects.

pub mod api;
pub mod cli;
pub mod project;
pub mod session;
pub mod store;

pub use api::{router, AppState};
pub use project::{Project, ProjectError};
pub use store::{Store, StoreError};
