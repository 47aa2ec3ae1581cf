//! HTTP audit service and command-line front end over `faircompass-core`.
//!
//! Sessions persist as append-only event logs in a directory store and are
//! replayed on start.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod store;

pub use api::{router, serve, AppState};
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use store::Store;
