//! Deployable surface of the fallacy detector: HTTP API, analysis cache,
//! chat sessions, article fetching and the `skeptik` command line.

pub mod api;
pub mod cache;
pub mod cli;
pub mod config;
pub mod fetch;
pub mod sessions;
