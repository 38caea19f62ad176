//! Run configuration, persistence, CLI reports and the HTTP slice API for
//! `pexplore` exploration runs.

pub mod config;
pub mod http;
pub mod pipeline;
pub mod report;
pub mod store;
