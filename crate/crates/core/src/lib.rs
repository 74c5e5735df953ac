//! Document-driven DBMS knob tuning.
//!
//! The pipeline: segment tuning documents into snippets, extract candidate
//! (snippet, parameter, value) hints, prioritize them, then run an episodic
//! learning loop that translates hints into concrete settings, weighs
//! conflicting recommendations, aggregates them into a handful of
//! configurations, and benchmarks those against the default baseline. The
//! best configuration found within the budget wins.

pub mod agent;
pub mod aggregation;
pub mod catalog;
pub mod config;
pub mod corpus;
pub mod dbms;
pub mod encoder;
pub mod error;
pub mod extraction;
pub mod labels;
pub mod live;
pub mod scorer;
pub mod session;
pub mod synth;
pub mod translation;
pub mod value;

pub use error::{Error, Result};
