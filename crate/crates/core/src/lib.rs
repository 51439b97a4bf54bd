//! Cooperative task offloading in mobile edge computing.
//!
//! Each UE owns one computation task with a deadline and may run it at home,
//! upload it to the edge server, or hand it to another UE. The crate provides
//! the closed-form cost model ([`model`]), a seeded scenario generator
//! ([`scenario`]), three solvers ([`icrbi`], [`matching`], [`decentral`]),
//! reference solutions ([`oracle`]) and a Monte-Carlo experiment runner
//! ([`harness`]).

pub mod decentral;
pub mod error;
pub mod harness;
pub mod icrbi;
pub mod matching;
pub mod model;
pub mod oracle;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{Assignment, Scenario, MEC};
