//! Scenario-driven front end: TOML scenarios, operator expressions and the
//! `analyze`, `simulate`, `reconstruct` and `casestudy` commands.

pub mod casestudy;
pub mod commands;
pub mod error;
pub mod expr;
pub mod scenario;

pub use commands::{Options, Outcome};
pub use error::{CliError, Result};
pub use scenario::Scenario;
