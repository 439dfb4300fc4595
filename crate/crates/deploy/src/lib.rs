//! Scenario files, artifact formats, and the pipelines behind the `sls`
//! command-line tool.

pub mod commands;
pub mod error;
pub mod formats;
pub mod scenario;

pub use commands::Context;
pub use error::DeployError;
pub use scenario::{LoadedScenario, Scenario};
