//! Campaign driver behind the `molcomm` binary: configuration, command
//! orchestration and CSV/JSON output.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run, Command, Outcome};
pub use config::CampaignConfig;
