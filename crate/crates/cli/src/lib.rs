//! Command-line front end: TOML configuration handling and the command
//! dispatcher that turns a config into artifact files on disk.

pub mod config;
pub mod dispatch;
