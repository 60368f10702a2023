//! Command-line front end: law files and the `eval`, `simulate` and `bench`
//! commands.

pub mod commands;
pub mod lawfile;
