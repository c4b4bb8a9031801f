//! Files, configuration and the command-line front end for `latentsig-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod plot;
