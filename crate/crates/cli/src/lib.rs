//! Library surface of the command-line pipeline, exposed so integration
//! tests can exercise the configuration, the raster, and the commands
//! directly.

pub mod commands;
pub mod config;
pub mod pgm;
