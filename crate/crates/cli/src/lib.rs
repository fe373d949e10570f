//! Command line and HTTP front ends for the diagram reward toolkit.

pub mod api;
pub mod cli;
pub mod service;
