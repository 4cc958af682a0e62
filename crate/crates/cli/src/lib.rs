//! Command-line harness: configuration ingestion, subcommand dispatch,
//! deterministic seeding, report emission, and the self-test battery.

pub mod commands;
pub mod config;
pub mod criteria;
pub mod gen;
pub mod report;
pub mod selftest;
