//! Dataset generators, reports and the `hdlog` command-line driver.

pub mod cli;
pub mod gen;
pub mod report;

pub use gen::{gen_collab, gen_exp, CollabParams, ExpParams, Generated};
