//! Reference evaluators for tests. Everything here is deliberately naive:
//! nested loops over plain fact lists, no indexes, no shared code with the
//! engine beyond the data model.

pub mod checks;
pub mod corpus;
pub mod gen;
pub mod naive;
pub mod width;

pub use gen::{random_instance, random_program_text, Instance};
pub use naive::{add_contract, del_contract, instances, instances_touching, naive_mat, node_matches, red_contract};
pub use width::exact_width;
