//! Datalog materialisation and incremental maintenance with rule evaluation
//! over hypertree decompositions.

pub mod decomp;
pub mod dred;
pub mod hdeval;
pub mod join;
pub mod model;
pub mod parse;
pub mod seminaive;
pub mod store;

pub use model::{Atom, Const, Fact, FactSet, Interner, Pred, Program, Rule, RuleId, Substitution, Term, Tuple, Var};
pub use parse::{parse_facts, parse_program, ParseError};
pub use store::{FactStore, Region, Tag};
pub use dred::{EngineConfig, MaterialisationState, Mode, Module, UpdateReport, UpdateRequest};
