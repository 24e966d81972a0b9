//! Controlled query evaluation over DL-Lite_R ontologies under epistemic-dependency policies.

pub mod dllite;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod gen;
pub mod iga;
pub mod model;
pub mod oracle;
pub mod parse;
pub mod tgd;

pub use error::{CqeError, GuardError, ParseError};
pub use eval::FactSet;
pub use model::*;
