//! Fact storage, in-memory FO evaluation and SQL emission.

mod answer;
mod cq;
mod factset;
mod fo;
mod sql;

pub use answer::{answer, answer_expanded, Answer};
pub use cq::{cq_holds, cq_matches, eval_cq};
pub use factset::FactSet;
pub use fo::{check_safe_range, eval_fo, fo_holds, FoEvaluator, Relation};
pub use sql::{fo_to_sql, SqlSchema};
