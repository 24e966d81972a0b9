//! Terms, atoms, queries, dependencies, TBoxes and formulas.

mod classify;
mod formula;
mod policy;
mod query;
mod tbox;
mod term;

pub use classify::{binary_form, classify, dl_translate, p_edge_cycle, BinaryForm, PolicyClass};
pub use formula::Formula;
pub use policy::{EpistemicDependency, Head, Policy};
pub use query::{
    apply_substitution, canonical_atoms, canonicalize, cq_subsumes, homomorphisms, prune_subsumed, vars_in_order, Atom,
    ConjunctiveQuery, Fresh, Predicate, Substitution, Unifier, UnionOfCqs,
};
pub use tbox::{BasicConcept, Role, TBox, TBoxAxiom};
pub use term::{Sym, Term, GENERATED_PREFIX};

/// `⟨T, P, A⟩`.
#[derive(Clone, Debug)]
pub struct CqeInstance {
    pub tbox: TBox,
    pub policy: Policy,
    pub abox: crate::eval::FactSet,
}
