use std::collections::BTreeSet;
use std::fmt;

use super::query::{Atom, Predicate};
use super::term::{Sym, Term};

/// `S` or `S⁻`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Role {
    pub name: Sym,
    pub inverse: bool,
}

impl Role {
    pub fn new(name: &str, inverse: bool) -> Self {
        Role { name: Sym::new(name), inverse }
    }

    pub fn inv(&self) -> Role {
        Role { name: self.name.clone(), inverse: !self.inverse }
    }

    pub fn pred(&self) -> Predicate {
        Predicate { name: self.name.clone(), arity: 2 }
    }

    /// The atom stating `self(x, y)`.
    pub fn atom(&self, x: Term, y: Term) -> Atom {
        let args = if self.inverse { vec![y, x] } else { vec![x, y] };
        Atom::with_pred(self.pred(), args)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.name, if self.inverse { "-" } else { "" })
    }
}

/// `A`, `∃S` or `∃S⁻`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum BasicConcept {
    Atomic(Sym),
    Exists(Role),
}

impl BasicConcept {
    pub fn atomic(name: &str) -> Self {
        BasicConcept::Atomic(Sym::new(name))
    }

    pub fn exists(name: &str, inverse: bool) -> Self {
        BasicConcept::Exists(Role::new(name, inverse))
    }

    pub fn pred(&self) -> Predicate {
        match self {
            BasicConcept::Atomic(a) => Predicate { name: a.clone(), arity: 1 },
            BasicConcept::Exists(r) => r.pred(),
        }
    }

    /// The atom stating `self(x)`; `filler` is the existential witness for `∃S`.
    pub fn atom(&self, x: Term, filler: Term) -> Atom {
        match self {
            BasicConcept::Atomic(a) => Atom::with_pred(Predicate { name: a.clone(), arity: 1 }, vec![x]),
            BasicConcept::Exists(r) => r.atom(x, filler),
        }
    }
}

impl fmt::Display for BasicConcept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasicConcept::Atomic(a) => write!(f, "{a}"),
            BasicConcept::Exists(r) => write!(f, "EX {r}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum TBoxAxiom {
    ConceptIncl(BasicConcept, BasicConcept),
    RoleIncl(Role, Role),
    ConceptDisj(BasicConcept, BasicConcept),
    RoleDisj(Role, Role),
}

impl TBoxAxiom {
    pub fn is_positive(&self) -> bool {
        matches!(self, TBoxAxiom::ConceptIncl(..) | TBoxAxiom::RoleIncl(..))
    }

    /// `B ⊑ ∃S`: the only axioms whose forward application invents individuals.
    pub fn is_existential(&self) -> bool {
        matches!(self, TBoxAxiom::ConceptIncl(_, BasicConcept::Exists(_)))
    }

    pub fn predicates(&self) -> [Predicate; 2] {
        match self {
            TBoxAxiom::ConceptIncl(l, r) | TBoxAxiom::ConceptDisj(l, r) => [l.pred(), r.pred()],
            TBoxAxiom::RoleIncl(l, r) | TBoxAxiom::RoleDisj(l, r) => [l.pred(), r.pred()],
        }
    }
}

impl fmt::Display for TBoxAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TBoxAxiom::ConceptIncl(l, r) => write!(f, "{l} ISA {r}"),
            TBoxAxiom::RoleIncl(l, r) => write!(f, "{l} ISA {r}"),
            TBoxAxiom::ConceptDisj(l, r) => write!(f, "{l} DISJ {r}"),
            TBoxAxiom::RoleDisj(l, r) => write!(f, "{l} DISJ {r}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TBox {
    pub axioms: Vec<TBoxAxiom>,
}

impl TBox {
    pub fn new(axioms: Vec<TBoxAxiom>) -> Self {
        TBox { axioms }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }

    pub fn positive(&self) -> impl Iterator<Item = &TBoxAxiom> {
        self.axioms.iter().filter(|a| a.is_positive())
    }

    pub fn negative(&self) -> impl Iterator<Item = &TBoxAxiom> {
        self.axioms.iter().filter(|a| !a.is_positive())
    }

    pub fn existential_count(&self) -> usize {
        self.axioms.iter().filter(|a| a.is_existential()).count()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.axioms.iter().flat_map(|a| a.predicates()).collect()
    }

    pub fn role_names(&self) -> BTreeSet<Sym> {
        self.predicates().into_iter().filter(|p| p.arity == 2).map(|p| p.name).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_role_atom_swaps() {
        let r = Role::new("R", true);
        assert_eq!(r.atom(Term::var("x"), Term::var("y")).to_string(), "R(y,x)");
        let b = BasicConcept::exists("R", true);
        assert_eq!(b.atom(Term::var("x"), Term::var("n")).to_string(), "R(n,x)");
    }

    #[test]
    fn display_forms() {
        let ax = TBoxAxiom::ConceptIncl(BasicConcept::exists("managerOf", false), BasicConcept::atomic("manager"));
        assert_eq!(ax.to_string(), "EX managerOf ISA manager");
        let ax = TBoxAxiom::RoleIncl(Role::new("R", true), Role::new("S", false));
        assert_eq!(ax.to_string(), "R- ISA S");
    }
}
