use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Atom, Predicate, Sym, Term};

/// Ground facts grouped by predicate.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FactSet {
    rels: BTreeMap<Predicate, BTreeSet<Vec<Sym>>>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_atoms<I: IntoIterator<Item = Atom>>(atoms: I) -> Self {
        let mut f = FactSet::new();
        for a in atoms {
            f.insert(a);
        }
        f
    }

    /// Panics on non-ground atoms.
    pub fn insert(&mut self, a: Atom) -> bool {
        let tuple: Vec<Sym> = a
            .args
            .into_iter()
            .map(|t| match t {
                Term::Const(c) => c,
                Term::Var(v) => panic!("non-ground fact with variable {v}"),
            })
            .collect();
        self.rels.entry(a.pred).or_default().insert(tuple)
    }

    pub fn contains(&self, a: &Atom) -> bool {
        let Some(rel) = self.rels.get(&a.pred) else { return false };
        let mut tuple = Vec::with_capacity(a.args.len());
        for t in &a.args {
            match t {
                Term::Const(c) => tuple.push(c.clone()),
                Term::Var(_) => return false,
            }
        }
        rel.contains(&tuple)
    }

    pub fn len(&self) -> usize {
        self.rels.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tuples(&self, p: &Predicate) -> impl Iterator<Item = &Vec<Sym>> {
        self.rels.get(p).into_iter().flatten()
    }

    pub fn relation(&self, p: &Predicate) -> Option<&BTreeSet<Vec<Sym>>> {
        self.rels.get(p)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.rels.keys()
    }

    /// Facts in deterministic order.
    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        self.rels.iter().flat_map(|(p, ts)| {
            ts.iter().map(move |t| Atom::with_pred(p.clone(), t.iter().cloned().map(Term::Const).collect()))
        })
    }

    pub fn adom(&self) -> BTreeSet<Sym> {
        self.rels.values().flatten().flatten().cloned().collect()
    }

    pub fn counts(&self) -> Vec<(Predicate, usize)> {
        self.rels.iter().map(|(p, t)| (p.clone(), t.len())).collect()
    }

    pub fn is_subset(&self, other: &FactSet) -> bool {
        self.rels.iter().all(|(p, ts)| other.rels.get(p).is_some_and(|o| ts.is_subset(o)))
    }

    pub fn extend(&mut self, other: &FactSet) {
        for (p, ts) in &other.rels {
            self.rels.entry(p.clone()).or_default().extend(ts.iter().cloned());
        }
    }

    /// A predicate name used with two arities, if any.
    pub fn arity_conflict(&self) -> Option<&Sym> {
        let mut seen: BTreeMap<&Sym, u8> = BTreeMap::new();
        for p in self.rels.keys() {
            if let Some(a) = seen.insert(&p.name, p.arity) {
                if a != p.arity {
                    return Some(&p.name);
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_semantics() {
        let a = Atom::new("A", vec![Term::cst("C1")]);
        let mut f = FactSet::new();
        assert!(f.insert(a.clone()));
        assert!(!f.insert(a.clone()));
        assert_eq!(f.len(), 1);
        assert!(f.contains(&a));
        assert_eq!(f.adom().len(), 1);
    }
}
