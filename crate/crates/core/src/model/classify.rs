use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::policy::{EpistemicDependency, Head, Policy};
use super::query::Atom;
use super::tbox::{BasicConcept, Role, TBox, TBoxAxiom};
use super::term::{Sym, Term};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct PolicyClass {
    pub full: bool,
    pub linear: bool,
    pub binary: bool,
    pub acyclic_for_t: bool,
    pub expandable: bool,
}

impl fmt::Display for PolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut tags = Vec::new();
        tags.push(if self.full { "full" } else { "not-full" });
        if self.linear {
            tags.push("linear");
        }
        if self.binary {
            tags.push("binary");
        }
        tags.push(if self.acyclic_for_t { "acyclic" } else { "cyclic" });
        tags.push(if self.expandable { "expandable" } else { "not-expandable" });
        f.write_str(&tags.join(", "))
    }
}

/// Linearity and binarity are judged on the ⊥-free EDs: denials contribute no TGDs.
pub fn classify(policy: &Policy, tbox: &TBox) -> PolicyClass {
    let positive = policy.positive();
    let full = policy.eds.iter().all(EpistemicDependency::is_full);
    let linear = positive.eds.iter().all(EpistemicDependency::is_linear);
    let binary = positive.eds.iter().all(|e| binary_form(e).is_some());
    let acyclic_for_t = p_edge_cycle(policy, tbox).is_none();
    PolicyClass { full, linear, binary, acyclic_for_t, expandable: linear || acyclic_for_t }
}

/// A binary ED in DL form.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BinaryForm {
    Concept(BasicConcept, BasicConcept),
    Role(Role, Role),
}

fn as_basic_concept(a: &Atom, x: &Sym) -> Option<BasicConcept> {
    let xv = Term::Var(x.clone());
    match a.args.as_slice() {
        [t] if *t == xv => Some(BasicConcept::Atomic(a.pred.name.clone())),
        [s, Term::Var(y)] if *s == xv && y != x => Some(BasicConcept::Exists(Role { name: a.pred.name.clone(), inverse: false })),
        [Term::Var(y), s] if *s == xv && y != x => Some(BasicConcept::Exists(Role { name: a.pred.name.clone(), inverse: true })),
        _ => None,
    }
}

fn as_role(a: &Atom, x: &Sym, y: &Sym) -> Option<Role> {
    match a.args.as_slice() {
        [Term::Var(s), Term::Var(t)] if s == x && t == y => Some(Role { name: a.pred.name.clone(), inverse: false }),
        [Term::Var(s), Term::Var(t)] if s == y && t == x => Some(Role { name: a.pred.name.clone(), inverse: true }),
        _ => None,
    }
}

/// Matches `∀x (K B1 → K B2)` or `∀x,y (K S1 → K S2)`.
pub fn binary_form(ed: &EpistemicDependency) -> Option<BinaryForm> {
    let ed = ed.normalized();
    let [body] = ed.body.atoms.as_slice() else { return None };
    let Head::Atoms(head) = &ed.head else { return None };
    let [head] = head.as_slice() else { return None };
    match ed.universals.as_slice() {
        [x] => {
            let b1 = as_basic_concept(body, x)?;
            let b2 = as_basic_concept(head, x)?;
            Some(BinaryForm::Concept(b1, b2))
        }
        [x, y] if x != y => {
            let s1 = as_role(body, x, y)?;
            let s2 = as_role(head, x, y)?;
            Some(BinaryForm::Role(s1, s2))
        }
        _ => None,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum EdgeKind {
    T,
    P,
}

/// First cycle through a P-edge, as a predicate-name path starting and ending at the same node.
pub fn p_edge_cycle(policy: &Policy, tbox: &TBox) -> Option<Vec<Sym>> {
    let mut edges: BTreeMap<Sym, BTreeSet<(Sym, u8)>> = BTreeMap::new();
    let mut add = |from: Sym, to: Sym, k: EdgeKind| {
        edges.entry(from).or_default().insert((to, k as u8));
    };
    for ax in tbox.positive() {
        let [l, r] = ax.predicates();
        add(l.name, r.name, EdgeKind::T);
    }
    for ed in &policy.eds {
        for b in ed.body_predicates() {
            for h in ed.head_predicates() {
                add(b.name.clone(), h.name.clone(), EdgeKind::P);
            }
        }
    }
    for (from, outs) in &edges {
        for (to, k) in outs {
            if *k != EdgeKind::P as u8 {
                continue;
            }
            if let Some(mut path) = find_path(&edges, to, from) {
                path.insert(0, from.clone());
                return Some(path);
            }
        }
    }
    None
}

fn find_path(edges: &BTreeMap<Sym, BTreeSet<(Sym, u8)>>, from: &Sym, to: &Sym) -> Option<Vec<Sym>> {
    let mut prev: BTreeMap<Sym, Sym> = BTreeMap::new();
    let mut seen: BTreeSet<Sym> = BTreeSet::from([from.clone()]);
    let mut queue = std::collections::VecDeque::from([from.clone()]);
    while let Some(n) = queue.pop_front() {
        if &n == to {
            let mut path = vec![n.clone()];
            let mut cur = n;
            while let Some(p) = prev.get(&cur) {
                path.push(p.clone());
                cur = p.clone();
            }
            path.reverse();
            return Some(path);
        }
        for (m, _) in edges.get(&n).into_iter().flatten() {
            if seen.insert(m.clone()) {
                prev.insert(m.clone(), n.clone());
                queue.push_back(m.clone());
            }
        }
    }
    None
}

/// `DL(τ)` for a binary ED.
pub fn dl_translate(ed: &EpistemicDependency) -> Option<TBoxAxiom> {
    Some(match binary_form(ed)? {
        BinaryForm::Concept(a, b) => TBoxAxiom::ConceptIncl(a, b),
        BinaryForm::Role(a, b) => TBoxAxiom::RoleIncl(a, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    fn ed(us: &[&str], body: Vec<Atom>, head: Option<Vec<Atom>>) -> EpistemicDependency {
        EpistemicDependency::new(
            us.iter().map(|s| Sym::new(s)).collect(),
            body,
            head.map_or(Head::Bot, Head::Atoms),
        )
    }

    #[test]
    fn binary_forms() {
        let e = ed(&["x"], vec![Atom::new("Person", vec![v("x")])], Some(vec![Atom::new("Employee", vec![v("x")])]));
        assert_eq!(dl_translate(&e).unwrap().to_string(), "Person ISA Employee");
        let e = ed(
            &["x", "y"],
            vec![Atom::new("hasAlumnus", vec![v("x"), v("y")])],
            Some(vec![Atom::new("hasMasterDegreeFrom", vec![v("y"), v("x")])]),
        );
        assert_eq!(dl_translate(&e).unwrap().to_string(), "hasAlumnus ISA hasMasterDegreeFrom-");
        let e = ed(&["x"], vec![Atom::new("R", vec![v("x"), v("y")])], Some(vec![Atom::new("A", vec![v("x")])]));
        assert_eq!(dl_translate(&e).unwrap().to_string(), "EX R ISA A");
        let e = ed(&["y"], vec![Atom::new("takesCourse", vec![v("x"), v("y")])], Some(vec![Atom::new("E", vec![v("y")])]));
        assert_eq!(dl_translate(&e).unwrap().to_string(), "EX takesCourse- ISA E");
        let e = ed(&["x", "y"], vec![Atom::new("R", vec![v("x"), v("y")])], Some(vec![Atom::new("A", vec![v("x")])]));
        assert!(dl_translate(&e).is_none());
    }

    #[test]
    fn cycle_through_policy_edge() {
        let p = Policy::new(vec![ed(&["x"], vec![Atom::new("A", vec![v("x")])], Some(vec![Atom::new("B", vec![v("x")])]))]);
        let t = TBox::new(vec![TBoxAxiom::ConceptIncl(BasicConcept::atomic("B"), BasicConcept::atomic("A"))]);
        let c = classify(&p, &t);
        assert!(!c.acyclic_for_t && c.linear && c.expandable);
        assert_eq!(p_edge_cycle(&p, &t).unwrap().len(), 3);
        let t = TBox::new(vec![TBoxAxiom::ConceptIncl(BasicConcept::atomic("A"), BasicConcept::atomic("B"))]);
        assert!(classify(&p, &t).acyclic_for_t);
    }

    #[test]
    fn denials_ignored_for_linearity() {
        let p = Policy::new(vec![ed(
            &["x", "y"],
            vec![Atom::new("R", vec![v("x"), v("y")]), Atom::new("A", vec![v("x")])],
            None,
        )]);
        let c = classify(&p, &TBox::empty());
        assert!(c.full && c.linear && c.binary && c.expandable);
    }
}
