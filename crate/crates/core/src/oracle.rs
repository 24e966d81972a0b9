//! Brute-force reference semantics for small instances: depth-bounded chase,
//! EQL satisfaction, optimal GA censors and the entailment notions built on them.
//!
//! Shares only the data model and parser with the rewriting side.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::CqeError;
use crate::eval::FactSet;
use crate::model::{Atom, ConjunctiveQuery, Head, Policy, Predicate, Sym, TBox, TBoxAxiom, Term, UnionOfCqs};
use crate::tgd::{tbox_to_tgds, Tgd};

pub const DEFAULT_CAP: usize = 16;

/// Chase term.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum CTerm {
    C(Sym),
    N(u32),
}

/// A finite prefix of the chase of a fact set under the positive part of a TBox.
#[derive(Clone, Debug, Default)]
pub struct Chase {
    rels: HashMap<Predicate, Vec<Vec<CTerm>>>,
    seen: HashSet<(Predicate, Vec<CTerm>)>,
    null_depth: Vec<u32>,
}

impl Chase {
    fn add(&mut self, p: &Predicate, t: Vec<CTerm>) -> bool {
        if self.seen.insert((p.clone(), t.clone())) {
            self.rels.entry(p.clone()).or_default().push(t);
            true
        } else {
            false
        }
    }

    fn depth(&self, t: &CTerm) -> u32 {
        match t {
            CTerm::C(_) => 0,
            CTerm::N(i) => self.null_depth[*i as usize],
        }
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Ground facts only.
    pub fn ground(&self) -> FactSet {
        let mut f = FactSet::new();
        for (p, ts) in &self.rels {
            for t in ts {
                if let Some(args) = t.iter().map(|x| match x {
                    CTerm::C(c) => Some(Term::Const(c.clone())),
                    CTerm::N(_) => None,
                }).collect::<Option<Vec<_>>>() {
                    f.insert(Atom::with_pred(p.clone(), args));
                }
            }
        }
        f
    }

    /// Restricted chase, breadth first; nulls deeper than `max_depth` are not created.
    pub fn build(t: &TBox, facts: &FactSet, max_depth: u32) -> Chase {
        let tgds = tbox_to_tgds(t);
        let (full, ex): (Vec<&Tgd>, Vec<&Tgd>) = tgds.iter().partition(|g| g.head_existentials().is_empty());
        let mut c = Chase::default();
        for a in facts.atoms() {
            c.add(&a.pred, a.args.iter().map(|x| CTerm::C(x.as_const().expect("ground").clone())).collect());
        }
        loop {
            loop {
                let mut new = Vec::new();
                for g in &full {
                    for b in c.body_matches(g) {
                        let h = inst(&g.head[0], &b);
                        if !c.seen.contains(&(g.head[0].pred.clone(), h.clone())) {
                            new.push((g.head[0].pred.clone(), h));
                        }
                    }
                }
                let mut changed = false;
                for (p, t) in new {
                    changed |= c.add(&p, t);
                }
                if !changed {
                    break;
                }
            }
            let mut created = false;
            for g in &ex {
                for b in c.body_matches(g) {
                    let head = &g.head[0];
                    let z = g.head_existentials().into_iter().next().expect("one existential");
                    let pattern: Vec<Option<CTerm>> =
                        head.args.iter().map(|t| if t.as_var() == Some(&z) { None } else { Some(term_of(t, &b)) }).collect();
                    let satisfied = c.rels.get(&head.pred).into_iter().flatten().any(|tu| {
                        tu.iter().zip(&pattern).all(|(x, p)| p.as_ref().is_none_or(|p| p == x))
                    });
                    if satisfied {
                        continue;
                    }
                    let d = pattern.iter().flatten().map(|x| c.depth(x)).max().unwrap_or(0) + 1;
                    if d > max_depth {
                        continue;
                    }
                    let n = CTerm::N(c.null_depth.len() as u32);
                    c.null_depth.push(d);
                    let tuple = pattern.into_iter().map(|p| p.unwrap_or_else(|| n.clone())).collect();
                    c.add(&head.pred, tuple);
                    created = true;
                }
            }
            if !created {
                return c;
            }
        }
    }

    fn body_matches(&self, g: &Tgd) -> Vec<HashMap<Sym, CTerm>> {
        let mut out = Vec::new();
        self.matches(&g.body, HashMap::new(), &mut |m| {
            out.push(m.clone());
            true
        });
        out
    }

    /// Calls `visit` on every homomorphism of `atoms` extending `seed`; stops when it returns false.
    pub fn matches(&self, atoms: &[Atom], seed: HashMap<Sym, CTerm>, visit: &mut dyn FnMut(&HashMap<Sym, CTerm>) -> bool) {
        let mut order: Vec<&Atom> = atoms.iter().collect();
        order.sort_by_key(|a| self.rels.get(&a.pred).map_or(0, Vec::len));
        let mut m = seed;
        self.extend(&order, &mut m, visit);
    }

    fn extend(&self, atoms: &[&Atom], m: &mut HashMap<Sym, CTerm>, visit: &mut dyn FnMut(&HashMap<Sym, CTerm>) -> bool) -> bool {
        let Some((a, rest)) = atoms.split_first() else { return visit(m) };
        for t in self.rels.get(&a.pred).into_iter().flatten() {
            let mut added: Vec<Sym> = Vec::new();
            let mut ok = true;
            for (arg, val) in a.args.iter().zip(t) {
                match arg {
                    Term::Const(c) => {
                        if *val != CTerm::C(c.clone()) {
                            ok = false;
                            break;
                        }
                    }
                    Term::Var(v) => match m.get(v) {
                        Some(prev) if prev != val => {
                            ok = false;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            m.insert(v.clone(), val.clone());
                            added.push(v.clone());
                        }
                    },
                }
            }
            let go_on = !ok || self.extend(rest, m, visit);
            for v in added {
                m.remove(&v);
            }
            if !go_on {
                return false;
            }
        }
        true
    }

    pub fn holds(&self, atoms: &[Atom], seed: HashMap<Sym, CTerm>) -> bool {
        let mut found = false;
        self.matches(atoms, seed, &mut |_| {
            found = true;
            false
        });
        found
    }
}

fn term_of(t: &Term, b: &HashMap<Sym, CTerm>) -> CTerm {
    match t {
        Term::Const(c) => CTerm::C(c.clone()),
        Term::Var(v) => b[v].clone(),
    }
}

fn inst(a: &Atom, b: &HashMap<Sym, CTerm>) -> Vec<CTerm> {
    a.args.iter().map(|t| term_of(t, b)).collect()
}

fn existential_axioms(t: &TBox) -> u32 {
    t.existential_count() as u32
}

/// Chase depth sufficient for queries with `n` atoms.
pub fn depth_for(t: &TBox, n: usize) -> u32 {
    n as u32 + existential_axioms(t)
}

/// `T ∪ F ⊨ q` for a CQ whose answer terms are ground.
pub fn cq_entails(t: &TBox, f: &FactSet, q: &ConjunctiveQuery) -> bool {
    let c = Chase::build(t, f, depth_for(t, q.atoms.len()));
    certain_answers(&c, q).into_iter().any(|a| a.iter().zip(&q.answer).all(|(x, t)| t.as_const().is_none_or(|c| c == x)))
}

/// Certain answers of `q` over a chase prefix: answer terms must land on constants.
pub fn certain_answers(c: &Chase, q: &ConjunctiveQuery) -> BTreeSet<Vec<Sym>> {
    let mut out = BTreeSet::new();
    c.matches(&q.atoms, HashMap::new(), &mut |m| {
        let tuple: Option<Vec<Sym>> = q
            .answer
            .iter()
            .map(|t| match t {
                Term::Const(k) => Some(k.clone()),
                Term::Var(v) => match m.get(v) {
                    Some(CTerm::C(k)) => Some(k.clone()),
                    _ => None,
                },
            })
            .collect();
        if let Some(tu) = tuple {
            out.insert(tu);
        }
        true
    });
    out
}

/// `T ∪ F ⊨_EQL P`.
pub fn eql_satisfies(t: &TBox, f: &FactSet, p: &Policy) -> bool {
    let n = p.eds.iter().map(|e| e.body.atoms.len() + e.head.atoms().len()).max().unwrap_or(0);
    let c = Chase::build(t, f, depth_for(t, n));
    eql_on_chase(&c, p)
}

fn eql_on_chase(c: &Chase, p: &Policy) -> bool {
    for ed in &p.eds {
        let ed = ed.normalized();
        let us = ed.universals.clone();
        let mut sigmas: BTreeSet<Vec<Sym>> = BTreeSet::new();
        c.matches(&ed.body.atoms, HashMap::new(), &mut |m| {
            let s: Option<Vec<Sym>> = us
                .iter()
                .map(|u| match m.get(u) {
                    Some(CTerm::C(k)) => Some(k.clone()),
                    _ => None,
                })
                .collect();
            if let Some(s) = s {
                sigmas.insert(s);
            }
            true
        });
        for s in sigmas {
            let ok = match &ed.head {
                Head::Bot => false,
                Head::Atoms(h) => {
                    let seed: HashMap<Sym, CTerm> =
                        us.iter().cloned().zip(s.into_iter().map(CTerm::C)).collect();
                    c.holds(h, seed)
                }
            };
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Reference answers for one instance.
pub struct Oracle {
    pub tbox: TBox,
    pub policy: Policy,
    pub closure: Vec<Atom>,
    censors: Vec<u64>,
}

impl Oracle {
    /// Fails on inconsistent instances and closures above `cap` facts.
    pub fn new(t: &TBox, p: &Policy, abox: &FactSet, cap: usize) -> Result<Oracle, CqeError> {
        let neg_depth = depth_for(t, 2);
        let full = Chase::build(t, abox, neg_depth);
        if let Some(ax) = violated(t, &full) {
            return Err(CqeError::Inconsistent(format!("violates {ax}")));
        }
        let closure: Vec<Atom> = full.ground().atoms().collect();
        if closure.len() > cap || closure.len() > 63 {
            return Err(CqeError::CapExceeded { size: closure.len(), cap });
        }
        let mut o = Oracle { tbox: t.clone(), policy: p.clone(), closure, censors: Vec::new() };
        o.censors = o.compute_censors();
        Ok(o)
    }

    fn facts(&self, mask: u64) -> FactSet {
        FactSet::from_atoms(self.closure.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| a.clone()))
    }

    fn compute_censors(&self) -> Vec<u64> {
        let n = self.closure.len();
        let mut by_size: Vec<Vec<u64>> = vec![Vec::new(); n + 1];
        for m in 0..(1u64 << n) {
            by_size[m.count_ones() as usize].push(m);
        }
        let mut found: Vec<u64> = Vec::new();
        for size in (0..=n).rev() {
            for &m in &by_size[size] {
                if found.iter().any(|&f| m & f == m) {
                    continue;
                }
                if eql_satisfies(&self.tbox, &self.facts(m), &self.policy) {
                    found.push(m);
                }
            }
        }
        found
    }

    /// All optimal GA censors.
    pub fn censors(&self) -> Vec<FactSet> {
        self.censors.iter().map(|&m| self.facts(m)).collect()
    }

    pub fn intersection(&self) -> FactSet {
        let m = self.censors.iter().fold(u64::MAX, |acc, &c| acc & c);
        self.facts(if self.censors.is_empty() { 0 } else { m })
    }

    pub fn closure_facts(&self) -> FactSet {
        FactSet::from_atoms(self.closure.iter().cloned())
    }

    fn answers_over(&self, f: &FactSet, q: &UnionOfCqs) -> BTreeSet<Vec<Sym>> {
        let n = q.disjuncts.iter().map(|d| d.atoms.len()).max().unwrap_or(0);
        let c = Chase::build(&self.tbox, f, depth_for(&self.tbox, n));
        q.disjuncts.iter().flat_map(|d| certain_answers(&c, d)).collect()
    }

    /// Answer tuples under IGA semantics (the empty tuple for a true sentence).
    pub fn iga_answers(&self, q: &UnionOfCqs) -> BTreeSet<Vec<Sym>> {
        self.answers_over(&self.intersection(), q)
    }

    pub fn iga_entails(&self, q: &UnionOfCqs) -> bool {
        !self.iga_answers(q).is_empty()
    }

    /// Tuples entailed under every optimal censor.
    pub fn skeptical_answers(&self, q: &UnionOfCqs) -> BTreeSet<Vec<Sym>> {
        let mut it = self.censors().into_iter().map(|c| self.answers_over(&c, q));
        let first = it.next().unwrap_or_default();
        it.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
    }

    pub fn skeptical_entails(&self, q: &UnionOfCqs) -> bool {
        !self.skeptical_answers(q).is_empty()
    }

    /// `F` extends to a policy-satisfying subset of the closure.
    pub fn disclosable(&self, f: &FactSet) -> bool {
        self.censors().iter().any(|c| f.is_subset(c))
    }
}

fn violated(t: &TBox, c: &Chase) -> Option<TBoxAxiom> {
    let x = Term::var("x");
    let y = Term::var("y");
    for ax in t.negative() {
        let atoms = match ax {
            TBoxAxiom::ConceptDisj(a, b) => vec![a.atom(x.clone(), Term::var("u")), b.atom(x.clone(), Term::var("w"))],
            TBoxAxiom::RoleDisj(r, s) => vec![r.atom(x.clone(), y.clone()), s.atom(x.clone(), y.clone())],
            _ => continue,
        };
        if c.holds(&atoms, HashMap::new()) {
            return Some(ax.clone());
        }
    }
    None
}

/// Convenience: IGA answers of `q` on an instance.
pub fn iga_oracle(t: &TBox, p: &Policy, abox: &FactSet, q: &UnionOfCqs, cap: usize) -> Result<BTreeSet<Vec<Sym>>, CqeError> {
    Ok(Oracle::new(t, p, abox, cap)?.iga_answers(q))
}
