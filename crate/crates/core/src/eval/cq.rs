use std::collections::{BTreeSet, HashMap};

use super::FactSet;
use crate::model::{Atom, ConjunctiveQuery, Sym, Term};

/// Answer tuples of a CQ over a fact set (image semantics).
pub fn eval_cq(q: &ConjunctiveQuery, f: &FactSet) -> BTreeSet<Vec<Sym>> {
    let mut out = BTreeSet::new();
    cq_matches(&q.atoms, f, &mut |b| {
        let tuple: Option<Vec<Sym>> = q
            .answer
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => b.get(v).cloned(),
            })
            .collect();
        out.insert(tuple.expect("answer variables occur in the body"));
        true
    });
    out
}

pub fn cq_holds(atoms: &[Atom], f: &FactSet) -> bool {
    let mut found = false;
    cq_matches(atoms, f, &mut |_| {
        found = true;
        false
    });
    found
}

/// Calls `visit` for every match; stops when it returns false.
pub fn cq_matches(atoms: &[Atom], f: &FactSet, visit: &mut dyn FnMut(&HashMap<Sym, Sym>) -> bool) {
    let mut order: Vec<&Atom> = atoms.iter().collect();
    order.sort_by_key(|a| f.relation(&a.pred).map_or(0, |r| r.len()));
    let mut b = HashMap::new();
    rec(&order, 0, f, &mut b, visit);
}

fn rec(
    order: &[&Atom],
    i: usize,
    f: &FactSet,
    b: &mut HashMap<Sym, Sym>,
    visit: &mut dyn FnMut(&HashMap<Sym, Sym>) -> bool,
) -> bool {
    if i == order.len() {
        return visit(b);
    }
    let a = order[i];
    for tuple in f.tuples(&a.pred) {
        let mut added: Vec<Sym> = Vec::new();
        let mut ok = true;
        for (t, c) in a.args.iter().zip(tuple) {
            match t {
                Term::Const(k) => ok = k == c,
                Term::Var(v) => match b.get(v) {
                    Some(x) => ok = x == c,
                    None => {
                        b.insert(v.clone(), c.clone());
                        added.push(v.clone());
                    }
                },
            }
            if !ok {
                break;
            }
        }
        let go_on = !ok || rec(order, i + 1, f, b, visit);
        for v in added {
            b.remove(&v);
        }
        if !go_on {
            return false;
        }
    }
    true
}
