use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::query::{Atom, Fresh, Substitution};
use super::term::{Sym, Term};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Sym>, Box<Formula>),
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        Formula::Atom(a)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        match (&a, &b) {
            _ if a == b => Formula::True,
            (Term::Const(_), Term::Const(_)) => Formula::False,
            _ => Formula::Eq(a, b),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            f => Formula::Not(Box::new(f)),
        }
    }

    pub fn and(items: Vec<Formula>) -> Formula {
        let mut out = Vec::with_capacity(items.len());
        for f in items {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                f => out.push(f),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().expect("one item"),
            _ => Formula::And(out),
        }
    }

    pub fn or(items: Vec<Formula>) -> Formula {
        let mut out: Vec<Formula> = Vec::with_capacity(items.len());
        for f in items {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => {
                    for g in inner {
                        if !out.contains(&g) {
                            out.push(g);
                        }
                    }
                }
                f => {
                    if !out.contains(&f) {
                        out.push(f)
                    }
                }
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().expect("one item"),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        match (a, b) {
            (Formula::False, _) | (_, Formula::True) => Formula::True,
            (Formula::True, b) => b,
            (a, Formula::False) => Formula::not(a),
            (a, b) => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    /// Drops quantified variables that do not occur free in the body.
    pub fn exists(vars: Vec<Sym>, body: Formula) -> Formula {
        let free = body.free_vars();
        let mut vs: Vec<Sym> = Vec::new();
        for v in vars {
            if free.contains(&v) && !vs.contains(&v) {
                vs.push(v);
            }
        }
        match body {
            Formula::False => Formula::False,
            _ if vs.is_empty() => body,
            Formula::Exists(inner, b) => {
                vs.extend(inner.into_iter().filter(|v| !vs.contains(v)).collect::<Vec<_>>());
                Formula::Exists(vs, b)
            }
            body => Formula::Exists(vs, Box::new(body)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        let mut add = |t: &Term, bound: &Vec<Sym>| {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.args.iter().for_each(|t| add(t, bound)),
            Formula::Eq(a, b) => {
                add(a, bound);
                add(b, bound);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_free(bound, out)),
            Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Node count.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) | Formula::Eq(..) => 1,
            Formula::Not(f) | Formula::Exists(_, f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |a| out.push(a));
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut dyn FnMut(&'a Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::Not(g) | Formula::Exists(_, g) => g.visit_atoms(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_atoms(f)),
            Formula::Implies(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            _ => {}
        }
    }

    /// Replaces every atom by `f(atom)`, rebuilding with the smart constructors.
    pub fn map_atoms(&self, f: &mut dyn FnMut(&Atom) -> Formula) -> Formula {
        match self {
            Formula::Atom(a) => f(a),
            Formula::True | Formula::False | Formula::Eq(..) => self.clone(),
            Formula::Not(g) => Formula::not(g.map_atoms(f)),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| g.map_atoms(f)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(f), b.map_atoms(f)),
            Formula::Exists(vs, g) => Formula::exists(vs.clone(), g.map_atoms(f)),
        }
    }

    /// Capture-avoiding substitution of free variables.
    pub fn substitute(&self, s: &Substitution, fresh: &mut Fresh) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(a) => Formula::Atom(s.apply_atom(a)),
            Formula::Eq(a, b) => Formula::eq(s.apply_term(a), s.apply_term(b)),
            Formula::Not(g) => Formula::not(g.substitute(s, fresh)),
            Formula::And(gs) => Formula::and(gs.iter().map(|g| g.substitute(s, fresh)).collect()),
            Formula::Or(gs) => Formula::or(gs.iter().map(|g| g.substitute(s, fresh)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.substitute(s, fresh), b.substitute(s, fresh)),
            Formula::Exists(vs, g) => {
                let mut inner: BTreeMap<Sym, Term> =
                    s.0.iter().filter(|(k, _)| !vs.contains(k)).map(|(k, t)| (k.clone(), t.clone())).collect();
                let range: BTreeSet<Sym> = inner.values().filter_map(Term::as_var).cloned().collect();
                let mut new_vs = Vec::with_capacity(vs.len());
                for v in vs {
                    if range.contains(v) {
                        let nv = fresh.var("b");
                        inner.insert(v.clone(), Term::Var(nv.clone()));
                        new_vs.push(nv);
                    } else {
                        new_vs.push(v.clone());
                    }
                }
                Formula::exists(new_vs, g.substitute(&Substitution(inner), fresh))
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::Not(g) => match **g {
                Formula::Atom(_) | Formula::True | Formula::False => write!(f, "~{g}"),
                _ => write!(f, "~({g})"),
            },
            Formula::And(gs) => join(f, gs, " & "),
            Formula::Or(gs) => join(f, gs, " | "),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Exists(vs, g) => {
                f.write_str("(exists ")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ". {g})")
            }
        }
    }
}

fn join(f: &mut fmt::Formatter<'_>, gs: &[Formula], sep: &str) -> fmt::Result {
    f.write_str("(")?;
    for (i, g) in gs.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{g}")?;
    }
    f.write_str(")")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: &str, args: &[&str]) -> Formula {
        Formula::Atom(Atom::new(p, args.iter().map(|s| Term::var(s)).collect()))
    }

    #[test]
    fn smart_constructors_fold() {
        assert_eq!(Formula::and(vec![Formula::True, a("A", &["x"])]), a("A", &["x"]));
        assert_eq!(Formula::and(vec![Formula::False, a("A", &["x"])]), Formula::False);
        assert_eq!(Formula::or(vec![Formula::False]), Formula::False);
        assert_eq!(Formula::implies(a("A", &["x"]), Formula::False), Formula::not(a("A", &["x"])));
        assert_eq!(Formula::eq(Term::cst("A"), Term::cst("B")), Formula::False);
        assert_eq!(Formula::exists(vec![Sym::new("y")], a("A", &["x"])), a("A", &["x"]));
    }

    #[test]
    fn free_vars_respect_binding() {
        let f = Formula::exists(vec![Sym::new("y")], Formula::and(vec![a("R", &["x", "y"]), a("B", &["y"])]));
        assert_eq!(f.free_vars().into_iter().collect::<Vec<_>>(), vec![Sym::new("x")]);
        assert_eq!(f.to_string(), "(exists y. (R(x,y) & B(y)))");
    }

    #[test]
    fn substitution_avoids_capture() {
        let f = Formula::exists(vec![Sym::new("y")], a("R", &["x", "y"]));
        let s = Substitution::from_pairs([(Sym::new("x"), Term::var("y"))]);
        let g = f.substitute(&s, &mut Fresh::new());
        assert_eq!(g.free_vars().into_iter().collect::<Vec<_>>(), vec![Sym::new("y")]);
    }
}
