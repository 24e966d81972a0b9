//! Batch evaluation of safe-range formulas over a fact set.
//!
//! Every subformula maps a relation of partial assignments to the relation of
//! its extensions satisfying it. Negation, implication and fully bound
//! disjunctions act as filters (anti-/semi-joins), atoms and equalities with one
//! unbound side act as generators.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::CqeError;
use crate::eval::FactSet;
use crate::model::{Atom, Formula, Fresh, Predicate, Substitution, Sym, Term};

/// Named columns over constants.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Relation {
    pub vars: Vec<Sym>,
    pub rows: Vec<Vec<Sym>>,
}

impl Relation {
    /// One empty assignment.
    pub fn unit() -> Self {
        Relation { vars: Vec::new(), rows: vec![Vec::new()] }
    }

    fn empty(vars: Vec<Sym>) -> Self {
        Relation { vars, rows: Vec::new() }
    }

    fn col(&self, v: &Sym) -> Option<usize> {
        self.vars.iter().position(|w| w == v)
    }

    fn bound(&self) -> BTreeSet<Sym> {
        self.vars.iter().cloned().collect()
    }

    /// Columns `keep`, in that order, deduplicated.
    fn project(&self, keep: &[Sym]) -> Relation {
        let idx: Vec<usize> = keep.iter().map(|v| self.col(v).expect("projected column")).collect();
        let mut seen = HashSet::new();
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect::<Vec<_>>())
            .filter(|r| seen.insert(r.clone()))
            .collect();
        Relation { vars: keep.to_vec(), rows }
    }

    fn restrict_to(&self, keep: &HashSet<Vec<Sym>>) -> Relation {
        Relation { vars: self.vars.clone(), rows: self.rows.iter().filter(|r| keep.contains(*r)).cloned().collect() }
    }

    fn minus(&self, drop: &HashSet<Vec<Sym>>) -> Relation {
        Relation { vars: self.vars.clone(), rows: self.rows.iter().filter(|r| !drop.contains(*r)).cloned().collect() }
    }
}

type Index = HashMap<Vec<Sym>, Vec<Vec<Sym>>>;
type IndexCache = HashMap<(Predicate, Vec<usize>), std::rc::Rc<Index>>;

/// Evaluator over one fact set; caches per-predicate hash indexes.
pub struct FoEvaluator<'a> {
    db: &'a FactSet,
    indexes: RefCell<IndexCache>,
    fresh: RefCell<Fresh>,
}

fn free_in(f: &Formula, b: &BTreeSet<Sym>) -> bool {
    f.free_vars().is_subset(b)
}

/// Variables bound after evaluating `f` with `b` bound, or `None` if `f` cannot be evaluated there.
pub(crate) fn binds(f: &Formula, b: &BTreeSet<Sym>) -> Option<BTreeSet<Sym>> {
    match f {
        Formula::True | Formula::False => Some(b.clone()),
        Formula::Atom(a) => {
            let mut out = b.clone();
            out.extend(a.vars().cloned());
            Some(out)
        }
        Formula::Eq(x, y) => {
            let is_b = |t: &Term| t.as_var().is_none_or(|v| b.contains(v));
            match (is_b(x), is_b(y)) {
                (true, true) => Some(b.clone()),
                (true, false) | (false, true) => {
                    let mut out = b.clone();
                    out.extend(x.as_var().cloned());
                    out.extend(y.as_var().cloned());
                    Some(out)
                }
                (false, false) => None,
            }
        }
        Formula::Not(g) => (free_in(g, b) && binds(g, b).is_some()).then(|| b.clone()),
        Formula::Implies(x, y) => {
            let bx = binds(x, b)?;
            (free_in(f, b) && binds(y, &bx).is_some()).then(|| b.clone())
        }
        Formula::Or(gs) => {
            let free = f.free_vars();
            let mut out: Option<BTreeSet<Sym>> = None;
            for g in gs {
                let bg = binds(g, b)?;
                if !free.iter().all(|v| bg.contains(v)) {
                    return None;
                }
                out = Some(bg.intersection(&free.union(b).cloned().collect()).cloned().collect());
            }
            Some(out.unwrap_or_else(|| b.clone()))
        }
        Formula::Exists(vs, g) => {
            let inner: BTreeSet<Sym> = b.iter().filter(|v| !vs.contains(v)).cloned().collect();
            let bg = binds(g, &inner)?;
            if !vs.iter().all(|v| bg.contains(v) || !g.free_vars().contains(v)) {
                return None;
            }
            let mut out = b.clone();
            out.extend(bg.into_iter().filter(|v| !vs.contains(v)));
            Some(out)
        }
        Formula::And(gs) => {
            let mut cur = b.clone();
            let mut left: Vec<&Formula> = gs.iter().collect();
            while !left.is_empty() {
                let (i, _) = left
                    .iter()
                    .enumerate()
                    .filter_map(|(i, g)| Some((i, rank(g, &cur)?)))
                    .min_by_key(|(_, r)| *r)?;
                cur = binds(left.remove(i), &cur)?;
            }
            Some(cur)
        }
    }
}

/// Lower is earlier; `None` when not yet evaluable.
pub(crate) fn rank(f: &Formula, b: &BTreeSet<Sym>) -> Option<u8> {
    match f {
        Formula::True | Formula::False => Some(0),
        Formula::Atom(a) => Some(if a.vars().all(|v| b.contains(v)) { 0 } else { 2 }),
        Formula::Eq(..) => binds(f, b).map(|out| if out.len() == b.len() { 0 } else { 1 }),
        Formula::Not(_) | Formula::Implies(..) => free_in(f, b).then_some(4),
        _ => {
            if free_in(f, b) {
                Some(4)
            } else {
                binds(f, b).map(|_| 3)
            }
        }
    }
}

/// Checks that `f` can be evaluated from the empty assignment.
pub fn check_safe_range(f: &Formula) -> Result<(), CqeError> {
    match binds(f, &BTreeSet::new()) {
        Some(b) if f.free_vars().is_subset(&b) => Ok(()),
        _ => Err(CqeError::NotSafeRange(short(f))),
    }
}

fn short(f: &Formula) -> String {
    let s = f.to_string();
    if s.chars().count() > 200 {
        format!("{}...", s.chars().take(200).collect::<String>())
    } else {
        s
    }
}

impl<'a> FoEvaluator<'a> {
    pub fn new(db: &'a FactSet) -> Self {
        FoEvaluator { db, indexes: RefCell::new(HashMap::new()), fresh: RefCell::new(Fresh::new()) }
    }

    /// Tuples over `target` satisfying `f`. Target variables not free in `f`
    /// range over the active domain.
    pub fn answers(&self, f: &Formula, target: &[Sym]) -> Result<BTreeSet<Vec<Sym>>, CqeError> {
        let mut r = self.eval(f, Relation::unit())?;
        let missing: Vec<Sym> = target.iter().filter(|v| r.col(v).is_none()).cloned().collect();
        if !missing.is_empty() && !r.rows.is_empty() {
            let adom: Vec<Sym> = self.db.adom().into_iter().collect();
            for v in missing {
                let mut rows = Vec::with_capacity(r.rows.len() * adom.len());
                for row in &r.rows {
                    for c in &adom {
                        let mut nr = row.clone();
                        nr.push(c.clone());
                        rows.push(nr);
                    }
                }
                r.vars.push(v);
                r.rows = rows;
            }
        } else if !missing.is_empty() {
            return Ok(BTreeSet::new());
        }
        Ok(r.project(target).rows.into_iter().collect())
    }

    pub fn holds(&self, f: &Formula) -> Result<bool, CqeError> {
        Ok(!self.eval(f, Relation::unit())?.rows.is_empty())
    }

    fn unsafe_err(f: &Formula) -> CqeError {
        CqeError::NotSafeRange(short(f))
    }

    pub fn eval(&self, f: &Formula, input: Relation) -> Result<Relation, CqeError> {
        if input.rows.is_empty() {
            let out = binds(f, &input.bound()).unwrap_or_else(|| input.bound());
            let mut vars = input.vars.clone();
            vars.extend(out.into_iter().filter(|v| !input.vars.contains(v)));
            return Ok(Relation::empty(vars));
        }
        match f {
            Formula::True => Ok(input),
            Formula::False => Ok(Relation::empty(input.vars)),
            Formula::Atom(a) => Ok(self.join_atom(a, input)),
            Formula::Eq(x, y) => self.eval_eq(f, x, y, input),
            Formula::Not(g) => {
                if !free_in(g, &input.bound()) {
                    return Err(Self::unsafe_err(f));
                }
                let sat: HashSet<Vec<Sym>> = self.eval(g, input.clone())?.project(&input.vars).rows.into_iter().collect();
                Ok(input.minus(&sat))
            }
            Formula::Implies(x, y) => {
                if !free_in(f, &input.bound()) {
                    return Err(Self::unsafe_err(f));
                }
                let ax = self.eval(x, input.clone())?;
                let bad = self.eval(&Formula::not((**y).clone()), ax)?;
                let bad: HashSet<Vec<Sym>> = bad.project(&input.vars).rows.into_iter().collect();
                Ok(input.minus(&bad))
            }
            Formula::Or(gs) => self.eval_or(f, gs, input),
            Formula::Exists(vs, g) => self.eval_exists(f, vs, g, input),
            Formula::And(gs) => self.eval_and(f, gs, input),
        }
    }

    fn index(&self, p: &Predicate, key_cols: &[usize]) -> std::rc::Rc<Index> {
        let k = (p.clone(), key_cols.to_vec());
        if let Some(ix) = self.indexes.borrow().get(&k) {
            return ix.clone();
        }
        let mut ix: Index = HashMap::new();
        for t in self.db.tuples(p) {
            ix.entry(key_cols.iter().map(|&i| t[i].clone()).collect()).or_default().push(t.clone());
        }
        let ix = std::rc::Rc::new(ix);
        self.indexes.borrow_mut().insert(k, ix.clone());
        ix
    }

    fn join_atom(&self, a: &Atom, input: Relation) -> Relation {
        let mut key_cols = Vec::new();
        let mut new_vars: Vec<Sym> = Vec::new();
        // Positions whose value must equal an earlier position of the same new variable.
        let mut repeats: Vec<(usize, usize)> = Vec::new();
        let mut new_pos: Vec<usize> = Vec::new();
        for (i, t) in a.args.iter().enumerate() {
            match t {
                Term::Const(_) => key_cols.push(i),
                Term::Var(v) if input.col(v).is_some() => key_cols.push(i),
                Term::Var(v) => match new_vars.iter().position(|w| w == v) {
                    Some(j) => repeats.push((i, new_pos[j])),
                    None => {
                        new_vars.push(v.clone());
                        new_pos.push(i);
                    }
                },
            }
        }
        let ix = self.index(&a.pred, &key_cols);
        let key_src: Vec<Result<usize, Sym>> = key_cols
            .iter()
            .map(|&i| match &a.args[i] {
                Term::Const(c) => Err(c.clone()),
                Term::Var(v) => Ok(input.col(v).expect("bound")),
            })
            .collect();
        let mut vars = input.vars.clone();
        vars.extend(new_vars);
        let mut rows = Vec::new();
        for row in &input.rows {
            let key: Vec<Sym> = key_src
                .iter()
                .map(|s| match s {
                    Ok(c) => row[*c].clone(),
                    Err(k) => k.clone(),
                })
                .collect();
            if let Some(ts) = ix.get(&key) {
                for t in ts {
                    if repeats.iter().any(|&(i, j)| t[i] != t[j]) {
                        continue;
                    }
                    let mut nr = row.clone();
                    nr.extend(new_pos.iter().map(|&i| t[i].clone()));
                    rows.push(nr);
                }
            }
        }
        Relation { vars, rows }
    }

    fn eval_eq(&self, f: &Formula, x: &Term, y: &Term, input: Relation) -> Result<Relation, CqeError> {
        let val = |t: &Term, row: &[Sym]| -> Option<Sym> {
            match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => input.col(v).map(|i| row[i].clone()),
            }
        };
        let xb = x.as_var().is_none_or(|v| input.col(v).is_some());
        let yb = y.as_var().is_none_or(|v| input.col(v).is_some());
        match (xb, yb) {
            (true, true) => {
                let rows = input.rows.iter().filter(|r| val(x, r) == val(y, r)).cloned().collect();
                Ok(Relation { vars: input.vars.clone(), rows })
            }
            (true, false) | (false, true) => {
                let (src, dst) = if xb { (x, y) } else { (y, x) };
                let mut vars = input.vars.clone();
                vars.push(dst.as_var().expect("unbound side is a variable").clone());
                let rows = input
                    .rows
                    .iter()
                    .map(|r| {
                        let mut nr = r.clone();
                        nr.push(val(src, r).expect("bound"));
                        nr
                    })
                    .collect();
                Ok(Relation { vars, rows })
            }
            (false, false) => Err(Self::unsafe_err(f)),
        }
    }

    fn eval_or(&self, f: &Formula, gs: &[Formula], input: Relation) -> Result<Relation, CqeError> {
        let b = input.bound();
        let new: Vec<Sym> = f.free_vars().into_iter().filter(|v| !b.contains(v)).collect();
        if new.is_empty() {
            let mut sat: HashSet<Vec<Sym>> = HashSet::new();
            let mut rest = input.clone();
            for g in gs {
                let r = self.eval(g, rest.clone())?.project(&input.vars);
                sat.extend(r.rows);
                rest = rest.minus(&sat);
                if rest.rows.is_empty() {
                    break;
                }
            }
            return Ok(input.restrict_to(&sat));
        }
        let mut vars = input.vars.clone();
        vars.extend(new.iter().cloned());
        let mut seen = HashSet::new();
        let mut rows = Vec::new();
        for g in gs {
            let r = self.eval(g, input.clone())?;
            if new.iter().any(|v| r.col(v).is_none()) {
                return Err(Self::unsafe_err(f));
            }
            for row in r.project(&vars).rows {
                if seen.insert(row.clone()) {
                    rows.push(row);
                }
            }
        }
        Ok(Relation { vars, rows })
    }

    fn eval_exists(&self, f: &Formula, vs: &[Sym], g: &Formula, input: Relation) -> Result<Relation, CqeError> {
        let clash: Vec<&Sym> = vs.iter().filter(|v| input.col(v).is_some()).collect();
        let (vs, g) = if clash.is_empty() {
            (vs.to_vec(), g.clone())
        } else {
            let mut fresh = self.fresh.borrow_mut();
            let mut ren = Substitution::new();
            let mut nvs = Vec::new();
            for v in vs {
                if clash.contains(&v) {
                    let nv = fresh.var("ren");
                    ren.insert(v.clone(), Term::Var(nv.clone()));
                    nvs.push(nv);
                } else {
                    nvs.push(v.clone());
                }
            }
            (nvs, g.substitute(&ren, &mut fresh))
        };
        let r = self.eval(&g, input)?;
        if vs.iter().any(|v| r.col(v).is_none() && g.free_vars().contains(v)) {
            return Err(Self::unsafe_err(f));
        }
        let keep: Vec<Sym> = r.vars.iter().filter(|v| !vs.contains(v)).cloned().collect();
        Ok(r.project(&keep))
    }

    fn eval_and(&self, f: &Formula, gs: &[Formula], input: Relation) -> Result<Relation, CqeError> {
        let mut cur = input;
        let mut left: Vec<&Formula> = gs.iter().collect();
        while !left.is_empty() {
            let b = cur.bound();
            let best = left
                .iter()
                .enumerate()
                .filter_map(|(i, g)| Some((i, rank(g, &b)?, self.size_hint(g))))
                .min_by_key(|(_, r, s)| (*r, *s));
            let Some((i, _, _)) = best else { return Err(Self::unsafe_err(f)) };
            cur = self.eval(left.remove(i), cur)?;
            if cur.rows.is_empty() {
                let mut bound = cur.bound();
                for g in &left {
                    if let Some(b2) = binds(g, &bound) {
                        bound = b2;
                    }
                }
                let mut vars = cur.vars.clone();
                vars.extend(bound.into_iter().filter(|v| !cur.vars.contains(v)));
                return Ok(Relation::empty(vars));
            }
        }
        Ok(cur)
    }

    fn size_hint(&self, g: &Formula) -> usize {
        match g {
            Formula::Atom(a) => self.db.relation(&a.pred).map_or(0, |r| r.len()),
            _ => usize::MAX,
        }
    }
}

/// Answers of `f` over `db` for the free variables `target`.
pub fn eval_fo(f: &Formula, target: &[Sym], db: &FactSet) -> Result<BTreeSet<Vec<Sym>>, CqeError> {
    FoEvaluator::new(db).answers(f, target)
}

pub fn fo_holds(f: &Formula, db: &FactSet) -> Result<bool, CqeError> {
    FoEvaluator::new(db).holds(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_facts;

    fn db() -> FactSet {
        parse_facts("R(a,b). R(b,c). R(c,c). A(a). A(c). B(b).").unwrap()
    }

    fn at(p: &str, args: &[&str]) -> Formula {
        Formula::Atom(Atom::new(p, args.iter().map(|s| if s.starts_with(char::is_lowercase) { Term::var(s) } else { Term::cst(s) }).collect()))
    }

    fn syms(rows: &[&[&str]]) -> BTreeSet<Vec<Sym>> {
        rows.iter().map(|r| r.iter().map(|s| Sym::new(s)).collect()).collect()
    }

    #[test]
    fn join_and_negation() {
        let f = Formula::and(vec![at("R", &["x", "y"]), Formula::not(at("A", &["y"]))]);
        let x = [Sym::new("x"), Sym::new("y")];
        let got = eval_fo(&f, &x, &db()).unwrap();
        assert_eq!(got, syms(&[&["a", "b"]]));
    }

    #[test]
    fn repeated_variable_and_constants() {
        let f = at("R", &["x", "x"]);
        assert_eq!(eval_fo(&f, &[Sym::new("x")], &db()).unwrap(), syms(&[&["c"]]));
        let f = at("R", &["A", "y"]);
        assert!(eval_fo(&f, &[Sym::new("y")], &db()).unwrap().is_empty());
    }

    #[test]
    fn disjunction_binding_same_vars() {
        let f = Formula::or(vec![at("A", &["x"]), at("B", &["x"])]);
        assert_eq!(eval_fo(&f, &[Sym::new("x")], &db()).unwrap().len(), 3);
    }

    #[test]
    fn exists_shadowing_is_renamed() {
        // x bound outside; inner ∃x is a different variable.
        let inner = Formula::exists(vec![Sym::new("x")], Formula::and(vec![at("R", &["x", "y"]), at("B", &["x"])]));
        let f = Formula::and(vec![at("A", &["x"]), at("R", &["x", "y"]), Formula::not(inner)]);
        let got = eval_fo(&f, &[Sym::new("x"), Sym::new("y")], &db()).unwrap();
        assert_eq!(got, syms(&[&["a", "b"]]));
    }

    #[test]
    fn implication_filter() {
        let f = Formula::and(vec![at("R", &["x", "y"]), Formula::implies(at("A", &["x"]), at("B", &["y"]))]);
        assert_eq!(eval_fo(&f, &[Sym::new("x")], &db()).unwrap(), syms(&[&["a"], &["b"]]));
    }

    #[test]
    fn equality_generator() {
        let f = Formula::and(vec![at("B", &["y"]), Formula::eq(Term::var("x"), Term::var("y"))]);
        assert_eq!(eval_fo(&f, &[Sym::new("x")], &db()).unwrap(), syms(&[&["b"]]));
    }

    #[test]
    fn unsafe_rejected() {
        let f = Formula::not(at("A", &["x"]));
        assert!(check_safe_range(&f).is_err());
        assert!(eval_fo(&f, &[Sym::new("x")], &db()).is_err());
        let f = Formula::or(vec![at("A", &["x"]), at("B", &["y"])]);
        assert!(check_safe_range(&f).is_err());
        assert!(check_safe_range(&Formula::and(vec![at("A", &["x"]), Formula::not(at("B", &["x"]))])).is_ok());
    }

    #[test]
    fn boolean_truth() {
        assert!(fo_holds(&Formula::exists(vec![Sym::new("x")], at("B", &["x"])), &db()).unwrap());
        assert!(!fo_holds(&Formula::False, &db()).unwrap());
        assert!(fo_holds(&Formula::True, &db()).unwrap());
    }
}
