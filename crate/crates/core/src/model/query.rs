use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use super::term::{const_needs_quotes, Sym, Term, GENERATED_PREFIX};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Predicate {
    pub name: Sym,
    pub arity: u8,
}

impl Predicate {
    pub fn new(name: &str, arity: u8) -> Self {
        Predicate { name: Sym::new(name), arity }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub pred: Predicate,
    pub args: Vec<Term>,
}

impl Atom {
    /// Panics on arity outside 1..=2; parsers validate before calling.
    pub fn new(name: &str, args: Vec<Term>) -> Self {
        assert!(matches!(args.len(), 1 | 2), "arity must be 1 or 2");
        Atom { pred: Predicate::new(name, args.len() as u8), args }
    }

    pub fn with_pred(pred: Predicate, args: Vec<Term>) -> Self {
        debug_assert_eq!(pred.arity as usize, args.len());
        Atom { pred, args }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Sym> {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }
}

fn term_print_cmp(a: &Term, b: &Term) -> Ordering {
    let quoted = |t: &Term| matches!(t, Term::Const(c) if const_needs_quotes(c));
    if !quoted(a) && !quoted(b) {
        a.name().as_str().cmp(b.name().as_str())
    } else {
        a.to_string().cmp(&b.to_string())
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.pred
            .name
            .cmp(&other.pred.name)
            .then(self.pred.arity.cmp(&other.pred.arity))
            .then_with(|| {
                for (a, b) in self.args.iter().zip(&other.args) {
                    match term_print_cmp(a, b) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                Ordering::Equal
            })
            // print forms can collide only for a variable and a bare constant of the same name
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Finite map from variables to terms. Application is single-step.
#[derive(Clone, PartialEq, Eq, Default, Debug)]
pub struct Substitution(pub BTreeMap<Sym, Term>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Sym, Term)>>(pairs: I) -> Self {
        Substitution(pairs.into_iter().collect())
    }

    pub fn insert(&mut self, v: Sym, t: Term) {
        self.0.insert(v, t);
    }

    pub fn get(&self, v: &str) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &Term)> {
        self.0.iter()
    }

    pub fn is_ground(&self) -> bool {
        self.0.values().all(|t| !t.is_var())
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.0.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom { pred: a.pred.clone(), args: a.args.iter().map(|t| self.apply_term(t)).collect() }
    }

    pub fn apply_atoms(&self, atoms: &[Atom]) -> Vec<Atom> {
        atoms.iter().map(|a| self.apply_atom(a)).collect()
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Substitution) -> Substitution {
        let mut out: BTreeMap<Sym, Term> =
            first.0.iter().map(|(v, t)| (v.clone(), self.apply_term(t))).collect();
        for (v, t) in &self.0 {
            out.entry(v.clone()).or_insert_with(|| t.clone());
        }
        out.retain(|v, t| t.as_var() != Some(v));
        Substitution(out)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ConjunctiveQuery {
    /// Answer tuple. Usually distinct variables; rewriting may repeat them or bind constants.
    pub answer: Vec<Term>,
    pub atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(answer: Vec<Term>, atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery { answer, atoms }
    }

    pub fn boolean(atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery { answer: vec![], atoms }
    }

    pub fn with_free(free: &[Sym], atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery { answer: free.iter().cloned().map(Term::Var).collect(), atoms }
    }

    pub fn free_vars(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for t in &self.answer {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<Sym> {
        self.atoms.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    pub fn existential_vars(&self) -> BTreeSet<Sym> {
        let free = self.free_vars();
        self.vars().into_iter().filter(|v| !free.contains(v)).collect()
    }

    pub fn is_boolean(&self) -> bool {
        self.answer.is_empty()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.atoms.iter().map(|a| a.pred.clone()).collect()
    }

    /// True when the answer tuple lists distinct variables.
    pub fn has_plain_answer(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.answer.iter().all(|t| matches!(t, Term::Var(v) if seen.insert(v.clone())))
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Q(")?;
        for (i, t) in self.answer.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(") :- ")?;
        write_atoms(f, &self.atoms)
    }
}

pub(crate) fn write_atoms(f: &mut fmt::Formatter<'_>, atoms: &[Atom]) -> fmt::Result {
    for (i, a) in atoms.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnionOfCqs {
    pub disjuncts: Vec<ConjunctiveQuery>,
}

impl UnionOfCqs {
    pub fn single(q: ConjunctiveQuery) -> Self {
        UnionOfCqs { disjuncts: vec![q] }
    }

    pub fn arity(&self) -> usize {
        self.disjuncts.first().map_or(0, |d| d.answer.len())
    }

    pub fn is_boolean(&self) -> bool {
        self.arity() == 0
    }

    /// Answer variables of the first disjunct; the shared output columns.
    pub fn free_vars(&self) -> Vec<Sym> {
        self.disjuncts.first().map(|d| d.free_vars()).unwrap_or_default()
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.disjuncts.iter().flat_map(|d| d.predicates()).collect()
    }
}

impl fmt::Display for UnionOfCqs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Q(")?;
        if let Some(d) = self.disjuncts.first() {
            for (i, t) in d.answer.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
        }
        f.write_str(") :- ")?;
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write_atoms(f, &d.atoms)?;
        }
        Ok(())
    }
}

pub fn apply_substitution(q: &ConjunctiveQuery, s: &Substitution) -> ConjunctiveQuery {
    ConjunctiveQuery {
        answer: q.answer.iter().map(|t| s.apply_term(t)).collect(),
        atoms: s.apply_atoms(&q.atoms),
    }
}

/// Union-find over terms; constants only unify with themselves.
#[derive(Clone, Default, Debug)]
pub struct Unifier {
    link: HashMap<Sym, Term>,
}

impl Unifier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn find(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Term::Var(v) = &cur {
            match self.link.get(v) {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        cur
    }

    pub fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return true;
        }
        match (ra, rb) {
            (Term::Const(_), Term::Const(_)) => false,
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                self.link.insert(v, t);
                true
            }
        }
    }

    pub fn unify_atoms(&mut self, a: &Atom, b: &Atom) -> bool {
        a.pred == b.pred && a.args.iter().zip(&b.args).all(|(x, y)| self.unify(x, y))
    }

    pub fn same(&self, a: &Term, b: &Term) -> bool {
        self.find(a) == self.find(b)
    }

    /// Idempotent substitution for `vars`; a class is represented by its constant
    /// or by its earliest member in `vars`.
    pub fn to_subst(&self, vars: &[Sym]) -> Substitution {
        let mut rep: HashMap<Term, Term> = HashMap::new();
        let mut out = Substitution::new();
        for v in vars {
            let root = self.find(&Term::Var(v.clone()));
            let r = match &root {
                Term::Const(_) => root.clone(),
                Term::Var(_) => rep.entry(root.clone()).or_insert_with(|| Term::Var(v.clone())).clone(),
            };
            if r.as_var() != Some(v) {
                out.insert(v.clone(), r);
            }
        }
        out
    }
}

/// Collects variables of atoms in first-occurrence order.
pub fn vars_in_order<'a, I: IntoIterator<Item = &'a Atom>>(atoms: I) -> Vec<Sym> {
    let mut out: Vec<Sym> = Vec::new();
    let mut seen = BTreeSet::new();
    for a in atoms {
        for v in a.vars() {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        }
    }
    out
}

/// Source of engine-generated variable names.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    next: usize,
}

impl Fresh {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, tag: &str) -> Sym {
        self.next += 1;
        Sym::from(format!("{GENERATED_PREFIX}{tag}{}", self.next))
    }
}

/// Enumerates homomorphisms from `pattern` into `target`. Variables of `pattern`
/// are bindable; terms of `target` are matched literally. `seed` pre-binds variables.
pub fn homomorphisms(pattern: &[Atom], target: &[Atom], seed: &Substitution, limit: usize) -> Vec<Substitution> {
    let mut by_pred: HashMap<&Predicate, Vec<&Atom>> = HashMap::new();
    for a in target {
        by_pred.entry(&a.pred).or_default().push(a);
    }
    let mut order: Vec<&Atom> = pattern.iter().collect();
    order.sort_by_key(|a| by_pred.get(&a.pred).map_or(0, |v| v.len()));
    let mut out = Vec::new();
    let mut cur = seed.0.clone();
    hom_rec(&order, 0, &by_pred, &mut cur, &mut out, limit);
    out
}

fn hom_rec(
    order: &[&Atom],
    i: usize,
    by_pred: &HashMap<&Predicate, Vec<&Atom>>,
    cur: &mut BTreeMap<Sym, Term>,
    out: &mut Vec<Substitution>,
    limit: usize,
) {
    if out.len() >= limit {
        return;
    }
    if i == order.len() {
        out.push(Substitution(cur.clone()));
        return;
    }
    let a = order[i];
    let Some(cands) = by_pred.get(&a.pred) else { return };
    for b in cands {
        let mut added: Vec<Sym> = Vec::new();
        let mut ok = true;
        for (p, t) in a.args.iter().zip(&b.args) {
            match p {
                Term::Const(_) => {
                    if p != t {
                        ok = false;
                        break;
                    }
                }
                Term::Var(v) => match cur.get(v) {
                    Some(bound) => {
                        if bound != t {
                            ok = false;
                            break;
                        }
                    }
                    None => {
                        cur.insert(v.clone(), t.clone());
                        added.push(v.clone());
                    }
                },
            }
        }
        if ok {
            hom_rec(order, i + 1, by_pred, cur, out, limit);
        }
        for v in added {
            cur.remove(&v);
        }
        if out.len() >= limit {
            return;
        }
    }
}

/// `general` contains `specific` (every answer of `specific` is one of `general`).
pub fn cq_subsumes(general: &ConjunctiveQuery, specific: &ConjunctiveQuery) -> bool {
    if general.answer.len() != specific.answer.len() {
        return false;
    }
    let mut seed = Substitution::new();
    for (g, s) in general.answer.iter().zip(&specific.answer) {
        match g {
            Term::Const(_) => {
                if g != s {
                    return false;
                }
            }
            Term::Var(v) => match seed.get(v) {
                Some(b) if b != s => return false,
                _ => seed.insert(v.clone(), s.clone()),
            },
        }
    }
    !homomorphisms(&general.atoms, &specific.atoms, &seed, 1).is_empty()
}

fn permutations_product(groups: &[usize]) -> Option<usize> {
    let mut total: usize = 1;
    for &g in groups {
        for k in 2..=g {
            total = total.checked_mul(k)?;
        }
    }
    Some(total)
}

const CANON_PERMUTATION_BUDGET: usize = 720;

/// Canonical form of an atom list: `fixed` variables keep their names, all
/// others become `?_e0, ?_e1, ...`. Returns the sorted, deduplicated atoms and
/// the renaming used.
pub fn canonical_atoms(atoms: &[Atom], fixed: &BTreeSet<Sym>) -> (Vec<Atom>, Substitution) {
    let placeholder = Term::Var(Sym::new("?"));
    let skeleton = |a: &Atom| Atom {
        pred: a.pred.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) if !fixed.contains(v) => placeholder.clone(),
                _ => t.clone(),
            })
            .collect(),
    };
    let mut keyed: Vec<(Atom, &Atom)> = atoms.iter().map(|a| (skeleton(a), a)).collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0));

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < keyed.len() {
        let mut j = i + 1;
        while j < keyed.len() && keyed[j].0 == keyed[i].0 {
            j += 1;
        }
        groups.push((i, j));
        i = j;
    }
    let sizes: Vec<usize> = groups.iter().map(|(a, b)| b - a).collect();

    let n_exist = vars_in_order(atoms.iter()).iter().filter(|v| !fixed.contains(*v)).count();
    let names = CanonNames::new(fixed, n_exist);
    let base: Vec<&Atom> = keyed.iter().map(|(_, a)| *a).collect();
    let feasible = permutations_product(&sizes).is_some_and(|n| n <= CANON_PERMUTATION_BUDGET);
    if !feasible || sizes.iter().all(|&s| s == 1) {
        return rename_by_order(&base, fixed, &names);
    }
    let mut best: Option<(Vec<Atom>, Substitution)> = None;
    let mut order = base.clone();
    permute_groups(&groups, 0, &mut order, &mut |ord| {
        let cand = rename_by_order(ord, fixed, &names);
        if best.as_ref().is_none_or(|b| cand.0 < b.0) {
            best = Some(cand);
        }
    });
    best.expect("at least one ordering")
}

struct CanonNames {
    names: Vec<Sym>,
}

impl CanonNames {
    /// Canonical existential names, skipping any that clash with fixed variables.
    fn new(fixed: &BTreeSet<Sym>, count: usize) -> Self {
        let mut names = Vec::with_capacity(count);
        let mut n = 0;
        while names.len() < count {
            let s = Sym::from(format!("{GENERATED_PREFIX}e{n}"));
            if !fixed.contains(&s) {
                names.push(s);
            }
            n += 1;
        }
        CanonNames { names }
    }
}

fn rename_by_order(order: &[&Atom], fixed: &BTreeSet<Sym>, names: &CanonNames) -> (Vec<Atom>, Substitution) {
    let mut ren = Substitution::new();
    let mut n = 0;
    for a in order {
        for v in a.vars() {
            if !fixed.contains(v) && ren.get(v).is_none() {
                ren.insert(v.clone(), Term::Var(names.names[n].clone()));
                n += 1;
            }
        }
    }
    let mut out: Vec<Atom> = order.iter().map(|a| ren.apply_atom(a)).collect();
    out.sort();
    out.dedup();
    (out, ren)
}

fn permute_groups<'a>(
    groups: &[(usize, usize)],
    g: usize,
    order: &mut Vec<&'a Atom>,
    visit: &mut dyn FnMut(&[&'a Atom]),
) {
    if g == groups.len() {
        visit(order);
        return;
    }
    let (lo, hi) = groups[g];
    if hi - lo == 1 {
        permute_groups(groups, g + 1, order, visit);
        return;
    }
    heap_permute(lo, hi, hi - lo, order, &mut |ord| permute_groups(groups, g + 1, ord, visit));
}

fn heap_permute<'a>(
    lo: usize,
    hi: usize,
    k: usize,
    order: &mut Vec<&'a Atom>,
    visit: &mut dyn FnMut(&mut Vec<&'a Atom>),
) {
    if k <= 1 {
        visit(order);
        return;
    }
    for i in 0..k {
        heap_permute(lo, hi, k - 1, order, visit);
        let j = if k.is_multiple_of(2) { i } else { 0 };
        if i + 1 < k {
            order.swap(lo + j, lo + k - 1);
        }
    }
    let _ = hi;
}

/// Sorts atoms, renames existential variables canonically, removes duplicates.
pub fn canonicalize(q: &ConjunctiveQuery) -> ConjunctiveQuery {
    let fixed: BTreeSet<Sym> = q.free_vars().into_iter().collect();
    let (atoms, _) = canonical_atoms(&q.atoms, &fixed);
    ConjunctiveQuery { answer: q.answer.clone(), atoms }
}

/// Removes disjuncts homomorphically subsumed by another; keeps the earlier of equivalent ones.
pub fn prune_subsumed(ds: Vec<ConjunctiveQuery>) -> Vec<ConjunctiveQuery> {
    let n = ds.len();
    // A homomorphism needs every predicate and constant of the general query in the specific one.
    let mut ids: HashMap<(bool, Sym, u8), usize> = HashMap::new();
    let sigs: Vec<Vec<u64>> = ds
        .iter()
        .map(|d| {
            let mut bits: Vec<u64> = Vec::new();
            let consts = d.atoms.iter().flat_map(|a| a.args.iter()).filter_map(Term::as_const);
            let keys = d.atoms.iter().map(|a| (true, a.pred.name.clone(), a.pred.arity)).chain(consts.map(|c| (false, c.clone(), 0)));
            for k in keys {
                let next = ids.len();
                let i = *ids.entry(k).or_insert(next);
                if bits.len() <= i / 64 {
                    bits.resize(i / 64 + 1, 0);
                }
                bits[i / 64] |= 1 << (i % 64);
            }
            bits
        })
        .collect();
    let covers = |s: &[u64], g: &[u64]| g.iter().enumerate().all(|(k, w)| w & !s.get(k).copied().unwrap_or(0) == 0);
    let mut keep = vec![true; n];
    for i in 0..n {
        if !keep[i] {
            continue;
        }
        for j in 0..n {
            if i == j || !keep[j] || !covers(&sigs[i], &sigs[j]) {
                continue;
            }
            if cq_subsumes(&ds[j], &ds[i]) && (j < i || !covers(&sigs[j], &sigs[i]) || !cq_subsumes(&ds[i], &ds[j])) {
                keep[i] = false;
                break;
            }
        }
    }
    ds.into_iter().zip(keep).filter_map(|(d, k)| k.then_some(d)).collect()
}
