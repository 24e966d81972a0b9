//! First-order rewriting of IGA entailment.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::dllite::{ucq_rewrite, Rewriter};
use crate::error::CqeError;
use crate::model::{
    Atom, ConjunctiveQuery, EpistemicDependency, Formula, Fresh, Head, Policy, Predicate, Substitution, Sym, TBox,
    Term, UnionOfCqs,
};
use crate::tgd::policy_expand;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct IgaOptions {
    /// Only enumerate `Z` sets that can take part in an expanded body image.
    pub opt1: bool,
    /// Factor `AtomRewr(conj Z)` out of `Clash`, drop `QA(γ)` from the second `isDiscl`.
    pub opt2: bool,
    /// Keep only the most general mappings.
    pub opt3: bool,
}

impl Default for IgaOptions {
    fn default() -> Self {
        IgaOptions { opt1: true, opt2: true, opt3: true }
    }
}

impl IgaOptions {
    pub fn none() -> Self {
        IgaOptions { opt1: false, opt2: false, opt3: false }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct IgaReport {
    pub k: usize,
    pub pexp_len: usize,
    pub z_sets: usize,
    pub size: usize,
}

/// `Atoms(Π,k)`: `k` variable-disjoint atoms per predicate, all variables fresh.
pub fn atoms_template(preds: &BTreeSet<Predicate>, k: usize, fresh: &mut Fresh) -> Vec<Atom> {
    let mut out = Vec::with_capacity(preds.len() * k);
    for p in preds {
        for _ in 0..k {
            let args = (0..p.arity).map(|_| Term::Var(fresh.var("z"))).collect();
            out.push(Atom::with_pred(p.clone(), args));
        }
    }
    out
}

fn set_vars(w: &[Atom]) -> Vec<Sym> {
    crate::model::vars_in_order(w)
}

/// `map(q, W)`: one most general unifier per assignment of `q`'s atoms to atoms of `W`,
/// restricted to `vars(W)` and the free variables of `q`. Identity bindings are kept.
/// Variables of `q` must not occur in `W`.
pub fn map_substs(q: &ConjunctiveQuery, w: &[Atom], most_general_only: bool) -> Vec<Substitution> {
    let wv = set_vars(w);
    let mut order = wv.clone();
    order.extend(crate::model::vars_in_order(&q.atoms));
    let mut domain = wv;
    domain.extend(q.free_vars());
    let mut terms = Terms::new(order);
    let domain_ids: Vec<usize> = domain.iter().map(|v| terms.var(v)).collect();
    let w_ids: Vec<Vec<usize>> = w.iter().map(|a| terms.atom(a)).collect();
    let mut atoms: Vec<(&Atom, Vec<usize>)> = q.atoms.iter().map(|a| (a, terms.atom(a))).collect();
    atoms.sort_by_key(|(a, _)| w.iter().filter(|b| b.pred == a.pred).count());
    let mut st = MapSearch { uf: UnionFind::new(terms.len(), terms.first_const), seen: HashSet::new(), out: Vec::new() };
    st.extend(&atoms, w, &w_ids, &domain_ids);
    let subst = |m: &[usize]| Substitution::from_pairs(domain.iter().cloned().zip(m.iter().map(|&id| terms.term(id))));
    if !most_general_only {
        return st.out.iter().map(|m| subst(m)).collect();
    }
    let mut ms: Vec<Substitution> = most_general(st.out, terms.first_const).iter().map(|m| subst(m)).collect();
    ms.sort_by_cached_key(|m| m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>());
    ms
}

/// Dense ids: variables in representative-preference order, then constants.
struct Terms {
    vars: HashMap<Sym, usize>,
    order: Vec<Sym>,
    consts: HashMap<Sym, usize>,
    const_names: Vec<Sym>,
    first_const: usize,
}

impl Terms {
    fn new(order: Vec<Sym>) -> Self {
        let mut vars = HashMap::new();
        let mut uniq = Vec::new();
        for v in order {
            if !vars.contains_key(&v) {
                vars.insert(v.clone(), uniq.len());
                uniq.push(v);
            }
        }
        // Constants are numbered after every variable; `first_const` is fixed up front.
        let first_const = uniq.len();
        Terms { vars, order: uniq, consts: HashMap::new(), const_names: Vec::new(), first_const }
    }

    fn var(&self, v: &Sym) -> usize {
        self.vars[v]
    }

    fn id(&mut self, t: &Term) -> usize {
        match t {
            Term::Var(v) => self.vars[v],
            Term::Const(c) => {
                if let Some(&i) = self.consts.get(c) {
                    return i;
                }
                let i = self.first_const + self.const_names.len();
                self.consts.insert(c.clone(), i);
                self.const_names.push(c.clone());
                i
            }
        }
    }

    fn atom(&mut self, a: &Atom) -> Vec<usize> {
        a.args.iter().map(|t| self.id(t)).collect()
    }

    fn len(&self) -> usize {
        self.first_const + self.const_names.len()
    }

    fn term(&self, id: usize) -> Term {
        if id < self.first_const {
            Term::Var(self.order[id].clone())
        } else {
            Term::Const(self.const_names[id - self.first_const].clone())
        }
    }
}

/// Union-find with an undo log. Each root stores its best member: a constant if
/// the class has one, else its lowest variable id.
struct UnionFind {
    parent: Vec<usize>,
    best: Vec<usize>,
    first_const: usize,
    log: Vec<(usize, usize, usize)>,
}

impl UnionFind {
    fn new(n: usize, first_const: usize) -> Self {
        UnionFind { parent: (0..n).collect(), best: (0..n).collect(), first_const, log: Vec::new() }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let (ba, bb) = (self.best[ra], self.best[rb]);
        let fc = self.first_const;
        if ba >= fc && bb >= fc {
            return false;
        }
        let best = if ba >= fc || bb >= fc { ba.max(bb) } else { ba.min(bb) };
        self.log.push((rb, ra, self.best[ra]));
        self.parent[rb] = ra;
        self.best[ra] = best;
        true
    }

    fn undo_to(&mut self, mark: usize) {
        while self.log.len() > mark {
            let (child, root, best) = self.log.pop().expect("log entry");
            self.parent[child] = child;
            self.best[root] = best;
        }
    }

    fn rep(&self, x: usize) -> usize {
        self.best[self.find(x)]
    }
}

struct MapSearch {
    uf: UnionFind,
    seen: HashSet<Vec<usize>>,
    out: Vec<Vec<usize>>,
}

impl MapSearch {
    fn extend(&mut self, atoms: &[(&Atom, Vec<usize>)], w: &[Atom], w_ids: &[Vec<usize>], domain: &[usize]) {
        let Some(((a, a_ids), rest)) = atoms.split_first() else {
            let mu: Vec<usize> = domain.iter().map(|&d| self.uf.rep(d)).collect();
            if self.seen.insert(mu.clone()) {
                self.out.push(mu);
            }
            return;
        };
        for (b, b_ids) in w.iter().zip(w_ids) {
            if b.pred != a.pred {
                continue;
            }
            let mark = self.uf.log.len();
            if a_ids.iter().zip(b_ids).all(|(&x, &y)| self.uf.union(x, y)) {
                self.extend(rest, w, w_ids, domain);
            }
            self.uf.undo_to(mark);
        }
    }
}

/// Is there a `ρ` with `specific = ρ ∘ general`? Ids at or above `first_const` are constants.
fn instance_of(specific: &[usize], general: &[usize], first_const: usize, rho: &mut [usize]) -> bool {
    rho.fill(usize::MAX);
    for (&s, &g) in specific.iter().zip(general) {
        if g >= first_const {
            if g != s {
                return false;
            }
        } else if rho[g] == usize::MAX {
            rho[g] = s;
        } else if rho[g] != s {
            return false;
        }
    }
    true
}

/// The mappings that are not a proper instance of another, one per renaming class.
///
/// A proper instance has fewer distinct values, or as many and more constants, so
/// after sorting on that key every candidate only needs checking against the kept set.
fn most_general(mut ms: Vec<Vec<usize>>, first_const: usize) -> Vec<Vec<usize>> {
    ms.sort_by_cached_key(|m| {
        let vals: HashSet<usize> = m.iter().copied().collect();
        let consts = vals.iter().filter(|&&v| v >= first_const).count();
        (std::cmp::Reverse(vals.len()), consts, m.clone())
    });
    let mut rho = vec![usize::MAX; first_const];
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for m in ms {
        if !kept.iter().any(|g| instance_of(&m, g, first_const, &mut rho)) {
            kept.push(m);
        }
    }
    kept
}

/// Compiler state shared across `Z` sets and disjuncts.
pub struct IgaCompiler {
    rewriter: Rewriter,
    /// Expanded EDs, normalized and renamed apart from everything else.
    pexp: Vec<EpistemicDependency>,
    k: usize,
    preds: BTreeSet<Predicate>,
    opts: IgaOptions,
    fresh: Fresh,
    pub z_sets: usize,
}

impl IgaCompiler {
    /// `pexp` must already be the expansion of `p` w.r.t. `t`.
    pub fn new(t: &TBox, p: &Policy, pexp: &Policy, opts: IgaOptions) -> Self {
        let mut fresh = Fresh::new();
        let pexp: Vec<EpistemicDependency> =
            pexp.eds.iter().map(|e| e.normalized().rename_apart(&mut fresh, "t")).collect();
        let k = pexp.iter().map(|e| e.body.atoms.len()).max().unwrap_or(0);
        let mut preds = p.predicates();
        preds.extend(t.predicates());
        IgaCompiler { rewriter: Rewriter::new(t), pexp, k, preds, opts, fresh, z_sets: 0 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn atom_rewr(&mut self, atoms: &[Atom]) -> Formula {
        let parts = atoms.iter().map(|a| self.rewriter.atom_formula(a, &mut self.fresh)).collect();
        Formula::and(parts)
    }

    /// The implication part of `isDiscl(W)`.
    fn discl_rules(&mut self, w: &[Atom]) -> Formula {
        let wv: BTreeSet<Sym> = set_vars(w).into_iter().collect();
        let mut parts = Vec::new();
        for i in 0..self.pexp.len() {
            let ed = self.pexp[i].clone();
            for mu in map_substs(&ed.body, w, self.opts.opt3) {
                let eq = Formula::and(
                    mu.iter()
                        .filter(|(x, _)| wv.contains(*x))
                        .map(|(x, t)| Formula::eq(Term::Var(x.clone()), t.clone()))
                        .collect(),
                );
                let head = match ed.head.apply(&mu) {
                    Head::Bot => Formula::False,
                    Head::Atoms(atoms) => {
                        let free = crate::model::vars_in_order(&atoms);
                        let q = ConjunctiveQuery::with_free(&free, atoms);
                        self.rewriter.cq_formula(&q, &free, &mut self.fresh)
                    }
                };
                parts.push(Formula::implies(eq, head));
            }
        }
        Formula::and(parts)
    }

    /// `isDiscl(W,T,P)`.
    pub fn is_discl(&mut self, w: &[Atom]) -> Formula {
        let ar = self.atom_rewr(w);
        let rules = self.discl_rules(w);
        Formula::and(vec![ar, rules])
    }

    /// `Clash(Z,γ,T,P)`; free variables are those of `γ`.
    pub fn clash(&mut self, z: &[Atom], gamma: &[Atom]) -> Formula {
        let mut w = z.to_vec();
        w.extend(gamma.iter().cloned());
        let body = if self.opts.opt2 {
            let ar = self.atom_rewr(z);
            let rz = self.discl_rules(z);
            let rw = self.discl_rules(&w);
            Formula::and(vec![ar, rz, Formula::not(rw)])
        } else {
            let dz = self.is_discl(z);
            let dw = self.is_discl(&w);
            Formula::and(vec![dz, Formula::not(dw)])
        };
        Formula::exists(set_vars(z), body)
    }

    /// Predicate multisets of size `< k`, as fresh atom sets, optionally filtered by `γ`.
    fn z_candidates(&mut self, gamma: &[Atom]) -> Vec<Vec<Atom>> {
        if self.k == 0 {
            return Vec::new();
        }
        let preds: Vec<Predicate> = self.preds.iter().cloned().collect();
        let bodies: Vec<BTreeMap<Predicate, usize>> = self.pexp.iter().map(|e| pred_counts(&e.body.atoms)).collect();
        let gamma_preds: BTreeSet<&Predicate> = gamma.iter().map(|a| &a.pred).collect();
        let mut out = Vec::new();
        let mut cur: Vec<usize> = Vec::new();
        multisets(preds.len(), self.k - 1, 0, &mut cur, &mut |ms| {
            if self.opts.opt1 && !ms.is_empty() {
                let mut zc: BTreeMap<&Predicate, usize> = BTreeMap::new();
                for &i in ms {
                    *zc.entry(&preds[i]).or_default() += 1;
                }
                let useful = bodies.iter().any(|b| {
                    zc.iter().all(|(p, n)| b.get(*p).copied().unwrap_or(0) >= *n)
                        && b.iter().any(|(p, n)| gamma_preds.contains(p) && *n > zc.get(p).copied().unwrap_or(0))
                });
                if !useful {
                    return;
                }
            }
            out.push(ms.to_vec());
        });
        out.into_iter()
            .map(|ms| {
                ms.into_iter()
                    .map(|i| {
                        let p = &preds[i];
                        Atom::with_pred(p.clone(), (0..p.arity).map(|_| Term::Var(self.fresh.var("z"))).collect())
                    })
                    .collect()
            })
            .collect()
    }

    /// `∃x (AtomRewr(γ) ∧ ⋀_Z ¬Clash(Z,γ))` with the answer bound to `target`.
    pub fn disjunct(&mut self, d: &ConjunctiveQuery, target: &[Sym]) -> Formula {
        let mut ren = Substitution::new();
        let mut eqs = Vec::new();
        for (t, tv) in d.answer.iter().zip(target) {
            match t {
                Term::Var(v) => match ren.get(v) {
                    Some(prev) => eqs.push(Formula::eq(Term::Var(tv.clone()), prev.clone())),
                    None => ren.insert(v.clone(), Term::Var(tv.clone())),
                },
                Term::Const(_) => eqs.push(Formula::eq(Term::Var(tv.clone()), t.clone())),
            }
        }
        let mut exist = Vec::new();
        for v in d.existential_vars() {
            let nv = self.fresh.var("x");
            ren.insert(v, Term::Var(nv.clone()));
            exist.push(nv);
        }
        let gamma = ren.apply_atoms(&d.atoms);
        let mut parts = vec![self.atom_rewr(&gamma)];
        for z in self.z_candidates(&gamma) {
            self.z_sets += 1;
            let c = self.clash(&z, &gamma);
            parts.push(Formula::not(c));
        }
        parts.extend(eqs);
        Formula::exists(exist, Formula::and(parts))
    }
}

fn pred_counts(atoms: &[Atom]) -> BTreeMap<Predicate, usize> {
    let mut m = BTreeMap::new();
    for a in atoms {
        *m.entry(a.pred.clone()).or_default() += 1;
    }
    m
}

/// Non-decreasing index sequences over `0..n` of length `0..=max`.
fn multisets(n: usize, max: usize, from: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    f(cur);
    if cur.len() == max {
        return;
    }
    for i in from..n {
        cur.push(i);
        multisets(n, max, i, cur, f);
        cur.pop();
    }
}

/// `IGA-Ent(q,T,P)`. Free variables are `q.free_vars()`.
pub fn iga_rewrite(q: &UnionOfCqs, t: &TBox, p: &Policy, opts: IgaOptions) -> Result<(Formula, IgaReport), CqeError> {
    let pexp = policy_expand(t, p)?;
    Ok(iga_rewrite_expanded(q, t, p, &pexp, opts))
}

/// As [`iga_rewrite`] with a precomputed expansion.
pub fn iga_rewrite_expanded(q: &UnionOfCqs, t: &TBox, p: &Policy, pexp: &Policy, opts: IgaOptions) -> (Formula, IgaReport) {
    let target = q.free_vars();
    let qr = ucq_rewrite(q, t);
    let mut c = IgaCompiler::new(t, p, pexp, opts);
    let phi = Formula::or(qr.disjuncts.iter().map(|d| c.disjunct(d, &target)).collect());
    let report = IgaReport { k: c.k, pexp_len: pexp.len(), z_sets: c.z_sets, size: phi.size() };
    (phi, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_policy, parse_query, parse_tbox};

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    fn show(m: &Substitution) -> String {
        m.iter().filter(|(k, t)| t.as_var() != Some(*k)).map(|(k, t)| format!("{k}->{t}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn template() {
        let preds = BTreeSet::from([Predicate::new("manager", 1), Predicate::new("salary", 2)]);
        let a = atoms_template(&preds, 2, &mut Fresh::new());
        assert_eq!(a.len(), 4);
        assert_eq!(set_vars(&a).len(), 6);
        assert!(atoms_template(&BTreeSet::new(), 3, &mut Fresh::new()).is_empty());
    }

    #[test]
    fn mappings_of_two_atom_query() {
        let z = vec![Atom::new("R", vec![v("x"), v("y")]), Atom::new("R", vec![v("z"), v("w")])];
        let q = ConjunctiveQuery::with_free(
            &[Sym::new("v"), Sym::new("u")],
            vec![Atom::new("R", vec![v("v"), Term::cst("1")]), Atom::new("R", vec![v("u"), v("t")])],
        );
        let all: Vec<String> = map_substs(&q, &z, false).iter().map(show).collect();
        assert!(all.contains(&"u->z v->x y->1".to_string()), "{all:?}");
        assert!(all.contains(&"u->x v->z w->1".to_string()), "{all:?}");
        let q = ConjunctiveQuery::with_free(&[Sym::new("v")], vec![Atom::new("B", vec![v("v")])]);
        assert!(map_substs(&q, &z, true).is_empty());
        let z = vec![Atom::new("A", vec![v("x1")])];
        let q = ConjunctiveQuery::with_free(&[Sym::new("v")], vec![Atom::new("A", vec![v("v")])]);
        let ms: Vec<String> = map_substs(&q, &z, true).iter().map(show).collect();
        assert_eq!(ms, vec!["v->x1"]);
    }

    #[test]
    fn most_general_filter() {
        let z = vec![Atom::new("R", vec![v("a"), v("b")]), Atom::new("R", vec![v("c"), v("d")])];
        let q = ConjunctiveQuery::with_free(&[Sym::new("p")], vec![Atom::new("R", vec![v("p"), v("s")]), Atom::new("R", vec![v("p"), v("r")])]);
        let all = map_substs(&q, &z, false);
        let general = map_substs(&q, &z, true);
        assert_eq!(all.len(), 3);
        assert_eq!(general.len(), 2);
    }

    fn example1() -> (TBox, Policy) {
        let t = parse_tbox("EX managerOf ISA manager\nmanager ISA EX respDept\n", &BTreeMap::new()).unwrap();
        let p = parse_policy("FORALL x,y: BODY salary(x,y) HEAD manager(x)\nBODY managerOf(x,y), consRel(x,y) HEAD BOT\n").unwrap();
        (t, p)
    }

    #[test]
    fn discl_formula_shapes() {
        let (t, p) = example1();
        let pexp = policy_expand(&t, &p).unwrap();
        let mut c = IgaCompiler::new(&t, &p, &pexp, IgaOptions::default());
        assert_eq!(c.k(), 2);
        assert_eq!(c.is_discl(&[]), Formula::True);
        let z = vec![Atom::new("managerOf", vec![v("a"), v("b")])];
        assert_eq!(c.is_discl(&z).to_string(), "managerOf(a,b)");
        let z = vec![Atom::new("managerOf", vec![v("a"), v("b")]), Atom::new("consRel", vec![v("c"), v("d")])];
        let s = c.is_discl(&z).to_string();
        assert!(s.contains("~((c = a & d = b))"), "{s}");
    }

    #[test]
    fn report_counts() {
        let (t, p) = example1();
        let q = parse_query("Q() :- consRel(x,y)").unwrap();
        let (phi, r) = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap();
        assert_eq!((r.k, r.pexp_len), (2, 2));
        assert_eq!(r.z_sets, 2);
        assert!(phi.free_vars().is_empty());
        let (_, r0) = iga_rewrite(&q, &t, &p, IgaOptions::none()).unwrap();
        assert!(r0.z_sets > r.z_sets);
    }

    #[test]
    fn open_query_keeps_answer_free() {
        let (t, p) = example1();
        let q = parse_query("Q(x) :- manager(x)").unwrap();
        let (phi, _) = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap();
        assert_eq!(phi.free_vars().into_iter().collect::<Vec<_>>(), vec![Sym::new("x")]);
    }

    #[test]
    fn deterministic() {
        let (t, p) = example1();
        let q = parse_query("Q() :- respDept(x,y), salary(x,150k)").unwrap();
        let a = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap().0.to_string();
        let b = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap().0.to_string();
        assert_eq!(a, b);
    }
}
