//! DL-Lite_R reasoning: perfect rewriting, atom-wise rewriting, ground closure,
//! consistency and the DL translation of binary policies.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::error::GuardError;
use crate::eval::{cq_holds, eval_cq, FactSet};
use crate::model::{
    canonical_atoms, canonicalize, dl_translate, prune_subsumed, Atom, BasicConcept, ConjunctiveQuery, Formula, Fresh,
    Policy, Role, Substitution, Sym, TBox, TBoxAxiom, Term, Unifier, UnionOfCqs,
};

/// Where a rewriting rule came from. Policy-derived rules only fire on
/// individuals, so variables they produce are marked ground.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Origin {
    TBox,
    Policy,
}

/// A query under rewriting: answer tuple, atoms, and variables that must be
/// matched to constants.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct RwCq {
    pub answer: Vec<Term>,
    pub atoms: Vec<Atom>,
    pub ground: BTreeSet<Sym>,
}

impl RwCq {
    pub fn from_cq(q: &ConjunctiveQuery) -> Self {
        RwCq { answer: q.answer.clone(), atoms: q.atoms.clone(), ground: BTreeSet::new() }
    }

    pub fn answer_vars(&self) -> BTreeSet<Sym> {
        self.answer.iter().filter_map(Term::as_var).cloned().collect()
    }

    /// Canonical representative; marks on answer variables or vanished variables are dropped.
    pub fn canonical(&self) -> RwCq {
        let fixed = self.answer_vars();
        let (atoms, ren) = canonical_atoms(&self.atoms, &fixed);
        let present: BTreeSet<Sym> = atoms.iter().flat_map(|a| a.vars().cloned()).collect();
        let ground = self
            .ground
            .iter()
            .filter(|v| !fixed.contains(*v))
            .filter_map(|v| ren.apply_term(&Term::Var(v.clone())).as_var().cloned())
            .filter(|v| present.contains(v))
            .collect();
        RwCq { answer: self.answer.clone(), atoms, ground }
    }

    pub fn occurrences(&self) -> HashMap<&Sym, usize> {
        let mut occ: HashMap<&Sym, usize> = HashMap::new();
        for a in &self.atoms {
            for v in a.vars() {
                *occ.entry(v).or_default() += 1;
            }
        }
        occ
    }

    /// Applies an idempotent substitution, carrying ground marks through it.
    pub fn apply(&self, s: &Substitution, mut extra_marks: Vec<Term>) -> RwCq {
        let mut atoms = s.apply_atoms(&self.atoms);
        let mut seen = HashSet::new();
        atoms.retain(|a| seen.insert(a.clone()));
        extra_marks.extend(self.ground.iter().map(|v| Term::Var(v.clone())));
        let ground = extra_marks.iter().filter_map(|t| s.apply_term(t).as_var().cloned()).collect();
        RwCq { answer: self.answer.iter().map(|t| s.apply_term(t)).collect(), atoms, ground }
    }

    pub fn to_cq(&self) -> ConjunctiveQuery {
        ConjunctiveQuery::new(self.answer.clone(), self.atoms.clone())
    }

    /// Variables in priority order for choosing unifier representatives.
    pub fn var_order(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for v in self.answer.iter().filter_map(Term::as_var).chain(self.atoms.iter().flat_map(|a| a.vars())) {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }
}

/// Positive inclusion with provenance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TaggedAxiom {
    pub axiom: TBoxAxiom,
    pub origin: Origin,
}

pub fn tagged(t: &TBox, origin: Origin) -> Vec<TaggedAxiom> {
    t.positive().map(|a| TaggedAxiom { axiom: a.clone(), origin }).collect()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct RewriteOptions {
    /// Drop disjuncts homomorphically subsumed by another.
    pub prune_subsumed: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions { prune_subsumed: true }
    }
}

fn is_bound(q: &RwCq, occ: &HashMap<&Sym, usize>, t: &Term, answer: &BTreeSet<Sym>) -> bool {
    match t {
        Term::Const(_) => true,
        Term::Var(v) => answer.contains(v) || q.ground.contains(v) || occ.get(v).copied().unwrap_or(0) > 1,
    }
}

/// Backward application of one inclusion to atom `g`, per the PerfectRef applicability rules.
fn apply_inclusion(
    g: &Atom,
    ax: &TaggedAxiom,
    bound: &dyn Fn(&Term) -> bool,
    fresh: &mut Fresh,
) -> Option<(Atom, Vec<Term>)> {
    let frontier_marks = |ts: Vec<Term>| if ax.origin == Origin::Policy { ts } else { Vec::new() };
    match (&ax.axiom, g.args.as_slice()) {
        (TBoxAxiom::ConceptIncl(lhs, BasicConcept::Atomic(a)), [x]) if *a == g.pred.name => {
            let gr = lhs.atom(x.clone(), Term::Var(fresh.var("n")));
            Some((gr, frontier_marks(vec![x.clone()])))
        }
        (TBoxAxiom::ConceptIncl(lhs, BasicConcept::Exists(r)), [t0, t1]) if r.name == g.pred.name => {
            let (x, other) = if r.inverse { (t1, t0) } else { (t0, t1) };
            if bound(other) {
                return None;
            }
            let gr = lhs.atom(x.clone(), Term::Var(fresh.var("n")));
            Some((gr, frontier_marks(vec![x.clone()])))
        }
        (TBoxAxiom::RoleIncl(lhs, r), [t0, t1]) if r.name == g.pred.name => {
            let (x, y) = if r.inverse { (t1, t0) } else { (t0, t1) };
            Some((lhs.atom(x.clone(), y.clone()), frontier_marks(vec![x.clone(), y.clone()])))
        }
        _ => None,
    }
}

/// PerfectRef to fixpoint. Returns canonical rewritings, marks included.
pub(crate) fn perfect_ref(q: &RwCq, axioms: &[TaggedAxiom], fresh: &mut Fresh) -> Vec<RwCq> {
    let start = q.canonical();
    let mut seen: HashSet<RwCq> = HashSet::from([start.clone()]);
    let mut out = vec![start.clone()];
    let mut work = vec![start];
    while let Some(cur) = work.pop() {
        let answer = cur.answer_vars();
        let occ = cur.occurrences();
        let bound = |t: &Term| is_bound(&cur, &occ, t, &answer);
        let mut produced: Vec<RwCq> = Vec::new();
        for (i, g) in cur.atoms.iter().enumerate() {
            for ax in axioms {
                if let Some((gr, marks)) = apply_inclusion(g, ax, &bound, fresh) {
                    let mut atoms = cur.atoms.clone();
                    atoms[i] = gr;
                    let mut ground = cur.ground.clone();
                    ground.extend(marks.iter().filter_map(Term::as_var).cloned());
                    produced.push(RwCq { answer: cur.answer.clone(), atoms, ground });
                }
            }
        }
        for i in 0..cur.atoms.len() {
            for j in i + 1..cur.atoms.len() {
                if cur.atoms[i].pred != cur.atoms[j].pred {
                    continue;
                }
                let mut u = Unifier::new();
                if u.unify_atoms(&cur.atoms[i], &cur.atoms[j]) {
                    let s = u.to_subst(&cur.var_order());
                    produced.push(cur.apply(&s, Vec::new()));
                }
            }
        }
        for p in produced {
            let c = p.canonical();
            if seen.insert(c.clone()) {
                out.push(c.clone());
                work.push(c);
            }
        }
    }
    out
}

/// Drops marks, canonicalizes, deduplicates and optionally prunes.
pub(crate) fn finish(rws: Vec<RwCq>, opts: RewriteOptions) -> Vec<ConjunctiveQuery> {
    let mut seen = HashSet::new();
    let mut out: Vec<ConjunctiveQuery> = Vec::new();
    for r in rws {
        let c = canonicalize(&r.to_cq());
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    if opts.prune_subsumed {
        out = prune_subsumed(out);
    }
    out
}

pub fn ucq_rewrite(q: &UnionOfCqs, t: &TBox) -> UnionOfCqs {
    ucq_rewrite_with(q, t, RewriteOptions::default())
}

pub fn ucq_rewrite_with(q: &UnionOfCqs, t: &TBox, opts: RewriteOptions) -> UnionOfCqs {
    let axioms = tagged(t, Origin::TBox);
    let mut fresh = Fresh::new();
    let all: Vec<RwCq> = q.disjuncts.iter().flat_map(|d| perfect_ref(&RwCq::from_cq(d), &axioms, &mut fresh)).collect();
    UnionOfCqs { disjuncts: finish(all, opts) }
}

/// Caching CQ rewriter over a fixed TBox.
pub struct Rewriter {
    axioms: Vec<TaggedAxiom>,
    cache: RefCell<HashMap<ConjunctiveQuery, Vec<ConjunctiveQuery>>>,
}

impl Rewriter {
    pub fn new(t: &TBox) -> Self {
        Rewriter { axioms: tagged(t, Origin::TBox), cache: RefCell::new(HashMap::new()) }
    }

    /// Perfect rewriting of one CQ. Queries with distinct-variable answers are
    /// cached up to renaming of those variables.
    pub fn rewrite(&self, q: &ConjunctiveQuery) -> Vec<ConjunctiveQuery> {
        if !q.has_plain_answer() {
            return self.compute(q);
        }
        let free = q.free_vars();
        let to_pos = Substitution::from_pairs(
            free.iter().enumerate().map(|(i, v)| (v.clone(), Term::Var(Sym::from(format!("?_f{i}"))))),
        );
        let key = canonicalize(&crate::model::apply_substitution(q, &to_pos));
        let hit = self.cache.borrow().get(&key).cloned();
        let generic = match hit {
            Some(r) => r,
            None => {
                let r = self.compute(&key);
                self.cache.borrow_mut().insert(key, r.clone());
                r
            }
        };
        let back = Substitution::from_pairs(
            free.iter().enumerate().map(|(i, v)| (Sym::from(format!("?_f{i}")), Term::Var(v.clone()))),
        );
        generic.iter().map(|d| crate::model::apply_substitution(d, &back)).collect()
    }

    fn compute(&self, q: &ConjunctiveQuery) -> Vec<ConjunctiveQuery> {
        let mut fresh = Fresh::new();
        finish(perfect_ref(&RwCq::from_cq(q), &self.axioms, &mut fresh), RewriteOptions::default())
    }

    /// `AtomRewr(α)` for a single atom.
    pub fn atom_formula(&self, a: &Atom, fresh: &mut Fresh) -> Formula {
        let free: Vec<Sym> = crate::model::vars_in_order([a]);
        let q = ConjunctiveQuery::with_free(&free, vec![a.clone()]);
        let ds = self.rewrite(&q);
        Formula::or(ds.iter().map(|d| cq_formula(d, &free, fresh)).collect())
    }

    /// `UCQRew(q)` as a formula whose free variables are `target`, aligned with `q.answer`.
    pub fn cq_formula(&self, q: &ConjunctiveQuery, target: &[Sym], fresh: &mut Fresh) -> Formula {
        let ds = self.rewrite(q);
        Formula::or(ds.iter().map(|d| cq_formula(d, target, fresh)).collect())
    }

    pub fn atom_rewrite(&self, phi: &Formula, fresh: &mut Fresh) -> Formula {
        phi.map_atoms(&mut |a| self.atom_formula(a, fresh))
    }
}

/// One CQ as `∃ȳ (atoms ∧ equalities)`, answer positions bound to `target`.
pub fn cq_formula(d: &ConjunctiveQuery, target: &[Sym], fresh: &mut Fresh) -> Formula {
    debug_assert_eq!(d.answer.len(), target.len());
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
        let nv = fresh.var("y");
        ren.insert(v, Term::Var(nv.clone()));
        exist.push(nv);
    }
    let mut parts: Vec<Formula> = d.atoms.iter().map(|a| Formula::Atom(ren.apply_atom(a))).collect();
    parts.extend(eqs);
    Formula::exists(exist, Formula::and(parts))
}

/// `AtomRewr(φ, T)`.
pub fn atom_rewrite(phi: &Formula, t: &TBox) -> Formula {
    Rewriter::new(t).atom_rewrite(phi, &mut Fresh::new())
}

/// Basic concepts implied by `b`, reflexively.
fn concept_closure(t: &TBox) -> impl Fn(&BTreeSet<BasicConcept>) -> BTreeSet<BasicConcept> + '_ {
    let mut incl: Vec<(BasicConcept, BasicConcept)> = Vec::new();
    for ax in t.positive() {
        match ax {
            TBoxAxiom::ConceptIncl(l, r) => incl.push((l.clone(), r.clone())),
            TBoxAxiom::RoleIncl(l, r) => {
                incl.push((BasicConcept::Exists(l.clone()), BasicConcept::Exists(r.clone())));
                incl.push((BasicConcept::Exists(l.inv()), BasicConcept::Exists(r.inv())));
            }
            _ => {}
        }
    }
    move |start: &BTreeSet<BasicConcept>| {
        let mut out = start.clone();
        loop {
            let before = out.len();
            for (l, r) in &incl {
                if out.contains(l) {
                    out.insert(r.clone());
                }
            }
            if out.len() == before {
                return out;
            }
        }
    }
}

/// `cl_T(F)`: every ground atom entailed by `T ∪ F`.
pub fn closure(t: &TBox, f: &FactSet) -> FactSet {
    let role_incl: Vec<(Role, Role)> = t
        .positive()
        .filter_map(|a| match a {
            TBoxAxiom::RoleIncl(l, r) => Some((l.clone(), r.clone())),
            _ => None,
        })
        .collect();
    let mut out = f.clone();
    loop {
        let mut added = false;
        for (l, r) in &role_incl {
            let pairs: Vec<Vec<Sym>> = out.tuples(&l.pred()).cloned().collect();
            for p in pairs {
                let (a, b) = if l.inverse { (&p[1], &p[0]) } else { (&p[0], &p[1]) };
                added |= out.insert(r.atom(Term::Const(a.clone()), Term::Const(b.clone())));
            }
        }
        if !added {
            break;
        }
    }
    let mut per: BTreeMap<Sym, BTreeSet<BasicConcept>> = BTreeMap::new();
    for a in out.atoms() {
        let c = |i: usize| a.args[i].name().clone();
        match a.args.len() {
            1 => {
                per.entry(c(0)).or_default().insert(BasicConcept::Atomic(a.pred.name.clone()));
            }
            _ => {
                per.entry(c(0)).or_default().insert(BasicConcept::Exists(Role { name: a.pred.name.clone(), inverse: false }));
                per.entry(c(1)).or_default().insert(BasicConcept::Exists(Role { name: a.pred.name.clone(), inverse: true }));
            }
        }
    }
    let close = concept_closure(t);
    for (ind, bs) in per {
        for b in close(&bs) {
            if let BasicConcept::Atomic(name) = b {
                out.insert(Atom::new(&name, vec![Term::Const(ind.clone())]));
            }
        }
    }
    out
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub axiom: TBoxAxiom,
    pub witness: Vec<Sym>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| {
                let w: Vec<String> = v.witness.iter().map(|s| s.to_string()).collect();
                format!("{} violated by ({})", v.axiom, w.join(","))
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Evaluates the rewritten violation query of every negative inclusion.
pub fn check_consistency(t: &TBox, f: &FactSet) -> ConsistencyReport {
    let rw = Rewriter::new(t);
    let x = Term::var("x");
    let y = Term::var("y");
    let mut report = ConsistencyReport::default();
    for ax in t.negative() {
        let q = match ax {
            TBoxAxiom::ConceptDisj(a, b) => ConjunctiveQuery::new(
                vec![x.clone()],
                vec![a.atom(x.clone(), Term::var("n1")), b.atom(x.clone(), Term::var("n2"))],
            ),
            TBoxAxiom::RoleDisj(a, b) => ConjunctiveQuery::new(
                vec![x.clone(), y.clone()],
                vec![a.atom(x.clone(), y.clone()), b.atom(x.clone(), y.clone())],
            ),
            _ => continue,
        };
        let mut witnesses = BTreeSet::new();
        for d in rw.rewrite(&q) {
            witnesses.extend(eval_cq(&d, f));
        }
        if witnesses.is_empty() {
            // the clash may sit on an anonymous individual
            let boolean = ConjunctiveQuery::boolean(q.atoms.clone());
            if rw.rewrite(&boolean).iter().any(|d| cq_holds(&d.atoms, f)) {
                witnesses.insert(Vec::new());
            }
        }
        for w in witnesses {
            report.violations.push(Violation { axiom: ax.clone(), witness: w });
        }
    }
    report
}

/// `DL(P)` for a binary policy.
pub fn policy_dl(p: &Policy) -> Result<TBox, GuardError> {
    let mut axioms = Vec::new();
    for (i, e) in p.eds.iter().enumerate() {
        axioms.push(dl_translate(e).ok_or(GuardError::NotBinary { index: i + 1 })?);
    }
    Ok(TBox::new(axioms))
}
