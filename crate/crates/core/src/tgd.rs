//! Rewriting over `Σ(P,T)` and policy expansion.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use crate::dllite::{finish, perfect_ref, policy_dl, tagged, Origin, RewriteOptions, RwCq};
use crate::error::{CqeError, GuardError};
use crate::model::{
    canonicalize, classify, p_edge_cycle, prune_subsumed, Atom, BasicConcept, ConjunctiveQuery, EpistemicDependency,
    Fresh, Head, Policy, Substitution, Sym, TBox, TBoxAxiom, Term, Unifier, UnionOfCqs,
};

/// `∀x̄ (body → ∃z̄ head)`. `frontier` lists the universally quantified
/// variables a policy rule needs bound to individuals.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Tgd {
    pub frontier: Vec<Sym>,
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
    pub origin: Origin,
}

impl Tgd {
    pub fn body_vars(&self) -> BTreeSet<Sym> {
        self.body.iter().flat_map(|a| a.vars().cloned()).collect()
    }

    pub fn head_existentials(&self) -> BTreeSet<Sym> {
        let bv = self.body_vars();
        self.head.iter().flat_map(|a| a.vars().cloned()).filter(|v| !bv.contains(v)).collect()
    }

    fn rename(&self, fresh: &mut Fresh) -> Tgd {
        let vars: BTreeSet<Sym> =
            self.body.iter().chain(&self.head).flat_map(|a| a.vars().cloned()).collect();
        let s = Substitution::from_pairs(vars.into_iter().map(|v| (v, Term::Var(fresh.var("g")))));
        Tgd {
            frontier: self.frontier.iter().map(|v| s.apply_term(&Term::Var(v.clone())).as_var().cloned().expect("var")).collect(),
            body: s.apply_atoms(&self.body),
            head: s.apply_atoms(&self.head),
            origin: self.origin,
        }
    }
}

impl fmt::Display for Tgd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |atoms: &[Atom]| atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" & ");
        let ex = self.head_existentials();
        if ex.is_empty() {
            write!(f, "{} -> {}", show(&self.body), show(&self.head))
        } else {
            let ex: Vec<String> = ex.iter().map(|v| v.to_string()).collect();
            write!(f, "{} -> exists {}. {}", show(&self.body), ex.join(","), show(&self.head))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TgdSet {
    pub tgds: Vec<Tgd>,
}

impl TgdSet {
    pub fn len(&self) -> usize {
        self.tgds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tgds.is_empty()
    }
}

/// `TGD(T)`; negative inclusions are skipped.
pub fn tbox_to_tgds(t: &TBox) -> Vec<Tgd> {
    let x = Term::var("x");
    let y = Term::var("y");
    let mut out = Vec::new();
    for ax in t.positive() {
        let (body, head) = match ax {
            TBoxAxiom::ConceptIncl(l, r) => {
                let z = if matches!(r, BasicConcept::Exists(_)) { Term::var("z") } else { y.clone() };
                (l.atom(x.clone(), y.clone()), r.atom(x.clone(), z))
            }
            TBoxAxiom::RoleIncl(l, r) => (l.atom(x.clone(), y.clone()), r.atom(x.clone(), y.clone())),
            _ => continue,
        };
        let bv: BTreeSet<Sym> = body.vars().cloned().collect();
        let frontier = crate::model::vars_in_order([&head]).into_iter().filter(|v| bv.contains(v)).collect();
        out.push(Tgd { frontier, body: vec![body], head: vec![head], origin: Origin::TBox });
    }
    out
}

/// `TGD(P⁺)`: K operators stripped, denials dropped.
pub fn policy_to_tgds(p: &Policy) -> TgdSet {
    let tgds = p
        .eds
        .iter()
        .filter(|e| !e.is_denial())
        .map(|e| {
            let e = e.normalized();
            Tgd { frontier: e.universals.clone(), body: e.body.atoms.clone(), head: e.head.atoms().to_vec(), origin: Origin::Policy }
        })
        .collect();
    TgdSet { tgds }
}

/// `Σ(P,T) = TGD(P⁺) ∪ TGD(T)`.
pub fn build_sigma(p: &Policy, t: &TBox) -> TgdSet {
    let mut s = policy_to_tgds(p);
    s.tgds.extend(tbox_to_tgds(t));
    s
}

/// How policy-derived rules are applied during rewriting.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Semantics {
    /// Plain first-order TGDs.
    Classical,
    /// Policy rules fire only on individuals.
    Epistemic,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TgdRewriteOptions {
    pub semantics: Semantics,
    /// Only for unguarded use; exceeding it is an error.
    pub depth_cap: Option<usize>,
    pub prune_subsumed: bool,
}

impl Default for TgdRewriteOptions {
    fn default() -> Self {
        TgdRewriteOptions { semantics: Semantics::Classical, depth_cap: None, prune_subsumed: true }
    }
}

pub const DEFAULT_DEPTH_CAP: usize = 32;

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << n)).map(move |m| (0..n).filter(|i| m & (1 << i) != 0).collect())
}

/// All assignments of each selected query atom to a head atom with the same predicate.
fn assignments(q_atoms: &[&Atom], head: &[Atom]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for a in q_atoms {
        let opts: Vec<usize> = (0..head.len()).filter(|&h| head[h].pred == a.pred).collect();
        let mut next = Vec::new();
        for partial in &out {
            for &h in &opts {
                let mut p = partial.clone();
                p.push(h);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// One backward step of `q` through `tgd` (already renamed apart), all piece unifiers.
fn piece_steps(q: &RwCq, tgd: &Tgd, semantics: Semantics, out: &mut Vec<RwCq>) {
    let head_preds: BTreeSet<_> = tgd.head.iter().map(|a| &a.pred).collect();
    let cands: Vec<usize> = (0..q.atoms.len()).filter(|&i| head_preds.contains(&q.atoms[i].pred)).collect();
    if cands.is_empty() {
        return;
    }
    let exist = tgd.head_existentials();
    let simple = exist.is_empty() && tgd.head.len() == 1;
    let answer = q.answer_vars();
    let tgd_vars: BTreeSet<Sym> = tgd.body.iter().chain(&tgd.head).flat_map(|a| a.vars().cloned()).collect();
    let mut order = q.var_order();
    order.extend(crate::model::vars_in_order(tgd.head.iter().chain(&tgd.body)));

    let selections: Vec<Vec<usize>> =
        if simple { cands.iter().map(|&i| vec![i]).collect() } else { subsets(cands.len()).map(|s| s.iter().map(|&k| cands[k]).collect()).collect() };
    for sel in selections {
        let sel_atoms: Vec<&Atom> = sel.iter().map(|&i| &q.atoms[i]).collect();
        for asg in assignments(&sel_atoms, &tgd.head) {
            let mut u = Unifier::new();
            if !sel_atoms.iter().zip(&asg).all(|(a, &h)| u.unify_atoms(a, &tgd.head[h])) {
                continue;
            }
            if !exist.is_empty() && !existentials_ok(q, &sel, &u, &exist, &tgd_vars, &answer) {
                continue;
            }
            let s = u.to_subst(&order);
            let rest: Vec<Atom> =
                (0..q.atoms.len()).filter(|i| !sel.contains(i)).map(|i| q.atoms[i].clone()).collect();
            let mut atoms = rest;
            atoms.extend(tgd.body.iter().cloned());
            let marks: Vec<Term> = if semantics == Semantics::Epistemic && tgd.origin == Origin::Policy {
                tgd.frontier.iter().map(|v| Term::Var(v.clone())).collect()
            } else {
                Vec::new()
            };
            let pre = RwCq { answer: q.answer.clone(), atoms, ground: q.ground.clone() };
            out.push(pre.apply(&s, marks));
        }
    }
}

fn existentials_ok(
    q: &RwCq,
    sel: &[usize],
    u: &Unifier,
    exist: &BTreeSet<Sym>,
    tgd_vars: &BTreeSet<Sym>,
    answer: &BTreeSet<Sym>,
) -> bool {
    let outside: BTreeSet<&Sym> =
        (0..q.atoms.len()).filter(|i| !sel.contains(i)).flat_map(|i| q.atoms[i].vars()).collect();
    let q_vars: BTreeSet<&Sym> = q.atoms.iter().flat_map(|a| a.vars()).collect();
    for e in exist {
        let root = u.find(&Term::Var(e.clone()));
        if !root.is_var() {
            return false;
        }
        for w in tgd_vars {
            if w != e && u.find(&Term::Var(w.clone())) == root {
                return false;
            }
        }
        for w in &q_vars {
            if u.find(&Term::Var((*w).clone())) == root
                && (answer.contains(*w) || q.ground.contains(*w) || outside.contains(w))
            {
                return false;
            }
        }
    }
    true
}

/// Piece-unification rewriting to fixpoint; returns queries with their ground marks.
pub(crate) fn rewrite_tgds_marked(
    q: &RwCq,
    sigma: &TgdSet,
    semantics: Semantics,
    depth_cap: Option<usize>,
) -> Result<Vec<RwCq>, CqeError> {
    let mut fresh = Fresh::new();
    let start = q.canonical();
    let mut seen: HashSet<RwCq> = HashSet::from([start.clone()]);
    let mut out = vec![start.clone()];
    let mut level = vec![start];
    let mut depth = 0;
    while !level.is_empty() {
        let mut next = Vec::new();
        for cur in &level {
            let mut produced = Vec::new();
            for tgd in &sigma.tgds {
                piece_steps(cur, &tgd.rename(&mut fresh), semantics, &mut produced);
            }
            for p in produced {
                let c = p.canonical();
                if seen.insert(c.clone()) {
                    out.push(c.clone());
                    next.push(c);
                }
            }
        }
        if !next.is_empty() {
            depth += 1;
            if let Some(cap) = depth_cap {
                if depth > cap {
                    let preds: BTreeSet<String> =
                        next.iter().flat_map(|r| r.atoms.iter().map(|a| a.pred.name.to_string())).collect();
                    return Err(CqeError::DepthExceeded { cap, preds: preds.into_iter().collect::<Vec<_>>().join(", ") });
                }
            }
        }
        level = next;
    }
    Ok(out)
}

/// `UCQRew(q, Σ)`.
pub fn ucq_rewrite_tgds(q: &ConjunctiveQuery, sigma: &TgdSet, opts: TgdRewriteOptions) -> Result<UnionOfCqs, CqeError> {
    let r = rewrite_tgds_marked(&RwCq::from_cq(q), sigma, opts.semantics, opts.depth_cap)?;
    Ok(UnionOfCqs { disjuncts: finish(r, RewriteOptions { prune_subsumed: opts.prune_subsumed }) })
}

/// Which rewriting procedure expands policy bodies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Route {
    /// Piece unification over `Σ(P,T)`.
    Generic,
    /// PerfectRef over `T ∪ DL(P⁺)`; binary policies only.
    DlTranslation,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ExpandOptions {
    pub semantics: Semantics,
    pub route: Route,
    pub prune_subsumed: bool,
    /// Skip the fullness/expandability guard and rely on this cap instead.
    pub unguarded_depth_cap: Option<usize>,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions { semantics: Semantics::Epistemic, route: Route::Generic, prune_subsumed: true, unguarded_depth_cap: None }
    }
}

/// Rejects policies outside the compilable fragment.
pub fn guard(t: &TBox, p: &Policy) -> Result<(), GuardError> {
    let class = classify(p, t);
    if !class.full {
        let (i, e) = p.eds.iter().enumerate().find(|(_, e)| !e.is_full()).expect("a non-full ED");
        let vars: Vec<String> = e.head_existentials().iter().map(|v| v.to_string()).collect();
        return Err(GuardError::NotFull { index: i + 1, vars: vars.join(",") });
    }
    if !class.expandable {
        let cycle = p_edge_cycle(p, t).unwrap_or_default();
        let names: Vec<String> = cycle.iter().map(|s| s.to_string()).collect();
        return Err(GuardError::NotExpandable { cycle: names.join(" -> ") });
    }
    Ok(())
}

/// Algorithm PolicyExp.
pub fn policy_expand(t: &TBox, p: &Policy) -> Result<Policy, CqeError> {
    policy_expand_with(t, p, ExpandOptions::default())
}

pub fn policy_expand_with(t: &TBox, p: &Policy, opts: ExpandOptions) -> Result<Policy, CqeError> {
    if opts.unguarded_depth_cap.is_none() {
        guard(t, p)?;
    }
    let pos = p.positive();
    let dl_axioms = match opts.route {
        Route::Generic => Vec::new(),
        Route::DlTranslation => {
            let origin = if opts.semantics == Semantics::Epistemic { Origin::Policy } else { Origin::TBox };
            let mut ax = tagged(t, Origin::TBox);
            ax.extend(tagged(&policy_dl(&pos)?, origin));
            ax
        }
    };
    let sigma = build_sigma(p, t);
    let mut eds: Vec<EpistemicDependency> = Vec::new();
    let mut seen: HashSet<(ConjunctiveQuery, Head)> = HashSet::new();
    for ed in &p.eds {
        let q0 = RwCq { answer: ed.body.answer.clone(), atoms: ed.body.atoms.clone(), ground: BTreeSet::new() };
        let rewritten = match opts.route {
            Route::Generic => rewrite_tgds_marked(&q0, &sigma, opts.semantics, opts.unguarded_depth_cap)?,
            Route::DlTranslation => perfect_ref(&q0, &dl_axioms, &mut Fresh::new()),
        };
        let bodies = finish(rewritten, RewriteOptions { prune_subsumed: opts.prune_subsumed });
        for b in bodies {
            let b = canonicalize(&b);
            if seen.insert((b.clone(), ed.head.clone())) {
                eds.push(EpistemicDependency { universals: ed.universals.clone(), body: b, head: ed.head.clone() });
            }
        }
    }
    if opts.prune_subsumed {
        eds = prune_expanded(eds);
    }
    Ok(Policy::new(eds))
}

/// Drops expanded EDs whose body is subsumed by another with the same universals and head.
fn prune_expanded(eds: Vec<EpistemicDependency>) -> Vec<EpistemicDependency> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut keys: Vec<(Vec<Sym>, Head)> = Vec::new();
    for (i, e) in eds.iter().enumerate() {
        let k = (e.universals.clone(), e.head.clone());
        let g = match keys.iter().position(|x| *x == k) {
            Some(g) => g,
            None => {
                keys.push(k);
                keys.len() - 1
            }
        };
        groups.entry(g).or_default().push(i);
    }
    let mut keep = vec![false; eds.len()];
    for members in groups.values() {
        let bodies: Vec<ConjunctiveQuery> = members.iter().map(|&i| eds[i].body.clone()).collect();
        let kept = prune_subsumed(bodies.clone());
        for (&i, b) in members.iter().zip(&bodies) {
            if kept.contains(b) {
                keep[i] = true;
            }
        }
    }
    eds.into_iter().zip(keep).filter_map(|(e, k)| k.then_some(e)).collect()
}
