//! Seeded random instances for differential testing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dllite::{check_consistency, closure};
use crate::eval::FactSet;
use crate::model::{
    classify, Atom, BasicConcept, ConjunctiveQuery, EpistemicDependency, Head, Policy, Role, Sym, TBox, TBoxAxiom,
    Term, UnionOfCqs,
};

const CONCEPTS: [&str; 4] = ["A", "B", "C", "D"];
const ROLES: [&str; 2] = ["R", "S"];
const CONSTS: [&str; 3] = ["1", "2", "3"];

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolicyKind {
    /// Full and expandable.
    Full,
    /// Single-atom bodies; heads may carry existential variables.
    Linear,
    /// Full, and every ⊥-free ED is a DL inclusion.
    Binary,
}

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub kind: PolicyKind,
    pub max_tbox: usize,
    pub max_eds: usize,
    pub max_facts: usize,
    pub max_query_atoms: usize,
    pub max_disjuncts: usize,
    pub max_answer_vars: usize,
    pub cap: usize,
}

impl GenConfig {
    pub fn new(kind: PolicyKind) -> Self {
        GenConfig { kind, max_tbox: 5, max_eds: 4, max_facts: 7, max_query_atoms: 3, max_disjuncts: 2, max_answer_vars: 1, cap: 12 }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub tbox: TBox,
    pub policy: Policy,
    pub abox: FactSet,
    pub query: UnionOfCqs,
}

pub struct Generator {
    rng: ChaCha8Rng,
    cfg: GenConfig,
}

fn role(rng: &mut ChaCha8Rng) -> Role {
    Role::new(ROLES.choose(rng).expect("roles"), rng.gen_bool(0.4))
}

fn basic(rng: &mut ChaCha8Rng) -> BasicConcept {
    if rng.gen_bool(0.6) {
        BasicConcept::atomic(CONCEPTS.choose(rng).expect("concepts"))
    } else {
        BasicConcept::Exists(role(rng))
    }
}

impl Generator {
    pub fn new(seed: u64, cfg: GenConfig) -> Self {
        Generator { rng: ChaCha8Rng::seed_from_u64(seed), cfg }
    }

    fn tbox(&mut self) -> TBox {
        let n = self.rng.gen_range(0..=self.cfg.max_tbox);
        let mut axioms = Vec::new();
        while axioms.len() < n {
            let r = &mut self.rng;
            let ax = match r.gen_range(0..10) {
                0..=5 => TBoxAxiom::ConceptIncl(basic(r), basic(r)),
                6 | 7 => TBoxAxiom::RoleIncl(role(r), role(r)),
                8 => TBoxAxiom::ConceptDisj(basic(r), basic(r)),
                _ => TBoxAxiom::RoleDisj(role(r), role(r)),
            };
            let trivial = match &ax {
                TBoxAxiom::ConceptIncl(a, b) | TBoxAxiom::ConceptDisj(a, b) => a == b,
                TBoxAxiom::RoleIncl(a, b) | TBoxAxiom::RoleDisj(a, b) => a.name == b.name,
            };
            if !trivial && !axioms.contains(&ax) {
                axioms.push(ax);
            }
        }
        TBox::new(axioms)
    }

    fn term(&mut self, vars: &[&str], const_p: f64) -> Term {
        if self.rng.gen_bool(const_p) {
            Term::cst(CONSTS.choose(&mut self.rng).expect("consts"))
        } else {
            Term::var(vars.choose(&mut self.rng).expect("vars"))
        }
    }

    fn atom(&mut self, vars: &[&str], const_p: f64) -> Atom {
        if self.rng.gen_bool(0.5) {
            let c = CONCEPTS.choose(&mut self.rng).expect("concepts");
            Atom::new(c, vec![self.term(vars, const_p)])
        } else {
            let r = ROLES.choose(&mut self.rng).expect("roles");
            Atom::new(r, vec![self.term(vars, const_p), self.term(vars, const_p)])
        }
    }

    fn ed(&mut self) -> EpistemicDependency {
        let vars = ["x", "y", "z"];
        match self.cfg.kind {
            PolicyKind::Binary if self.rng.gen_bool(0.7) => {
                let (body, head, us) = if self.rng.gen_bool(0.6) {
                    let x = Term::var("x");
                    let b1 = basic(&mut self.rng);
                    let b2 = basic(&mut self.rng);
                    (b1.atom(x.clone(), Term::var("y")), b2.atom(x, Term::var("z")), vec![Sym::new("x")])
                } else {
                    let (x, y) = (Term::var("x"), Term::var("y"));
                    let r1 = role(&mut self.rng);
                    let r2 = role(&mut self.rng);
                    (r1.atom(x.clone(), y.clone()), r2.atom(x, y), vec![Sym::new("x"), Sym::new("y")])
                };
                EpistemicDependency::new(us, vec![body], Head::Atoms(vec![head]))
            }
            _ => {
                let linear = self.cfg.kind == PolicyKind::Linear;
                let nb = if linear { 1 } else { self.rng.gen_range(1..=3) };
                let body: Vec<Atom> = (0..nb).map(|_| self.atom(&vars, 0.15)).collect();
                let bv: Vec<Sym> = crate::model::vars_in_order(&body);
                let us: Vec<Sym> = bv.iter().filter(|_| self.rng.gen_bool(0.7)).cloned().collect();
                let denial = self.rng.gen_bool(0.35) || (us.is_empty() && !linear);
                if denial {
                    return EpistemicDependency::new(us, body, Head::Bot);
                }
                let mut hv: Vec<&str> = us.iter().map(|s| s.as_str()).collect();
                if linear && (hv.is_empty() || self.rng.gen_bool(0.3)) {
                    hv.push("w");
                }
                if hv.is_empty() {
                    return EpistemicDependency::new(us, body, Head::Bot);
                }
                let nh = self.rng.gen_range(1..=2);
                let head: Vec<Atom> = (0..nh).map(|_| self.atom(&hv, 0.05)).collect();
                EpistemicDependency::new(us, body, Head::Atoms(head))
            }
        }
    }

    fn policy(&mut self) -> Policy {
        let n = self.rng.gen_range(1..=self.cfg.max_eds);
        Policy::new((0..n).map(|_| self.ed()).collect())
    }

    fn abox(&mut self) -> FactSet {
        let n = self.rng.gen_range(1..=self.cfg.max_facts);
        let mut f = FactSet::new();
        for _ in 0..n {
            let a = self.atom(&[], 1.0);
            f.insert(a);
        }
        f
    }

    fn query(&mut self) -> UnionOfCqs {
        let vars = ["u", "v", "w"];
        let na = self.rng.gen_range(0..=self.cfg.max_answer_vars.min(1));
        let nd = self.rng.gen_range(1..=self.cfg.max_disjuncts);
        let mut ds = Vec::new();
        while ds.len() < nd {
            let n = self.rng.gen_range(1..=self.cfg.max_query_atoms);
            let atoms: Vec<Atom> = (0..n).map(|_| self.atom(&vars, 0.2)).collect();
            let vs = crate::model::vars_in_order(&atoms);
            if na == 1 && !vs.contains(&Sym::new("u")) {
                continue;
            }
            let free: Vec<Sym> = if na == 1 { vec![Sym::new("u")] } else { Vec::new() };
            ds.push(ConjunctiveQuery::with_free(&free, atoms));
        }
        UnionOfCqs { disjuncts: ds }
    }

    fn acceptable(&self, t: &TBox, p: &Policy, a: &FactSet) -> bool {
        let class = classify(p, t);
        let shape = match self.cfg.kind {
            PolicyKind::Full => class.full && class.expandable,
            PolicyKind::Linear => class.linear,
            PolicyKind::Binary => class.full && class.binary,
        };
        shape && check_consistency(t, a).is_consistent() && closure(t, a).len() <= self.cfg.cap
    }

    /// Next instance meeting the configuration.
    pub fn instance(&mut self) -> Instance {
        loop {
            let tbox = self.tbox();
            let policy = self.policy();
            let abox = self.abox();
            if self.acceptable(&tbox, &policy, &abox) {
                let query = self.query();
                return Instance { tbox, policy, abox, query };
            }
        }
    }

    /// A random subset of `facts`.
    pub fn subset(&mut self, facts: &FactSet) -> FactSet {
        FactSet::from_atoms(facts.atoms().filter(|_| self.rng.gen_bool(0.5)))
    }

    /// A random ground substitution for `vars` over `domain`.
    pub fn grounding(&mut self, vars: &[Sym], domain: &[Sym]) -> Vec<(Sym, Term)> {
        vars.iter().map(|v| (v.clone(), Term::Const(domain.choose(&mut self.rng).expect("domain").clone()))).collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        for kind in [PolicyKind::Full, PolicyKind::Linear, PolicyKind::Binary] {
            let a = Generator::new(7, GenConfig::new(kind)).instance();
            let b = Generator::new(7, GenConfig::new(kind)).instance();
            assert_eq!(a.policy, b.policy);
            assert_eq!(a.query, b.query);
            assert!(a.tbox.len() <= 5 && a.policy.len() <= 4 && a.abox.len() <= 7);
            let c = classify(&a.policy, &a.tbox);
            match kind {
                PolicyKind::Full => assert!(c.full && c.expandable),
                PolicyKind::Linear => assert!(c.linear),
                PolicyKind::Binary => assert!(c.binary && c.full),
            }
        }
    }
}
