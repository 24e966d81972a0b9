//! Shared inputs for the benches.

use cqe_core::fixtures::{O2B_QUERIES, O2B_TBOX, POLICY_A, POLICY_B};
use cqe_core::parse::{parse_policy, parse_queries, parse_tbox_with};
use cqe_core::{Atom, CqeInstance, FactSet, Policy, TBox, Term, UnionOfCqs};

pub struct Workload {
    pub name: &'static str,
    pub tbox: TBox,
    pub policy: Policy,
    pub queries: Vec<UnionOfCqs>,
}

/// The university TBox with each bundled policy.
pub fn workloads() -> Vec<Workload> {
    let queries = parse_queries(O2B_QUERIES).expect("bundled queries");
    [("P_a", POLICY_A), ("P_b", POLICY_B)]
        .into_iter()
        .map(|(name, text)| {
            let policy = parse_policy(text).expect("bundled policy");
            let (tbox, _) = parse_tbox_with(O2B_TBOX, &policy, &queries, &FactSet::new()).expect("bundled tbox");
            Workload { name, tbox, policy, queries: queries.clone() }
        })
        .collect()
}

/// A deterministic university ABox with `n` people.
pub fn university_abox(n: usize) -> FactSet {
    let c = |s: String| Term::Const(s.into());
    let mut f = FactSet::new();
    for i in 0..n {
        let p = format!("p{i}");
        let u = format!("U{}", i % 3 + 1);
        let concept = ["FullProfessor", "PhDStudent", "Student", "Woman"][i % 4];
        f.insert(Atom::new(concept, vec![c(p.clone())]));
        f.insert(Atom::new("hasMasterDegreeFrom", vec![c(p.clone()), c(u.clone())]));
        f.insert(Atom::new("knows", vec![c(p.clone()), c(format!("p{}", (i + 1) % n))]));
        if i % 4 == 1 {
            f.insert(Atom::new("isAdvisedBy", vec![c(p.clone()), c(format!("p{}", i - 1))]));
        }
        if i % 5 == 0 {
            f.insert(Atom::new("hasMajor", vec![c(p.clone()), c("ComputerScience".into())]));
        }
    }
    f
}

pub fn instance(w: &Workload, abox: &FactSet) -> CqeInstance {
    CqeInstance { tbox: w.tbox.clone(), policy: w.policy.clone(), abox: abox.clone() }
}
