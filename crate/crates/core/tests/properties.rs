use std::collections::BTreeSet;

use proptest::prelude::*;

use cqe_core::dllite::{closure, cq_formula, ucq_rewrite};
use cqe_core::eval::{eval_cq, eval_fo, FactSet};
use cqe_core::gen::{GenConfig, Generator, PolicyKind};
use cqe_core::iga::{iga_rewrite, IgaOptions};
use cqe_core::model::{canonicalize, Atom, ConjunctiveQuery, Fresh, Substitution, Sym, Term, UnionOfCqs};
use cqe_core::oracle::{certain_answers, depth_for, Chase, Oracle};

fn term() -> impl Strategy<Value = Term> {
    prop_oneof![
        3 => prop::sample::select(vec!["x", "y", "z", "w"]).prop_map(Term::var),
        1 => prop::sample::select(vec!["1", "2"]).prop_map(Term::cst),
    ]
}

fn atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        (prop::sample::select(vec!["A", "B"]), term()).prop_map(|(p, t)| Atom::new(p, vec![t])),
        (prop::sample::select(vec!["R", "S"]), term(), term()).prop_map(|(p, a, b)| Atom::new(p, vec![a, b])),
    ]
}

fn cq() -> impl Strategy<Value = ConjunctiveQuery> {
    (prop::collection::vec(atom(), 1..4), any::<bool>()).prop_map(|(atoms, open)| {
        let vs = cqe_core::model::vars_in_order(&atoms);
        let free: Vec<Sym> = if open { vs.into_iter().take(1).collect() } else { Vec::new() };
        ConjunctiveQuery::with_free(&free, atoms)
    })
}

fn facts() -> impl Strategy<Value = FactSet> {
    let c = || prop::sample::select(vec!["1", "2", "3"]).prop_map(Term::cst);
    let fact = prop_oneof![
        (prop::sample::select(vec!["A", "B"]), c()).prop_map(|(p, t)| Atom::new(p, vec![t])),
        (prop::sample::select(vec!["R", "S"]), c(), c()).prop_map(|(p, a, b)| Atom::new(p, vec![a, b])),
    ];
    prop::collection::vec(fact, 0..8).prop_map(FactSet::from_atoms)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_ignores_existential_names(q in cq()) {
        let free: BTreeSet<Sym> = q.free_vars().into_iter().collect();
        let ren = Substitution::from_pairs(
            q.existential_vars().into_iter().filter(|v| !free.contains(v)).map(|v| {
                let nv = Term::var(&format!("{v}_renamed"));
                (v, nv)
            }),
        );
        let renamed = ConjunctiveQuery::new(q.answer.clone(), ren.apply_atoms(&q.atoms));
        prop_assert_eq!(canonicalize(&q), canonicalize(&renamed));
        let mut rev = renamed.atoms.clone();
        rev.reverse();
        prop_assert_eq!(canonicalize(&q), canonicalize(&ConjunctiveQuery::new(q.answer.clone(), rev)));
    }

    #[test]
    fn ucq_formula_matches_homomorphism_semantics(q in cq(), f in facts()) {
        let target = q.free_vars();
        let phi = cq_formula(&q, &target, &mut Fresh::new());
        prop_assert_eq!(eval_fo(&phi, &target, &f).unwrap(), eval_cq(&q, &f));
    }

    #[test]
    fn unrelated_fresh_facts_do_not_change_answers(seed in 0u64..10_000, n in 1usize..4) {
        let inst = Generator::new(seed, GenConfig::new(PolicyKind::Full)).instance();
        let (phi, _) = iga_rewrite(&inst.query, &inst.tbox, &inst.policy, IgaOptions::default()).unwrap();
        let target = inst.query.free_vars();
        let before = eval_fo(&phi, &target, &inst.abox).unwrap();
        let mut wider = inst.abox.clone();
        for i in 0..n {
            wider.insert(Atom::new("Unrelated", vec![Term::cst(&format!("fresh{i}"))]));
        }
        prop_assert_eq!(eval_fo(&phi, &target, &wider).unwrap(), before);
    }

    #[test]
    fn rewriting_is_deterministic(seed in 0u64..10_000) {
        let inst = Generator::new(seed, GenConfig::new(PolicyKind::Binary)).instance();
        let a = iga_rewrite(&inst.query, &inst.tbox, &inst.policy, IgaOptions::default()).unwrap();
        let b = iga_rewrite(&inst.query, &inst.tbox, &inst.policy, IgaOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn iga_answers_are_certain_and_skeptical(seed in 0u64..10_000) {
        let inst = Generator::new(seed, GenConfig::new(PolicyKind::Full)).instance();
        let o = Oracle::new(&inst.tbox, &inst.policy, &inst.abox, 12).unwrap();
        let iga = o.iga_answers(&inst.query);
        prop_assert!(iga.is_subset(&o.skeptical_answers(&inst.query)));
        let n = inst.query.disjuncts.iter().map(|d| d.atoms.len()).max().unwrap_or(0);
        let chase = Chase::build(&inst.tbox, &inst.abox, depth_for(&inst.tbox, n));
        let certain: BTreeSet<Vec<Sym>> = inst.query.disjuncts.iter().flat_map(|d| certain_answers(&chase, d)).collect();
        prop_assert!(iga.is_subset(&certain));
    }

    #[test]
    fn rewriting_covers_closure(q in cq(), f in facts()) {
        let t = cqe_core::parse::parse_tbox("A ISA EX R\nR ISA S-\nEX S ISA B\n", &Default::default()).unwrap();
        let u = UnionOfCqs::single(q.clone());
        let cl = closure(&t, &f);
        let direct = eval_cq(&q, &cl);
        let rewritten: BTreeSet<Vec<Sym>> = ucq_rewrite(&u, &t).disjuncts.iter().flat_map(|d| eval_cq(d, &f)).collect();
        prop_assert!(direct.is_subset(&rewritten));
    }
}
