use std::collections::BTreeSet;

use cqe_core::dllite::ucq_rewrite;
use cqe_core::eval::{eval_fo, fo_holds};
use cqe_core::fixtures::*;
use cqe_core::iga::{iga_rewrite, IgaCompiler, IgaOptions};
use cqe_core::model::{Atom, Formula, Policy, Sym, TBox, Term, UnionOfCqs};
use cqe_core::parse::{parse_artifacts, parse_facts, parse_policy, parse_query};
use cqe_core::tgd::policy_expand;
use cqe_core::FactSet;

fn ex1(query: &str) -> (TBox, Policy, UnionOfCqs, FactSet) {
    parse_artifacts(EX1_TBOX, EX1_POLICY, query, parse_facts(EX1_ABOX).unwrap()).unwrap()
}

fn v(s: &str) -> Term {
    Term::var(s)
}

#[test]
fn q2_rewriting_lists_three_disjuncts() {
    let (t, _, q, _) = ex1(EX1_Q2);
    let got: BTreeSet<String> = ucq_rewrite(&q, &t).disjuncts.iter().map(|d| d.to_string()).collect();
    assert_eq!(got.len(), 3, "{got:?}");
    assert!(got.iter().any(|d| d.contains("respDept")));
    assert!(got.iter().any(|d| d.contains("managerOf") && d.contains("salary")));
    assert!(got.iter().any(|d| d.contains("manager(") && d.contains("salary")));
}

#[test]
fn q1_rewriting_is_itself() {
    let (t, _, q, _) = ex1(EX1_Q1);
    assert_eq!(ucq_rewrite(&q, &t).disjuncts.len(), 1);
}

#[test]
fn clash_of_manager_fact_with_q1_matrix() {
    let (t, p, _, a) = ex1(EX1_Q1);
    let pexp = policy_expand(&t, &p).unwrap();
    let mut c = IgaCompiler::new(&t, &p, &pexp, IgaOptions::default());
    let z = [Atom::new("managerOf", vec![v("x1"), v("y1")])];
    let gamma = [Atom::new("consRel", vec![v("x"), v("y")])];
    let clash = c.clash(&z, &gamma);
    let rows = eval_fo(&clash, &[Sym::new("x"), Sym::new("y")], &a).unwrap();
    assert!(rows.contains(&vec![Sym::new("lucy"), Sym::new("tom")]), "{rows:?}");
}

#[test]
fn empty_z_clash_is_negated_disclosability() {
    let (t, p, _, _) = ex1(EX1_Q1);
    let pexp = policy_expand(&t, &p).unwrap();
    let mut c = IgaCompiler::new(&t, &p, &pexp, IgaOptions::none());
    let gamma = [Atom::new("salary", vec![v("x"), v("y")])];
    let clash = Formula::and(vec![Formula::Atom(gamma[0].clone()), c.clash(&[], &gamma)]);
    let discl = c.is_discl(&gamma);
    let f = parse_facts("salary(ann, \"10k\"). manager(bob). salary(bob, \"20k\").").unwrap();
    let xy = [Sym::new("x"), Sym::new("y")];
    let clash_rows = eval_fo(&clash, &xy, &f).unwrap();
    let discl_rows = eval_fo(&discl, &xy, &f).unwrap();
    assert_eq!(clash_rows.len() + discl_rows.len(), 2);
    assert!(clash_rows.is_disjoint(&discl_rows));
    assert!(discl_rows.contains(&vec![Sym::new("bob"), Sym::new("20k")]));
}

#[test]
fn example_verdicts_and_open_query() {
    for (q, want) in [(EX1_Q1, false), (EX1_Q2, true)] {
        let (t, p, q, a) = ex1(q);
        let (phi, _) = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap();
        assert_eq!(fo_holds(&phi, &a).unwrap(), want);
    }
    let (t, p, q, a) = ex1("Q(x) :- manager(x)");
    let (phi, _) = iga_rewrite(&q, &t, &p, IgaOptions::default()).unwrap();
    let rows = eval_fo(&phi, &[Sym::new("x")], &a).unwrap();
    assert_eq!(rows, BTreeSet::from([vec![Sym::new("lucy")]]));
}

#[test]
fn atomic_bodies_leave_only_empty_z() {
    let p = parse_policy("FORALL x: BODY A(x) HEAD B(x)\nBODY C(x) HEAD BOT\n").unwrap();
    let q = parse_query("Q() :- A(x)").unwrap();
    let (phi, r) = iga_rewrite(&q, &TBox::empty(), &p, IgaOptions::none()).unwrap();
    assert_eq!((r.k, r.z_sets), (1, 1));
    assert!(fo_holds(&phi, &parse_facts("A(1). B(1).").unwrap()).unwrap());
    assert!(!fo_holds(&phi, &parse_facts("A(1). B(2).").unwrap()).unwrap());
    let q = parse_query("Q() :- C(x)").unwrap();
    let (phi, _) = iga_rewrite(&q, &TBox::empty(), &p, IgaOptions::default()).unwrap();
    assert!(!fo_holds(&phi, &parse_facts("C(1).").unwrap()).unwrap());
}
