//! Checks over the bundled fixtures.

use anyhow::Result;

use cqe_core::eval::answer;
use cqe_core::fixtures::*;
use cqe_core::iga::IgaOptions;
use cqe_core::model::{classify, CqeInstance};
use cqe_core::oracle::{eql_satisfies, Oracle, DEFAULT_CAP};
use cqe_core::parse::{parse_facts, parse_policy, parse_queries, parse_query, parse_tbox_with, serialize_facts};
use cqe_core::tgd::policy_expand;
use cqe_core::{CqeError, FactSet, GuardError};

fn instance(tbox: &str, policy: &str, abox: &str, queries: &[&str]) -> Result<(CqeInstance, Vec<cqe_core::UnionOfCqs>)> {
    let policy = parse_policy(policy)?;
    let abox = parse_facts(abox)?;
    let qs = queries.iter().map(|q| parse_query(q)).collect::<Result<Vec<_>, _>>()?;
    let (tbox, _) = parse_tbox_with(tbox, &policy, &qs, &abox)?;
    Ok((CqeInstance { tbox, policy, abox }, qs))
}

fn line(f: &FactSet) -> String {
    serialize_facts(f).trim_end().replace('\n', " ")
}

/// Prints one line per check; returns whether all passed.
pub fn run() -> Result<bool> {
    let mut checks: Vec<(String, bool)> = Vec::new();

    let (ex1, qs) = instance(EX1_TBOX, EX1_POLICY, EX1_ABOX, &[EX1_Q1, EX1_Q2])?;
    let o = Oracle::new(&ex1.tbox, &ex1.policy, &ex1.abox, DEFAULT_CAP)?;
    let censors = o.censors();
    let mut shown: Vec<String> = censors.iter().map(line).collect();
    shown.sort();
    checks.push((format!("example 1 has two optimal censors: {}", shown.join(" | ")), censors.len() == 2));
    for (name, q, want) in [("q1", &qs[0], false), ("q2", &qs[1], true)] {
        let got = answer(&ex1, q, IgaOptions::default())?.holds();
        let oracle = o.iga_entails(q);
        checks.push((format!("{name} rewriting={got} oracle={oracle} expected={want}"), got == want && oracle == want));
    }

    let (ex3, _) = instance(EX3_TBOX, EX3_POLICY, EX3_ABOX, &[])?;
    let o3 = Oracle::new(&ex3.tbox, &ex3.policy, &ex3.abox, DEFAULT_CAP)?;
    let inter = o3.intersection();
    let ok = line(&inter) == "C(0)." && !eql_satisfies(&ex3.tbox, &inter, &ex3.policy);
    checks.push((format!("example 3 intersection {} violates the policy", line(&inter)), ok));
    let guarded = matches!(policy_expand(&ex3.tbox, &ex3.policy), Err(CqeError::Guard(GuardError::NotFull { .. })));
    checks.push(("example 3 policy rejected as not full".into(), guarded));

    let queries = parse_queries(O2B_QUERIES)?;
    for (name, text, eds) in [("P_a", POLICY_A, 6), ("P_b", POLICY_B, 11)] {
        let p = parse_policy(text)?;
        let (t, _) = parse_tbox_with(O2B_TBOX, &p, &queries, &FactSet::new())?;
        let c = classify(&p, &t);
        let ok = c.full && c.expandable && p.len() == eds;
        checks.push((format!("{name}: {} EDs, {c}", p.len()), ok));
    }

    let mut all = true;
    for (msg, ok) in &checks {
        println!("{} {msg}", if *ok { "ok  " } else { "FAIL" });
        all &= ok;
    }
    Ok(all)
}
