use std::time::Instant;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cqe_bench::{instance, university_abox, workloads};
use cqe_core::eval::{answer_expanded, FoEvaluator};
use cqe_core::iga::{iga_rewrite_expanded, IgaOptions};
use cqe_core::tgd::policy_expand;

fn expansion(c: &mut Criterion) {
    let mut g = c.benchmark_group("expand");
    for w in workloads() {
        g.bench_function(w.name, |b| b.iter(|| policy_expand(&w.tbox, &w.policy).unwrap()));
    }
    g.finish();
}

fn rewriting(c: &mut Criterion) {
    let mut g = c.benchmark_group("rewrite");
    g.sample_size(10);
    for w in workloads() {
        let pexp = policy_expand(&w.tbox, &w.policy).unwrap();
        for (i, q) in w.queries.iter().enumerate() {
            g.bench_with_input(BenchmarkId::new(w.name, format!("q{}", i + 1)), q, |b, q| {
                b.iter(|| iga_rewrite_expanded(q, &w.tbox, &w.policy, &pexp, IgaOptions::default()))
            });
        }
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    let abox = university_abox(200);
    for w in workloads() {
        let inst = instance(&w, &abox);
        let pexp = policy_expand(&w.tbox, &w.policy).unwrap();
        for (i, q) in w.queries.iter().enumerate().take(4) {
            let a = answer_expanded(&inst, &pexp, q, IgaOptions::default(), Instant::now()).unwrap();
            let target = q.free_vars();
            g.bench_function(BenchmarkId::new(w.name, format!("q{}", i + 1)), |b| {
                b.iter(|| FoEvaluator::new(&inst.abox).answers(&a.formula, &target).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, expansion, rewriting, evaluation);
criterion_main!(benches);
