use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cqe_core::dllite::check_consistency;
use cqe_core::eval::{answer_expanded, fo_to_sql, FactSet, SqlSchema};
use cqe_core::gen::{GenConfig, Generator, PolicyKind};
use cqe_core::iga::{iga_rewrite_expanded, IgaOptions};
use cqe_core::model::{classify, CqeInstance, Policy, TBox, UnionOfCqs};
use cqe_core::oracle::{Oracle, DEFAULT_CAP};
use cqe_core::parse::{
    load_abox, parse_policy, parse_queries, parse_query, parse_tbox_with, serialize_facts, serialize_policy,
    serialize_query, serialize_tbox,
};
use cqe_core::tgd::{policy_expand_with, ExpandOptions, Route, Semantics};
use cqe_core::{CqeError, GuardError, ParseError};

mod selftest;

#[derive(Parser)]
#[command(name = "cqe", version, about = "Controlled query evaluation under epistemic-dependency policies")]
struct Cli {
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Largest closure the oracle will enumerate censors for.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Abort with exit code 7 after this many milliseconds.
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the policy class (full, linear, binary, acyclic, expandable).
    Classify(PolicyArgs),
    /// Print the expanded policy in policy-file syntax.
    Expand {
        #[command(flatten)]
        input: PolicyArgs,
        #[arg(long, value_enum, default_value_t = RouteArg::Generic)]
        route: RouteArg,
        /// Let TGD-introduced nulls satisfy ED bodies.
        #[arg(long)]
        classical: bool,
    },
    /// Compile a query into its first-order rewriting.
    Rewrite {
        #[command(flatten)]
        input: PolicyArgs,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: OptFlags,
        #[arg(long, value_enum, default_value_t = Emit::Fo)]
        emit: Emit,
        /// Print k, |Pexp|, number of Z sets and formula size to stderr.
        #[arg(long)]
        report: bool,
    },
    /// Answer a query through the rewriting.
    Eval {
        #[command(flatten)]
        input: InstanceArgs,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: OptFlags,
    },
    /// Write the rewriting as SQL together with the schema.
    Sql {
        #[command(flatten)]
        input: PolicyArgs,
        #[arg(long)]
        query: PathBuf,
        /// Facts to emit as INSERT statements; also widens the schema.
        #[arg(long)]
        abox: Option<PathBuf>,
        /// Schema DDL destination (default: stdout, before the query).
        #[arg(long)]
        ddl: Option<PathBuf>,
        /// Query destination (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: OptFlags,
    },
    /// Brute-force censors, their intersection and verdicts.
    Oracle {
        #[command(flatten)]
        input: InstanceArgs,
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Compare the rewriting with the oracle on random or given instances.
    Diff {
        /// Random instances to draw (ignored with --instance).
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Full)]
        kind: KindArg,
        /// Instance file with [tbox], [policy], [abox] and [query] sections.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Time rewriting and evaluation; CSV on stdout.
    Bench {
        #[arg(long)]
        tbox: PathBuf,
        /// May be repeated.
        #[arg(long, required = true)]
        policy: Vec<PathBuf>,
        #[arg(long)]
        abox: PathBuf,
        /// One query per line.
        #[arg(long)]
        queries: PathBuf,
        #[command(flatten)]
        opts: OptFlags,
    },
    /// Run the bundled example fixtures.
    Selftest,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    #[arg(long)]
    tbox: PathBuf,
    #[arg(long)]
    policy: PathBuf,
}

#[derive(Args, Clone)]
struct InstanceArgs {
    #[arg(long)]
    tbox: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Fact file or directory of CSV files.
    #[arg(long)]
    abox: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct OptFlags {
    #[arg(long)]
    no_opt1: bool,
    #[arg(long)]
    no_opt2: bool,
    #[arg(long)]
    no_opt3: bool,
}

impl OptFlags {
    fn options(self) -> IgaOptions {
        IgaOptions { opt1: !self.no_opt1, opt2: !self.no_opt2, opt3: !self.no_opt3 }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Emit {
    Fo,
    Sql,
}

#[derive(ValueEnum, Clone, Copy)]
enum RouteArg {
    Generic,
    Dl,
}

#[derive(ValueEnum, Clone, Copy)]
enum KindArg {
    Full,
    Binary,
}

/// Rewriter and oracle disagree.
#[derive(Debug)]
struct Mismatch(usize);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} mismatching instance(s)", self.0)
    }
}

impl std::error::Error for Mismatch {}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_policy(args: &PolicyArgs, queries: &[UnionOfCqs], abox: &FactSet) -> Result<(TBox, Policy)> {
    let policy = parse_policy(&read(&args.policy)?).with_context(|| format!("in {}", args.policy.display()))?;
    let (tbox, _) = parse_tbox_with(&read(&args.tbox)?, &policy, queries, abox)
        .with_context(|| format!("in {}", args.tbox.display()))?;
    Ok((tbox, policy))
}

fn load_query(path: &Path) -> Result<UnionOfCqs> {
    parse_query(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_instance(args: &InstanceArgs, queries: &[UnionOfCqs]) -> Result<CqeInstance> {
    let abox = load_abox(&args.abox).with_context(|| format!("in {}", args.abox.display()))?;
    let (tbox, policy) = load_policy(&PolicyArgs { tbox: args.tbox.clone(), policy: args.policy.clone() }, queries, &abox)?;
    Ok(CqeInstance { tbox, policy, abox })
}

fn expand(tbox: &TBox, policy: &Policy) -> Result<Policy> {
    Ok(policy_expand_with(tbox, policy, ExpandOptions::default())?)
}

fn ensure_consistent(inst: &CqeInstance) -> Result<()> {
    let r = check_consistency(&inst.tbox, &inst.abox);
    if !r.is_consistent() {
        return Err(CqeError::Inconsistent(r.summary()).into());
    }
    Ok(())
}

fn print_rows(q: &UnionOfCqs, rows: &std::collections::BTreeSet<Vec<cqe_core::Sym>>) {
    if q.is_boolean() {
        println!("{}", if rows.is_empty() { "NOT ENTAILED" } else { "ENTAILED" });
    } else {
        for r in rows {
            println!("{}", r.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(","));
        }
    }
    println!("# = {}", rows.len());
}

fn ms(d: Duration) -> String {
    format!("{:.3}", d.as_secs_f64() * 1000.0)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Classify(args) => {
            let (tbox, policy) = load_policy(&args, &[], &FactSet::new())?;
            println!("{}", classify(&policy, &tbox));
            eprintln!("{} EDs, {} TBox axioms", policy.len(), tbox.len());
        }
        Cmd::Expand { input, route, classical } => {
            let (tbox, policy) = load_policy(&input, &[], &FactSet::new())?;
            let opts = ExpandOptions {
                route: match route {
                    RouteArg::Generic => Route::Generic,
                    RouteArg::Dl => Route::DlTranslation,
                },
                semantics: if classical { Semantics::Classical } else { Semantics::Epistemic },
                ..ExpandOptions::default()
            };
            let pexp = policy_expand_with(&tbox, &policy, opts)?;
            print!("{}", serialize_policy(&pexp));
            eprintln!("{} EDs expanded to {}", policy.len(), pexp.len());
        }
        Cmd::Rewrite { input, query, opts, emit, report } => {
            let q = load_query(&query)?;
            let (tbox, policy) = load_policy(&input, std::slice::from_ref(&q), &FactSet::new())?;
            let start = Instant::now();
            let pexp = expand(&tbox, &policy)?;
            let (phi, r) = iga_rewrite_expanded(&q, &tbox, &policy, &pexp, opts.options());
            let elapsed = start.elapsed();
            match emit {
                Emit::Fo => println!("{phi}"),
                Emit::Sql => {
                    let schema = SqlSchema::for_formula(&phi, &FactSet::new());
                    print!("{}", schema.mapping_comments());
                    println!("{};", fo_to_sql(&phi, &q.free_vars(), &schema)?);
                }
            }
            if report {
                eprintln!("k={} pexp={} z_sets={} size={} t_r_ms={}", r.k, r.pexp_len, r.z_sets, r.size, ms(elapsed));
            }
        }
        Cmd::Eval { input, query, opts } => {
            let q = load_query(&query)?;
            let inst = load_instance(&input, std::slice::from_ref(&q))?;
            ensure_consistent(&inst)?;
            let start = Instant::now();
            let pexp = expand(&inst.tbox, &inst.policy)?;
            let a = answer_expanded(&inst, &pexp, &q, opts.options(), start)?;
            print_rows(&q, &a.tuples);
            eprintln!("t_r={}ms t_e={}ms formula size {}", ms(a.t_r), ms(a.t_e), a.report.size);
        }
        Cmd::Sql { input, query, abox, ddl, out, opts } => {
            let q = load_query(&query)?;
            let facts = match &abox {
                Some(p) => load_abox(p)?,
                None => FactSet::new(),
            };
            let (tbox, policy) = load_policy(&input, std::slice::from_ref(&q), &facts)?;
            let pexp = expand(&tbox, &policy)?;
            let (phi, _) = iga_rewrite_expanded(&q, &tbox, &policy, &pexp, opts.options());
            let schema = SqlSchema::for_formula(&phi, &facts);
            let mut schema_text = schema.ddl();
            if abox.is_some() {
                schema_text.push_str(&schema.inserts(&facts));
            }
            let sql = format!("{}{};\n", schema.mapping_comments(), fo_to_sql(&phi, &q.free_vars(), &schema)?);
            match ddl {
                Some(p) => std::fs::write(&p, schema_text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{schema_text}"),
            }
            match out {
                Some(p) => std::fs::write(&p, sql).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{sql}"),
            }
        }
        Cmd::Oracle { input, query } => {
            let q = query.as_deref().map(load_query).transpose()?;
            let inst = load_instance(&input, q.as_slice())?;
            let o = Oracle::new(&inst.tbox, &inst.policy, &inst.abox, cli.cap)?;
            let censors = o.censors();
            for (i, c) in censors.iter().enumerate() {
                println!("censor {}: {}", i + 1, serialize_facts(c).trim_end().replace('\n', " "));
            }
            println!("intersection: {}", serialize_facts(&o.intersection()).trim_end().replace('\n', " "));
            if let Some(q) = q {
                let iga = o.iga_answers(&q);
                let sk = o.skeptical_answers(&q);
                if q.is_boolean() {
                    let word = |b: bool| if b { "ENTAILED" } else { "NOT ENTAILED" };
                    println!("iga: {}", word(!iga.is_empty()));
                    println!("skeptical: {}", word(!sk.is_empty()));
                } else {
                    println!("iga: {} tuple(s)", iga.len());
                    println!("skeptical: {} tuple(s)", sk.len());
                    print_rows(&q, &iga);
                }
            }
        }
        Cmd::Diff { count, kind, instance } => {
            let mismatches = match instance {
                Some(path) => diff_file(&path, cli.cap)?,
                None => diff_random(cli.seed, count, kind, cli.cap)?,
            };
            if mismatches > 0 {
                return Err(Mismatch(mismatches).into());
            }
        }
        Cmd::Bench { tbox, policy, abox, queries, opts } => {
            let facts = load_abox(&abox)?;
            let qs = parse_queries(&read(&queries)?).with_context(|| format!("in {}", queries.display()))?;
            println!("query,policy,t_r,t_e,count");
            for pol in &policy {
                let (t, p) = load_policy(&PolicyArgs { tbox: tbox.clone(), policy: pol.clone() }, &qs, &facts)?;
                let inst = CqeInstance { tbox: t, policy: p, abox: facts.clone() };
                ensure_consistent(&inst)?;
                let name = pol.file_stem().and_then(|s| s.to_str()).unwrap_or("policy");
                for (i, q) in qs.iter().enumerate() {
                    let start = Instant::now();
                    let pexp = expand(&inst.tbox, &inst.policy)?;
                    let a = answer_expanded(&inst, &pexp, q, opts.options(), start)?;
                    println!("q{},{name},{},{},{}", i + 1, ms(a.t_r), ms(a.t_e), a.tuples.len());
                }
            }
        }
        Cmd::Selftest => {
            if !selftest::run()? {
                bail!("selftest failed");
            }
        }
    }
    Ok(())
}

fn diff_one(tbox: &TBox, policy: &Policy, abox: &FactSet, q: &UnionOfCqs, cap: usize) -> Result<bool> {
    let inst = CqeInstance { tbox: tbox.clone(), policy: policy.clone(), abox: abox.clone() };
    let oracle = Oracle::new(tbox, policy, abox, cap)?.iga_answers(q);
    let pexp = expand(tbox, policy)?;
    let got = answer_expanded(&inst, &pexp, q, IgaOptions::default(), Instant::now())?.tuples;
    Ok(got == oracle)
}

fn instance_text(tbox: &TBox, policy: &Policy, abox: &FactSet, q: &UnionOfCqs) -> String {
    format!(
        "[tbox]\n{}[policy]\n{}[abox]\n{}[query]\n{}\n",
        serialize_tbox(tbox),
        serialize_policy(policy),
        serialize_facts(abox),
        serialize_query(q)
    )
}

fn diff_random(seed: u64, count: usize, kind: KindArg, cap: usize) -> Result<usize> {
    let kind = match kind {
        KindArg::Full => PolicyKind::Full,
        KindArg::Binary => PolicyKind::Binary,
    };
    let cfg = GenConfig { cap: cap.min(GenConfig::new(kind).cap), ..GenConfig::new(kind) };
    eprintln!(
        "seed={seed} kind={kind:?} count={count} tbox<={} eds<={} facts<={} query_atoms<={} disjuncts<={} cap={}",
        cfg.max_tbox, cfg.max_eds, cfg.max_facts, cfg.max_query_atoms, cfg.max_disjuncts, cfg.cap
    );
    let mut g = Generator::new(seed, cfg);
    let mut bad = 0;
    for i in 0..count {
        let inst = g.instance();
        if !diff_one(&inst.tbox, &inst.policy, &inst.abox, &inst.query, cap)? {
            bad += 1;
            println!("# mismatch on instance {i}");
            print!("{}", instance_text(&inst.tbox, &inst.policy, &inst.abox, &inst.query));
        }
    }
    println!("{count} instances, {bad} mismatches");
    Ok(bad)
}

fn sections(text: &str) -> Result<[String; 4]> {
    let names = ["tbox", "policy", "abox", "query"];
    let mut out: [String; 4] = Default::default();
    let mut cur: Option<usize> = None;
    for line in text.lines() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let Some(i) = names.iter().position(|n| *n == name) else { bail!("unknown section [{name}]") };
            cur = Some(i);
            continue;
        }
        match cur {
            Some(i) => {
                out[i].push_str(line);
                out[i].push('\n');
            }
            None if t.is_empty() || t.starts_with('#') => {}
            None => bail!("text before the first section: {t}"),
        }
    }
    Ok(out)
}

fn diff_file(path: &Path, cap: usize) -> Result<usize> {
    let [tbox_text, policy_text, abox_text, query_text] = sections(&read(path)?)?;
    let (tbox, policy, q, abox) =
        cqe_core::parse::parse_artifacts(&tbox_text, &policy_text, &query_text, cqe_core::parse::parse_facts(&abox_text)?)?;
    let ok = diff_one(&tbox, &policy, &abox, &q, cap)?;
    println!("1 instance, {} mismatches", usize::from(!ok));
    Ok(usize::from(!ok))
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Mismatch>().is_some() {
        return 6;
    }
    let Some(c) = e.chain().find_map(|c| c.downcast_ref::<CqeError>()) else {
        if e.chain().any(|c| c.downcast_ref::<ParseError>().is_some()) {
            return 2;
        }
        return if e.chain().any(|c| c.downcast_ref::<GuardError>().is_some()) { 3 } else { 1 };
    };
    match c {
        CqeError::Parse(_) | CqeError::Arity { .. } | CqeError::Csv(_) => 2,
        CqeError::Guard(_) | CqeError::DepthExceeded { .. } => 3,
        CqeError::Inconsistent(_) => 4,
        CqeError::CapExceeded { .. } => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.timeout_ms {
        None => run(cli),
        Some(limit) => {
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                let _ = tx.send(run(cli));
            });
            match rx.recv_timeout(Duration::from_millis(limit)) {
                Ok(r) => r,
                Err(_) => {
                    eprintln!("error: timed out after {limit} ms");
                    return ExitCode::from(7);
                }
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
