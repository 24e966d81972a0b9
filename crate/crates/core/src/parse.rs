//! Line-oriented text formats for TBoxes, policies, queries and ABoxes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use crate::error::{CqeError, ParseError};
use crate::eval::FactSet;
use crate::model::{
    Atom, BasicConcept, ConjunctiveQuery, EpistemicDependency, Head, Policy, Predicate, Role, Sym, TBox, TBoxAxiom,
    Term, UnionOfCqs,
};

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    QVar(String),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Turnstile,
    Bar,
    Minus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::QVar(s) => write!(f, "`?{s}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Turnstile => f.write_str("`:-`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Minus => f.write_str("`-`"),
        }
    }
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

fn perr(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, col, msg: msg.into() }
}

impl Lexer {
    fn new(text: &str, line: usize) -> Result<Self, ParseError> {
        let chars: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '(' | ')' | ',' | '.' | '|' | '-' => {
                    toks.push((
                        match c {
                            '(' => Tok::LParen,
                            ')' => Tok::RParen,
                            ',' => Tok::Comma,
                            '.' => Tok::Dot,
                            '|' => Tok::Bar,
                            _ => Tok::Minus,
                        },
                        line,
                        col,
                    ));
                    i += 1;
                }
                ':' => {
                    if chars.get(i + 1) == Some(&'-') {
                        toks.push((Tok::Turnstile, line, col));
                        i += 2;
                    } else {
                        toks.push((Tok::Colon, line, col));
                        i += 1;
                    }
                }
                '"' => {
                    let mut s = String::new();
                    i += 1;
                    loop {
                        match chars.get(i) {
                            None => return Err(perr(line, col, "unterminated string")),
                            Some('"') => {
                                i += 1;
                                break;
                            }
                            Some('\\') => {
                                let Some(n) = chars.get(i + 1) else {
                                    return Err(perr(line, col, "unterminated string"));
                                };
                                s.push(*n);
                                i += 2;
                            }
                            Some(ch) => {
                                s.push(*ch);
                                i += 1;
                            }
                        }
                    }
                    if s.is_empty() {
                        return Err(perr(line, col, "empty constant"));
                    }
                    toks.push((Tok::Str(s), line, col));
                }
                '?' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    if j == start {
                        return Err(perr(line, col, "empty variable name after `?`"));
                    }
                    toks.push((Tok::QVar(chars[start..j].iter().collect()), line, col));
                    i = j;
                }
                c if c.is_alphanumeric() || c == '_' => {
                    let mut j = i;
                    while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    toks.push((Tok::Ident(chars[i..j].iter().collect()), line, col));
                    i = j;
                }
                other => return Err(perr(line, col, format!("unexpected character `{other}`"))),
            }
        }
        Ok(Lexer { toks, pos: 0, line, end_col: chars.len() + 1 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or((self.line, self.end_col), |t| (t.1, t.2))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (l, c) = self.here();
        perr(l, c, msg)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.err(format!("expected {want}, found {t}"))),
            None => Err(self.err(format!("expected {want}, found end of line"))),
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == Some(want) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(t) => Err(self.err(format!("expected {what}, found {t}"))),
            None => Err(self.err(format!("expected {what}, found end of line"))),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.err(format!("unexpected trailing {t}"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TermMode {
    /// Lowercase / `?` variables, uppercase / digit / quoted constants.
    Query,
    /// Every bare identifier is a constant.
    Facts,
}

fn term(lx: &mut Lexer, mode: TermMode) -> Result<Term, ParseError> {
    let (l, c) = lx.here();
    match lx.next() {
        Some(Tok::QVar(v)) => {
            if mode == TermMode::Facts {
                return Err(perr(l, c, "variables are not allowed in facts"));
            }
            let name = format!("?{v}");
            if Sym::new(&name).is_generated() {
                return Err(perr(l, c, format!("variable names starting with `?_` are reserved: `{name}`")));
            }
            Ok(Term::Var(Sym::from(name)))
        }
        Some(Tok::Str(s)) => Ok(Term::Const(Sym::from(s))),
        Some(Tok::Ident(s)) => {
            let first = s.chars().next().expect("non-empty ident");
            if mode == TermMode::Facts || first.is_ascii_digit() || first.is_uppercase() {
                Ok(Term::Const(Sym::from(s)))
            } else if first.is_lowercase() {
                Ok(Term::Var(Sym::from(s)))
            } else {
                Err(perr(l, c, format!("`{s}` is neither a variable nor a constant")))
            }
        }
        Some(t) => Err(perr(l, c, format!("expected a term, found {t}"))),
        None => Err(perr(l, c, "expected a term, found end of line")),
    }
}

fn atom(lx: &mut Lexer, mode: TermMode) -> Result<Atom, ParseError> {
    let (l, c) = lx.here();
    let name = lx.ident("a predicate name")?;
    lx.expect(Tok::LParen)?;
    let mut args = vec![term(lx, mode)?];
    while lx.eat(&Tok::Comma) {
        args.push(term(lx, mode)?);
    }
    lx.expect(Tok::RParen)?;
    if args.len() > 2 {
        return Err(perr(l, c, format!("predicate `{name}` has arity {}; only 1 and 2 are supported", args.len())));
    }
    Ok(Atom::new(&name, args))
}

fn atom_list(lx: &mut Lexer, mode: TermMode, stop: &[&str]) -> Result<Vec<Atom>, ParseError> {
    let mut out = vec![atom(lx, mode)?];
    while lx.eat(&Tok::Comma) {
        if stop.iter().any(|k| lx.keyword(k)) {
            break;
        }
        out.push(atom(lx, mode)?);
    }
    Ok(out)
}

fn var_list(lx: &mut Lexer) -> Result<Vec<Sym>, ParseError> {
    let mut out = Vec::new();
    if matches!(lx.peek(), Some(Tok::RParen) | Some(Tok::Colon)) {
        return Ok(out);
    }
    loop {
        let (l, c) = lx.here();
        match term(lx, TermMode::Query)? {
            Term::Var(v) => {
                if out.contains(&v) {
                    return Err(perr(l, c, format!("variable `{v}` listed twice")));
                }
                out.push(v)
            }
            Term::Const(k) => return Err(perr(l, c, format!("expected a variable, found constant `{k}`"))),
        }
        if !lx.eat(&Tok::Comma) {
            return Ok(out);
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn is_blank(l: &str) -> bool {
    let t = l.trim_start();
    t.is_empty() || t.starts_with('#')
}

/// Parses a policy: one ED per line, `[FORALL x,y:] BODY atoms HEAD atoms|BOT`.
pub fn parse_policy(text: &str) -> Result<Policy, ParseError> {
    let mut eds = Vec::new();
    for (n, l) in lines(text) {
        if is_blank(l) {
            continue;
        }
        eds.push(parse_ed_line(l, n)?);
    }
    Ok(Policy::new(eds))
}

fn parse_ed_line(l: &str, n: usize) -> Result<EpistemicDependency, ParseError> {
    let mut lx = Lexer::new(l, n)?;
    let declared = if lx.keyword("FORALL") {
        lx.next();
        let vs = var_list(&mut lx)?;
        lx.expect(Tok::Colon)?;
        Some(vs)
    } else {
        None
    };
    if !lx.keyword("BODY") {
        return Err(lx.err("expected `BODY`"));
    }
    lx.next();
    let body = atom_list(&mut lx, TermMode::Query, &["HEAD"])?;
    if !lx.keyword("HEAD") {
        return Err(lx.err("expected `HEAD`"));
    }
    let (hl, hc) = lx.here();
    lx.next();
    let head = if lx.keyword("BOT") {
        lx.next();
        Head::Bot
    } else {
        Head::Atoms(atom_list(&mut lx, TermMode::Query, &[])?)
    };
    lx.finish()?;
    let body_vars: BTreeSet<Sym> = body.iter().flat_map(|a| a.vars().cloned()).collect();
    let universals = match declared {
        Some(vs) => {
            if let Some(v) = vs.iter().find(|v| !body_vars.contains(*v)) {
                return Err(perr(n, 1, format!("universal variable `{v}` does not occur in the body")));
            }
            vs
        }
        None => {
            let mut vs: Vec<Sym> = Vec::new();
            for v in head.atoms().iter().flat_map(|a| a.vars()) {
                if !body_vars.contains(v) {
                    return Err(perr(hl, hc, format!("head variable `{v}` does not occur in the body")));
                }
                if !vs.contains(v) {
                    vs.push(v.clone());
                }
            }
            vs
        }
    };
    Ok(EpistemicDependency::new(universals, body, head))
}

/// Parses one query `Name(x,..) :- atoms | atoms ...` (may span several lines).
pub fn parse_query(text: &str) -> Result<UnionOfCqs, ParseError> {
    let qs = parse_queries(text)?;
    match qs.len() {
        1 => Ok(qs.into_iter().next().expect("one query")),
        0 => Err(perr(1, 1, "no query found")),
        k => Err(perr(1, 1, format!("expected one query, found {k}"))),
    }
}

/// Parses every query in the text; a query starts on a line containing `:-`.
pub fn parse_queries(text: &str) -> Result<Vec<UnionOfCqs>, ParseError> {
    let mut chunks: Vec<(usize, String)> = Vec::new();
    for (n, l) in lines(text) {
        if is_blank(l) {
            continue;
        }
        let body = l.split('#').next().unwrap_or("");
        if body.contains(":-") || chunks.is_empty() {
            chunks.push((n, body.to_string()));
        } else {
            let last = chunks.last_mut().expect("non-empty");
            last.1.push(' ');
            last.1.push_str(body);
        }
    }
    chunks.into_iter().map(|(n, s)| parse_query_stmt(&s, n)).collect()
}

fn parse_query_stmt(s: &str, n: usize) -> Result<UnionOfCqs, ParseError> {
    let mut lx = Lexer::new(s, n)?;
    lx.ident("a query name")?;
    lx.expect(Tok::LParen)?;
    let free = var_list(&mut lx)?;
    lx.expect(Tok::RParen)?;
    lx.expect(Tok::Turnstile)?;
    let mut disjuncts = Vec::new();
    loop {
        let (l, c) = lx.here();
        let atoms = atom_list(&mut lx, TermMode::Query, &[])?;
        let vars: BTreeSet<Sym> = atoms.iter().flat_map(|a| a.vars().cloned()).collect();
        if let Some(v) = free.iter().find(|v| !vars.contains(*v)) {
            return Err(perr(l, c, format!("answer variable `{v}` does not occur in this disjunct")));
        }
        disjuncts.push(ConjunctiveQuery::with_free(&free, atoms));
        if !lx.eat(&Tok::Bar) {
            break;
        }
    }
    lx.eat(&Tok::Dot);
    lx.finish()?;
    Ok(UnionOfCqs { disjuncts })
}

/// Parses `p(a,b).` facts; bare identifiers are constants.
pub fn parse_facts(text: &str) -> Result<FactSet, ParseError> {
    let mut fs = FactSet::new();
    let mut arity: BTreeMap<Sym, (u8, usize)> = BTreeMap::new();
    for (n, l) in lines(text) {
        if is_blank(l) {
            continue;
        }
        let mut lx = Lexer::new(l, n)?;
        while !lx.at_end() {
            let (al, ac) = lx.here();
            let a = atom(&mut lx, TermMode::Facts)?;
            match arity.get(&a.pred.name) {
                Some((k, first)) if *k != a.pred.arity => {
                    return Err(perr(
                        al,
                        ac,
                        format!("predicate `{}` used with arity {} here and {} on line {first}", a.pred.name, a.pred.arity, k),
                    ))
                }
                _ => {
                    arity.entry(a.pred.name.clone()).or_insert((a.pred.arity, n));
                }
            }
            fs.insert(a);
            if !lx.eat(&Tok::Dot) {
                lx.eat(&Tok::Comma);
            }
        }
    }
    Ok(fs)
}

/// Loads `pred.csv` files (1 or 2 columns, no header) from a directory.
pub fn load_csv_dir(dir: &Path) -> Result<FactSet, CqeError> {
    let mut fs = FactSet::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.extension().and_then(|x| x.to_str()) != Some("csv") {
            continue;
        }
        let pred = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).trim(csv::Trim::All).from_path(&path)?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.is_empty() || rec.iter().all(str::is_empty) {
                continue;
            }
            if rec.len() > 2 || rec.iter().any(str::is_empty) {
                return Err(CqeError::Parse(perr(
                    i + 1,
                    1,
                    format!("{}: malformed row with {} fields", path.display(), rec.len()),
                )));
            }
            fs.insert(Atom::new(&pred, rec.iter().map(Term::cst).collect()));
        }
    }
    if let Some(name) = fs.arity_conflict() {
        return Err(CqeError::Arity { name: name.to_string(), detail: "rows of different widths".into() });
    }
    Ok(fs)
}

/// Loads an ABox from a `p(a,b).` file or a directory of CSV files.
pub fn load_abox(path: &Path) -> Result<FactSet, CqeError> {
    if path.is_dir() {
        load_csv_dir(path)
    } else {
        Ok(parse_facts(&std::fs::read_to_string(path)?)?)
    }
}

/// Parses a TBox. `hints` gives known predicate arities (from other artifacts)
/// used to tell roles from concepts in `X ISA Y` lines.
pub fn parse_tbox(text: &str, hints: &BTreeMap<Sym, u8>) -> Result<TBox, ParseError> {
    let mut roles: BTreeSet<String> =
        hints.iter().filter(|(_, a)| **a == 2).map(|(n, _)| n.to_string()).collect();
    let mut concepts: BTreeSet<String> =
        hints.iter().filter(|(_, a)| **a == 1).map(|(n, _)| n.to_string()).collect();
    let mut lexed = Vec::new();
    for (n, l) in lines(text) {
        if is_blank(l) {
            continue;
        }
        let lx = Lexer::new(l, n)?;
        if matches!(lx.toks.first(), Some((Tok::Ident(k), ..)) if k == "ROLE") {
            for t in &lx.toks[1..] {
                match &t.0 {
                    Tok::Ident(s) => {
                        roles.insert(s.clone());
                    }
                    Tok::Comma => {}
                    other => return Err(perr(t.1, t.2, format!("unexpected {other} in ROLE declaration"))),
                }
            }
            continue;
        }
        for (i, t) in lx.toks.iter().enumerate() {
            if let Tok::Ident(s) = &t.0 {
                let after_ex = i > 0 && matches!(&lx.toks[i - 1].0, Tok::Ident(k) if k == "EX");
                let before_minus = matches!(lx.toks.get(i + 1), Some((Tok::Minus, ..)));
                if after_ex || before_minus {
                    roles.insert(s.clone());
                }
            }
        }
        lexed.push(lx);
    }
    // `X ISA Y` / `X DISJ Y` with bare names relates two roles as soon as one is known to be a role
    loop {
        let before = roles.len();
        for lx in &lexed {
            if let [(Tok::Ident(a), ..), (Tok::Ident(k), ..), (Tok::Ident(b), ..)] = lx.toks.as_slice() {
                if (k == "ISA" || k == "DISJ") && (roles.contains(a) || roles.contains(b)) && a != "EX" && b != "EX" {
                    roles.insert(a.clone());
                    roles.insert(b.clone());
                }
            }
            if let [(Tok::Ident(a), ..), (Tok::Minus, ..), (Tok::Ident(_), ..), (Tok::Ident(b), ..), ..] = lx.toks.as_slice() {
                let _ = a;
                if b != "EX" {
                    roles.insert(b.clone());
                }
            }
            if let [(Tok::Ident(a), ..), (Tok::Ident(k), ..), (Tok::Ident(b), ..), (Tok::Minus, ..)] = lx.toks.as_slice() {
                if (k == "ISA" || k == "DISJ") && a != "EX" {
                    roles.insert(a.clone());
                    roles.insert(b.clone());
                }
            }
        }
        if roles.len() == before {
            break;
        }
    }
    if let Some(clash) = roles.intersection(&concepts).next() {
        return Err(perr(1, 1, format!("`{clash}` is used both as a concept and as a role")));
    }
    concepts.clear();
    let mut axioms = Vec::new();
    for mut lx in lexed {
        axioms.push(tbox_line(&mut lx, &roles)?);
    }
    Ok(TBox::new(axioms))
}

enum Side {
    Concept(BasicConcept),
    Role(Role),
}

fn tbox_side(lx: &mut Lexer, roles: &BTreeSet<String>) -> Result<Side, ParseError> {
    if lx.keyword("EX") {
        lx.next();
        let name = lx.ident("a role name")?;
        let inverse = lx.eat(&Tok::Minus);
        return Ok(Side::Concept(BasicConcept::Exists(Role::new(&name, inverse))));
    }
    let (l, c) = lx.here();
    let name = lx.ident("a concept or role name")?;
    if ["ISA", "DISJ", "EX", "ROLE"].contains(&name.as_str()) {
        return Err(perr(l, c, format!("unexpected keyword `{name}`")));
    }
    let inverse = lx.eat(&Tok::Minus);
    if roles.contains(&name) {
        Ok(Side::Role(Role::new(&name, inverse)))
    } else {
        Ok(Side::Concept(BasicConcept::atomic(&name)))
    }
}

fn tbox_line(lx: &mut Lexer, roles: &BTreeSet<String>) -> Result<TBoxAxiom, ParseError> {
    let (l, c) = lx.here();
    let lhs = tbox_side(lx, roles)?;
    let negative = if lx.keyword("ISA") {
        false
    } else if lx.keyword("DISJ") {
        true
    } else {
        return Err(lx.err("expected `ISA` or `DISJ`"));
    };
    lx.next();
    let rhs = tbox_side(lx, roles)?;
    lx.finish()?;
    Ok(match (lhs, rhs, negative) {
        (Side::Concept(a), Side::Concept(b), false) => TBoxAxiom::ConceptIncl(a, b),
        (Side::Concept(a), Side::Concept(b), true) => TBoxAxiom::ConceptDisj(a, b),
        (Side::Role(a), Side::Role(b), false) => TBoxAxiom::RoleIncl(a, b),
        (Side::Role(a), Side::Role(b), true) => TBoxAxiom::RoleDisj(a, b),
        _ => return Err(perr(l, c, "cannot relate a concept and a role")),
    })
}

/// Serializes a TBox so that [`parse_tbox`] restores it without hints.
pub fn serialize_tbox(t: &TBox) -> String {
    let mut out = String::new();
    let roles = t.role_names();
    if !roles.is_empty() {
        out.push_str("ROLE ");
        out.push_str(&roles.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", "));
        out.push('\n');
    }
    for a in &t.axioms {
        out.push_str(&a.to_string());
        out.push('\n');
    }
    out
}

/// Serializes a policy; engine-generated variable names are replaced by readable ones.
pub fn serialize_policy(p: &Policy) -> String {
    let mut out = String::new();
    for e in &p.eds {
        out.push_str(&presentable_ed(e).to_string());
        out.push('\n');
    }
    out
}

fn presentable_ed(e: &EpistemicDependency) -> EpistemicDependency {
    let e = e.normalized();
    let mut used: BTreeSet<Sym> = e.body.vars();
    used.extend(e.head.atoms().iter().flat_map(|a| a.vars().cloned()));
    let mut ren = crate::model::Substitution::new();
    let mut n = 0;
    for v in crate::model::vars_in_order(e.body.atoms.iter().chain(e.head.atoms())) {
        if v.is_generated() {
            let name = loop {
                n += 1;
                let cand = Sym::from(format!("v{n}"));
                if !used.contains(&cand) {
                    break cand;
                }
            };
            ren.insert(v, Term::Var(name));
        }
    }
    EpistemicDependency {
        universals: e.universals.iter().map(|u| ren.apply_term(&Term::Var(u.clone())).as_var().cloned().expect("var")).collect(),
        body: crate::model::apply_substitution(&e.body, &ren),
        head: e.head.apply(&ren),
    }
}

pub fn serialize_query(q: &UnionOfCqs) -> String {
    let mut s = q.to_string();
    s.push('\n');
    s
}

/// Facts lex bare identifiers as constants, so only odd names need quoting.
fn fact_constant(name: &str) -> String {
    if !name.is_empty() && name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        name.to_string()
    } else {
        Term::Const(Sym::new(name)).to_string()
    }
}

pub fn serialize_facts(f: &FactSet) -> String {
    let mut out = String::new();
    for a in f.atoms() {
        out.push_str(&format!("{}(", a.pred.name));
        for (i, t) in a.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&fact_constant(t.name()));
        }
        out.push_str(").\n");
    }
    out
}

/// Predicate arities used by a set of artifacts; errors on conflicting uses.
pub fn collect_arities<'a, I: IntoIterator<Item = &'a Predicate>>(preds: I) -> Result<BTreeMap<Sym, u8>, CqeError> {
    let mut out: BTreeMap<Sym, u8> = BTreeMap::new();
    for p in preds {
        match out.get(&p.name) {
            Some(a) if *a != p.arity => {
                return Err(CqeError::Arity {
                    name: p.name.to_string(),
                    detail: format!("used with arity {a} and {}", p.arity),
                })
            }
            _ => {
                out.insert(p.name.clone(), p.arity);
            }
        }
    }
    Ok(out)
}

/// Parses all four artifacts together, resolving role/concept names in the
/// TBox from the arities used elsewhere and checking arity consistency.
pub fn parse_artifacts(
    tbox_text: &str,
    policy_text: &str,
    query_text: &str,
    abox: FactSet,
) -> Result<(TBox, Policy, UnionOfCqs, FactSet), CqeError> {
    let policy = parse_policy(policy_text)?;
    let query = parse_query(query_text)?;
    let (tbox, _) = parse_tbox_with(tbox_text, &policy, std::slice::from_ref(&query), &abox)?;
    Ok((tbox, policy, query, abox))
}

/// Parses a TBox using the other artifacts as arity hints, and validates arities across all of them.
pub fn parse_tbox_with(
    tbox_text: &str,
    policy: &Policy,
    queries: &[UnionOfCqs],
    abox: &FactSet,
) -> Result<(TBox, BTreeMap<Sym, u8>), CqeError> {
    let mut preds: Vec<Predicate> = policy.predicates().into_iter().collect();
    preds.extend(queries.iter().flat_map(|q| q.predicates()));
    preds.extend(abox.predicates().cloned());
    let hints = collect_arities(preds.iter())?;
    let tbox = parse_tbox(tbox_text, &hints)?;
    preds.extend(tbox.predicates());
    let all = collect_arities(preds.iter())?;
    Ok((tbox, all))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_policy() {
        let p = parse_policy(
            "# salary disclosure\nFORALL x,y: BODY salary(x,y) HEAD manager(x)\nBODY managerOf(x,y), consRel(x,y) HEAD BOT\n",
        )
        .unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.eds[0].is_full() && !p.eds[0].is_denial());
        assert!(p.eds[1].is_denial());
        assert!(p.eds[1].universals.is_empty());
    }

    #[test]
    fn empty_policy() {
        assert_eq!(parse_policy("").unwrap().len(), 0);
        assert_eq!(parse_policy("# nothing\n\n").unwrap().len(), 0);
    }

    #[test]
    fn head_var_not_in_body() {
        let e = parse_policy("BODY C(x) HEAD B(y)").unwrap_err();
        assert_eq!(e.line, 1);
        assert!(e.msg.contains("`y`"));
        // declared universals make y an existential head variable instead
        let p = parse_policy("FORALL x: BODY C(x) HEAD B(y)").unwrap();
        assert!(!p.eds[0].is_full());
    }

    #[test]
    fn syntax_error_position() {
        let e = parse_policy("BODY A(x) HEAD\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_policy("\nBODY A(x) HED B(x)").unwrap_err();
        assert_eq!((e.line, e.col), (2, 11));
    }

    #[test]
    fn reserved_variables_rejected() {
        assert!(parse_query("Q() :- A(?_e0)").is_err());
        assert!(parse_query("Q(?v) :- A(?v)").is_ok());
    }

    #[test]
    fn query_forms() {
        let q = parse_query("Q(x) :- manager(x) | managerOf(x,y), consRel(x,Tom)").unwrap();
        assert_eq!(q.disjuncts.len(), 2);
        assert_eq!(q.free_vars(), vec![Sym::new("x")]);
        assert_eq!(q.disjuncts[1].atoms[1].args[1], Term::cst("Tom"));
        assert!(parse_query("Q(x) :- A(y)").is_err());
        let q = parse_query("Q() :- respDept(x,y), salary(x,150k)").unwrap();
        assert!(q.is_boolean());
    }

    #[test]
    fn facts_dedup_and_arity() {
        let f = parse_facts("managerOf(lucy,tom).\nconsRel(lucy,tom).\nmanagerOf(lucy,tom).\n").unwrap();
        assert_eq!(f.len(), 2);
        assert!(parse_facts("A(a).\nA(a,b).").is_err());
        assert_eq!(parse_facts("").unwrap().len(), 0);
    }

    #[test]
    fn tbox_role_inference() {
        let t = parse_tbox("EX managerOf ISA manager\nmanager ISA EX respDept\nR- ISA S\nA DISJ B\n", &BTreeMap::new()).unwrap();
        assert_eq!(t.len(), 4);
        assert!(matches!(t.axioms[2], TBoxAxiom::RoleIncl(..)));
        assert!(matches!(t.axioms[3], TBoxAxiom::ConceptDisj(..)));
        let hints = BTreeMap::from([(Sym::new("P"), 2u8)]);
        let t = parse_tbox("P ISA Q", &hints).unwrap();
        assert!(matches!(t.axioms[0], TBoxAxiom::RoleIncl(..)));
        let hints = BTreeMap::from([(Sym::new("P"), 2u8), (Sym::new("Q"), 1u8)]);
        assert!(parse_tbox("P ISA Q", &hints).is_err());
        let t = parse_tbox("R ISA S\nEX S- ISA A", &BTreeMap::new()).unwrap();
        assert!(matches!(t.axioms[0], TBoxAxiom::RoleIncl(..)));
        let t = parse_tbox("ROLE P, Q\nP ISA Q", &BTreeMap::new()).unwrap();
        assert!(matches!(t.axioms[0], TBoxAxiom::RoleIncl(..)));
    }

    #[test]
    fn round_trips() {
        let tb = "ROLE S\nEX R ISA A\nA ISA EX R-\nR- ISA S\nA DISJ B\nS DISJ R\n";
        let t = parse_tbox(tb, &BTreeMap::new()).unwrap();
        assert_eq!(parse_tbox(&serialize_tbox(&t), &BTreeMap::new()).unwrap(), t);
        let p = parse_policy("FORALL y: BODY isAdvisedBy(x,y) HEAD Woman(y)\nFORALL x,y,z: BODY R(x,y), S(x,z) HEAD T(x,\"c d\")\n").unwrap();
        assert_eq!(parse_policy(&serialize_policy(&p)).unwrap(), p);
        let q = parse_query("Q(x) :- A(x), R(x,1) | B(x)").unwrap();
        assert_eq!(parse_query(&serialize_query(&q)).unwrap(), q);
        let f = parse_facts("A(a).\nR(a,\"b c\").\n").unwrap();
        assert_eq!(parse_facts(&serialize_facts(&f)).unwrap(), f);
    }
}
