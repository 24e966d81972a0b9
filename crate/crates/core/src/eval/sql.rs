//! SQL emission for safe-range formulas.
//!
//! Each predicate `p/n` becomes a table with text columns `c0..c{n-1}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::CqeError;
use crate::eval::fo::{binds, rank};
use crate::eval::FactSet;
use crate::model::{Atom, Formula, Fresh, Predicate, Substitution, Sym, Term};

const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "check", "column", "create", "default", "delete", "desc",
    "distinct", "drop", "else", "end", "exists", "from", "group", "having", "in", "index", "insert", "into", "is",
    "join", "key", "like", "limit", "not", "null", "on", "or", "order", "primary", "references", "select", "set",
    "table", "then", "union", "unique", "update", "values", "when", "where", "with",
];

/// Table names for a set of predicates.
#[derive(Clone, Debug, Default)]
pub struct SqlSchema {
    tables: BTreeMap<Predicate, String>,
}

impl SqlSchema {
    pub fn new<'a, I: IntoIterator<Item = &'a Predicate>>(preds: I) -> Self {
        let mut tables = BTreeMap::new();
        let mut used: BTreeSet<String> = BTreeSet::new();
        let preds: BTreeSet<&Predicate> = preds.into_iter().collect();
        for p in preds {
            let mut base: String =
                p.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
            if base.is_empty() || base.starts_with(|c: char| c.is_ascii_digit()) || RESERVED.contains(&base.to_lowercase().as_str()) {
                base = format!("p_{base}");
            }
            let mut name = base.clone();
            let mut n = 2;
            while used.contains(&name.to_lowercase()) {
                name = format!("{base}_{n}");
                n += 1;
            }
            used.insert(name.to_lowercase());
            tables.insert(p.clone(), name);
        }
        SqlSchema { tables }
    }

    /// Schema covering the formula's predicates and the facts.
    pub fn for_formula(f: &Formula, db: &FactSet) -> Self {
        let mut preds: BTreeSet<Predicate> = f.atoms().into_iter().map(|a| a.pred.clone()).collect();
        preds.extend(db.predicates().cloned());
        SqlSchema::new(&preds)
    }

    pub fn table(&self, p: &Predicate) -> Option<&str> {
        self.tables.get(p).map(String::as_str)
    }

    /// Comment lines for every renamed predicate.
    pub fn mapping_comments(&self) -> String {
        let mut s = String::new();
        for (p, t) in &self.tables {
            if p.name.as_str() != t {
                let _ = writeln!(s, "-- table {t} stores predicate {}/{}", p.name, p.arity);
            }
        }
        s
    }

    pub fn ddl(&self) -> String {
        let mut s = self.mapping_comments();
        for (p, t) in &self.tables {
            let cols: Vec<String> = (0..p.arity).map(|i| format!("c{i} TEXT NOT NULL")).collect();
            let _ = writeln!(s, "CREATE TABLE \"{t}\" ({});", cols.join(", "));
        }
        s
    }

    /// One-column query (`v`) over every constant stored in the tables.
    pub fn adom_sql(&self) -> String {
        let parts: Vec<String> = self
            .tables
            .iter()
            .flat_map(|(p, t)| (0..p.arity).map(move |i| format!("SELECT c{i} AS v FROM \"{t}\"")))
            .collect();
        if parts.is_empty() {
            "SELECT NULL AS v WHERE 1 = 0".into()
        } else {
            parts.join(" UNION ")
        }
    }

    pub fn inserts(&self, db: &FactSet) -> String {
        let mut s = String::new();
        for a in db.atoms() {
            let Some(t) = self.table(&a.pred) else { continue };
            let vals: Vec<String> = a.args.iter().map(|x| literal(x.name())).collect();
            let _ = writeln!(s, "INSERT INTO \"{t}\" VALUES ({});", vals.join(", "));
        }
        s
    }
}

/// SQLite rejects compound selects with more than 500 members.
const COMPOUND_LIMIT: usize = 256;

/// Joins with `op`, grouping long lists so the parsed expression tree stays shallow.
fn balanced(parts: &[String], op: &str) -> String {
    if parts.len() <= 16 {
        return parts.join(op);
    }
    let chunk = parts.len().div_ceil(16);
    let groups: Vec<String> = parts.chunks(chunk).map(|c| format!("({})", balanced(c, op))).collect();
    groups.join(op)
}

fn literal(c: &str) -> String {
    format!("'{}'", c.replace('\'', "''"))
}

#[derive(Clone, Debug, Default)]
struct Builder {
    from: Vec<String>,
    wheres: Vec<String>,
    colmap: BTreeMap<Sym, String>,
}

struct Emitter<'a> {
    schema: &'a SqlSchema,
    alias: usize,
    fresh: Fresh,
}

impl Emitter<'_> {
    fn alias(&mut self) -> String {
        self.alias += 1;
        format!("t{}", self.alias)
    }

    fn term(&self, b: &Builder, t: &Term) -> Option<String> {
        match t {
            Term::Const(c) => Some(literal(c)),
            Term::Var(v) => b.colmap.get(v).cloned(),
        }
    }

    fn atom(&mut self, b: &mut Builder, a: &Atom) -> Result<(), CqeError> {
        let Some(table) = self.schema.table(&a.pred) else {
            b.wheres.push("1 = 0".into());
            return Ok(());
        };
        let al = self.alias();
        b.from.push(format!("\"{table}\" AS {al}"));
        for (i, t) in a.args.iter().enumerate() {
            let col = format!("{al}.c{i}");
            match self.term(b, t) {
                Some(e) => b.wheres.push(format!("{col} = {e}")),
                None => {
                    b.colmap.insert(t.as_var().expect("unbound variable").clone(), col);
                }
            }
        }
        Ok(())
    }

    /// Conjunctive block; forks on disjunctions that depend on bound variables.
    fn block(&mut self, mut b: Builder, mut items: Vec<Formula>, out: &mut Vec<Builder>) -> Result<(), CqeError> {
        loop {
            if items.is_empty() {
                out.push(b);
                return Ok(());
            }
            let bound: BTreeSet<Sym> = b.colmap.keys().cloned().collect();
            let Some((i, _)) =
                items.iter().enumerate().filter_map(|(i, g)| Some((i, rank(g, &bound)?))).min_by_key(|(_, r)| *r)
            else {
                return Err(CqeError::NotSafeRange(items.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" & ")));
            };
            let g = items.remove(i);
            match g {
                Formula::True => {}
                Formula::False => b.wheres.push("1 = 0".into()),
                Formula::Atom(a) => self.atom(&mut b, &a)?,
                Formula::Eq(x, y) => match (self.term(&b, &x), self.term(&b, &y)) {
                    (Some(ex), Some(ey)) => b.wheres.push(format!("{ex} = {ey}")),
                    (Some(e), None) => {
                        b.colmap.insert(y.as_var().expect("variable").clone(), e);
                    }
                    (None, Some(e)) => {
                        b.colmap.insert(x.as_var().expect("variable").clone(), e);
                    }
                    (None, None) => return Err(CqeError::NotSafeRange(format!("{x} = {y}"))),
                },
                Formula::And(gs) => items.extend(gs),
                Formula::Exists(vs, g) => {
                    let ren = Substitution::from_pairs(vs.iter().map(|v| (v.clone(), Term::Var(self.fresh.var("s")))));
                    items.push(g.substitute(&ren, &mut self.fresh));
                }
                Formula::Not(g) => {
                    let e = self.exists(&b.colmap, *g)?;
                    b.wheres.push(format!("NOT {e}"));
                }
                Formula::Implies(x, y) => {
                    let e = self.exists(&b.colmap, Formula::and(vec![*x, Formula::not(*y)]))?;
                    b.wheres.push(format!("NOT {e}"));
                }
                Formula::Or(gs) => {
                    let free = Formula::Or(gs.clone()).free_vars();
                    if free.is_subset(&bound) {
                        let parts = gs.into_iter().map(|g| self.exists(&b.colmap, g)).collect::<Result<Vec<_>, _>>()?;
                        b.wheres.push(format!("({})", balanced(&parts, " OR ")));
                    } else if !(b.from.is_empty() && b.colmap.is_empty())
                        && binds(&Formula::Or(gs.clone()), &BTreeSet::new()).is_some_and(|s| free.is_subset(&s))
                    {
                        let cols: Vec<Sym> = free.into_iter().collect();
                        let inner = self.query(&Formula::Or(gs), &cols)?;
                        let al = self.alias();
                        b.from.push(format!("({inner}) AS {al}"));
                        for (k, v) in cols.iter().enumerate() {
                            let col = format!("{al}.v{k}");
                            match b.colmap.get(v) {
                                Some(e) => b.wheres.push(format!("{col} = {e}")),
                                None => {
                                    b.colmap.insert(v.clone(), col);
                                }
                            }
                        }
                    } else {
                        for g in gs {
                            let mut rest = items.clone();
                            rest.push(g);
                            self.block(b.clone(), rest, out)?;
                        }
                        return Ok(());
                    }
                }
            }
        }
    }

    fn render(b: &Builder, select: &str, dummy: String) -> String {
        let from = if b.from.is_empty() { format!("(SELECT 1 AS one) AS {dummy}") } else { b.from.join(", ") };
        let mut s = format!("SELECT {select} FROM {from}");
        if !b.wheres.is_empty() {
            s.push_str(" WHERE ");
            s.push_str(&balanced(&b.wheres, " AND "));
        }
        s
    }

    fn exists(&mut self, outer: &BTreeMap<Sym, String>, g: Formula) -> Result<String, CqeError> {
        let mut out = Vec::new();
        self.block(Builder { colmap: outer.clone(), ..Builder::default() }, vec![g], &mut out)?;
        if out.is_empty() {
            return Ok("EXISTS (SELECT 1 WHERE 1 = 0)".into());
        }
        let members: Vec<String> = out
            .iter()
            .map(|b| {
                let d = self.alias();
                Self::render(b, "1 AS one", d)
            })
            .collect();
        let parts: Vec<String> =
            members.chunks(COMPOUND_LIMIT).map(|c| format!("EXISTS ({})", c.join(" UNION ALL "))).collect();
        Ok(if parts.len() == 1 { parts.into_iter().next().expect("one part") } else { format!("({})", balanced(&parts, " OR ")) })
    }

    fn query(&mut self, f: &Formula, cols: &[Sym]) -> Result<String, CqeError> {
        let mut out = Vec::new();
        self.block(Builder::default(), vec![f.clone()], &mut out)?;
        let mut members = Vec::new();
        for b in &mut out {
            // Answer variables the formula leaves unconstrained range over the active domain.
            for v in cols.iter().filter(|v| !b.colmap.contains_key(*v)).collect::<Vec<_>>() {
                let al = self.alias();
                b.from.push(format!("({}) AS {al}", self.schema.adom_sql()));
                b.colmap.insert(v.clone(), format!("{al}.v"));
            }
            let b = &*b;
            let select = if cols.is_empty() {
                "1 AS one".to_string()
            } else {
                let mut parts = Vec::new();
                for (k, v) in cols.iter().enumerate() {
                    let e = b.colmap.get(v).ok_or_else(|| CqeError::NotSafeRange(format!("{v} is not bound by {f}")))?;
                    parts.push(format!("{e} AS v{k}"));
                }
                parts.join(", ")
            };
            let d = self.alias();
            members.push(Self::render(b, &format!("DISTINCT {select}"), d));
        }
        if members.is_empty() {
            let select = if cols.is_empty() {
                "1 AS one".to_string()
            } else {
                (0..cols.len()).map(|k| format!("NULL AS v{k}")).collect::<Vec<_>>().join(", ")
            };
            return Ok(format!("SELECT {select} WHERE 1 = 0"));
        }
        if members.len() <= COMPOUND_LIMIT {
            return Ok(members.join(" UNION "));
        }
        let parts: Vec<String> =
            members.chunks(COMPOUND_LIMIT).map(|c| format!("SELECT * FROM ({})", c.join(" UNION "))).collect();
        Ok(parts.join(" UNION "))
    }
}

/// A `SELECT` returning the answers of `f` as columns `v0..` in `target` order
/// (a single `one` column for sentences).
pub fn fo_to_sql(f: &Formula, target: &[Sym], schema: &SqlSchema) -> Result<String, CqeError> {
    crate::eval::check_safe_range(f)?;
    let mut e = Emitter { schema, alias: 0, fresh: Fresh::new() };
    e.query(f, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_names_are_sanitized() {
        let s = SqlSchema::new(&[Predicate::new("select", 1), Predicate::new("A", 1), Predicate::new("a", 2)]);
        assert_eq!(s.table(&Predicate::new("select", 1)), Some("p_select"));
        let a1 = s.table(&Predicate::new("A", 1)).unwrap().to_lowercase();
        let a2 = s.table(&Predicate::new("a", 2)).unwrap().to_lowercase();
        assert_ne!(a1, a2);
        assert!(s.ddl().contains("-- table p_select stores predicate select/1"));
    }

    #[test]
    fn emits_not_exists() {
        let f = Formula::and(vec![
            Formula::Atom(Atom::new("A", vec![Term::var("x")])),
            Formula::not(Formula::Atom(Atom::new("B", vec![Term::var("x")]))),
        ]);
        let schema = SqlSchema::new(&[Predicate::new("A", 1), Predicate::new("B", 1)]);
        let sql = fo_to_sql(&f, &[Sym::new("x")], &schema).unwrap();
        assert_eq!(
            sql,
            "SELECT DISTINCT t1.c0 AS v0 FROM \"A\" AS t1 WHERE NOT EXISTS (SELECT 1 AS one FROM \"B\" AS t2 WHERE t2.c0 = t1.c0)"
        );
    }

    #[test]
    fn top_level_disjunction_is_a_union() {
        let a = |p: &str| Formula::Atom(Atom::new(p, vec![Term::var("x")]));
        let f = Formula::or(vec![a("A"), a("B")]);
        let schema = SqlSchema::new(&[Predicate::new("A", 1), Predicate::new("B", 1)]);
        let sql = fo_to_sql(&f, &[Sym::new("x")], &schema).unwrap();
        assert!(sql.contains(" UNION "), "{sql}");
        let r = |p: &str| Formula::Atom(Atom::new(p, vec![Term::var("x"), Term::var("z")]));
        let schema = SqlSchema::new(&[Predicate::new("A", 1), Predicate::new("R", 2), Predicate::new("S", 2)]);
        let g = Formula::and(vec![a("A"), Formula::or(vec![r("R"), r("S")])]);
        let sql = fo_to_sql(&g, &[Sym::new("x"), Sym::new("z")], &schema).unwrap();
        assert!(sql.contains("UNION"), "{sql}");
        let sql = fo_to_sql(&Formula::False, &[Sym::new("x")], &schema).unwrap();
        assert!(sql.contains("SELECT c1 AS v FROM \"R\""), "{sql}");
    }

    #[test]
    fn long_lists_are_grouped() {
        let parts: Vec<String> = (0..300).map(|i| format!("x{i}")).collect();
        let s = balanced(&parts, " AND ");
        assert_eq!(s.matches("x").count(), 300);
        assert!(s.starts_with("((x0 AND"), "{s}");
        assert_eq!(balanced(&parts[..3], " OR "), "x0 OR x1 OR x2");
    }

    #[test]
    fn literal_escaping() {
        assert_eq!(literal("O'Neil"), "'O''Neil'");
    }
}
