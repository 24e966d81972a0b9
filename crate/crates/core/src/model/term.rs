use std::borrow::Borrow;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

/// Interned-by-refcount identifier. Cheap to clone, ordered by string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(Arc<str>);

impl Sym {
    pub fn new(s: &str) -> Self {
        Sym(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Names with this prefix are produced by the engine and rejected in user input.
    pub fn is_generated(&self) -> bool {
        self.0.starts_with(GENERATED_PREFIX)
    }
}

pub const GENERATED_PREFIX: &str = "?_";

impl Deref for Sym {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Sym {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Sym {
    fn from(s: &str) -> Self {
        Sym::new(s)
    }
}

impl From<String> for Sym {
    fn from(s: String) -> Self {
        Sym(Arc::from(s))
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Term {
    Var(Sym),
    Const(Sym),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Sym::new(name))
    }

    pub fn cst(name: &str) -> Self {
        Term::Const(Sym::new(name))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Sym> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn name(&self) -> &Sym {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

/// A constant prints bare when it lexes back as a constant, otherwise quoted.
pub fn const_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() || c.is_ascii_uppercase() => {}
        _ => return true,
    }
    !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => {
                if const_needs_quotes(c) {
                    f.write_str("\"")?;
                    for ch in c.chars() {
                        if ch == '"' || ch == '\\' {
                            f.write_str("\\")?;
                        }
                        write!(f, "{ch}")?;
                    }
                    f.write_str("\"")
                } else {
                    f.write_str(c)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting() {
        assert_eq!(Term::cst("150k").to_string(), "150k");
        assert_eq!(Term::cst("Lucy").to_string(), "Lucy");
        assert_eq!(Term::cst("lucy").to_string(), "\"lucy\"");
        assert_eq!(Term::cst("a b\"").to_string(), "\"a b\\\"\"");
        assert_eq!(Term::var("x").to_string(), "x");
    }

    #[test]
    fn generated_names() {
        assert!(Sym::new("?_e0").is_generated());
        assert!(!Sym::new("?x").is_generated());
    }
}
