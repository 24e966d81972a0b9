use std::collections::BTreeSet;
use std::fmt;

use super::query::{write_atoms, Atom, ConjunctiveQuery, Fresh, Predicate, Substitution};
use super::term::{Sym, Term};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Head {
    Bot,
    Atoms(Vec<Atom>),
}

impl Head {
    pub fn atoms(&self) -> &[Atom] {
        match self {
            Head::Bot => &[],
            Head::Atoms(a) => a,
        }
    }

    pub fn is_bot(&self) -> bool {
        matches!(self, Head::Bot)
    }

    pub fn apply(&self, s: &Substitution) -> Head {
        match self {
            Head::Bot => Head::Bot,
            Head::Atoms(a) => Head::Atoms(s.apply_atoms(a)),
        }
    }
}

/// `∀x (K body → K head)`. `body.answer` is aligned with `universals`: a match
/// of the body binding `body.answer[i]` to `c` binds `universals[i]` to `c` in the head.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EpistemicDependency {
    pub universals: Vec<Sym>,
    pub body: ConjunctiveQuery,
    pub head: Head,
}

impl EpistemicDependency {
    pub fn new(universals: Vec<Sym>, body: Vec<Atom>, head: Head) -> Self {
        let body = ConjunctiveQuery::with_free(&universals, body);
        EpistemicDependency { universals, body, head }
    }

    pub fn is_denial(&self) -> bool {
        self.head.is_bot()
    }

    pub fn head_existentials(&self) -> BTreeSet<Sym> {
        self.head.atoms().iter().flat_map(|a| a.vars()).filter(|v| !self.universals.contains(v)).cloned().collect()
    }

    pub fn is_full(&self) -> bool {
        self.head_existentials().is_empty()
    }

    pub fn is_linear(&self) -> bool {
        self.body.atoms.len() == 1
    }

    pub fn body_predicates(&self) -> BTreeSet<Predicate> {
        self.body.predicates()
    }

    pub fn head_predicates(&self) -> BTreeSet<Predicate> {
        self.head.atoms().iter().map(|a| a.pred.clone()).collect()
    }

    /// Maps each universal variable to the body term it is bound through.
    pub fn answer_binding(&self) -> Substitution {
        Substitution::from_pairs(self.universals.iter().cloned().zip(self.body.answer.iter().cloned()))
    }

    /// Head instance for a body match `s` (defined on the body's variables).
    pub fn head_instance(&self, s: &Substitution) -> Head {
        let bind = Substitution::from_pairs(
            self.universals.iter().cloned().zip(self.body.answer.iter().map(|t| s.apply_term(t))),
        );
        self.head.apply(&bind)
    }

    /// Equivalent ED whose body answer is a list of distinct variables.
    pub fn normalized(&self) -> EpistemicDependency {
        if self.body.has_plain_answer() {
            let ren = Substitution::from_pairs(
                self.body
                    .answer
                    .iter()
                    .zip(&self.universals)
                    .filter(|(t, u)| t.as_var() != Some(*u))
                    .map(|(t, u)| (u.clone(), t.clone())),
            );
            return EpistemicDependency {
                universals: self.body.free_vars(),
                body: ConjunctiveQuery::with_free(&self.body.free_vars(), self.body.atoms.clone()),
                head: self.head.apply(&ren),
            };
        }
        let free = self.body.free_vars();
        EpistemicDependency {
            universals: free.clone(),
            body: ConjunctiveQuery::with_free(&free, self.body.atoms.clone()),
            head: self.head.apply(&self.answer_binding()),
        }
    }

    /// Renames every variable (universal and existential) with fresh names.
    pub fn rename_apart(&self, fresh: &mut Fresh, tag: &str) -> EpistemicDependency {
        let mut all: Vec<Sym> = self.universals.clone();
        for v in self.body.vars().into_iter().chain(self.head.atoms().iter().flat_map(|a| a.vars().cloned())) {
            if !all.contains(&v) {
                all.push(v);
            }
        }
        let ren = Substitution::from_pairs(all.into_iter().map(|v| (v, Term::Var(fresh.var(tag)))));
        EpistemicDependency {
            universals: self
                .universals
                .iter()
                .map(|u| ren.apply_term(&Term::Var(u.clone())).as_var().cloned().expect("variable"))
                .collect(),
            body: ConjunctiveQuery::new(
                self.body.answer.iter().map(|t| ren.apply_term(t)).collect(),
                ren.apply_atoms(&self.body.atoms),
            ),
            head: self.head.apply(&ren),
        }
    }
}

impl fmt::Display for EpistemicDependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ed = self.normalized();
        f.write_str("FORALL ")?;
        for (i, u) in ed.universals.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{u}")?;
        }
        f.write_str(": BODY ")?;
        write_atoms(f, &ed.body.atoms)?;
        f.write_str(" HEAD ")?;
        match &ed.head {
            Head::Bot => f.write_str("BOT"),
            Head::Atoms(a) => write_atoms(f, a),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Policy {
    pub eds: Vec<EpistemicDependency>,
}

impl Policy {
    pub fn new(eds: Vec<EpistemicDependency>) -> Self {
        Policy { eds }
    }

    pub fn len(&self) -> usize {
        self.eds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eds.is_empty()
    }

    /// The ⊥-free part.
    pub fn positive(&self) -> Policy {
        Policy { eds: self.eds.iter().filter(|e| !e.is_denial()).cloned().collect() }
    }

    pub fn predicates(&self) -> BTreeSet<Predicate> {
        self.eds.iter().flat_map(|e| e.body_predicates().into_iter().chain(e.head_predicates())).collect()
    }

    pub fn constants(&self) -> BTreeSet<Sym> {
        self.eds
            .iter()
            .flat_map(|e| e.body.atoms.iter().chain(e.head.atoms()).chain([]))
            .flat_map(|a| a.args.iter().filter_map(Term::as_const).cloned())
            .chain(self.eds.iter().flat_map(|e| e.body.answer.iter().filter_map(Term::as_const).cloned()))
            .collect()
    }

    /// Copy with every ED's variables renamed to fresh generated names.
    pub fn standardized_apart(&self, fresh: &mut Fresh) -> Policy {
        Policy { eds: self.eds.iter().map(|e| e.rename_apart(fresh, "t")).collect() }
    }

    pub fn max_body_len(&self) -> usize {
        self.eds.iter().map(|e| e.body.atoms.len()).max().unwrap_or(0)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.eds {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}
