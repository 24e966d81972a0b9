use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use crate::dllite::check_consistency;
use crate::error::CqeError;
use crate::eval::{check_safe_range, FoEvaluator};
use crate::iga::{iga_rewrite_expanded, IgaOptions, IgaReport};
use crate::model::{CqeInstance, Formula, Policy, Sym, UnionOfCqs};
use crate::tgd::policy_expand;

#[derive(Clone, Debug)]
pub struct Answer {
    pub tuples: BTreeSet<Vec<Sym>>,
    pub formula: Formula,
    pub report: IgaReport,
    /// Expansion plus rewriting.
    pub t_r: Duration,
    pub t_e: Duration,
}

impl Answer {
    /// Truth value for sentences.
    pub fn holds(&self) -> bool {
        !self.tuples.is_empty()
    }
}

/// IGA answers of `q` through the rewriting, evaluated in memory.
pub fn answer(inst: &CqeInstance, q: &UnionOfCqs, opts: IgaOptions) -> Result<Answer, CqeError> {
    let report = check_consistency(&inst.tbox, &inst.abox);
    if !report.is_consistent() {
        return Err(CqeError::Inconsistent(report.summary()));
    }
    let start = Instant::now();
    let pexp = policy_expand(&inst.tbox, &inst.policy)?;
    answer_expanded(inst, &pexp, q, opts, start)
}

/// As [`answer`] with a precomputed expansion; `start` marks when rewriting began.
pub fn answer_expanded(
    inst: &CqeInstance,
    pexp: &Policy,
    q: &UnionOfCqs,
    opts: IgaOptions,
    start: Instant,
) -> Result<Answer, CqeError> {
    let (formula, report) = iga_rewrite_expanded(q, &inst.tbox, &inst.policy, pexp, opts);
    check_safe_range(&formula)?;
    let t_r = start.elapsed();
    let start = Instant::now();
    let tuples = FoEvaluator::new(&inst.abox).answers(&formula, &q.free_vars())?;
    Ok(Answer { tuples, formula, report, t_r, t_e: start.elapsed() })
}
