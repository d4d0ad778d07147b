//! Decision procedure for consistency via window-state Büchi automata, and
//! the reduction of fact entailment to inconsistency.
//!
//! A model is described cell by cell over the discretised timeline. The
//! initial window covers the dataset; a right-moving and a left-moving
//! automaton extend it forever in either direction. The program is
//! consistent with the dataset iff some initial window admits an accepting
//! run of both automata.

pub mod discretise;
pub mod formula;
pub mod search;

use std::collections::BTreeSet;

use num_traits::One;

use crate::symbol::Sym;
use crate::syntax::{Atom, Dataset, Fact, GroundAtom, Metric, Program, Rule, Term, UnOp};
use crate::temporal::{int, Interval, Rational, TimePoint};

pub use discretise::Discretisation;
pub use formula::Compiled;
pub use search::{AutomataError, Budget, Label, Search, Window};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ReduceError {
    #[error("the query interval is empty")]
    Empty,
}

/// The point of the query interval the auxiliary fact is placed at.
pub fn reduction_point(r: &Interval) -> Rational {
    match (r.lo(), r.hi()) {
        (TimePoint::Fin(a), _) if r.lo_closed() => a.clone(),
        (TimePoint::Fin(a), TimePoint::Fin(b)) => (a + b) / int(2),
        (TimePoint::Fin(a), _) => a + Rational::one(),
        (_, TimePoint::Fin(b)) if r.hi_closed() => b.clone(),
        (_, TimePoint::Fin(b)) => b - Rational::one(),
        _ => int(0),
    }
}

/// The ranges looking back from `t` to the start of `r` and ahead to its
/// end, with the brackets of `r`.
pub fn reduction_ranges(r: &Interval, t: &Rational) -> (Interval, Interval) {
    let back = match r.lo() {
        TimePoint::Fin(a) => Interval::new(TimePoint::Fin(int(0)), true, TimePoint::Fin(t - a), r.lo_closed()),
        _ => Interval::new(TimePoint::Fin(int(0)), true, TimePoint::PosInf, false),
    };
    let ahead = match r.hi() {
        TimePoint::Fin(b) => Interval::new(TimePoint::Fin(int(0)), true, TimePoint::Fin(b - t), r.hi_closed()),
        _ => Interval::new(TimePoint::Fin(int(0)), true, TimePoint::PosInf, false),
    };
    (back.expect("t lies in the query interval"), ahead.expect("t lies in the query interval"))
}

/// Adds a fresh predicate marking one point of the query interval and a
/// BOTTOM rule firing when the query holds throughout the interval around
/// that mark: the fact is entailed iff the result is inconsistent.
pub fn reduce_entailment(program: &Program, dataset: &Dataset, fact: &Fact) -> Result<(Program, Dataset), ReduceError> {
    let r = &fact.interval;
    let t = reduction_point(r);
    if !r.contains_point(&t) {
        return Err(ReduceError::Empty);
    }
    let (back, ahead) = reduction_ranges(r, &t);
    let mut taken: BTreeSet<Sym> = program.predicates();
    taken.extend(dataset.predicates());
    let mut name = format!("{}_query", fact.atom.pred);
    while taken.contains(&Sym::new(&name)) {
        name.push('_');
    }
    let mark = Sym::new(&name);
    let vars: Vec<Term> = (0..fact.atom.args.len()).map(|i| Term::Var(Sym::new(&format!("X{i}")))).collect();
    let query = Metric::Atom(Atom { pred: fact.atom.pred, args: vars.clone() });
    let rule = Rule {
        head: Metric::Bottom,
        body: vec![
            Metric::Atom(Atom { pred: mark, args: vars }),
            Metric::unary(UnOp::BoxMinus, back, query.clone()),
            Metric::unary(UnOp::BoxPlus, ahead, query),
        ],
    };
    let mut p = program.clone();
    p.rules.push(rule);
    let mut d = dataset.clone();
    d.facts.push(Fact { atom: GroundAtom { pred: mark, args: fact.atom.args.clone() }, interval: Interval::point(t) });
    Ok((p, d))
}

#[derive(Clone, Debug)]
pub struct Report {
    pub result: Result<bool, AutomataError>,
    pub states: usize,
    pub window: usize,
    pub dump: Option<String>,
}

pub fn check_consistency_report(program: &Program, dataset: &Dataset, budget: Budget, dump: bool) -> Report {
    let compiled = Compiled::new(program, dataset);
    let mut search = Search::new(&compiled, budget, dump);
    let result = search.consistent();
    Report { result, states: search.states, window: search.width, dump: search.take_dump() }
}

pub fn check_consistency(program: &Program, dataset: &Dataset, budget: Budget) -> Result<bool, AutomataError> {
    check_consistency_report(program, dataset, budget, false).result
}

/// Entailment through the reduction; errors from the reduction itself
/// cannot occur for non-empty intervals.
pub fn entails(program: &Program, dataset: &Dataset, fact: &Fact, budget: Budget) -> Result<bool, AutomataError> {
    let (p, d) = reduce_entailment(program, dataset, fact).expect("intervals are non-empty");
    check_consistency(&p, &d, budget).map(|c| !c)
}
