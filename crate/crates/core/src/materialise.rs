//! Naive, semi-naive and optimised semi-naive materialisation.
//!
//! One call to [`Materialiser::step`] performs one round of rule
//! application over the current store, inserts the derived facts with
//! coalescing, and then checks, in this order, for a violated BOTTOM rule,
//! for the query fact, and for a fixpoint.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::analysis::{classify_predicates, is_recursive_metric, propagation_class, recursive_fragment, Propagation};
use crate::eval::{derive_head, Enumerator, Instance};
use crate::store::{FactStore, Insert};
use crate::symbol::Sym;
use crate::syntax::{Dataset, Fact, GroundAtom, Program};
use crate::temporal::{Interval, TimePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Naive,
    Seminaive,
    Optimised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Inconsistent,
    Entailed,
    Fixpoint,
    /// The step budget ran out without a verdict.
    Continue,
    /// The halting variant stopped once non-recursive predicates were
    /// fully materialised.
    Halted,
    Cancelled,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub mode: Mode,
    pub max_steps: Option<usize>,
    /// Allow the optimised mode to discard rules; turning this off leaves
    /// only the flag bookkeeping.
    pub drop_rules: bool,
    pub halt: bool,
    pub log_instances: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { mode: Mode::Optimised, max_steps: Some(10_000), drop_rules: true, halt: false, log_instances: false }
    }
}

impl Options {
    pub fn mode(mode: Mode) -> Options {
        Options { mode, ..Options::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DropReason {
    NonRecursive,
    Unsatisfiable,
    /// Materialisation was complete up to (forward) or from (backward)
    /// the given horizon.
    Horizon(TimePoint),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropEvent {
    pub rule: usize,
    /// Number of completed steps whose store certified the drop.
    pub certified_step: usize,
    pub reason: DropReason,
}

#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub instances: usize,
    pub inserted: usize,
    pub dropped: Vec<usize>,
    pub elapsed: Duration,
}

impl StepRecord {
    pub fn to_json(&self) -> String {
        let dropped: Vec<String> = self.dropped.iter().map(|d| d.to_string()).collect();
        format!(
            "{{\"step\":{},\"instances\":{},\"inserted\":{},\"dropped\":[{}],\"elapsed_us\":{}}}",
            self.step,
            self.instances,
            self.inserted,
            dropped.join(","),
            self.elapsed.as_micros()
        )
    }
}

type DeltaMap = HashMap<GroundAtom, Vec<Interval>>;

pub struct Materialiser {
    program: Program,
    opts: Options,
    query: Option<Fact>,
    universe: Vec<Sym>,
    bottom_rules: Vec<usize>,
    /// Indices of rules still in use (the current program).
    active: Vec<usize>,
    /// Per rule, indices of body atoms that are non-recursive.
    nonrec_atoms: Vec<Vec<usize>>,
    classes: BTreeMap<Sym, crate::analysis::Recursion>,
    store: FactStore,
    /// `None` until the first step, when the delta is the whole dataset.
    delta: Option<DeltaMap>,
    /// Intervals the atoms changed by the last step had before it.
    previous: DeltaMap,
    step: usize,
    flag: bool,
    cancel: Option<Arc<AtomicBool>>,
    pub trace: Vec<StepRecord>,
    pub drops: Vec<DropEvent>,
    pub horizons: BTreeMap<usize, TimePoint>,
    pub instance_log: Vec<Instance>,
    /// Total number of rule instances considered so far.
    pub instances_total: usize,
}

impl Materialiser {
    pub fn new(program: &Program, dataset: &Dataset, query: Option<Fact>, opts: Options) -> Materialiser {
        Self::from_store(program, FactStore::from_dataset(dataset), query, opts)
    }

    pub fn from_store(program: &Program, store: FactStore, query: Option<Fact>, opts: Options) -> Materialiser {
        let classes = classify_predicates(program);
        let mut universe: Vec<Sym> = program.constants().into_iter().collect();
        for p in store.predicates().collect::<Vec<_>>() {
            for (args, _) in store.atoms_of(p) {
                universe.extend_from_slice(args);
            }
        }
        universe.sort();
        universe.dedup();
        let nonrec_atoms = program
            .rules
            .iter()
            .map(|r| (0..r.body.len()).filter(|&k| !is_recursive_metric(&r.body[k], &classes)).collect())
            .collect();
        let bottom_rules = (0..program.rules.len()).filter(|&i| program.rules[i].is_bottom()).collect();
        let active = (0..program.rules.len()).filter(|&i| !program.rules[i].is_bottom()).collect();
        Materialiser {
            program: program.clone(),
            opts,
            query,
            universe,
            bottom_rules,
            active,
            nonrec_atoms,
            classes,
            store,
            delta: None,
            previous: HashMap::new(),
            step: 0,
            flag: false,
            cancel: None,
            trace: Vec::new(),
            drops: Vec::new(),
            horizons: BTreeMap::new(),
            instance_log: Vec::new(),
            instances_total: 0,
        }
    }

    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    pub fn store(&self) -> &FactStore {
        &self.store
    }

    pub fn into_store(self) -> FactStore {
        self.store
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    /// The rules still in use, as a program.
    pub fn current_program(&self) -> Program {
        let mut idx: Vec<usize> = self.active.clone();
        idx.extend(&self.bottom_rules);
        idx.sort();
        Program::new(idx.into_iter().map(|i| self.program.rules[i].clone()).collect())
    }

    pub fn active_rules(&self) -> &[usize] {
        &self.active
    }

    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed))
    }

    /// Runs steps until a terminal outcome or the step budget runs out.
    pub fn run(&mut self) -> Outcome {
        loop {
            if let Some(max) = self.opts.max_steps {
                if self.step >= max {
                    return Outcome::Continue;
                }
            }
            let o = self.step();
            if o != Outcome::Continue {
                return o;
            }
        }
    }

    pub fn step(&mut self) -> Outcome {
        let started = Instant::now();
        let enumerate_all = self.opts.mode == Mode::Naive || self.delta.is_none();
        let mut derived: Vec<Fact> = Vec::new();
        let mut count = 0;
        {
            let en = Enumerator::new(&self.store, &self.universe);
            for &i in &self.active {
                if self.cancelled() {
                    return Outcome::Cancelled;
                }
                let rule = &self.program.rules[i];
                let insts = if enumerate_all {
                    en.instances(i, rule)
                } else {
                    en.instances_relative(i, rule, &self.previous)
                };
                count += insts.len();
                for inst in &insts {
                    derived.extend(derive_head(&rule.head, &inst.subst, &inst.intersection()));
                }
                if self.opts.log_instances {
                    self.instance_log.extend(insts);
                }
            }
        }
        self.instances_total += count;

        self.store.start_journal();
        let mut fresh = Vec::new();
        let mut nonrec_changed = false;
        for f in derived {
            if self.store.insert_fact(&f) == Insert::AddedNewContent {
                nonrec_changed |= !self.classes_recursive(f.atom.pred);
                fresh.push(f);
            }
        }
        let journal = self.store.take_journal();
        let previous: DeltaMap = journal.entries(&self.store).map(|(a, l)| (a, l.to_vec())).collect();
        let mut delta: DeltaMap = HashMap::new();
        for f in &fresh {
            let list = self.store.get(f.atom.pred, &f.atom.args);
            let cover = list.iter().find(|i| i.contains(&f.interval)).expect("inserted fact is entailed").clone();
            let e = delta.entry(f.atom.clone()).or_default();
            if !e.contains(&cover) {
                e.push(cover);
            }
        }
        let first = self.delta.is_none();
        self.step += 1;
        let mut record = StepRecord {
            step: self.step,
            instances: count,
            inserted: fresh.len(),
            dropped: Vec::new(),
            elapsed: Duration::ZERO,
        };

        let violated = {
            let en = Enumerator::new(&self.store, &self.universe);
            self.bottom_rules.iter().any(|&i| {
                let r = &self.program.rules[i];
                if first {
                    !en.instances(i, r).is_empty()
                } else {
                    !delta.is_empty() && !en.instances_relative(i, r, &previous).is_empty()
                }
            })
        };
        let outcome = if violated {
            Some(Outcome::Inconsistent)
        } else if self.query.as_ref().is_some_and(|q| self.store.entails(q)) {
            Some(Outcome::Entailed)
        } else if delta.is_empty() {
            Some(Outcome::Fixpoint)
        } else {
            None
        };
        if let Some(o) = outcome {
            record.elapsed = started.elapsed();
            self.trace.push(record);
            self.delta = Some(delta);
            self.previous = previous;
            return o;
        }

        if self.opts.mode == Mode::Optimised {
            if !self.flag && !nonrec_changed {
                self.flag = true;
                self.flip(&mut record);
            }
            if self.flag && self.opts.drop_rules {
                self.drop_by_horizon(&delta, &previous, &mut record);
            }
        }
        record.elapsed = started.elapsed();
        self.trace.push(record);
        self.delta = Some(delta);
        self.previous = previous;
        if self.opts.halt && self.flag {
            self.store.rollback(journal);
            self.step -= 1;
            return Outcome::Halted;
        }
        Outcome::Continue
    }

    fn classes_recursive(&self, p: Sym) -> bool {
        self.classes.get(&p) == Some(&crate::analysis::Recursion::Recursive)
    }

    fn drop_rule(&mut self, i: usize, reason: DropReason, record: &mut StepRecord) {
        self.active.retain(|&r| r != i);
        record.dropped.push(i);
        self.drops.push(DropEvent { rule: i, certified_step: self.step - 1, reason });
    }

    /// All non-recursive predicates are complete: keep only the recursive
    /// fragment, minus rules with a non-recursive body atom that never holds.
    fn flip(&mut self, record: &mut StepRecord) {
        if !self.opts.drop_rules {
            return;
        }
        let keep = recursive_fragment(&self.program);
        for i in self.active.clone() {
            if !keep.contains(&i) {
                self.drop_rule(i, DropReason::NonRecursive, record);
            }
        }
        for i in self.active.clone() {
            let rule = &self.program.rules[i];
            let en = Enumerator::new(&self.store, &self.universe);
            if self.nonrec_atoms[i].iter().any(|&k| !en.satisfiable(&rule.body[k])) {
                self.drop_rule(i, DropReason::Unsatisfiable, record);
            }
        }
    }

    /// For forward-propagating programs, drop a rule once the store is
    /// complete up to the last time point at which its non-recursive body
    /// atoms can hold; mirrored for backward-propagating programs.
    fn drop_by_horizon(&mut self, delta: &DeltaMap, old: &DeltaMap, record: &mut StepRecord) {
        let direction = propagation_class(self.active.iter().map(|&i| &self.program.rules[i]));
        if direction == Propagation::Mixed {
            return;
        }
        let forward = direction == Propagation::Forward;
        for i in self.active.clone() {
            let rule = &self.program.rules[i];
            let en = Enumerator::new(&self.store, &self.universe);
            let mut horizon = if forward { TimePoint::PosInf } else { TimePoint::NegInf };
            for &k in &self.nonrec_atoms[i] {
                let ivs = en.all_intervals(&rule.body[k]);
                let t = if forward {
                    ivs.iter().map(|x| x.hi().clone()).max().unwrap_or(TimePoint::NegInf)
                } else {
                    ivs.iter().map(|x| x.lo().clone()).min().unwrap_or(TimePoint::PosInf)
                };
                horizon = if forward { horizon.min(t) } else { horizon.max(t) };
            }
            self.horizons.insert(i, horizon.clone());
            if horizon == TimePoint::PosInf && forward || horizon == TimePoint::NegInf && !forward {
                continue;
            }
            let complete = delta.iter().all(|(atom, ivs)| {
                ivs.iter().all(|k| {
                    let part = if forward { k.up_to(&horizon) } else { k.from(&horizon) };
                    match part {
                        None => true,
                        Some(p) => old.get(atom).is_some_and(|l| l.iter().any(|o| o.contains(&p))),
                    }
                })
            });
            if complete {
                self.drop_rule(i, DropReason::Horizon(horizon), record);
            }
        }
    }

    pub fn trace_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.trace {
            let _ = writeln!(s, "{}", r.to_json());
        }
        s
    }
}

/// Convenience wrapper: materialise in the given mode.
pub fn materialise(program: &Program, dataset: &Dataset, query: Option<Fact>, opts: Options) -> (Outcome, FactStore) {
    let mut m = Materialiser::new(program, dataset, query, opts);
    let o = m.run();
    (o, m.into_store())
}

/// The halting variant: optimised materialisation that stops as soon as
/// all non-recursive predicates are complete, returning the reduced
/// program with the store reached before that final step.
pub fn materialise_halt(program: &Program, dataset: &Dataset, query: Option<Fact>) -> (Outcome, Program, FactStore) {
    let opts = Options { halt: true, max_steps: None, ..Options::default() };
    let mut m = Materialiser::new(program, dataset, query, opts);
    let o = m.run();
    let p = m.current_program();
    (o, p, m.into_store())
}

/// Evaluates every BOTTOM rule against the store; returns the first one
/// with an instance.
pub fn check_bottom_rules(program: &Program, store: &FactStore) -> Option<usize> {
    let mut universe: Vec<Sym> = program.constants().into_iter().collect();
    for p in store.predicates().collect::<Vec<_>>() {
        for (args, _) in store.atoms_of(p) {
            universe.extend_from_slice(args);
        }
    }
    universe.sort();
    universe.dedup();
    let en = Enumerator::new(store, &universe);
    (0..program.rules.len()).find(|&i| program.rules[i].is_bottom() && !en.instances(i, &program.rules[i]).is_empty())
}
