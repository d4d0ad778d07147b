//! The combined decision procedure: relevance filtering, pre-materialisation
//! that halts once non-recursive predicates are complete, then a race
//! between unbounded optimised materialisation and the automata backstop.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use parking_lot::Mutex;

use crate::analysis::relevant_rules;
use crate::automata::{self, AutomataError, Budget};
use crate::materialise::{Materialiser, Mode, Options, Outcome};
use crate::store::FactStore;
use crate::syntax::{Dataset, Fact, Program};

/// Stack size for threads running the automata search, whose initial
/// window is built recursively.
const AUTOMATA_STACK: usize = 256 << 20;
const MATERIALISE_STACK: usize = 16 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Pre-materialisation, then the race.
    Auto,
    /// Materialisation alone in the given mode.
    Materialise(Mode),
    /// The automata procedure alone.
    Automata,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub strategy: Strategy,
    /// Step budget for every materialisation run; `None` runs until a
    /// verdict (the racing thread is then stopped only by cancellation).
    pub max_steps: Option<usize>,
    /// Step budget for materialisation in the single-threaded fallback
    /// when `max_steps` is unbounded.
    pub fallback_steps: usize,
    /// Cap on pre-materialisation: non-recursive predicates that depend on
    /// diverging recursive ones never become complete, and the race must
    /// still start.
    pub pre_steps: usize,
    pub max_states: usize,
    pub max_time: Option<Duration>,
    /// 2 races the two procedures; 1 runs them one after the other.
    pub threads: usize,
    /// Restrict the program to rules relevant to the query predicate.
    pub relevance: bool,
    pub registry: Option<Arc<TaskRegistry>>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            strategy: Strategy::Auto,
            max_steps: None,
            fallback_steps: 1000,
            pre_steps: 100,
            max_states: Budget::default().max_states,
            max_time: None,
            threads: 2,
            relevance: true,
            registry: None,
        }
    }
}

impl Config {
    fn budget(&self, cancel: Option<Arc<AtomicBool>>) -> Budget {
        Budget { max_states: self.max_states, max_time: self.max_time, cancel }
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Inconsistent,
    Entailed(FactStore),
    NotEntailed(FactStore),
    /// Answer of a plain consistency check.
    Consistent(FactStore),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Inconsistent => "inconsistent",
            Verdict::Entailed(_) => "entailed",
            Verdict::NotEntailed(_) => "notEntailed",
            Verdict::Consistent(_) => "consistent",
        }
    }

    pub fn store(&self) -> Option<&FactStore> {
        match self {
            Verdict::Inconsistent => None,
            Verdict::Entailed(s) | Verdict::NotEntailed(s) | Verdict::Consistent(s) => Some(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    PreMaterialisation,
    MaterialisationThread,
    AutomataThread,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PreMaterialisation => "pre-materialisation",
            Provenance::MaterialisationThread => "materialisation-thread",
            Provenance::AutomataThread => "automata-thread",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub verdict: Verdict,
    pub provenance: Provenance,
    /// Materialisation steps behind the store, pre-materialisation included.
    pub steps: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("budget exceeded after {steps} materialisation steps")]
    Budget { store: Box<FactStore>, steps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskState {
    Running,
    Finished,
    Cancelled,
}

#[derive(Clone, Debug)]
pub struct TaskEntry {
    pub name: &'static str,
    pub state: TaskState,
    pub started: Instant,
    pub stopped: Option<Instant>,
}

/// Records every task the engine starts and how it ended, so callers can
/// observe that losers of a race really stop.
#[derive(Debug, Default)]
pub struct TaskRegistry {
    tasks: Mutex<Vec<TaskEntry>>,
}

impl TaskRegistry {
    pub fn new() -> Arc<TaskRegistry> {
        Arc::new(TaskRegistry::default())
    }

    fn start(&self, name: &'static str) -> usize {
        let mut t = self.tasks.lock();
        t.push(TaskEntry { name, state: TaskState::Running, started: Instant::now(), stopped: None });
        t.len() - 1
    }

    fn stop(&self, id: usize, state: TaskState) {
        let mut t = self.tasks.lock();
        t[id].state = state;
        t[id].stopped = Some(Instant::now());
    }

    pub fn entries(&self) -> Vec<TaskEntry> {
        self.tasks.lock().clone()
    }

    pub fn running(&self) -> usize {
        self.tasks.lock().iter().filter(|t| t.state == TaskState::Running).count()
    }
}

enum Failure {
    /// Out of budget; materialisation hands back its partial store.
    Budget(Option<(FactStore, usize)>),
    Cancelled,
}

type TaskResult = Result<Decision, Failure>;
type Task = Box<dyn FnOnce(Arc<AtomicBool>) -> TaskResult + Send>;

/// Runs the tasks concurrently; the first decision wins and the others are
/// cancelled and joined before returning.
fn race(tasks: Vec<(&'static str, usize, Task)>, registry: &Arc<TaskRegistry>) -> Result<Decision, Failure> {
    let (tx, rx) = mpsc::channel();
    let mut handles = Vec::new();
    let mut flags = Vec::new();
    for (i, (name, stack, task)) in tasks.into_iter().enumerate() {
        let cancel = Arc::new(AtomicBool::new(false));
        flags.push(cancel.clone());
        let id = registry.start(name);
        let reg = registry.clone();
        let tx = tx.clone();
        let h = thread::Builder::new()
            .name(name.to_string())
            .stack_size(stack)
            .spawn(move || {
                let r = task(cancel);
                reg.stop(id, if matches!(r, Err(Failure::Cancelled)) { TaskState::Cancelled } else { TaskState::Finished });
                let _ = tx.send((i, r));
            })
            .expect("spawn task");
        handles.push(h);
    }
    drop(tx);
    let mut partial = None;
    let mut result = Err(Failure::Budget(None));
    for (_, r) in rx.iter() {
        match r {
            Ok(d) => {
                result = Ok(d);
                break;
            }
            Err(Failure::Budget(Some(s))) => partial = Some(s),
            Err(_) => {}
        }
    }
    for f in &flags {
        f.store(true, Ordering::Relaxed);
    }
    for h in handles {
        let _ = h.join();
    }
    result.map_err(|_| Failure::Budget(partial))
}

fn materialise_task(program: Program, store: FactStore, query: Option<Fact>, mode: Mode, max_steps: Option<usize>, done: usize) -> Task {
    Box::new(move |cancel| {
        let opts = Options { max_steps, ..Options::mode(mode) };
        let mut m = Materialiser::from_store(&program, store, query.clone(), opts).with_cancel(cancel);
        let o = m.run();
        let steps = done + m.steps();
        let store = m.into_store();
        match o {
            Outcome::Inconsistent => Ok(Decision { verdict: Verdict::Inconsistent, provenance: Provenance::MaterialisationThread, steps }),
            Outcome::Entailed => Ok(Decision { verdict: Verdict::Entailed(store), provenance: Provenance::MaterialisationThread, steps }),
            Outcome::Fixpoint if query.is_none() => {
                Ok(Decision { verdict: Verdict::Consistent(store), provenance: Provenance::MaterialisationThread, steps })
            }
            Outcome::Fixpoint => Ok(Decision { verdict: Verdict::NotEntailed(store), provenance: Provenance::MaterialisationThread, steps }),
            Outcome::Cancelled => Err(Failure::Cancelled),
            Outcome::Continue | Outcome::Halted => Err(Failure::Budget(Some((store, steps)))),
        }
    })
}

/// Entailment through the reduction to inconsistency. An inconsistent
/// reduced instance means entailment unless the input itself is
/// inconsistent, which a second check tells apart.
fn automata_task(program: Program, store: FactStore, fact: Fact, budget: Budget, steps: usize) -> Task {
    Box::new(move |cancel| {
        let budget = Budget { cancel: Some(cancel), ..budget };
        let dataset = store.to_dataset();
        let fail = |e: AutomataError| match e {
            AutomataError::Budget { .. } => Failure::Budget(None),
            AutomataError::Cancelled => Failure::Cancelled,
        };
        let decision = |verdict| Decision { verdict, provenance: Provenance::AutomataThread, steps };
        let (p, d) = automata::reduce_entailment(&program, &dataset, &fact).expect("intervals are non-empty");
        if automata::check_consistency(&p, &d, budget.clone()).map_err(fail)? {
            return Ok(decision(Verdict::NotEntailed(store)));
        }
        if automata::check_consistency(&program, &dataset, budget).map_err(fail)? {
            Ok(decision(Verdict::Entailed(store)))
        } else {
            Ok(decision(Verdict::Inconsistent))
        }
    })
}

fn consistency_task(program: Program, store: FactStore, budget: Budget, steps: usize) -> Task {
    Box::new(move |cancel| {
        let budget = Budget { cancel: Some(cancel), ..budget };
        match automata::check_consistency(&program, &store.to_dataset(), budget) {
            Ok(true) => Ok(Decision { verdict: Verdict::Consistent(store), provenance: Provenance::AutomataThread, steps }),
            Ok(false) => Ok(Decision { verdict: Verdict::Inconsistent, provenance: Provenance::AutomataThread, steps }),
            Err(AutomataError::Budget { .. }) => Err(Failure::Budget(None)),
            Err(AutomataError::Cancelled) => Err(Failure::Cancelled),
        }
    })
}

/// Runs tasks one after the other on the calling thread's behalf (each on
/// its own thread for the stack size), stopping at the first decision.
fn sequence(tasks: Vec<(&'static str, usize, Task)>, registry: &Arc<TaskRegistry>) -> Result<Decision, Failure> {
    let mut partial = None;
    for t in tasks {
        match race(vec![t], registry) {
            Ok(d) => return Ok(d),
            Err(Failure::Budget(Some(s))) => partial = Some(s),
            Err(_) => {}
        }
    }
    Err(Failure::Budget(partial))
}

fn finish(r: Result<Decision, Failure>, fallback: (FactStore, usize)) -> Result<Decision, EngineError> {
    r.map_err(|f| {
        let (store, steps) = match f {
            Failure::Budget(Some(s)) => s,
            _ => fallback,
        };
        EngineError::Budget { store: Box::new(store), steps }
    })
}

/// Decides whether `fact` is entailed by `program` and `dataset`.
pub fn decide(program: &Program, dataset: &Dataset, fact: &Fact, cfg: &Config) -> Result<Decision, EngineError> {
    let registry = cfg.registry.clone().unwrap_or_default();
    let program = if cfg.relevance { relevant_rules(program, fact.atom.pred) } else { program.clone() };
    let dataset = if cfg.relevance { restrict(&program, dataset, fact) } else { dataset.clone() };

    match cfg.strategy {
        Strategy::Materialise(mode) => {
            let task = materialise_task(program, FactStore::from_dataset(&dataset), Some(fact.clone()), mode, cfg.max_steps, 0);
            let r = race(vec![("materialisation", MATERIALISE_STACK, task)], &registry);
            return finish(r, (FactStore::from_dataset(&dataset), 0));
        }
        Strategy::Automata => {
            let task = automata_task(program, FactStore::from_dataset(&dataset), fact.clone(), cfg.budget(None), 0);
            let r = race(vec![("automata", AUTOMATA_STACK, task)], &registry);
            return finish(r, (FactStore::from_dataset(&dataset), 0));
        }
        Strategy::Auto => {}
    }

    let cap = cfg.max_steps.map_or(cfg.pre_steps, |m| m.min(cfg.pre_steps));
    let opts = Options { halt: true, max_steps: Some(cap), ..Options::default() };
    let mut pre = Materialiser::new(&program, &dataset, Some(fact.clone()), opts);
    let outcome = pre.run();
    let steps = pre.steps();
    let reduced = pre.current_program();
    let store = pre.into_store();
    let decided = |verdict| Ok(Decision { verdict, provenance: Provenance::PreMaterialisation, steps });
    match outcome {
        Outcome::Inconsistent => return decided(Verdict::Inconsistent),
        Outcome::Entailed => return decided(Verdict::Entailed(store)),
        Outcome::Fixpoint => return decided(Verdict::NotEntailed(store)),
        Outcome::Cancelled => unreachable!("pre-materialisation has no cancel flag"),
        Outcome::Halted | Outcome::Continue => {}
    }

    let remaining = cfg.max_steps.map(|m| m.saturating_sub(steps));
    let mat_steps = if cfg.threads < 2 { Some(remaining.unwrap_or(cfg.fallback_steps)) } else { remaining };
    let tasks: Vec<(&'static str, usize, Task)> = vec![
        ("materialisation", MATERIALISE_STACK, materialise_task(reduced.clone(), store.clone(), Some(fact.clone()), Mode::Optimised, mat_steps, steps)),
        ("automata", AUTOMATA_STACK, automata_task(reduced, store.clone(), fact.clone(), cfg.budget(None), steps)),
    ];
    let r = if cfg.threads < 2 { sequence(tasks, &registry) } else { race(tasks, &registry) };
    finish(r, (store, steps))
}

/// Decides consistency, racing materialisation without a query against
/// the automata check.
pub fn consistency(program: &Program, dataset: &Dataset, cfg: &Config) -> Result<Decision, EngineError> {
    let registry = cfg.registry.clone().unwrap_or_default();
    let store = FactStore::from_dataset(dataset);
    let mat = |mode, steps| materialise_task(program.clone(), store.clone(), None, mode, steps, 0);
    let auto = || consistency_task(program.clone(), store.clone(), cfg.budget(None), 0);
    let r = match cfg.strategy {
        Strategy::Materialise(mode) => race(vec![("materialisation", MATERIALISE_STACK, mat(mode, cfg.max_steps))], &registry),
        Strategy::Automata => race(vec![("automata", AUTOMATA_STACK, auto())], &registry),
        Strategy::Auto if cfg.threads < 2 => sequence(
            vec![
                ("materialisation", MATERIALISE_STACK, mat(Mode::Optimised, Some(cfg.max_steps.unwrap_or(cfg.fallback_steps)))),
                ("automata", AUTOMATA_STACK, auto()),
            ],
            &registry,
        ),
        Strategy::Auto => race(
            vec![("materialisation", MATERIALISE_STACK, mat(Mode::Optimised, cfg.max_steps)), ("automata", AUTOMATA_STACK, auto())],
            &registry,
        ),
    };
    finish(r, (store.clone(), 0))
}

/// Facts over the predicates of the (filtered) program, plus those of the
/// query predicate, which may hold in the data without being derived.
pub fn restrict(program: &Program, dataset: &Dataset, fact: &Fact) -> Dataset {
    let mut preds = program.predicates();
    preds.insert(fact.atom.pred);
    Dataset::new(dataset.facts.iter().filter(|f| preds.contains(&f.atom.pred)).cloned().collect())
}
