mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::Shape;
use dmtl::analysis::{classify_predicates, relevant_rules, Recursion};
use dmtl::automata::{check_consistency, Budget};
use dmtl::engine::{decide, Config, Strategy};
use dmtl::materialise::{materialise, Materialiser, Mode, Options, Outcome};
use dmtl::syntax::{parse_dataset, parse_program};
use dmtl::{Dataset, Fact, Interval, Metric, Program, Sym, TimePoint};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() }
}

fn vertex(m: &Metric) -> Option<Sym> {
    m.atoms().first().map(|a| a.pred)
}

/// Recursive iff reachable from a vertex on a cycle, by transitive closure
/// over the rule edges.
fn recursive_by_closure(p: &Program) -> BTreeSet<Sym> {
    let mut reach: BTreeMap<Option<Sym>, BTreeSet<Option<Sym>>> = BTreeMap::new();
    let mut nodes = BTreeSet::new();
    for r in &p.rules {
        let h = vertex(&r.head);
        nodes.insert(h);
        for b in &r.body {
            for a in b.atoms() {
                nodes.insert(Some(a.pred));
                reach.entry(Some(a.pred)).or_default().insert(h);
            }
        }
    }
    loop {
        let mut changed = false;
        for n in &nodes {
            let next: Vec<Option<Sym>> = reach.get(n).into_iter().flatten().flat_map(|m| reach.get(m).cloned().unwrap_or_default()).collect();
            let e = reach.entry(*n).or_default();
            for m in next {
                changed |= e.insert(m);
            }
        }
        if !changed {
            break;
        }
    }
    let cyclic: Vec<Option<Sym>> = nodes.iter().copied().filter(|n| reach.get(n).is_some_and(|s| s.contains(n))).collect();
    nodes
        .iter()
        .filter_map(|n| {
            let hit = cyclic.iter().any(|c| c == n || reach.get(c).is_some_and(|s| s.contains(n)));
            if hit {
                *n
            } else {
                None
            }
        })
        .collect()
}

fn mirror_interval(i: &Interval) -> Interval {
    let neg = |t: &TimePoint| match t {
        TimePoint::Fin(x) => TimePoint::Fin(-x),
        TimePoint::PosInf => TimePoint::NegInf,
        TimePoint::NegInf => TimePoint::PosInf,
    };
    Interval::new(neg(i.hi()), i.hi_closed(), neg(i.lo()), i.lo_closed()).unwrap()
}

fn past_only(p: &Program) -> bool {
    p.rules.iter().all(|r| r.body.iter().all(Metric::is_past_only) && r.head.is_past_only())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn printing_then_parsing_is_identity(seed in any::<u64>()) {
        let (p, d) = common::instance(seed, &Shape::engines());
        prop_assert_eq!(parse_program(&p.to_string()).unwrap(), p);
        prop_assert_eq!(parse_dataset(&d.to_string()).unwrap(), d);
    }

    #[test]
    fn classification_matches_closure(seed in any::<u64>()) {
        let (p, _) = common::instance(seed, &Shape::engines());
        let got: BTreeSet<Sym> = classify_predicates(&p).into_iter().filter(|(_, c)| *c == Recursion::Recursive).map(|(s, _)| s).collect();
        prop_assert_eq!(got, recursive_by_closure(&p));
    }

    #[test]
    fn relevant_rules_are_a_closed_subset(seed in any::<u64>(), target in 0usize..4) {
        let (p, _) = common::instance(seed, &Shape { bottom: true, ..Shape::engines() });
        let t = Sym::new(&format!("P{target}"));
        let r = relevant_rules(&p, t);
        prop_assert!(r.rules.iter().all(|x| p.rules.contains(x)));
        prop_assert_eq!(relevant_rules(&r, t), r);
    }

    #[test]
    fn stores_grow_monotonically(seed in any::<u64>()) {
        let (p, d) = common::instance(seed, &Shape::engines());
        for mode in [Mode::Naive, Mode::Seminaive, Mode::Optimised] {
            let mut m = Materialiser::new(&p, &d, None, Options { max_steps: None, ..Options::mode(mode) });
            let mut before: Vec<Fact> = d.facts.clone();
            for _ in 0..6 {
                let o = m.step();
                prop_assert!(before.iter().all(|f| m.store().entails(f)));
                before = m.store().facts();
                if o != Outcome::Continue {
                    break;
                }
            }
        }
    }

    #[test]
    fn non_recursive_facts_complete_when_flag_flips(seed in any::<u64>()) {
        let (p, d) = common::instance(seed, &Shape::engines());
        let classes = classify_predicates(&p);
        let nonrec = |fs: Vec<Fact>| -> Vec<Fact> {
            fs.into_iter().filter(|f| classes.get(&f.atom.pred) != Some(&Recursion::Recursive)).collect()
        };
        let (o, reference) = materialise(&p, &d, None, Options { max_steps: Some(50), ..Options::mode(Mode::Naive) });
        let mut shorter = Materialiser::new(&p, &d, None, Options { max_steps: Some(45), ..Options::mode(Mode::Naive) });
        shorter.run();
        let stable = o != Outcome::Inconsistent && common::same_points(&nonrec(shorter.store().facts()), &nonrec(reference.facts()));
        prop_assume!(stable);
        let mut m = Materialiser::new(&p, &d, None, Options { max_steps: None, halt: true, ..Options::mode(Mode::Optimised) });
        for _ in 0..50 {
            if m.step() != Outcome::Continue {
                break;
            }
        }
        if m.flag() {
            prop_assert!(common::same_points(&nonrec(m.store().facts()), &nonrec(reference.facts())));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..config() })]

    #[test]
    fn mirrored_instances_agree(seed in any::<u64>()) {
        let (p, d) = common::instance(seed, &Shape::small());
        prop_assume!(past_only(&p));
        let mp = Program::new(p.rules.iter().map(|r| r.mirror()).collect());
        let md = Dataset::new(d.facts.iter().map(|f| Fact { atom: f.atom.clone(), interval: mirror_interval(&f.interval) }).collect());
        let a = check_consistency(&p, &d, Budget::default());
        let b = check_consistency(&mp, &md, Budget::default());
        prop_assert_eq!(a, b, "\n{}\n{}", p, d);
    }

    #[test]
    fn verdicts_do_not_depend_on_strategy_or_filtering(seed in any::<u64>()) {
        let shape = Shape::small();
        let (p, d) = common::instance(seed, &shape);
        let q = common::fact(&mut common::rng(seed ^ 0x5eed), &shape);
        let forced = Config { strategy: Strategy::Materialise(Mode::Seminaive), max_steps: Some(40), ..Config::default() };
        let Ok(want) = decide(&p, &d, &q, &forced) else { return Ok(()) };
        for cfg in [
            Config { strategy: Strategy::Automata, ..Config::default() },
            Config::default(),
            Config { relevance: false, ..Config::default() },
            Config { threads: 1, ..Config::default() },
        ] {
            let got = decide(&p, &d, &q, &cfg).unwrap();
            prop_assert_eq!(got.verdict.name(), want.verdict.name(), "{:?} {}\n{}\n{}", cfg.strategy, q, p, d);
        }
    }
}
