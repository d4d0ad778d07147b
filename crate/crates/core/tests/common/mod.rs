#![allow(dead_code)]

pub mod oracle;

use dmtl::temporal::{frac, int, Interval, Rational, TimePoint};
use dmtl::{Atom, BinOp, Dataset, Fact, GroundAtom, Metric, Program, Rule, Sym, Term, UnOp};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug)]
pub struct Shape {
    pub max_rules: usize,
    pub max_facts: usize,
    pub endpoints: Vec<Rational>,
    pub fact_points: Vec<Rational>,
    pub unbounded: bool,
    pub bottom: bool,
    pub max_depth: usize,
    pub predicates: usize,
    pub constants: usize,
}

impl Shape {
    /// Programs with at most five rules and ten facts over the endpoints
    /// 0, 1/2, 1 and 2.
    pub fn engines() -> Shape {
        Shape {
            max_rules: 5,
            max_facts: 10,
            endpoints: vec![int(0), frac(1, 2), int(1), int(2)],
            fact_points: vec![int(0), frac(1, 2), int(1), int(2), int(3)],
            unbounded: true,
            bottom: false,
            max_depth: 2,
            predicates: 4,
            constants: 2,
        }
    }

    /// At most three rules and five facts with endpoints in {0, 1, 2}.
    pub fn small() -> Shape {
        Shape {
            max_rules: 3,
            max_facts: 5,
            endpoints: vec![int(0), int(1), int(2)],
            fact_points: vec![int(0), int(1), int(2)],
            unbounded: true,
            bottom: true,
            max_depth: 2,
            predicates: 3,
            constants: 2,
        }
    }
}

fn pred(i: usize) -> Sym {
    Sym::new(&format!("P{i}"))
}

fn constant(i: usize) -> Sym {
    Sym::new(&format!("c{i}"))
}

pub fn range(rng: &mut impl Rng, shape: &Shape) -> Interval {
    loop {
        let a = shape.endpoints.choose(rng).unwrap().clone();
        let unbounded = shape.unbounded && rng.gen_bool(0.15);
        let hi = if unbounded {
            TimePoint::PosInf
        } else {
            TimePoint::Fin(shape.endpoints.choose(rng).unwrap().clone())
        };
        if let Some(r) = Interval::new(TimePoint::Fin(a), rng.gen_bool(0.7), hi, rng.gen_bool(0.7)) {
            return r;
        }
    }
}

fn atom(rng: &mut impl Rng, shape: &Shape) -> Atom {
    let arg = if rng.gen_bool(0.85) { Term::Var(Sym::new("X")) } else { Term::Const(constant(rng.gen_range(0..shape.constants))) };
    Atom { pred: pred(rng.gen_range(0..shape.predicates)), args: vec![arg] }
}

pub fn metric(rng: &mut impl Rng, shape: &Shape, depth: usize) -> Metric {
    if depth == 0 || rng.gen_bool(0.35) {
        return Metric::Atom(atom(rng, shape));
    }
    let r = range(rng, shape);
    match rng.gen_range(0..6) {
        0 => Metric::unary(UnOp::DiamondMinus, r, metric(rng, shape, depth - 1)),
        1 => Metric::unary(UnOp::DiamondPlus, r, metric(rng, shape, depth - 1)),
        2 => Metric::unary(UnOp::BoxMinus, r, metric(rng, shape, depth - 1)),
        3 => Metric::unary(UnOp::BoxPlus, r, metric(rng, shape, depth - 1)),
        4 => Metric::binary(BinOp::Since, r, metric(rng, shape, depth - 1), metric(rng, shape, depth - 1)),
        _ => Metric::binary(BinOp::Until, r, metric(rng, shape, depth - 1), metric(rng, shape, depth - 1)),
    }
}

/// Whether some atom outside SINCE/UNTIL left operands mentions `X`.
fn binds_x(m: &Metric) -> bool {
    let mut found = false;
    m.walk_atoms(
        &mut |a, left| {
            if !left && a.args.contains(&Term::Var(Sym::new("X"))) {
                found = true;
            }
        },
        false,
    );
    found
}

pub fn rule(rng: &mut impl Rng, shape: &Shape) -> Rule {
    loop {
        let n = rng.gen_range(1..=3);
        let body: Vec<Metric> = (0..n).map(|_| metric(rng, shape, shape.max_depth)).collect();
        if shape.bottom && rng.gen_bool(0.2) {
            return Rule { head: Metric::Bottom, body };
        }
        let bound = body.iter().any(binds_x);
        let mut head_atom = atom(rng, shape);
        if !bound {
            head_atom.args = vec![Term::Const(constant(rng.gen_range(0..shape.constants)))];
            if body.iter().any(|m| {
                let mut v = Vec::new();
                m.variables(&mut v);
                !v.is_empty()
            }) {
                continue;
            }
        }
        let head = match rng.gen_range(0..4) {
            0 => Metric::unary(UnOp::BoxPlus, bounded_range(rng, shape), Metric::Atom(head_atom)),
            1 => Metric::unary(UnOp::BoxMinus, bounded_range(rng, shape), Metric::Atom(head_atom)),
            _ => Metric::Atom(head_atom),
        };
        return Rule { head, body };
    }
}

fn bounded_range(rng: &mut impl Rng, shape: &Shape) -> Interval {
    let s = Shape { unbounded: false, ..shape.clone() };
    range(rng, &s)
}

pub fn program(rng: &mut impl Rng, shape: &Shape) -> Program {
    let n = rng.gen_range(1..=shape.max_rules);
    Program::new((0..n).map(|_| rule(rng, shape)).collect())
}

pub fn fact(rng: &mut impl Rng, shape: &Shape) -> Fact {
    loop {
        let a = shape.fact_points.choose(rng).unwrap().clone();
        let b = shape.fact_points.choose(rng).unwrap().clone();
        if let Some(i) = Interval::new(TimePoint::Fin(a), rng.gen_bool(0.7), TimePoint::Fin(b), rng.gen_bool(0.7)) {
            let atom = GroundAtom { pred: pred(rng.gen_range(0..shape.predicates)), args: vec![constant(rng.gen_range(0..shape.constants))] };
            return Fact { atom, interval: i };
        }
    }
}

pub fn dataset(rng: &mut impl Rng, shape: &Shape) -> Dataset {
    let n = rng.gen_range(1..=shape.max_facts);
    Dataset::new((0..n).map(|_| fact(rng, shape)).collect())
}

pub fn instance(seed: u64, shape: &Shape) -> (Program, Dataset) {
    let mut r = rng(seed);
    let p = program(&mut r, shape);
    let d = dataset(&mut r, shape);
    (p, d)
}

/// Point-set equality of two stores given as fact lists.
pub fn same_points(a: &[Fact], b: &[Fact]) -> bool {
    let norm = |fs: &[Fact]| {
        let mut by: std::collections::BTreeMap<GroundAtom, Vec<Interval>> = Default::default();
        for f in fs {
            by.entry(f.atom.clone()).or_default().push(f.interval.clone());
        }
        by.into_iter().map(|(k, v)| (k, dmtl::temporal::coalesce_all(v))).collect::<Vec<_>>()
    };
    norm(a) == norm(b)
}
