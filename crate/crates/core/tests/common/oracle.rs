//! Brute-force pointwise evaluation of a ground metric atom over a set of
//! facts. The timeline is cut at every multiple of the gcd of all numbers
//! in the facts and the atom; each operator is evaluated by its definition
//! on a representative point of every cell, quantifying over sample points
//! a quarter of the gcd apart.

use std::collections::HashMap;

use dmtl::temporal::{coalesce_all, gcd_rational, int, Interval, Rational, TimePoint};
use dmtl::{BinOp, Fact, GroundAtom, Metric, Term, UnOp};
use num_traits::{Signed, ToPrimitive, Zero};

enum Node {
    Top,
    Bottom,
    Atom(GroundAtom),
    Un(UnOp, Interval, usize),
    Bin(BinOp, Interval, usize, usize),
}

pub struct Oracle<'a> {
    d: Rational,
    facts: &'a [Fact],
    nodes: Vec<Node>,
    lo: i64,
    hi: i64,
    memo: HashMap<(usize, i64), bool>,
}

fn flatten(m: &Metric, nodes: &mut Vec<Node>) -> usize {
    let n = match m {
        Metric::Top => Node::Top,
        Metric::Bottom => Node::Bottom,
        Metric::Atom(a) => Node::Atom(GroundAtom {
            pred: a.pred,
            args: a
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => *c,
                    Term::Var(_) => panic!("oracle needs ground atoms"),
                })
                .collect(),
        }),
        Metric::Unary(op, r, inner) => {
            let c = flatten(inner, nodes);
            Node::Un(*op, r.clone(), c)
        }
        Metric::Binary(op, r, l, rr) => {
            let a = flatten(l, nodes);
            let b = flatten(rr, nodes);
            Node::Bin(*op, r.clone(), a, b)
        }
    };
    nodes.push(n);
    nodes.len() - 1
}

fn finite(t: &TimePoint) -> Option<&Rational> {
    match t {
        TimePoint::Fin(x) => Some(x),
        _ => None,
    }
}

impl<'a> Oracle<'a> {
    pub fn new(facts: &'a [Fact], m: &Metric) -> Oracle<'a> {
        let mut nodes = Vec::new();
        flatten(m, &mut nodes);
        let mut d = Rational::zero();
        let mut span = Rational::zero();
        let mut points: Vec<Rational> = Vec::new();
        let add = |d: &mut Rational, x: &Rational| {
            if !x.is_zero() {
                *d = gcd_rational(d, x);
            }
        };
        for n in &nodes {
            if let Node::Un(_, r, _) | Node::Bin(_, r, _, _) = n {
                for t in [r.lo(), r.hi()] {
                    if let Some(x) = finite(t) {
                        add(&mut d, x);
                        span += x;
                    }
                }
            }
        }
        for f in facts {
            for t in [f.interval.lo(), f.interval.hi()] {
                if let Some(x) = finite(t) {
                    add(&mut d, &x.abs());
                    points.push(x.clone());
                }
            }
        }
        if d.is_zero() {
            d = int(1);
        }
        let min = points.iter().min().cloned().unwrap_or_else(Rational::zero);
        let max = points.iter().max().cloned().unwrap_or_else(Rational::zero);
        let margin = &span * int(2) + int(2);
        let lo = 2 * ((min - &margin) / &d).floor().to_integer().to_i64().unwrap();
        let hi = 2 * ((max + &margin) / &d).ceil().to_integer().to_i64().unwrap();
        Oracle { d, facts, nodes, lo, hi, memo: HashMap::new() }
    }

    fn cell(&self, c: i64) -> Interval {
        let k = c.div_euclid(2);
        let a = Rational::from_integer(k.into()) * &self.d;
        if c.rem_euclid(2) == 0 {
            Interval::point(a)
        } else {
            Interval::new(TimePoint::Fin(a.clone()), false, TimePoint::Fin(a + &self.d), false).unwrap()
        }
    }

    fn rep(&self, c: i64) -> Rational {
        Rational::new(c.into(), 2.into()) * &self.d
    }

    fn cell_of(&self, t: &Rational) -> i64 {
        let q = t / &self.d;
        if q.is_integer() {
            2 * q.to_integer().to_i64().unwrap()
        } else {
            2 * q.floor().to_integer().to_i64().unwrap() + 1
        }
    }

    /// Cells meeting `i`, with infinite sides cut at the horizon, or just
    /// past the finite end when that already lies beyond the horizon.
    fn cells_meeting(&self, i: &Interval) -> Vec<i64> {
        let a = finite(i.lo()).map(|x| self.cell_of(x));
        let b = finite(i.hi()).map(|x| self.cell_of(x));
        let a = a.unwrap_or_else(|| self.lo.min(b.unwrap_or(self.lo) - 2));
        let b = b.unwrap_or_else(|| self.hi.max(a + 2));
        (a..=b).filter(|&c| self.cell(c).intersect(i).is_some()).collect()
    }

    /// Sample points of `i` a quarter of the gcd apart, with infinite sides
    /// cut at the horizon.
    fn samples(&self, i: &Interval) -> Vec<Rational> {
        let q = &self.d / int(4);
        let lo_t = Rational::new(self.lo.into(), 2.into()) * &self.d;
        let hi_t = Rational::new(self.hi.into(), 2.into()) * &self.d;
        let a = finite(i.lo()).cloned();
        let b = finite(i.hi()).cloned();
        let a = a.unwrap_or_else(|| b.as_ref().map_or(lo_t.clone(), |b| (b - &self.d).min(lo_t.clone())));
        let b = b.unwrap_or_else(|| (&a + &self.d).max(hi_t));
        let mut k = (&a / &q).ceil();
        let mut out = Vec::new();
        loop {
            let t = &k * &q;
            if t > b {
                break;
            }
            if i.contains_point(&t) {
                out.push(t);
            }
            k += int(1);
        }
        out
    }

    fn window(&self, t: &Rational, r: &Interval, past: bool) -> Interval {
        let neg = |x: &TimePoint| match x {
            TimePoint::Fin(v) => TimePoint::Fin(t - v),
            TimePoint::PosInf => TimePoint::NegInf,
            TimePoint::NegInf => TimePoint::PosInf,
        };
        let pos = |x: &TimePoint| match x {
            TimePoint::Fin(v) => TimePoint::Fin(t + v),
            other => other.clone(),
        };
        if past {
            Interval::new(neg(r.hi()), r.hi_closed(), neg(r.lo()), r.lo_closed()).unwrap()
        } else {
            Interval::new(pos(r.lo()), r.lo_closed(), pos(r.hi()), r.hi_closed()).unwrap()
        }
    }

    fn all_on(&mut self, n: usize, between: Option<Interval>) -> bool {
        match between {
            None => true,
            Some(g) => self.cells_meeting(&g).into_iter().all(|c| self.holds(n, c)),
        }
    }

    pub fn holds(&mut self, n: usize, c: i64) -> bool {
        if let Some(&v) = self.memo.get(&(n, c)) {
            return v;
        }
        let t = self.rep(c);
        let v = match &self.nodes[n] {
            Node::Top => true,
            Node::Bottom => false,
            Node::Atom(a) => self.facts.iter().any(|f| f.atom == *a && f.interval.contains_point(&t)),
            Node::Un(op, r, inner) => {
                let (op, r, inner) = (*op, r.clone(), *inner);
                let w = self.window(&t, &r, op.is_past());
                let cells = self.cells_meeting(&w);
                match op {
                    UnOp::DiamondMinus | UnOp::DiamondPlus => cells.into_iter().any(|x| self.holds(inner, x)),
                    _ => cells.into_iter().all(|x| self.holds(inner, x)),
                }
            }
            Node::Bin(op, r, a, b) => {
                let (op, r, a, b) = (*op, r.clone(), *a, *b);
                let past = op == BinOp::Since;
                let w = self.window(&t, &r, past);
                let mut found = false;
                for s in self.samples(&w) {
                    if !self.holds(b, self.cell_of(&s)) {
                        continue;
                    }
                    let gap = if past {
                        Interval::new(TimePoint::Fin(s.clone()), false, TimePoint::Fin(t.clone()), false)
                    } else {
                        Interval::new(TimePoint::Fin(t.clone()), false, TimePoint::Fin(s.clone()), false)
                    };
                    if self.all_on(a, gap) {
                        found = true;
                        break;
                    }
                }
                found
            }
        };
        self.memo.insert((n, c), v);
        v
    }

    /// The interval of time the oracle answers for, away from the horizon.
    pub fn scope(&self) -> Interval {
        let quarter = (self.hi - self.lo) / 4;
        let a = self.lo + quarter;
        let b = self.hi - quarter;
        Interval::closed(self.rep(a - a.rem_euclid(2)), self.rep(b - b.rem_euclid(2))).unwrap()
    }

    /// Maximal intervals, within the scope, on which the atom holds.
    pub fn evaluate(&mut self) -> Vec<Interval> {
        let root = self.nodes.len() - 1;
        let scope = self.scope();
        let cells = self.cells_meeting(&scope);
        let mut out = Vec::new();
        for c in cells {
            if self.holds(root, c) {
                out.push(self.cell(c));
            }
        }
        coalesce_all(out)
    }
}

pub fn clip(list: &[Interval], scope: &Interval) -> Vec<Interval> {
    coalesce_all(list.iter().filter_map(|i| i.intersect(scope)).collect())
}
