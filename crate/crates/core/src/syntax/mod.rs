//! The DatalogMTL abstract syntax: terms, metric atoms, rules, facts.

mod parse;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::symbol::Sym;
use crate::temporal::Interval;

pub use parse::{parse_dataset, parse_fact, parse_program, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Sym),
    Const(Sym),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: Sym,
    pub args: Vec<Sym>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    DiamondMinus,
    DiamondPlus,
    BoxMinus,
    BoxPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Since,
    Until,
}

impl UnOp {
    pub fn keyword(self) -> &'static str {
        match self {
            UnOp::DiamondMinus => "DIAMONDMINUS",
            UnOp::DiamondPlus => "DIAMONDPLUS",
            UnOp::BoxMinus => "BOXMINUS",
            UnOp::BoxPlus => "BOXPLUS",
        }
    }

    pub fn is_past(self) -> bool {
        matches!(self, UnOp::DiamondMinus | UnOp::BoxMinus)
    }

    pub fn mirror(self) -> UnOp {
        match self {
            UnOp::DiamondMinus => UnOp::DiamondPlus,
            UnOp::DiamondPlus => UnOp::DiamondMinus,
            UnOp::BoxMinus => UnOp::BoxPlus,
            UnOp::BoxPlus => UnOp::BoxMinus,
        }
    }
}

impl BinOp {
    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Since => "SINCE",
            BinOp::Until => "UNTIL",
        }
    }

    pub fn mirror(self) -> BinOp {
        match self {
            BinOp::Since => BinOp::Until,
            BinOp::Until => BinOp::Since,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    Top,
    Bottom,
    Atom(Atom),
    Unary(UnOp, Interval, Box<Metric>),
    Binary(BinOp, Interval, Box<Metric>, Box<Metric>),
}

impl Metric {
    pub fn unary(op: UnOp, range: Interval, arg: Metric) -> Metric {
        Metric::Unary(op, range, Box::new(arg))
    }

    pub fn binary(op: BinOp, range: Interval, left: Metric, right: Metric) -> Metric {
        Metric::Binary(op, range, Box::new(left), Box::new(right))
    }

    /// Relational atoms in the formula, left to right.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.walk_atoms(&mut |a, _| out.push(a), false);
        out
    }

    /// Visits relational leaves; the flag tells whether the leaf sits inside
    /// the left operand of some SINCE/UNTIL.
    pub fn walk_atoms<'a>(&'a self, f: &mut dyn FnMut(&'a Atom, bool), in_left: bool) {
        match self {
            Metric::Top | Metric::Bottom => {}
            Metric::Atom(a) => f(a, in_left),
            Metric::Unary(_, _, m) => m.walk_atoms(f, in_left),
            Metric::Binary(_, _, l, r) => {
                l.walk_atoms(f, true);
                r.walk_atoms(f, in_left);
            }
        }
    }

    pub fn predicates(&self) -> BTreeSet<Sym> {
        self.atoms().into_iter().map(|a| a.pred).collect()
    }

    pub fn mentions_bottom(&self) -> bool {
        match self {
            Metric::Bottom => true,
            Metric::Top | Metric::Atom(_) => false,
            Metric::Unary(_, _, m) => m.mentions_bottom(),
            Metric::Binary(_, _, l, r) => l.mentions_bottom() || r.mentions_bottom(),
        }
    }

    pub fn variables(&self, out: &mut Vec<Sym>) {
        self.walk_atoms(
            &mut |a, _| {
                for t in &a.args {
                    if let Term::Var(v) = t {
                        if !out.contains(v) {
                            out.push(*v);
                        }
                    }
                }
            },
            false,
        );
    }

    /// Operator ranges occurring in the formula.
    pub fn ranges(&self, out: &mut Vec<Interval>) {
        match self {
            Metric::Top | Metric::Bottom | Metric::Atom(_) => {}
            Metric::Unary(_, r, m) => {
                out.push(r.clone());
                m.ranges(out);
            }
            Metric::Binary(_, r, l, m) => {
                out.push(r.clone());
                l.ranges(out);
                m.ranges(out);
            }
        }
    }

    /// True when only past operators (and no future ones) occur.
    pub fn is_past_only(&self) -> bool {
        match self {
            Metric::Top | Metric::Bottom | Metric::Atom(_) => true,
            Metric::Unary(op, _, m) => op.is_past() && m.is_past_only(),
            Metric::Binary(op, _, l, r) => *op == BinOp::Since && l.is_past_only() && r.is_past_only(),
        }
    }

    pub fn is_future_only(&self) -> bool {
        match self {
            Metric::Top | Metric::Bottom | Metric::Atom(_) => true,
            Metric::Unary(op, _, m) => !op.is_past() && m.is_future_only(),
            Metric::Binary(op, _, l, r) => *op == BinOp::Until && l.is_future_only() && r.is_future_only(),
        }
    }

    /// The past/future mirror image.
    pub fn mirror(&self) -> Metric {
        match self {
            Metric::Top | Metric::Bottom | Metric::Atom(_) => self.clone(),
            Metric::Unary(op, r, m) => Metric::unary(op.mirror(), r.clone(), m.mirror()),
            Metric::Binary(op, r, l, m) => Metric::binary(op.mirror(), r.clone(), l.mirror(), m.mirror()),
        }
    }

    pub fn substitute(&self, f: &dyn Fn(Sym) -> Option<Sym>) -> Metric {
        match self {
            Metric::Top | Metric::Bottom => self.clone(),
            Metric::Atom(a) => Metric::Atom(Atom {
                pred: a.pred,
                args: a
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => f(*v).map(Term::Const).unwrap_or(*t),
                        c => *c,
                    })
                    .collect(),
            }),
            Metric::Unary(op, r, m) => Metric::unary(*op, r.clone(), m.substitute(f)),
            Metric::Binary(op, r, l, m) => Metric::binary(*op, r.clone(), l.substitute(f), m.substitute(f)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Metric::Top | Metric::Bottom | Metric::Atom(_) => 0,
            Metric::Unary(_, _, m) => 1 + m.depth(),
            Metric::Binary(_, _, l, r) => 1 + l.depth().max(r.depth()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Metric,
    pub body: Vec<Metric>,
}

impl Rule {
    pub fn is_bottom(&self) -> bool {
        self.head == Metric::Bottom
    }

    /// The relational atom under the head's box operators, if any.
    pub fn head_atom(&self) -> Option<&Atom> {
        let mut h = &self.head;
        loop {
            match h {
                Metric::Atom(a) => return Some(a),
                Metric::Unary(_, _, m) => h = m,
                _ => return None,
            }
        }
    }

    pub fn head_predicate(&self) -> Option<Sym> {
        self.head_atom().map(|a| a.pred)
    }

    pub fn body_predicates(&self) -> BTreeSet<Sym> {
        self.body.iter().flat_map(|m| m.predicates()).collect()
    }

    /// Variables in order of first occurrence in the body, then head.
    pub fn variables(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        for m in &self.body {
            m.variables(&mut out);
        }
        self.head.variables(&mut out);
        out
    }

    pub fn mirror(&self) -> Rule {
        Rule { head: self.head.mirror(), body: self.body.iter().map(Metric::mirror).collect() }
    }

    pub fn substitute(&self, f: &dyn Fn(Sym) -> Option<Sym>) -> Rule {
        Rule { head: self.head.substitute(f), body: self.body.iter().map(|m| m.substitute(f)).collect() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Program {
        Program { rules }
    }

    pub fn predicates(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            out.extend(r.body_predicates());
            out.extend(r.head_predicate());
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            for m in r.body.iter().chain(std::iter::once(&r.head)) {
                for a in m.atoms() {
                    for t in &a.args {
                        if let Term::Const(c) = t {
                            out.insert(*c);
                        }
                    }
                }
            }
        }
        out
    }

    /// All operator ranges in the program.
    pub fn ranges(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        for r in &self.rules {
            r.head.ranges(&mut out);
            for m in &r.body {
                m.ranges(&mut out);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fact {
    pub atom: GroundAtom,
    pub interval: Interval,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub facts: Vec<Fact>,
}

impl Dataset {
    pub fn new(facts: Vec<Fact>) -> Dataset {
        Dataset { facts }
    }

    pub fn constants(&self) -> BTreeSet<Sym> {
        self.facts.iter().flat_map(|f| f.atom.args.iter().copied()).collect()
    }

    pub fn predicates(&self) -> BTreeSet<Sym> {
        self.facts.iter().map(|f| f.atom.pred).collect()
    }
}

/// All groundings of the program's rules over the constants of the program
/// and the dataset.
pub fn ground(program: &Program, dataset: &Dataset) -> Vec<Rule> {
    let consts: Vec<Sym> = program.constants().union(&dataset.constants()).copied().collect();
    let mut out = Vec::new();
    for rule in &program.rules {
        let vars = rule.variables();
        if vars.is_empty() {
            out.push(rule.clone());
            continue;
        }
        if consts.is_empty() {
            continue;
        }
        let mut idx = vec![0usize; vars.len()];
        loop {
            let map: Vec<(Sym, Sym)> = vars.iter().zip(&idx).map(|(v, &i)| (*v, consts[i])).collect();
            out.push(rule.substitute(&|v| map.iter().find(|(x, _)| *x == v).map(|(_, c)| *c)));
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < consts.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

/// Checks that every predicate is used with one arity across both inputs.
pub fn check_arities(program: &Program, dataset: &Dataset) -> Result<(), String> {
    let mut seen: std::collections::HashMap<Sym, usize> = Default::default();
    let mut note = |p: Sym, n: usize| match seen.insert(p, n) {
        Some(m) if m != n => Err(format!("predicate {p} used with arity {m} and {n}")),
        _ => Ok(()),
    };
    for r in &program.rules {
        for m in r.body.iter().chain(std::iter::once(&r.head)) {
            for a in m.atoms() {
                note(a.pred, a.args.len())?;
            }
        }
    }
    for f in &dataset.facts {
        note(f.atom.pred, f.atom.args.len())?;
    }
    Ok(())
}

fn is_plain_const(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_const(f: &mut fmt::Formatter<'_>, c: Sym) -> fmt::Result {
    let s = c.as_str();
    if is_plain_const(s) {
        f.write_str(s)
    } else {
        write!(f, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write_const(f, *c),
        }
    }
}

fn write_args<T>(f: &mut fmt::Formatter<'_>, args: &[T], w: impl Fn(&mut fmt::Formatter<'_>, &T) -> fmt::Result) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        w(f, a)?;
    }
    f.write_str(")")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        write_args(f, &self.args, |f, t| write!(f, "{t}"))
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        write_args(f, &self.args, |f, c| write_const(f, *c))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let operand = |f: &mut fmt::Formatter<'_>, m: &Metric| match m {
            Metric::Binary(..) => write!(f, "({m})"),
            _ => write!(f, "{m}"),
        };
        match self {
            Metric::Top => f.write_str("TOP"),
            Metric::Bottom => f.write_str("BOTTOM"),
            Metric::Atom(a) => write!(f, "{a}"),
            Metric::Unary(op, r, m) => {
                write!(f, "{}{} ", op.keyword(), r)?;
                operand(f, m)
            }
            Metric::Binary(op, r, l, m) => {
                operand(f, l)?;
                write!(f, " {}{} ", op.keyword(), r)?;
                operand(f, m)
            }
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- ", self.head)?;
        for (i, m) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.atom, self.interval)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.facts {
            writeln!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Variables of the head that do not occur in the body outside left
/// operands of SINCE/UNTIL.
pub fn unsafe_variables(rule: &Rule) -> Vec<Sym> {
    let mut bound = HashSet::new();
    for m in &rule.body {
        m.walk_atoms(
            &mut |a, in_left| {
                if !in_left {
                    for t in &a.args {
                        if let Term::Var(v) = t {
                            bound.insert(*v);
                        }
                    }
                }
            },
            false,
        );
    }
    let mut head_vars = Vec::new();
    rule.head.variables(&mut head_vars);
    head_vars.into_iter().filter(|v| !bound.contains(v)).collect()
}
