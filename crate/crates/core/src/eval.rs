//! Evaluation of metric atoms over a coalesced store and enumeration of
//! rule instances.

use std::collections::{HashMap, HashSet};

use crate::store::{lookup, FactStore, Previous, Source, Subst};
use crate::symbol::Sym;
use crate::syntax::{Atom, BinOp, Fact, GroundAtom, Metric, Rule, Term, UnOp};
use crate::temporal::{coalesce_all, Interval};

fn ground_args(a: &Atom, s: &Subst) -> Option<Vec<Sym>> {
    a.args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Some(*c),
            Term::Var(v) => lookup(s, *v),
        })
        .collect()
}

pub fn ground_atom(a: &Atom, s: &Subst) -> Option<GroundAtom> {
    Some(GroundAtom { pred: a.pred, args: ground_args(a, s)? })
}

/// The maximal intervals on which `m` (grounded by `s`) holds.
pub fn eval_metric<S: Source + ?Sized>(src: &S, m: &Metric, s: &Subst) -> Vec<Interval> {
    match m {
        Metric::Top => vec![Interval::all()],
        Metric::Bottom => Vec::new(),
        Metric::Atom(a) => match ground_args(a, s) {
            Some(args) => src.intervals(a.pred, &args).into_owned(),
            None => Vec::new(),
        },
        Metric::Unary(op, r, inner) => {
            let sub = eval_metric(src, inner, s);
            let out: Vec<Interval> = match op {
                UnOp::DiamondMinus => sub.iter().map(|i| i.plus(r)).collect(),
                UnOp::DiamondPlus => sub.iter().map(|i| i.minus(r)).collect(),
                UnOp::BoxMinus => sub.iter().filter_map(|i| i.erode_past(r)).collect(),
                UnOp::BoxPlus => sub.iter().filter_map(|i| i.erode_future(r)).collect(),
            };
            coalesce_all(out)
        }
        Metric::Binary(op, r, l, rr) => {
            let left = eval_metric(src, l, s);
            let right = eval_metric(src, rr, s);
            since_until(*op, r, &left, &right)
        }
    }
}

/// SINCE/UNTIL over coalesced operand lists. A witness `t'` for the right
/// operand is usable from `t` when the left operand holds throughout the
/// open gap between them, i.e. both lie in the closure of one left-operand
/// interval (or `t = t'`).
pub fn since_until(op: BinOp, r: &Interval, left: &[Interval], right: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    if r.contains_zero() {
        out.extend(right.iter().cloned());
    }
    for j in right {
        for k in left {
            let kc = k.closure();
            let Some(w) = j.intersect(&kc) else { continue };
            let reach = match op {
                BinOp::Since => w.plus(r),
                BinOp::Until => w.minus(r),
            };
            out.extend(reach.intersect(&kc));
        }
    }
    coalesce_all(out)
}

/// Maximal intervals on which all lists hold at once: a sort-merge scan
/// advancing the cursor whose current interval ends first.
pub fn join_body(lists: &[&[Interval]]) -> Vec<Interval> {
    if lists.is_empty() {
        return vec![Interval::all()];
    }
    let mut cur = vec![0usize; lists.len()];
    let mut out = Vec::new();
    loop {
        if cur.iter().zip(lists).any(|(&c, l)| c >= l.len()) {
            break;
        }
        let mut acc = Some(lists[0][cur[0]].clone());
        for k in 1..lists.len() {
            acc = acc.and_then(|a| a.intersect(&lists[k][cur[k]]));
        }
        out.extend(acc);
        let mut first = 0;
        for k in 1..lists.len() {
            if lists[k][cur[k]].cmp_upper(&lists[first][cur[first]]).is_lt() {
                first = k;
            }
        }
        cur[first] += 1;
    }
    coalesce_all(out)
}

/// A rule instance: a substitution together with one maximal interval per
/// body atom, whose common intersection is non-empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    pub rule: usize,
    pub subst: Subst,
    pub body: Vec<Interval>,
}

impl Instance {
    pub fn intersection(&self) -> Interval {
        let mut acc = self.body[0].clone();
        for i in &self.body[1..] {
            acc = acc.intersect(i).expect("instances have non-empty body intersections");
        }
        acc
    }
}

/// The fact derived by the head of `rule` from a body holding on `body`.
/// BOXPLUS in the head spreads the interval forward, BOXMINUS backward.
pub fn derive_head(head: &Metric, s: &Subst, body: &Interval) -> Option<Fact> {
    let mut m = head;
    let mut at = body.clone();
    loop {
        match m {
            Metric::Atom(a) => return Some(Fact { atom: ground_atom(a, s)?, interval: at }),
            Metric::Unary(UnOp::BoxPlus, r, inner) => {
                at = at.plus(r);
                m = inner;
            }
            Metric::Unary(UnOp::BoxMinus, r, inner) => {
                at = at.minus(r);
                m = inner;
            }
            _ => return None,
        }
    }
}

struct Leaf<'a> {
    atom: &'a Atom,
    must_hold: bool,
}

fn leaves(rule: &Rule) -> Vec<Leaf<'_>> {
    let mut out = Vec::new();
    for m in &rule.body {
        m.walk_atoms(&mut |a, in_left| out.push(Leaf { atom: a, must_hold: !in_left }), false);
    }
    out
}

/// Enumerates instances of rules over a store.
pub struct Enumerator<'a> {
    store: &'a FactStore,
    universe: &'a [Sym],
}

impl<'a> Enumerator<'a> {
    /// `universe` supplies values for variables that only occur in left
    /// operands of SINCE/UNTIL and so are not bound by matching.
    pub fn new(store: &'a FactStore, universe: &'a [Sym]) -> Self {
        Enumerator { store, universe }
    }

    /// Substitutions binding every rule variable such that every
    /// must-hold leaf has stored intervals, optionally starting from a seed.
    fn substitutions(&self, rule: &Rule, seed: Subst, out: &mut Vec<Subst>) {
        let ls = leaves(rule);
        let pending: Vec<&Atom> = ls.iter().filter(|l| l.must_hold).map(|l| l.atom).collect();
        let vars = rule.variables();
        self.extend(&pending, seed, &vars, out);
    }

    fn extend(&self, pending: &[&Atom], s: Subst, vars: &[Sym], out: &mut Vec<Subst>) {
        if pending.is_empty() {
            self.fill_free(vars, s, out);
            return;
        }
        let (k, _) = pending
            .iter()
            .enumerate()
            .map(|(k, a)| (k, self.store.estimate(a, &s)))
            .min_by_key(|&(k, e)| (e, k))
            .expect("non-empty");
        let mut rest = pending.to_vec();
        let atom = rest.remove(k);
        for (s2, _) in self.store.match_pattern(atom, &s) {
            self.extend(&rest, s2, vars, out);
        }
    }

    fn fill_free(&self, vars: &[Sym], s: Subst, out: &mut Vec<Subst>) {
        match vars.iter().find(|v| lookup(&s, **v).is_none()) {
            None => out.push(s),
            Some(&v) => {
                for &c in self.universe {
                    let mut s2 = s.clone();
                    s2.push((v, c));
                    self.fill_free(vars, s2, out);
                }
            }
        }
    }

    /// Every substitution that makes some leaf equal to an atom of `delta`.
    fn substitutions_touching(&self, rule: &Rule, delta: &HashMap<GroundAtom, Vec<Interval>>, out: &mut Vec<Subst>) {
        let mut by_pred: HashMap<Sym, Vec<&GroundAtom>> = HashMap::new();
        for a in delta.keys() {
            by_pred.entry(a.pred).or_default().push(a);
        }
        let mut seen = HashSet::new();
        for leaf in leaves(rule) {
            let Some(cands) = by_pred.get(&leaf.atom.pred) else { continue };
            for g in cands {
                let Some(seed) = unify(leaf.atom, g) else { continue };
                let mut found = Vec::new();
                self.substitutions(rule, seed, &mut found);
                for mut s in found {
                    s.sort();
                    if seen.insert(s.clone()) {
                        out.push(s);
                    }
                }
            }
        }
    }

    fn instances_for(&self, idx: usize, rule: &Rule, subs: Vec<Subst>, out: &mut Vec<Instance>) {
        let mut cache: HashMap<(usize, Vec<Sym>), Vec<Interval>> = HashMap::new();
        let keys: Vec<Vec<Sym>> = rule
            .body
            .iter()
            .map(|m| {
                let mut v = Vec::new();
                m.variables(&mut v);
                v
            })
            .collect();
        'subs: for mut s in subs {
            s.sort();
            let mut lists = Vec::with_capacity(rule.body.len());
            for (k, m) in rule.body.iter().enumerate() {
                let key: Vec<Sym> = keys[k].iter().map(|v| lookup(&s, *v).expect("bound")).collect();
                let l = cache.entry((k, key)).or_insert_with(|| eval_metric(self.store, m, &s)).clone();
                if l.is_empty() {
                    continue 'subs;
                }
                lists.push(l);
            }
            let mut chosen = Vec::with_capacity(lists.len());
            product(idx, &s, &lists, &mut chosen, None, out);
        }
    }

    /// All instances of the rule over the store.
    pub fn instances(&self, idx: usize, rule: &Rule) -> Vec<Instance> {
        let mut subs = Vec::new();
        self.substitutions(rule, Vec::new(), &mut subs);
        let mut out = Vec::new();
        self.instances_for(idx, rule, subs, &mut out);
        out
    }

    /// Instances having some body fact not entailed by the previous store,
    /// given as the intervals each changed atom had before the last step.
    /// Every instance over the previous store was considered when it first
    /// appeared, so no instance is considered twice.
    pub fn instances_relative(
        &self,
        idx: usize,
        rule: &Rule,
        previous: &HashMap<GroundAtom, Vec<Interval>>,
    ) -> Vec<Instance> {
        let delta = previous;
        let mut subs = Vec::new();
        self.substitutions_touching(rule, delta, &mut subs);
        let mut all = Vec::new();
        self.instances_for(idx, rule, subs, &mut all);
        let old = Previous { store: self.store, previous };
        let mut cache: HashMap<(usize, Subst), Vec<Interval>> = HashMap::new();
        all.into_iter()
            .filter(|inst| {
                rule.body.iter().enumerate().any(|(k, m)| {
                    if !touches(m, &inst.subst, delta) {
                        return false;
                    }
                    let l = cache.entry((k, inst.subst.clone())).or_insert_with(|| eval_metric(&old, m, &inst.subst));
                    !l.iter().any(|i| i.contains(&inst.body[k]))
                })
            })
            .collect()
    }

    /// True iff the metric atom holds somewhere for some substitution.
    pub fn satisfiable(&self, m: &Metric) -> bool {
        let rule = Rule { head: Metric::Bottom, body: vec![m.clone()] };
        let mut subs = Vec::new();
        self.substitutions(&rule, Vec::new(), &mut subs);
        subs.iter().any(|s| !eval_metric(self.store, m, s).is_empty())
    }

    /// All maximal intervals of the metric atom across substitutions.
    pub fn all_intervals(&self, m: &Metric) -> Vec<Interval> {
        let rule = Rule { head: Metric::Bottom, body: vec![m.clone()] };
        let mut subs = Vec::new();
        self.substitutions(&rule, Vec::new(), &mut subs);
        subs.iter().flat_map(|s| eval_metric(self.store, m, s)).collect()
    }
}

fn touches(m: &Metric, s: &Subst, delta: &HashMap<GroundAtom, Vec<Interval>>) -> bool {
    m.atoms().iter().any(|a| ground_atom(a, s).is_some_and(|g| delta.contains_key(&g)))
}

fn unify(a: &Atom, g: &GroundAtom) -> Option<Subst> {
    if a.args.len() != g.args.len() {
        return None;
    }
    let mut s: Subst = Vec::new();
    for (t, c) in a.args.iter().zip(&g.args) {
        match t {
            Term::Const(k) if k != c => return None,
            Term::Const(_) => {}
            Term::Var(v) => match lookup(&s, *v) {
                Some(x) if x != *c => return None,
                Some(_) => {}
                None => s.push((*v, *c)),
            },
        }
    }
    Some(s)
}

fn product(
    idx: usize,
    s: &Subst,
    lists: &[Vec<Interval>],
    chosen: &mut Vec<Interval>,
    acc: Option<&Interval>,
    out: &mut Vec<Instance>,
) {
    let k = chosen.len();
    if k == lists.len() {
        out.push(Instance { rule: idx, subst: s.clone(), body: chosen.clone() });
        return;
    }
    for i in &lists[k] {
        let next = match acc {
            None => Some(i.clone()),
            Some(a) => a.intersect(i),
        };
        if let Some(n) = next {
            chosen.push(i.clone());
            product(idx, s, lists, chosen, Some(&n), out);
            chosen.pop();
        }
    }
}
