//! The temporal fact store.
//!
//! Every ground atom owns a list of intervals sorted by left endpoint and
//! kept fully coalesced, so a fact is entailed iff a single stored interval
//! contains it. Rows are additionally indexed by predicate and by each
//! argument position to drive joins.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write;

use crate::symbol::Sym;
use crate::syntax::{Atom, Dataset, Fact, GroundAtom, Term};
use crate::temporal::Interval;

/// A partial substitution from variables to constants.
pub type Subst = Vec<(Sym, Sym)>;

pub fn lookup(s: &Subst, v: Sym) -> Option<Sym> {
    s.iter().find(|(x, _)| *x == v).map(|(_, c)| *c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insert {
    AddedNewContent,
    AlreadyEntailed,
}

#[derive(Clone, Debug, Default)]
struct Table {
    rows: Vec<(Box<[Sym]>, Vec<Interval>)>,
    index: HashMap<Box<[Sym]>, usize>,
    by_arg: Vec<HashMap<Sym, Vec<usize>>>,
}

/// Pre-images of rows modified since a journal was started.
#[derive(Clone, Debug, Default)]
pub struct Journal {
    old: HashMap<(Sym, usize), Vec<Interval>>,
}

impl Journal {
    pub fn is_empty(&self) -> bool {
        self.old.is_empty()
    }

    /// Modified atoms with their intervals before the modification.
    pub fn entries<'a>(&'a self, store: &'a FactStore) -> impl Iterator<Item = (GroundAtom, &'a [Interval])> + 'a {
        self.old.iter().map(move |((p, row), old)| {
            let args = store.tables[p].rows[*row].0.to_vec();
            (GroundAtom { pred: *p, args }, old.as_slice())
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct FactStore {
    tables: HashMap<Sym, Table>,
    journal: Option<Journal>,
    len: usize,
}

/// `a` lies entirely before `b` and cannot be merged with it.
fn strictly_before(a: &Interval, b: &Interval) -> bool {
    match a.hi().cmp(b.lo()) {
        Ordering::Less => true,
        Ordering::Equal => !a.hi_closed() && !b.lo_closed(),
        Ordering::Greater => false,
    }
}

/// Read access to interval lists of ground atoms.
pub trait Source {
    fn intervals(&self, pred: Sym, args: &[Sym]) -> Cow<'_, [Interval]>;
}

impl Source for FactStore {
    fn intervals(&self, pred: Sym, args: &[Sym]) -> Cow<'_, [Interval]> {
        Cow::Borrowed(self.get(pred, args))
    }
}

impl FactStore {
    pub fn new() -> FactStore {
        FactStore::default()
    }

    pub fn from_dataset(d: &Dataset) -> FactStore {
        let mut s = FactStore::new();
        for f in &d.facts {
            s.insert_fact(f);
        }
        s
    }

    /// Number of stored (coalesced) facts.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, pred: Sym, args: &[Sym]) -> &[Interval] {
        self.tables
            .get(&pred)
            .and_then(|t| t.index.get(args).map(|&i| t.rows[i].1.as_slice()))
            .unwrap_or(&[])
    }

    pub fn maximal_intervals(&self, atom: &GroundAtom) -> Vec<Interval> {
        self.get(atom.pred, &atom.args).to_vec()
    }

    pub fn insert_fact(&mut self, f: &Fact) -> Insert {
        self.insert(f.atom.pred, &f.atom.args, &f.interval)
    }

    pub fn insert(&mut self, pred: Sym, args: &[Sym], interval: &Interval) -> Insert {
        let table = self.tables.entry(pred).or_default();
        let row = match table.index.get(args) {
            Some(&r) => r,
            None => {
                let r = table.rows.len();
                let key: Box<[Sym]> = args.into();
                if table.by_arg.len() < args.len() {
                    table.by_arg.resize_with(args.len(), HashMap::new);
                }
                for (pos, c) in args.iter().enumerate() {
                    table.by_arg[pos].entry(*c).or_default().push(r);
                }
                table.index.insert(key.clone(), r);
                table.rows.push((key, Vec::new()));
                r
            }
        };
        let list = &mut table.rows[row].1;
        let i = list.partition_point(|x| strictly_before(x, interval));
        let mut j = i;
        while j < list.len() && !strictly_before(interval, &list[j]) {
            j += 1;
        }
        if j == i + 1 && list[i].contains(interval) {
            return Insert::AlreadyEntailed;
        }
        if let Some(journal) = &mut self.journal {
            journal.old.entry((pred, row)).or_insert_with(|| list.clone());
        }
        let merged = list[i..j].iter().fold(interval.clone(), |acc, x| acc.hull(x));
        self.len = self.len + 1 - (j - i);
        list.splice(i..j, std::iter::once(merged));
        Insert::AddedNewContent
    }

    pub fn entails(&self, f: &Fact) -> bool {
        let list = self.get(f.atom.pred, &f.atom.args);
        let i = list.partition_point(|x| strictly_before(x, &f.interval));
        i < list.len() && list[i].contains(&f.interval)
    }

    /// Rows of `pred` matching `atom` under `binding`, with their intervals.
    pub fn match_pattern<'a>(&'a self, atom: &Atom, binding: &Subst) -> Vec<(Subst, &'a [Interval])> {
        let mut out = Vec::new();
        let Some(table) = self.tables.get(&atom.pred) else { return out };
        let resolved: Vec<Option<Sym>> = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(*c),
                Term::Var(v) => lookup(binding, *v),
            })
            .collect();
        let candidates = self.candidate_rows(table, &resolved);
        'rows: for r in candidates {
            let (tuple, list) = &table.rows[r];
            if list.is_empty() || tuple.len() != atom.args.len() {
                continue;
            }
            let mut s = binding.clone();
            for (k, t) in atom.args.iter().enumerate() {
                match (resolved[k], t) {
                    (Some(c), _) if c != tuple[k] => continue 'rows,
                    (Some(_), _) => {}
                    (None, Term::Var(v)) => match lookup(&s, *v) {
                        Some(c) if c != tuple[k] => continue 'rows,
                        Some(_) => {}
                        None => s.push((*v, tuple[k])),
                    },
                    (None, Term::Const(_)) => unreachable!(),
                }
            }
            out.push((s, list.as_slice()));
        }
        out
    }

    fn candidate_rows(&self, table: &Table, resolved: &[Option<Sym>]) -> Vec<usize> {
        let mut best: Option<&Vec<usize>> = None;
        for (pos, c) in resolved.iter().enumerate() {
            if let Some(c) = c {
                match table.by_arg.get(pos).and_then(|m| m.get(c)) {
                    None => return Vec::new(),
                    Some(l) if best.is_none_or(|b| l.len() < b.len()) => best = Some(l),
                    Some(_) => {}
                }
            }
        }
        match best {
            Some(l) => l.clone(),
            None => (0..table.rows.len()).collect(),
        }
    }

    /// Upper bound on the number of rows `match_pattern` would inspect.
    pub fn estimate(&self, atom: &Atom, binding: &Subst) -> usize {
        let Some(table) = self.tables.get(&atom.pred) else { return 0 };
        let mut best = table.rows.len();
        for (pos, t) in atom.args.iter().enumerate() {
            let c = match t {
                Term::Const(c) => Some(*c),
                Term::Var(v) => lookup(binding, *v),
            };
            if let Some(c) = c {
                best = best.min(table.by_arg.get(pos).and_then(|m| m.get(&c)).map_or(0, Vec::len));
            }
        }
        best
    }

    /// All ground atoms of a predicate with non-empty interval lists.
    pub fn atoms_of(&self, pred: Sym) -> impl Iterator<Item = (&[Sym], &[Interval])> {
        self.tables
            .get(&pred)
            .into_iter()
            .flat_map(|t| t.rows.iter())
            .filter(|(_, l)| !l.is_empty())
            .map(|(a, l)| (&a[..], l.as_slice()))
    }

    pub fn predicates(&self) -> impl Iterator<Item = Sym> + '_ {
        self.tables.iter().filter(|(_, t)| t.rows.iter().any(|r| !r.1.is_empty())).map(|(p, _)| *p)
    }

    /// All stored facts, in canonical order.
    pub fn facts(&self) -> Vec<Fact> {
        let mut atoms: Vec<(GroundAtom, &Vec<Interval>)> = Vec::with_capacity(self.len);
        for (p, t) in &self.tables {
            for (args, list) in &t.rows {
                if !list.is_empty() {
                    atoms.push((GroundAtom { pred: *p, args: args.to_vec() }, list));
                }
            }
        }
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        atoms
            .into_iter()
            .flat_map(|(a, l)| l.iter().map(move |i| Fact { atom: a.clone(), interval: i.clone() }))
            .collect()
    }

    pub fn to_dataset(&self) -> Dataset {
        Dataset::new(self.facts())
    }

    /// Canonical text dump in dataset syntax.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for f in self.facts() {
            let _ = writeln!(s, "{f}");
        }
        s
    }

    /// Starts recording the prior state of every row modified from now on.
    pub fn start_journal(&mut self) {
        self.journal = Some(Journal::default());
    }

    pub fn take_journal(&mut self) -> Journal {
        self.journal.take().unwrap_or_default()
    }

    /// Restores every row recorded in the journal.
    pub fn rollback(&mut self, journal: Journal) {
        for ((p, row), old) in journal.old {
            let list = &mut self.tables.get_mut(&p).expect("journaled table").rows[row].1;
            self.len = self.len + old.len() - list.len();
            *list = old;
        }
    }
}

/// The store as it was before the last step: changed atoms read their
/// previous intervals.
pub struct Previous<'a> {
    pub store: &'a FactStore,
    pub previous: &'a HashMap<GroundAtom, Vec<Interval>>,
}

impl Source for Previous<'_> {
    fn intervals(&self, pred: Sym, args: &[Sym]) -> Cow<'_, [Interval]> {
        let key = GroundAtom { pred, args: args.to_vec() };
        match self.previous.get(&key) {
            None => Cow::Borrowed(self.store.get(pred, args)),
            Some(old) => Cow::Borrowed(old.as_slice()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_fact, parse_program};
    use crate::temporal::{coalesce_all, iv};
    use proptest::prelude::*;

    fn ex() -> FactStore {
        FactStore::from_dataset(
            &parse_dataset("R1(c1,c2)@[0,1]\nR2(c1,c2)@[1,2]\nR3(c2,c3)@[2,3]\nR5(c2)@[0,1]").unwrap(),
        )
    }

    fn ga(s: &str) -> GroundAtom {
        parse_fact(&format!("{s}@0")).unwrap().atom
    }

    #[test]
    fn insertion_examples() {
        let mut s = ex();
        assert_eq!(s.insert_fact(&parse_fact("R1(c1,c2)@[1,2]").unwrap()), Insert::AddedNewContent);
        assert_eq!(s.maximal_intervals(&ga("R1(c1,c2)")), vec![iv("[0,2]")]);
        assert_eq!(s.insert_fact(&parse_fact("R5(c2)@[2,2]").unwrap()), Insert::AddedNewContent);
        assert_eq!(s.maximal_intervals(&ga("R5(c2)")), vec![iv("[0,1]"), iv("[2,2]")]);
        s.insert_fact(&parse_fact("R4(c2)@[0,2]").unwrap());
        assert_eq!(s.insert_fact(&parse_fact("R4(c2)@[0,2]").unwrap()), Insert::AlreadyEntailed);
        assert_eq!(s.maximal_intervals(&ga("R3(c2,c3)")), vec![iv("[2,3]")]);
        assert!(s.maximal_intervals(&ga("R9(c2)")).is_empty());
        assert!(s.entails(&parse_fact("R4(c2)@[0,1]").unwrap()));
        assert!(!s.entails(&parse_fact("R4(c2)@[1,3]").unwrap()));
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn pattern_matching() {
        let s = ex();
        let p = parse_program("H(X) <- R2(X,Y) AND R3(Y,Z)").unwrap();
        let atoms = p.rules[0].body.iter().flat_map(|m| m.atoms()).cloned().collect::<Vec<_>>();
        let m = s.match_pattern(&atoms[0], &vec![]);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].0, vec![(Sym::new("X"), Sym::new("c1")), (Sym::new("Y"), Sym::new("c2"))]);
        assert_eq!(m[0].1, &[iv("[1,2]")]);
        let m = s.match_pattern(&atoms[1], &vec![(Sym::new("Y"), Sym::new("c2"))]);
        assert_eq!(m.len(), 1);
        assert_eq!(lookup(&m[0].0, Sym::new("Z")), Some(Sym::new("c3")));
        assert!(s.match_pattern(&atoms[1], &vec![(Sym::new("Y"), Sym::new("zz"))]).is_empty());
    }

    #[test]
    fn repeated_variables() {
        let s = FactStore::from_dataset(&parse_dataset("E(a,a)@[0,0]\nE(a,b)@[0,0]").unwrap());
        let p = parse_program("H(X) <- E(X,X)").unwrap();
        let m = s.match_pattern(p.rules[0].body[0].atoms()[0], &vec![]);
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn dump_is_canonical() {
        let s = FactStore::from_dataset(&parse_dataset("b(x)@[2,3]\nA(z)@[0,0]\nA(b)@[5,6]\nA(b)@[1,2]").unwrap());
        assert_eq!(s.dump(), "A(b)@[1,2]\nA(b)@[5,6]\nA(z)@[0,0]\nb(x)@[2,3]\n");
    }

    #[test]
    fn journal_rollback() {
        let mut s = ex();
        let before = s.dump();
        s.start_journal();
        s.insert_fact(&parse_fact("R1(c1,c2)@[1,5]").unwrap());
        s.insert_fact(&parse_fact("R7(c1)@[1,5]").unwrap());
        s.insert_fact(&parse_fact("R1(c1,c2)@[7,8]").unwrap());
        let j = s.take_journal();
        assert_eq!(j.entries(&s).count(), 2);
        s.rollback(j);
        assert_eq!(s.dump(), before);
        assert_eq!(s.len(), 4);
    }

    fn arb_iv() -> impl Strategy<Value = Interval> {
        (0i64..12, 0i64..4, any::<bool>(), any::<bool>()).prop_map(|(a, w, lc, rc)| {
            let lo = crate::temporal::frac(a, 2);
            let hi = crate::temporal::frac(a + w, 2);
            Interval::new(lo.clone().into(), lc, hi.into(), rc).unwrap_or_else(|| Interval::point(lo))
        })
    }

    proptest! {
        #[test]
        fn matches_recoalescing_oracle(ivs in proptest::collection::vec(arb_iv(), 1..12), probe in arb_iv()) {
            let a = ga("P(a)");
            let mut s = FactStore::new();
            for (k, i) in ivs.iter().enumerate() {
                let was = s.entails(&Fact { atom: a.clone(), interval: i.clone() });
                let before = s.dump();
                let r = s.insert(a.pred, &a.args, i);
                prop_assert_eq!(r == Insert::AlreadyEntailed, was);
                if was {
                    prop_assert_eq!(s.dump(), before);
                }
                let list = s.maximal_intervals(&a);
                prop_assert_eq!(&list, &coalesce_all(ivs[..=k].to_vec()));
                for w in list.windows(2) {
                    prop_assert!(!w[0].union_compatible(&w[1]));
                    prop_assert!(w[0].cmp_lower(&w[1]) == Ordering::Less);
                }
            }
            let f = Fact { atom: a.clone(), interval: probe.clone() };
            let brute = s.maximal_intervals(&a).iter().any(|i| i.contains(&probe));
            prop_assert_eq!(s.entails(&f), brute);
        }
    }
}
