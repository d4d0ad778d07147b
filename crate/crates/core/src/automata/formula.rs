//! Compilation of a ground program and dataset into constraints over a
//! sequence of cells.
//!
//! Every metric atom is translated into a cell formula evaluated at an
//! anchor cell, whose leaves are atoms of nearby cells. Operators with an
//! unbounded range are expressed through auxiliary atoms for strict
//! "eventually", "always" and "until" over cells (and their past mirrors),
//! each of which comes with local recursion constraints and, in its own
//! direction, a Büchi acceptance condition.

use std::collections::{HashMap, HashSet};

use crate::store::{lookup, Subst};
use crate::symbol::Sym;
use crate::syntax::{Atom, BinOp, Dataset, GroundAtom, Metric, Program, Rule, Term, UnOp};
use crate::temporal::Interval;

use super::discretise::Discretisation;

/// A formula over cells, relative to an anchor cell. `Par(even, odd)`
/// selects by the parity of the cell it is evaluated at; even cells are
/// punctual.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cf {
    True,
    False,
    Atom(u32),
    Shift(i64, Box<Cf>),
    And(Vec<Cf>),
    Or(Vec<Cf>),
    Par(Box<Cf>, Box<Cf>),
}

pub trait Cells {
    fn has(&self, cell: i64, atom: u32) -> bool;
}

fn parity(c: i64) -> usize {
    c.rem_euclid(2) as usize
}

impl Cf {
    pub fn shift(o: i64, cf: Cf) -> Cf {
        match cf {
            Cf::True | Cf::False => cf,
            _ if o == 0 => cf,
            Cf::Shift(p, inner) => Cf::shift(o + p, *inner),
            cf => Cf::Shift(o, Box::new(cf)),
        }
    }

    pub fn and(parts: Vec<Cf>) -> Cf {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Cf::True => {}
                Cf::False => return Cf::False,
                Cf::And(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        out.dedup();
        match out.len() {
            0 => Cf::True,
            1 => out.pop().unwrap(),
            _ => Cf::And(out),
        }
    }

    pub fn or(parts: Vec<Cf>) -> Cf {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Cf::False => {}
                Cf::True => return Cf::True,
                Cf::Or(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        out.dedup();
        match out.len() {
            0 => Cf::False,
            1 => out.pop().unwrap(),
            _ => Cf::Or(out),
        }
    }

    pub fn par(even: Cf, odd: Cf) -> Cf {
        if even == odd {
            even
        } else {
            Cf::Par(Box::new(even), Box::new(odd))
        }
    }

    pub fn eval(&self, c: i64, cells: &dyn Cells) -> bool {
        match self {
            Cf::True => true,
            Cf::False => false,
            Cf::Atom(a) => cells.has(c, *a),
            Cf::Shift(o, inner) => inner.eval(c + o, cells),
            Cf::And(v) => v.iter().all(|x| x.eval(c, cells)),
            Cf::Or(v) => v.iter().any(|x| x.eval(c, cells)),
            Cf::Par(e, o) => {
                if parity(c) == 0 {
                    e.eval(c, cells)
                } else {
                    o.eval(c, cells)
                }
            }
        }
    }

    /// Offsets of the cells read when evaluated at an anchor of the given
    /// parity.
    pub fn extent(&self, par: i64) -> Option<(i64, i64)> {
        match self {
            Cf::True | Cf::False => None,
            Cf::Atom(_) => Some((0, 0)),
            Cf::Shift(o, inner) => inner.extent(par + o).map(|(a, b)| (a + o, b + o)),
            Cf::And(v) | Cf::Or(v) => v.iter().filter_map(|x| x.extent(par)).reduce(|(a, b), (c, d)| (a.min(c), b.max(d))),
            Cf::Par(e, o) => {
                if par.rem_euclid(2) == 0 {
                    e.extent(par)
                } else {
                    o.extent(par)
                }
            }
        }
    }

    /// The atoms a conjunctive formula asserts, with their offsets.
    pub fn conjuncts(&self, par: i64) -> Option<Vec<(i64, u32)>> {
        match self {
            Cf::True => Some(Vec::new()),
            Cf::False | Cf::Or(_) => None,
            Cf::Atom(a) => Some(vec![(0, *a)]),
            Cf::Shift(o, inner) => Some(inner.conjuncts(par + o)?.into_iter().map(|(x, a)| (x + o, a)).collect()),
            Cf::And(v) => {
                let mut out = Vec::new();
                for x in v {
                    out.extend(x.conjuncts(par)?);
                }
                Some(out)
            }
            Cf::Par(e, o) => {
                if par.rem_euclid(2) == 0 {
                    e.conjuncts(par)
                } else {
                    o.conjuncts(par)
                }
            }
        }
    }
}

fn hull(a: Option<(i64, i64)>, b: Option<(i64, i64)>) -> Option<(i64, i64)> {
    match (a, b) {
        (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
        (x, None) | (None, x) => x,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AuxKind {
    /// Some strictly later cell satisfies the operand.
    Eventually,
    /// Every strictly later cell satisfies the operand.
    Always,
    /// Strict until over cells.
    Until,
    Once,
    Historically,
    Since,
}

impl AuxKind {
    pub fn direction(self) -> i64 {
        match self {
            AuxKind::Eventually | AuxKind::Always | AuxKind::Until => 1,
            _ => -1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CellAtom {
    Rel(GroundAtom),
    Aux(AuxKind, Cf, Cf),
}

/// `premise` at an anchor cell implies `conclusion` there.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub premise: Cf,
    pub conclusion: Cf,
    /// Per anchor parity, the atoms the conclusion asserts if it is a
    /// conjunction of atoms.
    pub force: [Option<Vec<(i64, u32)>>; 2],
    pub footprint: [(i64, i64); 2],
}

impl Constraint {
    fn new(premise: Cf, conclusion: Cf) -> Constraint {
        let force = [conclusion.conjuncts(0), conclusion.conjuncts(1)];
        let fp = |p: i64| hull(premise.extent(p), conclusion.extent(p)).unwrap_or((0, 0));
        let footprint = [fp(0), fp(1)];
        Constraint { premise, conclusion, force, footprint }
    }

    pub fn is_bottom(&self) -> bool {
        self.conclusion == Cf::False
    }

    pub fn holds(&self, c: i64, cells: &dyn Cells) -> bool {
        !self.premise.eval(c, cells) || self.conclusion.eval(c, cells)
    }
}

/// Satisfied at an anchor when the auxiliary atom has `aux_value` or the
/// witness formula evaluates to `witness_value`.
#[derive(Clone, Debug)]
pub struct Acceptance {
    pub direction: i64,
    pub aux: u32,
    pub aux_value: bool,
    pub witness: Cf,
    pub witness_value: bool,
    pub footprint: [(i64, i64); 2],
}

impl Acceptance {
    pub fn holds(&self, c: i64, cells: &dyn Cells) -> bool {
        cells.has(c, self.aux) == self.aux_value || self.witness.eval(c, cells) == self.witness_value
    }
}

/// Cells covered by a dataset fact, with `None` for an unbounded side.
#[derive(Clone, Debug)]
pub struct DataFact {
    pub atom: u32,
    pub from: Option<i64>,
    pub to: Option<i64>,
}

pub struct Compiled {
    pub disc: Discretisation,
    pub atoms: Vec<CellAtom>,
    index: HashMap<CellAtom, u32>,
    pub constraints: Vec<Constraint>,
    pub acceptance: Vec<Acceptance>,
    pub data: Vec<DataFact>,
    /// First and last cell carrying an anchor.
    pub data_span: (i64, i64),
    pub ground_rules: usize,
}

impl Compiled {
    pub fn new(program: &Program, dataset: &Dataset) -> Compiled {
        let disc = Discretisation::build(program, dataset);
        let mut c = Compiled {
            disc,
            atoms: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            acceptance: Vec::new(),
            data: Vec::new(),
            data_span: (0, 0),
            ground_rules: 0,
        };
        let (possible, rules) = ground_relevant(program, dataset);
        let mut possible: Vec<GroundAtom> = possible.into_iter().collect();
        possible.sort();
        for a in possible {
            c.intern(CellAtom::Rel(a));
        }
        c.ground_rules = rules.len();
        for r in &rules {
            let premise = Cf::and(r.body.iter().map(|m| c.translate(m)).collect());
            if premise == Cf::False {
                continue;
            }
            let conclusion = c.translate_head(&r.head);
            c.constraints.push(Constraint::new(premise, conclusion));
        }
        for f in &dataset.facts {
            let id = c.index[&CellAtom::Rel(f.atom.clone())];
            let (from, to) = c.disc.cell_span(&f.interval);
            c.data.push(DataFact { atom: id, from, to });
        }
        let cells: Vec<i64> = c.disc.anchors.iter().map(|t| c.disc.cell_containing(t)).collect();
        c.data_span = (cells.iter().copied().min().unwrap_or(0), cells.iter().copied().max().unwrap_or(0));
        c
    }

    fn intern(&mut self, a: CellAtom) -> u32 {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.atoms.len() as u32;
        self.atoms.push(a.clone());
        self.index.insert(a, i);
        i
    }

    pub fn atom_id(&self, a: &GroundAtom) -> Option<u32> {
        self.index.get(&CellAtom::Rel(a.clone())).copied()
    }

    pub fn describe(&self, id: u32) -> String {
        match &self.atoms[id as usize] {
            CellAtom::Rel(a) => a.to_string(),
            CellAtom::Aux(k, phi, psi) => format!("{k:?}#{id}[{phi:?}; {psi:?}]"),
        }
    }

    /// Data atoms holding throughout cell `c`.
    pub fn data_at(&self, c: i64) -> impl Iterator<Item = u32> + '_ {
        self.data
            .iter()
            .filter(move |d| d.from.is_none_or(|f| f <= c) && d.to.is_none_or(|t| c <= t))
            .map(|d| d.atom)
    }

    fn aux(&mut self, kind: AuxKind, phi: Cf, psi: Cf) -> Cf {
        let key = CellAtom::Aux(kind, phi.clone(), psi.clone());
        if let Some(&i) = self.index.get(&key) {
            return Cf::Atom(i);
        }
        let id = self.intern(key);
        let x = Cf::Atom(id);
        let s = kind.direction();
        let next = |f: &Cf| Cf::shift(s, f.clone());
        let (witness, witness_value, aux_value) = match kind {
            AuxKind::Eventually | AuxKind::Once => {
                self.constraints.push(Constraint::new(next(&phi), x.clone()));
                self.constraints.push(Constraint::new(next(&x), x.clone()));
                self.constraints.push(Constraint::new(x.clone(), Cf::or(vec![next(&phi), next(&x)])));
                (next(&phi), true, false)
            }
            AuxKind::Always | AuxKind::Historically => {
                self.constraints.push(Constraint::new(Cf::and(vec![next(&phi), next(&x)]), x.clone()));
                self.constraints.push(Constraint::new(x.clone(), next(&x)));
                self.constraints.push(Constraint::new(x.clone(), next(&phi)));
                (next(&phi), false, true)
            }
            AuxKind::Until | AuxKind::Since => {
                self.constraints.push(Constraint::new(next(&psi), x.clone()));
                self.constraints.push(Constraint::new(Cf::and(vec![next(&phi), next(&x)]), x.clone()));
                self.constraints.push(Constraint::new(
                    x.clone(),
                    Cf::or(vec![next(&psi), Cf::and(vec![next(&phi), next(&x)])]),
                ));
                (next(&psi), true, false)
            }
        };
        let fp = |p: i64| hull(witness.extent(p), Some((0, 0))).unwrap();
        let footprint = [fp(0), fp(1)];
        self.acceptance.push(Acceptance { direction: s, aux: id, aux_value, witness, witness_value, footprint });
        x
    }

    /// Translation of a ground metric atom into a cell formula.
    pub fn translate(&mut self, m: &Metric) -> Cf {
        match m {
            Metric::Top => Cf::True,
            Metric::Bottom => Cf::False,
            Metric::Atom(a) => match ground(a) {
                Some(g) => self.index.get(&CellAtom::Rel(g)).map_or(Cf::False, |&i| Cf::Atom(i)),
                None => Cf::False,
            },
            Metric::Unary(op, r, inner) => {
                let t = self.translate(inner);
                if matches!(t, Cf::True | Cf::False) {
                    return t;
                }
                let diamond = matches!(op, UnOp::DiamondMinus | UnOp::DiamondPlus);
                let s = if op.is_past() { -1 } else { 1 };
                let mut branch = |punct: bool| {
                    let (lo, hi) = self.disc.offsets(r, punct);
                    match hi {
                        Some(hi) => {
                            let parts = (lo..=hi).map(|o| Cf::shift(s * o, t.clone())).collect();
                            if diamond {
                                Cf::or(parts)
                            } else {
                                Cf::and(parts)
                            }
                        }
                        None => {
                            let kind = match (diamond, s) {
                                (true, 1) => AuxKind::Eventually,
                                (true, _) => AuxKind::Once,
                                (false, 1) => AuxKind::Always,
                                (false, _) => AuxKind::Historically,
                            };
                            let aux = self.aux(kind, t.clone(), Cf::True);
                            let parts = vec![Cf::shift(s * lo, t.clone()), Cf::shift(s * lo, aux)];
                            if diamond {
                                Cf::or(parts)
                            } else {
                                Cf::and(parts)
                            }
                        }
                    }
                };
                let even = branch(true);
                let odd = branch(false);
                Cf::par(even, odd)
            }
            Metric::Binary(op, r, left, right) => {
                let ta = self.translate(left);
                let tb = self.translate(right);
                let s = if *op == BinOp::Since { -1 } else { 1 };
                let even = self.binary_branch(s, r, &ta, &tb, true);
                let odd = self.binary_branch(s, r, &ta, &tb, false);
                Cf::par(even, odd)
            }
        }
    }

    /// SINCE (`s = -1`) or UNTIL (`s = 1`) at an anchor of known kind. A
    /// witness `o` cells away needs the left operand on every cell in
    /// between, on the witness cell and the anchor when those are open.
    fn binary_branch(&mut self, s: i64, r: &Interval, ta: &Cf, tb: &Cf, punct: bool) -> Cf {
        let (lo, hi) = self.disc.offsets(r, punct);
        let anchor_a = if punct { Cf::True } else { ta.clone() };
        let at_zero = if r.contains_zero() {
            tb.clone()
        } else if !punct {
            Cf::and(vec![tb.clone(), ta.clone()])
        } else {
            Cf::False
        };
        let witness = |o: i64| {
            let mut parts = vec![anchor_a.clone(), Cf::shift(s * o, tb.clone())];
            let witness_open = punct == (o % 2 == 1);
            if witness_open {
                parts.push(Cf::shift(s * o, ta.clone()));
            }
            for x in 1..o {
                parts.push(Cf::shift(s * x, ta.clone()));
            }
            Cf::and(parts)
        };
        match hi {
            Some(hi) => {
                let parts = (lo..=hi).map(|o| if o == 0 { at_zero.clone() } else { witness(o) }).collect();
                Cf::or(parts)
            }
            None => {
                let b_open = Cf::and(vec![tb.clone(), Cf::par(Cf::True, ta.clone())]);
                let kind = if s == 1 { AuxKind::Until } else { AuxKind::Since };
                let aux = self.aux(kind, ta.clone(), b_open.clone());
                if lo == 0 {
                    Cf::or(vec![at_zero, Cf::and(vec![anchor_a, aux])])
                } else {
                    let mut parts = vec![anchor_a];
                    for x in 1..lo {
                        parts.push(Cf::shift(s * x, ta.clone()));
                    }
                    parts.push(Cf::or(vec![
                        Cf::shift(s * lo, b_open),
                        Cf::and(vec![Cf::shift(s * lo, ta.clone()), Cf::shift(s * lo, aux)]),
                    ]));
                    Cf::and(parts)
                }
            }
        }
    }

    fn translate_head(&mut self, h: &Metric) -> Cf {
        match h {
            Metric::Bottom => Cf::False,
            Metric::Atom(a) => {
                let g = ground(a).expect("ground head");
                Cf::Atom(self.intern(CellAtom::Rel(g)))
            }
            Metric::Unary(op @ (UnOp::BoxPlus | UnOp::BoxMinus), r, inner) => {
                let t = self.translate_head(inner);
                let s = if op.is_past() { -1 } else { 1 };
                let mut branch = |punct: bool| {
                    let (lo, hi) = self.disc.offsets(r, punct);
                    match hi {
                        Some(hi) => Cf::and((lo..=hi).map(|o| Cf::shift(s * o, t.clone())).collect()),
                        None => {
                            let kind = if s == 1 { AuxKind::Always } else { AuxKind::Historically };
                            let aux = self.aux(kind, t.clone(), Cf::True);
                            Cf::and(vec![Cf::shift(s * lo, t.clone()), Cf::shift(s * lo, aux)])
                        }
                    }
                };
                let even = branch(true);
                let odd = branch(false);
                Cf::par(even, odd)
            }
            _ => panic!("unsupported head {h}"),
        }
    }
}

fn ground(a: &Atom) -> Option<GroundAtom> {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Some(*c),
            Term::Var(_) => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(GroundAtom { pred: a.pred, args })
}

/// Atoms that must be possible for the metric atom to hold anywhere.
fn required<'a>(m: &'a Metric, out: &mut Vec<&'a Atom>) {
    match m {
        Metric::Top | Metric::Bottom => {}
        Metric::Atom(a) => out.push(a),
        Metric::Unary(_, _, inner) => required(inner, out),
        Metric::Binary(_, _, _, right) => required(right, out),
    }
}

fn unify(a: &Atom, g: &GroundAtom, s: &Subst) -> Option<Subst> {
    if a.pred != g.pred || a.args.len() != g.args.len() {
        return None;
    }
    let mut s = s.clone();
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

/// Groundings of the rules whose body may hold given the atoms derivable
/// when time is ignored, together with those atoms.
pub fn ground_relevant(program: &Program, dataset: &Dataset) -> (HashSet<GroundAtom>, Vec<Rule>) {
    let mut consts: Vec<Sym> = program.constants().union(&dataset.constants()).copied().collect();
    consts.sort();
    let mut possible: HashSet<GroundAtom> = dataset.facts.iter().map(|f| f.atom.clone()).collect();
    let mut by_pred: HashMap<Sym, Vec<GroundAtom>> = HashMap::new();
    for a in &possible {
        by_pred.entry(a.pred).or_default().push(a.clone());
    }
    let mut rules: Vec<Rule> = Vec::new();
    let mut seen: HashSet<Rule> = HashSet::new();
    loop {
        let mut fresh = Vec::new();
        for rule in &program.rules {
            let mut req = Vec::new();
            for m in &rule.body {
                required(m, &mut req);
            }
            let mut substs: Vec<Subst> = vec![Vec::new()];
            for a in &req {
                let mut next = Vec::new();
                for s in &substs {
                    for g in by_pred.get(&a.pred).map(|v| v.as_slice()).unwrap_or(&[]) {
                        next.extend(unify(a, g, s));
                    }
                }
                substs = next;
            }
            let vars = rule.variables();
            for s in substs {
                let mut full = vec![s];
                for v in &vars {
                    if lookup(&full[0], *v).is_some() {
                        continue;
                    }
                    full = full
                        .into_iter()
                        .flat_map(|s| {
                            consts.iter().map(move |c| {
                                let mut t = s.clone();
                                t.push((*v, *c));
                                t
                            })
                        })
                        .collect();
                }
                for s in full {
                    let g = rule.substitute(&|v| lookup(&s, v));
                    if seen.insert(g.clone()) {
                        if let Some(h) = g.head_atom().and_then(ground) {
                            if !possible.contains(&h) {
                                fresh.push(h);
                            }
                        }
                        rules.push(g);
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        for h in fresh {
            if possible.insert(h.clone()) {
                by_pred.entry(h.pred).or_default().push(h);
            }
        }
    }
    (possible, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_dataset, parse_program};

    struct Set(HashSet<(i64, u32)>);

    impl Cells for Set {
        fn has(&self, c: i64, a: u32) -> bool {
            self.0.contains(&(c, a))
        }
    }

    #[test]
    fn relevant_grounding() {
        let p = parse_program("R(X,Y) <- P(X) AND Q(Y)\nS(X) <- T(X)").unwrap();
        let d = parse_dataset("P(a)@[0,1]\nQ(b)@[0,1]\nQ(c)@[0,0]").unwrap();
        let (possible, rules) = ground_relevant(&p, &d);
        assert_eq!(rules.len(), 2);
        assert_eq!(possible.len(), 5);
    }

    #[test]
    fn diamond_translation() {
        let p = parse_program("A <- DIAMONDMINUS[1,2] B").unwrap();
        let d = parse_dataset("B@[0,0]\nA@[5,5]").unwrap();
        let c = Compiled::new(&p, &d);
        // d′ = 1 with one residue: two cells per unit
        let rule = &c.constraints[0];
        assert_eq!(rule.footprint, [(-4, 0), (-4, 0)]);
        let b = c.atom_id(&GroundAtom { pred: Sym::new("B"), args: vec![] }).unwrap();
        let cells = Set([(0, b)].into_iter().collect());
        let hits: Vec<i64> = (-2..8).filter(|&x| rule.premise.eval(x, &cells)).collect();
        assert_eq!(hits, vec![2, 3, 4]);
    }

    #[test]
    fn until_translation() {
        let p = parse_program("H <- A UNTIL(0,1] B").unwrap();
        let d = parse_dataset("A@[0,0]\nB@[0,0]\nH@[3,3]").unwrap();
        let c = Compiled::new(&p, &d);
        let a = c.atom_id(&GroundAtom { pred: Sym::new("A"), args: vec![] }).unwrap();
        let b = c.atom_id(&GroundAtom { pred: Sym::new("B"), args: vec![] }).unwrap();
        let prem = &c.constraints[0].premise;
        // B on the open cell (0,1) and A on it: holds at 0 (witness later in
        // the same unit) but not at the point 1 without B after it
        let cells = Set([(1, a), (1, b)].into_iter().collect());
        assert!(prem.eval(0, &cells));
        assert!(prem.eval(1, &cells));
        assert!(!prem.eval(2, &cells));
        assert!(prem.eval(-1, &Set([(-1, a), (0, a), (1, a), (1, b)].into_iter().collect())));
        assert!(!prem.eval(-1, &Set([(-1, a), (1, a), (1, b)].into_iter().collect())));
    }
}
