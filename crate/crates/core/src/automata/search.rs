//! Window states, successor generation and emptiness checking.
//!
//! A window is a run of consecutive cells labelled with the atoms holding
//! on them. Extending a window by one cell first closes a lookahead region
//! under the forcing constraints (a lower bound on every model extending
//! the window), then guesses, smallest first, which of the atoms that can
//! be forced from beyond the window also hold on the new cell.
//!
//! Only locally justified labellings are explored: a relational atom that
//! is not data must be forced by some constraint whose footprint fits in a
//! window and whose premise holds. The least model is locally justified,
//! so this loses no consistent instance. Labels carry one extra bit per
//! atom recording whether it has been justified yet. Premises are
//! positive, so reading unknown cells as full bounds them from above; an
//! unjustified atom no forcing premise can still reach is rejected.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::formula::{CellAtom, Cells, Compiled};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Box<[u64]>);

impl Label {
    pub fn new(n: usize) -> Label {
        Label(vec![0; n.div_ceil(64).max(1)].into())
    }

    pub fn has(&self, i: u32) -> bool {
        self.0[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: u32) -> bool {
        let w = &mut self.0[(i / 64) as usize];
        let bit = 1u64 << (i % 64);
        let fresh = *w & bit == 0;
        *w |= bit;
        fresh
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.0.len() as u32 * 64).filter(|&i| self.has(i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub first: i64,
    pub cells: Vec<Label>,
}

impl Window {
    fn last(&self) -> i64 {
        self.first + self.cells.len() as i64 - 1
    }

    fn key(&self) -> (i64, Vec<Label>) {
        (self.first.rem_euclid(2), self.cells.clone())
    }
}

impl Cells for Window {
    fn has(&self, c: i64, a: u32) -> bool {
        c >= self.first && c <= self.last() && self.cells[(c - self.first) as usize].has(a)
    }
}

#[derive(Clone, Debug)]
struct Region {
    base: i64,
    cells: Vec<Label>,
}

impl Region {
    fn end(&self) -> i64 {
        self.base + self.cells.len() as i64
    }

    fn get(&self, c: i64) -> &Label {
        &self.cells[(c - self.base) as usize]
    }

    fn get_mut(&mut self, c: i64) -> &mut Label {
        &mut self.cells[(c - self.base) as usize]
    }
}

impl Cells for Region {
    fn has(&self, c: i64, a: u32) -> bool {
        c >= self.base && c < self.end() && self.get(c).has(a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fail {
    Bottom,
    /// The closure needs an atom on a cell whose label is already fixed.
    Conflict,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AutomataError {
    #[error("automata budget exceeded after {states} states")]
    Budget { states: usize },
    #[error("automata check cancelled")]
    Cancelled,
}

#[derive(Clone, Debug)]
pub struct Budget {
    pub max_states: usize,
    pub max_time: Option<Duration>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_states: 100_000, max_time: None, cancel: None }
    }
}

/// Subsets of `0..n` in order of increasing size.
struct Subsets {
    n: usize,
    cur: Option<Vec<usize>>,
}

impl Subsets {
    fn new(n: usize) -> Subsets {
        Subsets { n, cur: Some(Vec::new()) }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let k = out.len();
        let mut idx = out.clone();
        // next combination of the same size, else the first of size k + 1
        let mut i = k;
        let advanced = loop {
            if i == 0 {
                break false;
            }
            i -= 1;
            if idx[i] < self.n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break true;
            }
        };
        self.cur = if advanced {
            Some(idx)
        } else if k < self.n {
            Some((0..=k).collect())
        } else {
            None
        };
        Some(out)
    }
}

struct Pending {
    base: Region,
    window: Window,
    new_cell: i64,
    opts: Vec<u32>,
    subsets: Subsets,
    seen: HashSet<Label>,
}

struct Node {
    window: Window,
    succ: Vec<usize>,
    pending: Option<Pending>,
    started: bool,
}

pub struct Search<'a> {
    pub compiled: &'a Compiled,
    pub width: usize,
    lookahead: usize,
    /// Atoms that can be forced onto a cell from cells beyond it, per
    /// direction of extension (index 0 rightwards, 1 leftwards).
    optional: [Vec<u32>; 2],
    budget: Budget,
    started: Instant,
    pub states: usize,
    dump: Option<String>,
    right_cache: HashMap<(i64, Vec<Label>), bool>,
    left_cache: HashMap<(i64, Vec<Label>), bool>,
    relational: Vec<u32>,
    /// Closure of the data over the initial span: a lower bound on every
    /// model, used in place of the bare data there while the initial window
    /// is built (automaton windows sit at normalised positions instead).
    floor: Option<Region>,
    floor_on: bool,
    /// Per atom, the constraints forcing it as (constraint, anchor parity,
    /// offset).
    forcers: Vec<Vec<(usize, usize, i64)>>,
}

/// Cells outside `[lo, hi]` read as holding every atom.
struct Optimistic<'r> {
    r: &'r Region,
    lo: i64,
    hi: i64,
}

impl Cells for Optimistic<'_> {
    fn has(&self, c: i64, a: u32) -> bool {
        c < self.lo || c > self.hi || self.r.get(c).has(a)
    }
}

fn dir_index(dir: i64) -> usize {
    usize::from(dir < 0)
}

impl<'a> Search<'a> {
    pub fn new(compiled: &'a Compiled, budget: Budget, dump: bool) -> Search<'a> {
        let mut width = 1;
        for c in &compiled.constraints {
            for fp in c.footprint {
                width = width.max((fp.1 - fp.0 + 1) as usize);
            }
        }
        for a in &compiled.acceptance {
            let lo = a.footprint[0].0.min(a.footprint[1].0);
            let hi = a.footprint[0].1.max(a.footprint[1].1);
            width = width.max((hi - lo + 1) as usize);
        }
        let mut optional = [HashSet::new(), HashSet::new()];
        for c in &compiled.constraints {
            for p in 0..2 {
                let (Some(force), Some((lo, hi))) = (&c.force[p], c.premise.extent(p as i64)) else { continue };
                for &(o, a) in force {
                    if o < hi {
                        optional[0].insert(a);
                    }
                    if o > lo {
                        optional[1].insert(a);
                    }
                }
            }
        }
        let optional = optional.map(|s| {
            let mut v: Vec<u32> = s.into_iter().collect();
            v.sort();
            v
        });
        Search {
            compiled,
            width,
            lookahead: width,
            optional,
            budget,
            started: Instant::now(),
            states: 0,
            dump: dump.then(String::new),
            right_cache: HashMap::new(),
            left_cache: HashMap::new(),
            relational: (0..compiled.atoms.len() as u32).filter(|&a| matches!(compiled.atoms[a as usize], CellAtom::Rel(_))).collect(),
            forcers: Self::forcers(compiled),
            floor: None,
            floor_on: true,
        }
    }

    fn forcers(compiled: &Compiled) -> Vec<Vec<(usize, usize, i64)>> {
        let mut out = vec![Vec::new(); compiled.atoms.len()];
        for (i, k) in compiled.constraints.iter().enumerate() {
            for p in 0..2 {
                let Some(force) = &k.force[p] else { continue };
                for &(o, a) in force {
                    out[a as usize].push((i, p, o));
                }
            }
        }
        out
    }

    /// Whether every unjustified atom of the cells `[lo, hi]` can still be
    /// forced, reading cells outside `[lo, hi]` as full.
    fn justifiable(&self, r: &Region, lo: i64, hi: i64) -> bool {
        let shift = self.compiled.atoms.len() as u32;
        let view = Optimistic { r, lo, hi };
        (lo..=hi).all(|m| {
            let l = r.get(m);
            self.relational.iter().all(|&x| {
                if !l.has(x) || l.has(shift + x) {
                    return true;
                }
                self.forcers[x as usize].iter().any(|&(k, p, o)| {
                    let c = m - o;
                    c.rem_euclid(2) as usize == p && self.compiled.constraints[k].premise.eval(c, &view)
                })
            })
        })
    }

    pub fn take_dump(&mut self) -> Option<String> {
        self.dump.take()
    }

    fn tick(&mut self) -> Result<(), AutomataError> {
        self.states += 1;
        if self.states > self.budget.max_states || self.budget.max_time.is_some_and(|t| self.started.elapsed() > t) {
            return Err(AutomataError::Budget { states: self.states });
        }
        if self.budget.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            return Err(AutomataError::Cancelled);
        }
        Ok(())
    }

    fn log_window(&mut self, tag: &str, w: &Window) {
        let Some(d) = self.dump.as_mut() else { return };
        let _ = writeln!(d, "{tag} window {}..{}", w.first, w.last());
        for (i, l) in w.cells.iter().enumerate() {
            let n = self.compiled.atoms.len() as u32;
            let atoms: Vec<String> = l.iter().filter(|&a| a < n).map(|a| self.compiled.describe(a)).collect();
            let _ = writeln!(d, "  cell {}: {{{}}}", w.first + i as i64, atoms.join(", "));
        }
    }

    fn data_label(&self, c: i64) -> Label {
        if let Some(f) = self.floor.as_ref().filter(|f| self.floor_on && c >= f.base && c < f.end()) {
            return f.get(c).clone();
        }
        let n = self.compiled.atoms.len();
        let mut l = Label::new(2 * n);
        for a in self.compiled.data_at(c) {
            l.insert(a);
            l.insert(n as u32 + a);
        }
        l
    }

    /// Marks the atoms forced by constraints anchored so that their
    /// footprint lies in `[lo, hi]` and meets cell `n`.
    fn justify(&self, r: &mut Region, lo: i64, hi: i64, n: i64) {
        let w = self.width as i64;
        let shift = self.compiled.atoms.len() as u32;
        for c in n - w..=n + w {
            let p = c.rem_euclid(2) as usize;
            for k in &self.compiled.constraints {
                let fp = k.footprint[p];
                if c + fp.0 < lo || c + fp.1 > hi || c + fp.0 > n || c + fp.1 < n {
                    continue;
                }
                let Some(force) = &k.force[p] else { continue };
                if !k.premise.eval(c, r) {
                    continue;
                }
                for &(o, a) in force {
                    if c + o >= lo && c + o <= hi {
                        r.get_mut(c + o).insert(shift + a);
                    }
                }
            }
        }
    }


    /// Closes the region under the forcing constraints whose footprint it
    /// contains. Cells in `fixed` may only gain atoms if `relax` is set.
    fn close(&self, r: &mut Region, fixed: (i64, i64), relax: bool) -> Result<(), Fail> {
        let w = self.width as i64;
        loop {
            let mut changed = false;
            for c in r.base - w..r.end() + w {
                let p = c.rem_euclid(2) as usize;
                for k in &self.compiled.constraints {
                    let fp = k.footprint[p];
                    if c + fp.0 < r.base || c + fp.1 >= r.end() {
                        continue;
                    }
                    if k.is_bottom() {
                        if k.premise.eval(c, r) {
                            return Err(Fail::Bottom);
                        }
                        continue;
                    }
                    let Some(force) = &k.force[p] else { continue };
                    if force.iter().all(|&(o, a)| r.has(c + o, a)) || !k.premise.eval(c, r) {
                        continue;
                    }
                    for &(o, a) in force {
                        let t = c + o;
                        if !r.get(t).has(a) {
                            if !relax && t >= fixed.0 && t <= fixed.1 {
                                return Err(Fail::Conflict);
                            }
                            r.get_mut(t).insert(a);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    /// Every constraint anchored so that its footprint lies in `[lo, hi]`
    /// and meets cell `n` holds.
    fn valid(&self, r: &Region, lo: i64, hi: i64, n: i64) -> bool {
        let w = self.width as i64;
        for c in n - w..=n + w {
            let p = c.rem_euclid(2) as usize;
            for k in &self.compiled.constraints {
                let fp = k.footprint[p];
                if c + fp.0 < lo || c + fp.1 > hi || c + fp.0 > n || c + fp.1 < n {
                    continue;
                }
                if !k.holds(c, r) {
                    return false;
                }
            }
        }
        true
    }

    /// Region made of the window, the next cell in direction `dir` and
    /// `lookahead` further cells.
    fn extension_region(&self, w: &Window, dir: i64) -> (Region, i64) {
        let k = self.lookahead as i64;
        if dir > 0 {
            let n = w.last() + 1;
            let mut cells = w.cells.clone();
            cells.extend((n..=n + k).map(|c| self.data_label(c)));
            (Region { base: w.first, cells }, n)
        } else {
            let n = w.first - 1;
            let mut cells: Vec<Label> = (n - k..=n).map(|c| self.data_label(c)).collect();
            cells.extend(w.cells.iter().cloned());
            (Region { base: n - k, cells }, n)
        }
    }

    fn start_expansion(&self, w: &Window, dir: i64, extra_optional: bool) -> Option<Pending> {
        let (mut base, n) = self.extension_region(w, dir);
        self.close(&mut base, (w.first, w.last()), false).ok()?;
        let mut opts: Vec<u32> = self.optional[dir_index(dir)].clone();
        if extra_optional {
            opts.extend(&self.optional[1 - dir_index(dir)]);
            opts.sort();
            opts.dedup();
        }
        opts.retain(|&a| !base.get(n).has(a));
        Some(Pending { subsets: Subsets::new(opts.len()), base, window: w.clone(), new_cell: n, opts, seen: HashSet::new() })
    }

    /// The next successor window of a pending expansion, if any. `bounds`
    /// restricts the validity check to cells at or after a left boundary
    /// (used while building the initial window).
    fn next_successor(&self, p: &mut Pending, dir: i64, left_bound: Option<i64>) -> Option<Window> {
        let w = &p.window;
        let n = p.new_cell;
        for subset in p.subsets.by_ref() {
            let mut r = p.base.clone();
            for &i in &subset {
                r.get_mut(n).insert(p.opts[i]);
            }
            if !subset.is_empty() && self.close(&mut r, (w.first, w.last()), false).is_err() {
                continue;
            }
            let label = r.get(n).clone();
            if !p.seen.insert(label.clone()) {
                continue;
            }
            let (lo, hi) = if dir > 0 { (w.first + 1, n) } else { (n, w.last() - 1) };
            let lo = left_bound.map_or(lo, |b| b.max(n - self.width as i64 + 1));
            if !self.valid(&r, lo, hi, n) {
                continue;
            }
            self.justify(&mut r, lo, hi, n);
            let full = w.cells.len() >= self.width;
            if !self.justifiable(&r, w.first.min(n), w.last().max(n)) {
                continue;
            }
            let (a, b) = match (dir > 0, full) {
                (true, true) => (w.first + 1, n),
                (true, false) => (w.first, n),
                (false, true) => (n, w.last() - 1),
                (false, false) => (n, w.last()),
            };
            return Some(Window { first: a, cells: (a..=b).map(|c| r.get(c).clone()).collect() });
        }
        None
    }

    /// Moves a window beyond the data so that its position only depends on
    /// parity.
    fn normalise(&self, mut w: Window, dir: i64) -> Window {
        let (lo, hi) = self.compiled.data_span;
        if dir > 0 {
            let anchor = hi + 1;
            w.first = anchor + (w.first - anchor).rem_euclid(2);
        } else {
            let anchor = lo - 1;
            let last = anchor - (anchor - w.last()).rem_euclid(2);
            w.first = last - w.cells.len() as i64 + 1;
        }
        w
    }

    /// Whether the automaton moving in direction `dir` accepts some infinite
    /// word from `init`: nested depth-first search over windows paired
    /// with a counter over the acceptance families.
    pub fn nonempty(&mut self, dir: i64, init: Window) -> Result<bool, AutomataError> {
        let on = std::mem::replace(&mut self.floor_on, false);
        let r = self.nonempty_from(dir, init);
        self.floor_on = on;
        r
    }

    fn nonempty_from(&mut self, dir: i64, init: Window) -> Result<bool, AutomataError> {
        let fams: Vec<_> = self.compiled.acceptance.iter().filter(|a| a.direction == dir).cloned().collect();
        let nf = fams.len();
        let mut nodes: Vec<Node> = Vec::new();
        let mut index: HashMap<(i64, Vec<Label>), usize> = HashMap::new();
        let init = self.normalise(init, dir);
        let holds = |w: &Window, j: usize| {
            let f = &fams[j];
            let c = if dir > 0 {
                w.last() - f.footprint[0].1.max(f.footprint[1].1)
            } else {
                w.first - f.footprint[0].0.min(f.footprint[1].0)
            };
            f.holds(c, w)
        };
        let advance = |w: &Window, ctr: usize| {
            let mut j = if ctr == nf { 0 } else { ctr };
            while j < nf && holds(w, j) {
                j += 1;
            }
            j
        };
        let start_ctr = advance(&init, nf);
        self.tick()?;
        self.log_window(if dir > 0 { "right" } else { "left" }, &init);
        index.insert(init.key(), 0);
        nodes.push(Node { window: init, succ: Vec::new(), pending: None, started: false });

        let mut succ = |s: &mut Self, nodes: &mut Vec<Node>, id: usize, i: usize| -> Result<Option<usize>, AutomataError> {
            loop {
                if i < nodes[id].succ.len() {
                    return Ok(Some(nodes[id].succ[i]));
                }
                if !nodes[id].started {
                    nodes[id].started = true;
                    nodes[id].pending = s.start_expansion(&nodes[id].window, dir, false);
                }
                let Some(mut p) = nodes[id].pending.take() else { return Ok(None) };
                let next = s.next_successor(&mut p, dir, None);
                nodes[id].pending = Some(p);
                let Some(w) = next else {
                    nodes[id].pending = None;
                    return Ok(None);
                };
                let w = s.normalise(w, dir);
                let key = w.key();
                let target = match index.get(&key) {
                    Some(&t) => t,
                    None => {
                        s.tick()?;
                        s.log_window(if dir > 0 { "right" } else { "left" }, &w);
                        let t = nodes.len();
                        index.insert(key, t);
                        nodes.push(Node { window: w, succ: Vec::new(), pending: None, started: false });
                        t
                    }
                };
                if !nodes[id].succ.contains(&target) {
                    nodes[id].succ.push(target);
                }
            }
        };

        // Blue search with early detection: an edge back into the blue
        // stack closes a cycle, accepting if the segment it closes has an
        // accepting state. Red searches start in post-order as usual.
        let mut blue: HashSet<(usize, usize)> = HashSet::new();
        let mut red: HashSet<(usize, usize)> = HashSet::new();
        let mut on_stack: HashMap<(usize, usize), usize> = HashMap::new();
        // accepting[i] counts accepting states among stack[..=i]
        let mut accepting: Vec<usize> = Vec::new();
        let start = (0usize, start_ctr);
        blue.insert(start);
        on_stack.insert(start, 0);
        accepting.push(usize::from(start.1 == nf));
        let mut stack: Vec<((usize, usize), usize)> = vec![(start, 0)];
        while let Some(&mut (node, ref mut i)) = stack.last_mut() {
            let idx = *i;
            *i += 1;
            match succ(self, &mut nodes, node.0, idx)? {
                Some(t) => {
                    let next = (t, advance(&nodes[t].window, node.1));
                    if let Some(&pos) = on_stack.get(&next) {
                        let below = if pos == 0 { 0 } else { accepting[pos - 1] };
                        if accepting[accepting.len() - 1] > below {
                            return Ok(true);
                        }
                    }
                    if blue.insert(next) {
                        on_stack.insert(next, stack.len());
                        let acc = accepting[accepting.len() - 1] + usize::from(next.1 == nf);
                        accepting.push(acc);
                        stack.push((next, 0));
                    }
                }
                None => {
                    stack.pop();
                    on_stack.remove(&node);
                    accepting.pop();
                    if node.1 == nf {
                        let mut rstack: Vec<((usize, usize), usize)> = vec![(node, 0)];
                        while let Some(&mut (rn, ref mut j)) = rstack.last_mut() {
                            let jdx = *j;
                            *j += 1;
                            match succ(self, &mut nodes, rn.0, jdx)? {
                                Some(t) => {
                                    let next = (t, advance(&nodes[t].window, rn.1));
                                    if next == node {
                                        return Ok(true);
                                    }
                                    if red.insert(next) {
                                        rstack.push((next, 0));
                                    }
                                }
                                None => {
                                    rstack.pop();
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(false)
    }

    /// Span of the initial window: the data's cells with one window of
    /// margin on either side.
    pub fn initial_span(&self) -> (i64, i64) {
        let (lo, hi) = self.compiled.data_span;
        (lo - self.width as i64, hi + self.width as i64)
    }

    /// A cheap sufficient test for inconsistency: propagate lower bounds
    /// over the initial span and then outwards until the window repeats.
    pub fn lower_bound_refutes(&mut self) -> Result<bool, AutomataError> {
        let (s0, e0) = self.initial_span();
        let k = self.lookahead as i64;
        let mut r = Region { base: s0 - k, cells: (s0 - k..=e0 + k).map(|c| self.data_label(c)).collect() };
        if self.close(&mut r, (0, -1), true) == Err(Fail::Bottom) {
            return Ok(true);
        }
        self.floor = Some(r.clone());
        let w = self.width;
        let right = Window { first: e0 - w as i64 + 1, cells: r.cells[r.cells.len() - k as usize - w..r.cells.len() - k as usize].to_vec() };
        let left = Window { first: s0, cells: r.cells[k as usize..k as usize + w].to_vec() };
        for (dir, mut win) in [(1i64, right), (-1, left)] {
            let mut seen = HashSet::new();
            while seen.insert(self.normalise(win.clone(), dir).key()) {
                self.tick()?;
                let (mut r, _) = self.extension_region(&win, dir);
                if self.close(&mut r, (0, -1), true) == Err(Fail::Bottom) {
                    return Ok(true);
                }
                win = if dir > 0 {
                    Window { first: win.first + 1, cells: r.cells[1..=w].to_vec() }
                } else {
                    Window { first: win.first - 1, cells: r.cells[k as usize..k as usize + w].to_vec() }
                };
            }
        }
        Ok(false)
    }

    /// Searches for a labelling of the initial span, cell by cell from the
    /// left, that both automata can extend forever.
    pub fn consistent(&mut self) -> Result<bool, AutomataError> {
        if self.lower_bound_refutes()? {
            return Ok(false);
        }
        let (s0, e0) = self.initial_span();
        let w = self.width as i64;
        let mut committed: Vec<Label> = Vec::new();
        self.initial_dfs(s0, e0, w, &mut committed)
    }

    fn initial_dfs(&mut self, s0: i64, e0: i64, w: i64, committed: &mut Vec<Label>) -> Result<bool, AutomataError> {
        let n = s0 + committed.len() as i64;
        if n > e0 {
            let cells = committed[committed.len() - w as usize..].to_vec();
            let right = Window { first: e0 - w + 1, cells };
            let rk = right.key();
            let ok = match self.right_cache.get(&rk) {
                Some(&v) => v,
                None => {
                    let v = self.nonempty(1, right)?;
                    self.right_cache.insert(rk, v);
                    v
                }
            };
            if !ok {
                return Ok(false);
            }
            return self.left_nonempty(Window { first: s0, cells: committed[..w as usize].to_vec() });
        }
        if n > s0 && n <= s0 + w && !self.left_nonempty(Window { first: s0, cells: committed.clone() })? {
            // a shorter window, or justification marks still missing, only
            // make the left automaton more permissive, so a rejection of a
            // prefix is final
            return Ok(false);
        }
        self.tick()?;
        // the window of committed cells preceding n (possibly shorter than w)
        let from = committed.len().saturating_sub(w as usize);
        let window = Window { first: n - (committed.len() - from) as i64, cells: committed[from..].to_vec() };
        let near_left = n < s0 + w;
        let pending = if window.cells.is_empty() {
            self.first_cell_expansion(n, near_left)
        } else {
            self.start_expansion(&window, 1, near_left)
        };
        let Some(mut p) = pending else { return Ok(false) };
        loop {
            let saved = committed.clone();
            if window.cells.is_empty() {
                let Some(label) = self.next_first_cell(&mut p) else { return Ok(false) };
                committed.push(label);
            } else {
                let Some(nw) = self.next_successor(&mut p, 1, Some(s0)) else { return Ok(false) };
                let at = (nw.first - s0) as usize;
                committed.truncate(at);
                committed.extend(nw.cells);
            }
            if self.initial_dfs(s0, e0, w, committed)? {
                return Ok(true);
            }
            *committed = saved;
        }
    }

    fn left_nonempty(&mut self, left: Window) -> Result<bool, AutomataError> {
        let key = left.key();
        if let Some(&v) = self.left_cache.get(&key) {
            return Ok(v);
        }
        let v = self.nonempty(-1, left)?;
        self.left_cache.insert(key, v);
        Ok(v)
    }

    fn first_cell_expansion(&self, n: i64, extra: bool) -> Option<Pending> {
        let k = self.lookahead as i64;
        let mut base = Region { base: n, cells: (n..=n + k).map(|c| self.data_label(c)).collect() };
        self.close(&mut base, (0, -1), false).ok()?;
        let mut opts: Vec<u32> = self.optional[0].clone();
        if extra {
            opts.extend(&self.optional[1]);
            opts.sort();
            opts.dedup();
        }
        opts.retain(|&a| !base.get(n).has(a));
        Some(Pending {
            subsets: Subsets::new(opts.len()),
            base,
            window: Window { first: n, cells: Vec::new() },
            new_cell: n,
            opts,
            seen: HashSet::new(),
        })
    }

    fn next_first_cell(&self, p: &mut Pending) -> Option<Label> {
        let n = p.new_cell;
        for subset in p.subsets.by_ref() {
            let mut r = p.base.clone();
            for &i in &subset {
                r.get_mut(n).insert(p.opts[i]);
            }
            if !subset.is_empty() && self.close(&mut r, (0, -1), false).is_err() {
                continue;
            }
            let label = r.get(n).clone();
            if !p.seen.insert(label.clone()) {
                continue;
            }
            if self.valid(&r, n, n, n) {
                return Some(label);
            }
        }
        None
    }
}
