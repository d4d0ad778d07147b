//! Static analysis over the predicate dependency graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use crate::symbol::Sym;
use crate::syntax::{Metric, Program, Rule};

/// A vertex of the dependency graph; rules with a BOTTOM head point into a
/// single virtual vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Pred(Sym),
    Bottom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recursion {
    Recursive,
    NonRecursive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Propagation {
    Forward,
    Backward,
    Mixed,
}

#[derive(Clone, Debug, Default)]
pub struct DependencyGraph {
    pub vertices: BTreeSet<Vertex>,
    pub edges: BTreeSet<(Vertex, Vertex)>,
}

fn head_vertex(r: &Rule) -> Vertex {
    r.head_predicate().map_or(Vertex::Bottom, Vertex::Pred)
}

impl DependencyGraph {
    pub fn new(program: &Program) -> DependencyGraph {
        let mut g = DependencyGraph::default();
        for r in &program.rules {
            let h = head_vertex(r);
            g.vertices.insert(h);
            for q in r.body_predicates() {
                g.vertices.insert(Vertex::Pred(q));
                g.edges.insert((Vertex::Pred(q), h));
            }
        }
        g
    }

    fn successors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.edges.iter().filter(move |e| e.0 == v).map(|e| e.1)
    }

    /// Vertices reachable from `v` by a path of length at least one.
    fn reach(&self, v: Vertex) -> BTreeSet<Vertex> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<Vertex> = self.successors(v).collect();
        while let Some(u) = stack.pop() {
            if seen.insert(u) {
                stack.extend(self.successors(u));
            }
        }
        seen
    }

    /// Vertices from which one of `targets` is reachable (targets included).
    fn ancestors(&self, targets: &[Vertex]) -> BTreeSet<Vertex> {
        let mut seen: BTreeSet<Vertex> = targets.iter().copied().collect();
        let mut stack: Vec<Vertex> = targets.to_vec();
        while let Some(u) = stack.pop() {
            for (a, b) in &self.edges {
                if *b == u && seen.insert(*a) {
                    stack.push(*a);
                }
            }
        }
        seen
    }

    pub fn to_dot(&self) -> String {
        let name = |v: &Vertex| match v {
            Vertex::Pred(p) => format!("\"{p}\""),
            Vertex::Bottom => "\"BOTTOM\"".to_string(),
        };
        let mut s = String::from("digraph dependencies {\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  {};", name(v));
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "  {} -> {};", name(a), name(b));
        }
        s.push_str("}\n");
        s
    }
}

/// Recursive predicates: those at the end of a path through a cycle.
pub fn classify_predicates(program: &Program) -> BTreeMap<Sym, Recursion> {
    let g = DependencyGraph::new(program);
    let cyclic: Vec<Vertex> = g.vertices.iter().copied().filter(|v| g.reach(*v).contains(v)).collect();
    let mut tainted = BTreeSet::new();
    for c in cyclic {
        tainted.insert(c);
        tainted.extend(g.reach(c));
    }
    program
        .predicates()
        .into_iter()
        .map(|p| {
            let rec = if tainted.contains(&Vertex::Pred(p)) { Recursion::Recursive } else { Recursion::NonRecursive };
            (p, rec)
        })
        .collect()
}

pub fn is_recursive_metric(m: &Metric, classes: &BTreeMap<Sym, Recursion>) -> bool {
    m.predicates().iter().any(|p| classes.get(p) == Some(&Recursion::Recursive))
}

/// Indices of rules whose head atom is recursive.
pub fn recursive_fragment(program: &Program) -> Vec<usize> {
    let classes = classify_predicates(program);
    (0..program.rules.len()).filter(|&i| is_recursive_metric(&program.rules[i].head, &classes)).collect()
}

/// Rules that may contribute to deriving `target` or BOTTOM.
pub fn relevant_rules(program: &Program, target: Sym) -> Program {
    let g = DependencyGraph::new(program);
    let live = g.ancestors(&[Vertex::Pred(target), Vertex::Bottom]);
    let rules = program.rules.iter().filter(|r| live.contains(&head_vertex(r))).cloned().collect();
    Program::new(rules)
}

pub fn is_forward_rule(r: &Rule) -> bool {
    r.body.iter().all(Metric::is_past_only) && r.head.is_future_only()
}

pub fn is_backward_rule(r: &Rule) -> bool {
    r.body.iter().all(Metric::is_future_only) && r.head.is_past_only()
}

pub fn propagation_class<'a>(rules: impl IntoIterator<Item = &'a Rule> + Clone) -> Propagation {
    if rules.clone().into_iter().all(is_forward_rule) {
        Propagation::Forward
    } else if rules.into_iter().all(is_backward_rule) {
        Propagation::Backward
    } else {
        Propagation::Mixed
    }
}

/// Human-readable classification table.
pub fn report(program: &Program) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "predicate\tclass");
    for (p, c) in classify_predicates(program) {
        let c = match c {
            Recursion::Recursive => "recursive",
            Recursion::NonRecursive => "non-recursive",
        };
        let _ = writeln!(s, "{p}\t{c}");
    }
    let prop = match propagation_class(&program.rules) {
        Propagation::Forward => "forward",
        Propagation::Backward => "backward",
        Propagation::Mixed => "mixed",
    };
    let _ = writeln!(s, "propagation\t{prop}");
    s
}
