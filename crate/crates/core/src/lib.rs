//! A reasoner for DatalogMTL, Datalog extended with metric temporal
//! operators over the rational timeline.
//!
//! Consistency and fact entailment are decided by racing an optimised
//! semi-naive materialisation against a Büchi-automata decision procedure.

pub mod analysis;
pub mod automata;
pub mod engine;
pub mod eval;
pub mod materialise;
pub mod symbol;
pub mod syntax;
pub mod store;
pub mod temporal;

pub use symbol::Sym;
pub use syntax::{Atom, BinOp, Dataset, Fact, GroundAtom, Metric, Program, Rule, Term, UnOp};
pub use temporal::{Interval, Rational, TimePoint};
