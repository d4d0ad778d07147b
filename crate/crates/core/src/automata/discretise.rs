//! Partition of the timeline into cells: punctual cells at every point
//! `t + i·d′` for the rationals `t` of the dataset and `d′` the gcd of the
//! program's numbers, and open cells between consecutive punctual ones.
//!
//! Cells are numbered so that even indices are punctual. Shifting by `d′`
//! moves every cell by `2m` indices, where `m` is the number of distinct
//! residues of the anchors modulo `d′`.

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::syntax::{Dataset, Program};
use crate::temporal::{gcd_rational, Interval, Rational, TimePoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discretisation {
    pub gcd: Rational,
    /// Sorted distinct residues of the anchors in `[0, gcd)`.
    pub residues: Vec<Rational>,
    pub anchors: Vec<Rational>,
}

pub fn program_gcd(program: &Program) -> Rational {
    let mut g = Rational::zero();
    for r in program.ranges() {
        for t in [r.lo(), r.hi()] {
            if let TimePoint::Fin(x) = t {
                if !x.is_zero() {
                    g = gcd_rational(&g, x);
                }
            }
        }
    }
    if g.is_zero() {
        Rational::one()
    } else {
        g
    }
}

impl Discretisation {
    pub fn build(program: &Program, dataset: &Dataset) -> Discretisation {
        let mut anchors = Vec::new();
        for f in &dataset.facts {
            for t in [f.interval.lo(), f.interval.hi()] {
                if let TimePoint::Fin(x) = t {
                    anchors.push(x.clone());
                }
            }
        }
        Discretisation::new(program_gcd(program), anchors)
    }

    pub fn new(gcd: Rational, mut anchors: Vec<Rational>) -> Discretisation {
        anchors.sort();
        anchors.dedup();
        let mut residues: Vec<Rational> = anchors.iter().map(|t| t - (t / &gcd).floor() * &gcd).collect();
        if residues.is_empty() {
            residues.push(Rational::zero());
        }
        residues.sort();
        residues.dedup();
        Discretisation { gcd, residues, anchors }
    }

    fn m(&self) -> i64 {
        self.residues.len() as i64
    }

    /// Number of cells per `gcd` of time.
    pub fn period(&self) -> i64 {
        2 * self.m()
    }

    /// The `j`-th punctual point.
    pub fn point(&self, j: i64) -> Rational {
        let (q, i) = j.div_mod_floor(&self.m());
        &self.residues[i as usize] + Rational::from_integer(q.into()) * &self.gcd
    }

    pub fn cell(&self, c: i64) -> Interval {
        let (j, odd) = c.div_mod_floor(&2);
        if odd == 0 {
            Interval::point(self.point(j))
        } else {
            Interval::new(TimePoint::Fin(self.point(j)), false, TimePoint::Fin(self.point(j + 1)), false)
                .expect("consecutive grid points differ")
        }
    }

    pub fn cell_containing(&self, t: &Rational) -> i64 {
        let q = (t / &self.gcd).floor();
        let rem = t - &q * &self.gcd;
        let q = q.to_integer().to_i64().expect("time point in range");
        let base = q * self.m();
        match self.residues.binary_search(&rem) {
            Ok(i) => 2 * (base + i as i64),
            Err(i) => 2 * (base + i as i64 - 1) + 1,
        }
    }

    /// First and last cell meeting `iv`; `None` for an unbounded side.
    pub fn cell_span(&self, iv: &Interval) -> (Option<i64>, Option<i64>) {
        let lo = iv.lo().fin().map(|t| {
            let c = self.cell_containing(t);
            if c % 2 == 0 && !iv.lo_closed() {
                c + 1
            } else {
                c
            }
        });
        let hi = iv.hi().fin().map(|t| {
            let c = self.cell_containing(t);
            if c % 2 == 0 && !iv.hi_closed() {
                c - 1
            } else {
                c
            }
        });
        (lo, hi)
    }

    fn steps(&self, t: &Rational) -> i64 {
        let k = t / &self.gcd;
        assert!(k.is_integer() && !k.is_negative(), "range endpoint {t} is not a multiple of {}", self.gcd);
        k.to_integer().to_i64().expect("range in bounds")
    }

    /// Offsets of the cells met by `t + r` for `t` a representative point
    /// of a punctual (`punct`) or open cell: the punctual point itself, or
    /// the midpoint of the open cell. The upper offset is `None` when `r`
    /// is unbounded.
    pub fn offsets(&self, r: &Interval, punct: bool) -> (i64, Option<i64>) {
        let p = self.period();
        let lo = p * self.steps(r.lo().fin().expect("ranges start at a finite point"))
            + i64::from(punct && !r.lo_closed());
        let hi = r.hi().fin().map(|h| p * self.steps(h) - i64::from(punct && !r.hi_closed()));
        (lo, hi)
    }
}
