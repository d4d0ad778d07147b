//! Line-oriented recursive-descent parser for programs and datasets.
//!
//! Grammar of a rule line (after stripping `#` comments):
//!
//! ```text
//! rule   := head ("<-" | ":-") metric ("AND" metric)*
//! metric := unary (("SINCE" | "UNTIL") interval unary)*
//! unary  := ("DIAMONDMINUS" | "DIAMONDPLUS" | "BOXMINUS" | "BOXPLUS") interval unary
//!         | "TOP" | "BOTTOM" | "(" metric ")" | atom
//! ```

use std::collections::HashMap;

use super::{unsafe_variables, Atom, BinOp, Dataset, Fact, GroundAtom, Metric, Program, Rule, Term, UnOp};
use crate::symbol::Sym;
use crate::temporal::{parse_rational, Interval, IntervalParseError, TimePoint};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: unsafe rule `{rule}`: head variable {var} must occur in the body outside the left operand of SINCE/UNTIL")]
    Unsafe { line: usize, var: String, rule: String },
    #[error("line {line}, column {col}: operator range {range} contains negative numbers")]
    NegativeRange { line: usize, col: usize, range: String },
    #[error("line {line}, column {col}: predicate {pred} has arity {expected} but is used with {found} arguments")]
    ArityMismatch { line: usize, col: usize, pred: String, expected: usize, found: usize },
    #[error("line {line}, column {col}: fact mentions variable {var}; facts must be ground")]
    NonGround { line: usize, col: usize, var: String },
    #[error("line {line}: the body of `{rule}` holds at every time point; state its head as facts instead")]
    VacuousBody { line: usize, rule: String },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Unsafe { line, .. }
            | ParseError::NegativeRange { line, .. }
            | ParseError::ArityMismatch { line, .. }
            | ParseError::NonGround { line, .. }
            | ParseError::VacuousBody { line, .. } => *line,
        }
    }
}

type Arities = HashMap<Sym, usize>;

struct LineParser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    arities: &'a mut Arities,
}

const KEYWORDS: &[&str] =
    &["AND", "TOP", "BOTTOM", "SINCE", "UNTIL", "DIAMONDMINUS", "DIAMONDPLUS", "BOXMINUS", "BOXPLUS"];

fn strip_comment(line: &str) -> &str {
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_quote => escaped = true,
            '"' => in_quote = !in_quote,
            '#' if !in_quote => return &line[..i],
            _ => {}
        }
    }
    line
}

impl<'a> LineParser<'a> {
    fn new(text: &str, line: usize, arities: &'a mut Arities) -> Self {
        LineParser { chars: text.chars().collect(), pos: 0, line, arities }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.pos + 1, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        let n = s.chars().count();
        if self.pos + n <= self.chars.len() && self.chars[self.pos..self.pos + n].iter().copied().eq(s.chars()) {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn is_ident_char(c: char) -> bool {
        c.is_alphanumeric() || c == '_' || c == '.' || c == '-'
    }

    fn peek_ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        let mut end = start;
        while end < self.chars.len() && (self.chars[end].is_alphanumeric() || self.chars[end] == '_') {
            end += 1;
        }
        (end > start).then(|| self.chars[start..end].iter().collect())
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek_ident() {
            Some(s) => {
                self.pos += s.chars().count();
                Ok(s)
            }
            None => Err(self.err("expected an identifier")),
        }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident().as_deref() == Some(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn quoted(&mut self) -> Result<String, ParseError> {
        self.expect("\"")?;
        let mut s = String::new();
        loop {
            match self.chars.get(self.pos).copied() {
                None => return Err(self.err("unterminated quoted constant")),
                Some('"') => {
                    self.pos += 1;
                    return Ok(s);
                }
                Some('\\') => {
                    let c = self.chars.get(self.pos + 1).copied().ok_or_else(|| self.err("dangling escape"))?;
                    s.push(c);
                    self.pos += 2;
                }
                Some(c) => {
                    s.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if !matches!(self.chars.get(start), Some('[') | Some('(')) {
            return Err(self.err("expected an interval such as [0,1]"));
        }
        let mut end = start + 1;
        while end < self.chars.len() && !matches!(self.chars[end], ']' | ')') {
            end += 1;
        }
        if end == self.chars.len() {
            return Err(self.err("unterminated interval"));
        }
        let text: String = self.chars[start..=end].iter().collect();
        match text.parse::<Interval>() {
            Ok(i) => {
                self.pos = end + 1;
                Ok(i)
            }
            Err(IntervalParseError::Empty(_)) => Err(self.err(format!("interval {text} is empty"))),
            Err(IntervalParseError::Malformed(_)) => Err(self.err(format!("malformed interval {text}"))),
        }
    }

    fn range(&mut self) -> Result<Interval, ParseError> {
        self.skip_ws();
        let col = self.pos + 1;
        let r = self.interval()?;
        if *r.lo() < TimePoint::Fin(num_traits::Zero::zero()) {
            return Err(ParseError::NegativeRange { line: self.line, col, range: r.to_string() });
        }
        Ok(r)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.peek() == Some('"') {
            return Ok(Term::Const(Sym::new(&self.quoted()?)));
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && Self::is_ident_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a term"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        let first = s.chars().next().unwrap();
        if first.is_uppercase() || first == '_' {
            if !s.chars().all(|c| c.is_alphanumeric() || c == '_') {
                self.pos = start;
                return Err(self.err(format!("malformed variable `{s}`")));
            }
            Ok(Term::Var(Sym::new(&s)))
        } else {
            Ok(Term::Const(Sym::new(&s)))
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        self.skip_ws();
        let col = self.pos + 1;
        let name = self.ident()?;
        if KEYWORDS.contains(&name.as_str()) {
            self.pos -= name.chars().count();
            return Err(self.err(format!("unexpected keyword {name}")));
        }
        let mut args = Vec::new();
        if self.eat("(")
            && !self.eat(")") {
                loop {
                    args.push(self.term()?);
                    if self.eat(")") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
        let pred = Sym::new(&name);
        match self.arities.get(&pred) {
            Some(&n) if n != args.len() => {
                return Err(ParseError::ArityMismatch {
                    line: self.line,
                    col,
                    pred: name,
                    expected: n,
                    found: args.len(),
                })
            }
            Some(_) => {}
            None => {
                self.arities.insert(pred, args.len());
            }
        }
        Ok(Atom { pred, args })
    }

    fn unop(&mut self) -> Option<UnOp> {
        [UnOp::DiamondMinus, UnOp::DiamondPlus, UnOp::BoxMinus, UnOp::BoxPlus].into_iter().find(|&op| self.keyword(op.keyword()))
    }

    fn unary(&mut self) -> Result<Metric, ParseError> {
        if let Some(op) = self.unop() {
            let r = self.range()?;
            let m = self.unary()?;
            return Ok(Metric::unary(op, r, m));
        }
        if self.keyword("TOP") {
            return Ok(Metric::Top);
        }
        if self.keyword("BOTTOM") {
            return Ok(Metric::Bottom);
        }
        if self.eat("(") {
            let m = self.metric()?;
            self.expect(")")?;
            return Ok(m);
        }
        Ok(Metric::Atom(self.atom()?))
    }

    fn metric(&mut self) -> Result<Metric, ParseError> {
        let mut m = self.unary()?;
        loop {
            let op = if self.keyword("SINCE") {
                BinOp::Since
            } else if self.keyword("UNTIL") {
                BinOp::Until
            } else {
                return Ok(m);
            };
            let r = self.range()?;
            let right = self.unary()?;
            m = Metric::binary(op, r, m, right);
        }
    }

    fn check_head(&self, m: &Metric, col: usize) -> Result<(), ParseError> {
        match m {
            Metric::Bottom | Metric::Atom(_) => Ok(()),
            Metric::Unary(UnOp::BoxMinus | UnOp::BoxPlus, _, inner) if **inner != Metric::Bottom => {
                self.check_head(inner, col)
            }
            _ => Err(ParseError::Syntax {
                line: self.line,
                col,
                msg: "a rule head is BOTTOM or an atom under BOXMINUS/BOXPLUS operators".into(),
            }),
        }
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        self.skip_ws();
        let head_col = self.pos + 1;
        let head = self.metric()?;
        self.check_head(&head, head_col)?;
        if !self.eat("<-") && !self.eat(":-") {
            return Err(self.err("expected `<-`"));
        }
        let mut body = vec![self.metric()?];
        while self.keyword("AND") {
            body.push(self.metric()?);
        }
        if !self.at_end() {
            return Err(self.err("unexpected trailing input"));
        }
        let rule = Rule { head, body };
        if let Some(v) = unsafe_variables(&rule).first() {
            return Err(ParseError::Unsafe { line: self.line, var: v.to_string(), rule: rule.to_string() });
        }
        if rule.body.iter().all(|m| m.atoms().is_empty() && !m.mentions_bottom()) {
            return Err(ParseError::VacuousBody { line: self.line, rule: rule.to_string() });
        }
        Ok(rule)
    }

    fn fact(&mut self) -> Result<Fact, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let atom = self.atom()?;
        let mut args = Vec::with_capacity(atom.args.len());
        for t in &atom.args {
            match t {
                Term::Const(c) => args.push(*c),
                Term::Var(v) => {
                    return Err(ParseError::NonGround { line: self.line, col: start + 1, var: v.to_string() })
                }
            }
        }
        self.expect("@")?;
        let interval = if matches!(self.peek(), Some('[') | Some('(')) {
            self.interval()?
        } else {
            let start = self.pos;
            while self.pos < self.chars.len() && !self.chars[self.pos].is_whitespace() {
                self.pos += 1;
            }
            let s: String = self.chars[start..self.pos].iter().collect();
            match parse_rational(&s) {
                Some(t) => Interval::point(t),
                None => {
                    self.pos = start;
                    return Err(self.err("expected an interval or a time point"));
                }
            }
        };
        if !self.at_end() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(Fact { atom: GroundAtom { pred: atom.pred, args }, interval })
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l))).filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut arities = Arities::new();
    let mut rules = Vec::new();
    for (n, l) in lines(text) {
        rules.push(LineParser::new(l, n, &mut arities).rule()?);
    }
    Ok(Program { rules })
}

pub fn parse_dataset(text: &str) -> Result<Dataset, ParseError> {
    let mut arities = Arities::new();
    let mut facts = Vec::new();
    for (n, l) in lines(text) {
        facts.push(LineParser::new(l, n, &mut arities).fact()?);
    }
    Ok(Dataset { facts })
}

pub fn parse_fact(text: &str) -> Result<Fact, ParseError> {
    let mut arities = Arities::new();
    LineParser::new(strip_comment(text), 1, &mut arities).fact()
}
