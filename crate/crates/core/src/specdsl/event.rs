//! Event expressions: site constraints combined with `&`, `|`, `!`.
//!
//! ```text
//! event  = and { "|" and } ;
//! and    = unary { "&" unary } ;
//! unary  = "!" unary | "(" event ")" | "true" | "false" | atom ;
//! atom   = site ( "=" spin | "in" set | "notin" set ) ;
//! set    = "{" [ item { "," item } ] "}" ;
//! item   = spin [ ".." spin ] ;
//! ```

use std::collections::BTreeSet;
use std::fmt;

use super::error::ParseError;
use super::lexer::{Lexer, Tok};
use crate::cylinder::{CylinderSet, SiteConstraint, Spin, SpinSet};
use crate::error::Result;
use crate::tree::Vertex;

/// Largest set a `{a..b}` range may expand to.
pub const MAX_RANGE: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventExpr {
    True,
    False,
    Site {
        vertex: Vertex,
        constraint: SiteConstraint,
    },
    Not(Box<EventExpr>),
    And(Vec<EventExpr>),
    Or(Vec<EventExpr>),
}

impl EventExpr {
    /// The cylinder set this expression denotes.
    pub fn lower(&self, spins: SpinSet) -> Result<CylinderSet> {
        Ok(match self {
            EventExpr::True => CylinderSet::full(spins),
            EventExpr::False => CylinderSet::empty(spins),
            EventExpr::Site { vertex, constraint } => {
                CylinderSet::site(spins, *vertex, constraint.clone().normalize(spins))?
            }
            EventExpr::Not(e) => e.lower(spins)?.complement()?,
            EventExpr::And(es) => {
                let mut acc = CylinderSet::full(spins);
                for e in es {
                    acc = acc.intersect(&e.lower(spins)?);
                }
                acc
            }
            EventExpr::Or(es) => {
                let mut acc = CylinderSet::empty(spins);
                for e in es {
                    acc = acc.union(&e.lower(spins)?);
                }
                acc
            }
        })
    }

    /// Truth value on a configuration given as a lookup.
    pub fn holds(&self, value: &impl Fn(Vertex) -> Spin) -> bool {
        match self {
            EventExpr::True => true,
            EventExpr::False => false,
            EventExpr::Site { vertex, constraint } => constraint.admits(value(*vertex)),
            EventExpr::Not(e) => !e.holds(value),
            EventExpr::And(es) => es.iter().all(|e| e.holds(value)),
            EventExpr::Or(es) => es.iter().any(|e| e.holds(value)),
        }
    }

    /// Largest vertex index mentioned.
    pub fn max_vertex(&self) -> Option<Vertex> {
        match self {
            EventExpr::True | EventExpr::False => None,
            EventExpr::Site { vertex, .. } => Some(*vertex),
            EventExpr::Not(e) => e.max_vertex(),
            EventExpr::And(es) | EventExpr::Or(es) => es.iter().filter_map(EventExpr::max_vertex).max(),
        }
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, s: &BTreeSet<Spin>) -> fmt::Result {
    let items: Vec<String> = s.iter().map(u64::to_string).collect();
    write!(f, "{{{}}}", items.join(","))
}

impl fmt::Display for EventExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventExpr::True => f.write_str("true"),
            EventExpr::False => f.write_str("false"),
            EventExpr::Site { vertex, constraint } => match constraint {
                SiteConstraint::Any => write!(f, "{vertex} notin {{}}"),
                SiteConstraint::In(s) if s.len() == 1 => {
                    write!(f, "{vertex}={}", s.iter().next().expect("one element"))
                }
                SiteConstraint::In(s) => {
                    write!(f, "{vertex} in ")?;
                    write_set(f, s)
                }
                SiteConstraint::NotIn(s) => {
                    write!(f, "{vertex} notin ")?;
                    write_set(f, s)
                }
            },
            EventExpr::Not(e) => match **e {
                EventExpr::And(_) | EventExpr::Or(_) => write!(f, "!({e})"),
                _ => write!(f, "!{e}"),
            },
            EventExpr::And(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    match e {
                        EventExpr::And(_) | EventExpr::Or(_) => write!(f, "({e})")?,
                        _ => write!(f, "{e}")?,
                    }
                }
                Ok(())
            }
            EventExpr::Or(es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" | ")?;
                    }
                    match e {
                        EventExpr::Or(_) => write!(f, "({e})")?,
                        _ => write!(f, "{e}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Parses an event without checking spins against a spin set.
pub fn parse_event(text: &str) -> std::result::Result<EventExpr, ParseError> {
    parse_event_at(text, 1, 1, None)
}

/// Parses an event and rejects spins outside `spins`.
pub fn parse_event_for(text: &str, spins: SpinSet) -> std::result::Result<EventExpr, ParseError> {
    parse_event_at(text, 1, 1, Some(spins))
}

pub(crate) fn parse_event_at(
    text: &str,
    line: usize,
    col: usize,
    spins: Option<SpinSet>,
) -> std::result::Result<EventExpr, ParseError> {
    let mut p = Parser {
        lex: Lexer::new(text, line, col),
        spins,
    };
    let e = p.or()?;
    p.lex.expect_eof(&["&", "|"])?;
    Ok(e)
}

struct Parser {
    lex: Lexer,
    spins: Option<SpinSet>,
}

type PResult<T> = std::result::Result<T, ParseError>;

const UNARY_START: &[&str] = &["x<n>", "!", "(", "true", "false"];

impl Parser {
    fn or(&mut self) -> PResult<EventExpr> {
        let mut items = vec![self.and()?];
        while self.lex.eat_sym('|')? {
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            EventExpr::Or(items)
        })
    }

    fn and(&mut self) -> PResult<EventExpr> {
        let mut items = vec![self.unary()?];
        while self.lex.eat_sym('&')? {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            EventExpr::And(items)
        })
    }

    fn unary(&mut self) -> PResult<EventExpr> {
        let t = self.lex.peek()?.clone();
        match &t.tok {
            Tok::Sym('!') => {
                self.lex.next()?;
                Ok(EventExpr::Not(Box::new(self.unary()?)))
            }
            Tok::Sym('(') => {
                self.lex.next()?;
                let e = self.or()?;
                if !self.lex.eat_sym(')')? {
                    return Err(self.lex.error_at("unclosed parenthesis", &[")", "&", "|"]));
                }
                Ok(e)
            }
            Tok::Word(w) if w == "true" => {
                self.lex.next()?;
                Ok(EventExpr::True)
            }
            Tok::Word(w) if w == "false" => {
                self.lex.next()?;
                Ok(EventExpr::False)
            }
            Tok::Site(i) => {
                self.lex.next()?;
                let vertex = Vertex(*i);
                let constraint = self.constraint()?;
                Ok(EventExpr::Site { vertex, constraint })
            }
            _ => Err(self.lex.error_at("expected a site constraint", UNARY_START)),
        }
    }

    fn constraint(&mut self) -> PResult<SiteConstraint> {
        let t = self.lex.peek()?.clone();
        match &t.tok {
            Tok::Sym('=') => {
                self.lex.next()?;
                let q = self.spin()?;
                Ok(SiteConstraint::eq(q))
            }
            Tok::Word(w) if w == "in" => {
                self.lex.next()?;
                Ok(SiteConstraint::In(self.set()?))
            }
            Tok::Word(w) if w == "notin" => {
                self.lex.next()?;
                Ok(SiteConstraint::NotIn(self.set()?))
            }
            _ => Err(self.lex.error_at("expected a constraint", &["=", "in", "notin"])),
        }
    }

    fn spin(&mut self) -> PResult<Spin> {
        let (line, col) = {
            let t = self.lex.peek()?;
            (t.line, t.col)
        };
        let q = self.lex.number()?;
        if let Some(s @ SpinSet::Finite(size)) = self.spins {
            if !s.contains(q) {
                return Err(ParseError::new(
                    line,
                    col,
                    format!("spin {q} out of range (spins are 0..{})", size - 1),
                ));
            }
        }
        Ok(q)
    }

    fn set(&mut self) -> PResult<BTreeSet<Spin>> {
        self.lex.expect_sym('{')?;
        let mut out = BTreeSet::new();
        if self.lex.eat_sym('}')? {
            return Ok(out);
        }
        loop {
            let (line, col) = {
                let t = self.lex.peek()?;
                (t.line, t.col)
            };
            let a = self.spin()?;
            if self.lex.peek()?.tok == Tok::DotDot {
                self.lex.next()?;
                let b = self.spin()?;
                if b < a {
                    return Err(ParseError::new(line, col, format!("empty range {a}..{b}")));
                }
                if b - a >= MAX_RANGE {
                    return Err(ParseError::new(
                        line,
                        col,
                        format!("range {a}..{b} exceeds {MAX_RANGE} values"),
                    ));
                }
                out.extend(a..=b);
            } else {
                out.insert(a);
            }
            if self.lex.eat_sym(',')? {
                continue;
            }
            if self.lex.eat_sym('}')? {
                return Ok(out);
            }
            return Err(self.lex.error_at("unterminated set", &[",", "..", "}"]));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_constraint_rectangle() {
        let e = parse_event("x0=1 & x3=0").unwrap();
        let set = e.lower(SpinSet::Finite(2)).unwrap();
        assert_eq!(set.rectangles().len(), 1);
        assert_eq!(set.rectangles()[0].len(), 2);
        assert_eq!(e.to_string(), "x0=1 & x3=0");
    }

    #[test]
    fn ranges_expand() {
        let e = parse_event("x0 in {0..2, 7}").unwrap();
        assert_eq!(e.to_string(), "x0 in {0,1,2,7}");
    }

    #[test]
    fn printing_reparses() {
        for s in [
            "!(x0=1 | x2 in {0,1}) & (x1=0 | true)",
            "x0=0 | (x1=1 | x2=0)",
            "!!x4 notin {3}",
            "(x0=1 & x1=1) & x2=0",
            "false | x0 in {}",
        ] {
            let e = parse_event(s).unwrap();
            assert_eq!(parse_event(&e.to_string()).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn errors_carry_positions_and_expectations() {
        let e = parse_event("x0=1 & ").unwrap_err();
        assert_eq!((e.line, e.column), (1, 8));
        assert!(e.expected.contains(&"(".to_string()));
        let e = parse_event("x0 == 1").unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse_event("x1 in {0,1").unwrap_err();
        assert!(e.expected.contains(&"}".to_string()));
        let e = parse_event_for("x0=5", SpinSet::Finite(2)).unwrap_err();
        assert!(e.message.contains("spin 5 out of range"));
        assert!(parse_event("x0 in {3..1}").is_err());
        assert!(parse_event("x0=1 x1=0").is_err());
    }
}
