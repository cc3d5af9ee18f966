// Copyright 2026 The cqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Parser for the rule-style query syntax:
//!
//! ```text
//! # employees per building
//! q(z1, z2) :- R(x, y | z1), S(x | y), T(y | z2).
//! ```
//!
//! Terms left of `|` sit at key positions. Without `|` every position is a
//! key position. Constants are single-quoted; anything else is a variable.

use std::fmt;

use super::{Atom, ConjunctiveQuery, Constant, QueryError, Term, Variable};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Bar,
    Turnstile,
    Dot,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Quoted(s) => write!(f, "constant '{s}'"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Turnstile => f.write_str("`:-`"),
            Tok::Dot => f.write_str("`.`"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(input: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars);
            }
            continue;
        }
        let tok = match c {
            '(' => {
                bump(&mut chars);
                Tok::LParen
            }
            ')' => {
                bump(&mut chars);
                Tok::RParen
            }
            ',' => {
                bump(&mut chars);
                Tok::Comma
            }
            '|' => {
                bump(&mut chars);
                Tok::Bar
            }
            '.' => {
                bump(&mut chars);
                Tok::Dot
            }
            ':' => {
                bump(&mut chars);
                if chars.peek() == Some(&'-') {
                    bump(&mut chars);
                    Tok::Turnstile
                } else {
                    return Err(err(l, col, "expected `:-`".into()));
                }
            }
            '\'' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match bump(&mut chars) {
                        Some('\'') => break,
                        Some('\n') | None => {
                            return Err(err(l, col, "unterminated constant".into()))
                        }
                        Some(c) => s.push(c),
                    }
                }
                Tok::Quoted(s)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        bump(&mut chars);
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            other => {
                return Err(err(
                    l,
                    col,
                    format!("unexpected character `{other}` (constants must be single-quoted)"),
                ))
            }
        };
        out.push(Spanned {
            tok,
            line: l,
            column: col,
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |s| (s.line, s.column))
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self.here();
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(format!("expected {want}, found {t}"))),
            None => Err(self.error(format!("expected {want}, found end of input"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.next() {
                Some(Tok::Ident(s)) => Ok(s),
                _ => unreachable!(),
            },
            Some(t) => Err(self.error(format!("expected {what}, found {t}"))),
            None => Err(self.error(format!("expected {what}, found end of input"))),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Ident(_)) => Ok(Term::Var(Variable::new(self.ident("term")?))),
            Some(Tok::Quoted(_)) => match self.next() {
                Some(Tok::Quoted(s)) => Ok(Term::Const(Constant::new(s))),
                _ => unreachable!(),
            },
            Some(t) => Err(self.error(format!("expected a term, found {t}"))),
            None => Err(self.error("expected a term, found end of input")),
        }
    }

    /// Comma-separated terms up to (not including) `|` or `)`.
    fn terms(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut out = Vec::new();
        if matches!(self.peek(), Some(Tok::Bar) | Some(Tok::RParen)) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                return Ok(out);
            }
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let here = self.here();
        let name = self.ident("relation name")?;
        self.expect(Tok::LParen)?;
        let key = self.terms()?;
        let nonkey = if self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            self.terms()?
        } else {
            Vec::new()
        };
        self.expect(Tok::RParen)?;
        Atom::with_parts(&name, key, nonkey).map_err(|e| ParseError {
            line: here.0,
            column: here.1,
            message: e.to_string(),
        })
    }

    fn query(&mut self) -> Result<ConjunctiveQuery, ParseError> {
        let start = self.here();
        let name = self.ident("query name")?;
        self.expect(Tok::LParen)?;
        let mut head = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                match self.peek() {
                    Some(Tok::Quoted(_)) => return Err(self.error("head terms must be variables")),
                    _ => head.push(Variable::new(self.ident("head variable")?)),
                }
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::Turnstile)?;
        let mut atoms = Vec::new();
        if self.peek() != Some(&Tok::Dot) {
            loop {
                atoms.push(self.atom()?);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        if let Some(t) = self.peek() {
            return Err(self.error(format!("unexpected {t} after the end of the query")));
        }
        ConjunctiveQuery::named(name, atoms, head).map_err(|e: QueryError| ParseError {
            line: start.0,
            column: start.1,
            message: e.to_string(),
        })
    }
}

/// Parses a single query. Whitespace is insignificant; `#` comments run to
/// the end of the line.
pub fn parse_query(input: &str) -> Result<ConjunctiveQuery, ParseError> {
    let toks = lex(input)?;
    let end = input
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(i, l)| (i + 1, l.chars().count() + 1));
    Parser { toks, pos: 0, end }.query()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_form_round_trips() {
        let text = "q(z1, z2) :- R(x, y | z1), S(x | y), T(y | z2).";
        let q = parse_query(text).unwrap();
        assert_eq!(q.to_string(), text);
        assert_eq!(q.free().len(), 2);
        assert_eq!(q.atom("R").unwrap().signature().key_width(), 2);
    }

    #[test]
    fn whitespace_and_comments_are_ignored() {
        let q =
            parse_query("# a comment\n  q( z )\n:-E(x|'F',y) ,\n D( y|z ) . # trailing\n").unwrap();
        assert_eq!(q.to_string(), "q(z) :- E(x | 'F', y), D(y | z).");
    }

    #[test]
    fn bar_is_optional_for_all_key_atoms() {
        let q = parse_query("q(z3) :- T(z1, z2, z3), U(| a, z1), V(z2 |).").unwrap();
        assert_eq!(q.atom("T").unwrap().signature().key_width(), 3);
        assert_eq!(q.atom("U").unwrap().signature().key_width(), 0);
        assert_eq!(q.atom("V").unwrap().signature().key_width(), 1);
        assert_eq!(q.to_string(), "q(z3) :- T(z1, z2, z3), U(| a, z1), V(z2).");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_query("q(z) :- R(x | 3).").unwrap_err();
        assert_eq!((e.line, e.column), (1, 15));
        let e = parse_query("q(z) :- R(x | y)").unwrap_err();
        assert!(e.message.contains("end of input"), "{e}");
        let e = parse_query("q(z) :- R(x | y), R(y | z).").unwrap_err();
        assert!(e.message.contains("self-join"), "{e}");
        let e = parse_query("q(w) :- R(x | y).").unwrap_err();
        assert!(e.message.contains("does not occur"), "{e}");
        let e = parse_query("q('c') :- R(x | y).").unwrap_err();
        assert!(e.message.contains("variables"), "{e}");
        assert!(parse_query("q() :- R().").is_err());
        assert!(parse_query("q() :- R(x). extra").is_err());
        assert!(parse_query("q() :- R('x).").is_err());
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,3}"
    }

    fn term() -> impl Strategy<Value = Term> {
        prop_oneof![
            3 => ident().prop_map(|s| Term::Var(Variable::new(s))),
            1 => "[A-Za-z0-9 ,|]{0,4}".prop_map(|s| Term::Const(Constant::new(s))),
        ]
    }

    proptest! {
        #[test]
        fn display_then_parse_is_identity(
            atoms in proptest::collection::vec((proptest::collection::vec(term(), 0..3), proptest::collection::vec(term(), 0..3)), 0..4)
        ) {
            let atoms: Vec<Atom> = atoms
                .into_iter()
                .enumerate()
                .filter(|(_, (k, n))| !k.is_empty() || !n.is_empty())
                .map(|(i, (k, n))| Atom::with_parts(&format!("R{i}"), k, n).unwrap())
                .collect();
            let head: Vec<Variable> = atoms
                .iter()
                .flat_map(|a| a.vars())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .take(2)
                .collect();
            let q = ConjunctiveQuery::new(atoms, head).unwrap();
            let back = parse_query(&q.to_string()).unwrap();
            prop_assert_eq!(back, q);
        }
    }
}
