//! Canonical s-expression text form.
//!
//! Atoms print as `%name` (scalar), `@name` (element) or `name` (data), with
//! `#n` appended when fresh. An exponent or sum lists its monomials as
//! `(+ a b)` / `(- a b)`, one entry per unit of coefficient.

use thiserror::Error;

use super::{Atom, HashTag, Monomial, Poly, Sort, Term};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected end of input")]
    Eof,
    #[error("unexpected token `{0}`")]
    Unexpected(String),
    #[error("bad atom `{0}`")]
    BadAtom(String),
    #[error("trailing input after term")]
    Trailing,
}

pub fn print(t: &Term) -> String {
    let mut s = String::new();
    write_term(t, &mut s);
    s
}

fn write_atom(a: &Atom, out: &mut String) {
    match a.sort {
        Sort::Scalar => out.push('%'),
        Sort::Element => out.push('@'),
        Sort::Data => {}
    }
    out.push_str(&a.name);
    if let Some(n) = a.fresh {
        out.push('#');
        out.push_str(&n.to_string());
    }
}

fn write_poly(p: &Poly, out: &mut String) {
    for (m, c) in p.terms() {
        let sign = if c > 0 { '+' } else { '-' };
        for _ in 0..c.unsigned_abs() {
            out.push_str(" (");
            out.push(sign);
            for a in m {
                out.push(' ');
                write_atom(a, out);
            }
            out.push(')');
        }
    }
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Atom(a) => write_atom(a, out),
        Term::Exp(b, p) => {
            out.push_str("(exp ");
            write_term(b, out);
            write_poly(p, out);
            out.push(')');
        }
        Term::Sum(p) => {
            out.push_str("(sum");
            write_poly(p, out);
            out.push(')');
        }
        Term::Mul(items) => {
            out.push_str("(mul");
            for i in items {
                out.push(' ');
                write_term(i, out);
            }
            out.push(')');
        }
        Term::Hash(tag, args) => {
            out.push_str("(hash ");
            out.push_str(tag.name());
            for a in args {
                out.push(' ');
                write_term(a, out);
            }
            out.push(')');
        }
        Term::Pair(a, b) => {
            out.push_str("(pair ");
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Sym(String),
}

fn tokenize(s: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(Tok::Sym(std::mem::take(&mut cur)));
                }
                out.push(if ch == '(' { Tok::Open } else { Tok::Close });
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(Tok::Sym(std::mem::take(&mut cur)));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(Tok::Sym(cur));
    }
    out
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn next(&mut self) -> Result<Tok, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or(ParseError::Eof)?;
        self.pos += 1;
        Ok(t)
    }
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }
    fn sym(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            Tok::Sym(s) => Ok(s),
            other => Err(ParseError::Unexpected(format!("{other:?}"))),
        }
    }
    fn expect_close(&mut self) -> Result<(), ParseError> {
        match self.next()? {
            Tok::Close => Ok(()),
            other => Err(ParseError::Unexpected(format!("{other:?}"))),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.next()? {
            Tok::Sym(s) => Ok(Term::Atom(parse_atom(&s)?)),
            Tok::Close => Err(ParseError::Unexpected(")".into())),
            Tok::Open => {
                let head = self.sym()?;
                let t = match head.as_str() {
                    "exp" => {
                        let base = self.term()?;
                        Term::Exp(Box::new(base), self.poly()?)
                    }
                    "sum" => Term::Sum(self.poly()?),
                    "mul" => {
                        let mut items = Vec::new();
                        while self.peek() != Some(&Tok::Close) {
                            items.push(self.term()?);
                        }
                        Term::Mul(items)
                    }
                    "hash" => {
                        let tag = self.sym()?;
                        let tag = HashTag::from_name(&tag).ok_or(ParseError::Unexpected(tag))?;
                        let mut args = Vec::new();
                        while self.peek() != Some(&Tok::Close) {
                            args.push(self.term()?);
                        }
                        Term::Hash(tag, args)
                    }
                    "pair" => {
                        let a = self.term()?;
                        let b = self.term()?;
                        Term::pair(a, b)
                    }
                    other => return Err(ParseError::Unexpected(other.to_string())),
                };
                self.expect_close()?;
                Ok(t)
            }
        }
    }

    fn poly(&mut self) -> Result<Poly, ParseError> {
        let mut entries: Vec<(Monomial, i64)> = Vec::new();
        while self.peek() == Some(&Tok::Open) {
            self.next()?;
            let sign = match self.sym()?.as_str() {
                "+" => 1,
                "-" => -1,
                other => return Err(ParseError::Unexpected(other.to_string())),
            };
            let mut m = Vec::new();
            loop {
                match self.next()? {
                    Tok::Close => break,
                    Tok::Sym(s) => m.push(parse_atom(&s)?),
                    Tok::Open => return Err(ParseError::Unexpected("(".into())),
                }
            }
            entries.push((m, sign));
        }
        Ok(Poly::from_terms(entries))
    }
}

fn parse_atom(s: &str) -> Result<Atom, ParseError> {
    let (sort, rest) = match s.chars().next() {
        Some('%') => (Sort::Scalar, &s[1..]),
        Some('@') => (Sort::Element, &s[1..]),
        Some(_) => (Sort::Data, s),
        None => return Err(ParseError::BadAtom(s.into())),
    };
    let (name, fresh) = match rest.rsplit_once('#') {
        Some((n, tag)) => (n, Some(tag.parse::<u32>().map_err(|_| ParseError::BadAtom(s.into()))?)),
        None => (rest, None),
    };
    if name.is_empty() || matches!(name, "+" | "-") {
        return Err(ParseError::BadAtom(s.into()));
    }
    Ok(Atom { name: name.to_string(), sort, fresh })
}

pub fn parse(s: &str) -> Result<Term, ParseError> {
    let mut p = Parser { toks: tokenize(s), pos: 0 };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return Err(ParseError::Trailing);
    }
    Ok(t)
}
