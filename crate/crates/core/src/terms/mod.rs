//! Symbolic message algebra.
//!
//! Exponents are integer polynomials over scalar atoms, so `Exp(Exp(b, x), y)`
//! collapses to `Exp(b, x*y)` and `Mul` of powers of one base adds exponents.
//! Hashes are opaque.

mod closure;
mod sexpr;

use std::collections::BTreeMap;
use std::fmt;

use crate::group::{Element, GroupParams, Scalar};

pub use closure::{check_secrecy, closure, Derivation, KnowledgeSet};
pub use sexpr::{parse, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Scalar,
    Element,
    Data,
}

/// A name. `fresh = None` marks a public constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub name: String,
    pub sort: Sort,
    pub fresh: Option<u32>,
}

impl Atom {
    pub fn new(name: &str, sort: Sort, fresh: Option<u32>) -> Self {
        Atom { name: name.to_string(), sort, fresh }
    }
    pub fn is_public(&self) -> bool {
        self.fresh.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HashTag {
    H,
    CN,
    KCF,
    PMK,
}

impl HashTag {
    pub fn name(self) -> &'static str {
        match self {
            HashTag::H => "H",
            HashTag::CN => "CN",
            HashTag::KCF => "KCF",
            HashTag::PMK => "PMK",
        }
    }
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "H" => Some(HashTag::H),
            "CN" => Some(HashTag::CN),
            "KCF" => Some(HashTag::KCF),
            "PMK" => Some(HashTag::PMK),
            _ => None,
        }
    }
    pub fn byte(self) -> u8 {
        match self {
            HashTag::H => 1,
            HashTag::KCF => 2,
            HashTag::PMK => 3,
            HashTag::CN => 4,
        }
    }
}

/// Sorted product of scalar atoms; empty means the constant 1.
pub type Monomial = Vec<Atom>;

/// Integer polynomial over scalar atoms. Zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly(BTreeMap<Monomial, i64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(BTreeMap::new())
    }
    pub fn constant(c: i64) -> Self {
        let mut p = Poly::zero();
        p.add_term(Vec::new(), c);
        p
    }
    pub fn one() -> Self {
        Self::constant(1)
    }
    pub fn atom(a: Atom) -> Self {
        let mut p = Poly::zero();
        p.add_term(vec![a], 1);
        p
    }
    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, i64)>) -> Self {
        let mut p = Poly::zero();
        for (mut m, c) in terms {
            m.sort();
            p.add_term(m, c);
        }
        p
    }
    fn add_term(&mut self, m: Monomial, c: i64) {
        if c == 0 {
            return;
        }
        let v = self.0.get(&m).copied().unwrap_or(0).checked_add(c).expect("exponent coefficient overflow");
        if v == 0 {
            self.0.remove(&m);
        } else {
            self.0.insert(m, v);
        }
    }
    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    pub fn is_one(&self) -> bool {
        self.0.len() == 1 && self.0.get(&Vec::new()) == Some(&1)
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i64)> {
        self.0.iter().map(|(m, c)| (m, *c))
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn single_atom(&self) -> Option<&Atom> {
        if self.0.len() != 1 {
            return None;
        }
        let (m, c) = self.0.iter().next().unwrap();
        if *c == 1 && m.len() == 1 {
            Some(&m[0])
        } else {
            None
        }
    }
    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }
    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }
    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }
    pub fn scale(&self, k: i64) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c.checked_mul(k).expect("exponent coefficient overflow"));
        }
        out
    }
    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in self.terms() {
            for (mb, cb) in other.terms() {
                let mut m: Monomial = ma.iter().chain(mb.iter()).cloned().collect();
                m.sort();
                out.add_term(m, ca.checked_mul(cb).expect("exponent coefficient overflow"));
            }
        }
        out
    }
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.keys().flat_map(|m| m.iter())
    }
    pub fn degree(&self) -> usize {
        self.0.keys().map(|m| m.len()).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Atom(Atom),
    Exp(Box<Term>, Poly),
    Mul(Vec<Term>),
    Sum(Poly),
    Hash(HashTag, Vec<Term>),
    Pair(Box<Term>, Box<Term>),
}

impl Term {
    pub fn scalar(name: &str, fresh: Option<u32>) -> Term {
        Term::Atom(Atom::new(name, Sort::Scalar, fresh))
    }
    pub fn element(name: &str, fresh: Option<u32>) -> Term {
        Term::Atom(Atom::new(name, Sort::Element, fresh))
    }
    pub fn data(name: &str, fresh: Option<u32>) -> Term {
        Term::Atom(Atom::new(name, Sort::Data, fresh))
    }
    pub fn identity() -> Term {
        Term::Mul(Vec::new())
    }

    /// Scalar-sorted term as a polynomial.
    pub fn as_poly(&self) -> Option<Poly> {
        match self {
            Term::Atom(a) if a.sort == Sort::Scalar => Some(Poly::atom(a.clone())),
            Term::Sum(p) => Some(p.clone()),
            _ => None,
        }
    }

    pub fn exp(base: Term, exponent: &Term) -> Term {
        let p = exponent.as_poly().expect("exponent must be scalar-sorted");
        Term::Exp(Box::new(base), p)
    }
    pub fn exp_poly(base: Term, p: Poly) -> Term {
        Term::Exp(Box::new(base), p)
    }
    pub fn mul(items: Vec<Term>) -> Term {
        Term::Mul(items)
    }
    pub fn div(a: Term, b: Term) -> Term {
        Term::Mul(vec![a, Term::Exp(Box::new(b), Poly::constant(-1))])
    }
    pub fn add(a: &Term, b: &Term) -> Term {
        let pa = a.as_poly().expect("scalar-sorted");
        let pb = b.as_poly().expect("scalar-sorted");
        Term::Sum(pa.add(&pb))
    }
    pub fn neg(a: &Term) -> Term {
        Term::Sum(a.as_poly().expect("scalar-sorted").neg())
    }
    pub fn hash(tag: HashTag, args: Vec<Term>) -> Term {
        Term::Hash(tag, args)
    }
    pub fn pair(a: Term, b: Term) -> Term {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Atom(a) => a.sort,
            Term::Exp(..) | Term::Mul(_) => Sort::Element,
            Term::Sum(_) => Sort::Scalar,
            Term::Hash(..) | Term::Pair(..) => Sort::Data,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Atom(_) | Term::Sum(_) => 1,
            Term::Exp(b, _) => 1 + b.depth(),
            Term::Mul(v) | Term::Hash(_, v) => 1 + v.iter().map(|t| t.depth()).max().unwrap_or(0),
            Term::Pair(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Every atom occurring anywhere, including inside exponents.
    pub fn atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Term::Atom(a) => out.push(a.clone()),
            Term::Exp(b, p) => {
                b.atoms(out);
                out.extend(p.atoms().cloned());
            }
            Term::Sum(p) => out.extend(p.atoms().cloned()),
            Term::Mul(v) | Term::Hash(_, v) => v.iter().for_each(|t| t.atoms(out)),
            Term::Pair(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&sexpr::print(self))
    }
}

pub fn normalize(t: &Term) -> Term {
    match t {
        Term::Atom(_) => t.clone(),
        Term::Sum(p) => match p.single_atom() {
            Some(a) => Term::Atom(a.clone()),
            None => Term::Sum(p.clone()),
        },
        Term::Hash(tag, args) => Term::Hash(*tag, args.iter().map(normalize).collect()),
        Term::Pair(a, b) => Term::pair(normalize(a), normalize(b)),
        Term::Exp(base, p) => exp_normal(normalize(base), p),
        Term::Mul(items) => mul_normal(items.iter().map(normalize).collect()),
    }
}

/// `base` is already normal.
fn exp_normal(base: Term, p: &Poly) -> Term {
    if p.is_zero() {
        return Term::identity();
    }
    match base {
        Term::Exp(inner, q) => exp_normal(*inner, &q.mul(p)),
        Term::Mul(items) => mul_normal(items.into_iter().map(|i| exp_normal(i, p)).collect()),
        other if p.is_one() => other,
        other => Term::Exp(Box::new(other), p.clone()),
    }
}

/// `items` are already normal.
fn mul_normal(items: Vec<Term>) -> Term {
    let mut powers: BTreeMap<Term, Poly> = BTreeMap::new();
    let push = |t: Term, powers: &mut BTreeMap<Term, Poly>| {
        let (b, p) = match t {
            Term::Exp(b, p) => (*b, p),
            other => (other, Poly::one()),
        };
        let e = powers.entry(b).or_default();
        *e = e.add(&p);
    };
    for t in items {
        match t {
            Term::Mul(sub) => sub.into_iter().for_each(|s| push(s, &mut powers)),
            other => push(other, &mut powers),
        }
    }
    let mut out: Vec<Term> = powers
        .into_iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(b, p)| if p.is_one() { b } else { Term::Exp(Box::new(b), p) })
        .collect();
    out.sort();
    if out.len() == 1 {
        out.pop().unwrap()
    } else {
        Term::Mul(out)
    }
}

pub fn equal(a: &Term, b: &Term) -> bool {
    normalize(a) == normalize(b)
}

/// Concrete value of a ground term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Scalar(Scalar),
    Element(Element),
    Bytes(Vec<u8>),
}

impl Value {
    fn encode(&self) -> Vec<u8> {
        match self {
            Value::Scalar(s) => [&[0u8][..], &s.value().to_be_bytes()].concat(),
            Value::Element(e) => [&[1u8][..], &e.value().to_be_bytes()].concat(),
            Value::Bytes(b) => [&[2u8][..], &(b.len() as u32).to_be_bytes(), b].concat(),
        }
    }
}

/// Evaluates `t` in group `g` with atoms valued by `env`. `None` on a sort error.
pub fn eval(t: &Term, g: &GroupParams, env: &dyn Fn(&Atom) -> Value) -> Option<Value> {
    use sha2::{Digest, Sha256};
    match t {
        Term::Atom(a) => Some(env(a)),
        Term::Sum(p) => Some(Value::Scalar(eval_poly(p, g, env)?)),
        Term::Exp(b, p) => match eval(b, g, env)? {
            Value::Element(e) => Some(Value::Element(g.exp(e, eval_poly(p, g, env)?))),
            _ => None,
        },
        Term::Mul(items) => {
            let mut acc = g.identity();
            for i in items {
                match eval(i, g, env)? {
                    Value::Element(e) => acc = g.mul(acc, e),
                    _ => return None,
                }
            }
            Some(Value::Element(acc))
        }
        Term::Hash(tag, args) => {
            let mut h = Sha256::new();
            h.update([tag.byte()]);
            for a in args {
                h.update(eval(a, g, env)?.encode());
            }
            Some(Value::Bytes(h.finalize().to_vec()))
        }
        Term::Pair(a, b) => {
            let mut out = vec![3u8];
            out.extend(eval(a, g, env)?.encode());
            out.extend(eval(b, g, env)?.encode());
            Some(Value::Bytes(out))
        }
    }
}

fn eval_poly(p: &Poly, g: &GroupParams, env: &dyn Fn(&Atom) -> Value) -> Option<Scalar> {
    let mut acc = g.scalar(0);
    for (m, c) in p.terms() {
        let mut term = g.scalar_from_i128(c as i128);
        for a in m {
            match env(a) {
                Value::Scalar(s) => term = g.scalar_mul(term, s),
                _ => return None,
            }
        }
        acc = g.scalar_add(acc, term);
    }
    Some(acc)
}

#[cfg(test)]
mod tests;
