//! Depth-bounded Dolev-Yao deduction.
//!
//! The set is stored analysed (pairs split) and membership is decided by a
//! goal-directed search. Pairs and hashes are built argument by argument,
//! each argument costing one level. Scalars are derived as rational linear
//! combinations of known scalars. Elements are derived as products of known
//! elements raised to polynomials in known scalars whose degree is below the
//! remaining budget; that system is solved exactly over the rationals.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{normalize, Atom, HashTag, Monomial, Poly, Sort, Term};
use crate::verdict::PropertyResult;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeSet {
    terms: BTreeSet<Term>,
    depth_budget: usize,
}

/// Why a goal is derivable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Known(Term),
    Public(Term),
    Pair(Box<Derivation>, Box<Derivation>),
    Hash(HashTag, Vec<Derivation>, Term),
    Linear { goal: Term, uses: Vec<String> },
}

impl Derivation {
    /// Bottom-up numbered steps.
    pub fn steps(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect()
    }

    fn collect(&self, out: &mut Vec<String>) {
        match self {
            Derivation::Known(t) => out.push(format!("observed {t}")),
            Derivation::Public(t) => out.push(format!("public {t}")),
            Derivation::Pair(a, b) => {
                a.collect(out);
                b.collect(out);
                out.push("pair the two previous terms".to_string());
            }
            Derivation::Hash(tag, args, t) => {
                for a in args {
                    a.collect(out);
                }
                out.push(format!("apply {} to obtain {t}", tag.name()));
            }
            Derivation::Linear { goal, uses } => {
                out.push(format!("combine {} to obtain {goal}", uses.join(", ")));
            }
        }
    }
}

impl KnowledgeSet {
    pub fn new(depth_budget: usize) -> Self {
        KnowledgeSet { terms: BTreeSet::new(), depth_budget }
    }

    pub fn with_terms(terms: impl IntoIterator<Item = Term>, depth_budget: usize) -> Self {
        let mut k = Self::new(depth_budget);
        for t in terms {
            k.insert(&t);
        }
        k
    }

    pub fn depth_budget(&self) -> usize {
        self.depth_budget
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    pub fn insert(&mut self, t: &Term) {
        let t = normalize(t);
        if let Term::Pair(a, b) = &t {
            self.insert(a);
            self.insert(b);
        }
        self.terms.insert(t);
    }

    pub fn contains(&self, goal: &Term) -> bool {
        self.derive(goal).is_some()
    }

    pub fn derive(&self, goal: &Term) -> Option<Derivation> {
        self.derive_at(&normalize(goal), self.depth_budget)
    }

    fn derive_at(&self, goal: &Term, budget: usize) -> Option<Derivation> {
        if self.terms.contains(goal) {
            return Some(Derivation::Known(goal.clone()));
        }
        match goal {
            Term::Atom(a) if a.is_public() => return Some(Derivation::Public(goal.clone())),
            Term::Mul(items) if items.is_empty() => return Some(Derivation::Public(goal.clone())),
            _ => {}
        }
        if budget == 0 {
            return None;
        }
        match goal {
            Term::Pair(a, b) => {
                let da = self.derive_at(a, budget - 1)?;
                let db = self.derive_at(b, budget - 1)?;
                Some(Derivation::Pair(Box::new(da), Box::new(db)))
            }
            Term::Hash(tag, args) => {
                let mut ds = Vec::with_capacity(args.len());
                for a in args {
                    ds.push(self.derive_at(a, budget - 1)?);
                }
                Some(Derivation::Hash(*tag, ds, goal.clone()))
            }
            Term::Atom(a) if a.sort == Sort::Data => None,
            _ => match goal.sort() {
                Sort::Scalar => self.derive_scalar(goal),
                Sort::Element => self.derive_element(goal, budget),
                Sort::Data => None,
            },
        }
    }

    fn known_scalars(&self, goal_atoms: &[Atom]) -> Vec<(Term, Poly)> {
        let mut out: Vec<(Term, Poly)> =
            self.terms.iter().filter_map(|t| t.as_poly().map(|p| (t.clone(), p))).collect();
        for a in goal_atoms {
            if a.is_public() && a.sort == Sort::Scalar {
                out.push((Term::Atom(a.clone()), Poly::atom(a.clone())));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    fn derive_scalar(&self, goal: &Term) -> Option<Derivation> {
        let target = goal.as_poly()?;
        let mut atoms = Vec::new();
        goal.atoms(&mut atoms);
        let known = self.known_scalars(&atoms);
        let mut cols: Vec<(String, BTreeMap<Monomial, i64>)> = vec![("integers".to_string(), single(Vec::new(), 1))];
        for (t, p) in &known {
            cols.push((t.to_string(), p.terms().map(|(m, c)| (m.clone(), c)).collect()));
        }
        let rhs: BTreeMap<Monomial, i64> = target.terms().map(|(m, c)| (m.clone(), c)).collect();
        let used = solve(&cols, &rhs)?;
        Some(Derivation::Linear { goal: goal.clone(), uses: used })
    }

    fn derive_element(&self, goal: &Term, budget: usize) -> Option<Derivation> {
        let target = element_vector(goal)?;
        let mut goal_atoms = Vec::new();
        goal.atoms(&mut goal_atoms);

        let mut elements: Vec<(Term, ElemVec)> =
            self.terms.iter().filter_map(|t| element_vector(t).map(|v| (t.clone(), v))).collect();
        for ((base, _), _) in &target {
            if base.is_public() {
                elements.push((Term::Atom(base.clone()), single((base.clone(), Vec::new()), 1)));
            }
        }
        elements.sort();
        elements.dedup();

        // A secret base nobody has seen cannot be produced.
        let bases: BTreeSet<&Atom> = elements.iter().flat_map(|(_, v)| v.keys().map(|(b, _)| b)).collect();
        if target.keys().any(|(b, _)| !bases.contains(b)) {
            return None;
        }

        let scalars = self.known_scalars(&goal_atoms);
        let multipliers = monomial_products(&scalars, budget - 1);
        let mut cols: Vec<(String, BTreeMap<(Atom, Monomial), i64>)> = Vec::new();
        for (et, ev) in &elements {
            for (label, f) in &multipliers {
                let v = scale_vec(ev, f);
                if v.is_empty() {
                    continue;
                }
                let name = if label.is_empty() { et.to_string() } else { format!("{et}^({label})") };
                cols.push((name, v));
            }
        }
        let used = solve(&cols, &target)?;
        Some(Derivation::Linear { goal: goal.clone(), uses: used })
    }
}

type ElemVec = BTreeMap<(Atom, Monomial), i64>;

fn single<K: Ord>(k: K, c: i64) -> BTreeMap<K, i64> {
    let mut m = BTreeMap::new();
    m.insert(k, c);
    m
}

/// Exponent vector of a normal element term over atom bases.
fn element_vector(t: &Term) -> Option<ElemVec> {
    let mut out = ElemVec::new();
    let add = |t: &Term, out: &mut ElemVec| -> Option<()> {
        match t {
            Term::Atom(a) if a.sort == Sort::Element => {
                *out.entry((a.clone(), Vec::new())).or_insert(0) += 1;
            }
            Term::Exp(b, p) => match b.as_ref() {
                Term::Atom(a) if a.sort == Sort::Element => {
                    for (m, c) in p.terms() {
                        *out.entry((a.clone(), m.clone())).or_insert(0) += c;
                    }
                }
                _ => return None,
            },
            _ => return None,
        }
        Some(())
    };
    match t {
        Term::Mul(items) => {
            for i in items {
                add(i, &mut out)?;
            }
        }
        other => add(other, &mut out)?,
    }
    out.retain(|_, c| *c != 0);
    Some(out)
}

/// All products of at most `max_degree` known scalars, with the empty product first.
fn monomial_products(scalars: &[(Term, Poly)], max_degree: usize) -> Vec<(String, Poly)> {
    let mut out = vec![(String::new(), Poly::one())];
    let mut frontier: Vec<(usize, String, Poly)> = vec![(0, String::new(), Poly::one())];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for (start, label, p) in &frontier {
            for (i, (t, sp)) in scalars.iter().enumerate().skip(*start) {
                let l = if label.is_empty() { t.to_string() } else { format!("{label}*{t}") };
                let np = p.mul(sp);
                out.push((l.clone(), np.clone()));
                next.push((i, l, np));
            }
        }
        frontier = next;
    }
    out
}

fn scale_vec(v: &ElemVec, f: &Poly) -> ElemVec {
    let mut out = ElemVec::new();
    for ((b, m), c) in v {
        for (fm, fc) in f.terms() {
            let mut nm: Monomial = m.iter().chain(fm.iter()).cloned().collect();
            nm.sort();
            *out.entry((b.clone(), nm)).or_insert(0) += c * fc;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

/// Solves `sum_j x_j * cols[j] = rhs` over the rationals. Returns the labels
/// of columns with a nonzero coefficient in one particular solution.
fn solve<K: Ord + Clone>(cols: &[(String, BTreeMap<K, i64>)], rhs: &BTreeMap<K, i64>) -> Option<Vec<String>> {
    if rhs.is_empty() {
        return Some(vec!["nothing (identity)".to_string()]);
    }
    let mut keys: BTreeSet<K> = rhs.keys().cloned().collect();
    for (_, c) in cols {
        keys.extend(c.keys().cloned());
    }
    let index: BTreeMap<K, usize> = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let n = cols.len();
    let r = |v: i64| BigRational::from_integer(BigInt::from(v));
    let mut rows: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n + 1]; index.len()];
    for (j, (_, c)) in cols.iter().enumerate() {
        for (k, v) in c {
            rows[index[k]][j] = r(*v);
        }
    }
    for (k, v) in rhs {
        rows[index[k]][n] = r(*v);
    }

    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..rows.len()).find(|&i| !rows[i][col].is_zero()) else { continue };
        rows.swap(row, p);
        let inv = BigRational::one() / rows[row][col].clone();
        for v in rows[row].iter_mut() {
            *v = v.clone() * inv.clone();
        }
        for i in 0..rows.len() {
            if i != row && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for j in col..=n {
                    let d = rows[row][j].clone() * f.clone();
                    rows[i][j] = rows[i][j].clone() - d;
                }
            }
        }
        pivots.push((row, col));
        row += 1;
        if row == rows.len() {
            break;
        }
    }
    if rows[row..].iter().any(|r| !r[n].is_zero()) {
        return None;
    }
    Some(
        pivots
            .into_iter()
            .filter(|(r, _)| !rows[*r][n].is_zero())
            .map(|(r, c)| format!("{} * {}", rows[r][n], cols[c].0))
            .collect(),
    )
}

/// Public knowledge plus everything observed, analysed.
pub fn closure(k0: &KnowledgeSet, observed: &[Term], depth: usize) -> KnowledgeSet {
    let mut k = KnowledgeSet { terms: k0.terms.clone(), depth_budget: depth };
    for t in observed {
        k.insert(t);
    }
    k
}

/// Non-derivability of `secret` from `k0` plus `observed`. This approximates
/// the non-interference formulation and does not establish observational
/// equivalence.
pub fn check_secrecy(k0: &KnowledgeSet, observed: &[Term], secret: &Term, depth: usize) -> PropertyResult {
    let k = closure(k0, observed, depth);
    let name = format!("secrecy {secret}");
    match k.derive(secret) {
        None => PropertyResult::pass(name).note(format!("not derivable at depth {depth} (closure approximation)")),
        Some(d) => {
            let mut r = PropertyResult::fail(name);
            r.notes = d.steps();
            r
        }
    }
}
