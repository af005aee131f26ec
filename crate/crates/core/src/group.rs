//! Arithmetic in the order-q subgroup of Z*_p where p = 2q + 1.
//!
//! Values are `u64`; every product goes through `u128` so nothing wraps.

use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("p = {p} is not 2q + 1 for q = {q}")]
    NotSafePrime { p: u64, q: u64 },
    #[error("unknown group label `{0}`")]
    UnknownLabel(String),
}

/// Subgroup parameters. Cloning is cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupParams {
    p: u64,
    q: u64,
    label: Arc<str>,
}

impl fmt::Debug for GroupParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(p={}, q={})", self.label, self.p, self.q)
    }
}

/// Integer modulo q.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(u64);

/// Member of the order-q subgroup, or a raw wire value awaiting validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(u64);

impl Scalar {
    /// Wraps a wire value without reduction. Check with `validate_scalar` before use.
    pub fn from_raw(v: u64) -> Self {
        Scalar(v)
    }
    pub fn value(self) -> u64 {
        self.0
    }
}

impl Element {
    /// Wraps a wire value without checks. Check with `validate_element` before use.
    pub fn from_raw(v: u64) -> Self {
        Element(v)
    }
    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const TINY23: &str = "tiny23";
pub const FF64: &str = "ff64";

const FF64_P: u64 = 9_223_372_036_854_771_239;
const FF64_Q: u64 = 4_611_686_018_427_385_619;

impl GroupParams {
    pub fn new(p: u64, q: u64, label: &str) -> Result<Self, GroupError> {
        if !is_prime(q) {
            return Err(GroupError::NotPrime(q));
        }
        if !is_prime(p) {
            return Err(GroupError::NotPrime(p));
        }
        if q.checked_mul(2).and_then(|v| v.checked_add(1)) != Some(p) {
            return Err(GroupError::NotSafePrime { p, q });
        }
        Ok(GroupParams { p, q, label: Arc::from(label) })
    }

    pub fn tiny23() -> Self {
        static G: OnceLock<GroupParams> = OnceLock::new();
        G.get_or_init(|| GroupParams::new(23, 11, TINY23).expect("tiny23 is a safe prime")).clone()
    }

    pub fn ff64() -> Self {
        static G: OnceLock<GroupParams> = OnceLock::new();
        G.get_or_init(|| GroupParams::new(FF64_P, FF64_Q, FF64).expect("ff64 is a safe prime")).clone()
    }

    pub fn by_label(label: &str) -> Result<Self, GroupError> {
        match label {
            TINY23 => Ok(Self::tiny23()),
            FF64 => Ok(Self::ff64()),
            other => Err(GroupError::UnknownLabel(other.to_string())),
        }
    }

    pub fn known_labels() -> &'static [&'static str] {
        &[TINY23, FF64]
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn q(&self) -> u64 {
        self.q
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn identity(&self) -> Element {
        Element(1)
    }

    /// 4 = 2^2 is a quadratic residue, hence of order q for any safe prime p > 5.
    pub fn generator(&self) -> Element {
        Element(4 % self.p)
    }

    pub fn scalar(&self, v: u64) -> Scalar {
        Scalar(v % self.q)
    }

    /// Reduces a possibly negative integer modulo q.
    pub fn scalar_from_i128(&self, v: i128) -> Scalar {
        Scalar(v.rem_euclid(self.q as i128) as u64)
    }

    /// Subgroup membership including the identity.
    pub fn element(&self, v: u64) -> Option<Element> {
        if v >= 1 && v < self.p && pow_mod(v, self.q, self.p) == 1 {
            Some(Element(v))
        } else {
            None
        }
    }

    pub fn validate_scalar(&self, s: u64) -> bool {
        1 < s && s < self.q
    }

    pub fn validate_element(&self, x: u64) -> bool {
        1 < x && x < self.p && pow_mod(x, self.q, self.p) == 1
    }

    pub fn exp(&self, base: Element, e: Scalar) -> Element {
        Element(pow_mod(base.0, e.0 % self.q, self.p))
    }

    pub fn mul(&self, a: Element, b: Element) -> Element {
        Element(mul_mod(a.0, b.0, self.p))
    }

    pub fn inverse(&self, a: Element) -> Element {
        // a^(q-1) inverts within the subgroup since a^q = 1.
        Element(pow_mod(a.0, self.q - 1, self.p))
    }

    pub fn div(&self, a: Element, b: Element) -> Element {
        self.mul(a, self.inverse(b))
    }

    pub fn scalar_add(&self, a: Scalar, b: Scalar) -> Scalar {
        Scalar(((a.0 as u128 + b.0 as u128) % self.q as u128) as u64)
    }

    pub fn scalar_mul(&self, a: Scalar, b: Scalar) -> Scalar {
        Scalar(mul_mod(a.0, b.0, self.q))
    }

    pub fn scalar_neg(&self, a: Scalar) -> Scalar {
        let a = a.0 % self.q;
        if a == 0 {
            Scalar(0)
        } else {
            Scalar(self.q - a)
        }
    }

    /// All subgroup members, identity first. Only sensible for tiny groups.
    pub fn members(&self) -> Vec<Element> {
        let g = self.generator();
        (0..self.q).map(|i| self.exp(g, Scalar(i))).collect()
    }

    /// Big-endian fixed-width encoding used by the hash layer.
    pub fn encode(v: u64) -> [u8; 8] {
        v.to_be_bytes()
    }
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; the first twelve prime bases cover all of u64.
pub fn is_prime(n: u64) -> bool {
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &b in &BASES {
        if n % b == 0 {
            return n == b;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'outer: for &a in &BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g23() -> GroupParams {
        GroupParams::tiny23()
    }

    #[test]
    fn exp_oracles() {
        let g = g23();
        assert_eq!(g.exp(Element(2), Scalar(0)), Element(1));
        assert_eq!(g.exp(Element(2), Scalar(3)), Element(8));
    }

    #[test]
    fn exp_commutes_in_exponent() {
        let g = g23();
        let base = g.generator();
        for a in 0..11 {
            for b in 0..11 {
                let ab = g.exp(g.exp(base, Scalar(a)), Scalar(b));
                let ba = g.exp(g.exp(base, Scalar(b)), Scalar(a));
                assert_eq!(ab, ba);
            }
        }
    }

    #[test]
    fn mul_oracles() {
        let g = g23();
        for x in g.members() {
            assert_eq!(g.mul(x, g.identity()), x);
        }
        assert_eq!(g.mul(Element(8), Element(4)), Element(9));
        for a in g.members() {
            for b in g.members() {
                assert_eq!(g.mul(a, b), g.mul(b, a));
            }
        }
    }

    #[test]
    fn subgroup_has_q_members() {
        let g = g23();
        let mut m: Vec<u64> = g.members().iter().map(|e| e.value()).collect();
        m.sort();
        m.dedup();
        assert_eq!(m.len(), 11);
        assert_eq!(m, vec![1, 2, 3, 4, 6, 8, 9, 12, 13, 16, 18]);
    }

    #[test]
    fn division_identities_exhaustive() {
        let g = g23();
        let members = g.members();
        for &a in &members {
            for x in 0..11 {
                for y in 0..11 {
                    let lhs = g.div(g.exp(a, g.scalar_add(Scalar(x), Scalar(y))), g.exp(a, Scalar(y)));
                    assert_eq!(lhs, g.exp(a, Scalar(x)));
                }
            }
            for &b in &members {
                let b_inv = g.exp(b, g.scalar_neg(Scalar(1)));
                assert_eq!(g.div(a, b_inv), g.mul(a, b));
                assert_eq!(g.div(g.mul(a, b), b), a);
                assert_eq!(g.mul(g.div(a, b), b), a);
            }
        }
    }

    #[test]
    fn scalar_validation() {
        let g = g23();
        assert!(g.validate_scalar(5));
        assert!(!g.validate_scalar(1));
        assert!(!g.validate_scalar(11));
        assert!(!g.validate_scalar(0));
    }

    #[test]
    fn element_validation() {
        let g = g23();
        assert!(!g.validate_element(1));
        assert!(g.validate_element(8));
        assert_eq!(pow_mod(5, 11, 23), 22);
        assert!(!g.validate_element(5));
        assert!(!g.validate_element(23));
        assert!(!g.validate_element(0));
    }

    #[test]
    fn negative_exponent_is_q_minus_m() {
        let g = g23();
        assert_eq!(g.scalar_neg(Scalar(5)), Scalar(6));
        assert_eq!(g.scalar_neg(Scalar(0)), Scalar(0));
        assert_eq!(g.scalar_from_i128(-5), Scalar(6));
    }

    #[test]
    fn presets_are_safe_primes() {
        let f = GroupParams::ff64();
        assert_eq!(f.p(), 2 * f.q() + 1);
        assert!(is_prime(f.p()) && is_prime(f.q()));
        assert!(GroupParams::new(23, 10, "x").is_err());
        assert!(GroupParams::new(21, 10, "x").is_err());
        assert!(matches!(GroupParams::new(29, 14, "x"), Err(GroupError::NotPrime(14))));
        assert!(GroupParams::by_label("nope").is_err());
    }

    #[test]
    fn primality_small_table() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]);
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to bases 2,3,5,7
    }

    #[test]
    fn every_member_has_order_dividing_q() {
        let g = g23();
        for x in g.members() {
            assert_eq!(g.exp(x, Scalar(11)), g.identity());
        }
    }

    proptest! {
        #[test]
        fn ff64_div_inverts_mul(a in 2u64..u64::MAX, b in 2u64..u64::MAX, x in 0u64..u64::MAX, y in 0u64..u64::MAX) {
            let g = GroupParams::ff64();
            let ea = g.exp(g.generator(), g.scalar(a));
            let eb = g.exp(g.generator(), g.scalar(b));
            prop_assert_eq!(g.mul(g.div(ea, eb), eb), ea);
            prop_assert_eq!(g.exp(ea, g.scalar(g.q())), g.identity());
            let sx = g.scalar(x);
            let sy = g.scalar(y);
            prop_assert_eq!(g.mul(g.exp(ea, sx), g.exp(ea, sy)), g.exp(ea, g.scalar_add(sx, sy)));
            prop_assert!(g.validate_element(ea.value()) || ea == g.identity());
        }

        #[test]
        fn ff64_homomorphism(a in 0u64..u64::MAX, b in 0u64..u64::MAX) {
            let g = GroupParams::ff64();
            let (sa, sb) = (g.scalar(a), g.scalar(b));
            let gen = g.generator();
            prop_assert_eq!(g.mul(g.exp(gen, sa), g.exp(gen, sb)), g.exp(gen, g.scalar_add(sa, sb)));
            prop_assert_eq!(g.exp(g.exp(gen, sa), sb), g.exp(gen, g.scalar_mul(sa, sb)));
        }
    }
}
