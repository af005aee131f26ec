use hmac::{Hmac, Mac as _};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::Suite;
use crate::device::derive_pwe;
use crate::group::{Element, GroupParams, Scalar};

type HmacSha256 = Hmac<Sha256>;

/// Finite-field suite. Every hash is HMAC-SHA256 with a one-byte tag in front
/// of the message: 1 = H, 2 = KCF, 3 = PMK, 4 = CN.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConcreteSuite {
    pub group: GroupParams,
}

impl ConcreteSuite {
    pub fn new(group: GroupParams) -> Self {
        ConcreteSuite { group }
    }

    pub fn by_label(label: &str) -> Option<Self> {
        GroupParams::by_label(label).ok().map(Self::new)
    }
}

pub(crate) fn hmac(key: &[u8], tag: u8, parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac takes any key length");
    mac.update(&[tag]);
    for p in parts {
        mac.update(p);
    }
    mac.finalize().into_bytes().into()
}

fn short_hex(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..8])
}

impl Suite for ConcreteSuite {
    type Scalar = Scalar;
    type Element = Element;
    type Key = [u8; 32];
    type Counter = u16;
    type Password = String;

    fn group_label(&self) -> &str {
        self.group.label()
    }

    fn with_group(&self, label: &str) -> Option<Self> {
        Self::by_label(label)
    }

    fn password_element(&self, pw: &String, pid: Option<&str>) -> Element {
        derive_pwe(pw, pid, &self.group)
    }

    fn draw_scalar(&self, rng: &mut ChaCha8Rng, _role: &str) -> Scalar {
        self.group.scalar(rng.gen_range(2..self.group.q()))
    }

    fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.group.scalar_add(*a, *b)
    }

    fn neg(&self, a: &Scalar) -> Scalar {
        self.group.scalar_neg(*a)
    }

    fn exp(&self, base: &Element, e: &Scalar) -> Element {
        self.group.exp(*base, *e)
    }

    fn mul(&self, a: &Element, b: &Element) -> Element {
        self.group.mul(*a, *b)
    }

    fn valid_scalar(&self, s: &Scalar) -> bool {
        self.group.validate_scalar(s.value())
    }

    fn valid_element(&self, e: &Element) -> bool {
        self.group.validate_element(e.value())
    }

    fn h(&self, k: &Element) -> [u8; 32] {
        hmac(&[0u8; 32], 1, &[&k.value().to_be_bytes()])
    }

    fn kcf(&self, ks: &[u8; 32], ss: &Scalar) -> [u8; 32] {
        hmac(ks, 2, &[b"SAE", &ss.value().to_be_bytes()])
    }

    fn pmk(&self, ks: &[u8; 32], ss: &Scalar) -> [u8; 32] {
        hmac(ks, 3, &[b"SAE", &ss.value().to_be_bytes()])
    }

    fn cn(&self, kc: &[u8; 32], counter: &u16, first: (&Scalar, &Element), second: (&Scalar, &Element)) -> [u8; 32] {
        hmac(
            kc,
            4,
            &[
                &counter.to_be_bytes(),
                &first.0.value().to_be_bytes(),
                &first.1.value().to_be_bytes(),
                &second.0.value().to_be_bytes(),
                &second.1.value().to_be_bytes(),
            ],
        )
    }

    fn counter(&self, n: u16, _role: &str) -> u16 {
        n
    }

    fn session_tag(&self, a: (&Scalar, &Element), b: (&Scalar, &Element)) -> String {
        let enc = |(s, e): (&Scalar, &Element)| [s.value().to_be_bytes(), e.value().to_be_bytes()].concat();
        let (mut x, mut y) = (enc(a), enc(b));
        if x > y {
            std::mem::swap(&mut x, &mut y);
        }
        short_hex(&[x, y].concat())
    }

    fn key_digest(&self, k: &[u8; 32]) -> String {
        short_hex(k)
    }
}
