//! What the adversary can put in a frame: anything seen on the wire, public
//! constants, and garbage where no structure is checked.

use std::collections::BTreeSet;

use crate::group::GroupParams;
use crate::session::{Body, Frame};

/// Field values observed on the channel.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Knowledge {
    pub numbers: BTreeSet<u64>,
    pub confirms: BTreeSet<[u8; 32]>,
    pub tokens: BTreeSet<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NotDerivable {
    #[error("{field} {value} was never observed and is not public")]
    Value { field: &'static str, value: u64 },
    #[error("confirm value was never observed")]
    Confirm,
    #[error("token was never observed")]
    Token,
}

impl Knowledge {
    pub fn observe(history: &[Frame]) -> Self {
        let mut k = Knowledge::default();
        for f in history {
            match &f.body {
                Body::Commit(c) => {
                    k.numbers.extend(c.scalar.map(|s| s.value()));
                    k.numbers.extend(c.element.map(|e| e.value()));
                    if let Some(t) = &c.token {
                        k.tokens.insert(t.clone());
                    }
                }
                Body::Confirm(c) => {
                    k.confirms.insert(c.confirm);
                }
            }
        }
        k
    }
}

/// Constants anyone can compute for the group named in a frame.
pub fn public_constants(group: &str) -> BTreeSet<u64> {
    let mut s: BTreeSet<u64> = (0..=16).collect();
    if let Ok(g) = GroupParams::by_label(group) {
        s.extend([g.q() - 1, g.q(), g.p() - 1, g.p(), g.generator().value()]);
    }
    s
}

/// Checks an injected frame against the adversary's knowledge.
pub fn derivable(k: &Knowledge, f: &Frame) -> Result<(), NotDerivable> {
    match &f.body {
        Body::Commit(c) => {
            let public = public_constants(&c.group);
            let ok = |v: u64| k.numbers.contains(&v) || public.contains(&v);
            if let Some(s) = c.scalar {
                if !ok(s.value()) {
                    return Err(NotDerivable::Value { field: "scalar", value: s.value() });
                }
            }
            if let Some(e) = c.element {
                if !ok(e.value()) {
                    return Err(NotDerivable::Value { field: "element", value: e.value() });
                }
            }
            if let Some(t) = &c.token {
                if !t.is_empty() && !k.tokens.contains(t) {
                    return Err(NotDerivable::Token);
                }
            }
            Ok(())
        }
        Body::Confirm(c) => {
            if c.confirm == [0; 32] || k.confirms.contains(&c.confirm) {
                Ok(())
            } else {
                Err(NotDerivable::Confirm)
            }
        }
    }
}
