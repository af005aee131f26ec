use sha2::{Digest, Sha256};

use crate::group::{Element, GroupParams};

/// Suffix appended to the label each time a draw lands on the identity.
const RETRY_SUFFIX: &[u8] = b"+";

/// Deterministic password element: hash to an exponent, raise the generator.
pub fn derive_pwe(password: &str, pid: Option<&str>, group: &GroupParams) -> Element {
    derive_pwe_with(password, pid, group, &|data| Sha256::digest(data).into())
}

/// As `derive_pwe` with the hash supplied by the caller.
pub fn derive_pwe_with(
    password: &str,
    pid: Option<&str>,
    group: &GroupParams,
    hash: &dyn Fn(&[u8]) -> [u8; 32],
) -> Element {
    let mut label = group.label().as_bytes().to_vec();
    let mut attempt: u64 = 0;
    loop {
        let mut data = vec![6u8];
        data.extend_from_slice(&label);
        data.push(0);
        data.extend_from_slice(password.as_bytes());
        data.push(0);
        if let Some(p) = pid {
            data.push(1);
            data.extend_from_slice(p.as_bytes());
        }
        let d = hash(&data);
        let mut e = u64::from_be_bytes(d[..8].try_into().expect("8 bytes")) % group.q();
        // A hash stuck on zero still ends: walk the nonzero exponents.
        if e == 0 && attempt >= group.q() {
            e = 1 + attempt % (group.q() - 1);
        }
        if e != 0 {
            let pwe = group.exp(group.generator(), group.scalar(e));
            if pwe != group.identity() {
                return pwe;
            }
        }
        label.extend_from_slice(RETRY_SUFFIX);
        attempt += 1;
    }
}
