use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CommitContext, CommitPayload, CommitVerdict, Mac, PasswordStore, SessionState, Suite};
use crate::mode::{Level, ModeFlags};
use crate::terms::{normalize, HashTag, Term};

/// Suite whose values are normalised terms. Fresh values carry `tag`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SymbolicSuite {
    pub label: String,
    pub tag: u32,
}

impl SymbolicSuite {
    pub fn new(label: &str, tag: u32) -> Self {
        SymbolicSuite { label: label.to_string(), tag }
    }
}

fn short(t: &str) -> String {
    hex::encode(&Sha256::digest(t.as_bytes())[..8])
}

impl Suite for SymbolicSuite {
    type Scalar = Term;
    type Element = Term;
    type Key = Term;
    type Counter = Term;
    type Password = String;

    fn group_label(&self) -> &str {
        &self.label
    }

    fn with_group(&self, label: &str) -> Option<Self> {
        Some(SymbolicSuite { label: label.to_string(), tag: self.tag })
    }

    fn password_element(&self, pw: &String, pid: Option<&str>) -> Term {
        let name = match pid {
            Some(p) => format!("PWE_{pw}_{p}"),
            None => format!("PWE_{pw}"),
        };
        Term::element(&name, Some(0))
    }

    fn draw_scalar(&self, _rng: &mut ChaCha8Rng, role: &str) -> Term {
        Term::scalar(role, Some(self.tag))
    }

    fn add(&self, a: &Term, b: &Term) -> Term {
        normalize(&Term::add(a, b))
    }

    fn neg(&self, a: &Term) -> Term {
        normalize(&Term::neg(a))
    }

    fn exp(&self, base: &Term, e: &Term) -> Term {
        normalize(&Term::exp(base.clone(), e))
    }

    fn mul(&self, a: &Term, b: &Term) -> Term {
        normalize(&Term::mul(vec![a.clone(), b.clone()]))
    }

    fn valid_scalar(&self, s: &Term) -> bool {
        s.as_poly().map(|p| p.degree() > 0).unwrap_or(false)
    }

    fn valid_element(&self, e: &Term) -> bool {
        *e != Term::identity()
    }

    fn h(&self, k: &Term) -> Term {
        Term::hash(HashTag::H, vec![Term::data("zero32", None), k.clone()])
    }

    fn kcf(&self, ks: &Term, ss: &Term) -> Term {
        Term::hash(HashTag::KCF, vec![ks.clone(), Term::data("SAE", None), ss.clone()])
    }

    fn pmk(&self, ks: &Term, ss: &Term) -> Term {
        Term::hash(HashTag::PMK, vec![ks.clone(), Term::data("SAE", None), ss.clone()])
    }

    fn cn(&self, kc: &Term, counter: &Term, first: (&Term, &Term), second: (&Term, &Term)) -> Term {
        Term::hash(
            HashTag::CN,
            vec![kc.clone(), counter.clone(), first.0.clone(), first.1.clone(), second.0.clone(), second.1.clone()],
        )
    }

    fn counter(&self, n: u16, role: &str) -> Term {
        Term::data(&format!("i_{role}{n}"), Some(self.tag))
    }

    fn session_tag(&self, a: (&Term, &Term), b: (&Term, &Term)) -> String {
        let mut parts = [format!("{} {}", a.0, a.1), format!("{} {}", b.0, b.1)];
        parts.sort();
        short(&parts.join("|"))
    }

    fn key_digest(&self, k: &Term) -> String {
        short(&k.to_string())
    }
}

/// Transcript and secrets of one honest symbolic exchange.
#[derive(Clone, Debug)]
pub struct SymbolicRun {
    /// Everything that crossed the channel, as pairs of fields.
    pub observed: Vec<Term>,
    pub pwe: Term,
    pub r_l: Term,
    pub k_l: Term,
    pub k_r: Term,
    pub pmk_l: Term,
    pub pmk_r: Term,
    pub session_id: String,
}

/// Runs both sides of an honest exchange through the generic session code.
pub fn honest_exchange(mode: &ModeFlags) -> Result<SymbolicRun, String> {
    let (lm, rm) = (Mac::local(1), Mac::local(2));
    let mut store = PasswordStore::new();
    store.insert(lm, rm, None, "pw".to_string());
    store.insert(rm, lm, None, "pw".to_string());
    let suite = SymbolicSuite::new("sym", 1);
    let mut l = SessionState::new(suite.clone(), lm, rm, None, "L");
    let mut r = SessionState::new(suite, rm, lm, None, "R");
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let cl = l.generate_commit(&store, 1).map_err(|e| err(&e))?;
    let cr = r.generate_commit(&store, 2).map_err(|e| err(&e))?;
    let supported = vec!["sym".to_string()];
    let ctx = CommitContext { mode, level: Level::Device, supported: &supported, store: &store, mesh: false };
    for (me, peer) in [(&mut l, &cr), (&mut r, &cl)] {
        match me.process_peer_commit(peer, &ctx).map_err(|e| err(&e))? {
            CommitVerdict::Accept { .. } => {}
            other => return Err(format!("unexpected verdict {other:?}")),
        }
        me.derive_keys().map_err(|e| err(&e))?;
    }
    let fl = l.generate_confirm().map_err(|e| err(&e))?;
    let fr = r.generate_confirm().map_err(|e| err(&e))?;
    l.verify_confirm(&fr).map_err(|e| err(&e))?;
    r.verify_confirm(&fl).map_err(|e| err(&e))?;

    let commit_term = |c: &CommitPayload<SymbolicSuite>| {
        let (s, e) = c.values().expect("honest commit carries values");
        Term::pair(s.clone(), e.clone())
    };
    let observed = vec![
        commit_term(&cl),
        commit_term(&cr),
        Term::pair(fl.confirm.clone(), fl.send_confirm.clone()),
        Term::pair(fr.confirm.clone(), fr.send_confirm.clone()),
    ];
    Ok(SymbolicRun {
        observed,
        pwe: l.pwe.clone().expect("resolved"),
        r_l: l.r.clone().expect("drawn"),
        k_l: l.k.clone().expect("derived"),
        k_r: r.k.clone().expect("derived"),
        pmk_l: l.pmk.clone().expect("derived"),
        pmk_r: r.pmk.clone().expect("derived"),
        session_id: l.session_id.clone().expect("derived"),
    })
}
