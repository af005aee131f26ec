//! Parent process: PI database, routing, the Open counter, anti-clogging.

use super::{Device, Event, Input, Marker, Output, Pi, PiCtx, PiSnapshot, PiState, SmeCommand};
use crate::session::{
    hmac, is_rejection, Body, CommitPayload, Frame, Mac, STATUS_ANTI_CLOGGING_TOKEN_REQUIRED,
};

const TOKEN_KEY_TAG: u8 = 0x10;
const TOKEN_TAG: u8 = 0x11;
const TOKEN_LEN: usize = 16;

pub(super) fn token_key(mac: Mac, seed: u64) -> [u8; 32] {
    hmac(b"anti-clogging", TOKEN_KEY_TAG, &[&mac.0, &seed.to_be_bytes()])
}

impl Device {
    pub fn mint_token(&self, peer: Mac) -> Vec<u8> {
        hmac(&self.cfg.token_key, TOKEN_TAG, &[&peer.0])[..TOKEN_LEN].to_vec()
    }

    pub fn verify_token(&self, peer: Mac, token: &[u8]) -> bool {
        self.mint_token(peer) == token
    }

    /// Whether a commit from an unknown peer needs a token right now.
    pub fn token_required(&self) -> bool {
        if self.cfg.mode.geq_threshold {
            self.open >= self.cfg.threshold
        } else {
            self.open > self.cfg.threshold
        }
    }

    pub(super) fn handle_sme(&mut self, cmd: SmeCommand, now: u64, out: &mut Vec<Output>) {
        let me = self.mac();
        match cmd {
            SmeCommand::Initiate(peer) => {
                if self.pis_for(peer).any(|p| p.state.in_progress()) {
                    out.push(Output::Marker(Marker::InitiateRefused { actor: me, peer }));
                    return;
                }
                let i = self.allocate(peer, true);
                out.push(Output::Marker(Marker::Initiated { actor: me, peer }));
                self.deliver(i, Event::Init, now, out);
            }
            SmeCommand::Kill(peer) => {
                while let Some(i) = self.pis.iter().position(|p| p.peer == peer) {
                    self.remove(i, "Kill", out);
                }
            }
        }
    }

    fn allocate(&mut self, peer: Mac, initiator: bool) -> usize {
        let pi = Pi::new(self.next_handle, peer, &self.cfg, initiator);
        self.next_handle += 1;
        self.pis.push(pi);
        self.pis.len() - 1
    }

    pub(super) fn route_frame(&mut self, f: Frame, now: u64, out: &mut Vec<Output>) {
        let me = self.mac();
        let peer = f.src;
        if f.dst != me {
            return;
        }
        match f.body {
            Body::Commit(c) => {
                let target = self
                    .pis
                    .iter()
                    .position(|p| p.peer == peer && p.state.in_progress())
                    .or_else(|| self.pis.iter().position(|p| p.peer == peer));
                if let Some(i) = target {
                    self.deliver(i, Event::Com(c), now, out);
                    return;
                }
                if is_rejection(c.status) {
                    return;
                }
                let token_ok = c.token.as_deref().is_some_and(|t| self.verify_token(peer, t));
                let required = self.token_required();
                if required && !token_ok {
                    let token = self.mint_token(peer);
                    out.push(Output::Send(Frame {
                        src: me,
                        dst: peer,
                        body: Body::Commit(CommitPayload::status_only(
                            &c.group,
                            STATUS_ANTI_CLOGGING_TOKEN_REQUIRED,
                            None,
                            Some(token),
                        )),
                    }));
                    out.push(Output::Marker(Marker::TokenDemanded { actor: me, peer }));
                    return;
                }
                if !token_ok && self.open >= self.cfg.threshold {
                    self.audit.tokenless_admit = true;
                    out.push(Output::Marker(Marker::TokenlessAdmit {
                        actor: me,
                        peer,
                        open: self.open,
                        threshold: self.cfg.threshold,
                    }));
                }
                let i = self.allocate(peer, false);
                if required && token_ok && !self.cfg.mode.com_event_explicit {
                    // Admitted through the token path, but nobody hands the PI its commit.
                    return;
                }
                self.deliver(i, Event::Com(c), now, out);
            }
            Body::Confirm(c) => {
                let target = if self.cfg.mode.pid_del_patch {
                    self.pis.iter().position(|p| p.peer == peer && p.state != PiState::Nothing)
                } else {
                    self.pis.iter().position(|p| p.peer == peer)
                };
                let Some(i) = target else { return };
                if self.pis[i].state == PiState::Nothing {
                    self.audit.con_to_nothing = true;
                    out.push(Output::Marker(Marker::ConToNothing { actor: me, peer }));
                }
                self.deliver(i, Event::Con(c), now, out);
            }
        }
    }

    /// Runs one PI transition and applies what it asks of the parent.
    pub(super) fn deliver(&mut self, i: usize, ev: Event, now: u64, out: &mut Vec<Output>) {
        let me = self.mac();
        let cfg = self.cfg.clone();
        let pi = &mut self.pis[i];
        let peer = pi.peer;
        let before = (pi.state, pi.sync, pi.sc());
        out.push(Output::Event { peer, event: ev.name(), to_pi: true });
        let step = pi.step(ev, &PiCtx { cfg: &cfg, now });
        let after = (pi.state, pi.sync, pi.sc());
        if before.0 == PiState::Nothing && after.0 != PiState::Nothing {
            self.open += 1;
        } else if before.0 != PiState::Nothing && after.0 == PiState::Nothing {
            self.open -= 1;
        }
        if step.unhandled {
            self.audit.unhandled = true;
        }
        for body in step.frames {
            let origin = match &body {
                Body::Confirm(c) => self.pis[i].origin(c.confirm),
                _ => None,
            };
            out.push(Output::Send(Frame { src: me, dst: peer, body }));
            out.extend(origin.map(Output::Origin));
        }
        out.extend(step.markers.into_iter().map(Output::Marker));
        if before != after {
            out.push(Output::State { pi: PiSnapshot::from(&self.pis[i]), open: self.open });
        }
        if after.0 == PiState::Accepted && before.0 != PiState::Accepted {
            self.attempts.remove(&peer);
        }
        let mut terminate = None;
        for ev in step.events {
            out.push(Output::Event { peer, event: ev.name(), to_pi: false });
            match ev {
                Event::Del if terminate.is_none() => terminate = Some("Del"),
                Event::Fail => terminate = Some("Fail"),
                _ => {}
            }
        }
        if let Some(cause) = terminate {
            self.remove(i, cause, out);
        }
    }

    /// Deallocates a PI and applies the SME retry policy.
    fn remove(&mut self, i: usize, cause: &str, out: &mut Vec<Output>) {
        let me = self.mac();
        let pi = self.pis.remove(i);
        if pi.state != PiState::Nothing {
            self.open -= 1;
        }
        let cause = if pi.big_sync { "BigSync" } else { cause };
        out.push(Output::Marker(Marker::Deleted { actor: me, peer: pi.peer, cause: cause.to_string() }));
        if pi.initiator && pi.bad_auth && pi.big_sync {
            let n = self.attempts.entry(pi.peer).or_insert(0);
            *n += 1;
            let n = *n;
            if n < self.cfg.retry_limit {
                out.push(Output::Marker(Marker::Retry { actor: me, peer: pi.peer, attempt: n + 1 }));
                if let Some(m) = self.enqueue(Input::Sme(SmeCommand::Initiate(pi.peer))) {
                    out.push(Output::Marker(m));
                }
            } else {
                out.push(Output::Marker(Marker::RetryExhausted { actor: me, peer: pi.peer, attempts: n }));
            }
        }
    }
}
