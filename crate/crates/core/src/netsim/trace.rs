//! Trace records and their JSON-lines form.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

use super::World;
use crate::device::{Marker, Output, SmeCommand};
use crate::session::{Frame, Mac};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Frame,
    Event,
    StateChange,
    Marker,
}

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub step: u64,
    pub round: u64,
    pub actor: String,
    pub kind: RecordKind,
    pub payload: Value,
    pub snapshot: Option<Value>,
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub records: Vec<Record>,
    /// The markers again, typed, in trace order.
    pub markers: Vec<Marker>,
    /// Every frame the channel saw, for post-hoc checks.
    pub history: Vec<Frame>,
    pub forged: Vec<bool>,
    pub names: BTreeMap<Mac, String>,
    pub round: u64,
    /// Final `{"pis":..,"open":n}` per device name.
    pub final_state: BTreeMap<String, Value>,
}

impl Trace {
    pub fn new(names: BTreeMap<Mac, String>) -> Self {
        Trace { names, ..Default::default() }
    }

    pub fn name(&self, mac: Mac) -> String {
        self.names.get(&mac).cloned().unwrap_or_else(|| mac.to_string())
    }

    fn push(&mut self, actor: String, kind: RecordKind, payload: Value, snapshot: Option<Value>) {
        let step = self.records.len() as u64;
        self.records.push(Record { step, round: self.round, actor, kind, payload, snapshot });
    }

    pub fn sme(&mut self, world: &World, dev: Mac, cmd: SmeCommand) {
        let (what, peer) = match cmd {
            SmeCommand::Initiate(p) => ("Initiate", p),
            SmeCommand::Kill(p) => ("Kill", p),
        };
        self.push(world.name_of(dev), RecordKind::Event, json!({ "sme": what, "peer": world.name_of(peer) }), None);
    }

    pub fn frame(&mut self, world: &World, actor: &str, action: &str, tag: u32, f: &Frame) {
        let payload = json!({
            "action": action,
            "tag": tag,
            "src": world.name_of(f.src),
            "dst": world.name_of(f.dst),
            "frame": f.body.to_value(),
        });
        self.push(actor.to_string(), RecordKind::Frame, payload, None);
    }

    pub fn note(&mut self, _world: &World, actor: &str, text: &str) {
        self.push(actor.to_string(), RecordKind::Frame, json!({ "action": "noop", "note": text }), None);
    }

    pub fn marker(&mut self, world: &World, m: Marker) {
        let actor = world.name_of(m.actor());
        let payload = serde_json::to_value(&m).expect("marker serialises");
        self.push(actor, RecordKind::Marker, payload, None);
        self.markers.push(m);
    }

    /// Records what device `dev` produced; its sends got tags from `base` on.
    pub fn outputs(&mut self, world: &World, dev: usize, base: u32, out: &[Output]) {
        let d = &world.devices[dev];
        let actor = d.name().to_string();
        let mut tag = base;
        for o in out {
            match o {
                Output::Send(f) => {
                    self.frame(world, &actor, "send", tag, f);
                    tag += 1;
                }
                Output::Event { peer, event, to_pi } => {
                    let dir = if *to_pi { "pp->pi" } else { "pi->pp" };
                    let payload = json!({ "peer": world.name_of(*peer), "event": event, "dir": dir });
                    self.push(actor.clone(), RecordKind::Event, payload, None);
                }
                Output::State { pi, open } => {
                    let payload = json!({ "peer": world.name_of(pi.mac), "state": pi.state, "sync": pi.sync, "sc": pi.sc, "open": open });
                    let snapshot = json!({ "pi": pi, "open": open });
                    self.push(actor.clone(), RecordKind::StateChange, payload, Some(snapshot));
                }
                Output::Marker(m) => self.marker(world, m.clone()),
                Output::Origin(_) => {}
            }
        }
    }

    pub fn finish(&mut self, world: &World) {
        self.history = world.channel.history.clone();
        self.forged = world.channel.forged.clone();
        self.final_state = world.devices.iter().map(|d| (d.name().to_string(), d.snapshot())).collect();
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(s, "{}", serde_json::to_string(r).expect("record serialises"));
        }
        s
    }

    pub fn count(&self, marker: &str) -> usize {
        self.markers.iter().filter(|m| m.name() == marker).count()
    }

    pub fn has(&self, marker: &str) -> bool {
        self.count(marker) > 0
    }

    /// Frames honestly sent by `src`.
    pub fn sent_by(&self, src: Mac) -> impl Iterator<Item = &Frame> {
        self.history.iter().zip(&self.forged).filter(move |(f, forged)| f.src == src && !**forged).map(|(f, _)| f)
    }

    pub fn open_of(&self, name: &str) -> Option<u64> {
        self.final_state.get(name).and_then(|v| v["open"].as_u64())
    }
}
