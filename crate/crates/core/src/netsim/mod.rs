//! Deterministic simulator: devices joined by a channel the adversary owns.
//!
//! A round is: SME commands, scripted adversary steps, passive delivery of
//! whatever is still in flight with each frame handled on arrival, then
//! every device dispatches in order and fires due timers.

mod adversary;
mod props;
mod trace;

use std::collections::{BTreeMap, HashMap};

pub use adversary::{derivable, Knowledge, NotDerivable};
pub use props::{check_authentication, check_correctness};
pub use trace::{Record, RecordKind, Trace};

use crate::device::{ConfigError, ConfirmOrigin, Device, DeviceConfig, Input, Marker, Output, PiState, SmeCommand};
use crate::scenarios::{ActionKind, Scenario, ScenarioError, ScriptStep};
use crate::session::{Frame, Mac};

/// A frame waiting on the wire. The tag is its index in the history.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InFlight {
    pub tag: u32,
    pub frame: Frame,
}

#[derive(Clone, Debug, Default)]
pub struct Channel {
    pub in_flight: Vec<InFlight>,
    /// Every frame ever put on the wire, adversarial ones included.
    pub history: Vec<Frame>,
    /// Parallel to `history`: true where the adversary produced the frame.
    pub forged: Vec<bool>,
    /// Honest confirms by value, with the commits each one covers.
    pub origins: HashMap<[u8; 32], ConfirmOrigin>,
}

impl Channel {
    fn record(&mut self, f: Frame, forged: bool) -> u32 {
        self.history.push(f);
        self.forged.push(forged);
        (self.history.len() - 1) as u32
    }

    /// Frames honestly sent by `src`, in order.
    pub fn sent_by(&self, src: Mac) -> impl Iterator<Item = &Frame> {
        self.history.iter().zip(&self.forged).filter(move |(f, forged)| f.src == src && !**forged).map(|(f, _)| f)
    }
}

/// Resolved adversary move.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AdvAction {
    Deliver(u32),
    Drop(u32),
    /// Sends history entry `tag` back to its sender, addressed from its receiver.
    Reflect(u32),
    Replay(u32, Mac),
    Inject(Frame),
    Noop,
}

impl AdvAction {
    pub fn name(&self) -> &'static str {
        match self {
            AdvAction::Deliver(_) => "deliver",
            AdvAction::Drop(_) => "drop",
            AdvAction::Reflect(_) => "reflect",
            AdvAction::Replay(..) => "replay",
            AdvAction::Inject(_) => "inject",
            AdvAction::Noop => "noop",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("round {round}: injected frame is not derivable: {reason}")]
    InjectNotDerivable { round: u64, reason: NotDerivable },
}

/// Devices, channel and clock.
#[derive(Clone, Debug)]
pub struct World {
    pub devices: Vec<Device>,
    pub channel: Channel,
    pub now: u64,
}

impl World {
    pub fn new(cfgs: Vec<DeviceConfig>) -> Result<World, ConfigError> {
        let devices = cfgs.into_iter().map(Device::new).collect::<Result<Vec<_>, _>>()?;
        Ok(World { devices, channel: Channel::default(), now: 0 })
    }

    pub fn index_of(&self, mac: Mac) -> Option<usize> {
        self.devices.iter().position(|d| d.mac() == mac)
    }

    pub fn name_of(&self, mac: Mac) -> String {
        self.index_of(mac).map(|i| self.devices[i].name().to_string()).unwrap_or_else(|| mac.to_string())
    }

    pub fn sme(&mut self, dev: usize, cmd: SmeCommand) -> Option<Marker> {
        self.devices[dev].enqueue(Input::Sme(cmd))
    }

    fn enqueue(&mut self, f: Frame) -> Option<Marker> {
        let i = self.index_of(f.dst)?;
        self.devices[i].enqueue(Input::Frame(f))
    }

    /// Hands an in-flight frame to its destination. `None` if no such tag.
    pub fn deliver(&mut self, tag: u32) -> Option<Option<Marker>> {
        let i = self.channel.in_flight.iter().position(|x| x.tag == tag)?;
        let f = self.channel.in_flight.remove(i).frame;
        Some(self.enqueue(f))
    }

    pub fn drop_frame(&mut self, tag: u32) -> bool {
        let before = self.channel.in_flight.len();
        self.channel.in_flight.retain(|x| x.tag != tag);
        before != self.channel.in_flight.len()
    }

    /// Frame an adversary move would put straight into an inbox.
    pub fn forged(&self, act: &AdvAction) -> Option<Frame> {
        let hist = |t: u32| self.channel.history.get(t as usize);
        match act {
            AdvAction::Reflect(t) => hist(*t).map(|f| Frame { src: f.dst, dst: f.src, body: f.body.clone() }),
            AdvAction::Replay(t, dst) => hist(*t).map(|f| Frame { src: f.src, dst: *dst, body: f.body.clone() }),
            AdvAction::Inject(f) => Some(f.clone()),
            _ => None,
        }
    }

    /// Applies an adversary move. Returns the tag of a forged frame, an
    /// overflow marker if an inbox was full, and whether anything happened.
    pub fn apply(&mut self, act: &AdvAction) -> (Option<u32>, Option<Marker>, bool) {
        match act {
            AdvAction::Deliver(t) => match self.deliver(*t) {
                Some(m) => (None, m, true),
                None => (None, None, false),
            },
            AdvAction::Drop(t) => (None, None, self.drop_frame(*t)),
            AdvAction::Noop => (None, None, false),
            _ => match self.forged(act) {
                Some(f) => {
                    let tag = self.channel.record(f.clone(), true);
                    (Some(tag), self.enqueue(f), true)
                }
                None => (None, None, false),
            },
        }
    }

    /// Runs one device and puts whatever it sends on the wire.
    pub fn dispatch(&mut self, dev: usize) -> Vec<Output> {
        let now = self.now;
        let out = self.devices[dev].dispatch(now);
        self.post(&out);
        out
    }

    /// Lets a device handle what is queued, timers aside. Called after each
    /// delivery: a device consumes frames as they arrive, so its queue only
    /// fills with inputs that land in the same instant.
    pub fn consume(&mut self, dev: usize) -> Vec<Output> {
        let now = self.now;
        let out = self.devices[dev].dispatch_inbox(now);
        self.post(&out);
        out
    }

    /// Fires one PI timer regardless of the clock.
    pub fn fire(&mut self, dev: usize, handle: u32) -> Vec<Output> {
        let mut out = Vec::new();
        let now = self.now;
        self.devices[dev].fire_timer(handle, now, &mut out);
        self.post(&out);
        out
    }

    fn post(&mut self, out: &[Output]) {
        for o in out {
            match o {
                Output::Send(f) => {
                    let tag = self.channel.record(f.clone(), false);
                    self.channel.in_flight.push(InFlight { tag, frame: f.clone() });
                }
                Output::Origin(o) => {
                    self.channel.origins.insert(o.confirm, *o);
                }
                _ => {}
            }
        }
    }

    /// The rest of a round, untraced: passive delivery if asked, each frame
    /// consumed on arrival, every device dispatches, the clock advances.
    pub fn tick(&mut self, passive: bool) {
        if passive {
            let tags: Vec<u32> = self.channel.in_flight.iter().map(|x| x.tag).collect();
            for t in tags {
                let dst = self.channel.history[t as usize].dst;
                self.deliver(t);
                if let Some(i) = self.index_of(dst) {
                    self.consume(i);
                }
            }
        }
        for i in 0..self.devices.len() {
            self.dispatch(i);
        }
        self.now += 1;
    }

    pub fn quiet(&self) -> bool {
        self.channel.in_flight.is_empty()
            && self.devices.iter().all(|d| d.inbox.is_empty() && d.pis.iter().all(|p| p.t0.is_none()))
    }

    /// Stuck markers for every PI that can no longer move.
    pub fn stuck_markers(&self) -> Vec<Marker> {
        let mut out = Vec::new();
        for d in &self.devices {
            for p in &d.pis {
                let frozen = p.stuck || (p.state.in_progress() && p.t0.is_none());
                if frozen || (p.state == PiState::Nothing && p.bad_id) {
                    out.push(Marker::Stuck { actor: d.mac(), peer: p.peer, state: p.state });
                }
            }
        }
        out
    }
}

/// Runs a scenario under its own mode.
pub fn run(scn: &Scenario) -> Result<Trace, SimError> {
    run_world(scn).map(|(tr, _)| tr)
}

/// Like [`run`], also handing back the final world.
pub fn run_world(scn: &Scenario) -> Result<(Trace, World), SimError> {
    let mut world = World::new(scn.device_configs()?)?;
    let names: BTreeMap<Mac, String> = world.devices.iter().map(|d| (d.mac(), d.name().to_string())).collect();
    let mut tr = Trace::new(names);
    let last_round = scn.last_scripted_round();

    for round in 0..scn.rounds {
        tr.round = round;
        for s in scn.sme.iter().filter(|s| s.round == round) {
            let (dev, cmd) = scn.sme_command(s)?;
            let i = world.index_of(dev).expect("validated");
            tr.sme(&world, dev, cmd);
            if let Some(m) = world.sme(i, cmd) {
                tr.marker(&world, m);
            }
        }
        for step in scn.adversary.iter().filter(|s| s.round == round) {
            let act = resolve(scn, &world, step)?;
            if let AdvAction::Inject(f) = &act {
                let k = Knowledge::observe(&world.channel.history);
                derivable(&k, f).map_err(|reason| SimError::InjectNotDerivable { round, reason })?;
            }
            adversary_move(&mut world, &mut tr, &act);
        }
        if scn.passive_between {
            let tags: Vec<u32> = world.channel.in_flight.iter().map(|x| x.tag).collect();
            for t in tags {
                let f = world.channel.history[t as usize].clone();
                let m = world.deliver(t).flatten();
                tr.frame(&world, "channel", "deliver", t, &f);
                if let Some(m) = m {
                    tr.marker(&world, m);
                }
                if let Some(i) = world.index_of(f.dst) {
                    let base = world.channel.history.len() as u32;
                    let out = world.consume(i);
                    tr.outputs(&world, i, base, &out);
                }
            }
        }
        for i in 0..world.devices.len() {
            let base = world.channel.history.len() as u32;
            let out = world.dispatch(i);
            tr.outputs(&world, i, base, &out);
        }
        world.now += 1;
        if round >= last_round && world.quiet() {
            break;
        }
    }
    for m in world.stuck_markers() {
        tr.marker(&world, m);
    }
    tr.finish(&world);
    Ok((tr, world))
}

/// Records and applies one adversary move.
pub fn adversary_move(world: &mut World, tr: &mut Trace, act: &AdvAction) {
    let target = match act {
        AdvAction::Deliver(t) | AdvAction::Drop(t) => {
            world.channel.in_flight.iter().find(|x| x.tag == *t).map(|x| (*t, x.frame.clone()))
        }
        _ => None,
    };
    let (tag, marker, done) = world.apply(act);
    match (act, tag, target) {
        (_, Some(t), _) => {
            let f = world.channel.history[t as usize].clone();
            tr.frame(world, "adversary", act.name(), t, &f);
        }
        (_, None, Some((t, f))) if done => tr.frame(world, "adversary", act.name(), t, &f),
        _ => tr.note(world, "adversary", &format!("{}: nothing to act on", act.name())),
    }
    if let Some(m) = marker {
        tr.marker(world, m);
    }
}

pub fn resolve(scn: &Scenario, world: &World, step: &ScriptStep) -> Result<AdvAction, SimError> {
    let mac = |n: &Option<String>| -> Result<Option<Mac>, ScenarioError> { n.as_deref().map(|n| scn.mac_of(n)).transpose() };
    let (from, to) = (mac(&step.from)?, mac(&step.to)?);
    let kind = step.kind;
    let matches = |f: &Frame| {
        from.is_none_or(|m| f.src == m) && to.is_none_or(|m| f.dst == m) && kind.is_none_or(|k| f.kind() == k)
    };
    let pick = |cands: Vec<u32>, default_last: bool| -> Option<u32> {
        let n = step.nth.unwrap_or(if default_last { -1 } else { 0 });
        let idx = if n < 0 { cands.len() as i64 + n } else { n };
        usize::try_from(idx).ok().and_then(|i| cands.get(i).copied())
    };
    let in_flight = || {
        world.channel.in_flight.iter().filter(|x| step.tag.map_or(matches(&x.frame), |t| t == x.tag)).map(|x| x.tag)
    };
    let in_flight = || in_flight().collect::<Vec<_>>();
    let history = || {
        let all = 0..world.channel.history.len() as u32;
        all.filter(|t| step.tag.map_or(matches(&world.channel.history[*t as usize]), |x| x == *t)).collect::<Vec<_>>()
    };
    Ok(match step.action {
        ActionKind::Noop => AdvAction::Noop,
        ActionKind::Deliver => pick(in_flight(), false).map(AdvAction::Deliver).unwrap_or(AdvAction::Noop),
        ActionKind::Drop => pick(in_flight(), false).map(AdvAction::Drop).unwrap_or(AdvAction::Noop),
        ActionKind::Reflect => pick(history(), true).map(AdvAction::Reflect).unwrap_or(AdvAction::Noop),
        ActionKind::Replay => {
            let dst = mac(&step.send_to)?.ok_or_else(|| ScenarioError::Invalid("replay needs send_to".into()))?;
            pick(history(), true).map(|t| AdvAction::Replay(t, dst)).unwrap_or(AdvAction::Noop)
        }
        ActionKind::Inject => {
            let has_base = step.tag.is_some() || step.from.is_some() || step.to.is_some() || step.kind.is_some();
            let base = if has_base {
                match pick(history(), true) {
                    Some(t) => Some(world.channel.history[t as usize].clone()),
                    None => return Ok(AdvAction::Noop),
                }
            } else {
                None
            };
            AdvAction::Inject(scn.build_inject(step, base)?)
        }
    })
}

#[cfg(test)]
mod tests;
