//! Bounded breadth-first exploration of every interleaving of device steps
//! and adversary moves, checking the device-level properties.
//!
//! One global step is one simulator round: SME commands, at most one
//! adversary action, delivery of everything in flight (each frame handled
//! as it arrives), then every device dispatches and fires due timers.
//!
//! A verdict is PASS when every configuration within the bounds was
//! visited, FAIL with a shortest counterexample, or BOUND_REACHED when the
//! state cap cut the search short first. The search deepens the adversary
//! budget one action at a time, so BOUND_REACHED still says up to how many
//! adversary actions nothing was found.

mod canon;
mod moves;

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use serde_json::{json, Value};

pub use canon::fingerprint;
pub use moves::{mutations, Mutation, BOGUS_GROUP, BOGUS_PID};

use crate::device::{PiState, SmeCommand};
use crate::netsim::{resolve, run_world, SimError, Trace, World};
use crate::scenarios::{Scenario, ScenarioError, ScriptStep};
use crate::session::Mac;
use crate::verdict::{PropertyResult, Verdict};

pub const DEFAULT_ADVERSARY_BOUND: u32 = 6;
pub const DEFAULT_STEP_BOUND: u32 = 40;
pub const DEFAULT_MAX_STATES: usize = 40_000;
/// Honest rounds a progress check may run before giving up.
const PROGRESS_ROUNDS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub adversary: u32,
    pub steps: u32,
    pub max_states: usize,
    /// Skip configurations already seen. Off only to cross-check pruning.
    pub prune: bool,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            adversary: DEFAULT_ADVERSARY_BOUND,
            steps: DEFAULT_STEP_BOUND,
            max_states: DEFAULT_MAX_STATES,
            prune: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// At most one PI per peer in Committed or Confirmed.
    SinglePi,
    /// The open counter equals the number of PIs not in Nothing.
    OpenCounter,
    /// No commit without a token is admitted once open reaches the threshold.
    AntiClogging,
    /// No input is lost to a full event queue.
    EdgeSafety,
    /// No PI sits in Committed with T0 disarmed.
    NoStuckCommitted,
    /// Every Committed/Confirmed PI can still change state without help
    /// from the adversary.
    Progress,
    Reachable(PiState),
}

impl Property {
    pub fn all() -> Vec<Property> {
        let mut v = vec![
            Property::SinglePi,
            Property::OpenCounter,
            Property::AntiClogging,
            Property::EdgeSafety,
            Property::NoStuckCommitted,
            Property::Progress,
        ];
        v.extend(PiState::ALL.map(Property::Reachable));
        v
    }

    pub fn name(&self) -> String {
        match self {
            Property::SinglePi => "single_pi".into(),
            Property::OpenCounter => "open_counter".into(),
            Property::AntiClogging => "anti_clogging".into(),
            Property::EdgeSafety => "edge_safety".into(),
            Property::NoStuckCommitted => "no_stuck_committed".into(),
            Property::Progress => "progress".into(),
            Property::Reachable(s) => format!("reachable_{}", s.name().to_lowercase()),
        }
    }

    /// Comma-separated names; `all` and `reachability` expand.
    pub fn parse_list(s: &str) -> Result<Vec<Property>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Property::all()),
                "reachability" => out.extend(PiState::ALL.map(Property::Reachable)),
                p => out.push(
                    Property::all()
                        .into_iter()
                        .find(|x| x.name() == p)
                        .ok_or_else(|| format!("unknown property `{p}`"))?,
                ),
            }
        }
        out.dedup();
        if out.is_empty() {
            return Err("empty property list".into());
        }
        Ok(out)
    }
}

/// Devices and scripted SME commands, taken from a scenario. The scenario's
/// adversary script is ignored: the explorer tries every move.
#[derive(Clone, Debug)]
pub struct Setup {
    pub scenario: Scenario,
    world: World,
    sme: Vec<(u64, usize, SmeCommand)>,
}

impl Setup {
    pub fn new(scn: &Scenario) -> Result<Setup, SimError> {
        let world = World::new(scn.device_configs()?)?;
        let mut sme = Vec::new();
        for s in &scn.sme {
            let (dev, cmd) = scn.sme_command(s)?;
            sme.push((s.round, world.index_of(dev).expect("validated"), cmd));
        }
        let mut scenario = scn.clone();
        scenario.adversary.clear();
        scenario.passive_between = true;
        Ok(Setup { scenario, world, sme })
    }

    fn root(&self) -> Node {
        Node { world: self.world.clone(), round: 0, adv_used: 0 }
    }

    /// Round after which no SME command is left.
    fn sme_done(&self) -> u64 {
        self.sme.iter().map(|s| s.0 + 1).max().unwrap_or(0)
    }

    fn name(&self, mac: Mac) -> String {
        self.world.name_of(mac)
    }
}

/// A configuration at a round boundary.
#[derive(Clone, Debug)]
struct Node {
    world: World,
    round: u64,
    adv_used: u32,
}

impl Node {
    fn key(&self, setup: &Setup, budget: u32) -> u128 {
        let left = budget.saturating_sub(self.adv_used) as usize;
        fingerprint(&self.world, &[self.round.min(setup.sme_done())], left)
    }

    fn issue_sme(&mut self, setup: &Setup) {
        for (_, dev, cmd) in setup.sme.iter().filter(|s| s.0 == self.round) {
            self.world.sme(*dev, *cmd);
        }
    }

    /// Plays one round: SME commands, the optional adversary step, then
    /// delivery and dispatch.
    fn advance(&self, setup: &Setup, adv: Option<&ScriptStep>) -> Result<Node, SimError> {
        let mut n = self.clone();
        n.issue_sme(setup);
        if let Some(step) = adv {
            let act = resolve(&setup.scenario, &n.world, step)?;
            n.world.apply(&act);
            n.adv_used += 1;
        }
        n.world.tick(true);
        n.round += 1;
        Ok(n)
    }
}

/// A shortest violating script, replayable through the simulator.
#[derive(Clone, Debug)]
pub struct Counterexample {
    /// The setup scenario with the adversary's moves as its script.
    pub scenario: Scenario,
    pub trace: Trace,
    /// Fingerprint of the violating configuration as the explorer saw it.
    pub fingerprint: u128,
}

#[derive(Clone, Debug)]
pub struct ExploreResult {
    pub result: PropertyResult,
    pub counterexample: Option<Counterexample>,
}

impl ExploreResult {
    pub fn to_json(&self, counterexample_file: Option<&str>) -> Value {
        json!({
            "property": self.result.property,
            "verdict": self.result.verdict.to_string(),
            "states": self.result.states_visited,
            "depth": self.result.depth,
            "counterexample_file": counterexample_file,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub results: Vec<ExploreResult>,
    pub states: usize,
    pub depth: usize,
    /// Every configuration within the bounds was visited.
    pub complete: bool,
    /// Largest adversary budget searched exhaustively.
    pub exhaustive: Option<u32>,
    /// Progress checks whose honest continuation ran out of rounds.
    pub inconclusive: usize,
}

impl Exploration {
    pub fn get(&self, p: Property) -> Option<&ExploreResult> {
        self.results.iter().find(|r| r.result.property == p.name())
    }
}

struct Hit {
    depth: usize,
    adversary: u32,
    counterexample: Option<Counterexample>,
}

struct Search<'a> {
    setup: &'a Setup,
    props: Vec<Property>,
    hits: Vec<Option<Hit>>,
    /// Parent and adversary step of every node in the current pass.
    tree: Vec<(u32, Option<ScriptStep>)>,
    inconclusive: usize,
}

/// How one pass over a fixed adversary budget ended.
enum Pass {
    Complete,
    Capped,
    Settled,
}

/// Iterative deepening over the adversary budget, each pass breadth-first
/// over rounds. A round allows one adversary action or none; everything
/// else is the simulator's round. Counterexamples therefore use as few
/// adversary actions as possible, and the fewest rounds among those.
pub fn explore(setup: &Setup, bounds: &Bounds, props: &[Property]) -> Result<Exploration, SimError> {
    if props.is_empty() {
        return Err(ScenarioError::Invalid("empty property list".into()).into());
    }
    let mut s = Search { setup, props: props.to_vec(), hits: (0..props.len()).map(|_| None).collect(), tree: Vec::new(), inconclusive: 0 };
    let mut states = 0;
    let mut depth = 0;
    let mut exhaustive = None;
    for budget in 0..=bounds.adversary {
        let (pass, n, d) = s.pass(bounds, budget, bounds.max_states.saturating_sub(states))?;
        states += n;
        depth = depth.max(d);
        match pass {
            Pass::Complete => exhaustive = Some(budget),
            Pass::Settled => break,
            Pass::Capped => break,
        }
    }
    let complete = exhaustive == Some(bounds.adversary);
    let mut results = Vec::new();
    for (i, p) in s.props.iter().enumerate() {
        let mut r = PropertyResult::new(p.name(), Verdict::Pass);
        r.states_visited = states;
        r.depth = depth;
        let mut cex = None;
        match (p, s.hits[i].take()) {
            (Property::Reachable(st), Some(h)) => {
                r.depth = h.depth;
                r = r.note(format!("{} reached after {} rounds", st.name(), h.depth));
            }
            (Property::Reachable(st), None) => {
                r.verdict = if complete { Verdict::Fail } else { Verdict::BoundReached };
                r = r.note(format!("no configuration within the bounds has a PI in {}", st.name()));
            }
            (_, Some(h)) => {
                r.verdict = Verdict::Fail;
                r.depth = h.depth;
                r = r.note(format!("violated after {} rounds with {} adversary actions", h.depth, h.adversary));
                cex = h.counterexample;
            }
            (Property::Progress, None) if s.inconclusive > 0 => {
                r.verdict = Verdict::BoundReached;
                r = r.note(format!("{} progress checks did not settle", s.inconclusive));
            }
            (_, None) if !complete => r.verdict = Verdict::BoundReached,
            _ => {}
        }
        if r.verdict == Verdict::BoundReached {
            r = r.note(match exhaustive {
                Some(k) => format!("exhaustive up to {k} adversary actions"),
                None => "state cap reached before any budget was exhausted".into(),
            });
        }
        results.push(ExploreResult { result: r, counterexample: cex });
    }
    Ok(Exploration { results, states, depth, complete, exhaustive, inconclusive: s.inconclusive })
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.hits.iter().all(Option::is_some)
    }

    /// Breadth-first with at most `budget` adversary actions and at most
    /// `cap` new states. Returns the outcome, states and depth reached.
    fn pass(&mut self, bounds: &Bounds, budget: u32, cap: usize) -> Result<(Pass, usize, usize), SimError> {
        let setup = self.setup;
        let root = setup.root();
        self.tree = vec![(u32::MAX, None)];
        // Least adversary budget spent on reaching each configuration. Reaching
        // it again, no earlier and with no less spent, adds nothing.
        let mut visited: HashMap<u128, u32> = HashMap::new();
        visited.insert(root.key(setup, budget), 0);
        self.check(&root, 0, 0)?;
        let mut frontier = vec![(0u32, root)];
        let mut depth = 0;
        while !frontier.is_empty() && depth < bounds.steps as usize {
            if self.done() {
                return Ok((Pass::Settled, self.tree.len(), depth));
            }
            let mut next = Vec::new();
            for (id, node) in &frontier {
                let mut options: Vec<Option<ScriptStep>> = vec![None];
                if node.adv_used < budget {
                    let mut w = node.world.clone();
                    for (_, dev, cmd) in setup.sme.iter().filter(|x| x.0 == node.round) {
                        w.sme(*dev, *cmd);
                    }
                    options.extend(moves::adversary(&w, node.round, |m| setup.name(m)).into_iter().map(Some));
                }
                for adv in options {
                    let child = node.advance(setup, adv.as_ref())?;
                    if bounds.prune {
                        match visited.entry(child.key(setup, budget)) {
                            Entry::Occupied(e) if *e.get() <= child.adv_used => continue,
                            Entry::Occupied(mut e) => {
                                e.insert(child.adv_used);
                            }
                            Entry::Vacant(e) => {
                                e.insert(child.adv_used);
                            }
                        }
                    }
                    if self.tree.len() > cap {
                        return Ok((Pass::Capped, self.tree.len(), depth));
                    }
                    let cid = self.tree.len() as u32;
                    self.tree.push((*id, adv));
                    self.check(&child, cid, depth + 1)?;
                    next.push((cid, child));
                }
            }
            frontier = next;
            depth += 1;
        }
        let pass = if self.done() { Pass::Settled } else { Pass::Complete };
        Ok((pass, self.tree.len(), depth))
    }

    fn check(&mut self, node: &Node, id: u32, depth: usize) -> Result<(), SimError> {
        for i in 0..self.props.len() {
            let p = self.props[i];
            if self.hits[i].is_none() && self.hit(p, node) {
                let counterexample = match p {
                    Property::Reachable(_) => None,
                    _ => Some(self.counterexample(id, p)?),
                };
                self.hits[i] = Some(Hit { depth, adversary: node.adv_used, counterexample });
            }
        }
        Ok(())
    }

    /// True when `node` violates the property, or witnesses a reachability goal.
    fn hit(&mut self, p: Property, node: &Node) -> bool {
        let w = &node.world;
        match p {
            Property::SinglePi => w.devices.iter().any(|d| {
                let mut peers: Vec<_> = d.pis.iter().filter(|p| busy(p.state)).map(|p| p.peer).collect();
                let n = peers.len();
                peers.sort();
                peers.dedup();
                peers.len() < n
            }),
            Property::OpenCounter => w.devices.iter().any(|d| d.open != d.open_recount()),
            Property::AntiClogging => w.devices.iter().any(|d| d.audit.tokenless_admit),
            Property::EdgeSafety => w.devices.iter().any(|d| d.audit.overflow),
            Property::NoStuckCommitted => {
                w.devices.iter().any(|d| d.pis.iter().any(|p| p.state == PiState::Committed && frozen(p)))
            }
            // Every PI starts out in Nothing.
            Property::Reachable(PiState::Nothing) => true,
            Property::Reachable(s) => w.devices.iter().any(|d| d.pis.iter().any(|p| p.state == s)),
            Property::Progress => {
                let stalled: Vec<(usize, u32)> = w
                    .devices
                    .iter()
                    .enumerate()
                    .flat_map(|(i, d)| d.pis.iter().filter(|p| busy(p.state) && frozen(p)).map(move |p| (i, p.handle)))
                    .collect();
                stalled.into_iter().any(|(dev, handle)| match can_progress(self.setup, node, dev, handle) {
                    Some(ok) => !ok,
                    None => {
                        self.inconclusive += 1;
                        false
                    }
                })
            }
        }
    }

    fn counterexample(&self, mut id: u32, p: Property) -> Result<Counterexample, SimError> {
        let mut steps = Vec::new();
        let mut rounds = 0;
        while self.tree[id as usize].0 != u32::MAX {
            let (parent, step) = &self.tree[id as usize];
            steps.extend(step.clone());
            rounds += 1;
            id = *parent;
        }
        steps.reverse();
        let mut scn = self.setup.scenario.clone();
        scn.name = format!("{}_{}_counterexample", scn.name, p.name());
        scn.description = format!("Shortest adversary script violating {} found by the explorer.", p.name());
        scn.adversary = steps;
        scn.expectations.clear();
        scn.rounds = rounds;
        let (trace, world) = run_world(&scn)?;
        Ok(Counterexample { scenario: scn, trace, fingerprint: fingerprint(&world, &[], usize::MAX) })
    }
}

fn busy(s: PiState) -> bool {
    matches!(s, PiState::Committed | PiState::Confirmed)
}

/// No timer left to move the PI on its own.
fn frozen(p: &crate::device::Pi) -> bool {
    p.t0.is_none() || p.stuck
}

/// Runs honest rounds from `node` until PI `handle` on device `dev` changes
/// state or goes away (`Some(true)`), everything falls quiet around it
/// (`Some(false)`), or the round budget runs out (`None`).
fn can_progress(setup: &Setup, node: &Node, dev: usize, handle: u32) -> Option<bool> {
    let state = |n: &Node| n.world.devices[dev].pis.iter().find(|p| p.handle == handle).map(|p| p.state);
    let start = state(node);
    let mut n = node.clone();
    for _ in 0..PROGRESS_ROUNDS {
        if n.world.quiet() && n.round >= setup.sme_done() {
            return Some(false);
        }
        n = n.advance(setup, None).ok()?;
        if state(&n) != start {
            return Some(true);
        }
    }
    None
}

/// Fingerprint of the configuration a counterexample scenario ends in.
pub fn replay_fingerprint(cex: &Counterexample) -> Result<u128, SimError> {
    let (_, world) = run_world(&cex.scenario)?;
    Ok(fingerprint(&world, &[], usize::MAX))
}
