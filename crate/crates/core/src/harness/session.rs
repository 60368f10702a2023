//! Sessions: one distributor, a pool of servers and one collector exchanging
//! messages over a [`Transport`].
//!
//! Parties are sequential state machines. The scheduler is single-threaded
//! and deterministic: every sent message enqueues its directed channel, and
//! channels are drained in global send order.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::message::{Message, MessageKey, PartyId, Role, Tag};
use super::metrics::{RoleMetrics, RunMetrics};
use super::transport::{builtin_transports, Transport};
use crate::error::{Error, Result};
use crate::modring::{Arith, Meter, Residue, Ring};
use crate::polyctrl::{ConstantMode, EvaluationPlan, SummandInstance};
use crate::registry::Registry;
use crate::scheme::{self, InstanceContext, MultiplicationScheme, Progress, ServerIo, ServerProduct};
use crate::sharing::{
    self, CommunicationZeroSharer, CorrelatedZeroSharer, PrfKey, ShareView, ZeroShareMode, ZeroSharer, KEY_WORDS,
};

pub type ZeroSharerFactory = fn(&Meter, &mut dyn RngCore) -> Box<dyn ZeroSharer>;

pub fn builtin_zero_sharers() -> Registry<ZeroSharerFactory> {
    let mut r: Registry<ZeroSharerFactory> = Registry::new("zero-sharing mode");
    r.register("communication", |_, _| Box::new(CommunicationZeroSharer::new()));
    r.register("correlated", |meter, rng| Box::new(CorrelatedZeroSharer::new(PrfKey::generate(meter, rng))));
    r
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub id: u64,
    pub seed: u64,
    pub transport: String,
    pub zero_sharing: ZeroShareMode,
    /// Record every party's sent and received messages.
    pub audit: bool,
    /// Corrupt one share value in every step (detector demonstration).
    pub inject_fault: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            id: 1,
            seed: 0,
            transport: "in-memory".into(),
            zero_sharing: ZeroShareMode::default(),
            audit: false,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub direction: Direction,
    pub message: Message,
}

fn party_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const TRANSPORT_STREAM: u64 = 0x100;

struct Distributor {
    meter: Meter,
    rng: ChaCha20Rng,
}

struct ActiveInstance {
    product: Box<dyn ServerProduct>,
    piece: Option<Residue>,
}

struct Server {
    index: usize,
    meter: Meter,
    rng: ChaCha20Rng,
    zero: Box<dyn ZeroSharer>,
    instances: BTreeMap<u16, ActiveInstance>,
}

struct Collector {
    meter: Meter,
    results: BTreeMap<u16, Vec<Option<Residue>>>,
}

pub struct Session {
    config: SessionConfig,
    plan: EvaluationPlan,
    scheme: Arc<dyn MultiplicationScheme>,
    transport: Box<dyn Transport>,
    distributor: Distributor,
    servers: Vec<Server>,
    collector: Collector,
    queue: VecDeque<(PartyId, PartyId)>,
    seen: HashSet<MessageKey>,
    log: Vec<Message>,
    audit: BTreeMap<PartyId, Vec<AuditEntry>>,
    step: u32,
    pings: u16,
    totals: RunMetrics,
    current: RunMetrics,
    last_step: RunMetrics,
    closed: bool,
}

impl Session {
    pub fn open(plan: &EvaluationPlan, config: SessionConfig) -> Result<Self> {
        let scheme = scheme::scheme(plan.scheme)?;
        plan.validate(scheme.as_ref())?;
        let mut secret = [0u8; 32];
        party_rng(config.seed, TRANSPORT_STREAM).fill_bytes(&mut secret);
        let transport = (builtin_transports().get(&config.transport)?)(secret)?;
        let zero_factory = *builtin_zero_sharers().get(config.zero_sharing.name())?;
        let ring = plan.ring;
        let seed = config.seed;
        let servers = (0..plan.pool_size)
            .map(|index| {
                let meter = Meter::new(ring);
                let mut rng = party_rng(seed, PartyId::server(index).to_byte() as u64);
                let zero: Box<dyn ZeroSharer> = if scheme.uses_zero_sharing() {
                    zero_factory(&meter, &mut rng)
                } else {
                    Box::new(CommunicationZeroSharer::new())
                };
                Server { index, meter, rng, zero, instances: BTreeMap::new() }
            })
            .collect();
        let mut session = Self {
            distributor: Distributor {
                meter: Meter::new(ring),
                rng: party_rng(seed, PartyId::Distributor.to_byte() as u64),
            },
            collector: Collector { meter: Meter::new(ring), results: BTreeMap::new() },
            current: RunMetrics::with_servers(plan.pool_size),
            totals: RunMetrics::with_servers(plan.pool_size),
            last_step: RunMetrics::with_servers(plan.pool_size),
            plan: plan.clone(),
            scheme,
            transport,
            servers,
            queue: VecDeque::new(),
            seen: HashSet::new(),
            log: Vec::new(),
            audit: BTreeMap::new(),
            step: 0,
            pings: 0,
            config,
            closed: false,
        };
        session.key_setup()?;
        Ok(session)
    }

    /// Keyed zero-sharers send their key to their predecessor, so each ends
    /// up holding its own key and its successor's.
    fn key_setup(&mut self) -> Result<()> {
        let n = self.servers.len();
        let keys: Vec<Option<PrfKey>> = self.servers.iter().map(|s| s.zero.setup_key()).collect();
        for (j, key) in keys.into_iter().enumerate() {
            let Some(key) = key else { continue };
            let msg = Message {
                session: self.config.id,
                step: 0,
                summand: 0,
                tag: Tag::KeySetup,
                sender: PartyId::server(j),
                receiver: PartyId::server((j + n - 1) % n),
                payload: key.to_residues(),
            };
            self.send(msg)?;
        }
        self.pump()?;
        self.finish_metrics();
        Ok(())
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn plan(&self) -> &EvaluationPlan {
        &self.plan
    }

    pub fn scheme(&self) -> &dyn MultiplicationScheme {
        self.scheme.as_ref()
    }

    pub fn transport_name(&self) -> &'static str {
        self.transport.name()
    }

    /// Sends a ping from the distributor to every other party and returns
    /// the number of pongs that came back.
    pub fn ping_all(&mut self) -> Result<usize> {
        self.ensure_open()?;
        self.pings = self.pings.wrapping_add(1);
        let mut targets: Vec<PartyId> = (0..self.servers.len()).map(PartyId::server).collect();
        targets.push(PartyId::Collector);
        for &to in &targets {
            self.send(self.message(0, Tag::Ping, PartyId::Distributor, to, vec![]))?;
        }
        let before = self.log.iter().filter(|m| m.tag == Tag::Pong).count();
        self.pump()?;
        self.finish_metrics();
        Ok(self.log.iter().filter(|m| m.tag == Tag::Pong).count() - before)
    }

    fn message(&self, summand: u16, tag: Tag, sender: PartyId, receiver: PartyId, payload: Vec<Residue>) -> Message {
        let summand = if matches!(tag, Tag::Ping | Tag::Pong) { self.pings } else { summand };
        Message { session: self.config.id, step: self.step, summand, tag, sender, receiver, payload }
    }

    fn ensure_open(&self) -> Result<()> {
        if self.closed {
            Err(Error::SessionClosed)
        } else {
            Ok(())
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Runs one control step: shares the factors of every instance, lets the
    /// servers compute, and returns the collector's sum.
    pub fn run_step(&mut self, state: &[Residue]) -> Result<Residue> {
        self.ensure_open()?;
        let result = self.try_step(state);
        if result.is_err() {
            // a failed step leaves parties in an undefined state
            self.closed = true;
        }
        result
    }

    fn try_step(&mut self, state: &[Residue]) -> Result<Residue> {
        if state.len() != self.plan.n_x {
            return Err(Error::ComponentCount { expected: self.plan.n_x, found: state.len() });
        }
        for r in state {
            self.plan.ring.check(*r)?;
        }
        self.step = self.step.checked_add(1).ok_or_else(|| Error::Session("step counter overflow".into()))?;
        for s in &mut self.servers {
            s.instances.clear();
        }
        self.collector.results.clear();

        let mut outgoing = Vec::new();
        let instances = self.plan.instances.clone();
        for inst in &instances {
            let factors = inst.resolve(state);
            let bundles = self.scheme.distribute(&factors, &self.distributor.meter, &mut self.distributor.rng)?;
            let pieces = if self.plan.carries_constant(inst.summand) {
                let c = self.plan.constant.expect("carrier implies a constant");
                let s = sharing::share(c, inst.servers.len(), &self.distributor.meter, &mut self.distributor.rng)?;
                Some(s.components().to_vec())
            } else {
                None
            };
            self.collector.results.insert(inst.summand, vec![None; inst.servers.len()]);
            for (local, bundle) in bundles.into_iter().enumerate() {
                let mut payload: Vec<Residue> = bundle.iter().flat_map(|v| v.entries().iter().copied()).collect();
                if let Some(p) = &pieces {
                    payload.push(p[local]);
                }
                let to = PartyId::server(inst.servers[local]);
                outgoing.push(self.message(inst.summand, Tag::Bundle, PartyId::Distributor, to, payload));
            }
        }
        if self.config.inject_fault {
            if let Some(first) = outgoing.first_mut().and_then(|m| m.payload.first_mut()) {
                first.value = (first.value + 1) % self.plan.ring.modulus();
            }
        }
        for m in outgoing {
            self.send(m)?;
        }
        self.pump()?;
        let u = self.collect()?;
        self.finish_metrics();
        Ok(u)
    }

    fn collect(&mut self) -> Result<Residue> {
        let meter = &self.collector.meter;
        let mut u = Residue::zero(self.plan.target_scale);
        for (&summand, shares) in &self.collector.results {
            let present = shares
                .iter()
                .enumerate()
                .map(|(j, s)| s.ok_or_else(|| Error::protocol(summand, format!("no result from party {j}"))))
                .collect::<Result<Vec<_>>>()?;
            let term = sharing::reconstruct(&present, meter)?;
            if term.scale != self.plan.target_scale {
                return Err(Error::ScaleMismatch { left: self.plan.target_scale, right: term.scale });
            }
            u = meter.add(u, term)?;
        }
        if let (Some(c), ConstantMode::Direct) = (self.plan.constant, self.plan.constant_mode) {
            u = meter.add(u, c)?;
        }
        Ok(u)
    }

    fn send(&mut self, msg: Message) -> Result<()> {
        self.ensure_open()?;
        self.check_payload(&msg)?;
        if !self.seen.insert(msg.key()) {
            return Err(Error::Session(format!("duplicate message {:?}", msg.key())));
        }
        let bytes = msg.frame_len() as u64;
        let m = &mut self.current;
        let role = match msg.sender {
            PartyId::Distributor => &mut m.distributor,
            PartyId::Server(i) => {
                let s = &mut m.per_server[i as usize];
                s.messages_sent += 1;
                s.bytes_sent += bytes;
                &mut m.server
            }
            PartyId::Collector => &mut m.collector,
        };
        role.messages_sent += 1;
        role.bytes_sent += bytes;
        if msg.is_server_to_server() {
            m.server_to_server += 1;
        }
        match msg.tag {
            Tag::Reshare(_) => m.reshare_messages += 1,
            Tag::ZeroShare(_) => m.zero_share_messages += 1,
            Tag::KeySetup | Tag::Ping | Tag::Pong => m.setup_messages += 1,
            Tag::Bundle | Tag::Result => {}
        }
        if self.config.audit {
            self.audit
                .entry(msg.sender)
                .or_default()
                .push(AuditEntry { direction: Direction::Sent, message: msg.clone() });
        }
        self.transport.send(&msg)?;
        self.queue.push_back((msg.sender, msg.receiver));
        self.log.push(msg);
        Ok(())
    }

    fn check_payload(&self, msg: &Message) -> Result<()> {
        for r in &msg.payload {
            self.plan
                .ring
                .check(*r)
                .map_err(|e| Error::Session(format!("malformed residue on {} -> {}: {e}", msg.sender, msg.receiver)))?;
        }
        Ok(())
    }

    fn pump(&mut self) -> Result<()> {
        while let Some((from, to)) = self.queue.pop_front() {
            let msg = self.transport.recv(from, to)?;
            if msg.sender != from || msg.receiver != to || msg.session != self.config.id {
                return Err(Error::Session(format!("misrouted message on {from} -> {to}")));
            }
            self.check_payload(&msg)?;
            if self.config.audit {
                self.audit
                    .entry(to)
                    .or_default()
                    .push(AuditEntry { direction: Direction::Received, message: msg.clone() });
            }
            let replies = match to {
                PartyId::Server(i) => self.server_receive(i as usize, msg)?,
                PartyId::Collector => self.collector_receive(msg)?,
                PartyId::Distributor => distributor_receive(msg)?,
            };
            for r in replies {
                self.send(r)?;
            }
        }
        Ok(())
    }

    fn server_receive(&mut self, index: usize, msg: Message) -> Result<Vec<Message>> {
        let me = PartyId::server(index);
        let reply = |tag, receiver, payload| Message {
            session: msg.session,
            step: msg.step,
            summand: msg.summand,
            tag,
            sender: me,
            receiver,
            payload,
        };
        match msg.tag {
            Tag::Ping => return Ok(vec![reply(Tag::Pong, msg.sender, vec![])]),
            Tag::KeySetup => {
                let n = self.servers.len();
                if msg.sender != PartyId::server((index + 1) % n) {
                    return Err(Error::Session(format!("unexpected key from {} at {me}", msg.sender)));
                }
                if msg.payload.len() != KEY_WORDS {
                    return Err(Error::Session(format!("key setup needs {KEY_WORDS} words")));
                }
                self.servers[index].zero.accept_key(PrfKey::from_residues(&msg.payload)?)?;
                return Ok(vec![]);
            }
            Tag::Bundle | Tag::Reshare(_) | Tag::ZeroShare(_) => {}
            other => return Err(Error::Session(format!("{other:?} is not a server message"))),
        }
        let inst = self.plan.instance(msg.summand).ok_or_else(|| Error::protocol(msg.summand, "unknown summand"))?;
        let local = inst
            .local_index(index)
            .ok_or_else(|| Error::protocol(msg.summand, format!("{me} is not part of this product")))?;
        let carries = self.plan.carries_constant(msg.summand);
        let server = &mut self.servers[index];
        let mut io =
            ServerIo { arith: &server.meter, rng: &mut server.rng, zero: server.zero.as_mut(), out: Vec::new() };
        let progress = match msg.tag {
            Tag::Bundle => {
                if msg.sender != PartyId::Distributor {
                    return Err(Error::protocol(msg.summand, "bundle not from the distributor"));
                }
                if server.instances.contains_key(&msg.summand) {
                    return Err(Error::protocol(msg.summand, "duplicate bundle"));
                }
                let (views, piece) = split_bundle(inst, local, carries, &msg.payload)?;
                let ctx = InstanceContext {
                    step: msg.step,
                    summand: msg.summand,
                    local,
                    parties: inst.servers.len(),
                    factors: inst.factors.len(),
                };
                let mut product = self.scheme.instance(ctx)?;
                let progress = product.on_bundle(views, &mut io)?;
                server.instances.insert(msg.summand, ActiveInstance { product, piece });
                progress
            }
            _ => {
                let from = msg
                    .sender
                    .server_index()
                    .and_then(|s| inst.local_index(s))
                    .ok_or_else(|| Error::protocol(msg.summand, format!("{} is not a peer", msg.sender)))?;
                let active = server
                    .instances
                    .get_mut(&msg.summand)
                    .ok_or_else(|| Error::protocol(msg.summand, "peer message before bundle"))?;
                active.product.on_peer(from, msg.tag, &msg.payload, &mut io)?
            }
        };
        let out = std::mem::take(&mut io.out);
        let mut replies: Vec<Message> = out
            .into_iter()
            .map(|o| {
                let to = inst
                    .servers
                    .get(o.to)
                    .map(|&s| PartyId::server(s))
                    .ok_or_else(|| Error::protocol(msg.summand, "message to unknown local party"))?;
                Ok(reply(o.tag, to, o.payload))
            })
            .collect::<Result<_>>()?;
        if let Progress::Done(mut z) = progress {
            if let Some(piece) = server.instances.get(&msg.summand).and_then(|a| a.piece) {
                z = server.meter.add(z, piece)?;
            }
            replies.push(reply(Tag::Result, PartyId::Collector, vec![z]));
        }
        Ok(replies)
    }

    fn collector_receive(&mut self, msg: Message) -> Result<Vec<Message>> {
        match msg.tag {
            Tag::Ping => {
                return Ok(vec![Message {
                    tag: Tag::Pong,
                    sender: PartyId::Collector,
                    receiver: msg.sender,
                    payload: vec![],
                    ..msg
                }])
            }
            Tag::Result => {}
            other => return Err(Error::Session(format!("collector cannot handle {other:?}"))),
        }
        let inst = self
            .plan
            .instance(msg.summand)
            .ok_or_else(|| Error::protocol(msg.summand, "result for unknown summand"))?;
        let local = msg
            .sender
            .server_index()
            .and_then(|s| inst.local_index(s))
            .ok_or_else(|| Error::protocol(msg.summand, format!("result from outsider {}", msg.sender)))?;
        let [z] = msg.payload[..] else {
            return Err(Error::protocol(msg.summand, "result carries one value"));
        };
        let slot = self
            .collector
            .results
            .get_mut(&msg.summand)
            .and_then(|r| r.get_mut(local))
            .ok_or_else(|| Error::protocol(msg.summand, "result outside the current step"))?;
        if slot.replace(z).is_some() {
            return Err(Error::protocol(msg.summand, format!("second result from {}", msg.sender)));
        }
        Ok(vec![])
    }

    fn finish_metrics(&mut self) {
        let mut m = std::mem::replace(&mut self.current, RunMetrics::with_servers(self.servers.len()));
        m.distributor.ops.merge(&self.distributor.meter.take());
        m.collector.ops.merge(&self.collector.meter.take());
        for s in &self.servers {
            let ops = s.meter.take();
            m.per_server[s.index].ops.merge(&ops);
            m.server.ops.merge(&ops);
        }
        self.totals.merge(&m);
        self.last_step = m;
    }

    /// Counters accumulated since the session was opened, setup included.
    pub fn metrics(&self) -> &RunMetrics {
        &self.totals
    }

    /// Counters of the most recent step (or setup, before any step).
    pub fn step_metrics(&self) -> &RunMetrics {
        &self.last_step
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }

    /// Everything `party` sent and received, in order. Empty unless the
    /// session was opened in audit mode.
    pub fn audit(&self, party: PartyId) -> &[AuditEntry] {
        self.audit.get(&party).map_or(&[], Vec::as_slice)
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    pub fn role_metrics(&self, party: PartyId) -> RoleMetrics {
        match party {
            PartyId::Distributor => self.totals.distributor,
            PartyId::Server(i) => self.totals.per_server.get(i as usize).copied().unwrap_or_default(),
            PartyId::Collector => self.totals.collector,
        }
    }

    pub fn ring(&self) -> Ring {
        self.plan.ring
    }
}

fn distributor_receive(msg: Message) -> Result<Vec<Message>> {
    match msg.tag {
        Tag::Pong if msg.sender.role() != Role::Distributor => Ok(vec![]),
        other => Err(Error::Session(format!("distributor cannot handle {other:?} from {}", msg.sender))),
    }
}

/// Cuts a bundle payload into one view per factor plus the optional constant
/// piece.
fn split_bundle(
    inst: &SummandInstance,
    local: usize,
    carries_constant: bool,
    payload: &[Residue],
) -> Result<(Vec<ShareView>, Option<Residue>)> {
    let parties = inst.servers.len();
    let per_view = parties - 1;
    let expected = inst.factors.len() * per_view + usize::from(carries_constant);
    if payload.len() != expected {
        return Err(Error::protocol(inst.summand, format!("bundle has {} values, expected {expected}", payload.len())));
    }
    let views = payload[..inst.factors.len() * per_view]
        .chunks(per_view)
        .map(|c| ShareView::new(local, parties, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let piece = carries_constant.then(|| *payload.last().expect("non-empty"));
    Ok((views, piece))
}
