//! Multiplication schemes as interchangeable server-side state machines.
//!
//! A scheme decides how many servers a product of `f` factors occupies and
//! how each server turns its share bundle (plus any peer messages) into a
//! component of the result. The harness drives instances through
//! [`ServerProduct`] and never looks inside.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::harness::Tag;
use crate::modring::{Meter, Residue};
use crate::nparty::{self, SummandAssignment};
use crate::registry::Registry;
use crate::sharing::{self, ShareView, ZeroShareId, ZeroSharer, ZeroStart};
use crate::threeparty::{self, ThreePartyServer};

/// Public facts about one product instance, as seen by one server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceContext {
    pub step: u32,
    pub summand: u16,
    /// This server's index among the instance's parties.
    pub local: usize,
    pub parties: usize,
    pub factors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Pending,
    /// This server's component of the result sharing.
    Done(Residue),
}

/// A message for another party of the same instance, by local index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: usize,
    pub tag: Tag,
    pub payload: Vec<Residue>,
}

pub struct ServerIo<'a> {
    pub arith: &'a Meter,
    pub rng: &'a mut dyn RngCore,
    pub zero: &'a mut dyn ZeroSharer,
    pub out: Vec<Outgoing>,
}

pub trait ServerProduct {
    fn on_bundle(&mut self, views: Vec<ShareView>, io: &mut ServerIo<'_>) -> Result<Progress>;

    fn on_peer(&mut self, from: usize, tag: Tag, payload: &[Residue], io: &mut ServerIo<'_>) -> Result<Progress>;
}

pub trait MultiplicationScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Servers needed to evaluate any law of degree `degree`.
    fn pool_size(&self, degree: u32) -> usize;

    /// Servers taking part in a product of `factors` factors.
    fn parties_for(&self, factors: usize) -> usize;

    fn uses_zero_sharing(&self) -> bool;

    fn instance(&self, ctx: InstanceContext) -> Result<Box<dyn ServerProduct>>;

    /// Shares every factor among the instance's parties; `bundles[j][k]` is
    /// party `j`'s view of factor `k`.
    fn distribute(&self, factors: &[Residue], arith: &Meter, rng: &mut dyn RngCore) -> Result<Vec<Vec<ShareView>>> {
        if factors.len() < 2 {
            return Err(Error::ComponentCount { expected: 2, found: factors.len() });
        }
        let parties = self.parties_for(factors.len());
        let sharings = factors.iter().map(|f| sharing::share(*f, parties, arith, rng)).collect::<Result<Vec<_>>>()?;
        Ok((0..parties).map(|j| sharings.iter().map(|s| s.view(j)).collect()).collect())
    }
}

pub fn builtin_schemes() -> Registry<Arc<dyn MultiplicationScheme>> {
    let mut r: Registry<Arc<dyn MultiplicationScheme>> = Registry::new("multiplication scheme");
    r.register("three-party", Arc::new(ThreePartyScheme));
    r.register("n-party", Arc::new(NPartyScheme::default()));
    r
}

pub fn scheme(name: &str) -> Result<Arc<dyn MultiplicationScheme>> {
    builtin_schemes().get(name).cloned()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ThreePartyScheme;

impl MultiplicationScheme for ThreePartyScheme {
    fn name(&self) -> &'static str {
        "three-party"
    }

    fn pool_size(&self, _degree: u32) -> usize {
        threeparty::SERVERS
    }

    fn parties_for(&self, _factors: usize) -> usize {
        threeparty::SERVERS
    }

    fn uses_zero_sharing(&self) -> bool {
        true
    }

    fn instance(&self, ctx: InstanceContext) -> Result<Box<dyn ServerProduct>> {
        if ctx.parties != threeparty::SERVERS || ctx.local >= threeparty::SERVERS {
            return Err(Error::protocol(ctx.summand, "three-party instance needs exactly three servers"));
        }
        Ok(Box::new(ThreePartyInstance { ctx, server: None, phase: Phase::AwaitBundle }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitBundle,
    AwaitZero(u16),
    AwaitReshare(u16),
    Done,
}

struct ThreePartyInstance {
    ctx: InstanceContext,
    server: Option<ThreePartyServer>,
    phase: Phase,
}

impl ThreePartyInstance {
    fn zero_id(&self, round: u16) -> ZeroShareId {
        ZeroShareId { step: self.ctx.step, summand: self.ctx.summand, round }
    }

    fn server(&mut self) -> Result<&mut ThreePartyServer> {
        let summand = self.ctx.summand;
        self.server.as_mut().ok_or_else(|| Error::protocol(summand, "no bundle received yet"))
    }

    fn start_round(&mut self, round: u16, io: &mut ServerIo<'_>) -> Result<Progress> {
        let id = self.zero_id(round);
        let scale = self.server()?.round_scale(round);
        match io.zero.open(id, scale, io.arith, io.rng)? {
            ZeroStart::Ready(a) => self.send_masked(round, a, io),
            ZeroStart::Exchange(r) => {
                io.out.push(Outgoing {
                    to: threeparty::successor(self.ctx.local),
                    tag: Tag::ZeroShare(round),
                    payload: vec![r],
                });
                self.phase = Phase::AwaitZero(round);
                Ok(Progress::Pending)
            }
        }
    }

    fn send_masked(&mut self, round: u16, zero: Residue, io: &mut ServerIo<'_>) -> Result<Progress> {
        let masked = self.server()?.begin_round(round, zero, io.arith)?;
        io.out.push(Outgoing {
            to: threeparty::successor(self.ctx.local),
            tag: Tag::Reshare(round),
            payload: vec![masked],
        });
        self.phase = Phase::AwaitReshare(round);
        Ok(Progress::Pending)
    }

    fn finish(&mut self, io: &mut ServerIo<'_>) -> Result<Progress> {
        let z = self.server()?.final_share(io.arith)?;
        self.phase = Phase::Done;
        Ok(Progress::Done(z))
    }
}

impl ServerProduct for ThreePartyInstance {
    fn on_bundle(&mut self, views: Vec<ShareView>, io: &mut ServerIo<'_>) -> Result<Progress> {
        if self.phase != Phase::AwaitBundle {
            return Err(Error::protocol(self.ctx.summand, "duplicate bundle"));
        }
        let server = ThreePartyServer::new(self.ctx.local, views)?;
        let rounds = server.rounds();
        self.server = Some(server);
        if rounds == 0 {
            self.finish(io)
        } else {
            self.start_round(1, io)
        }
    }

    fn on_peer(&mut self, from: usize, tag: Tag, payload: &[Residue], io: &mut ServerIo<'_>) -> Result<Progress> {
        let summand = self.ctx.summand;
        let [value] = payload else {
            return Err(Error::protocol(summand, format!("expected one value, got {}", payload.len())));
        };
        let expected_from = threeparty::predecessor(self.ctx.local);
        if from != expected_from {
            return Err(Error::UnexpectedSender { expected: expected_from, found: from });
        }
        match (self.phase, tag) {
            (Phase::AwaitZero(k), Tag::ZeroShare(r)) if r == k => {
                let a = io.zero.complete(self.zero_id(k), *value, io.arith)?;
                self.send_masked(k, a, io)
            }
            (Phase::AwaitReshare(k), Tag::Reshare(r)) if r == k => {
                let server = self.server()?;
                server.finish_round(from, *value, io.arith)?;
                if k == server.rounds() {
                    self.finish(io)
                } else {
                    self.start_round(k + 1, io)
                }
            }
            (Phase::AwaitZero(k) | Phase::AwaitReshare(k), Tag::ZeroShare(r) | Tag::Reshare(r)) => {
                Err(Error::StaleZeroShare { expected: k, found: r })
            }
            (phase, tag) => Err(Error::protocol(summand, format!("{tag:?} not expected in {phase:?}"))),
        }
    }
}

/// The single-round scheme; assignments are computed once per factor count.
#[derive(Debug, Default)]
pub struct NPartyScheme {
    assignments: Mutex<HashMap<usize, Arc<SummandAssignment>>>,
}

impl NPartyScheme {
    pub fn assignment(&self, factors: usize) -> Arc<SummandAssignment> {
        let mut cache = self.assignments.lock().expect("assignment cache poisoned");
        cache.entry(factors).or_insert_with(|| Arc::new(nparty::assign_summands(factors))).clone()
    }
}

impl MultiplicationScheme for NPartyScheme {
    fn name(&self) -> &'static str {
        "n-party"
    }

    fn pool_size(&self, degree: u32) -> usize {
        degree as usize + 2
    }

    fn parties_for(&self, factors: usize) -> usize {
        factors + 1
    }

    fn uses_zero_sharing(&self) -> bool {
        false
    }

    fn instance(&self, ctx: InstanceContext) -> Result<Box<dyn ServerProduct>> {
        if ctx.factors < 2 || ctx.parties != ctx.factors + 1 || ctx.local >= ctx.parties {
            return Err(Error::protocol(ctx.summand, "n-party instance needs factors + 1 servers"));
        }
        Ok(Box::new(NPartyInstance { ctx, assignment: self.assignment(ctx.factors), done: false }))
    }
}

struct NPartyInstance {
    ctx: InstanceContext,
    assignment: Arc<SummandAssignment>,
    done: bool,
}

impl ServerProduct for NPartyInstance {
    fn on_bundle(&mut self, views: Vec<ShareView>, io: &mut ServerIo<'_>) -> Result<Progress> {
        if self.done {
            return Err(Error::protocol(self.ctx.summand, "duplicate bundle"));
        }
        self.done = true;
        let z = nparty::server_compute(self.ctx.local, &views, &self.assignment, io.arith)?;
        Ok(Progress::Done(z))
    }

    fn on_peer(&mut self, _: usize, tag: Tag, _: &[Residue], _: &mut ServerIo<'_>) -> Result<Progress> {
        Err(Error::protocol(self.ctx.summand, format!("n-party servers never talk to each other, got {tag:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::Ring;
    use crate::sharing::CommunicationZeroSharer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn registry_resolves_both_schemes() {
        let r = builtin_schemes();
        assert_eq!(r.names().collect::<Vec<_>>(), ["n-party", "three-party"]);
        assert_eq!(scheme("n-party").unwrap().pool_size(3), 5);
        assert_eq!(scheme("three-party").unwrap().pool_size(3), 3);
        assert!(scheme("two-party").is_err());
    }

    #[test]
    fn n_party_rejects_peer_traffic() {
        let s = NPartyScheme::default();
        let ctx = InstanceContext { step: 1, summand: 0, local: 0, parties: 3, factors: 2 };
        let mut inst = s.instance(ctx).unwrap();
        let meter = Meter::new(Ring::with_modulus(1000).unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut zero = CommunicationZeroSharer::new();
        let mut io = ServerIo { arith: &meter, rng: &mut rng, zero: &mut zero, out: vec![] };
        assert!(inst.on_peer(1, Tag::Reshare(1), &[Residue::new(0, 0)], &mut io).is_err());
        assert!(Arc::ptr_eq(&s.assignment(2), &s.assignment(2)));
    }

    #[test]
    fn three_party_state_machine_rejects_out_of_order_rounds() {
        let ring = Ring::with_modulus(1000).unwrap();
        let meter = Meter::new(ring);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let fs = [Residue::new(2, 0), Residue::new(3, 0), Residue::new(4, 0), Residue::new(5, 0)];
        let bundles = ThreePartyScheme.distribute(&fs, &meter, &mut rng).unwrap();
        let ctx = InstanceContext { step: 1, summand: 0, local: 0, parties: 3, factors: 4 };
        let mut inst = ThreePartyScheme.instance(ctx).unwrap();
        let mut zero = CommunicationZeroSharer::new();
        let mut io = ServerIo { arith: &meter, rng: &mut rng, zero: &mut zero, out: vec![] };
        assert_eq!(inst.on_bundle(bundles[0].clone(), &mut io).unwrap(), Progress::Pending);
        assert_eq!(io.out[0].tag, Tag::ZeroShare(1));
        assert_eq!(io.out[0].to, 1);
        assert!(matches!(
            inst.on_peer(2, Tag::ZeroShare(2), &[Residue::new(0, 0)], &mut io),
            Err(Error::StaleZeroShare { expected: 1, found: 2 })
        ));
        assert!(matches!(
            inst.on_peer(1, Tag::ZeroShare(1), &[Residue::new(0, 0)], &mut io),
            Err(Error::UnexpectedSender { expected: 2, found: 1 })
        ));
    }
}
