//! Zero-sharings: components `a_1 .. a_n` with `sum a_j = 0 mod Q`.
//!
//! Two constructions sit behind [`ZeroSharer`]:
//!
//! * [`ZeroShareMode::Communication`]: party `j` draws a fresh `r_j`, sends it
//!   to its successor and sets `a_j = r_j - r_{j-1}`. Every party sees only
//!   two of the `r`, so any `n - 1` components are jointly uniform.
//! * [`ZeroShareMode::Correlated`]: keys are circulated once at setup; party
//!   `j` then computes `a_j = F(k_j, c) - F(k_{j+1}, c)` for a counter `c`
//!   without talking to anyone. Security is computational, through `F`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::modring::{Arith, Residue};

/// Words per PRF key. Each word is a residue, so keys travel in ordinary
/// protocol payloads.
pub const KEY_WORDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ZeroShareMode {
    Communication,
    #[default]
    Correlated,
}

impl ZeroShareMode {
    pub fn name(&self) -> &'static str {
        match self {
            ZeroShareMode::Communication => "communication",
            ZeroShareMode::Correlated => "correlated",
        }
    }
}

impl fmt::Display for ZeroShareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZeroShareMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "communication" => Ok(ZeroShareMode::Communication),
            "correlated" | "correlated-randomness" => Ok(ZeroShareMode::Correlated),
            other => Err(Error::UnknownStrategy { kind: "zero-sharing mode", name: other.into() }),
        }
    }
}

/// Identifies one zero-sharing; each may be consumed once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZeroShareId {
    pub step: u32,
    pub summand: u16,
    pub round: u16,
}

impl ZeroShareId {
    pub fn counter(&self) -> u64 {
        (self.step as u64) << 32 | (self.summand as u64) << 16 | self.round as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrfKey(pub [u64; KEY_WORDS]);

impl PrfKey {
    pub fn generate<A: Arith + ?Sized>(arith: &A, rng: &mut dyn RngCore) -> Self {
        let mut words = [0; KEY_WORDS];
        for w in &mut words {
            *w = arith.draw(rng, 0).value;
        }
        PrfKey(words)
    }

    pub fn to_residues(self) -> Vec<Residue> {
        self.0.iter().map(|&w| Residue::new(w, 0)).collect()
    }

    pub fn from_residues(words: &[Residue]) -> Result<Self> {
        let words: [u64; KEY_WORDS] = words
            .iter()
            .map(|r| r.value)
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|w: Vec<u64>| Error::ComponentCount { expected: KEY_WORDS, found: w.len() })?;
        Ok(PrfKey(words))
    }
}

/// Keyed pseudorandom function into `[0, modulus)`: SHA-256 over key and
/// counter, first 128 bits reduced.
pub fn prf(key: &PrfKey, counter: u64, modulus: u64) -> u64 {
    let mut h = Sha256::new();
    for w in key.0 {
        h.update(w.to_be_bytes());
    }
    h.update(counter.to_be_bytes());
    let digest = h.finalize();
    let head = u128::from_be_bytes(digest[..16].try_into().expect("16 bytes"));
    (head % modulus as u128) as u64
}

/// `a_j = r_j - r_{j-1}` for the communication construction.
pub fn communication_component<A: Arith + ?Sized>(
    own: Residue,
    from_predecessor: Residue,
    arith: &A,
) -> Result<Residue> {
    arith.sub(own, from_predecessor)
}

/// One complete zero-sharing among `parties`, as the parties would jointly
/// produce it.
pub fn zero_sharing(
    parties: usize,
    mode: ZeroShareMode,
    scale: u32,
    arith: &dyn Arith,
    rng: &mut dyn RngCore,
) -> Result<Vec<Residue>> {
    if parties < 2 {
        return Err(Error::PartyCount(parties));
    }
    match mode {
        ZeroShareMode::Communication => {
            let r: Vec<Residue> = (0..parties).map(|_| arith.draw(rng, scale)).collect();
            (0..parties).map(|j| communication_component(r[j], r[(j + parties - 1) % parties], arith)).collect()
        }
        ZeroShareMode::Correlated => {
            let keys: Vec<PrfKey> = (0..parties).map(|_| PrfKey::generate(arith, rng)).collect();
            let id = ZeroShareId { step: 0, summand: 0, round: 0 };
            (0..parties)
                .map(|j| {
                    let mut sharer = CorrelatedZeroSharer::new(keys[j]);
                    sharer.set_successor_key(keys[(j + 1) % parties]);
                    match sharer.open(id, scale, arith, rng)? {
                        ZeroStart::Ready(a) => Ok(a),
                        ZeroStart::Exchange(_) => unreachable!("correlated mode never exchanges"),
                    }
                })
                .collect()
        }
    }
}

/// First half of obtaining a zero-share component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroStart {
    /// The component is available immediately.
    Ready(Residue),
    /// Send this value to the successor, then call [`ZeroSharer::complete`]
    /// with the predecessor's value.
    Exchange(Residue),
}

/// Per-party source of zero-share components, one per [`ZeroShareId`].
pub trait ZeroSharer {
    fn mode(&self) -> ZeroShareMode;

    fn open(&mut self, id: ZeroShareId, scale: u32, arith: &dyn Arith, rng: &mut dyn RngCore) -> Result<ZeroStart>;

    fn complete(&mut self, id: ZeroShareId, received: Residue, arith: &dyn Arith) -> Result<Residue>;

    /// Key this party must hand to its predecessor before first use.
    fn setup_key(&self) -> Option<PrfKey> {
        None
    }

    /// Stores the key received from the successor.
    fn accept_key(&mut self, _key: PrfKey) -> Result<()> {
        Err(Error::Session(format!("{} zero-sharing takes no keys", self.mode())))
    }
}

#[derive(Debug, Default)]
pub struct CommunicationZeroSharer {
    pending: HashMap<ZeroShareId, Residue>,
    used: HashSet<ZeroShareId>,
}

impl CommunicationZeroSharer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ZeroSharer for CommunicationZeroSharer {
    fn mode(&self) -> ZeroShareMode {
        ZeroShareMode::Communication
    }

    fn open(&mut self, id: ZeroShareId, scale: u32, arith: &dyn Arith, rng: &mut dyn RngCore) -> Result<ZeroStart> {
        if !self.used.insert(id) {
            return Err(Error::ZeroShareReuse(id));
        }
        let r = arith.draw(rng, scale);
        self.pending.insert(id, r);
        Ok(ZeroStart::Exchange(r))
    }

    fn complete(&mut self, id: ZeroShareId, received: Residue, arith: &dyn Arith) -> Result<Residue> {
        let own = self.pending.remove(&id).ok_or(Error::ZeroShareReuse(id))?;
        arith.ring().check(received)?;
        communication_component(own, received, arith)
    }
}

#[derive(Debug)]
pub struct CorrelatedZeroSharer {
    own: PrfKey,
    successor: Option<PrfKey>,
    used: HashSet<ZeroShareId>,
}

impl CorrelatedZeroSharer {
    pub fn new(own: PrfKey) -> Self {
        Self { own, successor: None, used: HashSet::new() }
    }

    pub fn own_key(&self) -> PrfKey {
        self.own
    }

    pub fn set_successor_key(&mut self, key: PrfKey) {
        self.successor = Some(key);
    }

    pub fn is_ready(&self) -> bool {
        self.successor.is_some()
    }
}

impl ZeroSharer for CorrelatedZeroSharer {
    fn mode(&self) -> ZeroShareMode {
        ZeroShareMode::Correlated
    }

    fn open(&mut self, id: ZeroShareId, scale: u32, arith: &dyn Arith, _rng: &mut dyn RngCore) -> Result<ZeroStart> {
        let successor =
            self.successor.ok_or_else(|| Error::Session("correlated zero-sharing used before key setup".into()))?;
        if !self.used.insert(id) {
            return Err(Error::ZeroShareReuse(id));
        }
        let q = arith.ring().modulus();
        let c = id.counter();
        // two PRF evaluations, tallied as draws
        let mine = arith.pseudo(prf(&self.own, c, q), scale);
        let theirs = arith.pseudo(prf(&successor, c, q), scale);
        Ok(ZeroStart::Ready(arith.sub(mine, theirs)?))
    }

    fn complete(&mut self, id: ZeroShareId, _: Residue, _: &dyn Arith) -> Result<Residue> {
        Err(Error::Session(format!("correlated zero-sharing {id:?} takes no exchange")))
    }

    fn setup_key(&self) -> Option<PrfKey> {
        Some(self.own)
    }

    fn accept_key(&mut self, key: PrfKey) -> Result<()> {
        if self.successor.is_some() {
            return Err(Error::Session("successor key already set".into()));
        }
        self.successor = Some(key);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::Ring;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sum(ring: &Ring, xs: &[Residue]) -> u64 {
        xs.iter().fold(0u128, |acc, x| (acc + x.value as u128) % ring.modulus() as u128) as u64
    }

    #[test]
    fn both_modes_sum_to_zero() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for mode in [ZeroShareMode::Communication, ZeroShareMode::Correlated] {
            for trial in 0..10_000 {
                let n = 2 + trial % 4;
                let a = zero_sharing(n, mode, 3, &ring, &mut rng).unwrap();
                assert_eq!(a.len(), n);
                assert_eq!(sum(&ring, &a), 0);
                assert!(a.iter().all(|c| c.scale == 3));
            }
        }
    }

    #[test]
    fn communication_components_are_jointly_uniform() {
        // enumerate every r in Z_11^3: (a_1, a_2) must hit each pair exactly 11 times
        let ring = Ring::with_modulus(11).unwrap();
        let mut joint = HashMap::new();
        let mut marginal = [[0u32; 11]; 3];
        for r0 in 0..11 {
            for r1 in 0..11 {
                for r2 in 0..11 {
                    let r = [r0, r1, r2].map(|v| Residue::new(v, 0));
                    let a: Vec<Residue> =
                        (0..3).map(|j| communication_component(r[j], r[(j + 2) % 3], &ring).unwrap()).collect();
                    assert_eq!(sum(&ring, &a), 0);
                    *joint.entry((a[0].value, a[1].value)).or_insert(0) += 1;
                    for j in 0..3 {
                        marginal[j][a[j].value as usize] += 1;
                    }
                }
            }
        }
        assert_eq!(joint.len(), 121);
        assert!(joint.values().all(|&c| c == 11));
        assert!(marginal.iter().flatten().all(|&c| c == 121));
    }

    #[test]
    fn counter_reuse_is_rejected() {
        let ring = Ring::with_modulus(1_000_003).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let id = ZeroShareId { step: 1, summand: 2, round: 1 };

        let mut comm = CommunicationZeroSharer::new();
        assert!(comm.open(id, 0, &ring, &mut rng).is_ok());
        assert!(matches!(comm.open(id, 0, &ring, &mut rng), Err(Error::ZeroShareReuse(_))));

        let mut corr = CorrelatedZeroSharer::new(PrfKey::generate(&ring, &mut rng));
        assert!(corr.open(id, 0, &ring, &mut rng).is_err(), "no successor key yet");
        corr.set_successor_key(PrfKey::generate(&ring, &mut rng));
        let fresh = ZeroShareId { round: 2, ..id };
        assert!(corr.open(fresh, 0, &ring, &mut rng).is_ok());
        assert!(matches!(corr.open(fresh, 0, &ring, &mut rng), Err(Error::ZeroShareReuse(_))));
    }

    #[test]
    fn correlated_parties_agree_without_exchange() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let keys: Vec<PrfKey> = (0..3).map(|_| PrfKey::generate(&ring, &mut rng)).collect();
        let mut sharers: Vec<CorrelatedZeroSharer> = (0..3)
            .map(|j| {
                let mut s = CorrelatedZeroSharer::new(keys[j]);
                s.set_successor_key(keys[(j + 1) % 3]);
                s
            })
            .collect();
        for round in 1..50 {
            let id = ZeroShareId { step: 7, summand: 3, round };
            let a: Vec<Residue> = sharers
                .iter_mut()
                .map(|s| match s.open(id, 8, &ring, &mut rng).unwrap() {
                    ZeroStart::Ready(a) => a,
                    ZeroStart::Exchange(_) => panic!("unexpected exchange"),
                })
                .collect();
            assert_eq!(sum(&ring, &a), 0);
        }
    }

    #[test]
    fn prf_depends_on_key_and_counter() {
        let k1 = PrfKey([1, 2, 3, 4]);
        let k2 = PrfKey([1, 2, 3, 5]);
        let q = 1_000_000_000_000;
        assert_eq!(prf(&k1, 9, q), prf(&k1, 9, q));
        assert_ne!(prf(&k1, 9, q), prf(&k1, 10, q));
        assert_ne!(prf(&k1, 9, q), prf(&k2, 9, q));
        assert!(prf(&k1, 9, 11) < 11);
        assert_eq!(PrfKey::from_residues(&k1.to_residues()).unwrap(), k1);
    }
}
