//! Products of `n` shared factors on three servers.
//!
//! Each server holds two of the three components of every factor. A product
//! of two `(2,3)`-shared values splits into nine cross terms; server `j`
//! computes the three it can see,
//!
//! ```text
//! y1 * b[j+1] + y1 * b[j-1] + y2 * b[j+1]
//! ```
//!
//! with `(y1, y2)` its components `(j+1, j-1)` of the running product. That
//! leaves a `(3,3)` sharing. To continue with the next factor, each server
//! masks its term with a fresh zero-share component and passes it to its
//! successor; afterwards server `j` holds the masked terms of `j-1` and `j`,
//! which again form its `(j+1, j-1)` pair of a `(2,3)` sharing.
//!
//! An `n`-factor product needs `n - 2` such rounds; the last product goes to
//! the collector as a `(3,3)` sharing.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::modring::{Arith, Residue};
use crate::sharing::{self, ShareView, Sharing};

pub const SERVERS: usize = 3;

pub fn successor(party: usize) -> usize {
    (party + 1) % SERVERS
}

pub fn predecessor(party: usize) -> usize {
    (party + SERVERS - 1) % SERVERS
}

/// Shares every factor `(2,3)`; `bundles[j][k]` is server `j`'s view of
/// factor `k`.
pub fn distribute<A: Arith + ?Sized>(
    factors: &[Residue],
    arith: &A,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<ShareView>>> {
    if factors.len() < 2 {
        return Err(Error::ComponentCount { expected: 2, found: factors.len() });
    }
    let sharings = factors.iter().map(|f| sharing::share(*f, SERVERS, arith, rng)).collect::<Result<Vec<_>>>()?;
    Ok(bundles(&sharings))
}

pub fn bundles(sharings: &[Sharing]) -> Vec<Vec<ShareView>> {
    (0..SERVERS).map(|j| sharings.iter().map(|s| s.view(j)).collect()).collect()
}

/// The three cross terms server `party` can form from its pair and its view
/// of the next factor.
pub fn local_product<A: Arith + ?Sized>(
    party: usize,
    y1: Residue,
    y2: Residue,
    factor: &ShareView,
    arith: &A,
) -> Result<Residue> {
    let next = factor.component(successor(party)).ok_or(Error::MissingComponent(party))?;
    let prev = factor.component(predecessor(party)).ok_or(Error::MissingComponent(party))?;
    let a = arith.mul(y1, next);
    let b = arith.mul(y1, prev);
    let c = arith.mul(y2, next);
    arith.add(arith.add(a, b)?, c)
}

/// Server side of one product instance, driven round by round.
#[derive(Debug, Clone)]
pub struct ThreePartyServer {
    party: usize,
    factors: Vec<ShareView>,
    y1: Residue,
    y2: Residue,
    completed: u16,
    in_flight: Option<Residue>,
}

impl ThreePartyServer {
    pub fn new(party: usize, factors: Vec<ShareView>) -> Result<Self> {
        if party >= SERVERS {
            return Err(Error::MissingComponent(party));
        }
        if factors.len() < 2 {
            return Err(Error::ComponentCount { expected: 2, found: factors.len() });
        }
        if let Some(bad) = factors.iter().find(|v| v.parties() != SERVERS || v.owner() != party) {
            return Err(Error::Session(format!(
                "server {party} was handed a view for party {} of a {}-party sharing",
                bad.owner(),
                bad.parties()
            )));
        }
        let first = &factors[0];
        let y1 = first.component(successor(party)).expect("checked owner");
        let y2 = first.component(predecessor(party)).expect("checked owner");
        Ok(Self { party, factors, y1, y2, completed: 0, in_flight: None })
    }

    pub fn party(&self) -> usize {
        self.party
    }

    /// Number of re-sharing rounds, `factors - 2`.
    pub fn rounds(&self) -> u16 {
        (self.factors.len() - 2) as u16
    }

    pub fn completed_rounds(&self) -> u16 {
        self.completed
    }

    /// Scale of the masked term exchanged in round `round`, i.e. of the
    /// product of factors `0..=round`. Its zero-sharing must match.
    pub fn round_scale(&self, round: u16) -> u32 {
        self.factors[..=round as usize].iter().map(|v| v.scale()).sum()
    }

    /// Computes this round's local term, masks it with `zero` and returns
    /// the value to send to the successor. `round` counts from 1.
    pub fn begin_round<A: Arith + ?Sized>(&mut self, round: u16, zero: Residue, arith: &A) -> Result<Residue> {
        let expected = self.completed + 1;
        if round != expected || self.in_flight.is_some() {
            return Err(Error::StaleZeroShare { expected, found: round });
        }
        if round > self.rounds() {
            return Err(Error::Session(format!(
                "round {round} requested but the product has only {} rounds",
                self.rounds()
            )));
        }
        let term = local_product(self.party, self.y1, self.y2, &self.factors[round as usize], arith)?;
        let masked = arith.add(term, zero)?;
        self.in_flight = Some(masked);
        Ok(masked)
    }

    /// Absorbs the predecessor's masked term, restoring a `(2,3)` sharing.
    pub fn finish_round<A: Arith + ?Sized>(&mut self, from: usize, received: Residue, arith: &A) -> Result<()> {
        if from != predecessor(self.party) {
            return Err(Error::UnexpectedSender { expected: predecessor(self.party), found: from });
        }
        arith.ring().check(received)?;
        let own = self.in_flight.ok_or_else(|| Error::Session("re-share received before the round began".into()))?;
        if received.scale != own.scale {
            return Err(Error::ScaleMismatch { left: own.scale, right: received.scale });
        }
        // The predecessor's term takes the `j+1` slot, ours the `j-1` slot.
        self.y1 = received;
        self.y2 = own;
        self.in_flight = None;
        self.completed += 1;
        Ok(())
    }

    /// This server's component of the `(3,3)` result sharing.
    pub fn final_share<A: Arith + ?Sized>(&self, arith: &A) -> Result<Residue> {
        if self.completed != self.rounds() || self.in_flight.is_some() {
            return Err(Error::Session(format!(
                "final share requested after {} of {} rounds",
                self.completed,
                self.rounds()
            )));
        }
        let last = self.factors.last().expect("at least two factors");
        local_product(self.party, self.y1, self.y2, last, arith)
    }
}

/// Collector: sums the three result components.
pub fn collect<A: Arith + ?Sized>(shares: &[Option<Residue>], arith: &A) -> Result<Residue> {
    if shares.len() != SERVERS {
        return Err(Error::ComponentCount { expected: SERVERS, found: shares.len() });
    }
    let present =
        shares.iter().enumerate().map(|(j, s)| s.ok_or(Error::MissingComponent(j))).collect::<Result<Vec<_>>>()?;
    sharing::reconstruct(&present, arith)
}

/// Runs one product with all three servers in lock-step. Zero-sharings come
/// from `zero(round)`, which returns the three components for that round.
pub fn run_product<A, Z>(bundles: Vec<Vec<ShareView>>, arith: &A, mut zero: Z) -> Result<Residue>
where
    A: Arith + ?Sized,
    Z: FnMut(u16) -> Result<Vec<Residue>>,
{
    let mut servers =
        bundles.into_iter().enumerate().map(|(j, b)| ThreePartyServer::new(j, b)).collect::<Result<Vec<_>>>()?;
    if servers.len() != SERVERS {
        return Err(Error::ComponentCount { expected: SERVERS, found: servers.len() });
    }
    for round in 1..=servers[0].rounds() {
        let a = zero(round)?;
        let sent =
            servers.iter_mut().zip(&a).map(|(s, a)| s.begin_round(round, *a, arith)).collect::<Result<Vec<_>>>()?;
        for (j, s) in servers.iter_mut().enumerate() {
            let from = predecessor(j);
            s.finish_round(from, sent[from], arith)?;
        }
    }
    let z = servers.iter().map(|s| s.final_share(arith).map(Some)).collect::<Result<Vec<_>>>()?;
    collect(&z, arith)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::Ring;
    use crate::sharing::{share_with, zero_sharing, ZeroShareMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn r(v: u64) -> Residue {
        Residue::new(v, 0)
    }

    fn run(factors: &[u64], q: u64, seed: u64) -> u64 {
        let ring = Ring::with_modulus(q).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let fs: Vec<Residue> = factors.iter().map(|&v| r(v)).collect();
        let bundles = distribute(&fs, &ring, &mut rng).unwrap();
        let mut zrng = ChaCha20Rng::seed_from_u64(seed ^ 0xabc);
        run_product(bundles, &ring, |_| zero_sharing(3, ZeroShareMode::Communication, 0, &ring, &mut zrng))
            .unwrap()
            .value
    }

    #[test]
    fn small_products() {
        assert_eq!(run(&[2, 3], 1000, 1), 6);
        assert_eq!(run(&[2, 3, 4], 1000, 2), 24);
        assert_eq!(run(&[2, 3, 4, 5], 1000, 3), 120);
    }

    #[test]
    fn third_server_term_matches_expansion() {
        // z_3 = v11 v21 + v11 v22 + v12 v21, zero-based party 2
        let ring = Ring::with_modulus(1_000_003).unwrap();
        let v1 = share_with(r(40), &[r(123), r(456)], &ring).unwrap();
        let v2 = share_with(r(77), &[r(789), r(1011)], &ring).unwrap();
        let server = ThreePartyServer::new(2, vec![v1.view(2), v2.view(2)]).unwrap();
        let c1 = v1.components();
        let c2 = v2.components();
        let expect =
            (c1[0].value * c2[0].value + c1[0].value * c2[1].value + c1[1].value * c2[0].value) % ring.modulus();
        assert_eq!(server.final_share(&ring).unwrap().value, expect);
    }

    #[test]
    fn two_factors_need_no_rounds() {
        let ring = Ring::with_modulus(1000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let bundles = distribute(&[r(2), r(3)], &ring, &mut rng).unwrap();
        let mut calls = 0;
        let z = run_product(bundles, &ring, |_| {
            calls += 1;
            Ok(vec![])
        })
        .unwrap();
        assert_eq!(z, r(6));
        assert_eq!(calls, 0);
    }

    #[test]
    fn zero_factor_annihilates() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for seed in 0..1000 {
            let a = rng.gen_range(0..1_000_000);
            let b = rng.gen_range(0..1_000_000);
            assert_eq!(run(&[a, 0, b], 1_000_000_000_000, seed), 0);
        }
    }

    #[test]
    fn result_scale_is_sum_of_factor_scales() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let fs = [Residue::new(170, 2), Residue::new(1_000_000_000_000 - 100, 2), Residue::new(5, 4)];
        let bundles = distribute(&fs, &ring, &mut rng).unwrap();
        let mut zrng = ChaCha20Rng::seed_from_u64(7);
        // after one round the running product has scale 2 + 2
        let z =
            run_product(bundles, &ring, |_| zero_sharing(3, ZeroShareMode::Correlated, 4, &ring, &mut zrng)).unwrap();
        assert_eq!(z.scale, 8);
        // 1.70 * -1.00 * 0.0005 = -0.00085
        assert_eq!(ring.signed(z.value), -85_000);
    }

    #[test]
    fn literal_pair_update_breaks_the_product() {
        // Keeping our own masked term in the `j+1` slot (and the received one
        // in `j-1`) does not reconstruct; the slots must be swapped.
        let ring = Ring::with_modulus(1000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut wrong = 0;
        for _ in 0..50 {
            let bundles = distribute(&[r(2), r(3), r(4)], &ring, &mut rng).unwrap();
            let pairs: Vec<(Residue, Residue)> = (0..3)
                .map(|j| {
                    let v = &bundles[j][0];
                    (v.component(successor(j)).unwrap(), v.component(predecessor(j)).unwrap())
                })
                .collect();
            let a = zero_sharing(3, ZeroShareMode::Communication, 0, &ring, &mut rng).unwrap();
            let masked: Vec<Residue> = (0..3)
                .map(|j| {
                    let t = local_product(j, pairs[j].0, pairs[j].1, &bundles[j][1], &ring).unwrap();
                    ring.add(t, a[j]).unwrap()
                })
                .collect();
            let z: Vec<Option<Residue>> = (0..3)
                .map(|j| {
                    let (y1, y2) = (masked[j], masked[predecessor(j)]);
                    Some(local_product(j, y1, y2, &bundles[j][2], &ring).unwrap())
                })
                .collect();
            if collect(&z, &ring).unwrap() != r(24) {
                wrong += 1;
            }
        }
        assert!(wrong > 40);
    }

    #[test]
    fn protocol_guards() {
        let ring = Ring::with_modulus(1000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let bundles = distribute(&[r(2), r(3), r(4)], &ring, &mut rng).unwrap();
        let mut s = ThreePartyServer::new(0, bundles[0].clone()).unwrap();
        assert!(matches!(s.begin_round(2, r(0), &ring), Err(Error::StaleZeroShare { expected: 1, found: 2 })));
        assert!(s.final_share(&ring).is_err());
        s.begin_round(1, r(0), &ring).unwrap();
        assert!(s.begin_round(1, r(0), &ring).is_err());
        assert!(matches!(s.finish_round(1, r(5), &ring), Err(Error::UnexpectedSender { expected: 2, found: 1 })));
        s.finish_round(2, r(5), &ring).unwrap();
        assert!(s.begin_round(2, r(0), &ring).is_err());
        assert!(s.final_share(&ring).is_ok());

        assert!(ThreePartyServer::new(1, bundles[0].clone()).is_err());
        assert!(matches!(collect(&[Some(r(1)), None, Some(r(2))], &ring), Err(Error::MissingComponent(1))));
    }
}
