//! Single-round products of `n` shared factors on `n + 1` servers.
//!
//! With `(2, n+1)` sharings every server misses exactly one component per
//! factor, so each of the `(n+1)^n` cross terms `v_{1,j_1} ... v_{n,j_n}`
//! skips at least one party index and some server can compute it locally.
//! A [`SummandAssignment`] fixes which server computes which term; the
//! servers never talk to each other.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::modring::{Arith, Residue};
use crate::sharing::{self, ShareView, Sharing};

/// Index sets `I_0 .. I_n`: `sets[j]` lists the component tuples server `j`
/// multiplies out, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummandAssignment {
    factors: usize,
    sets: Vec<Vec<Vec<usize>>>,
}

impl SummandAssignment {
    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn parties(&self) -> usize {
        self.factors + 1
    }

    pub fn set(&self, party: usize) -> &[Vec<usize>] {
        &self.sets[party]
    }

    pub fn sets(&self) -> &[Vec<Vec<usize>>] {
        &self.sets
    }

    /// Checks that the sets partition all tuples, that no server is asked for
    /// a component it lacks, and that rotating a tuple rotates its owner.
    pub fn validate(&self) -> Result<()> {
        let p = self.parties();
        let total = p.pow(self.factors as u32);
        let mut owner = vec![usize::MAX; total];
        for (j, set) in self.sets.iter().enumerate() {
            for t in set {
                if t.len() != self.factors || t.iter().any(|&i| i >= p) {
                    return Err(Error::AssignmentViolation { party: j, tuple: t.clone() });
                }
                if t.contains(&j) {
                    return Err(Error::AssignmentViolation { party: j, tuple: t.clone() });
                }
                let slot = &mut owner[tuple_index(t, p)];
                if *slot != usize::MAX {
                    return Err(Error::Session(format!("tuple {t:?} assigned twice")));
                }
                *slot = j;
            }
        }
        if let Some(missing) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::Session(format!(
                "tuple {:?} assigned to no party",
                index_tuple(missing, self.factors, p)
            )));
        }
        for (idx, &j) in owner.iter().enumerate() {
            let t = index_tuple(idx, self.factors, p);
            for shift in 1..p {
                let rotated: Vec<usize> = t.iter().map(|&i| (i + shift) % p).collect();
                if owner[tuple_index(&rotated, p)] != (j + shift) % p {
                    return Err(Error::Session(format!("rotation of {t:?} by {shift} breaks closure")));
                }
            }
        }
        Ok(())
    }
}

fn tuple_index(t: &[usize], base: usize) -> usize {
    t.iter().fold(0, |acc, &i| acc * base + i)
}

fn index_tuple(mut idx: usize, len: usize, base: usize) -> Vec<usize> {
    let mut t = vec![0; len];
    for slot in t.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
    t
}

/// Spreads the `(n+1)^n` summands evenly over `n + 1` servers.
///
/// Tuples whose last index is 0 are assigned directly, each to the largest
/// server index it does not mention; every other tuple is such a base tuple
/// shifted by some `l`, and goes to the base owner shifted by the same `l`.
/// Each server ends up with `(n+1)^(n-1)` summands.
pub fn assign_summands(factors: usize) -> SummandAssignment {
    assert!(factors >= 2, "products need at least two factors");
    let p = factors + 1;
    let mut sets = vec![Vec::new(); p];
    for idx in 0..p.pow(factors as u32 - 1) {
        let mut base = index_tuple(idx, factors - 1, p);
        base.push(0);
        let owner = (0..p).rev().find(|j| !base.contains(j)).expect("n indices cannot cover n+1 parties");
        for shift in 0..p {
            let t: Vec<usize> = base.iter().map(|&i| (i + shift) % p).collect();
            sets[(owner + shift) % p].push(t);
        }
    }
    for set in &mut sets {
        set.sort();
    }
    let assignment = SummandAssignment { factors, sets };
    assignment.validate().expect("summand assignment must partition all tuples");
    assignment
}

/// Shares every factor `(2, n+1)`; `bundles[j][k]` is server `j`'s view of
/// factor `k`.
pub fn distribute<A: Arith + ?Sized>(
    factors: &[Residue],
    arith: &A,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<ShareView>>> {
    if factors.len() < 2 {
        return Err(Error::ComponentCount { expected: 2, found: factors.len() });
    }
    let parties = factors.len() + 1;
    let sharings = factors.iter().map(|f| sharing::share(*f, parties, arith, rng)).collect::<Result<Vec<_>>>()?;
    Ok(bundles(&sharings))
}

pub fn bundles(sharings: &[Sharing]) -> Vec<Vec<ShareView>> {
    let parties = sharings.first().map_or(0, |s| s.parties());
    (0..parties).map(|j| sharings.iter().map(|s| s.view(j)).collect()).collect()
}

/// Server `party`'s component of the `(n+1, n+1)` result sharing.
pub fn server_compute<A: Arith + ?Sized>(
    party: usize,
    bundle: &[ShareView],
    assignment: &SummandAssignment,
    arith: &A,
) -> Result<Residue> {
    if bundle.len() != assignment.factors() {
        return Err(Error::ComponentCount { expected: assignment.factors(), found: bundle.len() });
    }
    if party >= assignment.parties() {
        return Err(Error::MissingComponent(party));
    }
    let scale = bundle.iter().map(|v| v.scale()).sum();
    let mut z = Residue::zero(scale);
    for tuple in assignment.set(party) {
        let mut term: Option<Residue> = None;
        for (view, &idx) in bundle.iter().zip(tuple) {
            let c = view
                .component(idx)
                .filter(|_| view.owner() == party)
                .ok_or_else(|| Error::AssignmentViolation { party, tuple: tuple.clone() })?;
            term = Some(match term {
                None => c,
                Some(acc) => arith.mul(acc, c),
            });
        }
        z = arith.add(z, term.expect("at least two factors"))?;
    }
    Ok(z)
}

/// Collector: sums the `n + 1` result components.
pub fn collect<A: Arith + ?Sized>(shares: &[Option<Residue>], parties: usize, arith: &A) -> Result<Residue> {
    if shares.len() != parties {
        return Err(Error::ComponentCount { expected: parties, found: shares.len() });
    }
    let present =
        shares.iter().enumerate().map(|(j, s)| s.ok_or(Error::MissingComponent(j))).collect::<Result<Vec<_>>>()?;
    sharing::reconstruct(&present, arith)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::Ring;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::BTreeSet;

    fn one_based(set: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
        set.iter().map(|t| t.iter().map(|i| i + 1).collect()).collect()
    }

    #[test]
    fn two_factor_assignment_matches_three_party_grouping() {
        let a = assign_summands(2);
        let expect = [
            vec![vec![2, 2], vec![2, 3], vec![3, 2]],
            vec![vec![3, 3], vec![3, 1], vec![1, 3]],
            vec![vec![1, 1], vec![1, 2], vec![2, 1]],
        ];
        for (j, e) in expect.iter().enumerate() {
            assert_eq!(one_based(a.set(j)), e.iter().cloned().collect::<BTreeSet<_>>());
        }
    }

    #[test]
    fn assignments_are_even_partitions() {
        for n in 2..=5 {
            let a = assign_summands(n);
            a.validate().unwrap();
            let per = (n + 1).pow(n as u32 - 1);
            assert!(a.sets().iter().all(|s| s.len() == per), "n = {n}");
            assert_eq!(a.sets().iter().map(Vec::len).sum::<usize>(), (n + 1).pow(n as u32));
        }
        assert_eq!(assign_summands(3).set(0).len(), 16);
    }

    #[test]
    fn validate_catches_broken_assignments() {
        let mut a = assign_summands(2);
        let t = a.sets[0].pop().unwrap();
        assert!(a.validate().is_err());
        a.sets[1].push(t);
        assert!(a.validate().is_err());
    }

    fn run(factors: &[u64], q: u64, seed: u64) -> u64 {
        let ring = Ring::with_modulus(q).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let fs: Vec<Residue> = factors.iter().map(|&v| Residue::new(v, 0)).collect();
        let bundles = distribute(&fs, &ring, &mut rng).unwrap();
        let a = assign_summands(fs.len());
        let z: Vec<Option<Residue>> =
            bundles.iter().enumerate().map(|(j, b)| Some(server_compute(j, b, &a, &ring).unwrap())).collect();
        collect(&z, a.parties(), &ring).unwrap().value
    }

    #[test]
    fn small_products() {
        assert_eq!(run(&[2, 3], 1000, 1), 6);
        assert_eq!(run(&[2, 3, 4], 1000, 2), 24);
        assert_eq!(run(&[0, 0, 0], 1000, 3), 0);
        assert_eq!(run(&[2, 3, 4, 5, 6], 1_000_000, 4), 720);
    }

    #[test]
    fn foreign_component_is_rejected() {
        let ring = Ring::with_modulus(1000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let bundles = distribute(&[Residue::new(2, 0), Residue::new(3, 0)], &ring, &mut rng).unwrap();
        let a = assign_summands(2);
        // server 1 handed server 0's views
        assert!(matches!(server_compute(1, &bundles[0], &a, &ring), Err(Error::AssignmentViolation { party: 1, .. })));
        assert!(matches!(collect(&[Some(Residue::new(1, 0)), None, None], 3, &ring), Err(Error::MissingComponent(1))));
    }
}
