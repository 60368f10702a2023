//! Additive `(2, n)` secret sharing.
//!
//! A secret `s` is split into `n` components summing to `s` mod `Q`; party
//! `j` receives every component except the `j`-th. Any two parties together
//! hold all components, while a single view is uniformly distributed.
//!
//! Party and component indices are zero-based throughout the crate.

mod zero;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::modring::{Arith, Residue};

pub use zero::{
    communication_component, prf, zero_sharing, CommunicationZeroSharer, CorrelatedZeroSharer, PrfKey, ZeroShareId,
    ZeroShareMode, ZeroSharer, ZeroStart, KEY_WORDS,
};

/// All `n` components of a secret.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sharing {
    components: Vec<Residue>,
}

impl Sharing {
    pub fn from_components(components: Vec<Residue>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::PartyCount(components.len()));
        }
        common_scale(&components)?;
        Ok(Self { components })
    }

    pub fn parties(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Residue] {
        &self.components
    }

    pub fn scale(&self) -> u32 {
        self.components[0].scale
    }

    /// The share of party `owner`: every component but its own.
    pub fn view(&self, owner: usize) -> ShareView {
        assert!(owner < self.parties(), "party {owner} out of range");
        let entries = self.components.iter().enumerate().filter(|&(i, _)| i != owner).map(|(_, c)| *c).collect();
        ShareView { owner, parties: self.parties(), entries }
    }

    pub fn views(&self) -> Vec<ShareView> {
        (0..self.parties()).map(|j| self.view(j)).collect()
    }

    pub fn reconstruct<A: Arith + ?Sized>(&self, arith: &A) -> Result<Residue> {
        reconstruct(&self.components, arith)
    }

    /// Adds a public constant to the first component.
    pub fn add_constant<A: Arith + ?Sized>(&self, c: Residue, arith: &A) -> Result<Self> {
        let mut components = self.components.clone();
        components[0] = arith.add(components[0], c)?;
        Ok(Self { components })
    }

    pub fn add<A: Arith + ?Sized>(&self, other: &Sharing, arith: &A) -> Result<Self> {
        if self.parties() != other.parties() {
            return Err(Error::ComponentCount { expected: self.parties(), found: other.parties() });
        }
        let components =
            self.components.iter().zip(&other.components).map(|(a, b)| arith.add(*a, *b)).collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn mul_constant<A: Arith + ?Sized>(&self, c: Residue, arith: &A) -> Self {
        let components = self.components.iter().map(|a| arith.mul(*a, c)).collect();
        Self { components }
    }
}

/// What one party holds of a [`Sharing`]: the components `(s_l | l != owner)`
/// in ascending index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShareView {
    owner: usize,
    parties: usize,
    entries: Vec<Residue>,
}

impl ShareView {
    pub fn new(owner: usize, parties: usize, entries: Vec<Residue>) -> Result<Self> {
        if parties < 2 {
            return Err(Error::PartyCount(parties));
        }
        if owner >= parties {
            return Err(Error::MissingComponent(owner));
        }
        if entries.len() != parties - 1 {
            return Err(Error::ComponentCount { expected: parties - 1, found: entries.len() });
        }
        common_scale(&entries)?;
        Ok(Self { owner, parties, entries })
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn entries(&self) -> &[Residue] {
        &self.entries
    }

    pub fn scale(&self) -> u32 {
        self.entries[0].scale
    }

    /// Component `index` of the sharing, or `None` for the owner's own index.
    pub fn component(&self, index: usize) -> Option<Residue> {
        use std::cmp::Ordering::*;
        match index.cmp(&self.owner) {
            Less => self.entries.get(index).copied(),
            Equal => None,
            Greater => self.entries.get(index - 1).copied(),
        }
    }

    /// Local counterpart of [`Sharing::add_constant`]: only holders of
    /// component 0 change their entry.
    pub fn add_constant<A: Arith + ?Sized>(&self, c: Residue, arith: &A) -> Result<Self> {
        let mut out = self.clone();
        if self.owner != 0 {
            out.entries[0] = arith.add(out.entries[0], c)?;
        } else if c.scale != self.scale() {
            return Err(Error::ScaleMismatch { left: self.scale(), right: c.scale });
        }
        Ok(out)
    }

    pub fn add<A: Arith + ?Sized>(&self, other: &ShareView, arith: &A) -> Result<Self> {
        if self.owner != other.owner || self.parties != other.parties {
            return Err(Error::IncompatibleViews);
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| arith.add(*a, *b)).collect::<Result<_>>()?;
        Ok(Self { entries, ..self.clone() })
    }

    pub fn mul_constant<A: Arith + ?Sized>(&self, c: Residue, arith: &A) -> Self {
        let entries = self.entries.iter().map(|a| arith.mul(*a, c)).collect();
        Self { entries, ..self.clone() }
    }
}

fn common_scale(components: &[Residue]) -> Result<u32> {
    let scale = components.first().map(|c| c.scale).ok_or(Error::ComponentCount { expected: 1, found: 0 })?;
    if let Some(c) = components.iter().find(|c| c.scale != scale) {
        return Err(Error::ScaleMismatch { left: scale, right: c.scale });
    }
    Ok(scale)
}

/// Builds the sharing from already drawn components `s_1 .. s_{n-1}`; the
/// last component absorbs the secret.
pub fn share_with<A: Arith + ?Sized>(secret: Residue, drawn: &[Residue], arith: &A) -> Result<Sharing> {
    if drawn.is_empty() {
        return Err(Error::PartyCount(drawn.len() + 1));
    }
    let mut acc = Residue::zero(secret.scale);
    for d in drawn {
        arith.ring().check(*d)?;
        acc = arith.add(acc, *d)?;
    }
    let last = arith.sub(secret, acc)?;
    let mut components = drawn.to_vec();
    components.push(last);
    Sharing::from_components(components)
}

/// Splits `secret` into `n` uniformly random components.
pub fn share<A: Arith + ?Sized>(secret: Residue, parties: usize, arith: &A, rng: &mut dyn RngCore) -> Result<Sharing> {
    if parties < 2 {
        return Err(Error::PartyCount(parties));
    }
    arith.ring().check(secret)?;
    let drawn: Vec<Residue> = (0..parties - 1).map(|_| arith.draw(rng, secret.scale)).collect();
    share_with(secret, &drawn, arith)
}

pub fn reconstruct<A: Arith + ?Sized>(components: &[Residue], arith: &A) -> Result<Residue> {
    let scale = common_scale(components)?;
    components.iter().try_fold(Residue::zero(scale), |acc, c| arith.add(acc, *c))
}

/// Recovers the secret from the views of two distinct parties.
pub fn reconstruct_from_views<A: Arith + ?Sized>(a: &ShareView, b: &ShareView, arith: &A) -> Result<Residue> {
    if a.owner == b.owner || a.parties != b.parties {
        return Err(Error::IncompatibleViews);
    }
    let components: Vec<Residue> =
        (0..a.parties).map(|i| a.component(i).or_else(|| b.component(i)).expect("two views cover all")).collect();
    reconstruct(&components, arith)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modring::Ring;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn r(v: u64) -> Residue {
        Residue::new(v, 0)
    }

    #[test]
    fn forced_randomness_fixes_last_component() {
        let ring = Ring::with_modulus(7).unwrap();
        let s = share_with(r(5), &[r(3), r(6)], &ring).unwrap();
        assert_eq!(s.components(), &[r(3), r(6), r(3)]);
        assert_eq!(reconstruct(&[r(3), r(6), r(3)], &ring).unwrap(), r(5));
    }

    #[test]
    fn any_two_views_reconstruct_exhaustively() {
        let ring = Ring::with_modulus(11).unwrap();
        for secret in 0..11 {
            for a in 0..11 {
                for b in 0..11 {
                    let s = share_with(r(secret), &[r(a), r(b)], &ring).unwrap();
                    let views = s.views();
                    for i in 0..3 {
                        for j in 0..3 {
                            if i != j {
                                let got = reconstruct_from_views(&views[i], &views[j], &ring).unwrap();
                                assert_eq!(got, r(secret));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn views_omit_own_component() {
        let s = Sharing::from_components(vec![r(1), r(2), r(3), r(4)]).unwrap();
        let v = s.view(2);
        assert_eq!(v.entries(), &[r(1), r(2), r(4)]);
        assert_eq!(v.component(2), None);
        assert_eq!(v.component(3), Some(r(4)));
        assert_eq!(v.component(0), Some(r(1)));
        assert_eq!(v.component(4), None);
    }

    #[test]
    fn zero_secret_is_not_shared_as_zeros() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = share(r(0), 3, &ring, &mut rng).unwrap();
        assert!(s.components().iter().any(|c| c.value != 0));
        assert_eq!(s.reconstruct(&ring).unwrap(), r(0));
    }

    #[test]
    fn reconstruct_rejects_mixed_scales() {
        let ring = Ring::with_modulus(7).unwrap();
        let mixed = [Residue::new(1, 0), Residue::new(1, 2)];
        assert!(matches!(reconstruct(&mixed, &ring), Err(Error::ScaleMismatch { .. })));
        assert!(Sharing::from_components(mixed.to_vec()).is_err());
    }

    #[test]
    fn share_needs_two_parties() {
        let ring = Ring::with_modulus(7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(matches!(share(r(1), 1, &ring, &mut rng), Err(Error::PartyCount(1))));
    }

    #[test]
    fn add_constant_targets_first_component() {
        let ring = Ring::with_modulus(7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let s = share(r(2), 3, &ring, &mut rng).unwrap();
        let t = s.add_constant(r(3), &ring).unwrap();
        assert_eq!(t.reconstruct(&ring).unwrap(), r(5));
        assert_eq!(&t.components()[1..], &s.components()[1..]);
        assert_eq!(s.add_constant(r(0), &ring).unwrap(), s);
        let top = share(r(6), 3, &ring, &mut rng).unwrap();
        assert_eq!(top.add_constant(r(1), &ring).unwrap().reconstruct(&ring).unwrap(), r(0));
        assert!(s.add_constant(Residue::new(1, 1), &ring).is_err());

        // view-level variant agrees with the global one
        let views: Vec<_> = s.views().iter().map(|v| v.add_constant(r(3), &ring).unwrap()).collect();
        assert_eq!(reconstruct_from_views(&views[0], &views[2], &ring).unwrap(), r(5));
    }

    #[test]
    fn linear_operations_match_plaintext() {
        let ring = Ring::with_modulus(11).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for a in 0..11 {
            for b in 0..11 {
                let sa = share(r(a), 3, &ring, &mut rng).unwrap();
                let sb = share(r(b), 3, &ring, &mut rng).unwrap();
                let sum = sa.add(&sb, &ring).unwrap().reconstruct(&ring).unwrap();
                assert_eq!(sum, r((a + b) % 11));
                let prod = sa.mul_constant(r(b), &ring).reconstruct(&ring).unwrap();
                assert_eq!(prod, r(a * b % 11));
                let va = sa.view(1).add(&sb.view(1), &ring).unwrap();
                let vb = sa.view(0).add(&sb.view(0), &ring).unwrap();
                assert_eq!(reconstruct_from_views(&va, &vb, &ring).unwrap(), r((a + b) % 11));
            }
        }
        let s = share(r(4), 4, &ring, &mut rng).unwrap();
        assert_eq!(s.mul_constant(r(1), &ring), s);
        assert_eq!(s.mul_constant(r(0), &ring).reconstruct(&ring).unwrap(), r(0));
        let other = share(r(4), 3, &ring, &mut rng).unwrap();
        assert!(s.add(&other, &ring).is_err());
    }

    #[test]
    fn mul_constant_adds_scale() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let s = share(Residue::new(170, 2), 3, &ring, &mut rng).unwrap();
        let t = s.mul_constant(Residue::new(170, 2), &ring);
        assert_eq!(t.scale(), 4);
        assert_eq!(t.reconstruct(&ring).unwrap(), Residue::new(28_900, 4));
    }
}
