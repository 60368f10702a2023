//! Exact arithmetic over `Z_Q` with explicit fixed-point scale tracking.
//!
//! A [`Residue`] carries its value in `[0, Q)` together with the power of the
//! radix by which that value overstates the real number it encodes. Products
//! add scales; sums require equal scales, so callers lift the smaller one with
//! [`Ring::rescale`] first.

mod fixed;

use std::cell::Cell;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

pub use fixed::{quantize, Fixed, FixedPointFormat};

/// Largest supported modulus. Products are formed in `u128`, so anything up to
/// here reduces exactly.
pub const MAX_MODULUS: u64 = 1 << 63;

pub const DEFAULT_BETA: u64 = 10;

/// An element of `Z_Q` tagged with its scale exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Residue {
    pub value: u64,
    pub scale: u32,
}

impl Residue {
    pub const fn new(value: u64, scale: u32) -> Self {
        Self { value, scale }
    }

    pub const fn zero(scale: u32) -> Self {
        Self { value: 0, scale }
    }
}

/// Modulus and radix. Every operation is pure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    modulus: u64,
    beta: u64,
}

impl Ring {
    pub fn new(modulus: u64, beta: u64) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::InvalidFormat(format!("modulus {modulus} must be at least 2")));
        }
        if modulus > MAX_MODULUS {
            return Err(Error::InvalidFormat(format!("modulus {modulus} exceeds 2^63")));
        }
        if beta < 2 {
            return Err(Error::InvalidFormat(format!("radix {beta} must be at least 2")));
        }
        Ok(Self { modulus, beta })
    }

    /// Ring with the default radix of ten.
    pub fn with_modulus(modulus: u64) -> Result<Self> {
        Self::new(modulus, DEFAULT_BETA)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn beta(&self) -> u64 {
        self.beta
    }

    pub fn residue(&self, value: u64, scale: u32) -> Result<Residue> {
        let r = Residue::new(value, scale);
        self.check(r)?;
        Ok(r)
    }

    pub fn check(&self, r: Residue) -> Result<()> {
        if r.value >= self.modulus {
            return Err(Error::OutOfRange { value: r.value, modulus: self.modulus });
        }
        Ok(())
    }

    /// Reduces a signed integer into `[0, Q)`.
    pub fn reduce(&self, x: i128) -> u64 {
        x.rem_euclid(self.modulus as i128) as u64
    }

    /// Radix-complement interpretation: values in the upper half are negative.
    pub fn signed(&self, value: u64) -> i128 {
        if value < self.modulus.div_ceil(2) {
            value as i128
        } else {
            value as i128 - self.modulus as i128
        }
    }

    pub fn add(&self, a: Residue, b: Residue) -> Result<Residue> {
        same_scale(a, b)?;
        let v = (a.value as u128 + b.value as u128) % self.modulus as u128;
        Ok(Residue::new(v as u64, a.scale))
    }

    pub fn sub(&self, a: Residue, b: Residue) -> Result<Residue> {
        same_scale(a, b)?;
        let v = (a.value as u128 + self.modulus as u128 - b.value as u128) % self.modulus as u128;
        Ok(Residue::new(v as u64, a.scale))
    }

    pub fn neg(&self, a: Residue) -> Residue {
        let v = (self.modulus as u128 - a.value as u128) % self.modulus as u128;
        Residue::new(v as u64, a.scale)
    }

    pub fn mul(&self, a: Residue, b: Residue) -> Residue {
        let v = (a.value as u128 * b.value as u128) % self.modulus as u128;
        Residue::new(v as u64, a.scale + b.scale)
    }

    /// `beta^exp mod Q`.
    pub fn pow_beta(&self, exp: u32) -> u64 {
        let q = self.modulus as u128;
        let mut acc: u128 = 1 % q;
        let mut base = self.beta as u128 % q;
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            e >>= 1;
        }
        acc as u64
    }

    /// Lifts `a` to `target` by multiplying with `beta^(target - a.scale)`.
    pub fn rescale(&self, a: Residue, target: u32) -> Result<Residue> {
        if target < a.scale {
            return Err(Error::Downscale { from: a.scale, to: target });
        }
        let factor = self.pow_beta(target - a.scale) as u128;
        let v = a.value as u128 * factor % self.modulus as u128;
        Ok(Residue::new(v as u64, target))
    }

    pub fn sample(&self, rng: &mut dyn RngCore, scale: u32) -> Residue {
        Residue::new(rng.gen_range(0..self.modulus), scale)
    }
}

fn same_scale(a: Residue, b: Residue) -> Result<()> {
    if a.scale != b.scale {
        return Err(Error::ScaleMismatch { left: a.scale, right: b.scale });
    }
    Ok(())
}

/// Elementary operation kinds tallied by [`Meter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Mul,
    Draw,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub additions: u64,
    pub multiplications: u64,
    pub draws: u64,
}

impl OpCounts {
    pub fn merge(&mut self, other: &OpCounts) {
        self.additions += other.additions;
        self.multiplications += other.multiplications;
        self.draws += other.draws;
    }
}

/// Modular arithmetic with an operation hook.
///
/// Protocol code is written against this trait so the same routines run
/// uninstrumented (plain [`Ring`]) or counted (a [`Meter`]). Subtractions are
/// tallied as additions.
pub trait Arith {
    fn ring(&self) -> Ring;

    fn record(&self, _op: Op) {}

    fn add(&self, a: Residue, b: Residue) -> Result<Residue> {
        self.record(Op::Add);
        self.ring().add(a, b)
    }

    fn sub(&self, a: Residue, b: Residue) -> Result<Residue> {
        self.record(Op::Add);
        self.ring().sub(a, b)
    }

    fn mul(&self, a: Residue, b: Residue) -> Residue {
        self.record(Op::Mul);
        self.ring().mul(a, b)
    }

    fn draw(&self, rng: &mut dyn RngCore, scale: u32) -> Residue {
        self.record(Op::Draw);
        self.ring().sample(rng, scale)
    }

    /// Wraps a pseudorandom value computed elsewhere; tallied as a draw.
    fn pseudo(&self, value: u64, scale: u32) -> Residue {
        self.record(Op::Draw);
        Residue::new(value % self.ring().modulus(), scale)
    }
}

impl Arith for Ring {
    fn ring(&self) -> Ring {
        *self
    }
}

/// A [`Ring`] that counts every operation it performs.
#[derive(Debug)]
pub struct Meter {
    ring: Ring,
    counts: Cell<OpCounts>,
}

impl Meter {
    pub fn new(ring: Ring) -> Self {
        Self { ring, counts: Cell::new(OpCounts::default()) }
    }

    pub fn counts(&self) -> OpCounts {
        self.counts.get()
    }

    /// Returns the counts accumulated so far and resets them.
    pub fn take(&self) -> OpCounts {
        self.counts.take()
    }
}

impl Arith for Meter {
    fn ring(&self) -> Ring {
        self.ring
    }

    fn record(&self, op: Op) {
        let mut c = self.counts.get();
        match op {
            Op::Add => c.additions += 1,
            Op::Mul => c.multiplications += 1,
            Op::Draw => c.draws += 1,
        }
        self.counts.set(c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: u64, s: u32) -> Residue {
        Residue::new(v, s)
    }

    #[test]
    fn addition_wraps() {
        let ring = Ring::with_modulus(7).unwrap();
        assert_eq!(ring.add(r(3, 1), r(4, 1)).unwrap(), r(0, 1));
        assert_eq!(ring.add(r(5, 1), r(0, 1)).unwrap(), r(5, 1));
        assert_eq!(ring.sub(r(2, 1), r(5, 1)).unwrap(), r(4, 1));
    }

    #[test]
    fn addition_rejects_mixed_scales() {
        let ring = Ring::with_modulus(7).unwrap();
        assert!(matches!(ring.add(r(1, 1), r(1, 2)), Err(Error::ScaleMismatch { left: 1, right: 2 })));
        assert!(ring.sub(r(1, 0), r(1, 2)).is_err());
    }

    #[test]
    fn multiplication_adds_scales() {
        let ring = Ring::with_modulus(1_000_000_000_000).unwrap();
        assert_eq!(ring.mul(r(170, 2), r(170, 2)), r(28_900, 4));
        // 10^12 mod 10^12
        assert_eq!(ring.mul(r(1_000_000, 0), r(1_000_000, 0)), r(0, 0));
        // multiplying by one stored at scale m
        assert_eq!(ring.mul(r(170, 2), r(100, 2)), r(17_000, 4));
    }

    #[test]
    fn rescale_lifts_and_refuses_truncation() {
        let q = 1_000_000_000_000;
        let ring = Ring::with_modulus(q).unwrap();
        assert_eq!(ring.rescale(r(170, 2), 2).unwrap(), r(170, 2));
        assert_eq!(ring.rescale(r(170, 2), 4).unwrap(), r(17_000, 4));
        assert_eq!(ring.rescale(r(q - 1, 0), 1).unwrap(), r(q - 10, 1));
        assert!(matches!(ring.rescale(r(1, 3), 2), Err(Error::Downscale { from: 3, to: 2 })));
    }

    #[test]
    fn ring_rejects_bad_parameters() {
        assert!(Ring::with_modulus(1).is_err());
        assert!(Ring::with_modulus(MAX_MODULUS).is_ok());
        assert!(Ring::with_modulus(MAX_MODULUS + 1).is_err());
        assert!(Ring::new(11, 1).is_err());
    }

    #[test]
    fn large_modulus_products_do_not_overflow() {
        let ring = Ring::with_modulus(MAX_MODULUS).unwrap();
        let a = r(MAX_MODULUS - 1, 0);
        // (-1)(-1) = 1
        assert_eq!(ring.mul(a, a), r(1, 0));
        assert_eq!(ring.add(a, a).unwrap(), r(MAX_MODULUS - 2, 0));
    }

    #[test]
    fn signed_view_uses_radix_complement() {
        let ring = Ring::with_modulus(10).unwrap();
        assert_eq!(ring.signed(4), 4);
        assert_eq!(ring.signed(5), -5);
        assert_eq!(ring.signed(9), -1);
        let odd = Ring::with_modulus(11).unwrap();
        assert_eq!(odd.signed(5), 5);
        assert_eq!(odd.signed(6), -5);
    }

    #[test]
    fn meter_counts_operations() {
        let meter = Meter::new(Ring::with_modulus(11).unwrap());
        let a = meter.add(r(1, 0), r(2, 0)).unwrap();
        let _ = meter.sub(a, r(2, 0)).unwrap();
        let _ = meter.mul(a, a);
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let _ = meter.draw(&mut rng, 0);
        assert_eq!(meter.take(), OpCounts { additions: 2, multiplications: 1, draws: 1 });
        assert_eq!(meter.counts(), OpCounts::default());
    }
}
