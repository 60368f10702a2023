use crate::error::{Error, Result};

use super::{Residue, Ring, MAX_MODULUS};

/// Fixed-point number format shared by every encoding in a run.
///
/// The modulus is `beta^(u_pre + (degree + 1) * x_post)`, which leaves room
/// for `u_pre` integer digits after a product of `degree + 1` factors with
/// `x_post` fractional digits each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointFormat {
    beta: u64,
    x_post: u32,
    u_pre: u32,
    degree: u32,
    modulus: u64,
}

impl FixedPointFormat {
    pub fn new(beta: u64, x_post: u32, u_pre: u32, degree: u32) -> Result<Self> {
        if beta < 2 {
            return Err(Error::InvalidFormat(format!("radix {beta} must be at least 2")));
        }
        if u_pre < 1 {
            return Err(Error::InvalidFormat("u_pre must be at least 1".into()));
        }
        if degree < 1 {
            return Err(Error::InvalidFormat("degree must be at least 1".into()));
        }
        let exponent = (degree + 1)
            .checked_mul(x_post)
            .and_then(|e| e.checked_add(u_pre))
            .ok_or_else(|| Error::InvalidFormat("digit counts overflow".into()))?;
        let modulus = beta
            .checked_pow(exponent)
            .filter(|&q| q <= MAX_MODULUS)
            .ok_or_else(|| Error::InvalidFormat(format!("modulus {beta}^{exponent} exceeds 2^63")))?;
        Ok(Self { beta, x_post, u_pre, degree, modulus })
    }

    pub fn beta(&self) -> u64 {
        self.beta
    }

    pub fn x_post(&self) -> u32 {
        self.x_post
    }

    pub fn u_pre(&self) -> u32 {
        self.u_pre
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn ring(&self) -> Ring {
        Ring::new(self.modulus, self.beta).expect("format validated its modulus")
    }

    /// `beta^x_post`, the number of grid points per unit.
    pub fn units_per_one(&self) -> u64 {
        self.beta.pow(self.x_post)
    }

    /// Precision `Delta = beta^-x_post`.
    pub fn delta(&self) -> f64 {
        1.0 / self.units_per_one() as f64
    }

    /// Saturation bound `q_sat = (Q / 2) * Delta`.
    pub fn q_sat(&self) -> f64 {
        self.modulus as f64 / 2.0 * self.delta()
    }

    /// Scale of a full `(degree + 1)`-factor product.
    pub fn target_scale(&self) -> u32 {
        (self.degree + 1) * self.x_post
    }

    /// Largest representable value, in units of `Delta`.
    pub fn max_units(&self) -> i64 {
        ((self.modulus - 1) / 2) as i64
    }

    /// Smallest representable value, in units of `Delta`.
    pub fn min_units(&self) -> i64 {
        -((self.modulus / 2) as i64)
    }

    pub fn quantize(&self, x: f64) -> Result<Fixed> {
        quantize(x, self)
    }

    pub fn fixed(&self, units: i64) -> Result<Fixed> {
        if units < self.min_units() || units > self.max_units() {
            return Err(Error::NotRepresentable(units as f64 * self.delta()));
        }
        Ok(Fixed { units, per_one: self.units_per_one() })
    }

    /// Maps a fixed-point value to `Z_Q` at scale `x_post`; negatives wrap to
    /// their radix complement.
    pub fn encode(&self, x: Fixed) -> Residue {
        debug_assert_eq!(x.per_one, self.units_per_one());
        Residue::new(self.ring().reduce(x.units as i128), self.x_post)
    }

    /// Encodes a real that must already lie on the grid.
    pub fn encode_real(&self, x: f64) -> Result<Residue> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        let scaled = x * self.units_per_one() as f64;
        let units = scaled.round();
        let tolerance = 1e-9 * scaled.abs().max(1.0);
        if (scaled - units).abs() > tolerance || units < self.min_units() as f64 || units > self.max_units() as f64 {
            return Err(Error::NotRepresentable(x));
        }
        Ok(self.encode(self.fixed(units as i64)?))
    }

    /// Real value of a residue at any scale.
    pub fn decode(&self, r: Residue) -> f64 {
        decode_with(&self.ring(), r)
    }
}

pub(crate) fn decode_with(ring: &Ring, r: Residue) -> f64 {
    let signed = ring.signed(r.value) as f64;
    signed / (ring.beta() as f64).powi(r.scale as i32)
}

/// A real number on the grid of a [`FixedPointFormat`], stored as an integer
/// count of `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fixed {
    units: i64,
    per_one: u64,
}

impl Fixed {
    pub fn units(&self) -> i64 {
        self.units
    }

    pub fn to_f64(&self) -> f64 {
        self.units as f64 / self.per_one as f64
    }
}

/// Rounds `x` to the nearest grid point, saturating at the format's range.
///
/// Values at or beyond `q_sat - Delta` map to the largest representable
/// value and values at or below `-q_sat` to the smallest; everything else
/// becomes `Delta * floor(x / Delta + 1/2)`.
pub fn quantize(x: f64, fmt: &FixedPointFormat) -> Result<Fixed> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    let per_one = fmt.units_per_one() as f64;
    let scaled = x * per_one;
    let half_q = fmt.modulus() as f64 / 2.0;
    let units = if scaled >= half_q - 1.0 {
        fmt.max_units()
    } else if scaled <= -half_q {
        fmt.min_units()
    } else {
        ((scaled + 0.5).floor() as i64).clamp(fmt.min_units(), fmt.max_units())
    };
    fmt.fixed(units)
}
