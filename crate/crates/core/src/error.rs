use std::io;

use thiserror::Error;

use crate::harness::PartyId;
use crate::sharing::ZeroShareId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid number format: {0}")]
    InvalidFormat(String),

    #[error("cannot quantize non-finite value {0}")]
    NonFinite(f64),

    #[error("{0} is not representable in the fixed-point format")]
    NotRepresentable(f64),

    #[error("residue {value} is outside [0, {modulus})")]
    OutOfRange { value: u64, modulus: u64 },

    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: u32, right: u32 },

    #[error("cannot downscale residue from scale {from} to {to}")]
    Downscale { from: u32, to: u32 },

    #[error("a sharing needs at least two parties, got {0}")]
    PartyCount(usize),

    #[error("expected {expected} components, found {found}")]
    ComponentCount { expected: usize, found: usize },

    #[error("missing share component from party {0}")]
    MissingComponent(usize),

    #[error("views must come from two distinct parties of the same sharing")]
    IncompatibleViews,

    #[error("zero-sharing {0:?} was already consumed")]
    ZeroShareReuse(ZeroShareId),

    #[error("stale zero-share: expected round {expected}, got {found}")]
    StaleZeroShare { expected: u16, found: u16 },

    #[error("unexpected sender: expected {expected}, got {found}")]
    UnexpectedSender { expected: usize, found: usize },

    #[error("party {party} cannot compute summand {tuple:?}: it lacks that component")]
    AssignmentViolation { party: usize, tuple: Vec<usize> },

    #[error("invalid control law: {0}")]
    InvalidLaw(String),

    #[error("protocol failure in summand {summand}: {reason}")]
    Protocol { summand: u16, reason: String },

    #[error("session failure: {0}")]
    Session(String),

    #[error("malformed frame: {0}")]
    Codec(String),

    #[error("frame authentication failed on channel {from} -> {to}")]
    Authentication { from: PartyId, to: PartyId },

    #[error("state ({x1}, {x2}) left the safety box")]
    Diverged { x1: f64, x2: f64 },

    #[error("session is closed")]
    SessionClosed,

    #[error("unknown {kind} '{name}'")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn protocol(summand: u16, reason: impl Into<String>) -> Self {
        Error::Protocol { summand, reason: reason.into() }
    }
}
