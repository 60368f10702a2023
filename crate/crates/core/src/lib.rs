//! Secret-sharing based multi-party evaluation of polynomial feedback laws.
//!
//! A distributor (the sensor) quantizes the plant state, shares every
//! factor of every monomial among non-colluding servers, the servers run a
//! multiplication scheme, and a collector (the actuator) adds the result
//! shares to obtain the control input. Two schemes are provided:
//! `three-party`, which re-shares partial products around a ring of three
//! servers, and `n-party`, which uses `f + 1` servers per `f`-factor product
//! and needs no server-to-server traffic at all.

pub mod error;
pub mod harness;
pub mod modring;
pub mod nparty;
pub mod plant;
pub mod polyctrl;
pub mod registry;
pub mod scheme;
pub mod sharing;
pub mod threeparty;

pub use error::{Error, Result};
pub use modring::{Arith, Fixed, FixedPointFormat, Meter, OpCounts, Residue, Ring};
pub use polyctrl::{
    encode_state, evaluate_plaintext, evaluate_secure, plan_evaluation, quantize_law, ConstantMode, EvaluationPlan,
    PolynomialLaw, QuantizedLaw, Term,
};
pub use scheme::{builtin_schemes, MultiplicationScheme};
