#![allow(dead_code)]

use polyshare::harness::{Session, SessionConfig};
use polyshare::modring::FixedPointFormat;
use polyshare::polyctrl::{plan_evaluation, quantize_law, ConstantMode, PolynomialLaw, QuantizedLaw, Term};
use polyshare::scheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Cubic stabilizing law for the two-state benchmark plant.
pub fn cubic_law() -> PolynomialLaw {
    let t = |c, a, b| Term::new(c, vec![a, b]);
    PolynomialLaw::new(
        2,
        vec![
            t(1.6973, 1, 0),
            t(-12.2838, 0, 1),
            t(-0.2122, 2, 0),
            t(-2.6975, 1, 1),
            t(1.9631, 0, 2),
            t(0.7721, 3, 0),
            t(-4.6034, 2, 1),
            t(0.2959, 1, 2),
            t(-2.3850, 0, 3),
        ],
    )
    .unwrap()
}

pub fn format() -> FixedPointFormat {
    FixedPointFormat::new(10, 2, 4, 3).unwrap()
}

pub fn cubic_quantized() -> QuantizedLaw {
    quantize_law(&cubic_law(), &format()).unwrap()
}

pub fn session(q: &QuantizedLaw, scheme_name: &str, config: SessionConfig) -> Session {
    let s = scheme::scheme(scheme_name).unwrap();
    let plan = plan_evaluation(q, s.as_ref(), ConstantMode::Direct).unwrap();
    Session::open(&plan, config).unwrap()
}

/// Uniform states on the quantization grid inside `(-6, 6)^2`.
pub fn random_states(seed: u64, count: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut x = || rng.gen_range(-599i32..=599) as f64 / 100.0;
            [x(), x()]
        })
        .collect()
}
