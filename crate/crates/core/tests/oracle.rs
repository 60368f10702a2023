mod common;

use common::{cubic_quantized, random_states, session};
use polyshare::harness::SessionConfig;
use polyshare::polyctrl::{encode_state, evaluate_plaintext, evaluate_secure};
use polyshare::sharing::ZeroShareMode;

#[test]
fn secure_matches_plaintext_on_a_thousand_states() {
    let q = cubic_quantized();
    let states = random_states(2024, 1000);
    for scheme in ["three-party", "n-party"] {
        let mut s = session(&q, scheme, SessionConfig { seed: 11, ..SessionConfig::default() });
        for x in &states {
            let enc = encode_state(x, q.format()).unwrap();
            let secure = evaluate_secure(&q, &mut s, &enc).unwrap();
            assert_eq!(secure, evaluate_plaintext(&q, &enc).unwrap(), "{scheme} at {x:?}");
        }
    }
}

#[test]
fn every_mode_and_transport_agrees() {
    let q = cubic_quantized();
    let states = random_states(7, 50);
    for transport in ["in-memory", "framed-stream"] {
        for zero in [ZeroShareMode::Communication, ZeroShareMode::Correlated] {
            let cfg = SessionConfig { transport: transport.into(), zero_sharing: zero, ..SessionConfig::default() };
            let mut s = session(&q, "three-party", cfg);
            for x in &states {
                let enc = encode_state(x, q.format()).unwrap();
                assert_eq!(s.run_step(&enc).unwrap(), evaluate_plaintext(&q, &enc).unwrap());
            }
        }
    }
}

#[test]
fn unit_state_gives_coefficient_sum() {
    let q = cubic_quantized();
    let x = encode_state(&[1.0, 1.0], q.format()).unwrap();
    for scheme in ["three-party", "n-party"] {
        let mut s = session(&q, scheme, SessionConfig::default());
        let u = s.run_step(&x).unwrap();
        assert_eq!(u.scale, 8);
        assert_eq!(q.ring().signed(u.value), -1744 * 1_000_000);
        assert!((q.decode(u) + 17.44).abs() < 1e-12);
    }
}

#[test]
fn zero_state_gives_zero() {
    let q = cubic_quantized();
    let x = encode_state(&[0.0, 0.0], q.format()).unwrap();
    for scheme in ["three-party", "n-party"] {
        let mut s = session(&q, scheme, SessionConfig::default());
        assert_eq!(s.run_step(&x).unwrap().value, 0);
    }
}
