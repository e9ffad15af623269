use std::f64::consts::{FRAC_PI_2, PI};

use apnc::bp_decoder::{decode_packet, run_all};
use apnc::channel::{transmit_indices, ChannelParams, SampleVector};
use apnc::modulation::ModScheme;
use apnc::oracle::{brute_force_conditional, brute_force_posterior, sync_decide_packet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn schemes() -> [ModScheme; 2] {
    [ModScheme::bpsk(), ModScheme::qpsk()]
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    scheme: ModScheme,
    n: usize,
    delta: f64,
    phi: f64,
    ebn0: f64,
) -> (Vec<usize>, Vec<usize>, SampleVector) {
    let m = scheme.order();
    let params = ChannelParams::new(scheme, n, delta, phi, ebn0).unwrap();
    let xa: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
    let xb: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
    let y = transmit_indices(&xa, &xb, &params, rng).unwrap();
    (xa, xb, y)
}

fn case_offsets(rng: &mut ChaCha8Rng, case: u8) -> (f64, f64) {
    let delta = if case.is_multiple_of(2) {
        rng.random_range(0.05..0.95)
    } else {
        0.0
    };
    let phi = if case >= 3 {
        rng.random_range(0.1..2.0 * PI)
    } else {
        0.0
    };
    (delta, phi)
}

fn joint_gap(want: &[f64], got: &apnc::bp_decoder::JointLog) -> f64 {
    let b_dim = got.b_dim();
    want.iter()
        .enumerate()
        .map(|(i, w)| (got.prob(i / b_dim, i % b_dim) - w).abs())
        .fold(0.0, f64::max)
}

#[test]
fn sweep_messages_are_conditional_posteriors() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for scheme in schemes() {
        for n in 1..=4 {
            for case in 1..=4 {
                for ebn0 in [0.0, 6.0, 12.0] {
                    let (delta, phi) = case_offsets(&mut rng, case);
                    let (_, _, y) = random_instance(&mut rng, scheme, n, delta, phi, ebn0);
                    let (_, fwd, bwd, _) = run_all(&y).unwrap();
                    let last = 2 * n + 1;
                    for k in 1..=last {
                        let upstream = brute_force_conditional(&y, &y.params, 1..=k - 1).unwrap();
                        let through = brute_force_conditional(&y, &y.params, 1..=k).unwrap();
                        let downstream =
                            brute_force_conditional(&y, &y.params, k + 1..=last).unwrap();
                        let from_k = brute_force_conditional(&y, &y.params, k..=last).unwrap();
                        let ctx = format!("{scheme} n={n} case={case} {ebn0} dB node {k}");
                        assert!(
                            joint_gap(&upstream.nodes[k - 1], &fwd.incoming[k - 1]) < TOL,
                            "Q {ctx}"
                        );
                        assert!(
                            joint_gap(&through.nodes[k - 1], &fwd.combined[k - 1]) < TOL,
                            "R {ctx}"
                        );
                        assert!(
                            joint_gap(&downstream.nodes[k - 1], &bwd.incoming[k - 1]) < TOL,
                            "backward {ctx}"
                        );
                        assert!(
                            joint_gap(&from_k.nodes[k - 1], &bwd.combined[k - 1]) < TOL,
                            "backward combined {ctx}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn beliefs_and_decisions_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for scheme in schemes() {
        for n in 1..=5 {
            for case in 1..=4 {
                for ebn0 in [0.0, 6.0, 12.0] {
                    let (delta, phi) = case_offsets(&mut rng, case);
                    let (_, _, y) = random_instance(&mut rng, scheme, n, delta, phi, ebn0);
                    let oracle = brute_force_posterior(&y, &y.params).unwrap();
                    let (_, _, _, bel) = run_all(&y).unwrap();
                    let decoded = decode_packet(&y).unwrap();
                    let want = oracle.xor_map();
                    for (i, b) in bel.iter().enumerate() {
                        assert!(joint_gap(oracle.pair(i + 1), &b.joint) < TOL);
                        for (c, p) in oracle.xor[i].iter().enumerate() {
                            assert!((b.xor[c] - p).abs() < TOL);
                        }
                        let mut sorted = oracle.xor[i].clone();
                        sorted.sort_by(|a, b| b.total_cmp(a));
                        if sorted[0] - sorted[1] > 1e-6 {
                            assert_eq!(decoded.xor[i], want[i]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn aligned_bpsk_decisions_follow_the_synchronous_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for ebn0 in [0.0, 3.0, 6.0, 9.0] {
        let (_, _, y) = random_instance(&mut rng, ModScheme::bpsk(), 4096, 0.0, 0.0, ebn0);
        assert_eq!(
            decode_packet(&y).unwrap().xor,
            sync_decide_packet(&y).unwrap()
        );
    }
}

#[test]
fn quarter_turn_of_phase_relabels_b() {
    let qpsk = ModScheme::qpsk();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for (delta, phi) in [(0.3, 0.2), (0.5, 1.0), (0.0, 0.7)] {
        let (_, _, y) = random_instance(&mut rng, qpsk, 6, delta, phi, 5.0);
        let turned = ChannelParams::new(qpsk, 6, delta, phi + FRAC_PI_2, 5.0).unwrap();
        let y2 = SampleVector::new(y.samples.clone(), turned).unwrap();
        let (_, _, _, b1) = run_all(&y).unwrap();
        let (_, _, _, b2) = run_all(&y2).unwrap();
        for (p, q) in b1.iter().zip(&b2) {
            for a in 0..4 {
                for b in 0..4 {
                    assert!((q.joint.prob(a, b) - p.joint.prob(a, (b + 1) % 4)).abs() < TOL);
                }
            }
        }
    }
}

#[test]
fn noise_free_long_packets_decode_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for scheme in schemes() {
        let (xa, xb, y) = random_instance(&mut rng, scheme, 1024, 0.5, 0.3, f64::INFINITY);
        let got = decode_packet(&y).unwrap().xor;
        let want: Vec<usize> = xa
            .iter()
            .zip(&xb)
            .map(|(&a, &b)| scheme.xor_index(a, b))
            .collect();
        assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posteriors_are_distributions(
        qpsk in any::<bool>(),
        n in 1usize..40,
        delta in 0.0f64..0.99,
        phi in 0.0f64..std::f64::consts::TAU,
        ebn0 in -5.0f64..25.0,
        seed in any::<u64>(),
    ) {
        let scheme = if qpsk { ModScheme::qpsk() } else { ModScheme::bpsk() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, _, y) = random_instance(&mut rng, scheme, n, delta, phi, ebn0);
        let (_, _, _, bel) = run_all(&y).unwrap();
        prop_assert_eq!(bel.len(), n);
        for b in &bel {
            let m = scheme.order();
            let joint: f64 = (0..m).flat_map(|a| (0..m).map(move |c| (a, c))).map(|(a, c)| b.joint.prob(a, c)).sum();
            let xor: f64 = b.xor[..m].iter().sum();
            prop_assert!((joint - 1.0).abs() < 1e-9);
            prop_assert!((xor - 1.0).abs() < 1e-9);
            prop_assert!(b.xor[..m].iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }
}
