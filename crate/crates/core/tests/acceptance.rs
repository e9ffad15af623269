//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 2 7`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8};
use std::process::ExitCode;
use std::time::Instant;

use apnc::bp_decoder::decode_packet;
use apnc::channel::{transmit_indices, ChannelParams};
use apnc::cli::{run_verification, VERIFY_SNRS, VERIFY_TOL};
use apnc::harness::{
    curves_from_records, penalty_with_stderr, run_point, sweep, ConfigPoint, Curve, DecoderKind,
    SweepConfig,
};
use apnc::modulation::ModScheme;
use apnc::oracle::{sync_bpsk_ber, sync_decide_packet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PACKETS: u64 = 10_000;
const BITS: usize = 2048;
const TARGET: f64 = 1e-3;
const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn curve(scheme: ModScheme, delta: f64, phi: f64, ebn0: &[f64], decoder: DecoderKind) -> Curve {
    let config = SweepConfig {
        scheme,
        deltas: vec![delta],
        phis: vec![phi],
        ebn0_db: ebn0.to_vec(),
        packets: PACKETS,
        bits_per_packet: BITS,
        base_seed: SEED,
        decoder,
    };
    let records = sweep(&config).expect("sweep runs");
    curves_from_records(&records).remove(0)
}

fn penalty(reference: &Curve, test: &Curve) -> (f64, f64) {
    penalty_with_stderr(reference, test, TARGET).expect("curves bracket the target BER")
}

fn exactness() -> Outcome {
    // Eb/N0 cycles through VERIFY_SNRS by trial index.
    let trials = 200 * VERIFY_SNRS.len();
    let o = run_verification(5, trials, SEED, false).expect("verification runs");
    let w = o.worst.expect("at least one instance");
    outcome(
        o.max_deviation <= VERIFY_TOL && o.decision_mismatches == 0,
        format!(
            "{} instances, max deviation {:.2e} (bound {VERIFY_TOL:e}), worst {} n={} case={} ebn0={}",
            o.instances, o.max_deviation, w.scheme, w.n, w.case, w.params.ebn0_db
        ),
    )
}

fn sync_equivalence() -> Outcome {
    let scheme = ModScheme::bpsk();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut samples = 0usize;
    let mut mismatches = 0usize;
    let mut i = 0usize;
    while samples < 1_000_000 {
        let ebn0 = (i % 11) as f64;
        i += 1;
        let params = ChannelParams::new(scheme, BITS, 0.0, 0.0, ebn0).expect("valid");
        let xa: Vec<usize> = (0..BITS).map(|_| rng.random_range(0..2)).collect();
        let xb: Vec<usize> = (0..BITS).map(|_| rng.random_range(0..2)).collect();
        let y = transmit_indices(&xa, &xb, &params, &mut rng).expect("transmits");
        let bp = decode_packet(&y).expect("decodes").xor;
        let sync = sync_decide_packet(&y).expect("decides");
        mismatches += bp.iter().zip(&sync).filter(|(a, b)| a != b).count();
        samples += BITS;
    }
    let mut pass = mismatches == 0;
    let mut detail = format!("{samples} samples, {mismatches} mismatches");
    for ebn0 in [4.0, 8.0] {
        let point = ConfigPoint {
            scheme,
            delta: 0.0,
            phi: 0.0,
            ebn0_db: ebn0,
        };
        let r = run_point(point, 1000, BITS, DecoderKind::Bp, SEED).expect("runs");
        let want = sync_bpsk_ber(ebn0);
        let z = (r.ber - want).abs() / r.stderr;
        pass &= z <= 3.0;
        detail += &format!(
            "; {ebn0} dB: mc {:.4e} vs quadrature {want:.4e} ({z:.2} stderr)",
            r.ber
        );
    }
    outcome(pass, detail)
}

fn bpsk_penalty() -> Outcome {
    let bpsk = ModScheme::bpsk();
    let sync = curve(bpsk, 0.0, 0.0, &[6.5, 7.0, 7.5], DecoderKind::Bp);
    let asyn = curve(bpsk, 0.5, FRAC_PI_2, &[7.0, 7.5, 8.0], DecoderKind::Bp);
    let (p, se) = penalty(&sync, &asyn);
    outcome(
        p < 0.8,
        format!("penalty {p:.3} dB (stderr {se:.3}), bound < 0.8 dB"),
    )
}

fn qpsk_curves() -> (Curve, Curve, Vec<Curve>) {
    let qpsk = ModScheme::qpsk();
    let reference = curve(qpsk, 0.0, 0.0, &[6.5, 7.0, 7.5], DecoderKind::Bp);
    let aligned = curve(qpsk, 0.0, FRAC_PI_4, &[13.0, 14.0, 15.0], DecoderKind::Bp);
    let half = [0.0, FRAC_PI_8, FRAC_PI_4]
        .iter()
        .map(|&phi| curve(qpsk, 0.5, phi, &[7.0, 7.5, 8.0], DecoderKind::Bp))
        .collect();
    (reference, aligned, half)
}

fn qpsk_aligned_penalty(reference: &Curve, aligned: &Curve) -> Outcome {
    let (p, se) = penalty(reference, aligned);
    outcome(
        p >= 5.0,
        format!("penalty {p:.3} dB (stderr {se:.3}), bound >= 5 dB"),
    )
}

fn qpsk_half_symbol(reference: &Curve, half: &[Curve]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut snrs = Vec::new();
    for c in half {
        let (p, se) = penalty(reference, c);
        pass &= p < 1.3;
        parts.push(format!("{}: {p:.3} dB (stderr {se:.3})", c.label));
        snrs.push(c.snr_at(TARGET).expect("bracketed").0);
    }
    let spread = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - snrs.iter().copied().fold(f64::INFINITY, f64::min);
    pass &= spread < 0.7;
    outcome(
        pass,
        format!(
            "{}; spread {spread:.3} dB (bounds < 1.3 dB each, spread < 0.7 dB)",
            parts.join(", ")
        ),
    )
}

fn parallel_bpsk() -> Outcome {
    let grid: Vec<f64> = (0..=10).map(f64::from).collect();
    let run = |scheme| {
        let config = SweepConfig {
            scheme,
            deltas: vec![0.0],
            phis: vec![0.0],
            ebn0_db: grid.clone(),
            packets: PACKETS,
            bits_per_packet: BITS,
            base_seed: SEED,
            decoder: DecoderKind::SyncBaseline,
        };
        sweep(&config).expect("sweep runs")
    };
    let (q, b) = (run(ModScheme::qpsk()), run(ModScheme::bpsk()));
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (rq, rb) in q.iter().zip(&b) {
        let se = rq.stderr.hypot(rb.stderr);
        let diff = (rq.ber - rb.ber).abs();
        if se == 0.0 {
            pass &= diff == 0.0;
        } else {
            pass &= diff <= 3.0 * se;
            worst = worst.max(diff / se);
        }
    }
    outcome(
        pass,
        format!(
            "{} points, worst gap {worst:.2} combined stderr (bound 3)",
            grid.len()
        ),
    )
}

fn determinism() -> Outcome {
    let run = |threads: &str| {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let args = [
            "apnc",
            "--threads",
            threads,
            "simulate",
            "--scheme",
            "qpsk",
            "--delta",
            "0,1/2",
            "--phi",
            "0,pi/4",
            "--ebn0",
            "0:3:12",
            "--packets",
            "40",
            "--bits",
            "512",
            "--seed",
            "11",
        ];
        let code = apnc::cli::run(args, &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        out
    };
    let a = run("1");
    let b = run("1");
    let c = run("8");
    outcome(
        a == b && a == c && !a.is_empty(),
        format!(
            "{} bytes; rerun identical: {}; 1 vs 8 threads identical: {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let mut failed = 0;
    let mut report = |n: u32, name: &str, start: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} criterion {n} ({name}, {:.0?}): {}",
            start.elapsed(),
            o.detail
        );
        failed += usize::from(!o.pass);
    };

    let t = Instant::now();
    if selected(1) {
        report(1, "exactness", t, exactness());
    }
    let t = Instant::now();
    if selected(2) {
        report(2, "synchronous equivalence", t, sync_equivalence());
    }
    let t = Instant::now();
    if selected(3) {
        report(3, "bpsk asynchrony penalty", t, bpsk_penalty());
    }
    if selected(4) || selected(5) {
        let t = Instant::now();
        let (reference, aligned, half) = qpsk_curves();
        if selected(4) {
            report(
                4,
                "qpsk aligned-symbol phase penalty",
                t,
                qpsk_aligned_penalty(&reference, &aligned),
            );
        }
        if selected(5) {
            report(
                5,
                "qpsk half-symbol robustness",
                t,
                qpsk_half_symbol(&reference, &half),
            );
        }
    }
    let t = Instant::now();
    if selected(6) {
        report(6, "parallel bpsk overlap", t, parallel_bpsk());
    }
    let t = Instant::now();
    if selected(7) {
        report(7, "determinism", t, determinism());
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
