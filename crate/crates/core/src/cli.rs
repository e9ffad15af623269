//! `apnc` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 verification or threshold
//! failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::bp_decoder::{decode_from_evidence, run_all, EvidenceModel, EvidenceVector, JointLog};
use crate::channel::{transmit_indices, ChannelParams, SampleVector};
use crate::error::{Error, Result};
use crate::harness::{
    curves_from_records, penalty_with_stderr, sweep, Curve, DecoderKind, SweepConfig,
};
use crate::modulation::ModScheme;
use crate::oracle::{brute_force_posterior, sync_decide_packet, MAX_ENUM_SYMBOLS};
use crate::report::{read_csv, render_svg, write_csv, Trace};
use crate::units::{parse_delta, parse_ebn0_grid, parse_list, parse_phi};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

/// Maximum absolute posterior deviation tolerated by `verify`.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "apnc",
    version,
    about = "Asynchronous PNC decoding and BER simulation"
)]
pub struct Cli {
    /// Worker threads; does not change any output.
    #[arg(long, global = true, env = "APNC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a BER sweep and write CSV (and optionally SVG).
    Simulate(SimulateArgs),
    /// Compare BP posteriors with exhaustive enumeration.
    Verify(VerifyArgs),
    /// Eb/N0 penalty between BER curves from two CSV files.
    Penalty(PenaltyArgs),
    /// Generate one random packet pair and write its samples as JSON.
    Trace(TraceArgs),
    /// Decode a JSON sample trace.
    Decode(DecodeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with any of the keys below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<String>,
    /// Symbol offsets, e.g. `0,1/2`.
    #[arg(long)]
    pub delta: Option<String>,
    /// Phase offsets, e.g. `0,pi/8,pi/4`.
    #[arg(long)]
    pub phi: Option<String>,
    /// Eb/N0 grid in dB: `start:step:stop` or a list.
    #[arg(long)]
    pub ebn0: Option<String>,
    #[arg(long)]
    pub packets: Option<u64>,
    /// Bits per packet.
    #[arg(long)]
    pub bits: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `bp` or `sync`.
    #[arg(long)]
    pub decoder: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 5)]
    pub max_n: usize,
    /// Random instances per (scheme, N, case).
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Flip the sign of every evidence exponent before decoding.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Target BER; repeatable. Defaults to 1e-3, with 1e-4 also reported.
    #[arg(long)]
    pub target: Vec<f64>,
    /// Fail (exit 2) when any penalty exceeds this many dB.
    #[arg(long)]
    pub max_db: Option<f64>,
    /// Fail (exit 2) when the SNR spread across test curves exceeds this.
    #[arg(long)]
    pub max_spread_db: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value = "qpsk")]
    pub scheme: String,
    /// Symbols per packet.
    #[arg(long, short, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value = "1/2")]
    pub delta: String,
    #[arg(long, default_value = "pi/4")]
    pub phi: String,
    #[arg(long, default_value = "6")]
    pub ebn0: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// JSON trace as written by `apnc trace`.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "bp")]
    pub decoder: String,
}

#[derive(Debug, Deserialize, Clone, PartialEq)]
#[serde(untagged)]
enum ListValue {
    Text(String),
    Number(f64),
    Items(Vec<ListItem>),
}

#[derive(Debug, Deserialize, Clone, PartialEq)]
#[serde(untagged)]
enum ListItem {
    Text(String),
    Number(f64),
}

impl ListValue {
    fn joined(&self) -> String {
        let item = |i: &ListItem| match i {
            ListItem::Text(t) => t.clone(),
            ListItem::Number(v) => v.to_string(),
        };
        match self {
            ListValue::Text(t) => t.clone(),
            ListValue::Number(v) => v.to_string(),
            ListValue::Items(items) => items.iter().map(item).collect::<Vec<_>>().join(","),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    scheme: Option<String>,
    delta: Option<ListValue>,
    phi: Option<ListValue>,
    ebn0: Option<ListValue>,
    packets: Option<u64>,
    bits: Option<usize>,
    seed: Option<u64>,
    decoder: Option<String>,
}

/// Defaults, then config file, then flags.
pub fn resolve_sweep(args: &SimulateArgs) -> Result<SweepConfig> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let scheme = args
        .scheme
        .clone()
        .or(file.scheme)
        .unwrap_or_else(|| "bpsk".into());
    let delta = args
        .delta
        .clone()
        .or(file.delta.map(|v| v.joined()))
        .unwrap_or_else(|| "0".into());
    let phi = args
        .phi
        .clone()
        .or(file.phi.map(|v| v.joined()))
        .unwrap_or_else(|| "0".into());
    let ebn0 = args
        .ebn0
        .clone()
        .or(file.ebn0.map(|v| v.joined()))
        .unwrap_or_else(|| "0:1:10".into());
    let decoder = args
        .decoder
        .clone()
        .or(file.decoder)
        .unwrap_or_else(|| "bp".into());
    let config = SweepConfig {
        scheme: scheme.parse()?,
        deltas: parse_list(&delta, parse_delta)?,
        phis: parse_list(&phi, parse_phi)?,
        ebn0_db: parse_ebn0_grid(&ebn0)?,
        packets: args.packets.or(file.packets).unwrap_or(10_000),
        bits_per_packet: args.bits.or(file.bits).unwrap_or(2048),
        base_seed: args.seed.or(file.seed).unwrap_or(1),
        decoder: decoder.parse()?,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let config = resolve_sweep(args)?;
    let records = sweep(&config)?;
    let csv = write_csv(&records);
    match &args.out {
        Some(path) => fs::write(path, &csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(path) = &args.svg {
        let title = format!(
            "{} {} decoder, {} x {} bits",
            config.scheme, config.decoder, config.packets, config.bits_per_packet
        );
        fs::write(path, render_svg(&records, &title))?;
    }
    Ok(EXIT_OK)
}

/// Offset case: 1 aligned, 2 symbol offset, 3 phase offset, 4 both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instance {
    pub scheme: ModScheme,
    pub n: usize,
    pub case: u8,
    pub trial: usize,
    pub params: ChannelParams,
}

pub const VERIFY_SNRS: [f64; 3] = [0.0, 6.0, 12.0];

/// Draws the channel parameters of one verification instance.
pub fn verify_instance(
    seed: u64,
    scheme: ModScheme,
    n: usize,
    case: u8,
    trial: usize,
) -> (Instance, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(
        seed ^ ((scheme.order() as u64) << 56) ^ ((n as u64) << 48) ^ ((case as u64) << 40),
    );
    rng.set_stream(trial as u64);
    let delta = if matches!(case, 2 | 4) {
        rng.random_range(0.05..0.95)
    } else {
        0.0
    };
    let phi = if matches!(case, 3 | 4) {
        rng.random_range(0.05..std::f64::consts::TAU - 0.05)
    } else {
        0.0
    };
    let ebn0 = VERIFY_SNRS[trial % VERIFY_SNRS.len()];
    let params =
        ChannelParams::new(scheme, n, delta, phi, ebn0).expect("verification parameters are valid");
    (
        Instance {
            scheme,
            n,
            case,
            trial,
            params,
        },
        rng,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    pub instances: usize,
    pub max_deviation: f64,
    pub worst: Option<Instance>,
    pub decision_mismatches: usize,
}

fn flip_evidence(ev: &[EvidenceVector]) -> Vec<EvidenceVector> {
    ev.iter()
        .map(|e| {
            let w: Vec<f64> = e.weights.log_weights().iter().map(|x| -x).collect();
            EvidenceVector {
                node: e.node,
                weights: JointLog::from_log_weights(e.weights.a_dim(), e.weights.b_dim(), &w)
                    .expect("same shape"),
            }
        })
        .collect()
}

/// Largest gap between BP and enumeration posteriors for one instance, and
/// whether the XOR decisions disagree where the enumeration is decisive.
pub fn check_instance(y: &SampleVector, inject_fault: bool) -> Result<(f64, bool)> {
    let scheme = y.params.scheme;
    let m = scheme.order();
    let oracle = brute_force_posterior(y, &y.params)?;
    let (bel, xor) = if inject_fault {
        let ev = flip_evidence(&EvidenceModel::new(&y.params).all_evidence(y)?);
        let fwd = crate::bp_decoder::forward_pass(&ev)?;
        let bwd = crate::bp_decoder::backward_pass(&ev)?;
        let bel = crate::bp_decoder::beliefs(&ev, &fwd, &bwd, scheme)?;
        let xor = decode_from_evidence(&ev, scheme)?.xor;
        (bel, xor)
    } else {
        let (_, _, _, bel) = run_all(y)?;
        let xor = crate::bp_decoder::decode_xor(&bel, scheme);
        (bel, xor)
    };
    let mut dev: f64 = 0.0;
    for (i, b) in bel.iter().enumerate() {
        let want = oracle.pair(i + 1);
        for a in 0..m {
            for bb in 0..m {
                dev = dev.max((b.joint.prob(a, bb) - want[a * m + bb]).abs());
            }
        }
    }
    let oracle_map = oracle.xor_map();
    let mismatch = oracle.xor.iter().enumerate().any(|(i, p)| {
        let mut sorted = p.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted[0] - sorted[1] > 1e-6 && xor[i] != oracle_map[i]
    });
    Ok((dev, mismatch))
}

/// Randomised BP-versus-enumeration comparison over both schemes, all four
/// cases and `N = 1..=max_n`.
pub fn run_verification(
    max_n: usize,
    trials: usize,
    seed: u64,
    inject_fault: bool,
) -> Result<VerifyOutcome> {
    if max_n == 0 || max_n > MAX_ENUM_SYMBOLS {
        return Err(Error::invalid(
            "max_n",
            format!("must be in 1..={MAX_ENUM_SYMBOLS}"),
        ));
    }
    let mut outcome = VerifyOutcome {
        instances: 0,
        max_deviation: 0.0,
        worst: None,
        decision_mismatches: 0,
    };
    for scheme in [ModScheme::bpsk(), ModScheme::qpsk()] {
        for n in 1..=max_n {
            for case in 1..=4u8 {
                for trial in 0..trials {
                    let (inst, mut rng) = verify_instance(seed, scheme, n, case, trial);
                    let m = scheme.order();
                    let xa: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
                    let xb: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
                    let y = transmit_indices(&xa, &xb, &inst.params, &mut rng)?;
                    let (dev, mismatch) = check_instance(&y, inject_fault)?;
                    outcome.instances += 1;
                    outcome.decision_mismatches += usize::from(mismatch);
                    if dev > outcome.max_deviation || outcome.worst.is_none() {
                        outcome.max_deviation = outcome.max_deviation.max(dev);
                        outcome.worst = Some(inst);
                    }
                }
            }
        }
    }
    Ok(outcome)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let o = run_verification(args.max_n, args.trials, args.seed, args.inject_fault)?;
    writeln!(
        out,
        "verified {} instances (N = 1..={}, cases 1-4, bpsk+qpsk, Eb/N0 in {:?} dB)",
        o.instances, args.max_n, VERIFY_SNRS
    )?;
    writeln!(
        out,
        "max |bp - enumeration| = {:.3e} (bound {VERIFY_TOL:e})",
        o.max_deviation
    )?;
    writeln!(out, "xor decision mismatches = {}", o.decision_mismatches)?;
    if let Some(w) = o.worst {
        writeln!(
            out,
            "worst: seed={} scheme={} n={} case={} trial={} delta={} phi={} ebn0_db={}",
            args.seed,
            w.scheme,
            w.n,
            w.case,
            w.trial,
            w.params.delta,
            w.params.phi,
            w.params.ebn0_db
        )?;
    }
    if o.max_deviation <= VERIFY_TOL && o.decision_mismatches == 0 {
        writeln!(out, "PASS")?;
        Ok(EXIT_OK)
    } else {
        writeln!(out, "FAIL")?;
        Ok(EXIT_FAILED)
    }
}

fn load_curves(path: &PathBuf) -> Result<Vec<Curve>> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let curves = curves_from_records(&read_csv(&text)?);
    if curves.is_empty() {
        return Err(Error::Parse(format!("{} has no data rows", path.display())));
    }
    Ok(curves)
}

fn cmd_penalty(args: &PenaltyArgs, out: &mut dyn Write) -> Result<i32> {
    let reference = load_curves(&args.reference)?;
    if reference.len() != 1 {
        return Err(Error::invalid(
            "reference",
            format!(
                "{} holds {} curves; expected one",
                args.reference.display(),
                reference.len()
            ),
        ));
    }
    let reference = &reference[0];
    let tests = load_curves(&args.test)?;
    let (targets, strict): (Vec<f64>, Vec<bool>) = if args.target.is_empty() {
        (vec![1e-3, 1e-4], vec![true, false])
    } else {
        (args.target.clone(), vec![true; args.target.len()])
    };
    let mut failed = false;
    for (&target, &strict) in targets.iter().zip(&strict) {
        writeln!(
            out,
            "target BER {target:e} (reference: {})",
            reference.label
        )?;
        let mut snrs = Vec::new();
        for t in &tests {
            match penalty_with_stderr(reference, t, target) {
                Ok((p, se)) => {
                    writeln!(out, "  {}: penalty {p:.3} dB (stderr {se:.3} dB)", t.label)?;
                    snrs.push(t.snr_at(target)?.0);
                    if args.max_db.is_some_and(|m| p >= m) {
                        writeln!(
                            out,
                            "  FAIL: penalty not below {} dB",
                            args.max_db.unwrap_or_default()
                        )?;
                        failed = true;
                    }
                }
                Err(e) if !strict => writeln!(out, "  {}: {e}", t.label)?,
                Err(e) => return Err(e),
            }
        }
        if snrs.len() > 1 {
            let max = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = snrs.iter().copied().fold(f64::INFINITY, f64::min);
            writeln!(
                out,
                "  spread across {} test curves: {:.3} dB",
                snrs.len(),
                max - min
            )?;
            if args.max_spread_db.is_some_and(|m| max - min >= m) {
                writeln!(
                    out,
                    "  FAIL: spread not below {} dB",
                    args.max_spread_db.unwrap_or_default()
                )?;
                failed = true;
            }
        }
    }
    Ok(if failed { EXIT_FAILED } else { EXIT_OK })
}

fn cmd_trace(args: &TraceArgs, out: &mut dyn Write) -> Result<i32> {
    let scheme: ModScheme = args.scheme.parse()?;
    let ebn0 = parse_ebn0_grid(&args.ebn0)?;
    if ebn0.len() != 1 {
        return Err(Error::invalid("ebn0", "expected a single value"));
    }
    let params = ChannelParams::new(
        scheme,
        args.n,
        parse_delta(&args.delta)?,
        parse_phi(&args.phi)?,
        ebn0[0],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let m = scheme.order();
    let xa: Vec<usize> = (0..args.n).map(|_| rng.random_range(0..m)).collect();
    let xb: Vec<usize> = (0..args.n).map(|_| rng.random_range(0..m)).collect();
    let y = transmit_indices(&xa, &xb, &params, &mut rng)?;
    writeln!(
        out,
        "{}",
        Trace::from_samples(&y, Some((&xa, &xb))).to_json()
    )?;
    Ok(EXIT_OK)
}

fn cmd_decode(args: &DecodeArgs, out: &mut dyn Write) -> Result<i32> {
    let text = fs::read_to_string(&args.trace)
        .map_err(|e| Error::Io(format!("{}: {e}", args.trace.display())))?;
    let trace = Trace::from_json(&text)?;
    let y = trace.to_samples()?;
    let scheme = y.params.scheme;
    let decoder: DecoderKind = args.decoder.parse()?;
    let (xor, posteriors) = match decoder {
        DecoderKind::Bp => {
            let d = decode_from_evidence(&EvidenceModel::new(&y.params).all_evidence(&y)?, scheme)?;
            (d.xor, Some(d.posteriors))
        }
        DecoderKind::SyncBaseline => (sync_decide_packet(&y)?, None),
    };
    let bits: String = scheme
        .unpack_indices(&xor)
        .iter()
        .map(|b| char::from(b'0' + b))
        .collect();
    writeln!(out, "xor_bits {bits}")?;
    if let Some(post) = posteriors {
        for (n, p) in post.iter().enumerate() {
            let row: Vec<String> = p[..scheme.order()]
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect();
            writeln!(out, "posterior {} {}", n + 1, row.join(" "))?;
        }
    }
    if let (Some(xa), Some(xb)) = (&trace.xa, &trace.xb) {
        if xa.len() != xor.len()
            || xb.len() != xor.len()
            || xa.iter().chain(xb).any(|&i| i >= scheme.order())
        {
            return Err(Error::invalid(
                "trace",
                "ground-truth packets do not match the samples",
            ));
        }
        let errors: u32 = xor
            .iter()
            .zip(xa.iter().zip(xb))
            .map(|(&got, (&a, &b))| scheme.bit_distance(got, scheme.xor_index(a, b)))
            .sum();
        writeln!(out, "bit_errors {errors}")?;
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_INVALID;
        }
    };
    let (result, buf) = pool.install(|| {
        let mut buf = Vec::new();
        let result = match &cli.command {
            Command::Simulate(a) => cmd_simulate(a, &mut buf),
            Command::Verify(a) => cmd_verify(a, &mut buf),
            Command::Penalty(a) => cmd_penalty(a, &mut buf),
            Command::Trace(a) => cmd_trace(a, &mut buf),
            Command::Decode(a) => cmd_decode(a, &mut buf),
        };
        (result, buf)
    });
    let _ = out.write_all(&buf);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}
