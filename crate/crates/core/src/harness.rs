//! Seeded Monte-Carlo BER estimation at the relay.
//!
//! Every packet draws its bits from its own ChaCha stream keyed by
//! `(point seed, packet index)`, and per-point seeds are derived from the
//! sweep's base seed and the point's position in the grid. Error counts are
//! integers summed by index, so results do not depend on thread count or
//! scheduling.
//!
//! The downlink is taken to be error free: end node A recovers
//! `X_B = X_R ⊕ X_A`, so the end-node BER equals the XOR BER measured here.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp_decoder::{decode_from_evidence, EvidenceModel};
use crate::channel::{transmit_indices, ChannelParams};
use crate::error::{Error, Result};
use crate::modulation::ModScheme;
use crate::oracle::sync_decide_packet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    /// Forward/backward belief propagation over all `2N + 1` samples.
    Bp,
    /// Per-symbol synchronous rule on the aligned samples only.
    SyncBaseline,
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecoderKind::Bp => f.write_str("bp"),
            DecoderKind::SyncBaseline => f.write_str("sync_baseline"),
        }
    }
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bp" => Ok(DecoderKind::Bp),
            "sync" | "sync_baseline" | "sync-baseline" => Ok(DecoderKind::SyncBaseline),
            other => Err(Error::invalid(
                "decoder",
                format!("unknown decoder `{other}`"),
            )),
        }
    }
}

/// One `(scheme, delta, phi, Eb/N0)` grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfigPoint {
    pub scheme: ModScheme,
    pub delta: f64,
    pub phi: f64,
    pub ebn0_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BerRecord {
    pub point: ConfigPoint,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub stderr: f64,
}

impl BerRecord {
    pub fn new(point: ConfigPoint, bits: u64, errors: u64) -> Self {
        let ber = if bits == 0 {
            0.0
        } else {
            errors as f64 / bits as f64
        };
        let stderr = if bits == 0 {
            0.0
        } else {
            (ber * (1.0 - ber) / bits as f64).sqrt()
        };
        BerRecord {
            point,
            bits,
            errors,
            ber,
            stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub scheme: ModScheme,
    pub deltas: Vec<f64>,
    pub phis: Vec<f64>,
    pub ebn0_db: Vec<f64>,
    pub packets: u64,
    pub bits_per_packet: usize,
    pub base_seed: u64,
    pub decoder: DecoderKind,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.packets == 0 {
            return Err(Error::invalid("packets", "must be at least 1"));
        }
        let k = self.scheme.bits_per_symbol();
        if self.bits_per_packet == 0 || !self.bits_per_packet.is_multiple_of(k) {
            return Err(Error::invalid(
                "bits",
                format!("{} is not a positive multiple of {k}", self.bits_per_packet),
            ));
        }
        for (field, list) in [
            ("delta", &self.deltas),
            ("phi", &self.phis),
            ("ebn0", &self.ebn0_db),
        ] {
            if list.is_empty() {
                return Err(Error::invalid(field, "list is empty"));
            }
        }
        for p in self.points() {
            p.params(self.bits_per_packet / k)?;
        }
        Ok(())
    }

    /// Grid points ordered by delta, then phi, then Eb/N0.
    pub fn points(&self) -> Vec<ConfigPoint> {
        let mut out = Vec::with_capacity(self.deltas.len() * self.phis.len() * self.ebn0_db.len());
        for &delta in &self.deltas {
            for &phi in &self.phis {
                for &ebn0_db in &self.ebn0_db {
                    out.push(ConfigPoint {
                        scheme: self.scheme,
                        delta,
                        phi,
                        ebn0_db,
                    });
                }
            }
        }
        out
    }
}

impl ConfigPoint {
    pub fn params(&self, n_symbols: usize) -> Result<ChannelParams> {
        ChannelParams::new(self.scheme, n_symbols, self.delta, self.phi, self.ebn0_db)
    }
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of grid point `index` under `base_seed`.
pub fn point_seed(base_seed: u64, index: u64) -> u64 {
    mix64(base_seed ^ mix64(index))
}

fn packet_rng(seed: u64, packet: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(packet);
    rng
}

fn random_bits<R: Rng>(rng: &mut R, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let word: u64 = rng.random();
        let take = (len - out.len()).min(64);
        out.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    out
}

/// Simulates one packet and returns its XOR bit errors.
pub fn simulate_packet(
    params: &ChannelParams,
    model: &EvidenceModel,
    decoder: DecoderKind,
    seed: u64,
    packet: u64,
) -> Result<u64> {
    let scheme = params.scheme;
    let bits = params.n_symbols * scheme.bits_per_symbol();
    let mut rng = packet_rng(seed, packet);
    let xa = scheme.pack_indices(&random_bits(&mut rng, bits))?;
    let xb = scheme.pack_indices(&random_bits(&mut rng, bits))?;
    let y = transmit_indices(&xa, &xb, params, &mut rng)?;
    let decided = match decoder {
        DecoderKind::Bp => decode_from_evidence(&model.all_evidence(&y)?, scheme)?.xor,
        DecoderKind::SyncBaseline => sync_decide_packet(&y)?,
    };
    Ok(decided
        .iter()
        .zip(xa.iter().zip(&xb))
        .map(|(&got, (&a, &b))| scheme.bit_distance(got, scheme.xor_index(a, b)) as u64)
        .sum())
}

/// BER at one grid point over `packets` packets of `bits_per_packet` bits.
pub fn run_point(
    point: ConfigPoint,
    packets: u64,
    bits_per_packet: usize,
    decoder: DecoderKind,
    seed: u64,
) -> Result<BerRecord> {
    let k = point.scheme.bits_per_symbol();
    if packets == 0 || bits_per_packet == 0 || !bits_per_packet.is_multiple_of(k) {
        return Err(Error::invalid(
            "bits",
            format!("{packets} packets of {bits_per_packet} bits is not a valid load"),
        ));
    }
    let params = point.params(bits_per_packet / k)?;
    let model = EvidenceModel::new(&params);
    let errors = (0..packets)
        .into_par_iter()
        .map(|p| simulate_packet(&params, &model, decoder, seed, p))
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();
    Ok(BerRecord::new(
        point,
        packets * bits_per_packet as u64,
        errors,
    ))
}

/// Runs every grid point of `config` in [`SweepConfig::points`] order.
pub fn sweep(config: &SweepConfig) -> Result<Vec<BerRecord>> {
    config.validate()?;
    config
        .points()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            run_point(
                p,
                config.packets,
                config.bits_per_packet,
                config.decoder,
                point_seed(config.base_seed, i as u64),
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub ebn0_db: f64,
    pub ber: f64,
    pub stderr: f64,
}

/// BER against Eb/N0 for one `(scheme, delta, phi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl Curve {
    pub fn new(label: impl Into<String>, mut points: Vec<CurvePoint>) -> Self {
        points.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db));
        Curve {
            label: label.into(),
            points,
        }
    }

    /// Eb/N0 where the curve crosses `target`, by linear interpolation of
    /// `log10(BER)` between the first bracketing pair of nonzero points,
    /// with its standard error propagated from the two points' binomial
    /// errors.
    pub fn snr_at(&self, target: f64) -> Result<(f64, f64)> {
        let not_bracketed = || Error::NotBracketed {
            curve: self.label.clone(),
            target,
        };
        if !(target > 0.0 && target < 1.0) {
            return Err(not_bracketed());
        }
        let pts: Vec<&CurvePoint> = self.points.iter().filter(|p| p.ber > 0.0).collect();
        for w in pts.windows(2) {
            let (p1, p2) = (w[0], w[1]);
            if p1.ber >= target && target >= p2.ber {
                let (l1, l2, lt) = (p1.ber.log10(), p2.ber.log10(), target.log10());
                if l1 == l2 {
                    return Ok((p1.ebn0_db, 0.0));
                }
                let dx = p2.ebn0_db - p1.ebn0_db;
                let x = p1.ebn0_db + (lt - l1) * dx / (l2 - l1);
                let d1 = dx * (lt - l2) / (l2 - l1).powi(2);
                let d2 = -dx * (lt - l1) / (l2 - l1).powi(2);
                let s1 = p1.stderr / (p1.ber * std::f64::consts::LN_10);
                let s2 = p2.stderr / (p2.ber * std::f64::consts::LN_10);
                return Ok((x, ((d1 * s1).powi(2) + (d2 * s2).powi(2)).sqrt()));
            }
        }
        Err(not_bracketed())
    }
}

/// Extra Eb/N0 (dB) `test` needs over `reference` to reach `target_ber`.
pub fn penalty_db(reference: &Curve, test: &Curve, target_ber: f64) -> Result<f64> {
    penalty_with_stderr(reference, test, target_ber).map(|(p, _)| p)
}

pub fn penalty_with_stderr(reference: &Curve, test: &Curve, target_ber: f64) -> Result<(f64, f64)> {
    let (r, sr) = reference.snr_at(target_ber)?;
    let (t, st) = test.snr_at(target_ber)?;
    Ok((t - r, sr.hypot(st)))
}

/// Groups records into curves keyed by `(scheme, delta, phi)`, keeping the
/// order in which keys first appear.
pub fn curves_from_records(records: &[BerRecord]) -> Vec<Curve> {
    let mut keys: Vec<(ModScheme, u64, u64)> = Vec::new();
    let mut groups: Vec<Vec<CurvePoint>> = Vec::new();
    for r in records {
        let key = (
            r.point.scheme,
            r.point.delta.to_bits(),
            r.point.phi.to_bits(),
        );
        let idx = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                groups.push(Vec::new());
                keys.len() - 1
            }
        };
        groups[idx].push(CurvePoint {
            ebn0_db: r.point.ebn0_db,
            ber: r.ber,
            stderr: r.stderr,
        });
    }
    keys.into_iter()
        .zip(groups)
        .map(|((scheme, d, p), pts)| {
            Curve::new(
                format!(
                    "{scheme} delta={} phi={}",
                    f64::from_bits(d),
                    f64::from_bits(p)
                ),
                pts,
            )
        })
        .collect()
}
