//! Asynchronous uplink model.
//!
//! Node B's packet arrives `delta` symbol periods after node A's and rotated
//! by `phi`. With rectangular pulses, integrate-and-dump over the `delta`-long
//! and `(1 - delta)`-long pieces of every symbol period yields `2N + 1`
//! complex samples (1-based `k`):
//!
//! ```text
//! y[2n-1] = x_A[n] + x_B[n-1] e^{j phi} + w[2n-1]     (x_B[0] = 0)
//! y[2n]   = x_A[n] + x_B[n]   e^{j phi} + w[2n]
//! y[2N+1] =          x_B[N]   e^{j phi} + w[2N+1]
//! ```
//!
//! Noise is complex Gaussian with per-component variance `sigma2 / delta` on
//! odd samples (including `2N + 1`) and `sigma2 / (1 - delta)` on even ones.
//! When `delta` is zero the odd samples carry no signal and are emitted as
//! unusable (`None`).

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modulation::ModScheme;

/// Offsets below this are treated as exactly zero.
pub const DELTA_EPS: f64 = 1e-9;

/// Stand-in per-component variance for decoding a noise-free channel.
pub const NOISE_FREE_SIGMA2: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub scheme: ModScheme,
    pub n_symbols: usize,
    /// Symbol offset in symbol periods, `0 <= delta < 1`.
    pub delta: f64,
    /// Phase offset in radians, `0 <= phi < 2 pi`.
    pub phi: f64,
    /// Per-bit SNR in dB; `f64::INFINITY` means noise free.
    pub ebn0_db: f64,
}

impl ChannelParams {
    /// Validates and normalises a parameter set.
    ///
    /// `delta` below [`DELTA_EPS`] snaps to 0 and `phi` is wrapped into
    /// `[0, 2 pi)`.
    pub fn new(
        scheme: ModScheme,
        n_symbols: usize,
        delta: f64,
        phi: f64,
        ebn0_db: f64,
    ) -> Result<Self> {
        if n_symbols == 0 {
            return Err(Error::invalid("n_symbols", "must be at least 1"));
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::invalid(
                "delta",
                format!("{delta} is outside [0, 1)"),
            ));
        }
        if delta > 1.0 - DELTA_EPS {
            return Err(Error::invalid(
                "delta",
                format!("{delta} is outside [0, 1); an offset of one symbol is delta = 0 with the roles of A and B swapped"),
            ));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", format!("{phi} is not finite")));
        }
        if ebn0_db.is_nan() || ebn0_db == f64::NEG_INFINITY {
            return Err(Error::invalid(
                "ebn0_db",
                format!("{ebn0_db} is not a usable SNR"),
            ));
        }
        let delta = if delta < DELTA_EPS { 0.0 } else { delta };
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(ChannelParams {
            scheme,
            n_symbols,
            delta,
            phi,
            ebn0_db,
        })
    }

    pub fn with_ebn0(&self, ebn0_db: f64) -> Result<Self> {
        Self::new(self.scheme, self.n_symbols, self.delta, self.phi, ebn0_db)
    }

    pub fn with_n_symbols(&self, n_symbols: usize) -> Result<Self> {
        Self::new(self.scheme, n_symbols, self.delta, self.phi, self.ebn0_db)
    }

    pub fn n_samples(&self) -> usize {
        2 * self.n_symbols + 1
    }

    pub fn is_noise_free(&self) -> bool {
        self.ebn0_db == f64::INFINITY
    }

    /// True when odd samples (and sample `2N + 1`) carry no usable signal.
    pub fn odd_samples_unusable(&self) -> bool {
        self.delta == 0.0
    }

    /// `e^{j phi}`.
    pub fn rotation(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.phi)
    }

    /// Per-component noise variance before oversampling.
    ///
    /// Symbols are unit energy, so `Es = Eb` for BPSK and `Es = 2 Eb` for
    /// QPSK: `sigma2 = 1 / (2 * bits_per_symbol * Eb/N0)`.
    pub fn sigma2_base(&self) -> Result<f64> {
        if self.is_noise_free() {
            return Err(Error::NoiseFree);
        }
        let ebn0 = 10f64.powf(self.ebn0_db / 10.0);
        Ok(1.0 / (2.0 * self.scheme.bits_per_symbol() as f64 * ebn0))
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma2_base: self.sigma2_base().unwrap_or(0.0),
            delta: self.delta,
        }
    }

    /// Noise model used by decoders; a noise-free channel is decoded as the
    /// limit of a vanishing variance.
    pub fn decoding_noise(&self) -> NoiseModel {
        NoiseModel {
            sigma2_base: self.sigma2_base().unwrap_or(NOISE_FREE_SIGMA2),
            delta: self.delta,
        }
    }
}

/// Sample-dependent noise variances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub sigma2_base: f64,
    pub delta: f64,
}

impl NoiseModel {
    /// Per-component variance on odd samples; `None` when infinite.
    pub fn odd_variance(&self) -> Option<f64> {
        (self.delta > 0.0).then(|| self.sigma2_base / self.delta)
    }

    pub fn even_variance(&self) -> f64 {
        self.sigma2_base / (1.0 - self.delta)
    }

    /// Variance of 1-based sample `k`; odd `k` covers the final sample too.
    pub fn variance(&self, k: usize) -> Option<f64> {
        if k % 2 == 1 {
            self.odd_variance()
        } else {
            Some(self.even_variance())
        }
    }
}

/// The `2N + 1` oversampled relay observations.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleVector {
    /// `samples[k - 1]` is `y[k]`; `None` marks an infinite-variance sample.
    pub samples: Vec<Option<Complex64>>,
    pub params: ChannelParams,
}

impl SampleVector {
    pub fn new(samples: Vec<Option<Complex64>>, params: ChannelParams) -> Result<Self> {
        if samples.len() != params.n_samples() {
            return Err(Error::LengthMismatch {
                what: "sample vector",
                expected: params.n_samples(),
                got: samples.len(),
            });
        }
        Ok(SampleVector { samples, params })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample `y[k]`, 1-based.
    pub fn get(&self, k: usize) -> Option<Complex64> {
        self.samples[k - 1]
    }
}

fn check_lengths(xa: usize, xb: usize, params: &ChannelParams) -> Result<()> {
    for (what, got) in [("packet A", xa), ("packet B", xb)] {
        if got != params.n_symbols {
            return Err(Error::LengthMismatch {
                what,
                expected: params.n_symbols,
                got,
            });
        }
    }
    Ok(())
}

/// Noise-free sample means for complex symbol packets.
pub fn oversample_means(
    xa: &[Complex64],
    xb: &[Complex64],
    params: &ChannelParams,
) -> Result<Vec<Complex64>> {
    check_lengths(xa.len(), xb.len(), params)?;
    let rot = params.rotation();
    let n = params.n_symbols;
    let mut means = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        let prev_b = if i == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            xb[i - 1]
        };
        means.push(xa[i] + prev_b * rot);
        means.push(xa[i] + xb[i] * rot);
    }
    means.push(xb[n - 1] * rot);
    Ok(means)
}

/// Passes two packets through the asynchronous channel.
pub fn transmit<R: Rng + ?Sized>(
    xa: &[Complex64],
    xb: &[Complex64],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<SampleVector> {
    let means = oversample_means(xa, xb, params)?;
    let noise = params.noise();
    let noise_free = params.is_noise_free();
    let samples = means
        .into_iter()
        .enumerate()
        .map(|(i, mean)| {
            let var = noise.variance(i + 1)?;
            if noise_free {
                return Some(mean);
            }
            let sd = var.sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Some(mean + Complex64::new(sd * re, sd * im))
        })
        .collect();
    Ok(SampleVector {
        samples,
        params: *params,
    })
}

/// [`transmit`] for packets given as alphabet indices.
pub fn transmit_indices<R: Rng + ?Sized>(
    xa: &[usize],
    xb: &[usize],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<SampleVector> {
    let s = params.scheme;
    let a: Vec<Complex64> = xa.iter().map(|&i| s.symbol(i)).collect();
    let b: Vec<Complex64> = xb.iter().map(|&i| s.symbol(i)).collect();
    transmit(&a, &b, params, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn sigma2_base_values() {
        let p = |s, db| ChannelParams::new(s, 4, 0.0, 0.0, db).unwrap();
        assert!((p(ModScheme::bpsk(), 0.0).sigma2_base().unwrap() - 0.5).abs() < 1e-15);
        assert!((p(ModScheme::qpsk(), 0.0).sigma2_base().unwrap() - 0.25).abs() < 1e-15);
        assert!((p(ModScheme::bpsk(), 10.0).sigma2_base().unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(
            p(ModScheme::bpsk(), f64::INFINITY).sigma2_base(),
            Err(Error::NoiseFree)
        );
    }

    #[test]
    fn parameter_validation() {
        let s = ModScheme::bpsk();
        assert!(ChannelParams::new(s, 0, 0.0, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(s, 1, 1.0, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(s, 1, -0.1, 0.0, 0.0).is_err());
        assert!(ChannelParams::new(s, 1, 0.5, f64::NAN, 0.0).is_err());
        assert!(ChannelParams::new(s, 1, 0.5, 0.0, f64::NAN).is_err());
        let p = ChannelParams::new(s, 1, 1e-12, 0.0, 0.0).unwrap();
        assert_eq!(p.delta, 0.0);
        assert!(p.odd_samples_unusable());
    }

    #[test]
    fn bpsk_means_single_symbol() {
        let p = ChannelParams::new(ModScheme::bpsk(), 1, 0.3, FRAC_PI_2, 5.0).unwrap();
        let m = oversample_means(&[c(1.0, 0.0)], &[c(-1.0, 0.0)], &p).unwrap();
        assert_eq!(m.len(), 3);
        assert!(close(m[0], c(1.0, 0.0), 1e-15));
        assert!(close(m[1], c(1.0, -1.0), 1e-15));
        assert!(close(m[2], c(0.0, -1.0), 1e-15));
    }

    #[test]
    fn constellation_point_at_quarter_pi() {
        // joint symbol (1+j, -1-j) at amplitude sqrt(2) lands on 1 + (1 - sqrt 2) j
        let p = ChannelParams::new(ModScheme::qpsk(), 1, 0.5, FRAC_PI_4, 5.0).unwrap();
        let r = FRAC_1_SQRT_2;
        let m = oversample_means(&[c(r, r)], &[c(-r, -r)], &p).unwrap();
        assert!(close(m[1] * SQRT_2, c(1.0, 1.0 - SQRT_2), 1e-12));
    }

    #[test]
    fn zero_phase_even_means_add() {
        let p = ChannelParams::new(ModScheme::qpsk(), 3, 0.7, 0.0, 5.0).unwrap();
        let s = ModScheme::qpsk();
        let xa = [s.symbol(0), s.symbol(2), s.symbol(3)];
        let xb = [s.symbol(1), s.symbol(1), s.symbol(0)];
        let m = oversample_means(&xa, &xb, &p).unwrap();
        for n in 0..3 {
            assert_eq!(m[2 * n + 1], xa[n] + xb[n]);
        }
    }

    #[test]
    fn means_reject_length_mismatch() {
        let p = ChannelParams::new(ModScheme::bpsk(), 2, 0.5, 0.0, 5.0).unwrap();
        assert!(matches!(
            oversample_means(&[c(1.0, 0.0)], &[c(1.0, 0.0), c(1.0, 0.0)], &p),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn noise_free_transmit_is_exact() {
        let p = ChannelParams::new(ModScheme::qpsk(), 5, 0.25, 1.0, f64::INFINITY).unwrap();
        let s = ModScheme::qpsk();
        let xa: Vec<_> = [0, 1, 2, 3, 0].iter().map(|&i| s.symbol(i)).collect();
        let xb: Vec<_> = [3, 3, 1, 0, 2].iter().map(|&i| s.symbol(i)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = transmit(&xa, &xb, &p, &mut rng).unwrap();
        let m = oversample_means(&xa, &xb, &p).unwrap();
        assert_eq!(y.len(), 11);
        for (got, want) in y.samples.iter().zip(&m) {
            assert_eq!(got.unwrap(), *want);
        }
    }

    #[test]
    fn half_offset_variances_match() {
        let p = ChannelParams::new(ModScheme::bpsk(), 1, 0.5, 0.0, 3.0).unwrap();
        let nm = p.noise();
        let s2 = p.sigma2_base().unwrap();
        assert!((nm.odd_variance().unwrap() - 2.0 * s2).abs() < 1e-15);
        assert!((nm.even_variance() - 2.0 * s2).abs() < 1e-15);
    }

    #[test]
    fn zero_offset_marks_odd_samples() {
        let p = ChannelParams::new(ModScheme::bpsk(), 4, 0.0, 0.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = vec![c(1.0, 0.0); 4];
        let y = transmit(&x, &x, &p, &mut rng).unwrap();
        for k in 1..=9 {
            assert_eq!(y.get(k).is_none(), k % 2 == 1, "sample {k}");
        }
    }

    #[test]
    fn empirical_variance_law() {
        let s = ModScheme::qpsk();
        let p = ChannelParams::new(s, 1000, 0.3, 0.4, 2.0).unwrap();
        let nm = p.noise();
        let xa: Vec<_> = (0..1000).map(|i| s.symbol(i % 4)).collect();
        let xb: Vec<_> = (0..1000).map(|i| s.symbol((i / 4) % 4)).collect();
        let m = oversample_means(&xa, &xb, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (mut odd, mut even, mut n_odd, mut n_even) = (0.0, 0.0, 0usize, 0usize);
        for _ in 0..100 {
            let y = transmit(&xa, &xb, &p, &mut rng).unwrap();
            for (k, (v, mu)) in y.samples.iter().zip(&m).enumerate() {
                let d = v.unwrap() - mu;
                let sq = d.re * d.re + d.im * d.im;
                if (k + 1) % 2 == 1 {
                    odd += sq;
                    n_odd += 2;
                } else {
                    even += sq;
                    n_even += 2;
                }
            }
        }
        let odd = odd / n_odd as f64;
        let even = even / n_even as f64;
        assert!(
            (odd / nm.odd_variance().unwrap() - 1.0).abs() < 0.03,
            "odd {odd}"
        );
        assert!(
            (even / nm.even_variance() - 1.0).abs() < 0.03,
            "even {even}"
        );
    }

    #[test]
    fn quarter_turn_is_relabelling() {
        let s = ModScheme::qpsk();
        let j = c(0.0, 1.0);
        let xa: Vec<_> = [0, 3, 1, 2].iter().map(|&i| s.symbol(i)).collect();
        let xb: Vec<_> = [2, 2, 0, 1].iter().map(|&i| s.symbol(i)).collect();
        let jxb: Vec<_> = xb.iter().map(|&b| j * b).collect();
        for &phi in &[0.0, 0.3, FRAC_PI_4, 2.0] {
            let p1 = ChannelParams::new(s, 4, 0.4, phi + FRAC_PI_2, 1.0).unwrap();
            let p0 = ChannelParams::new(s, 4, 0.4, phi, 1.0).unwrap();
            let m1 = oversample_means(&xa, &xb, &p1).unwrap();
            let m0 = oversample_means(&xa, &jxb, &p0).unwrap();
            for (u, v) in m1.iter().zip(&m0) {
                assert!(close(*u, *v, 1e-14));
            }
            for b in &jxb {
                assert!(s.index_of(*b).is_ok());
            }
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let s = ModScheme::bpsk();
        let p = ChannelParams::new(s, 16, 0.5, 1.0, 4.0).unwrap();
        let x = vec![s.symbol(0); 16];
        let a = transmit(&x, &x, &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = transmit(&x, &x, &p, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
