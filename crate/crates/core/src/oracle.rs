//! Reference computations the decoder is checked against.
//!
//! - [`joint_likelihood`]: log-likelihood of a full packet pair.
//! - [`brute_force_posterior`]: exhaustive enumeration over all `M^(2N)`
//!   packet pairs. Shares no code with the message-passing decoder.
//! - [`sync_bpsk_decide`] / [`sync_bpsk_ber`]: the synchronous-PNC decision
//!   rule on `y[2n]` and its BER by numerical integration.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{oversample_means, ChannelParams, SampleVector};
use crate::error::{Error, Result};
use crate::modulation::ModScheme;

/// Largest packet (in symbols) the enumeration oracle accepts.
pub const MAX_ENUM_SYMBOLS: usize = 6;

/// `ln p(Y | X_A, X_B)` for complex symbol packets. Unusable samples are
/// skipped; a noise-free channel is scored with the decoders' stand-in
/// variance.
pub fn joint_likelihood(
    y: &SampleVector,
    xa: &[Complex64],
    xb: &[Complex64],
    params: &ChannelParams,
) -> Result<f64> {
    if y.len() != params.n_samples() {
        return Err(Error::LengthMismatch {
            what: "sample vector",
            expected: params.n_samples(),
            got: y.len(),
        });
    }
    let means = oversample_means(xa, xb, params)?;
    let noise = params.decoding_noise();
    let mut ll = 0.0;
    for (i, (sample, mu)) in y.samples.iter().zip(&means).enumerate() {
        let (Some(v), Some(var)) = (sample, noise.variance(i + 1)) else {
            continue;
        };
        ll += -(v - mu).norm_sqr() / (2.0 * var) - (2.0 * PI * var).ln();
    }
    Ok(ll)
}

/// Exhaustive posterior marginals.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationPosterior {
    pub n_symbols: usize,
    pub order: usize,
    /// `nodes[k - 1]` is the marginal of node `k`'s joint symbol
    /// `(x_A[ceil(k/2)], x_B[floor(k/2)])`, laid out `a * b_dim + b` with
    /// pinned coordinates of dimension 1.
    pub nodes: Vec<Vec<f64>>,
    /// `xor[n - 1][c]` = posterior that `x_A[n] ⊕ x_B[n]` is entry `c`.
    pub xor: Vec<Vec<f64>>,
}

impl EnumerationPosterior {
    /// Marginal of `(x_A[n], x_B[n])`, `n` 1-based.
    pub fn pair(&self, n: usize) -> &[f64] {
        &self.nodes[2 * n - 1]
    }

    /// XOR-MAP decisions, lowest index on ties.
    pub fn xor_map(&self) -> Vec<usize> {
        self.xor
            .iter()
            .map(|p| {
                let mut best = 0;
                for c in 1..p.len() {
                    if p[c] > p[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Posterior given all samples.
pub fn brute_force_posterior(
    y: &SampleVector,
    params: &ChannelParams,
) -> Result<EnumerationPosterior> {
    brute_force_conditional(y, params, 1..=params.n_samples())
}

// Per-sample log-density tables over (previous variable, current variable)
// of the interleaved sequence v = (x_A[1], x_B[1], x_A[2], ..., x_B[N]).
struct Tables {
    order: usize,
    // terms[k - 1][prev * order + cur]; for k = 1 only `cur` is meaningful and
    // for k = 2N + 1 only `prev`.
    terms: Vec<Vec<f64>>,
}

fn build_tables(y: &SampleVector, params: &ChannelParams, used: &RangeInclusive<usize>) -> Tables {
    let s = params.scheme;
    let m = s.order();
    let n_samples = params.n_samples();
    let rot = params.rotation();
    let noise = params.decoding_noise();
    let zero = Complex64::new(0.0, 0.0);
    let mut terms = Vec::with_capacity(n_samples);
    for k in 1..=n_samples {
        let mut t = vec![0.0; m * m];
        let active = used.contains(&k);
        if let (true, Some(v), Some(var)) = (active, y.get(k), noise.variance(k)) {
            for prev in 0..m {
                for cur in 0..m {
                    // A symbol sits at odd positions of v, B at even ones.
                    let (a, b) = if k == 1 {
                        (s.symbol(cur), zero)
                    } else if k == n_samples {
                        (zero, s.symbol(prev))
                    } else if k % 2 == 1 {
                        (s.symbol(cur), s.symbol(prev))
                    } else {
                        (s.symbol(prev), s.symbol(cur))
                    };
                    let mu = a + b * rot;
                    t[prev * m + cur] = -(v - mu).norm_sqr() / (2.0 * var);
                }
            }
        }
        terms.push(t);
    }
    Tables { order: m, terms }
}

// Largest path log-likelihood, by max-product over the chain. Used as the
// common shift so no leaf weight overflows.
fn best_path(tables: &Tables) -> f64 {
    let m = tables.order;
    let n_vars = tables.terms.len() - 1;
    let mut best: Vec<f64> = tables.terms[0][..m].to_vec();
    for t in &tables.terms[1..n_vars] {
        best = (0..m)
            .map(|cur| {
                (0..m)
                    .map(|prev| best[prev] + t[prev * m + cur])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    (0..m)
        .map(|prev| best[prev] + tables.terms[n_vars][prev * m])
        .fold(f64::NEG_INFINITY, f64::max)
}

struct Accumulator {
    shift: f64,
    nodes: Vec<Vec<f64>>,
}

impl Accumulator {
    fn new(n_symbols: usize, order: usize, shift: f64) -> Self {
        let n_samples = 2 * n_symbols + 1;
        let nodes = (1..=n_samples)
            .map(|k| {
                let len = if k == 1 || k == n_samples {
                    order
                } else {
                    order * order
                };
                vec![0.0; len]
            })
            .collect();
        Accumulator { shift, nodes }
    }

    // Node `k` is fixed once v[0..k] is.
    fn node_index(&self, k: usize, v: &[usize], order: usize) -> usize {
        if k == 1 {
            v[0]
        } else if k == self.nodes.len() {
            v[k - 2]
        } else if k % 2 == 1 {
            // (x_A[(k+1)/2], x_B[(k-1)/2]) = (v_k, v_{k-1})
            v[k - 1] * order + v[k - 2]
        } else {
            // (x_A[k/2], x_B[k/2]) = (v_{k-1}, v_k)
            v[k - 2] * order + v[k - 1]
        }
    }

    fn merge(&mut self, other: Accumulator) {
        for (a, b) in self.nodes.iter_mut().zip(&other.nodes) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

// Sums `exp(ll - shift)` over every completion of the prefix `v[..depth]`,
// crediting each node with the weight of the paths that pass through it.
fn enumerate(
    tables: &Tables,
    depth: usize,
    v: &mut Vec<usize>,
    ll: f64,
    acc: &mut Accumulator,
) -> f64 {
    let m = tables.order;
    let n_vars = tables.terms.len() - 1;
    let total = if depth == n_vars {
        let w = (ll + tables.terms[n_vars][v[n_vars - 1] * m] - acc.shift).exp();
        let last = acc.nodes.len();
        let idx = acc.node_index(last, v, m);
        acc.nodes[last - 1][idx] += w;
        w
    } else {
        let prev = v[depth - 1];
        let mut sum = 0.0;
        for cur in 0..m {
            v[depth] = cur;
            let term = tables.terms[depth][prev * m + cur];
            sum += enumerate(tables, depth + 1, v, ll + term, acc);
        }
        sum
    };
    let idx = acc.node_index(depth, v, m);
    acc.nodes[depth - 1][idx] += total;
    total
}

/// Posterior marginals conditioned only on the samples whose 1-based index
/// lies in `samples`.
pub fn brute_force_conditional(
    y: &SampleVector,
    params: &ChannelParams,
    samples: RangeInclusive<usize>,
) -> Result<EnumerationPosterior> {
    let n = params.n_symbols;
    if n > MAX_ENUM_SYMBOLS {
        return Err(Error::TooLarge {
            n,
            max: MAX_ENUM_SYMBOLS,
        });
    }
    if y.len() != params.n_samples() {
        return Err(Error::LengthMismatch {
            what: "sample vector",
            expected: params.n_samples(),
            got: y.len(),
        });
    }
    let scheme = params.scheme;
    let m = scheme.order();
    let tables = build_tables(y, params, &samples);
    let shift = best_path(&tables);

    let parts: Vec<Accumulator> = (0..m)
        .into_par_iter()
        .map(|first| {
            let mut acc = Accumulator::new(n, m, shift);
            let mut v = vec![0; 2 * n];
            v[0] = first;
            let ll = tables.terms[0][first];
            enumerate(&tables, 1, &mut v, ll, &mut acc);
            acc
        })
        .collect();
    let mut acc = Accumulator::new(n, m, shift);
    for part in parts {
        acc.merge(part);
    }

    let nodes: Vec<Vec<f64>> = acc
        .nodes
        .into_iter()
        .map(|node| {
            let total: f64 = node.iter().sum();
            node.into_iter().map(|x| x / total).collect()
        })
        .collect();
    let xor = (1..=n)
        .map(|i| {
            let pair = &nodes[2 * i - 1];
            let mut p = vec![0.0; m];
            for a in 0..m {
                for b in 0..m {
                    p[scheme.xor_index(a, b)] += pair[a * m + b];
                }
            }
            p
        })
        .collect();
    Ok(EnumerationPosterior {
        n_symbols: n,
        order: m,
        nodes,
        xor,
    })
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Synchronous BPSK XOR decision from one aligned sample.
///
/// Chooses `+1` when `P(1,1) + P(-1,-1) >= P(1,-1) + P(-1,1)`, i.e.
/// `exp(-(y-2)^2/2s) + exp(-(y+2)^2/2s) >= 2 exp(-y^2/2s)` on `Re(y)`.
pub fn sync_bpsk_decide(y_even: Complex64, sigma2: f64) -> Complex64 {
    let y = y_even.re;
    let same = log_add_exp(
        -(y - 2.0).powi(2) / (2.0 * sigma2),
        -(y + 2.0).powi(2) / (2.0 * sigma2),
    );
    let differ = LN_2 - y * y / (2.0 * sigma2);
    if same >= differ {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(-1.0, 0.0)
    }
}

/// Synchronous baseline applied to the aligned samples `y[2n]` only.
///
/// QPSK is treated as two parallel BPSK decisions, one per component.
pub fn sync_decide_packet(y: &SampleVector) -> Result<Vec<usize>> {
    let params = &y.params;
    if y.len() != params.n_samples() {
        return Err(Error::LengthMismatch {
            what: "sample vector",
            expected: params.n_samples(),
            got: y.len(),
        });
    }
    let var = params.decoding_noise().even_variance();
    let scheme = params.scheme;
    (1..=params.n_symbols)
        .map(|n| {
            let v = y.get(2 * n).ok_or_else(|| {
                Error::invalid("samples", format!("aligned sample {} is unusable", 2 * n))
            })?;
            let bit =
                |z: f64, s2: f64| u8::from(sync_bpsk_decide(Complex64::new(z, 0.0), s2).re < 0.0);
            let word = match scheme.bits_per_symbol() {
                1 => bit(v.re, var),
                _ => bit(SQRT_2 * v.re, 2.0 * var) | (bit(SQRT_2 * v.im, 2.0 * var) << 1),
            };
            Ok(scheme.index_of_word(word))
        })
        .collect()
}

/// `|Re(y)|` threshold of [`sync_bpsk_decide`]: `+1` iff `|y| >= t`.
///
/// Solves `cosh(2t/s) = exp(2/s)` in a form that does not overflow.
pub fn sync_bpsk_threshold(sigma2: f64) -> f64 {
    1.0 + 0.5 * sigma2 * (1.0 + (1.0 - (-4.0 / sigma2).exp()).sqrt()).ln()
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, eps: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, eps, 50)
}

const QUAD_TOL: f64 = 1e-10;
const TAIL_SIGMAS: f64 = 12.0;

/// Probability that `N(mean, sigma2)` lands in `[lo, hi]`, by quadrature.
fn gaussian_mass(mean: f64, sigma2: f64, lo: f64, hi: f64, eps: f64) -> f64 {
    let sd = sigma2.sqrt();
    let lo = lo.max(mean - TAIL_SIGMAS * sd);
    let hi = hi.min(mean + TAIL_SIGMAS * sd);
    let norm = 1.0 / (2.0 * PI * sigma2).sqrt();
    integrate(
        |x| norm * (-(x - mean).powi(2) / (2.0 * sigma2)).exp(),
        lo,
        hi,
        eps,
    )
}

/// BER of the synchronous BPSK baseline, integrated over the decision
/// regions for the four equiprobable `(x_A, x_B)` pairs.
pub fn sync_bpsk_ber(ebn0_db: f64) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    let sigma2 = 1.0 / (2.0 * 10f64.powf(ebn0_db / 10.0));
    let t = sync_bpsk_threshold(sigma2);
    let eps = QUAD_TOL / 8.0;
    // x_A = x_B: means +2 and -2, error when |y| < t
    let same: f64 = [2.0, -2.0]
        .iter()
        .map(|&mu| gaussian_mass(mu, sigma2, -t, t, eps))
        .sum();
    // x_A != x_B: mean 0 for both pairs, error when |y| >= t
    let differ = 2.0
        * (gaussian_mass(0.0, sigma2, t, f64::INFINITY, eps)
            + gaussian_mass(0.0, sigma2, f64::NEG_INFINITY, -t, eps));
    (same + differ) / 4.0
}

/// Convenience used by the verification command and tests: the scheme's
/// index packets as complex symbols.
pub fn symbols(scheme: ModScheme, indices: &[usize]) -> Vec<Complex64> {
    indices.iter().map(|&i| scheme.symbol(i)).collect()
}
