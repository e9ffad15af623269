//! Exact sum-product decoding on the chain factor graph of the oversampled
//! relay signal.
//!
//! Sample `k` (1-based, `1..=2N+1`) observes the joint symbol
//! `(x_A[ceil(k/2)], x_B[floor(k/2)])`. Node 1 has no B symbol and node
//! `2N + 1` has no A symbol; those coordinates are pinned to zero and stored
//! with dimension 1. Neighbouring nodes share exactly one symbol: `x_A` on
//! the edge `(k, k+1)` for odd `k`, `x_B` for even `k`. The graph is a chain,
//! so one right-bound and one left-bound sweep give exact posteriors.
//!
//! Everything is kept in the log domain and renormalised after every update.

use num_complex::Complex64;

use crate::channel::{ChannelParams, SampleVector};
use crate::error::{Error, Result};
use crate::modulation::{ModScheme, MAX_ORDER};

const MAX_JOINT: usize = MAX_ORDER * MAX_ORDER;

/// Normalised log-probabilities over the joint symbol `(a, b)` of one node.
///
/// Entry `(a, b)` lives at `a * b_dim + b`. A pinned coordinate has
/// dimension 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLog {
    a_dim: u8,
    b_dim: u8,
    w: [f64; MAX_JOINT],
}

impl JointLog {
    pub fn uniform(a_dim: usize, b_dim: usize) -> Self {
        let v = -((a_dim * b_dim) as f64).ln();
        let mut w = [f64::NEG_INFINITY; MAX_JOINT];
        w[..a_dim * b_dim].fill(v);
        JointLog {
            a_dim: a_dim as u8,
            b_dim: b_dim as u8,
            w,
        }
    }

    /// Builds a normalised distribution from unnormalised log weights.
    pub fn from_log_weights(a_dim: usize, b_dim: usize, log_w: &[f64]) -> Result<Self> {
        if a_dim == 0 || b_dim == 0 || a_dim > MAX_ORDER || b_dim > MAX_ORDER {
            return Err(Error::invalid(
                "joint dimensions",
                format!("{a_dim}x{b_dim}"),
            ));
        }
        if log_w.len() != a_dim * b_dim {
            return Err(Error::LengthMismatch {
                what: "log weights",
                expected: a_dim * b_dim,
                got: log_w.len(),
            });
        }
        let mut w = [f64::NEG_INFINITY; MAX_JOINT];
        w[..log_w.len()].copy_from_slice(log_w);
        let mut out = JointLog {
            a_dim: a_dim as u8,
            b_dim: b_dim as u8,
            w,
        };
        out.normalize();
        Ok(out)
    }

    pub fn a_dim(&self) -> usize {
        self.a_dim as usize
    }

    pub fn b_dim(&self) -> usize {
        self.b_dim as usize
    }

    pub fn len(&self) -> usize {
        self.a_dim() * self.b_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.w[..self.len()]
    }

    pub fn log_prob(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.b_dim() + b]
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.log_prob(a, b).exp()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights().iter().map(|x| x.exp()).collect()
    }

    /// Shifted exponentials `exp(w - max)` and their sum.
    fn exp_shifted(&self) -> ([f64; MAX_JOINT], f64, f64) {
        let len = self.len();
        let max = self.w[..len]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut e = [0.0; MAX_JOINT];
        let mut total = 0.0;
        for (dst, &x) in e[..len].iter_mut().zip(&self.w[..len]) {
            *dst = (x - max).exp();
            total += *dst;
        }
        (e, total, max)
    }

    fn normalize(&mut self) {
        let (_, total, max) = self.exp_shifted();
        let shift = max + total.ln();
        let len = self.len();
        for x in &mut self.w[..len] {
            *x -= shift;
        }
    }

    /// Pointwise product of distributions of the same shape, normalised.
    /// Also returns the normalised linear probabilities.
    fn product(&self, other: &JointLog) -> (JointLog, [f64; MAX_JOINT]) {
        debug_assert_eq!((self.a_dim, self.b_dim), (other.a_dim, other.b_dim));
        let len = self.len();
        let mut out = *self;
        for (x, y) in out.w[..len].iter_mut().zip(&other.w[..len]) {
            *x += y;
        }
        let (mut e, total, max) = out.exp_shifted();
        let shift = max + total.ln();
        for (x, p) in out.w[..len].iter_mut().zip(&mut e[..len]) {
            *x -= shift;
            *p /= total;
        }
        (out, e)
    }
}

/// Symbol shared by the edge between node `k` and node `k + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shared {
    A,
    B,
}

fn shared_on_edge(k: usize) -> Shared {
    if k % 2 == 1 {
        Shared::A
    } else {
        Shared::B
    }
}

/// Joint-symbol shape of node `k` in a chain of `2N + 1` nodes.
pub fn node_shape(k: usize, n_symbols: usize, order: usize) -> (usize, usize) {
    if k == 1 {
        (order, 1)
    } else if k == 2 * n_symbols + 1 {
        (1, order)
    } else {
        (order, order)
    }
}

const UNDERFLOW_GUARD: f64 = 1e-250;

/// Log-sum-exp of the entries of `from` whose `keep` coordinate equals `s`.
fn group_log_sum(from: &JointLog, keep: Shared, s: usize) -> f64 {
    let (fa, fb) = (from.a_dim(), from.b_dim());
    let entry = |other: usize| match keep {
        Shared::A => from.w[s * fb + other],
        Shared::B => from.w[other * fb + s],
    };
    let others = match keep {
        Shared::A => fb,
        Shared::B => fa,
    };
    let max = (0..others).map(entry).fold(f64::NEG_INFINITY, f64::max);
    max + (0..others)
        .map(|o| (entry(o) - max).exp())
        .sum::<f64>()
        .ln()
}

/// Sums linear probabilities over the coordinate not in `keep` and builds the
/// replicated, normalised message for a node of shape `(a_dim, b_dim)`.
fn pass_through(
    from: &JointLog,
    probs: &[f64; MAX_JOINT],
    keep: Shared,
    a_dim: usize,
    b_dim: usize,
) -> JointLog {
    let (fa, fb) = (from.a_dim(), from.b_dim());
    let mut marginal = [0.0; MAX_ORDER];
    for a in 0..fa {
        for b in 0..fb {
            let p = probs[a * fb + b];
            match keep {
                Shared::A => marginal[a] += p,
                Shared::B => marginal[b] += p,
            }
        }
    }
    let fresh = match keep {
        Shared::A => b_dim,
        Shared::B => a_dim,
    };
    let fresh_ln = (fresh as f64).ln();
    // `probs` is normalised, so the marginal sums to one already.
    let kept = match keep {
        Shared::A => fa,
        Shared::B => fb,
    };
    let mut log_m = [0.0; MAX_ORDER];
    for s in 0..kept {
        let lm = if marginal[s] > UNDERFLOW_GUARD {
            marginal[s].ln()
        } else {
            group_log_sum(from, keep, s)
        };
        log_m[s] = lm - fresh_ln;
    }
    let mut w = [f64::NEG_INFINITY; MAX_JOINT];
    for a in 0..a_dim {
        for b in 0..b_dim {
            w[a * b_dim + b] = match keep {
                Shared::A => log_m[a],
                Shared::B => log_m[b],
            };
        }
    }
    JointLog {
        a_dim: a_dim as u8,
        b_dim: b_dim as u8,
        w,
    }
}

/// Local evidence `p_k(a, b)` computed from `y[k]` alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvidenceVector {
    /// 1-based node index.
    pub node: usize,
    pub weights: JointLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    RightBound,
    LeftBound,
}

/// Messages from one sweep.
///
/// `incoming[k - 1]` is the message arriving at node `k` from the sweep's
/// upstream side (`Q_k` for the right-bound sweep); `combined[k - 1]` is
/// that message multiplied by the node's evidence (`R_k`).
#[derive(Clone, Debug, PartialEq)]
pub struct MessageVector {
    pub direction: Direction,
    pub incoming: Vec<JointLog>,
    pub combined: Vec<JointLog>,
}

/// Posterior of the aligned pair `(x_A[n], x_B[n])` at node `2n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Belief {
    pub node: usize,
    pub joint: JointLog,
    /// `xor[c]` = posterior that `x_A[n] ⊕ x_B[n]` is alphabet entry `c`.
    pub xor: [f64; MAX_ORDER],
}

/// Precomputed means and variances for evidence evaluation.
#[derive(Clone, Debug)]
pub struct EvidenceModel {
    params: ChannelParams,
    order: usize,
    /// mean of `a + b e^{j phi}` at `a * order + b`
    joint_means: [Complex64; MAX_JOINT],
    first_means: [Complex64; MAX_ORDER],
    last_means: [Complex64; MAX_ORDER],
    odd_scale: Option<f64>,
    even_scale: f64,
}

impl EvidenceModel {
    pub fn new(params: &ChannelParams) -> Self {
        let scheme = params.scheme;
        let order = scheme.order();
        let rot = params.rotation();
        let mut joint_means = [Complex64::new(0.0, 0.0); MAX_JOINT];
        let mut first_means = [Complex64::new(0.0, 0.0); MAX_ORDER];
        let mut last_means = [Complex64::new(0.0, 0.0); MAX_ORDER];
        for a in 0..order {
            first_means[a] = scheme.symbol(a);
            last_means[a] = scheme.symbol(a) * rot;
            for b in 0..order {
                joint_means[a * order + b] = scheme.symbol(a) + scheme.symbol(b) * rot;
            }
        }
        let noise = params.decoding_noise();
        EvidenceModel {
            params: *params,
            order,
            joint_means,
            first_means,
            last_means,
            odd_scale: noise.odd_variance().map(|v| -0.5 / v),
            even_scale: -0.5 / noise.even_variance(),
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn evidence(&self, y: Option<Complex64>, k: usize) -> Result<EvidenceVector> {
        let n = self.params.n_symbols;
        if k == 0 || k > 2 * n + 1 {
            return Err(Error::invalid(
                "node",
                format!("{k} is outside 1..={}", 2 * n + 1),
            ));
        }
        let (a_dim, b_dim) = node_shape(k, n, self.order);
        let scale = if k % 2 == 1 {
            self.odd_scale
        } else {
            Some(self.even_scale)
        };
        let (y, scale) = match (y, scale) {
            (Some(y), Some(s)) => (y, s),
            _ => {
                return Ok(EvidenceVector {
                    node: k,
                    weights: JointLog::uniform(a_dim, b_dim),
                })
            }
        };
        let means: &[Complex64] = if k == 1 {
            &self.first_means[..self.order]
        } else if k == 2 * n + 1 {
            &self.last_means[..self.order]
        } else {
            &self.joint_means[..self.order * self.order]
        };
        let mut w = [f64::NEG_INFINITY; MAX_JOINT];
        for (dst, mu) in w.iter_mut().zip(means) {
            *dst = scale * (y - mu).norm_sqr();
        }
        let mut weights = JointLog {
            a_dim: a_dim as u8,
            b_dim: b_dim as u8,
            w,
        };
        weights.normalize();
        Ok(EvidenceVector { node: k, weights })
    }

    pub fn all_evidence(&self, y: &SampleVector) -> Result<Vec<EvidenceVector>> {
        if y.len() != self.params.n_samples() {
            return Err(Error::LengthMismatch {
                what: "sample vector",
                expected: self.params.n_samples(),
                got: y.len(),
            });
        }
        y.samples
            .iter()
            .enumerate()
            .map(|(i, &s)| self.evidence(s, i + 1))
            .collect()
    }
}

/// Evidence for one sample; see [`EvidenceModel`] for repeated use.
pub fn compute_evidence(
    y: Option<Complex64>,
    k: usize,
    params: &ChannelParams,
) -> Result<EvidenceVector> {
    EvidenceModel::new(params).evidence(y, k)
}

fn check_chain(evidence: &[EvidenceVector]) -> Result<usize> {
    let len = evidence.len();
    if len < 3 || len.is_multiple_of(2) {
        return Err(Error::invalid(
            "evidence",
            format!("{len} nodes is not of the form 2N+1 with N >= 1"),
        ));
    }
    let n = (len - 1) / 2;
    let order = evidence[1].weights.a_dim();
    for (i, e) in evidence.iter().enumerate() {
        let k = i + 1;
        let shape = (e.weights.a_dim(), e.weights.b_dim());
        if e.node != k || shape != node_shape(k, n, order) {
            return Err(Error::invalid(
                "evidence",
                format!("node {k} has index {} and shape {shape:?}", e.node),
            ));
        }
    }
    Ok(order)
}

/// Right-bound sweep from node 1 to node `2N + 1`.
pub fn forward_pass(evidence: &[EvidenceVector]) -> Result<MessageVector> {
    check_chain(evidence)?;
    Ok(forward_unchecked(evidence))
}

fn forward_unchecked(evidence: &[EvidenceVector]) -> MessageVector {
    let len = evidence.len();
    let mut incoming = Vec::with_capacity(len);
    let mut combined = Vec::with_capacity(len);
    let first = &evidence[0].weights;
    let mut q = JointLog::uniform(first.a_dim(), first.b_dim());
    for (i, ev) in evidence.iter().enumerate() {
        let k = i + 1;
        let (r, probs) = ev.weights.product(&q);
        incoming.push(q);
        combined.push(r);
        if k < len {
            let next = &evidence[i + 1].weights;
            q = pass_through(&r, &probs, shared_on_edge(k), next.a_dim(), next.b_dim());
        }
    }
    MessageVector {
        direction: Direction::RightBound,
        incoming,
        combined,
    }
}

/// Left-bound sweep from node `2N + 1` to node 1.
pub fn backward_pass(evidence: &[EvidenceVector]) -> Result<MessageVector> {
    check_chain(evidence)?;
    Ok(backward_unchecked(evidence))
}

fn backward_unchecked(evidence: &[EvidenceVector]) -> MessageVector {
    let len = evidence.len();
    let mut incoming = vec![JointLog::uniform(1, 1); len];
    let mut combined = vec![JointLog::uniform(1, 1); len];
    let last = &evidence[len - 1].weights;
    let mut m = JointLog::uniform(last.a_dim(), last.b_dim());
    for i in (0..len).rev() {
        let k = i + 1;
        let (s, probs) = evidence[i].weights.product(&m);
        incoming[i] = m;
        combined[i] = s;
        if k > 1 {
            let prev = &evidence[i - 1].weights;
            m = pass_through(
                &s,
                &probs,
                shared_on_edge(k - 1),
                prev.a_dim(),
                prev.b_dim(),
            );
        }
    }
    MessageVector {
        direction: Direction::LeftBound,
        incoming,
        combined,
    }
}

fn belief_at(
    evidence: &EvidenceVector,
    fwd: &JointLog,
    bwd: &JointLog,
    scheme: ModScheme,
) -> Belief {
    let (partial, _) = evidence.weights.product(fwd);
    let (joint, probs) = partial.product(bwd);
    let m = scheme.order();
    let mut xor = [0.0; MAX_ORDER];
    for a in 0..m {
        for b in 0..m {
            xor[scheme.xor_index(a, b)] += probs[a * m + b];
        }
    }
    Belief {
        node: evidence.node,
        joint,
        xor,
    }
}

/// Posteriors of the aligned pairs, one per even node `2n`, `n = 1..=N`.
pub fn beliefs(
    evidence: &[EvidenceVector],
    fwd: &MessageVector,
    bwd: &MessageVector,
    scheme: ModScheme,
) -> Result<Vec<Belief>> {
    let order = check_chain(evidence)?;
    if order != scheme.order() {
        return Err(Error::invalid(
            "scheme",
            "alphabet size does not match the evidence",
        ));
    }
    if fwd.direction != Direction::RightBound || bwd.direction != Direction::LeftBound {
        return Err(Error::invalid(
            "messages",
            "expected one right-bound and one left-bound sweep",
        ));
    }
    for msgs in [fwd, bwd] {
        if msgs.incoming.len() != evidence.len() {
            return Err(Error::LengthMismatch {
                what: "messages",
                expected: evidence.len(),
                got: msgs.incoming.len(),
            });
        }
    }
    Ok(beliefs_unchecked(evidence, fwd, bwd, scheme))
}

fn beliefs_unchecked(
    evidence: &[EvidenceVector],
    fwd: &MessageVector,
    bwd: &MessageVector,
    scheme: ModScheme,
) -> Vec<Belief> {
    (1..evidence.len())
        .step_by(2)
        .map(|i| belief_at(&evidence[i], &fwd.incoming[i], &bwd.incoming[i], scheme))
        .collect()
}

/// XOR-MAP decision per symbol; ties go to the lowest alphabet index.
pub fn decode_xor(beliefs: &[Belief], scheme: ModScheme) -> Vec<usize> {
    let m = scheme.order();
    beliefs
        .iter()
        .map(|b| {
            let mut best = 0;
            for c in 1..m {
                if b.xor[c] > b.xor[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedPacket {
    /// Alphabet indices of `x_A[n] ⊕ x_B[n]`.
    pub xor: Vec<usize>,
    /// Per-symbol XOR posteriors; only the first `order` entries are used.
    pub posteriors: Vec<[f64; MAX_ORDER]>,
}

impl DecodedPacket {
    pub fn symbols(&self, scheme: ModScheme) -> Vec<Complex64> {
        self.xor.iter().map(|&i| scheme.symbol(i)).collect()
    }
}

/// Runs both sweeps over precomputed evidence and decides the XOR packet.
pub fn decode_from_evidence(
    evidence: &[EvidenceVector],
    scheme: ModScheme,
) -> Result<DecodedPacket> {
    let order = check_chain(evidence)?;
    if order != scheme.order() {
        return Err(Error::invalid(
            "scheme",
            "alphabet size does not match the evidence",
        ));
    }
    let fwd = forward_unchecked(evidence);
    let bwd = backward_unchecked(evidence);
    let bel = beliefs_unchecked(evidence, &fwd, &bwd, scheme);
    Ok(DecodedPacket {
        xor: decode_xor(&bel, scheme),
        posteriors: bel.iter().map(|b| b.xor).collect(),
    })
}

/// Full decode: evidence, one sweep each way, XOR-MAP decisions.
pub fn decode_packet(y: &SampleVector) -> Result<DecodedPacket> {
    let model = EvidenceModel::new(&y.params);
    let evidence = model.all_evidence(y)?;
    decode_from_evidence(&evidence, y.params.scheme)
}

/// Evidence, both sweeps and beliefs, for callers that need the internals.
pub fn run_all(
    y: &SampleVector,
) -> Result<(
    Vec<EvidenceVector>,
    MessageVector,
    MessageVector,
    Vec<Belief>,
)> {
    let evidence = EvidenceModel::new(&y.params).all_evidence(y)?;
    let fwd = forward_unchecked(&evidence);
    let bwd = backward_unchecked(&evidence);
    let bel = beliefs_unchecked(&evidence, &fwd, &bwd, y.params.scheme);
    Ok((evidence, fwd, bwd, bel))
}
