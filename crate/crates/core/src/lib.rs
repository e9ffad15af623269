//! Exact belief-propagation XOR decoding for asynchronous physical-layer
//! network coding (PNC) on the two-way relay channel.
//!
//! Two end nodes A and B transmit BPSK or QPSK packets to a relay at the same
//! time. Their signals arrive with a symbol offset `delta` (fraction of a
//! symbol period) and a carrier-phase offset `phi`. The relay oversamples the
//! superposition into `2N + 1` complex samples and wants the symbol-wise XOR
//! `x_A[n] ⊕ x_B[n]` for broadcast.
//!
//! The crate is organised as:
//!
//! - [`modulation`]: alphabets, bit labelling, symbol XOR.
//! - [`channel`]: asynchronous superposition, oversampling and AWGN.
//! - [`bp_decoder`]: forward/backward sum-product on the chain factor graph.
//! - [`oracle`]: brute-force posteriors, the synchronous decision rule and
//!   its semi-analytic BER.
//! - [`harness`]: seeded Monte-Carlo BER points, sweeps and dB penalties.
//! - [`report`]: CSV/SVG/JSON trace formats used by the `apnc` binary.

pub mod bp_decoder;
pub mod channel;
pub mod cli;
pub mod error;
pub mod harness;
pub mod modulation;
pub mod oracle;
pub mod report;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64;
