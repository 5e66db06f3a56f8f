//! Mode-dependent gain (MDG) and optical SNR estimation for coupled
//! space-division-multiplexed (SDM) links.
//!
//! The crate is organised around the signal chain of a coupled SDM monitor:
//!
//! - [`channel`]: random multisection link realizations and ground-truth MDG
//!   metrics (numerical and closed form).
//! - [`estimators`]: MMSE equalizer synthesis, the eigenvalue map between
//!   link and equalizer, SINR and SNR bookkeeping, and the conventional and
//!   correction-factor MDG estimators.
//! - [`features`]: labelled training corpora and feature extraction from
//!   equalizer taps and equalized traces.
//! - [`mlp`]: the single-hidden-layer regressor used to estimate
//!   `sigma_mdg` and SNR from the extracted features.
//! - [`txsim`]: Monte-Carlo transmission with RRC shaping, AWGN and a
//!   supervised LMS MIMO equalizer.
//! - [`report`]: run configuration, experiment drivers and CSV emission used
//!   by the `sdm-toolkit` binary.
//!
//! Every random quantity is driven by an explicit `u64` seed, so all
//! pipelines are reproducible bit-for-bit.
//!
//! ```
//! use sdm_toolkit::channel::{sigma_mdg_analytic};
//!
//! // 50 spans with 1 dB per-span MDG over 12 modes.
//! let sigma = sigma_mdg_analytic(1.0, 50, 12);
//! assert!((sigma - 7.818).abs() < 1e-3);
//! ```

// Validity checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod estimators;
pub mod features;
pub mod linalg;
pub mod mlp;
pub mod report;
pub mod rng;
pub mod taps;
pub mod txsim;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};
