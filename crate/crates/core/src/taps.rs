//! Time-domain MIMO equalizer taps and their frequency response.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, CMat, C64};

/// A `D × D × T` FIR equalizer. `taps[t][(out, in)]` is the coefficient
/// from input stream `in` to output stream `out` at tap index `t`; taps are
/// `spacing_s` seconds apart and the reference (zero-delay) tap is the
/// center one.
#[derive(Debug, Clone, PartialEq)]
pub struct TapSet {
    pub taps: Vec<CMat>,
    pub spacing_s: f64,
}

impl TapSet {
    pub fn new(taps: Vec<CMat>, spacing_s: f64) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::invalid("taps", "at least one tap required"))?;
        let d = first.nrows();
        if !first.is_square() || d == 0 {
            return Err(Error::invalid("taps", "tap matrices must be square"));
        }
        if let Some(t) = taps.iter().find(|t| t.nrows() != d || t.ncols() != d) {
            return Err(Error::DimensionMismatch {
                context: "tap matrix",
                expected: d,
                found: t.nrows().max(t.ncols()),
            });
        }
        if !taps.iter().all(all_finite) {
            return Err(Error::NonFinite("equalizer taps"));
        }
        if !(spacing_s > 0.0) {
            return Err(Error::invalid("spacing_s", "tap spacing must be > 0"));
        }
        Ok(TapSet { taps, spacing_s })
    }

    /// Single tap equal to `w0`.
    pub fn single(w0: CMat, spacing_s: f64) -> Result<Self> {
        Self::new(vec![w0], spacing_s)
    }

    pub fn dim(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// Average intensity `|w_ij[t]|²` over all `D²` tap sequences.
    pub fn averaged_intensity(&self) -> Vec<f64> {
        let d2 = (self.dim() * self.dim()) as f64;
        self.taps
            .iter()
            .map(|w| w.iter().map(|z| z.norm_sqr()).sum::<f64>() / d2)
            .collect()
    }
}

/// `W(f) = Σ_t w[t] · exp(−j2πf (t − c) Δ)` for every `f` in `freq_grid`,
/// with `c` the center tap and `Δ` the tap spacing.
pub fn equalizer_transfer(taps: &TapSet, freq_grid: &[f64]) -> Vec<CMat> {
    let d = taps.dim();
    let c = taps.center() as f64;
    freq_grid
        .iter()
        .map(|&f| {
            let mut w = CMat::zeros(d, d);
            for (t, tap) in taps.taps.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * f * (t as f64 - c) * taps.spacing_s;
                w += tap * C64::from_polar(1.0, phase);
            }
            w
        })
        .collect()
}
