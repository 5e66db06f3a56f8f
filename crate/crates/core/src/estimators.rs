//! Closed-form receiver-side estimators.
//!
//! The MMSE equalizer of a link `H` at optical SNR `s` is
//! `W = (I/s + H^H H)^{-1} H^H`. The eigenvalues of `W^{-1} W^{-H}` relate to
//! the link eigenvalues `λ²` through
//!
//! ```text
//! λ²_mmse = 1/(s² λ²) + 2/s + λ²
//! ```
//!
//! which has a floor of `4/s` at `λ² = 1/s`. Taking the standard deviation of
//! `λ²_mmse` in dB (the conventional estimator) therefore under-reads MDG at
//! low SNR. The per-stream SINR of the same equalizer is
//! `1/[(I + s H^H H)^{-1}]_ii − 1`, whose mean is the conventional SNR
//! estimate.

use serde::{Deserialize, Serialize};

use crate::channel::{eigen_spectrum, EigenSpectrum};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, db_to_lin, lin_to_db, population_std, CMat, C64};

/// Condition number above which an equalizer is treated as singular.
pub const MAX_EQUALIZER_CONDITION: f64 = 1e12;

/// A linear power ratio. `+∞` is allowed and stands for "no noise" (used for
/// an absent implementation penalty).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Snr(f64);

impl Snr {
    pub const INFINITE: Snr = Snr(f64::INFINITY);

    pub fn new(linear: f64) -> Result<Self> {
        if linear > 0.0 {
            Ok(Snr(linear))
        } else {
            Err(Error::invalid("snr", format!("{linear} is not a positive power ratio")))
        }
    }

    pub fn from_db(db: f64) -> Result<Self> {
        if db.is_nan() {
            return Err(Error::invalid("snr", "NaN dB value"));
        }
        Self::new(db_to_lin(db))
    }

    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        lin_to_db(self.0)
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// Per-stream SINR values (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct SinrVector(Vec<f64>);

impl SinrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sinr", "empty SINR vector"));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("sinr", "SINR values must be finite and positive"));
        }
        Ok(SinrVector(values))
    }

    pub fn from_db(values_db: &[f64]) -> Result<Self> {
        Self::new(values_db.iter().map(|&v| db_to_lin(v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Values in dB, sorted descending.
    pub fn sorted_db(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.0.iter().map(|&x| lin_to_db(x)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Per-frequency equalizer transfer matrices.
#[derive(Debug, Clone)]
pub struct EqualizerTransfer {
    pub freq_grid: Vec<f64>,
    pub matrices: Vec<CMat>,
}

fn check_square_finite(h: &CMat, context: &'static str) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch {
            context,
            expected: h.nrows(),
            found: h.ncols(),
        });
    }
    if !all_finite(h) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// `W = (I/snr + H^H H)^{-1} H^H`.
pub fn mmse_equalizer(h: &CMat, snr: Snr) -> Result<CMat> {
    check_square_finite(h, "mmse_equalizer")?;
    let n = h.nrows();
    let hh = h.adjoint();
    let mut a = &hh * h;
    let reg = 1.0 / snr.linear();
    for i in 0..n {
        a[(i, i)] += C64::new(reg, 0.0);
    }
    let chol = a.cholesky().ok_or_else(|| Error::Singular {
        context: "mmse_equalizer",
        detail: "regularized Gram matrix is not positive definite".into(),
    })?;
    Ok(chol.solve(&hh))
}

/// Eigenvalues of `W^{-1} W^{-H}` in dB.
pub fn mmse_eigen_spectrum(w: &CMat) -> Result<EigenSpectrum> {
    check_square_finite(w, "mmse_eigen_spectrum")?;
    let sv = w.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 0.0) || smax / smin > MAX_EQUALIZER_CONDITION {
        return Err(Error::Singular {
            context: "mmse_eigen_spectrum",
            detail: format!("condition number {:e}", smax / smin),
        });
    }
    let inv = w.clone().try_inverse().ok_or_else(|| Error::Singular {
        context: "mmse_eigen_spectrum",
        detail: "equalizer not invertible".into(),
    })?;
    eigen_spectrum(&inv)
}

/// `λ²_mmse = 1/(snr² λ²) + 2/snr + λ²`.
pub fn forward_eigen_map(lambda2: f64, snr: Snr) -> f64 {
    let s = snr.linear();
    1.0 / (lambda2 * s * s) + 2.0 / s + lambda2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// The root `λ² ≥ 1/snr`.
    Upper,
    /// The root `λ² ≤ 1/snr`.
    Lower,
}

/// Solves `λ⁴ − (y − 2/snr) λ² + 1/snr² = 0` for `λ²`. The two roots
/// multiply to `1/snr²`.
pub fn invert_eigen_map(lambda2_mmse: f64, snr: Snr, branch: Branch) -> Result<f64> {
    let s = snr.linear();
    let floor = 4.0 / s;
    // A few ulps of slack so that exact floor values round-trip.
    if lambda2_mmse < floor * (1.0 - 1e-12) || lambda2_mmse.is_nan() {
        return Err(Error::BelowFloor {
            value: lambda2_mmse,
            floor,
        });
    }
    let b = lambda2_mmse - 2.0 / s;
    let c = 1.0 / (s * s);
    let disc = (b * b - 4.0 * c).max(0.0);
    let upper = 0.5 * (b + disc.sqrt());
    Ok(match branch {
        Branch::Upper => upper,
        Branch::Lower => c / upper,
    })
}

/// Root selection used by [`corrected_sigma_mdg_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRule {
    /// Every entry takes the upper root. The map is expansive in log scale,
    /// so the corrected spread never falls below the conventional one.
    #[default]
    AllUpper,
    /// Entries above the spectrum median take the upper root, the rest the
    /// lower root.
    MedianSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedMdg {
    pub sigma_mdg_db: f64,
    /// Entries lifted to the `4/snr` floor before inversion.
    pub clamped: usize,
}

/// Correction-factor estimate with the default [`BranchRule::AllUpper`].
pub fn corrected_sigma_mdg(spectrum_mmse: &EigenSpectrum, snr: Snr) -> CorrectedMdg {
    corrected_sigma_mdg_with(spectrum_mmse, snr, BranchRule::AllUpper)
}

/// Maps every equalizer eigenvalue back through the inverse eigenvalue map
/// and returns the population std of the result in dB.
pub fn corrected_sigma_mdg_with(spectrum_mmse: &EigenSpectrum, snr: Snr, rule: BranchRule) -> CorrectedMdg {
    let floor = 4.0 / snr.linear();
    let n = spectrum_mmse.len();
    let mut clamped = 0;
    let corrected: Vec<f64> = spectrum_mmse
        .linear()
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let y = if y < floor {
                clamped += 1;
                floor
            } else {
                y
            };
            let branch = match rule {
                BranchRule::AllUpper => Branch::Upper,
                // sorted descending: the first half is above the median
                BranchRule::MedianSplit if i < n / 2 => Branch::Upper,
                BranchRule::MedianSplit => Branch::Lower,
            };
            let lambda2 = invert_eigen_map(y, snr, branch).expect("clamped to floor");
            lin_to_db(lambda2)
        })
        .collect();
    CorrectedMdg {
        sigma_mdg_db: population_std(&corrected),
        clamped,
    }
}

/// Conventional estimate: std of the DSP-visible eigenvalues in dB.
pub fn conventional_sigma_mdg(spectrum_mmse: &EigenSpectrum) -> f64 {
    population_std(spectrum_mmse.values_db())
}

/// `SINR_i = 1/[(I + snr H^H H)^{-1}]_ii − 1`.
pub fn sinr_per_stream(h: &CMat, snr: Snr) -> Result<SinrVector> {
    check_square_finite(h, "sinr_per_stream")?;
    if snr.is_infinite() {
        return Err(Error::invalid("snr", "SINR requires a finite SNR"));
    }
    let n = h.nrows();
    let mut a = h.adjoint() * h * C64::new(snr.linear(), 0.0);
    for i in 0..n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    let chol = a.cholesky().ok_or_else(|| Error::Singular {
        context: "sinr_per_stream",
        detail: "I + snr H^H H not positive definite".into(),
    })?;
    let inv = chol.inverse();
    SinrVector::new((0..n).map(|i| 1.0 / inv[(i, i)].re - 1.0).collect())
}

/// How per-stream SINRs are averaged into an SNR estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrAveraging {
    #[default]
    Linear,
    Db,
}

/// Conventional SNR estimate: arithmetic mean of the linear SINRs.
pub fn snr_from_sinr(sinrs: &SinrVector) -> Snr {
    snr_from_sinr_with(sinrs, SinrAveraging::Linear)
}

pub fn snr_from_sinr_with(sinrs: &SinrVector, averaging: SinrAveraging) -> Snr {
    match averaging {
        SinrAveraging::Linear => Snr(sinrs.mean()),
        SinrAveraging::Db => {
            let v = sinrs.values();
            Snr(db_to_lin(v.iter().map(|&x| lin_to_db(x)).sum::<f64>() / v.len() as f64))
        }
    }
}

/// `SNR' = (1/snr + 1/snr_imp)^{-1}`.
pub fn effective_snr(snr: Snr, snr_imp: Snr) -> Snr {
    Snr(1.0 / (1.0 / snr.linear() + 1.0 / snr_imp.linear()))
}

/// Removes the implementation penalty from the mean SINR:
/// `(1/mean(SINR) − 1/snr_imp)^{-1}`.
pub fn snr_penalty_removed(sinrs: &SinrVector, snr_imp: Snr) -> Result<Snr> {
    let m = sinrs.mean();
    if m >= snr_imp.linear() {
        return Err(Error::PenaltyDominates {
            mean_sinr_db: lin_to_db(m),
            snr_imp_db: snr_imp.db(),
        });
    }
    Ok(Snr(1.0 / (1.0 / m - 1.0 / snr_imp.linear())))
}

/// Converts OSNR (0.1 nm / 12.5 GHz reference bandwidth) to the SNR in the
/// signal bandwidth of a signal with symbol time `symbol_time_s`.
pub fn osnr_to_snr(osnr_db: f64, symbol_time_s: f64) -> Result<f64> {
    if !(symbol_time_s > 0.0) {
        return Err(Error::invalid("symbol_time_s", "must be > 0"));
    }
    Ok(osnr_db + lin_to_db(symbol_time_s * 12.5e9))
}
