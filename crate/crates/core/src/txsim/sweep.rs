use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{realize_prefixes, EigenSpectrum};
use crate::error::{Error, Result};
use crate::estimators::{conventional_sigma_mdg, corrected_sigma_mdg, effective_snr, snr_from_sinr, snr_penalty_removed, Snr};
use crate::mlp::{predict, MlpModel};
use crate::rng::derive_seed;

use super::{impulse_response_spread, simulate_with_channel, TxSimConfig};

/// SNR seen at the receiver as a function of the number of spans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Fixed { snr_db: f64 },
    /// Equal amplifiers: the noise grows with the span count,
    /// `SNR(K) = first_span_snr_db − 10·log10(K)`.
    AmplifierAccumulation { first_span_snr_db: f64 },
}

impl NoiseModel {
    pub fn snr_db(&self, spans: usize) -> f64 {
        match *self {
            NoiseModel::Fixed { snr_db } => snr_db,
            NoiseModel::AmplifierAccumulation { first_span_snr_db } => first_span_snr_db - 10.0 * (spans as f64).log10(),
        }
    }
}

/// Estimators evaluated at every distance besides the conventional one.
#[derive(Debug, Clone, Default)]
pub struct SweepEstimators {
    pub sigma_model: Option<MlpModel>,
    pub snr_model: Option<MlpModel>,
    /// Implementation penalty of the receiver, used by the correction
    /// factor and by penalty removal in the SNR estimate.
    pub snr_imp_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub num_sections: usize,
    pub distance_km: f64,
    pub snr_true_db: f64,
    pub sigma_mdg_true_db: f64,
    pub sigma_conv_db: f64,
    pub sigma_corr_db: f64,
    pub sigma_ann_db: Option<f64>,
    /// `None` when the implementation penalty dominates the measured SINR.
    pub snr_conv_db: Option<f64>,
    pub snr_ann_db: Option<f64>,
    pub true_spectrum: EigenSpectrum,
    pub mmse_spectrum: Option<EigenSpectrum>,
    pub lms_spectrum: EigenSpectrum,
    pub spread_ps: Option<f64>,
    pub residual_error_db: f64,
}

/// Simulates one link at increasing lengths. All distances share the same
/// section draws (each is a prefix of the longest link); symbols and noise
/// use per-distance seeds derived from `base.seed`.
pub fn run_link_sweep(
    base: &TxSimConfig,
    span_counts: &[usize],
    noise: NoiseModel,
    estimators: &SweepEstimators,
) -> Result<Vec<SweepPoint>> {
    base.validate()?;
    let longest = *span_counts
        .iter()
        .max()
        .ok_or_else(|| Error::invalid("span_counts", "must not be empty"))?;
    let mut link = base.channel.clone();
    link.num_sections = longest;
    let channels = realize_prefixes(&link, span_counts)?;
    let imp = match estimators.snr_imp_db {
        Some(db) => Snr::from_db(db)?,
        None => Snr::INFINITE,
    };

    span_counts
        .par_iter()
        .zip(channels.par_iter())
        .map(|(&k, channel)| {
            let mut cfg = base.clone();
            cfg.channel.num_sections = k;
            cfg.snr_db = Some(noise.snr_db(k));
            cfg.seed = derive_seed(base.seed, k as u64);
            let out = simulate_with_channel(&cfg, channel)?;

            let snr_true = Snr::from_db(noise.snr_db(k))?;
            let corr = corrected_sigma_mdg(&out.spectrum, effective_snr(snr_true, imp));
            let snr_conv_db = if imp.is_infinite() {
                Some(snr_from_sinr(&out.sinr).db())
            } else {
                match snr_penalty_removed(&out.sinr, imp) {
                    Ok(s) => Some(s.db()),
                    Err(Error::PenaltyDominates { .. }) => None,
                    Err(e) => return Err(e),
                }
            };
            let ann = |m: &Option<MlpModel>| m.as_ref().map(|m| predict(m, &out.record)).transpose();
            Ok(SweepPoint {
                num_sections: k,
                distance_km: k as f64 * base.channel.section.span_length_km,
                snr_true_db: noise.snr_db(k),
                sigma_mdg_true_db: out.sigma_mdg_true_db,
                sigma_conv_db: conventional_sigma_mdg(&out.spectrum),
                sigma_corr_db: corr.sigma_mdg_db,
                sigma_ann_db: ann(&estimators.sigma_model)?,
                snr_conv_db,
                snr_ann_db: ann(&estimators.snr_model)?,
                spread_ps: impulse_response_spread(&out.taps).ok(),
                residual_error_db: out.residual_error_db,
                true_spectrum: out.true_spectrum,
                mmse_spectrum: out.mmse_spectrum,
                lms_spectrum: out.spectrum,
            })
        })
        .collect()
}
