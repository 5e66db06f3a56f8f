//! Labelled training corpora and feature extraction.
//!
//! A [`FeatureRecord`] holds the `D` equalizer eigenvalues and the `D`
//! per-stream SINRs (both in dB, sorted descending) observed for one link at
//! one SNR, plus the ground-truth labels when known. Synthetic records come
//! from the closed-form MMSE equalizer evaluated at the penalty-adjusted
//! SNR; measured records come from equalizer taps and equalized traces via
//! [`features_from_taps`].

mod csv;
mod extract;

pub use self::csv::{
    load_dataset, read_dataset, read_taps_csv, read_traces_csv, save_dataset, write_dataset, write_taps_csv,
    write_traces_csv, DATASET_FORMAT_VERSION,
};
pub use self::extract::{features_from_taps, ls_sinr, ExtractedFeatures, MAX_SKIPPED_FRACTION, SINR_CAP_DB};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{eigen_spectrum, realize_link, sigma_g_for_target, sigma_mdg_from, EigenSpectrum, LinkSpec, ModeTopology};
use crate::error::{Error, Result};
use crate::estimators::{effective_snr, mmse_eigen_spectrum, mmse_equalizer, sinr_per_stream, SinrVector, Snr};
use crate::linalg::{linspace, CMat};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub sigma_mdg_db: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub lambda_mmse_db: Vec<f64>,
    pub sinr_db: Vec<f64>,
    pub labels: Option<Labels>,
}

fn is_non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

impl FeatureRecord {
    pub fn new(lambda_mmse_db: Vec<f64>, sinr_db: Vec<f64>, labels: Option<Labels>) -> Result<Self> {
        if lambda_mmse_db.is_empty() || lambda_mmse_db.len() != sinr_db.len() {
            return Err(Error::DimensionMismatch {
                context: "feature record",
                expected: lambda_mmse_db.len(),
                found: sinr_db.len(),
            });
        }
        if lambda_mmse_db.iter().chain(&sinr_db).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature record"));
        }
        if !is_non_increasing(&lambda_mmse_db) || !is_non_increasing(&sinr_db) {
            return Err(Error::invalid("features", "feature vectors must be sorted descending"));
        }
        if let Some(l) = labels {
            if !l.sigma_mdg_db.is_finite() || !l.snr_db.is_finite() || l.sigma_mdg_db < 0.0 {
                return Err(Error::invalid("labels", "labels must be finite with sigma_mdg >= 0"));
            }
        }
        Ok(FeatureRecord {
            lambda_mmse_db,
            sinr_db,
            labels,
        })
    }

    /// Builds a record from unsorted spectra.
    pub fn from_parts(spectrum: &EigenSpectrum, sinr: &SinrVector, labels: Option<Labels>) -> Result<Self> {
        Self::new(spectrum.values_db().to_vec(), sinr.sorted_db(), labels)
    }

    /// Number of modes `D`.
    pub fn dim(&self) -> usize {
        self.lambda_mmse_db.len()
    }

    /// `[λ_1..λ_D, SINR_1..SINR_D]`, the `2D` regressor input.
    pub fn feature_vector(&self) -> Vec<f64> {
        let mut v = self.lambda_mmse_db.clone();
        v.extend_from_slice(&self.sinr_db);
        v
    }

    pub fn spectrum(&self) -> EigenSpectrum {
        EigenSpectrum::from_db(self.lambda_mmse_db.clone()).expect("validated record")
    }

    pub fn sinr(&self) -> SinrVector {
        SinrVector::from_db(&self.sinr_db).expect("validated record")
    }
}

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Statistics over the feature vectors of `records`. Constant features
    /// get a unit deviation so the transform stays defined.
    pub fn from_records(records: &[FeatureRecord]) -> Self {
        let dim = records.first().map(|r| 2 * r.dim()).unwrap_or(0);
        let n = records.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in records {
            for (m, v) in mean.iter_mut().zip(r.feature_vector()) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in records {
            for ((s, v), m) in var.iter_mut().zip(r.feature_vector()).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
            .collect();
        Normalization { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub topology: ModeTopology,
    pub num_sections: usize,
    pub sigma_mdg_range_db: [f64; 2],
    pub snr_range_db: [f64; 2],
    pub snr_points: usize,
    pub realizations: usize,
    /// Implementation penalty; `None` means none.
    #[serde(default)]
    pub snr_imp_db: Option<f64>,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_sections == 0 {
            return Err(Error::invalid("num_sections", "must be at least 1"));
        }
        let [lo, hi] = self.sigma_mdg_range_db;
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::invalid("sigma_mdg_range_db", format!("[{lo}, {hi}] must satisfy 0 <= low < high")));
        }
        let [lo, hi] = self.snr_range_db;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("snr_range_db", format!("[{lo}, {hi}] must satisfy low < high")));
        }
        if self.snr_points == 0 {
            return Err(Error::invalid("snr_points", "must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be at least 1"));
        }
        if let Some(imp) = self.snr_imp_db {
            if !imp.is_finite() {
                return Err(Error::invalid("snr_imp_db", "must be finite (omit it for no penalty)"));
            }
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.realizations * self.snr_points
    }

    pub fn snr_grid_db(&self) -> Vec<f64> {
        linspace(self.snr_range_db[0], self.snr_range_db[1], self.snr_points)
    }

    /// Target `sigma_mdg` of every realization, evenly covering the range.
    pub fn sigma_mdg_targets_db(&self) -> Vec<f64> {
        let [lo, hi] = self.sigma_mdg_range_db;
        if self.realizations == 1 {
            return vec![0.5 * (lo + hi)];
        }
        linspace(lo, hi, self.realizations)
    }
}

/// The parts of a [`DatasetSpec`] that survive serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub total_modes: usize,
    pub num_sections: usize,
    pub snr_imp_db: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<FeatureRecord>,
    pub normalization: Normalization,
    /// Realizations redrawn because a channel was numerically singular.
    pub regenerated: usize,
}

impl Dataset {
    pub fn new(meta: DatasetMeta, records: Vec<FeatureRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.dim() != meta.total_modes) {
            return Err(Error::DimensionMismatch {
                context: "dataset record",
                expected: meta.total_modes,
                found: r.dim(),
            });
        }
        let normalization = Normalization::from_records(&records);
        Ok(Dataset {
            meta,
            records,
            normalization,
            regenerated: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.total_modes
    }
}

fn snr_imp(snr_imp_db: Option<f64>) -> Result<Snr> {
    match snr_imp_db {
        None => Ok(Snr::INFINITE),
        Some(db) => Snr::from_db(db),
    }
}

/// Record for a known channel: features at `SNR' = effective_snr(snr, imp)`,
/// labels at the optical SNR.
pub fn record_from_channel(h: &CMat, sigma_mdg_db: f64, snr_db: f64, snr_imp_db: Option<f64>) -> Result<FeatureRecord> {
    let snr_eff = effective_snr(Snr::from_db(snr_db)?, snr_imp(snr_imp_db)?);
    let w = mmse_equalizer(h, snr_eff)?;
    let spectrum = mmse_eigen_spectrum(&w)?;
    let sinr = sinr_per_stream(h, snr_eff)?;
    FeatureRecord::from_parts(
        &spectrum,
        &sinr,
        Some(Labels {
            sigma_mdg_db,
            snr_db,
        }),
    )
}

/// Realizes a frequency-flat link with per-section MDG `sigma_g_db` and
/// returns its labelled record at `snr_db`.
pub fn generate_record<R: rand::Rng + ?Sized>(
    sigma_g_db: f64,
    num_sections: usize,
    topology: ModeTopology,
    snr_db: f64,
    snr_imp_db: Option<f64>,
    rng: &mut R,
) -> Result<FeatureRecord> {
    let spec = LinkSpec::flat(topology, num_sections, sigma_g_db, rng.random());
    let h = &realize_link(&spec)?.matrices[0];
    let truth = sigma_mdg_from(&eigen_spectrum(h)?);
    record_from_channel(h, truth, snr_db, snr_imp_db)
}

const MAX_REDRAWS: u64 = 16;

fn realization_records(spec: &DatasetSpec, index: usize, sigma_g_db: f64, snrs: &[f64]) -> Result<(Vec<FeatureRecord>, usize)> {
    let base = derive_seed(spec.seed, index as u64);
    let mut last_err = None;
    for attempt in 0..MAX_REDRAWS {
        let seed = derive_seed(base, attempt);
        let link = LinkSpec::flat(spec.topology, spec.num_sections, sigma_g_db, seed);
        let attempt_result = realize_link(&link).and_then(|ch| {
            let h = &ch.matrices[0];
            let truth = sigma_mdg_from(&eigen_spectrum(h)?);
            snrs.iter()
                .map(|&snr| record_from_channel(h, truth, snr, spec.snr_imp_db))
                .collect::<Result<Vec<_>>>()
        });
        match attempt_result {
            Ok(records) => return Ok((records, attempt as usize)),
            Err(e @ Error::Singular { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Builds the labelled corpus: one link per `sigma_mdg` target (the
/// per-section `σ_g` is solved from the closed-form accumulation law), each
/// observed at every point of the SNR grid. Realizations run in parallel on
/// derived seeds; the record order is fixed.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.topology.total_modes();
    let snrs = spec.snr_grid_db();
    let sigma_gs = spec
        .sigma_mdg_targets_db()
        .into_iter()
        .map(|t| sigma_g_for_target(t, spec.num_sections, d))
        .collect::<Result<Vec<_>>>()?;

    let per_realization = sigma_gs
        .par_iter()
        .enumerate()
        .map(|(i, &sg)| realization_records(spec, i, sg, &snrs))
        .collect::<Result<Vec<_>>>()?;

    let regenerated = per_realization.iter().map(|(_, n)| n).sum();
    let records = per_realization.into_iter().flat_map(|(r, _)| r).collect();
    let mut ds = Dataset::new(
        DatasetMeta {
            total_modes: d,
            num_sections: spec.num_sections,
            snr_imp_db: spec.snr_imp_db,
            seed: spec.seed,
        },
        records,
    )?;
    ds.regenerated = regenerated;
    Ok(ds)
}

/// Disjoint random split. Normalization statistics come from the training
/// part and are copied into both halves.
pub fn split_dataset(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
    }
    if ds.len() < 2 {
        return Err(Error::invalid("dataset", "need at least two records to split"));
    }
    let n = ds.len();
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    let pick = |ix: &[usize]| ix.iter().map(|&i| ds.records[i].clone()).collect::<Vec<_>>();
    let train_records = pick(&idx[..n_train]);
    let test_records = pick(&idx[n_train..]);
    let normalization = Normalization::from_records(&train_records);
    let make = |records| Dataset {
        meta: ds.meta,
        records,
        normalization: normalization.clone(),
        regenerated: 0,
    };
    Ok((make(train_records), make(test_records)))
}
