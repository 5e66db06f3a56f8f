//! Library-level drivers behind the figure tables. They return plain rows so
//! tests can assert on them without going through files.

use rayon::prelude::*;

use crate::channel::{eigen_spectrum, realize_link, realize_prefixes, sigma_g_for_target, sigma_mdg_from, Coupling, LinkSpec};
use crate::error::{Error, Result};
use crate::estimators::{
    conventional_sigma_mdg, corrected_sigma_mdg, effective_snr, mmse_eigen_spectrum, mmse_equalizer, snr_from_sinr,
    snr_penalty_removed, Snr,
};
use crate::features::{record_from_channel, FeatureRecord, SINR_CAP_DB};
use crate::linalg::{db_to_lin, lin_to_db, linspace, mean};
use crate::mlp::{predict, MlpModel};
use crate::rng::derive_seed;
use crate::txsim::{run_link_sweep, simulate, NoiseModel, SweepEstimators, TxSimConfig};

use super::config::{EigenEvolutionSpec, ErrorGridSpec};

fn imp_snr(snr_imp_db: Option<f64>) -> Result<Snr> {
    snr_imp_db.map_or(Ok(Snr::INFINITE), Snr::from_db)
}

/// Conventional SNR estimate of a record: penalty removed when a penalty
/// is known, plain mean SINR otherwise. `None` when the penalty dominates.
pub fn conventional_snr_db(record: &FeatureRecord, snr_imp_db: Option<f64>) -> Result<Option<f64>> {
    let imp = imp_snr(snr_imp_db)?;
    let sinr = record.sinr();
    if imp.is_infinite() {
        return Ok(Some(snr_from_sinr(&sinr).db()));
    }
    match snr_penalty_removed(&sinr, imp) {
        Ok(s) => Ok(Some(s.db())),
        Err(Error::PenaltyDominates { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenRow {
    pub snr_db: f64,
    pub num_sections: usize,
    pub distance_km: f64,
    pub true_max_db: f64,
    pub true_min_db: f64,
    pub mmse_max_db: f64,
    pub mmse_min_db: f64,
    pub lms_max_db: Option<f64>,
    pub lms_min_db: Option<f64>,
}

impl EigenEvolutionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_sections == 0 {
            return Err(Error::invalid("num_sections", "must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be at least 1"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("snr_db", "must be a nonempty list of finite values"));
        }
        if !(self.sigma_g_db >= 0.0 && self.sigma_g_db.is_finite()) {
            return Err(Error::invalid("sigma_g_db", "must be finite and non-negative"));
        }
        if !(self.span_length_km > 0.0) {
            return Err(Error::invalid("span_length_km", "must be positive"));
        }
        Ok(())
    }

    fn link(&self, realization: usize) -> LinkSpec {
        let mut link = LinkSpec::flat(
            self.topology,
            self.num_sections,
            self.sigma_g_db,
            derive_seed(self.seed, realization as u64),
        );
        link.section.span_length_km = self.span_length_km;
        link
    }
}

/// Extreme eigenvalues of the link (`λ²`) and of the MMSE equalizer seen by
/// the DSP (`λ²_MMSE`) after every section, averaged in dB over
/// `realizations` frequency-flat links. With `lms_symbols > 0` the first
/// link is also run through the simulator at every length for `λ²_LMS`.
pub fn eigen_evolution(spec: &EigenEvolutionSpec) -> Result<Vec<EigenRow>> {
    spec.validate()?;
    let counts: Vec<usize> = (1..=spec.num_sections).collect();
    let snrs = spec
        .snr_db
        .iter()
        .map(|&s| Snr::from_db(s))
        .collect::<Result<Vec<_>>>()?;

    // [realization][count][snr] -> (true max, true min, mmse max, mmse min)
    let per_link = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            realize_prefixes(&spec.link(r), &counts)?
                .iter()
                .map(|ch| {
                    let h = &ch.matrices[0];
                    let truth = eigen_spectrum(h)?;
                    snrs.iter()
                        .map(|&snr| {
                            let m = mmse_eigen_spectrum(&mmse_equalizer(h, snr)?)?;
                            Ok([truth.max_db(), truth.min_db(), m.max_db(), m.min_db()])
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let lms = if spec.lms_symbols > 0 {
        let base_seed = derive_seed(spec.seed, u64::MAX);
        spec.snr_db
            .iter()
            .map(|&snr| {
                let mut cfg = TxSimConfig::desk(spec.link(0), None, base_seed);
                cfg.num_symbols = spec.lms_symbols;
                let pts = run_link_sweep(&cfg, &counts, NoiseModel::Fixed { snr_db: snr }, &SweepEstimators::default())?;
                Ok(pts
                    .into_iter()
                    .map(|p| (p.lms_spectrum.max_db(), p.lms_spectrum.min_db()))
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None; snrs.len()]
    };

    let n = spec.realizations as f64;
    let mut rows = Vec::with_capacity(snrs.len() * counts.len());
    for (si, &snr_db) in spec.snr_db.iter().enumerate() {
        for (ci, &k) in counts.iter().enumerate() {
            let mut acc = [0.0; 4];
            for link in &per_link {
                for (a, v) in acc.iter_mut().zip(link[ci][si]) {
                    *a += v / n;
                }
            }
            let lms_pair = lms[si].as_ref().map(|v: &Vec<(f64, f64)>| v[ci]);
            rows.push(EigenRow {
                snr_db,
                num_sections: k,
                distance_km: k as f64 * spec.span_length_km,
                true_max_db: acc[0],
                true_min_db: acc[1],
                mmse_max_db: acc[2],
                mmse_min_db: acc[3],
                lms_max_db: lms_pair.map(|p| p.0),
                lms_min_db: lms_pair.map(|p| p.1),
            });
        }
    }
    Ok(rows)
}

/// Per-cell mean errors (estimate minus truth, dB) over the grid links.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub sigma_mdg_target_db: f64,
    pub snr_db: f64,
    pub sigma_mdg_true_db: f64,
    pub sigma_conv_err_db: f64,
    pub sigma_corr_err_db: f64,
    pub sigma_ann_err_db: Option<f64>,
    /// `None` when the penalty dominates in every link of the cell.
    pub snr_conv_err_db: Option<f64>,
    pub snr_ann_err_db: Option<f64>,
}

impl ErrorGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_sections == 0 {
            return Err(Error::invalid("num_sections", "must be at least 1"));
        }
        let [lo, hi] = self.sigma_mdg_range_db;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("sigma_mdg_range_db", format!("[{lo}, {hi}] must satisfy 0 <= low <= high")));
        }
        let [lo, hi] = self.snr_range_db;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("snr_range_db", format!("[{lo}, {hi}] must satisfy low <= high")));
        }
        for (name, n) in [
            ("sigma_points", self.sigma_points),
            ("snr_points", self.snr_points),
            ("realizations", self.realizations),
        ] {
            if n == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.snr_imp_db.is_some_and(|v| !v.is_finite()) {
            return Err(Error::invalid("snr_imp_db", "must be finite (omit it for no penalty)"));
        }
        Ok(())
    }

    pub fn sigma_targets_db(&self) -> Vec<f64> {
        grid(self.sigma_mdg_range_db, self.sigma_points)
    }

    pub fn snr_grid_db(&self) -> Vec<f64> {
        grid(self.snr_range_db, self.snr_points)
    }
}

fn grid([lo, hi]: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        vec![lo]
    } else {
        linspace(lo, hi, n)
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

/// Error surfaces of the conventional, correction-factor and (optionally)
/// ANN estimators over a `σ_mdg × SNR` grid of frequency-flat links. Each
/// link is observed at every SNR of the grid.
pub fn error_grid(spec: &ErrorGridSpec, sigma_model: Option<&MlpModel>, snr_model: Option<&MlpModel>) -> Result<Vec<GridRow>> {
    spec.validate()?;
    let d = spec.topology.total_modes();
    for m in [sigma_model, snr_model].into_iter().flatten() {
        if m.input_dim() != 2 * d {
            return Err(Error::DimensionMismatch {
                context: "model input vs grid features",
                expected: 2 * d,
                found: m.input_dim(),
            });
        }
    }
    let imp = imp_snr(spec.snr_imp_db)?;
    let snrs = spec.snr_grid_db();
    let targets = spec.sigma_targets_db();

    struct Obs {
        truth: f64,
        conv: f64,
        corr: f64,
        ann: Option<f64>,
        snr_conv: Option<f64>,
        snr_ann: Option<f64>,
    }

    // [target][realization][snr]
    let obs = targets
        .par_iter()
        .enumerate()
        .map(|(ti, &target)| {
            let sigma_g = sigma_g_for_target(target, spec.num_sections, d)?;
            (0..spec.realizations)
                .map(|r| {
                    let seed = derive_seed(spec.seed, (ti * spec.realizations + r) as u64);
                    let link = LinkSpec::flat(spec.topology, spec.num_sections, sigma_g, seed);
                    let h = &realize_link(&link)?.matrices[0];
                    let truth = sigma_mdg_from(&eigen_spectrum(h)?);
                    snrs.iter()
                        .map(|&snr_db| {
                            let rec = record_from_channel(h, truth, snr_db, spec.snr_imp_db)?;
                            let spectrum = rec.spectrum();
                            let corr = corrected_sigma_mdg(&spectrum, effective_snr(Snr::from_db(snr_db)?, imp));
                            Ok(Obs {
                                truth,
                                conv: conventional_sigma_mdg(&spectrum),
                                corr: corr.sigma_mdg_db,
                                ann: sigma_model.map(|m| predict(m, &rec)).transpose()?,
                                snr_conv: conventional_snr_db(&rec, spec.snr_imp_db)?.map(|s| s - snr_db),
                                snr_ann: snr_model.map(|m| predict(m, &rec)).transpose()?.map(|s| s - snr_db),
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(targets.len() * snrs.len());
    for (ti, &target) in targets.iter().enumerate() {
        for (si, &snr_db) in snrs.iter().enumerate() {
            let cell: Vec<&Obs> = obs[ti].iter().map(|r| &r[si]).collect();
            let avg = |f: &dyn Fn(&Obs) -> f64| mean(&cell.iter().map(|o| f(o)).collect::<Vec<_>>());
            rows.push(GridRow {
                sigma_mdg_target_db: target,
                snr_db,
                sigma_mdg_true_db: avg(&|o| o.truth),
                sigma_conv_err_db: avg(&|o| o.conv - o.truth),
                sigma_corr_err_db: avg(&|o| o.corr - o.truth),
                sigma_ann_err_db: mean_of(cell.iter().map(|o| o.ann.map(|a| a - o.truth))),
                snr_conv_err_db: mean_of(cell.iter().map(|o| o.snr_conv)),
                snr_ann_err_db: mean_of(cell.iter().map(|o| o.snr_ann)),
            });
        }
    }
    Ok(rows)
}

const CALIBRATION_SNR_DB: f64 = 20.0;

/// Measures the receiver's implementation penalty back to back: a lossless
/// single-section link at 20 dB, with the penalty solved from the mean
/// SINR. Returns the SINR cap when the receiver shows no penalty at all.
pub fn calibrate_snr_imp(base: &TxSimConfig) -> Result<f64> {
    let mut cfg = base.clone();
    cfg.channel = LinkSpec {
        num_sections: 1,
        coupling: Coupling::Uncoupled,
        freq_grid: vec![0.0],
        ..cfg.channel
    };
    cfg.channel.section.sigma_g_db = 0.0;
    cfg.channel.section.gd_std_ps_sqrt_km = 0.0;
    cfg.snr_db = Some(CALIBRATION_SNR_DB);
    let out = simulate(&cfg)?;
    let excess = 1.0 / out.sinr.mean() - 1.0 / db_to_lin(CALIBRATION_SNR_DB);
    Ok(if excess > 0.0 {
        (-lin_to_db(excess)).min(SINR_CAP_DB)
    } else {
        SINR_CAP_DB
    })
}
