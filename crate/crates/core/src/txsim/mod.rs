//! Monte-Carlo transmission over a frequency-resolved coupled link.
//!
//! Chain: Gray-coded QAM per mode, root-raised-cosine shaping, per-bin
//! channel matrices, white noise, matched filter, decimation to two samples
//! per symbol, supervised MIMO LMS, then the same feature extraction used on
//! externally captured equalizers.
//!
//! ```no_run
//! use sdm_toolkit::channel::{LinkSpec, ModeTopology};
//! use sdm_toolkit::txsim::{simulate, TxSimConfig};
//!
//! let link = LinkSpec::flat(ModeTopology::new(3).unwrap(), 20, 0.5, 7);
//! let cfg = TxSimConfig::desk(link, Some(20.0), 1);
//! let out = simulate(&cfg).unwrap();
//! println!("{:?}", out.spectrum.values_db());
//! ```

mod lms;
mod propagate;
mod pulse;
mod qam;
mod spread;
mod sweep;

pub use lms::{lms_equalize, LmsConfig, LmsOutput, DIVERGENCE_WINDOW};
pub use propagate::{shape_and_propagate, Received};
pub use pulse::{fft_bin_frequency, raised_cosine, root_raised_cosine};
pub use qam::{constellation, evm_percent, gen_symbols, hard_decision, symbol_error_rate};
pub use spread::{fit_gaussian, fit_gaussian_cdf, impulse_response_spread, GaussianFit};
pub use sweep::{run_link_sweep, NoiseModel, SweepEstimators, SweepPoint};

use serde::{Deserialize, Serialize};

use crate::channel::{average_spectra, eigen_spectrum, realize_link, sigma_mdg_from, ChannelRealization, EigenSpectrum, LinkSpec};
use crate::error::{Error, Result};
use crate::estimators::{mmse_eigen_spectrum, mmse_equalizer, SinrVector, Snr};
use crate::features::{features_from_taps, FeatureRecord, Labels};
use crate::linalg::{CMat, C64};
use crate::rng::{derive_seed, rng_from_seed};
use crate::taps::{equalizer_transfer, TapSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSimConfig {
    /// Symbol rate in Bd.
    pub baud: f64,
    pub qam_order: usize,
    pub rolloff: f64,
    /// Simulation oversampling; must be even.
    pub samples_per_symbol: usize,
    pub num_symbols: usize,
    /// Channel frequency bins across the simulation bandwidth.
    pub freq_bins: usize,
    /// The link; its grid is either a single frequency (flat channel) or
    /// [`TxSimConfig::channel_grid`].
    pub channel: LinkSpec,
    /// Optical SNR (launched power over noise in a bandwidth equal to the
    /// symbol rate); `None` disables noise.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub lms: LmsConfig,
    pub seed: u64,
}

/// Index of the grid point closest to `f` (grid sorted ascending).
pub(crate) fn nearest_index(grid: &[f64], f: f64) -> usize {
    let i = grid.partition_point(|&g| g < f);
    if i == 0 {
        0
    } else if i == grid.len() || f - grid[i - 1] <= grid[i] - f {
        i - 1
    } else {
        i
    }
}

impl TxSimConfig {
    /// 30 GBd 16-QAM, roll-off 0.1, 4 samples per symbol, 40 000 symbols,
    /// 256 channel bins, default LMS.
    pub fn desk(channel: LinkSpec, snr_db: Option<f64>, seed: u64) -> Self {
        TxSimConfig {
            baud: 30e9,
            qam_order: 16,
            rolloff: 0.1,
            samples_per_symbol: 4,
            num_symbols: 40_000,
            freq_bins: 256,
            channel,
            snr_db,
            lms: LmsConfig::default(),
            seed,
        }
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud * self.samples_per_symbol as f64
    }

    /// Half a symbol period, in seconds.
    pub fn tap_spacing(&self) -> f64 {
        0.5 / self.baud
    }

    /// `freq_bins` centered bins spanning the simulation bandwidth.
    pub fn channel_grid(&self) -> Vec<f64> {
        let fs = self.sample_rate();
        let n = self.freq_bins as f64;
        (0..self.freq_bins)
            .map(|j| (j as f64 - (self.freq_bins / 2) as f64) * fs / n)
            .collect()
    }

    /// Channel-grid frequencies inside the flat part of the signal band.
    pub fn band_grid(&self) -> Vec<f64> {
        let edge = 0.5 * (1.0 - self.rolloff) * self.baud;
        self.channel_grid().into_iter().filter(|f| f.abs() <= edge).collect()
    }

    /// Resolves the link over [`TxSimConfig::channel_grid`].
    pub fn with_resolved_channel(mut self) -> Self {
        self.channel.freq_grid = self.channel_grid();
        self
    }

    /// Resolves the link only if its grid is unset (empty), as when it
    /// comes from a configuration file that leaves the grid out.
    pub fn with_default_grid(self) -> Self {
        if self.channel.freq_grid.is_empty() {
            self.with_resolved_channel()
        } else {
            self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.lms.validate()?;
        if !(self.baud > 0.0 && self.baud.is_finite()) {
            return Err(Error::invalid("baud", "must be positive"));
        }
        if ![4, 16, 64].contains(&self.qam_order) {
            return Err(Error::invalid("qam_order", "must be 4, 16 or 64"));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::invalid("rolloff", "must lie in [0, 1]"));
        }
        if self.samples_per_symbol < 2 || !self.samples_per_symbol.is_multiple_of(2) {
            return Err(Error::invalid("samples_per_symbol", "must be even and at least 2"));
        }
        if self.freq_bins == 0 {
            return Err(Error::invalid("freq_bins", "must be at least 1"));
        }
        let grid = self.channel.freq_grid.len();
        if grid != 1 && grid != self.freq_bins {
            return Err(Error::invalid(
                "channel.freq_grid",
                format!("has {grid} bins; expected 1 or freq_bins = {}", self.freq_bins),
            ));
        }
        if self.band_grid().is_empty() {
            return Err(Error::invalid("freq_bins", "no channel bin falls inside the signal band"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::invalid("snr_db", "must be finite (omit it for a noiseless run)"));
            }
        }
        let rest = self.num_symbols as f64 * (1.0 - self.lms.train_fraction);
        if rest < 1000.0 {
            return Err(Error::invalid(
                "num_symbols",
                "at least 1000 symbols must remain after the LMS training window",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TxSimResult {
    pub taps: TapSet,
    pub equalized: Vec<Vec<C64>>,
    pub reference: Vec<Vec<C64>>,
    /// In-band frequencies used for the transfer and spectra.
    pub band_grid: Vec<f64>,
    /// Frozen equalizer transfer on `band_grid`.
    pub transfer: Vec<CMat>,
    /// Band-averaged eigen spectrum of the inverted LMS equalizer.
    pub spectrum: EigenSpectrum,
    pub sinr: SinrVector,
    /// Extracted features, labelled with the ground truth when noise is on.
    pub record: FeatureRecord,
    pub skipped_bins: usize,
    /// Band-averaged spectrum of the link itself.
    pub true_spectrum: EigenSpectrum,
    /// Band-averaged closed-form MMSE spectrum at the configured SNR.
    pub mmse_spectrum: Option<EigenSpectrum>,
    pub sigma_mdg_true_db: f64,
    pub snr_db: Option<f64>,
    pub measured_snr_db: Option<f64>,
    pub training_error_db: Vec<f64>,
    pub residual_error_db: f64,
    pub symbol_error_rate: f64,
    pub evm_percent: f64,
}

/// Channel matrices at the band-grid frequencies (nearest bin).
pub fn band_matrices<'a>(cfg: &TxSimConfig, channel: &'a ChannelRealization) -> Vec<&'a CMat> {
    let grid = &channel.spec.freq_grid;
    cfg.band_grid()
        .into_iter()
        .map(|f| &channel.matrices[nearest_index(grid, f)])
        .collect()
}

pub fn simulate(cfg: &TxSimConfig) -> Result<TxSimResult> {
    cfg.validate()?;
    let channel = realize_link(&cfg.channel)?;
    simulate_with_channel(cfg, &channel)
}

/// Runs the chain over an existing realization (e.g. a prefix of a longer
/// link). Symbols and noise come from streams derived from `cfg.seed`.
pub fn simulate_with_channel(cfg: &TxSimConfig, channel: &ChannelRealization) -> Result<TxSimResult> {
    cfg.validate()?;
    let d = cfg.channel.topology.total_modes();
    let symbols = gen_symbols(cfg.qam_order, d, cfg.num_symbols, &mut rng_from_seed(derive_seed(cfg.seed, 1)))?;
    let received = shape_and_propagate(&symbols, cfg, channel, &mut rng_from_seed(derive_seed(cfg.seed, 2)))?;
    let lms = lms_equalize(&received.samples, &symbols, &cfg.lms, cfg.tap_spacing())?;
    let band_grid = cfg.band_grid();
    let feats = features_from_taps(&lms.taps, &band_grid, &lms.equalized, &lms.reference)?;

    let in_band = band_matrices(cfg, channel);
    let true_spectrum = average_spectra(&in_band.iter().map(|h| eigen_spectrum(h)).collect::<Result<Vec<_>>>()?)?;
    let sigma_mdg_true_db = sigma_mdg_from(&true_spectrum);
    let mmse_spectrum = match cfg.snr_db {
        Some(snr) => {
            let s = Snr::from_db(snr)?;
            in_band
                .iter()
                .map(|h| mmse_equalizer(h, s).and_then(|w| mmse_eigen_spectrum(&w)))
                .collect::<Result<Vec<_>>>()
                .and_then(|v| average_spectra(&v))
                .ok()
        }
        None => None,
    };
    let mut record = feats.record;
    record.labels = cfg.snr_db.map(|snr_db| Labels {
        sigma_mdg_db: sigma_mdg_true_db,
        snr_db,
    });
    Ok(TxSimResult {
        transfer: equalizer_transfer(&lms.taps, &band_grid),
        symbol_error_rate: symbol_error_rate(cfg.qam_order, &lms.equalized, &lms.reference)?,
        evm_percent: evm_percent(&lms.equalized, &lms.reference),
        taps: lms.taps,
        equalized: lms.equalized,
        reference: lms.reference,
        band_grid,
        spectrum: feats.spectrum,
        sinr: feats.sinr,
        record,
        skipped_bins: feats.skipped_bins,
        true_spectrum,
        mmse_spectrum,
        sigma_mdg_true_db,
        snr_db: cfg.snr_db,
        measured_snr_db: received.measured_snr_db,
        training_error_db: lms.training_error_db,
        residual_error_db: lms.residual_error_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ModeTopology;

    fn flat(m: usize, k: usize, sg: f64, seed: u64) -> LinkSpec {
        LinkSpec::flat(ModeTopology::new(m).unwrap(), k, sg, seed)
    }

    #[test]
    fn nearest_bins() {
        let g = [-2.0, -1.0, 0.0, 1.0];
        assert_eq!(nearest_index(&g, -5.0), 0);
        assert_eq!(nearest_index(&g, 0.4), 2);
        assert_eq!(nearest_index(&g, 0.6), 3);
        assert_eq!(nearest_index(&g, 9.0), 3);
        assert_eq!(nearest_index(&[0.0], 3.0), 0);
    }

    #[test]
    fn config_validation() {
        let ok = TxSimConfig::desk(flat(3, 2, 0.5, 0), Some(20.0), 0);
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.samples_per_symbol = 3;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.qam_order = 32;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.channel.freq_grid = vec![0.0, 1.0];
        assert!(c.validate().is_err());
        let mut c = ok;
        c.num_symbols = 1500;
        assert!(c.validate().is_err());
        let c = TxSimConfig::desk(flat(3, 2, 0.5, 0), None, 0).with_resolved_channel();
        assert_eq!(c.channel.freq_grid.len(), 256);
        assert!(c.band_grid().iter().all(|f| f.abs() <= 13.5e9));
    }

    #[test]
    fn back_to_back_is_transparent() {
        let mut link = flat(3, 1, 0.0, 0);
        link.coupling = crate::channel::Coupling::Uncoupled;
        let mut cfg = TxSimConfig::desk(link, None, 4);
        cfg.num_symbols = 20_000;
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.symbol_error_rate, 0.0);
        assert!(out.evm_percent < 1.0, "{}", out.evm_percent);
        assert!(out.residual_error_db < -40.0);
        assert!(out.record.labels.is_none());
    }
}
