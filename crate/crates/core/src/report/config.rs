use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ModeTopology;
use crate::error::{Error, Result};
use crate::features::DatasetSpec;
use crate::mlp::{Target, TrainConfig};
use crate::txsim::{NoiseModel, TxSimConfig};

/// One TOML file drives every command; each command reads its own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub train: Option<TrainSection>,
    #[serde(default)]
    pub estimate: Option<EstimateSection>,
    #[serde(default)]
    pub simulate: Option<TxSimConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_targets() -> Vec<Target> {
    vec![Target::SigmaMdg, Target::Snr]
}

fn default_train_fraction() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: PathBuf,
    #[serde(default = "default_targets")]
    pub targets: Vec<Target>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Seed of the weight initialization.
    #[serde(default)]
    pub init_seed: u64,
    #[serde(default)]
    pub optimizer: TrainConfig,
}

/// Where the records to estimate come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureSource {
    /// Every record of a dataset CSV.
    Dataset { path: PathBuf },
    /// One equalizer capture: taps plus equalized and reference traces.
    Capture {
        taps: PathBuf,
        traces: PathBuf,
        tap_spacing_s: f64,
        baud: f64,
        rolloff: f64,
        #[serde(default = "default_band_points")]
        band_points: usize,
    },
}

fn default_band_points() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub source: FeatureSource,
    #[serde(default)]
    pub sigma_model: Option<PathBuf>,
    #[serde(default)]
    pub snr_model: Option<PathBuf>,
    #[serde(default)]
    pub snr_imp_db: Option<f64>,
    /// Optical SNR handed to the correction factor when a record carries
    /// no label. Without either, the conventional SNR estimate is used.
    #[serde(default)]
    pub known_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSection {
    /// Extreme eigenvalues of link, MMSE and LMS equalizer versus distance.
    Fig1(EigenEvolutionSpec),
    /// Estimator error surfaces over a (σ_mdg, SNR) grid.
    Fig4Grid(ErrorGridSpec),
    /// Estimates versus distance, typically over a weakly coupled loop.
    Fig6(LinkSweepSpec),
    /// Equalizer delay spread versus distance.
    Fig7(LinkSweepSpec),
    /// Estimates versus distance over a strongly coupled long-haul link.
    Fig8(LinkSweepSpec),
}

impl SweepSection {
    pub fn name(&self) -> &'static str {
        match self {
            SweepSection::Fig1(_) => "fig1",
            SweepSection::Fig4Grid(_) => "fig4_grid",
            SweepSection::Fig6(_) => "fig6",
            SweepSection::Fig7(_) => "fig7",
            SweepSection::Fig8(_) => "fig8",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenEvolutionSpec {
    pub topology: ModeTopology,
    pub sigma_g_db: f64,
    pub num_sections: usize,
    pub span_length_km: f64,
    pub snr_db: Vec<f64>,
    /// Links averaged (in dB) for the link and MMSE columns.
    pub realizations: usize,
    /// Symbols per LMS run on the first link; 0 skips the LMS columns.
    #[serde(default)]
    pub lms_symbols: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorGridSpec {
    pub topology: ModeTopology,
    pub num_sections: usize,
    pub sigma_mdg_range_db: [f64; 2],
    pub sigma_points: usize,
    pub snr_range_db: [f64; 2],
    pub snr_points: usize,
    /// Links per grid cell.
    pub realizations: usize,
    #[serde(default)]
    pub snr_imp_db: Option<f64>,
    #[serde(default)]
    pub sigma_model: Option<PathBuf>,
    #[serde(default)]
    pub snr_model: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSweepSpec {
    pub sim: TxSimConfig,
    pub span_counts: Vec<usize>,
    pub noise: NoiseModel,
    #[serde(default)]
    pub snr_imp_db: Option<f64>,
    /// Measure the receiver penalty back to back before the sweep; used
    /// when `snr_imp_db` is absent.
    #[serde(default)]
    pub calibrate_snr_imp: bool,
    #[serde(default)]
    pub sigma_model: Option<PathBuf>,
    #[serde(default)]
    pub snr_model: Option<PathBuf>,
}

/// Command-line values that replace the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub snr_imp_db: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            Error::Config(format!("{}:{}: {}", path.display(), line, e.message()))
        })
    }

    /// Applies `overrides` to every section, so a command never sees a
    /// stale value.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out_dir {
            self.out_dir = out.clone();
        }
        if let Some(seed) = o.seed {
            if let Some(d) = &mut self.dataset {
                d.seed = seed;
            }
            if let Some(t) = &mut self.train {
                t.split_seed = seed;
                t.init_seed = seed;
                t.optimizer.seed = seed;
            }
            if let Some(s) = &mut self.simulate {
                s.seed = seed;
            }
            if let Some(s) = &mut self.sweep {
                match s {
                    SweepSection::Fig1(f) => f.seed = seed,
                    SweepSection::Fig4Grid(g) => g.seed = seed,
                    SweepSection::Fig6(l) | SweepSection::Fig7(l) | SweepSection::Fig8(l) => l.sim.seed = seed,
                }
            }
        }
        if let Some(imp) = o.snr_imp_db {
            if let Some(d) = &mut self.dataset {
                d.snr_imp_db = Some(imp);
            }
            if let Some(e) = &mut self.estimate {
                e.snr_imp_db = Some(imp);
            }
            if let Some(s) = &mut self.sweep {
                match s {
                    SweepSection::Fig1(_) => {}
                    SweepSection::Fig4Grid(g) => g.snr_imp_db = Some(imp),
                    SweepSection::Fig6(l) | SweepSection::Fig7(l) | SweepSection::Fig8(l) => l.snr_imp_db = Some(imp),
                }
            }
        }
    }
}

/// Reads, parses and overrides a config file. Validation is left to the
/// command, which knows which section it needs.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<(RunConfig, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let mut cfg = RunConfig::from_toml(&text, path)?;
    cfg.apply(overrides);
    Ok((cfg, text))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Re-labels a validation error with the config line of the offending key,
/// so messages point into the file.
pub(crate) fn locate(err: Error, text: &str, path: &Path) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => {
            let line = text
                .lines()
                .position(|l| {
                    let l = l.trim_start();
                    l.strip_prefix(name).is_some_and(|rest| rest.trim_start().starts_with('='))
                })
                .map(|i| i + 1);
            match line {
                Some(line) => Error::Config(format!("{}:{}: invalid `{}`: {}", path.display(), line, name, reason)),
                None => Error::Config(format!("{}: invalid `{}`: {}", path.display(), name, reason)),
            }
        }
        other => other,
    }
}

pub(crate) fn missing_section(path: &Path, section: &str) -> Error {
    Error::Config(format!("{}: missing [{}] section", path.display(), section))
}
