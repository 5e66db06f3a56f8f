//! Run configuration, experiment drivers and CSV emission behind the
//! `sdm-toolkit` binary.
//!
//! Every command reads one TOML file, writes its tables into `out_dir`
//! and leaves a `manifest.json` beside them with the config hash, the
//! seeds and the effective (post-override) section. Column names carry
//! their unit as a suffix.

mod commands;
mod config;
mod experiments;
mod manifest;
mod table;

pub use commands::{
    cmd_estimate, cmd_gen_dataset, cmd_simulate, cmd_sweep, cmd_train, spread_table, sweep_table, CommandOutput,
    SWEEP_COLUMNS,
};
pub use config::{
    load_config, EigenEvolutionSpec, ErrorGridSpec, EstimateSection, FeatureSource, LinkSweepSpec, Overrides,
    RunConfig, SweepSection, TrainSection,
};
pub use experiments::{
    calibrate_snr_imp, conventional_snr_db, eigen_evolution, error_grid, EigenRow, GridRow,
};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use table::{num, opt, Table};
