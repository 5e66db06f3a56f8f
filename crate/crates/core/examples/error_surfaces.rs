//! Estimator error surfaces over a (sigma_mdg, SNR) grid, parsed from the
//! same TOML the `sweep` command reads and written as a CSV table.
//!
//! cargo run --release --example error_surfaces

use std::path::Path;

use sdm_toolkit::report::{error_grid, num, opt, RunConfig, SweepSection, Table};
use sdm_toolkit::{Error, Result};

const CONFIG: &str = r#"
[sweep]
kind = "fig4_grid"
topology = { spatial_modes = 3 }
num_sections = 50
sigma_mdg_range_db = [0.2, 6.2]
sigma_points = 4
snr_range_db = [10.0, 25.0]
snr_points = 4
realizations = 10
snr_imp_db = 18.8
seed = 4
"#;

fn main() -> Result<()> {
    let cfg = RunConfig::from_toml(CONFIG, Path::new("inline.toml"))?;
    let Some(SweepSection::Fig4Grid(spec)) = cfg.sweep else {
        return Err(Error::Config("expected a fig4_grid sweep".into()));
    };
    // Two decimals; adding 0.0 turns -0 into 0.
    let r = |x: f64| num((x * 100.0).round() / 100.0 + 0.0);
    let mut table = Table::new(&["sigma_mdg_true_db", "snr_db", "sigma_conv_err_db", "sigma_corr_err_db", "snr_conv_err_db"]);
    for row in error_grid(&spec, None, None)? {
        table.push(vec![
            r(row.sigma_mdg_true_db),
            num(row.snr_db),
            r(row.sigma_conv_err_db),
            r(row.sigma_corr_err_db),
            row.snr_conv_err_db.map_or_else(|| opt(None), r),
        ]);
    }
    table.write(std::io::stdout().lock())
}
