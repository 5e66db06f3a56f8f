//! A short long-haul sweep: one strongly coupled link observed at growing
//! lengths with amplifier noise accumulating, conventional versus
//! correction-factor estimates.
//!
//! cargo run --release --example link_sweep

use sdm_toolkit::channel::{Coupling, LinkSpec, ModeTopology, SectionSpec};
use sdm_toolkit::report::calibrate_snr_imp;
use sdm_toolkit::txsim::{run_link_sweep, NoiseModel, SweepEstimators, TxSimConfig};
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let link = LinkSpec {
        topology: ModeTopology::new(3)?,
        num_sections: 40,
        section: SectionSpec {
            sigma_g_db: 1.5,
            span_length_km: 59.0,
            gd_std_ps_sqrt_km: 0.3,
        },
        freq_grid: Vec::new(),
        coupling: Coupling::Strong,
        seed: 11,
    };
    let mut cfg = TxSimConfig::desk(link, None, 5).with_resolved_channel();
    cfg.num_symbols = 30_000;

    let estimators = SweepEstimators {
        snr_imp_db: Some(calibrate_snr_imp(&cfg)?),
        ..SweepEstimators::default()
    };
    println!("calibrated receiver penalty {:.1} dB", estimators.snr_imp_db.unwrap_or_default());
    let noise = NoiseModel::AmplifierAccumulation { first_span_snr_db: 26.83 };
    let points = run_link_sweep(&cfg, &[1, 5, 10, 20, 40], noise, &estimators)?;

    println!("distance_km  true_db  conv_db  corr_db  snr_true_db  snr_conv_db");
    for p in &points {
        println!(
            "{:11.0}  {:7.2}  {:7.2}  {:7.2}  {:11.2}  {:11.2}",
            p.distance_km,
            p.sigma_mdg_true_db,
            p.sigma_conv_db,
            p.sigma_corr_db,
            p.snr_true_db,
            p.snr_conv_db.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
