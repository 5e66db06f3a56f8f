//! One transmission through a dispersive coupled link, equalized by the
//! supervised LMS, with features compared against the closed-form MMSE.
//!
//! cargo run --release --example lms_simulation

use sdm_toolkit::channel::{LinkSpec, ModeTopology, SectionSpec};
use sdm_toolkit::estimators::{conventional_sigma_mdg, snr_from_sinr};
use sdm_toolkit::txsim::{simulate, TxSimConfig};
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let mut link = LinkSpec::flat(ModeTopology::new(3)?, 20, 0.6, 4);
    link.section = SectionSpec {
        sigma_g_db: 0.6,
        span_length_km: 50.0,
        gd_std_ps_sqrt_km: 0.3,
    };
    let cfg = TxSimConfig::desk(link, Some(17.0), 8).with_resolved_channel();
    let out = simulate(&cfg)?;

    println!("true sigma_mdg {:.2} dB, LMS estimate {:.2} dB", out.sigma_mdg_true_db, conventional_sigma_mdg(&out.spectrum));
    println!(
        "SNR {:.1} dB, mean LS SINR {:.2} dB, SER {:.2e}, EVM {:.1} %",
        cfg.snr_db.unwrap_or(f64::INFINITY),
        snr_from_sinr(&out.sinr).db(),
        out.symbol_error_rate,
        out.evm_percent
    );
    println!("  lambda_true_db  lambda_mmse_db  lambda_lms_db");
    let mmse = out.mmse_spectrum.as_ref().expect("noise is on");
    for i in 0..out.spectrum.len() {
        println!(
            "  {:14.2}  {:14.2}  {:13.2}",
            out.true_spectrum.values_db()[i],
            mmse.values_db()[i],
            out.spectrum.values_db()[i]
        );
    }
    Ok(())
}
