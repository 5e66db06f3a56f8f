//! Shows why eigenvalues read off an MMSE equalizer underestimate MDG, and
//! how far the correction factor and penalty removal get back.
//!
//! cargo run --example estimator_bias

use sdm_toolkit::channel::{eigen_spectrum, realize_link, sigma_g_for_target, sigma_mdg_from, LinkSpec, ModeTopology};
use sdm_toolkit::estimators::{
    conventional_sigma_mdg, corrected_sigma_mdg, effective_snr, mmse_eigen_spectrum, mmse_equalizer, sinr_per_stream,
    snr_from_sinr, snr_penalty_removed, Snr,
};
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let topology = ModeTopology::new(3)?;
    let d = topology.total_modes();
    let snr_imp = Snr::from_db(18.8)?;

    println!("target_db  snr_db  true_db  conv_db  corr_db  snr_conv_db");
    for target in [1.0, 3.0, 6.0] {
        let sigma_g = sigma_g_for_target(target, 50, d)?;
        let h = realize_link(&LinkSpec::flat(topology, 50, sigma_g, 9))?.matrices.remove(0);
        let truth = sigma_mdg_from(&eigen_spectrum(&h)?);
        for snr_db in [10.0, 17.0, 25.0] {
            // The receiver sees the optical SNR degraded by its own penalty.
            let seen = effective_snr(Snr::from_db(snr_db)?, snr_imp);
            let spectrum = mmse_eigen_spectrum(&mmse_equalizer(&h, seen)?)?;
            let sinr = sinr_per_stream(&h, seen)?;
            let snr_conv = match snr_penalty_removed(&sinr, snr_imp) {
                Ok(s) => format!("{:11.2}", s.db()),
                Err(_) => format!("{:>11}", "n/a"),
            };
            println!(
                "{target:9.1}  {snr_db:6.1}  {truth:7.2}  {:7.2}  {:7.2}  {snr_conv}   (mean SINR {:.2} dB)",
                conventional_sigma_mdg(&spectrum),
                corrected_sigma_mdg(&spectrum, seen).sigma_mdg_db,
                snr_from_sinr(&sinr).db(),
            );
        }
    }
    Ok(())
}
