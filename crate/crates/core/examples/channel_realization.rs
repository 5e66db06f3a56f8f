//! Realizes strongly coupled multisection links and compares the
//! Monte-Carlo MDG with the closed-form accumulation law.
//!
//! cargo run --example channel_realization

use sdm_toolkit::channel::{
    eigen_spectrum, peak_to_peak_mdg, realize_link, sigma_mdg_analytic, sigma_mdg_from, LinkSpec, ModeTopology,
};
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let topology = ModeTopology::new(6)?; // 12 modes with polarization
    let sigma_g_db = 1.0;

    println!("sections  mc_sigma_mdg_db  analytic_db  peak_to_peak_db");
    for sections in [10, 25, 50] {
        let mut total = 0.0;
        let mut p2p = 0.0;
        let runs = 200;
        for seed in 0..runs {
            let link = realize_link(&LinkSpec::flat(topology, sections, sigma_g_db, seed))?;
            let spectrum = eigen_spectrum(&link.matrices[0])?;
            total += sigma_mdg_from(&spectrum);
            p2p += peak_to_peak_mdg(&spectrum);
        }
        println!(
            "{sections:8}  {:15.3}  {:11.3}  {:15.3}",
            total / runs as f64,
            sigma_mdg_analytic(sigma_g_db, sections, topology.total_modes()),
            p2p / runs as f64
        );
    }
    Ok(())
}
