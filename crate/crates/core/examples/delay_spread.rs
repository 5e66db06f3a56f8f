//! Delay spread of the equalizer impulse response over a weakly coupled
//! recirculating loop, where modal dispersion accumulates linearly.
//!
//! cargo run --release --example delay_spread

use sdm_toolkit::channel::{Coupling, LinkSpec, ModeTopology, SectionSpec};
use sdm_toolkit::linalg::linear_fit;
use sdm_toolkit::txsim::{run_link_sweep, NoiseModel, SweepEstimators, TxSimConfig};
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let link = LinkSpec {
        topology: ModeTopology::new(3)?,
        num_sections: 10,
        section: SectionSpec {
            sigma_g_db: 0.1,
            span_length_km: 50.0,
            gd_std_ps_sqrt_km: 1.0,
        },
        freq_grid: Vec::new(),
        coupling: Coupling::Uncoupled,
        seed: 3,
    };
    let mut cfg = TxSimConfig::desk(link, None, 7).with_resolved_channel();
    cfg.lms.num_taps = 41;

    let spans = [2, 4, 6, 8, 10];
    let points = run_link_sweep(&cfg, &spans, NoiseModel::Fixed { snr_db: 20.0 }, &SweepEstimators::default())?;
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.spread_ps.map(|s| (p.distance_km, s)))
        .unzip();
    for (d, s) in x.iter().zip(&y) {
        println!("{d:6.0} km  {s:6.2} ps");
    }
    let (slope, intercept, r2) = linear_fit(&x, &y);
    println!("spread = {intercept:.2} ps + {:.3} ps/100 km, R^2 = {r2:.4}", 100.0 * slope);
    Ok(())
}
