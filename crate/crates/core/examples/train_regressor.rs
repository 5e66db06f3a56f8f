//! Generates a labelled corpus, trains both regressors and compares them
//! with the conventional estimators on the held-out split.
//!
//! cargo run --release --example train_regressor

use sdm_toolkit::channel::ModeTopology;
use sdm_toolkit::features::{generate_dataset, split_dataset, DatasetSpec};
use sdm_toolkit::mlp::{evaluate, init_model, model_from_json, model_to_json, train, Target, TrainConfig};
use sdm_toolkit::report::conventional_snr_db;
use sdm_toolkit::estimators::conventional_sigma_mdg;
use sdm_toolkit::rng::rng_from_seed;
use sdm_toolkit::Result;

fn main() -> Result<()> {
    let spec = DatasetSpec {
        topology: ModeTopology::new(3)?,
        num_sections: 50,
        sigma_mdg_range_db: [0.2, 6.2],
        snr_range_db: [10.0, 25.0],
        snr_points: 10,
        realizations: 300,
        snr_imp_db: Some(18.8),
        seed: 1,
    };
    let ds = generate_dataset(&spec)?;
    let (train_set, test_set) = split_dataset(&ds, 0.9, 2)?;
    println!("{} records ({} train / {} test)", ds.len(), train_set.len(), test_set.len());

    let cfg = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    for target in [Target::SigmaMdg, Target::Snr] {
        let initial = init_model(spec.topology, target, &mut rng_from_seed(3));
        let (model, history) = train(&initial, &train_set, &test_set, &cfg)?;

        let conventional: Vec<f64> = test_set
            .records
            .iter()
            .filter_map(|r| {
                let labels = r.labels?;
                let estimate = match target {
                    Target::SigmaMdg => Some(conventional_sigma_mdg(&r.spectrum())),
                    Target::Snr => conventional_snr_db(r, spec.snr_imp_db).ok().flatten(),
                }?;
                Some((estimate - target.label(&labels)).powi(2))
            })
            .collect();
        println!(
            "{:9}: epoch 1 {:.4}, epoch {} {:.4} dB^2; test {:.4} vs conventional {:.4} dB^2",
            target.name(),
            history.train_mse[0],
            cfg.epochs,
            history.train_mse[cfg.epochs - 1],
            evaluate(&model, &test_set)?.mse,
            conventional.iter().sum::<f64>() / conventional.len() as f64
        );

        // The JSON model file round-trips exactly.
        let restored = model_from_json(&model_to_json(&model))?;
        assert_eq!(restored, model);
    }
    Ok(())
}
