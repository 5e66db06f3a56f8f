//! Acceptance suite. Every criterion prints one `ACn PASS|FAIL` line (written
//! straight to stderr so it survives output capture) and then asserts.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use sdm_toolkit::channel::{
    eigen_spectrum, realize_link, realize_prefixes, sigma_mdg_analytic, LinkSpec, ModeTopology,
};
use sdm_toolkit::estimators::{forward_eigen_map, mmse_eigen_spectrum, mmse_equalizer, Snr};
use sdm_toolkit::features::{generate_dataset, split_dataset, DatasetSpec};
use sdm_toolkit::linalg::{lin_to_db, linear_fit};
use sdm_toolkit::mlp::{gradient_check, init_model, train, Target, TrainConfig};
use sdm_toolkit::report::{
    calibrate_snr_imp, cmd_gen_dataset, cmd_simulate, cmd_sweep, cmd_train, eigen_evolution, error_grid, load_config,
    EigenEvolutionSpec, ErrorGridSpec, Overrides, SweepSection,
};
use sdm_toolkit::rng::{derive_seed, rng_from_seed};
use sdm_toolkit::txsim::{run_link_sweep, SweepEstimators};

// AC1
const EIGEN_MAP_TOL_DB: f64 = 1e-8;
// AC2
const FLOOR_TOL_DB: f64 = 1e-6;
const PLATEAU_SLOPE_DB_PER_SECTION: f64 = 0.05;
// AC3
const LAW_REL_TOL: f64 = 0.05;
const LAW_REALIZATIONS: usize = 200;
// AC4
const CONV_BIAS_HIGH_MDG_DB: f64 = 1.0;
const CONV_BIAS_LOW_MDG_DB: f64 = 0.3;
const SNR_UNDER_READ_DB: f64 = 3.0;
// AC5
const SIGMA_MSE_MAX_DB2: f64 = 0.2;
const SNR_MSE_MAX_DB2: f64 = 0.8;
// AC6
const LOSS_DROP_BY_EPOCH_100: f64 = 10.0;
const GENERALIZATION_RATIO: f64 = 1.5;
const GRADIENT_TOL: f64 = 1e-6;
// AC7
const CONV_TRACK_LIMIT_DB: f64 = 4.5;
const CONV_TRACK_TOL_DB: f64 = 0.5;
const SATURATION_RISE_DB: f64 = 2.0;
const SATURATION_FRACTION: f64 = 0.25;
const ANN_TRACK_LIMIT_DB: f64 = 10.0;
const ANN_TRACK_TOL_DB: f64 = 1.5;
// AC8
const SPREAD_MIN_R2: f64 = 0.95;

fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "{id} {verdict}: {detail}");
    assert!(pass, "{id} failed: {detail}");
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn out_to(dir: &Path) -> Overrides {
    Overrides {
        out_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    }
}

/// Column name to values; `nan` cells parse to NaN.
fn read_csv(path: &Path) -> BTreeMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for line in lines {
        for (h, cell) in header.iter().zip(line.split(',')) {
            cols.get_mut(h).unwrap().push(cell.parse().unwrap_or(f64::NAN));
        }
    }
    cols
}

#[test]
fn ac1_eigen_map_exactness() {
    let start = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for spatial in [1, 3, 6] {
        let topology = ModeTopology::new(spatial).unwrap();
        for snr_db in [10.0, 17.0, 25.0] {
            let snr = Snr::from_db(snr_db).unwrap();
            for i in 0..100u64 {
                let link = LinkSpec::flat(topology, 20, 1.0, derive_seed(spatial as u64 * 1000 + snr_db as u64, i));
                let h = &realize_link(&link).unwrap().matrices[0];
                let observed = mmse_eigen_spectrum(&mmse_equalizer(h, snr).unwrap()).unwrap();
                let mut predicted: Vec<f64> = eigen_spectrum(h)
                    .unwrap()
                    .linear()
                    .iter()
                    .map(|&l| lin_to_db(forward_eigen_map(l, snr)))
                    .collect();
                predicted.sort_by(|a, b| b.partial_cmp(a).unwrap());
                for (o, p) in observed.values_db().iter().zip(&predicted) {
                    worst = worst.max((o - p).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "AC1",
        worst < EIGEN_MAP_TOL_DB && secs < 10.0,
        &format!("900 channels, max |equalizer - map| = {worst:.2e} dB (tol {EIGEN_MAP_TOL_DB:e}), {secs:.1} s"),
    );
}

#[test]
fn ac2_floor_and_low_snr_plateau() {
    let spec = EigenEvolutionSpec {
        topology: ModeTopology::new(6).unwrap(),
        sigma_g_db: 1.0,
        num_sections: 50,
        span_length_km: 50.0,
        snr_db: vec![10.0],
        realizations: 50,
        lms_symbols: 0,
        seed: 17,
    };
    let snr = Snr::from_db(10.0).unwrap();
    let floor_db = lin_to_db(4.0 / snr.linear());

    // Floor on every individual equalizer, not only on the averages.
    let counts: Vec<usize> = (1..=spec.num_sections).collect();
    let mut lowest = f64::INFINITY;
    for r in 0..10u64 {
        let mut link = LinkSpec::flat(spec.topology, spec.num_sections, spec.sigma_g_db, derive_seed(spec.seed, r));
        link.section.span_length_km = spec.span_length_km;
        for real in realize_prefixes(&link, &counts).unwrap() {
            let s = mmse_eigen_spectrum(&mmse_equalizer(&real.matrices[0], snr).unwrap()).unwrap();
            lowest = lowest.min(s.min_db());
        }
    }
    let floor_ok = lowest >= floor_db - FLOOR_TOL_DB;

    let rows = eigen_evolution(&spec).unwrap();
    let tail: Vec<_> = rows.iter().filter(|r| (20..=50).contains(&r.num_sections)).collect();
    let x: Vec<f64> = tail.iter().map(|r| r.num_sections as f64).collect();
    let mmse_min: Vec<f64> = tail.iter().map(|r| r.mmse_min_db).collect();
    let true_min: Vec<f64> = rows.iter().map(|r| r.true_min_db).collect();
    let (mmse_slope, _, _) = linear_fit(&x, &mmse_min);
    let all_x: Vec<f64> = rows.iter().map(|r| r.num_sections as f64).collect();
    let (true_slope, _, _) = linear_fit(&all_x, &true_min);
    let true_tail_slope = linear_fit(&x, &tail.iter().map(|r| r.true_min_db).collect::<Vec<_>>()).0;

    let pass = floor_ok
        && mmse_slope.abs() < PLATEAU_SLOPE_DB_PER_SECTION
        && true_slope < 0.0
        && true_tail_slope < 0.0;
    report(
        "AC2",
        pass,
        &format!(
            "lowest MMSE eigenvalue {lowest:.6} dB vs floor {floor_db:.6} dB; MMSE min slope {mmse_slope:+.4} dB/section \
             over 20-50 (tol {PLATEAU_SLOPE_DB_PER_SECTION}); true min slope {true_slope:+.3} (all) {true_tail_slope:+.3} (20-50)"
        ),
    );
}

#[test]
fn ac3_statistical_law() {
    let topology = ModeTopology::new(6).unwrap();
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for k in [10, 25, 50] {
        let mean = (0..LAW_REALIZATIONS as u64)
            .map(|r| {
                realize_link(&LinkSpec::flat(topology, k, 1.0, derive_seed(k as u64, r)))
                    .unwrap()
                    .sigma_mdg_db()
                    .unwrap()
            })
            .sum::<f64>()
            / LAW_REALIZATIONS as f64;
        let law = sigma_mdg_analytic(1.0, k, topology.total_modes());
        let rel = (mean - law).abs() / law;
        worst = worst.max(rel);
        detail.push(format!("K={k}: {mean:.3} vs {law:.3} dB"));
    }
    report(
        "AC3",
        worst <= LAW_REL_TOL,
        &format!("{}; worst relative gap {:.2}% (tol {}%)", detail.join(", "), 100.0 * worst, 100.0 * LAW_REL_TOL),
    );
}

#[test]
fn ac4_conventional_bias() {
    let spec = ErrorGridSpec {
        topology: ModeTopology::new(3).unwrap(),
        num_sections: 50,
        sigma_mdg_range_db: [0.2, 6.2],
        sigma_points: 13,
        snr_range_db: [10.0, 25.0],
        snr_points: 16,
        realizations: 20,
        snr_imp_db: Some(18.8),
        sigma_model: None,
        snr_model: None,
        seed: 4,
    };
    let rows = error_grid(&spec, None, None).unwrap();
    let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let high_low: Vec<f64> = rows
        .iter()
        .filter(|r| r.sigma_mdg_target_db >= 5.0 && near(r.snr_db, 10.0))
        .map(|r| r.sigma_conv_err_db.abs())
        .collect();
    let low_high: Vec<f64> = rows
        .iter()
        .filter(|r| r.sigma_mdg_target_db <= 1.0 && near(r.snr_db, 25.0))
        .map(|r| r.sigma_conv_err_db.abs())
        .collect();
    let under: Vec<f64> = rows
        .iter()
        .filter(|r| r.sigma_mdg_target_db >= 5.0 && r.snr_db >= 20.0)
        .map(|r| r.snr_conv_err_db.map_or(f64::INFINITY, |e| -e))
        .collect();
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = !high_low.is_empty()
        && !low_high.is_empty()
        && !under.is_empty()
        && min(&high_low) >= CONV_BIAS_HIGH_MDG_DB
        && max(&low_high) <= CONV_BIAS_LOW_MDG_DB
        && min(&under) >= SNR_UNDER_READ_DB;
    report(
        "AC4",
        pass,
        &format!(
            "D=6, snr_imp 18.8 dB: |sigma err| >= {:.2} dB at (>=5, 10) [need {CONV_BIAS_HIGH_MDG_DB}], \
             <= {:.3} dB at (<=1, 25) [need {CONV_BIAS_LOW_MDG_DB}], SNR under-read >= {:.2} dB at (>=5, >=20) [need {SNR_UNDER_READ_DB}]",
            min(&high_low),
            max(&low_high),
            min(&under)
        ),
    );
}

struct TrainingRun {
    dir: PathBuf,
    records: usize,
    split: (usize, usize),
    batch_size: u64,
    secs: f64,
}

/// The shipped corpus and training configs, run once through the commands
/// and shared by AC5 and AC6.
fn training_run() -> &'static TrainingRun {
    static RUN: OnceLock<TrainingRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = std::time::Instant::now();
        let dir = scratch("training");
        let data_dir = dir.join("dataset");
        cmd_gen_dataset(&config_path("dataset.toml"), &out_to(&data_dir)).unwrap();
        let dataset = data_dir.join("dataset.csv");
        let text = std::fs::read_to_string(config_path("train.toml"))
            .unwrap()
            .replace("out/dataset/dataset.csv", &dataset.display().to_string());
        let train_cfg = dir.join("train.toml");
        std::fs::write(&train_cfg, text).unwrap();
        let out = cmd_train(&train_cfg, &out_to(&dir.join("train"))).unwrap();

        let effective = &out.manifest.effective;
        let records = std::fs::read_to_string(&dataset).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1;
        let note = out.manifest.notes.iter().find(|n| n.contains("train")).cloned().unwrap_or_default();
        let nums: Vec<usize> = note.split(|c: char| !c.is_ascii_digit()).filter_map(|s| s.parse().ok()).collect();
        TrainingRun {
            dir: dir.join("train"),
            records,
            split: (nums[1], nums[2]),
            batch_size: effective["optimizer"]["batch_size"].as_u64().unwrap(),
            secs: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn ac5_ann_advantage() {
    let run = training_run();
    let summary = read_csv(&run.dir.join("train_summary.csv"));
    let loss = read_csv(&run.dir.join("fig3_loss_sigma_mdg.csv"));
    let (test, conv) = (&summary["test_mse_db2"], &summary["conventional_test_mse_db2"]);
    let (sigma, snr) = ((test[0], conv[0]), (test[1], conv[1]));
    let pass = run.records == 9610
        && run.split == (8649, 961)
        && loss["epoch"].len() == 500
        && run.batch_size == 5
        && sigma.0 <= SIGMA_MSE_MAX_DB2
        && snr.0 <= SNR_MSE_MAX_DB2
        && sigma.0 < sigma.1
        && snr.0 < snr.1
        && run.secs < 900.0;
    report(
        "AC5",
        pass,
        &format!(
            "{} records ({}/{}), 500 epochs, batch {}: sigma test MSE {:.4} dB2 (conv {:.4}, max {SIGMA_MSE_MAX_DB2}), \
             SNR test MSE {:.4} dB2 (conv {:.4}, max {SNR_MSE_MAX_DB2}), {:.0} s",
            run.records, run.split.0, run.split.1, run.batch_size, sigma.0, sigma.1, snr.0, snr.1, run.secs
        ),
    );
}

#[test]
fn ac6_training_health() {
    let run = training_run();
    let mut detail = Vec::new();
    let mut pass = true;
    for target in ["sigma_mdg", "snr"] {
        let loss = read_csv(&run.dir.join(format!("fig3_loss_{target}.csv")));
        let (train_mse, test_mse) = (&loss["train_mse_db2"], &loss["test_mse_db2"]);
        let drop = train_mse[0] / train_mse[99];
        let ratio = test_mse[499] / train_mse[499];
        pass &= drop >= LOSS_DROP_BY_EPOCH_100 && ratio <= GENERALIZATION_RATIO;
        detail.push(format!("{target}: epoch 1->100 drop {drop:.1}x, test/train at 500 {ratio:.3}"));
    }

    let spec = DatasetSpec {
        topology: ModeTopology::new(3).unwrap(),
        num_sections: 50,
        sigma_mdg_range_db: [0.2, 6.2],
        snr_range_db: [10.0, 25.0],
        snr_points: 5,
        realizations: 20,
        snr_imp_db: Some(18.8),
        seed: 8,
    };
    let ds = generate_dataset(&spec).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let target = if i % 2 == 0 { Target::SigmaMdg } else { Target::Snr };
        let model = init_model(spec.topology, target, &mut rng_from_seed(derive_seed(99, i)));
        worst = worst.max(gradient_check(&model, &ds.records[i as usize % ds.len()]).unwrap());
    }
    pass &= worst < GRADIENT_TOL;
    detail.push(format!("gradient check max {worst:.2e} over 100 models (tol {GRADIENT_TOL:e})"));
    report("AC6", pass, &detail.join("; "));
}

#[test]
fn ac7_long_haul_regimes() {
    let start = std::time::Instant::now();
    let (cfg, _) = load_config(&config_path("sweep_fig8.toml"), &Overrides::default()).unwrap();
    let Some(SweepSection::Fig8(spec)) = cfg.sweep else {
        panic!("sweep_fig8.toml must hold a fig8 sweep")
    };
    let sim = spec.sim.clone().with_default_grid();
    let snr_imp_db = calibrate_snr_imp(&sim).unwrap();

    // D = 12 regressors trained on an analytic corpus covering the sweep.
    let corpus = generate_dataset(&DatasetSpec {
        topology: sim.channel.topology,
        num_sections: 50,
        sigma_mdg_range_db: [0.2, 22.0],
        snr_range_db: [6.0, 28.0],
        snr_points: 15,
        realizations: 3069,
        snr_imp_db: Some(snr_imp_db),
        seed: 2024,
    })
    .unwrap();
    let (train_set, test_set) = split_dataset(&corpus, 0.9, 1).unwrap();
    let optimizer = TrainConfig {
        epochs: 100,
        ..TrainConfig::default()
    };
    let fit = |target: Target, i: u64| {
        let initial = init_model(sim.channel.topology, target, &mut rng_from_seed(derive_seed(3, i)));
        train(&initial, &train_set, &test_set, &optimizer).unwrap().0
    };
    let estimators = SweepEstimators {
        sigma_model: Some(fit(Target::SigmaMdg, 0)),
        snr_model: Some(fit(Target::Snr, 1)),
        snr_imp_db: Some(snr_imp_db),
    };
    let points = run_link_sweep(&sim, &spec.span_counts, spec.noise, &estimators).unwrap();

    let truth: Vec<f64> = points.iter().map(|p| p.sigma_mdg_true_db).collect();
    let conv: Vec<f64> = points.iter().map(|p| p.sigma_conv_db).collect();

    let tracking = points
        .iter()
        .filter(|p| p.sigma_mdg_true_db <= CONV_TRACK_LIMIT_DB)
        .map(|p| (p.sigma_conv_db - p.sigma_mdg_true_db).abs())
        .fold(0.0, f64::max);
    let underestimates = points
        .iter()
        .filter(|p| p.sigma_mdg_true_db > CONV_TRACK_LIMIT_DB)
        .all(|p| p.sigma_conv_db < p.sigma_mdg_true_db);
    // Saturation: a run of consecutive distances over which the truth keeps
    // rising while the conventional estimate barely moves.
    let mut saturation: Option<(usize, usize, f64, f64)> = None;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (dt, dc) = (truth[j] - truth[i], conv[j] - conv[i]);
            if dt >= SATURATION_RISE_DB && dc < SATURATION_FRACTION * dt && saturation.is_none() {
                saturation = Some((points[i].num_sections, points[j].num_sections, dt, dc));
            }
        }
    }
    let corr_gap = points
        .iter()
        .map(|p| p.sigma_corr_db - p.sigma_conv_db)
        .fold(f64::INFINITY, f64::min);
    let ann_err = points
        .iter()
        .filter(|p| p.sigma_mdg_true_db <= ANN_TRACK_LIMIT_DB)
        .map(|p| (p.sigma_ann_db.unwrap() - p.sigma_mdg_true_db).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();

    let pass = points.len() == 20
        && sim.channel.topology.total_modes() == 12
        && tracking <= CONV_TRACK_TOL_DB
        && underestimates
        && saturation.is_some()
        && corr_gap >= -1e-9
        && ann_err <= ANN_TRACK_TOL_DB
        && secs < 1800.0;
    let sat = saturation.map_or("none".to_string(), |(a, b, dt, dc)| {
        format!("spans {a}-{b}: truth +{dt:.2} dB, conventional +{dc:.2} dB")
    });
    report(
        "AC7",
        pass,
        &format!(
            "20 distances, D=12, snr_imp {snr_imp_db:.1} dB; conv max err {tracking:.3} dB up to {CONV_TRACK_LIMIT_DB} dB \
             (tol {CONV_TRACK_TOL_DB}); underestimates beyond: {underestimates}; saturation {sat}; \
             min(corr - conv) {corr_gap:+.3} dB; ANN max err {ann_err:.3} dB up to {ANN_TRACK_LIMIT_DB} dB (tol {ANN_TRACK_TOL_DB}); \
             truth spans {:.2}-{:.2} dB; {secs:.0} s",
            truth.first().unwrap(),
            truth.last().unwrap()
        ),
    );
}

#[test]
fn ac8_delay_spread_linearity() {
    let dir = scratch("fig7");
    cmd_sweep(&config_path("sweep_fig7.toml"), &out_to(&dir)).unwrap();
    let table = read_csv(&dir.join("fig7_spread.csv"));
    let (x, y) = (&table["distance_km"], &table["spread_ps"]);
    let (slope, _, r2) = linear_fit(x, y);
    let pass = x.len() == 5 && y.iter().all(|v| v.is_finite()) && slope > 0.0 && r2 > SPREAD_MIN_R2;
    let spreads: Vec<String> = y.iter().map(|v| format!("{v:.1}")).collect();
    report(
        "AC8",
        pass,
        &format!(
            "spread [{}] ps over {} distances, slope {:.4} ps/km, R2 {r2:.4} (min {SPREAD_MIN_R2})",
            spreads.join(", "),
            x.len(),
            slope
        ),
    );
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Runs every pipeline into `dir` and returns its CSV files by relative path.
fn run_pipelines(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let cfgs = dir.join("configs");
    std::fs::create_dir_all(&cfgs).unwrap();
    let dataset = dir.join("dataset");
    cmd_gen_dataset(&config_path("dataset.toml"), &out_to(&dataset)).unwrap();
    let train_cfg = write_config(
        &cfgs,
        "train.toml",
        &format!(
            "[train]\ndataset = {:?}\nsplit_seed = 1\ninit_seed = 3\n\n[train.optimizer]\nepochs = 20\n",
            dataset.join("dataset.csv").display().to_string()
        ),
    );
    cmd_train(&train_cfg, &out_to(&dir.join("train"))).unwrap();
    cmd_simulate(&config_path("simulate.toml"), &out_to(&dir.join("simulate"))).unwrap();
    let fig1 = write_config(
        &cfgs,
        "fig1.toml",
        "[sweep]\nkind = \"fig1\"\ntopology = { spatial_modes = 3 }\nsigma_g_db = 1.0\nnum_sections = 10\n\
         span_length_km = 50.0\nsnr_db = [10.0, 20.0]\nrealizations = 5\nlms_symbols = 4000\nseed = 1\n",
    );
    cmd_sweep(&fig1, &out_to(&dir.join("fig1"))).unwrap();
    let fig4 = write_config(
        &cfgs,
        "fig4.toml",
        &format!(
            "[sweep]\nkind = \"fig4_grid\"\ntopology = {{ spatial_modes = 3 }}\nnum_sections = 50\n\
             sigma_mdg_range_db = [0.2, 6.2]\nsigma_points = 4\nsnr_range_db = [10.0, 25.0]\nsnr_points = 4\n\
             realizations = 3\nsnr_imp_db = 18.8\nsigma_model = {:?}\nsnr_model = {:?}\nseed = 2\n",
            dir.join("train/model_sigma_mdg.json").display().to_string(),
            dir.join("train/model_snr.json").display().to_string()
        ),
    );
    cmd_sweep(&fig4, &out_to(&dir.join("fig4"))).unwrap();
    cmd_sweep(&config_path("sweep_fig7.toml"), &out_to(&dir.join("fig7"))).unwrap();

    let mut files = BTreeMap::new();
    for stage in ["dataset", "train", "simulate", "fig1", "fig4", "fig7"] {
        for entry in std::fs::read_dir(dir.join(stage)).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "csv") {
                let name = format!("{stage}/{}", path.file_name().unwrap().to_string_lossy());
                files.insert(name, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn ac9_determinism() {
    let first = run_pipelines(&scratch("determinism_a"));
    let second = run_pipelines(&scratch("determinism_b"));
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let same_set = first.keys().eq(second.keys());
    let pass = same_set && differing.is_empty() && first.len() >= 12;
    report(
        "AC9",
        pass,
        &format!(
            "{} CSV files across gen-dataset, train, simulate and three sweeps; differing: {:?}",
            first.len(),
            differing
        ),
    );
}
