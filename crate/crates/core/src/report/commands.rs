use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::channel::ModeTopology;
use crate::error::{Error, Result};
use crate::estimators::{conventional_sigma_mdg, corrected_sigma_mdg, effective_snr, Snr};
use crate::features::{
    features_from_taps, generate_dataset, load_dataset, read_taps_csv, read_traces_csv, save_dataset, split_dataset,
    write_taps_csv, write_traces_csv, Dataset, DatasetMeta, FeatureRecord,
};
use crate::linalg::linspace;
use crate::mlp::{evaluate, init_model, load_model, model_to_json, predict, train, MlpModel, Target};
use crate::rng::{derive_seed, rng_from_seed};
use crate::txsim::{impulse_response_spread, run_link_sweep, simulate, SweepEstimators, SweepPoint};

use super::config::{load_config, locate, missing_section, FeatureSource, LinkSweepSpec, Overrides, SweepSection};
use super::experiments::{calibrate_snr_imp, conventional_snr_db, eigen_evolution, error_grid};
use super::manifest::Manifest;
use super::table::{num, opt, Table};

/// Files a command wrote, manifest included.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub manifest: Manifest,
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
    manifest: Manifest,
}

impl Writer {
    fn new(dir: &Path, manifest: Manifest) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            manifest,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let p = self.path(name);
        table.save(&p)
    }

    fn finish(self) -> Result<CommandOutput> {
        self.manifest.save(&self.dir)?;
        Ok(CommandOutput {
            out_dir: self.dir,
            files: self.files,
            manifest: self.manifest,
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::file(path, e))
}

/// `gen-dataset`: the labelled corpus as `dataset.csv`.
pub fn cmd_gen_dataset(config: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let (cfg, text) = load_config(config, overrides)?;
    let spec = cfg.dataset.ok_or_else(|| missing_section(config, "dataset"))?;
    spec.validate().map_err(|e| locate(e, &text, config))?;

    let ds = generate_dataset(&spec)?;
    let mut manifest = Manifest::new("gen-dataset", &text, &spec)?;
    manifest.seed("dataset", spec.seed);
    if ds.regenerated > 0 {
        manifest
            .notes
            .push(format!("{} realizations redrawn after a singular channel", ds.regenerated));
    }
    let mut w = Writer::new(&cfg.out_dir, manifest)?;
    let p = w.path("dataset.csv");
    save_dataset(&ds, &p)?;
    w.finish()
}

/// Conventional estimates of a record: `σ_mdg` and, when resolvable, SNR.
fn conventional_pair(record: &FeatureRecord, snr_imp_db: Option<f64>) -> Result<(f64, Option<f64>)> {
    Ok((conventional_sigma_mdg(&record.spectrum()), conventional_snr_db(record, snr_imp_db)?))
}

fn conventional_mse(ds: &Dataset, target: Target) -> Result<Option<f64>> {
    let mut errs = Vec::with_capacity(ds.len());
    for r in &ds.records {
        let Some(labels) = r.labels else { continue };
        let (sigma, snr) = conventional_pair(r, ds.meta.snr_imp_db)?;
        let est = match target {
            Target::SigmaMdg => Some(sigma),
            Target::Snr => snr,
        };
        if let Some(e) = est {
            errs.push((e - target.label(&labels)).powi(2));
        }
    }
    Ok((!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64))
}

/// `train`: one model per target, with per-epoch losses and a summary that
/// sets the models against the conventional estimators on the test split.
pub fn cmd_train(config: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let (cfg, text) = load_config(config, overrides)?;
    let section = cfg.train.ok_or_else(|| missing_section(config, "train"))?;
    section.optimizer.validate().map_err(|e| locate(e, &text, config))?;
    if !(section.train_fraction > 0.0 && section.train_fraction < 1.0) {
        return Err(locate(
            Error::invalid("train_fraction", "must lie strictly between 0 and 1"),
            &text,
            config,
        ));
    }
    if section.targets.is_empty() {
        return Err(locate(Error::invalid("targets", "must name at least one target"), &text, config));
    }

    let ds = load_dataset(&section.dataset)?;
    let topology = ModeTopology::from_total_modes(ds.meta.total_modes)?;
    let (train_set, test_set) = split_dataset(&ds, section.train_fraction, section.split_seed)?;

    let mut manifest = Manifest::new("train", &text, &section)?;
    manifest.seed("split", section.split_seed);
    manifest.seed("optimizer", section.optimizer.seed);
    manifest.notes.push(format!(
        "{} records: {} train, {} test",
        ds.len(),
        train_set.len(),
        test_set.len()
    ));
    let mut w = Writer::new(&cfg.out_dir, manifest)?;
    let mut summary = Table::new(&["target", "train_mse_db2", "test_mse_db2", "conventional_test_mse_db2"]);

    for (i, &target) in section.targets.iter().enumerate() {
        let init_seed = derive_seed(section.init_seed, i as u64);
        w.manifest.seed(format!("init_{}", target.name()), init_seed);
        let initial = init_model(topology, target, &mut rng_from_seed(init_seed));
        let (model, history) = train(&initial, &train_set, &test_set, &section.optimizer)?;

        let mut loss = Table::new(&["epoch", "train_mse_db2", "test_mse_db2"]);
        for (e, (tr, te)) in history.train_mse.iter().zip(&history.test_mse).enumerate() {
            loss.push(vec![(e + 1).to_string(), num(*tr), num(*te)]);
        }
        w.table(&format!("fig3_loss_{}.csv", target.name()), &loss)?;
        let p = w.path(&format!("model_{}.json", target.name()));
        std::fs::write(&p, model_to_json(&model)).map_err(|e| Error::file(&p, e))?;

        summary.push(vec![
            target.name().to_string(),
            num(evaluate(&model, &train_set)?.mse),
            num(evaluate(&model, &test_set)?.mse),
            opt(conventional_mse(&test_set, target)?),
        ]);
    }
    w.table("train_summary.csv", &summary)?;
    w.finish()
}

fn load_checked(path: &Option<PathBuf>, target: Target, dim: usize) -> Result<Option<MlpModel>> {
    let Some(path) = path else { return Ok(None) };
    let model = load_model(path)?;
    if model.target() != target {
        return Err(Error::Format(format!(
            "{}: model estimates `{}`, expected `{}`",
            path.display(),
            model.target().name(),
            target.name()
        )));
    }
    if model.input_dim() != 2 * dim {
        return Err(Error::DimensionMismatch {
            context: "model input vs record features",
            expected: 2 * dim,
            found: model.input_dim(),
        });
    }
    Ok(Some(model))
}

/// `estimate`: every estimator on every input record.
pub fn cmd_estimate(config: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let (cfg, text) = load_config(config, overrides)?;
    let section = cfg.estimate.ok_or_else(|| missing_section(config, "estimate"))?;
    if section.snr_imp_db.is_some_and(|v| !v.is_finite()) {
        return Err(locate(Error::invalid("snr_imp_db", "must be finite"), &text, config));
    }

    let records = match &section.source {
        FeatureSource::Dataset { path } => load_dataset(path)?.records,
        FeatureSource::Capture {
            taps,
            traces,
            tap_spacing_s,
            baud,
            rolloff,
            band_points,
        } => {
            if !(*baud > 0.0 && (0.0..1.0).contains(rolloff) && *band_points >= 1) {
                return Err(locate(
                    Error::invalid("baud", "capture needs baud > 0, 0 <= rolloff < 1, band_points >= 1"),
                    &text,
                    config,
                ));
            }
            let taps = read_taps_csv(taps, *tap_spacing_s)?;
            let (equalized, reference) = read_traces_csv(traces)?;
            let edge = 0.5 * (1.0 - rolloff) * baud;
            let band = if *band_points == 1 {
                vec![0.0]
            } else {
                linspace(-edge, edge, *band_points)
            };
            vec![features_from_taps(&taps, &band, &equalized, &reference)?.record]
        }
    };
    let dim = records.first().map_or(0, FeatureRecord::dim);
    let sigma_model = load_checked(&section.sigma_model, Target::SigmaMdg, dim)?;
    let snr_model = load_checked(&section.snr_model, Target::Snr, dim)?;
    let imp = section.snr_imp_db.map_or(Ok(Snr::INFINITE), Snr::from_db)?;

    let mut table = Table::new(&[
        "record",
        "sigma_mdg_label_db",
        "snr_label_db",
        "sigma_conv_db",
        "sigma_corr_db",
        "sigma_ann_db",
        "snr_conv_db",
        "snr_ann_db",
        "corr_input_snr_db",
        "floor_clamped",
    ]);
    let mut clamped_records = 0;
    for (i, r) in records.iter().enumerate() {
        let (sigma_conv, snr_conv) = conventional_pair(r, section.snr_imp_db)?;
        let known = r.labels.map(|l| l.snr_db).or(section.known_snr_db).or(snr_conv);
        let corr = known
            .map(|s| Snr::from_db(s).map(|s| corrected_sigma_mdg(&r.spectrum(), effective_snr(s, imp))))
            .transpose()?;
        let clamped = corr.as_ref().map_or(0, |c| c.clamped);
        if clamped > 0 {
            clamped_records += 1;
        }
        let ann = |m: &Option<MlpModel>| m.as_ref().map(|m| predict(m, r)).transpose();
        table.push(vec![
            i.to_string(),
            opt(r.labels.map(|l| l.sigma_mdg_db)),
            opt(r.labels.map(|l| l.snr_db)),
            num(sigma_conv),
            opt(corr.map(|c| c.sigma_mdg_db)),
            opt(ann(&sigma_model)?),
            opt(snr_conv),
            opt(ann(&snr_model)?),
            opt(known),
            clamped.to_string(),
        ]);
    }

    let mut manifest = Manifest::new("estimate", &text, &section)?;
    if clamped_records > 0 {
        manifest.notes.push(format!(
            "{clamped_records} records had eigenvalues below the 4/SNR floor (clamped before correction)"
        ));
    }
    let mut w = Writer::new(&cfg.out_dir, manifest)?;
    w.table("estimates.csv", &table)?;
    w.finish()
}

/// `simulate`: one transmission with its taps, traces, spectra and summary.
pub fn cmd_simulate(config: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let (cfg, text) = load_config(config, overrides)?;
    let sim = cfg
        .simulate
        .ok_or_else(|| missing_section(config, "simulate"))?
        .with_default_grid();
    sim.validate().map_err(|e| locate(e, &text, config))?;
    let out = simulate(&sim)?;

    let mut manifest = Manifest::new("simulate", &text, &sim)?;
    manifest.seed("link", sim.channel.seed);
    manifest.seed("symbols", derive_seed(sim.seed, 1));
    manifest.seed("noise", derive_seed(sim.seed, 2));
    let mut w = Writer::new(&cfg.out_dir, manifest)?;

    let p = w.path("taps.csv");
    write_taps_csv(&out.taps, create(&p)?)?;
    let p = w.path("traces.csv");
    write_traces_csv(&out.equalized, &out.reference, create(&p)?)?;

    if out.record.labels.is_some() {
        let meta = DatasetMeta {
            total_modes: out.record.dim(),
            num_sections: sim.channel.num_sections,
            snr_imp_db: None,
            seed: sim.seed,
        };
        let p = w.path("features.csv");
        save_dataset(&Dataset::new(meta, vec![out.record.clone()])?, &p)?;
    }

    let mut spectra = Table::new(&["index", "lambda_true_db", "lambda_mmse_db", "lambda_lms_db", "sinr_db"]);
    let sinr = out.sinr.sorted_db();
    for i in 0..out.spectrum.len() {
        spectra.push(vec![
            (i + 1).to_string(),
            num(out.true_spectrum.values_db()[i]),
            opt(out.mmse_spectrum.as_ref().map(|s| s.values_db()[i])),
            num(out.spectrum.values_db()[i]),
            num(sinr[i]),
        ]);
    }
    w.table("spectra.csv", &spectra)?;

    let mut summary = Table::new(&[
        "sigma_mdg_true_db",
        "sigma_conv_db",
        "snr_db",
        "measured_snr_db",
        "snr_conv_db",
        "residual_error_db",
        "symbol_error_rate",
        "evm_percent",
        "spread_ps",
        "skipped_bins",
    ]);
    summary.push(vec![
        num(out.sigma_mdg_true_db),
        num(conventional_sigma_mdg(&out.spectrum)),
        opt(out.snr_db),
        opt(out.measured_snr_db),
        opt(conventional_snr_db(&out.record, None)?),
        num(out.residual_error_db),
        num(out.symbol_error_rate),
        num(out.evm_percent),
        opt(impulse_response_spread(&out.taps).ok()),
        out.skipped_bins.to_string(),
    ]);
    w.table("summary.csv", &summary)?;
    w.finish()
}

/// Header of the distance sweep tables.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "distance_km",
    "sigma_mdg_true_db",
    "sigma_conv_db",
    "sigma_corr_db",
    "sigma_ann_db",
    "snr_true_db",
    "snr_conv_db",
    "snr_ann_db",
];

pub fn sweep_table(points: &[SweepPoint]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for p in points {
        t.push(vec![
            num(p.distance_km),
            num(p.sigma_mdg_true_db),
            num(p.sigma_conv_db),
            num(p.sigma_corr_db),
            opt(p.sigma_ann_db),
            num(p.snr_true_db),
            opt(p.snr_conv_db),
            opt(p.snr_ann_db),
        ]);
    }
    t
}

pub fn spread_table(points: &[SweepPoint]) -> Table {
    let mut t = Table::new(&["distance_km", "num_sections", "sigma_mdg_true_db", "spread_ps", "residual_error_db"]);
    for p in points {
        t.push(vec![
            num(p.distance_km),
            p.num_sections.to_string(),
            num(p.sigma_mdg_true_db),
            opt(p.spread_ps),
            num(p.residual_error_db),
        ]);
    }
    t
}

fn run_distance_sweep(spec: &LinkSweepSpec, manifest: &mut Manifest) -> Result<Vec<SweepPoint>> {
    let sim = spec.sim.clone().with_default_grid();
    let sigma_model = spec.sigma_model.as_ref().map(|p| load_model(p)).transpose()?;
    let snr_model = spec.snr_model.as_ref().map(|p| load_model(p)).transpose()?;
    let dim = sim.channel.topology.total_modes();
    for m in [&sigma_model, &snr_model].into_iter().flatten() {
        if m.input_dim() != 2 * dim {
            return Err(Error::DimensionMismatch {
                context: "model input vs simulated features",
                expected: 2 * dim,
                found: m.input_dim(),
            });
        }
    }
    let snr_imp_db = match (spec.snr_imp_db, spec.calibrate_snr_imp) {
        (Some(v), _) => Some(v),
        (None, true) => {
            let v = calibrate_snr_imp(&sim)?;
            manifest.notes.push(format!("calibrated snr_imp_db = {v}"));
            Some(v)
        }
        (None, false) => None,
    };
    manifest.seed("link", sim.channel.seed);
    for &k in &spec.span_counts {
        manifest.seed(format!("spans_{k}"), derive_seed(sim.seed, k as u64));
    }
    let estimators = SweepEstimators {
        sigma_model,
        snr_model,
        snr_imp_db,
    };
    run_link_sweep(&sim, &spec.span_counts, spec.noise, &estimators)
}

/// `sweep`: the figure table selected by the config's `kind`.
pub fn cmd_sweep(config: &Path, overrides: &Overrides) -> Result<CommandOutput> {
    let (cfg, text) = load_config(config, overrides)?;
    let section = cfg.sweep.ok_or_else(|| missing_section(config, "sweep"))?;
    let mut manifest = Manifest::new(&format!("sweep {}", section.name()), &text, &section)?;

    let (name, table) = match &section {
        SweepSection::Fig1(spec) => {
            spec.validate().map_err(|e| locate(e, &text, config))?;
            for r in 0..spec.realizations {
                manifest.seed(format!("link_{r}"), derive_seed(spec.seed, r as u64));
            }
            let rows = eigen_evolution(spec)?;
            let mut t = Table::new(&[
                "snr_db",
                "num_sections",
                "distance_km",
                "true_max_db",
                "true_min_db",
                "mmse_max_db",
                "mmse_min_db",
                "lms_max_db",
                "lms_min_db",
            ]);
            for r in rows {
                t.push(vec![
                    num(r.snr_db),
                    r.num_sections.to_string(),
                    num(r.distance_km),
                    num(r.true_max_db),
                    num(r.true_min_db),
                    num(r.mmse_max_db),
                    num(r.mmse_min_db),
                    opt(r.lms_max_db),
                    opt(r.lms_min_db),
                ]);
            }
            ("fig1_eigen_vs_distance.csv", t)
        }
        SweepSection::Fig4Grid(spec) => {
            spec.validate().map_err(|e| locate(e, &text, config))?;
            manifest.seed("grid", spec.seed);
            let sigma_model = spec.sigma_model.as_ref().map(|p| load_model(p)).transpose()?;
            let snr_model = spec.snr_model.as_ref().map(|p| load_model(p)).transpose()?;
            let rows = error_grid(spec, sigma_model.as_ref(), snr_model.as_ref())?;
            let mut t = Table::new(&[
                "sigma_mdg_target_db",
                "snr_db",
                "sigma_mdg_true_db",
                "sigma_conv_err_db",
                "sigma_corr_err_db",
                "sigma_ann_err_db",
                "snr_conv_err_db",
                "snr_ann_err_db",
            ]);
            for r in rows {
                t.push(vec![
                    num(r.sigma_mdg_target_db),
                    num(r.snr_db),
                    num(r.sigma_mdg_true_db),
                    num(r.sigma_conv_err_db),
                    num(r.sigma_corr_err_db),
                    opt(r.sigma_ann_err_db),
                    opt(r.snr_conv_err_db),
                    opt(r.snr_ann_err_db),
                ]);
            }
            ("fig4_error_grid.csv", t)
        }
        SweepSection::Fig6(spec) | SweepSection::Fig7(spec) | SweepSection::Fig8(spec) => {
            spec.sim.clone().with_default_grid().validate().map_err(|e| locate(e, &text, config))?;
            if spec.span_counts.is_empty() || spec.span_counts.contains(&0) {
                return Err(locate(
                    Error::invalid("span_counts", "must be a nonempty list of positive counts"),
                    &text,
                    config,
                ));
            }
            let points = run_distance_sweep(spec, &mut manifest)?;
            match section {
                SweepSection::Fig6(_) => ("fig6_sweep.csv", sweep_table(&points)),
                SweepSection::Fig7(_) => ("fig7_spread.csv", spread_table(&points)),
                _ => ("fig8_sweep.csv", sweep_table(&points)),
            }
        }
    };
    let mut w = Writer::new(&cfg.out_dir, manifest)?;
    w.table(name, &table)?;
    w.finish()
}
