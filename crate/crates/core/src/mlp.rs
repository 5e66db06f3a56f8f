//! Single-hidden-layer perceptron regressor: `2D` standardized features,
//! `D` tanh units, one linear output, trained with Adam on the MSE.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ModeTopology;
use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureRecord, Labels, Normalization};
use crate::rng::rng_from_seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    SigmaMdg,
    Snr,
}

impl Target {
    pub fn label(self, labels: &Labels) -> f64 {
        match self {
            Target::SigmaMdg => labels.sigma_mdg_db,
            Target::Snr => labels.snr_db,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::SigmaMdg => "sigma_mdg",
            Target::Snr => "snr",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_mdg" => Ok(Target::SigmaMdg),
            "snr" => Ok(Target::Snr),
            _ => Err(Error::invalid("target", format!("`{s}` is neither `sigma_mdg` nor `snr`"))),
        }
    }
}

/// Parameters live in one flat vector: `W1` (hidden × input, row-major),
/// `b1`, `W2` (one row of length hidden), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    target: Target,
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    normalization: Normalization,
}

fn param_count(input: usize, hidden: usize) -> usize {
    hidden * input + 2 * hidden + 1
}

impl MlpModel {
    pub fn from_parts(
        target: Target,
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        normalization: Normalization,
    ) -> Result<Self> {
        let hidden = w1.len();
        let input = w1.first().map_or(0, Vec::len);
        if hidden == 0 || input == 0 {
            return Err(Error::invalid("W1", "empty weight matrix"));
        }
        let mismatch = |context, expected, found| Error::DimensionMismatch {
            context,
            expected,
            found,
        };
        if let Some(row) = w1.iter().find(|r| r.len() != input) {
            return Err(mismatch("W1 row length", input, row.len()));
        }
        if b1.len() != hidden {
            return Err(mismatch("b1 length", hidden, b1.len()));
        }
        if w2.len() != hidden {
            return Err(mismatch("W2 length", hidden, w2.len()));
        }
        if normalization.dim() != input || normalization.std.len() != input {
            return Err(mismatch("normalization length", input, normalization.dim()));
        }
        if normalization.std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) || normalization.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("norm_std", "normalization must be finite with positive deviations"));
        }
        let mut params: Vec<f64> = w1.into_iter().flatten().collect();
        params.extend(b1);
        params.extend(w2);
        params.push(b2);
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model weights"));
        }
        Ok(MlpModel {
            target,
            input_dim: input,
            hidden_dim: hidden,
            params,
            normalization,
        })
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// `[input, hidden, 1]`.
    pub fn dims(&self) -> [usize; 3] {
        [self.input_dim, self.hidden_dim, 1]
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn set_normalization(&mut self, normalization: Normalization) -> Result<()> {
        if normalization.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "normalization length",
                expected: self.input_dim,
                found: normalization.dim(),
            });
        }
        self.normalization = normalization;
        Ok(())
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn w1_row(&self, h: usize) -> &[f64] {
        &self.params[h * self.input_dim..(h + 1) * self.input_dim]
    }

    pub fn b1(&self) -> &[f64] {
        let o = self.hidden_dim * self.input_dim;
        &self.params[o..o + self.hidden_dim]
    }

    pub fn w2(&self) -> &[f64] {
        let o = self.hidden_dim * (self.input_dim + 1);
        &self.params[o..o + self.hidden_dim]
    }

    pub fn b2(&self) -> f64 {
        *self.params.last().expect("nonempty")
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "model input features",
                expected: self.input_dim,
                found: len,
            });
        }
        Ok(())
    }

    /// Output for an already standardized input; fills `hidden` with the
    /// tanh activations.
    fn forward_std(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let (w2, b1) = (self.w2(), self.b1());
        let mut y = self.b2();
        for (h, a) in hidden.iter_mut().enumerate() {
            let z: f64 = self.w1_row(h).iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b1[h];
            *a = z.tanh();
            y += w2[h] * *a;
        }
        y
    }

    /// Accumulates `scale · ∂y/∂θ` into `grad`.
    fn backward_std(&self, x: &[f64], hidden: &[f64], scale: f64, grad: &mut [f64]) {
        let (ni, nh) = (self.input_dim, self.hidden_dim);
        let w2 = self.w2();
        let (o_b1, o_w2) = (nh * ni, nh * (ni + 1));
        for h in 0..nh {
            let dz = scale * w2[h] * (1.0 - hidden[h] * hidden[h]);
            for (g, v) in grad[h * ni..(h + 1) * ni].iter_mut().zip(x) {
                *g += dz * v;
            }
            grad[o_b1 + h] += dz;
            grad[o_w2 + h] += scale * hidden[h];
        }
        *grad.last_mut().expect("nonempty") += scale;
    }
}

/// Glorot-uniform weights, zero biases, identity normalization.
pub fn init_model<R: Rng + ?Sized>(topology: ModeTopology, target: Target, rng: &mut R) -> MlpModel {
    let d = topology.total_modes();
    let (ni, nh) = (2 * d, d);
    let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
    let (l1, l2) = (glorot(ni, nh), glorot(nh, 1));
    let mut params = Vec::with_capacity(param_count(ni, nh));
    params.extend((0..nh * ni).map(|_| rng.random_range(-l1..=l1)));
    params.extend(std::iter::repeat_n(0.0, nh));
    params.extend((0..nh).map(|_| rng.random_range(-l2..=l2)));
    params.push(0.0);
    MlpModel {
        target,
        input_dim: ni,
        hidden_dim: nh,
        params,
        normalization: Normalization::identity(ni),
    }
}

/// Prediction in dB for a raw (unstandardized) `2D` feature vector.
pub fn forward(model: &MlpModel, features: &[f64]) -> Result<f64> {
    model.check_input(features.len())?;
    let x = model.normalization.apply(features);
    let mut hidden = vec![0.0; model.hidden_dim];
    Ok(model.forward_std(&x, &mut hidden))
}

pub fn predict(model: &MlpModel, record: &FeatureRecord) -> Result<f64> {
    forward(model, &record.feature_vector())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 5,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(name, "must lie in [0, 1)"));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch MSE in dB² of the target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub mse: f64,
    /// Prediction minus label, per record.
    pub residuals: Vec<f64>,
}

struct Sample {
    x: Vec<f64>,
    target: f64,
}

fn standardized(model: &MlpModel, ds: &Dataset) -> Result<Vec<Sample>> {
    ds.records
        .iter()
        .map(|r| {
            let labels = r
                .labels
                .as_ref()
                .ok_or_else(|| Error::Format("training records must carry labels".into()))?;
            let fv = r.feature_vector();
            model.check_input(fv.len())?;
            Ok(Sample {
                x: model.normalization.apply(&fv),
                target: model.target.label(labels),
            })
        })
        .collect()
}

fn mse_of(model: &MlpModel, samples: &[Sample], hidden: &mut [f64]) -> f64 {
    samples
        .iter()
        .map(|s| (model.forward_std(&s.x, hidden) - s.target).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

pub fn evaluate(model: &MlpModel, ds: &Dataset) -> Result<Evaluation> {
    if ds.is_empty() {
        return Err(Error::invalid("dataset", "cannot evaluate on an empty dataset"));
    }
    let mut hidden = vec![0.0; model.hidden_dim];
    let residuals: Vec<f64> = standardized(model, ds)?
        .iter()
        .map(|s| model.forward_std(&s.x, &mut hidden) - s.target)
        .collect();
    let mse = residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64;
    Ok(Evaluation { mse, residuals })
}

/// Mini-batch Adam on the MSE. The model adopts the training split's
/// normalization; the test split only feeds the loss history.
pub fn train(model: &MlpModel, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, LossHistory)> {
    cfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::invalid("dataset", "train and test splits must be nonempty"));
    }
    if train_set.dim() != test_set.dim() || train_set.normalization != test_set.normalization {
        return Err(Error::Format("train and test splits must share D and normalization".into()));
    }
    let mut model = model.clone();
    model.set_normalization(train_set.normalization.clone())?;
    let train_samples = standardized(&model, train_set)?;
    let test_samples = standardized(&model, test_set)?;

    let np = model.params.len();
    let (mut m, mut v, mut grad) = (vec![0.0; np], vec![0.0; np], vec![0.0; np]);
    let mut hidden = vec![0.0; model.hidden_dim];
    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut rng = rng_from_seed(cfg.seed);
    let mut step = 0i32;
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &train_samples[i];
                let y = model.forward_std(&s.x, &mut hidden);
                model.backward_std(&s.x, &hidden, 2.0 * (y - s.target) * inv, &mut grad);
            }
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for k in 0..np {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grad[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
                model.params[k] -= cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.epsilon);
            }
        }
        let tr = mse_of(&model, &train_samples, &mut hidden);
        let te = mse_of(&model, &test_samples, &mut hidden);
        if !tr.is_finite() || !te.is_finite() {
            return Err(Error::Divergence(format!("loss became non-finite at epoch {}", epoch + 1)));
        }
        history.train_mse.push(tr);
        history.test_mse.push(te);
    }
    Ok((model, history))
}

/// Largest relative discrepancy between backpropagated gradients of the
/// single-record squared error and central finite differences (step 1e-5).
/// Relative errors use `max(|analytic|, |numeric|, 1)` as denominator so
/// that vanishing gradients do not amplify rounding noise.
pub fn gradient_check(model: &MlpModel, record: &FeatureRecord) -> Result<f64> {
    let labels = record
        .labels
        .as_ref()
        .ok_or_else(|| Error::Format("gradient check needs a labelled record".into()))?;
    let fv = record.feature_vector();
    model.check_input(fv.len())?;
    let x = model.normalization.apply(&fv);
    let t = model.target.label(labels);
    let mut hidden = vec![0.0; model.hidden_dim];

    let y = model.forward_std(&x, &mut hidden);
    let mut analytic = vec![0.0; model.params.len()];
    model.backward_std(&x, &hidden, 2.0 * (y - t), &mut analytic);

    const STEP: f64 = 1e-5;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for k in 0..model.params.len() {
        let orig = probe.params[k];
        probe.params[k] = orig + STEP;
        let lp = (probe.forward_std(&x, &mut hidden) - t).powi(2);
        probe.params[k] = orig - STEP;
        let lm = (probe.forward_std(&x, &mut hidden) - t).powi(2);
        probe.params[k] = orig;
        let numeric = (lp - lm) / (2.0 * STEP);
        let denom = analytic[k].abs().max(numeric.abs()).max(1.0);
        worst = worst.max((analytic[k] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    target: Target,
    #[serde(rename = "D")]
    d: usize,
    dims: Vec<usize>,
    activation: String,
    norm_mean: Vec<f64>,
    norm_std: Vec<f64>,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

pub fn model_to_json(model: &MlpModel) -> String {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        target: model.target,
        d: model.input_dim / 2,
        dims: model.dims().to_vec(),
        activation: "tanh".into(),
        norm_mean: model.normalization.mean.clone(),
        norm_std: model.normalization.std.clone(),
        w1: (0..model.hidden_dim).map(|h| model.w1_row(h).to_vec()).collect(),
        b1: model.b1().to_vec(),
        w2: vec![model.w2().to_vec()],
        b2: vec![model.b2()],
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<MlpModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if f.version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model file version {} (expected {MODEL_FORMAT_VERSION})",
            f.version
        )));
    }
    if f.activation != "tanh" {
        return Err(Error::Format(format!("unsupported activation `{}`", f.activation)));
    }
    if f.w2.len() != 1 || f.b2.len() != 1 {
        return Err(Error::Format("output layer must have exactly one neuron".into()));
    }
    let w2 = f.w2.into_iter().next().expect("one row");
    let model = MlpModel::from_parts(
        f.target,
        f.w1,
        f.b1,
        w2,
        f.b2[0],
        Normalization {
            mean: f.norm_mean,
            std: f.norm_std,
        },
    )?;
    if f.dims != model.dims() || 2 * f.d != model.input_dim {
        return Err(Error::DimensionMismatch {
            context: "model file dims",
            expected: 2 * f.d,
            found: model.input_dim,
        });
    }
    Ok(model)
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    fs::write(path, model_to_json(model)).map_err(|e| Error::file(path, e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DatasetMeta;

    fn topo(m: usize) -> ModeTopology {
        ModeTopology::new(m).unwrap()
    }

    fn record(d: usize, seed: u64, label: f64) -> FeatureRecord {
        let mut rng = rng_from_seed(seed);
        let mut lam: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut sinr: Vec<f64> = (0..d).map(|_| rng.random_range(8.0..25.0)).collect();
        lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sinr.sort_by(|a, b| b.partial_cmp(a).unwrap());
        FeatureRecord::new(
            lam,
            sinr,
            Some(Labels {
                sigma_mdg_db: label,
                snr_db: 15.0,
            }),
        )
        .unwrap()
    }

    fn dataset(d: usize, n: usize, label: impl Fn(usize) -> f64) -> Dataset {
        let meta = DatasetMeta {
            total_modes: d,
            num_sections: 1,
            snr_imp_db: None,
            seed: 0,
        };
        Dataset::new(meta, (0..n).map(|i| record(d, i as u64, label(i))).collect()).unwrap()
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_model(topo(3), Target::SigmaMdg, &mut rng_from_seed(1));
        assert_eq!(a.dims(), [12, 6, 1]);
        assert_eq!(init_model(topo(6), Target::Snr, &mut rng_from_seed(1)).dims(), [24, 12, 1]);
        assert_eq!(a, init_model(topo(3), Target::SigmaMdg, &mut rng_from_seed(1)));
        let lim = (6.0f64 / 18.0).sqrt();
        assert!((0..6).all(|h| a.w1_row(h).iter().all(|w| w.abs() <= lim)));
        assert!(a.b1().iter().all(|&b| b == 0.0) && a.b2() == 0.0);
    }

    #[test]
    fn zero_weights_output_bias() {
        let m = MlpModel::from_parts(Target::Snr, vec![vec![0.0; 4]; 2], vec![0.0; 2], vec![0.0; 2], 3.5, Normalization::identity(4)).unwrap();
        assert_eq!(forward(&m, &[1.0, -2.0, 0.3, 9.0]).unwrap(), 3.5);
        assert!(forward(&m, &[1.0; 3]).is_err());
    }

    #[test]
    fn one_unit_closed_form() {
        let norm = Normalization {
            mean: vec![1.0, 2.0],
            std: vec![2.0, 0.5],
        };
        let m = MlpModel::from_parts(Target::SigmaMdg, vec![vec![0.7, -1.3]], vec![0.2], vec![1.9], -0.4, norm).unwrap();
        let x = [3.0, 1.0];
        let expected = -0.4 + 1.9 * (0.7 * (3.0 - 1.0) / 2.0 - 1.3 * (1.0 - 2.0) / 0.5 + 0.2f64).tanh();
        assert!((forward(&m, &x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            let mut m = init_model(topo(2), Target::SigmaMdg, &mut rng_from_seed(seed));
            // nonzero biases exercise every path
            let n = m.params.len();
            m.params[n - 1] = 0.3;
            let r = record(4, seed + 100, 2.0);
            assert!(gradient_check(&m, &r).unwrap() < 1e-6);
        }
        let zero = MlpModel::from_parts(Target::SigmaMdg, vec![vec![0.0; 4]; 2], vec![0.0; 2], vec![0.0; 2], 0.0, Normalization::identity(4)).unwrap();
        assert!(gradient_check(&zero, &record(2, 1, 2.0)).unwrap() < 1e-6);
    }

    #[test]
    fn evaluate_mse() {
        let ds = dataset(2, 2, |_| 0.0);
        let m = MlpModel::from_parts(Target::SigmaMdg, vec![vec![0.0; 4]], vec![0.0], vec![0.0], 0.0, Normalization::identity(4)).unwrap();
        assert_eq!(evaluate(&m, &ds).unwrap().mse, 0.0);
        let mut ds = ds;
        ds.records[0].labels.as_mut().unwrap().sigma_mdg_db = 1.0;
        ds.records[1].labels.as_mut().unwrap().sigma_mdg_db = -1.0;
        let e = evaluate(&m, &ds).unwrap();
        assert_eq!(e.mse, 1.0);
        assert_eq!(e.residuals, vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_labels_converge() {
        let ds = dataset(6, 2000, |_| 4.2);
        let (tr, te) = crate::features::split_dataset(&ds, 0.8, 0).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            ..Default::default()
        };
        let m0 = init_model(topo(3), Target::SigmaMdg, &mut rng_from_seed(0));
        let (m, hist) = train(&m0, &tr, &te, &cfg).unwrap();
        assert_eq!(hist.train_mse.len(), 50);
        assert!(*hist.train_mse.last().unwrap() < 1e-3, "{:?}", hist.train_mse.last());
        assert!((predict(&m, &te.records[0]).unwrap() - 4.2).abs() < 0.05);
        let (_, again) = train(&m0, &tr, &te, &cfg).unwrap();
        assert_eq!(hist, again);
    }

    #[test]
    fn model_file_round_trip() {
        let ds = dataset(2, 30, |i| i as f64 * 0.1);
        let (tr, te) = crate::features::split_dataset(&ds, 0.7, 1).unwrap();
        let m0 = init_model(topo(1), Target::SigmaMdg, &mut rng_from_seed(4));
        let (m, _) = train(&m0, &tr, &te, &TrainConfig { epochs: 3, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&m, &p).unwrap();
        let back = load_model(&p).unwrap();
        assert_eq!(back, m);
        for r in &te.records {
            assert_eq!(predict(&back, r).unwrap().to_bits(), predict(&m, r).unwrap().to_bits());
        }

        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, &text[..text.len() / 2]).unwrap();
        assert!(load_model(&p).is_err());
        assert!(model_from_json(&text.replace("\"version\": 1", "\"version\": 2")).is_err());
        assert!(predict(&m, &record(6, 0, 1.0)).is_err());
    }
}
