//! Run configuration and the end-to-end training pipeline used by the CLI.
//!
//! A config starts from a named preset, is overlaid by a flat `key = value`
//! file and then by individual overrides. The merged result is what runs
//! and what gets written to `run.json`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bank::{AdcSpec, Backend, PhotonicExecutor, WeightBankConfig, DEFAULT_CHANNEL_LIMIT};
use crate::checkpoint::Checkpoint;
use crate::data::{load_mnist_dir, ConfusionMatrix, Dataset, Split};
use crate::dfa::{
    evaluate, Activation, EpochMetrics, FeedbackMatrices, LayerSpec, NetworkParams, TrainConfig, Trainer,
};
use crate::error::{Error, Result};
use crate::linalg::Reduction;
use crate::mrr::{MacUnit, NoiseModel, NoisePreset, ProductLut, Quantizer};
use crate::report::{self, RunRecord, Seeds};
use crate::rng::{derive_seed, streams};

pub const PRESETS: [&str; 4] = ["paper-ideal", "paper-noisy", "paper-empirical", "quick"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: String,
    /// Layer widths from input to output, e.g. `784,800,800,10`.
    pub layers: Vec<usize>,
    pub hidden_activation: Activation,
    pub loss_reduction: Reduction,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Feedback entries are drawn from `U[-feedback_scale, feedback_scale]`.
    pub feedback_scale: f64,
    pub backend: Backend,
    pub bank_rows: usize,
    pub bank_cols: usize,
    pub input_bits: u32,
    pub weight_bits: u32,
    /// 0 disables the readout converter.
    pub adc_bits: u32,
    /// Converter full scale; unset means the bank width.
    pub adc_range: Option<f64>,
    pub noise: NoisePreset,
    pub noise_mean: Option<f64>,
    pub noise_std: Option<f64>,
    /// Measured product table for the empirical backend. Unset means one is
    /// synthesised from the noise statistics.
    pub lut: Option<PathBuf>,
    pub seed: u64,
    pub init_seed: Option<u64>,
    pub feedback_seed: Option<u64>,
    pub noise_seed: Option<u64>,
    pub data_dir: PathBuf,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset("paper-ideal").expect("built-in preset")
    }
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self {
            preset: name.to_string(),
            layers: vec![784, 800, 800, 10],
            hidden_activation: Activation::Relu,
            loss_reduction: Reduction::Sum,
            learning_rate: 0.003,
            batch_size: 64,
            epochs: 10,
            feedback_scale: 1.0,
            backend: Backend::Ideal,
            bank_rows: 50,
            bank_cols: 20,
            input_bits: 5,
            weight_bits: 6,
            adc_bits: 0,
            adc_range: None,
            noise: NoisePreset::Measured,
            noise_mean: None,
            noise_std: None,
            lut: None,
            seed: 0,
            init_seed: None,
            feedback_seed: None,
            noise_seed: None,
            data_dir: PathBuf::from("data/mnist"),
            train_limit: None,
            test_limit: None,
            out_dir: PathBuf::from("runs").join(name),
        };
        match name {
            "paper-ideal" => Ok(base),
            "paper-noisy" => Ok(Self { backend: Backend::Noisy, ..base }),
            "paper-empirical" => Ok(Self { backend: Backend::Empirical, ..base }),
            "quick" => Ok(Self {
                layers: vec![784, 100, 10],
                learning_rate: 0.05,
                batch_size: 16,
                epochs: 3,
                train_limit: Some(10_000),
                ..base
            }),
            other => Err(Error::Invalid(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "layers" => {
                self.layers = value
                    .split(',')
                    .map(|s| parse::<usize>("layers", s.trim()))
                    .collect::<Result<_>>()?
            }
            "hidden_activation" => {
                self.hidden_activation = match value {
                    "relu" => Activation::Relu,
                    "logistic" => Activation::Logistic,
                    other => return Err(bad("hidden_activation", other, "relu or logistic")),
                }
            }
            "loss_reduction" => {
                self.loss_reduction = match value {
                    "sum" => Reduction::Sum,
                    "mean" => Reduction::Mean,
                    other => return Err(bad("loss_reduction", other, "sum or mean")),
                }
            }
            "learning_rate" => self.learning_rate = parse("learning_rate", value)?,
            "batch_size" => self.batch_size = parse("batch_size", value)?,
            "epochs" => self.epochs = parse("epochs", value)?,
            "feedback_scale" => self.feedback_scale = parse("feedback_scale", value)?,
            "backend" => self.backend = Backend::parse(value)?,
            "bank_rows" => self.bank_rows = parse("bank_rows", value)?,
            "bank_cols" => self.bank_cols = parse("bank_cols", value)?,
            "input_bits" => self.input_bits = parse("input_bits", value)?,
            "weight_bits" => self.weight_bits = parse("weight_bits", value)?,
            "adc_bits" => self.adc_bits = parse("adc_bits", value)?,
            "adc_range" => self.adc_range = optional("adc_range", value)?,
            "noise" => self.noise = NoisePreset::parse(value)?,
            "noise_mean" => self.noise_mean = optional("noise_mean", value)?,
            "noise_std" => self.noise_std = optional("noise_std", value)?,
            "lut" => self.lut = (!value.is_empty()).then(|| PathBuf::from(value)),
            "seed" => self.seed = parse("seed", value)?,
            "init_seed" => self.init_seed = optional("init_seed", value)?,
            "feedback_seed" => self.feedback_seed = optional("feedback_seed", value)?,
            "noise_seed" => self.noise_seed = optional("noise_seed", value)?,
            "data_dir" => self.data_dir = PathBuf::from(value),
            "train_limit" => self.train_limit = optional("train_limit", value)?,
            "test_limit" => self.test_limit = optional("test_limit", value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(Error::Invalid(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Overlays a flat config file: one `key = value` per line, `#` starts
    /// a comment. A `preset` line is skipped here; [`RunConfig::resolve`]
    /// reads it before anything else.
    pub fn apply_file_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Invalid(format!("{}:{}: expected 'key = value', got '{line}'", origin.display(), n + 1))
            })?;
            if key.trim() == "preset" {
                continue;
            }
            self.set(key, value)
                .map_err(|e| Error::Invalid(format!("{}:{}: {e}", origin.display(), n + 1)))?;
        }
        Ok(())
    }

    /// The `preset` key of a config file, if it names one.
    pub fn file_preset(text: &str) -> Option<String> {
        text.lines()
            .filter_map(|l| l.split('#').next())
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "preset")
            .map(|(_, v)| v.trim().to_string())
    }

    /// Preset, then file, then overrides.
    pub fn resolve(preset: Option<&str>, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match file {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            None => None,
        };
        let name = preset
            .map(str::to_string)
            .or_else(|| text.as_deref().and_then(Self::file_preset))
            .unwrap_or_else(|| "paper-ideal".to_string());
        let mut cfg = Self::preset(&name)?;
        if let (Some(text), Some(path)) = (&text, file) {
            cfg.apply_file_text(text, path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(Error::Invalid(format!(
                "layers needs at least two positive widths, got {:?}",
                self.layers
            )));
        }
        self.train_config().validate()?;
        if !(self.feedback_scale > 0.0 && self.feedback_scale.is_finite()) {
            return Err(Error::Invalid(format!("feedback_scale must be > 0, got {}", self.feedback_scale)));
        }
        if self.train_limit == Some(0) {
            return Err(Error::Invalid("train_limit must be >= 1".into()));
        }
        self.bank_config()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            reduction: self.loss_reduction,
        }
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            shuffle: self.seed,
            init: self.init_seed.unwrap_or_else(|| derive_seed(self.seed, &[streams::INIT])),
            feedback: self.feedback_seed.unwrap_or_else(|| derive_seed(self.seed, &[streams::FEEDBACK])),
            noise: self.noise_seed.unwrap_or_else(|| derive_seed(self.seed, &[streams::NOISE])),
        }
    }

    pub fn layer_specs(&self) -> Result<Vec<LayerSpec>> {
        let mut specs = LayerSpec::chain(&self.layers)?;
        let last = specs.len() - 1;
        for s in &mut specs[..last] {
            s.activation = self.hidden_activation;
        }
        Ok(specs)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let (mean, std) = self.noise.stats();
        NoiseModel::new(
            self.noise_mean.unwrap_or(mean),
            self.noise_std.unwrap_or(std),
            self.seeds().noise,
        )
    }

    pub fn mac_unit(&self) -> Result<MacUnit> {
        Ok(MacUnit {
            input: Quantizer::new(self.input_bits, 0.0, 1.0)?,
            weight: Quantizer::new(self.weight_bits, -1.0, 1.0)?,
        })
    }

    pub fn bank_config(&self) -> Result<WeightBankConfig> {
        let cfg = WeightBankConfig {
            rows: self.bank_rows,
            cols: self.bank_cols,
            backend: self.backend,
            mac: self.mac_unit()?,
            noise: self.noise_model()?,
            adc: (self.adc_bits > 0).then_some(AdcSpec { bits: self.adc_bits, range: self.adc_range }),
            channel_limit: DEFAULT_CHANNEL_LIMIT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Product table for the empirical backend, loaded or synthesised.
    pub fn product_lut(&self) -> Result<Option<Arc<ProductLut>>> {
        if self.backend != Backend::Empirical {
            return Ok(None);
        }
        let unit = self.mac_unit()?;
        let lut = match &self.lut {
            Some(path) => ProductLut::read_csv(path, unit)?,
            None => {
                let noise = self.noise_model()?;
                ProductLut::synthesize(unit, (!noise.is_silent()).then_some(&noise))
            }
        };
        Ok(Some(Arc::new(lut)))
    }

    pub fn executor(&self) -> Result<PhotonicExecutor> {
        PhotonicExecutor::new(self.bank_config()?, self.product_lut()?)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("cannot parse {key} = '{value}'")))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Invalid(format!("{key} = '{value}' (expected {expected})"))
}

pub fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let mut train = load_mnist_dir(&cfg.data_dir, Split::Train)?;
    let mut test = load_mnist_dir(&cfg.data_dir, Split::Test)?;
    if let Some(n) = cfg.train_limit {
        train = train.take(n);
    }
    if let Some(n) = cfg.test_limit {
        test = test.take(n);
    }
    Ok((train, test))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub metrics: Vec<EpochMetrics>,
    pub checkpoint: Checkpoint,
    pub confusion: ConfusionMatrix,
}

impl RunOutcome {
    pub fn test_accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

/// Trains on `train`, scoring `test` before the first epoch and after each
/// one. Nothing is written to disk.
pub fn run_training(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<RunOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let seeds = cfg.seeds();
    let specs = cfg.layer_specs()?;
    let params = NetworkParams::init(&specs, seeds.init)?;
    let feedback = FeedbackMatrices::generate(&specs, seeds.feedback, cfg.feedback_scale)?;
    let executor = cfg.executor()?;
    let mut trainer = Trainer::new(params, feedback, cfg.train_config())?;

    let reduction = cfg.loss_reduction;
    let initial_train = evaluate(trainer.params(), train, reduction)?;
    let mut last_test = evaluate(trainer.params(), test, reduction)?;
    let mut metrics = vec![EpochMetrics {
        epoch: 0,
        loss: initial_train.loss,
        train_accuracy: initial_train.confusion.accuracy(),
        test_accuracy: Some(last_test.confusion.accuracy()),
    }];
    on_epoch(&metrics[0]);
    for _ in 0..cfg.epochs {
        let mut m = trainer.run_epoch(train, &executor)?;
        last_test = evaluate(trainer.params(), test, reduction)?;
        m.test_accuracy = Some(last_test.confusion.accuracy());
        on_epoch(&m);
        metrics.push(m);
    }

    let last = metrics.last().expect("initial row");
    let record = RunRecord {
        config: cfg.to_json(),
        seeds,
        backend: cfg.backend.as_str().to_string(),
        epochs: cfg.epochs,
        final_train_accuracy: Some(last.train_accuracy),
        final_test_accuracy: last.test_accuracy,
        counters: trainer.counters(),
        confusion: Some(last_test.confusion.clone()),
    };
    Ok(RunOutcome {
        record,
        metrics,
        checkpoint: Checkpoint::from_trainer(&trainer),
        confusion: last_test.confusion,
    })
}

pub fn write_outcome(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    report::write_run_log(dir, &outcome.record, &outcome.metrics)?;
    outcome.checkpoint.save(&dir.join(report::CHECKPOINT_FILE))
}

/// Loads data, trains and writes `run.json`, `metrics.csv` and
/// `checkpoint.json` into the configured output directory.
pub fn run(cfg: &RunConfig, on_epoch: impl FnMut(&EpochMetrics)) -> Result<RunOutcome> {
    cfg.validate()?;
    let (train, test) = load_data(cfg)?;
    let outcome = run_training(cfg, &train, &test, on_epoch)?;
    write_outcome(&cfg.out_dir, &outcome)?;
    Ok(outcome)
}

/// Scores a saved checkpoint on `data`.
pub fn evaluate_checkpoint(path: &Path, data: &Dataset) -> Result<ConfusionMatrix> {
    let ck = Checkpoint::load(path)?;
    Ok(evaluate(&ck.params, data, ck.train.reduction)?.confusion)
}
