use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photonic_dfa::data::{load_mnist_dir, Split};
use photonic_dfa::energy::{self, HardwareParams, SweepOptions};
use photonic_dfa::experiment::{self, RunConfig};
use photonic_dfa::mrr::{MacUnit, MrrModel, NoiseModel, NoisePreset, ProductLut, Quantizer};
use photonic_dfa::{Error, Result};

/// Direct feedback alignment on a simulated microring weight bank.
#[derive(Debug, Parser)]
#[command(name = "photonic-dfa", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a network and write run.json, metrics.csv and checkpoint.json.
    #[command(allow_negative_numbers = true, after_help = TRAIN_HELP)]
    Train(TrainArgs),
    /// Score a checkpoint and print its confusion matrix.
    Eval(EvalArgs),
    /// Print the power and energy report as JSON, or an E_op sweep as CSV.
    #[command(allow_negative_numbers = true)]
    Energy(EnergyArgs),
    /// Add-drop ring transmission over one free spectral range as CSV.
    MrrCurve(MrrCurveArgs),
    /// Write a complete product lookup table with synthetic error statistics.
    #[command(allow_negative_numbers = true)]
    GenLut(GenLutArgs),
}

const TRAIN_HELP: &str = "\
Unset flags keep the value from --config, then from the preset.

Config keys (config files and --set):
  layers, hidden_activation (relu|logistic), loss_reduction (sum|mean),
  learning_rate, batch_size, epochs, feedback_scale, backend, bank_rows,
  bank_cols, input_bits, weight_bits, adc_bits (0 = no ADC), adc_range
  (default: bank width), noise, noise_mean, noise_std, lut, seed, init_seed,
  feedback_seed, noise_seed, data_dir, train_limit, test_limit, out_dir

Preset paper-ideal:
  layers 784,800,800,10, ReLU hidden and logistic output units, summed binary
  cross-entropy, learning_rate 0.003, batch_size 64, epochs 10,
  feedback_scale 1, 50x20 bank, 5-bit inputs, 6-bit weights, no ADC,
  noise measured (mean 0.002, std 0.039), seed 0, data_dir data/mnist,
  out_dir runs/<preset>
Presets paper-noisy and paper-empirical: paper-ideal on the noisy or
  empirical backend (the empirical table is synthesised unless lut is set)
Preset quick: layers 784,100,10, learning_rate 0.05, batch_size 16, epochs 3,
  train_limit 10000";

#[derive(Debug, Args)]
struct TrainArgs {
    /// Built-in starting point: paper-ideal, paper-noisy, paper-empirical or quick
    /// [default: paper-ideal, or the `preset` key of --config].
    #[arg(long)]
    preset: Option<String>,
    /// Flat `key = value` config file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any config key, e.g. `--set noise_std=0.02`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Comma-separated layer widths.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// ideal, quantized, noisy or empirical.
    #[arg(long)]
    backend: Option<String>,
    /// measured, caption or none.
    #[arg(long)]
    noise: Option<String>,
    /// Product table CSV for the empirical backend.
    #[arg(long)]
    lut: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory holding the MNIST IDX files (plain or gzip).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Use only the first N training examples.
    #[arg(long)]
    train_limit: Option<usize>,
    /// Use only the first N test examples.
    #[arg(long)]
    test_limit: Option<usize>,
}

impl TrainArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        push("layers", self.layers.clone());
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("backend", self.backend.clone());
        push("noise", self.noise.clone());
        push("lut", path(&self.lut));
        push("seed", self.seed.map(|v| v.to_string()));
        push("data_dir", path(&self.data_dir));
        push("out_dir", path(&self.out_dir));
        push("train_limit", self.train_limit.map(|v| v.to_string()));
        push("test_limit", self.test_limit.map(|v| v.to_string()));
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("--set expects KEY=VALUE, got '{s}'")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "data/mnist")]
    data_dir: PathBuf,
    /// train or test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Use only the first N examples.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct EnergyArgs {
    /// Bank rows M.
    #[arg(long, default_value_t = 50)]
    rows: usize,
    /// Bank columns (wavelengths) N.
    #[arg(long, default_value_t = 20)]
    cols: usize,
    /// JSON file with any subset of the hardware constants.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Operational rate in Hz [default: 12e9].
    #[arg(long)]
    f_s: Option<f64>,
    /// Detector precision in bits [default: 6].
    #[arg(long)]
    n_bits: Option<u32>,
    /// Optical efficiency [default: 0.2].
    #[arg(long)]
    eta: Option<f64>,
    /// DAC power in W [default: 0.19].
    #[arg(long)]
    p_dac: Option<f64>,
    /// ADC power in W [default: 0.013].
    #[arg(long)]
    p_adc: Option<f64>,
    /// TIA energy per symbol in J [default: 2.4e-12].
    #[arg(long)]
    e_tia: Option<f64>,
    /// Ring heater power in W [default: 0.005].
    #[arg(long)]
    p_mrr: Option<f64>,
    /// Emit the minimum E_op per cell count up to this many cells as CSV.
    #[arg(long, value_name = "MAX_CELLS")]
    sweep: Option<usize>,
    /// Smallest M and N considered by --sweep.
    #[arg(long, default_value_t = 5)]
    min_dim: usize,
    /// Skip banks wider than the 108-channel WDM limit during --sweep.
    #[arg(long)]
    channel_limit: bool,
}

impl EnergyArgs {
    fn hardware(&self) -> Result<HardwareParams> {
        let mut p = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?
            }
            None => HardwareParams::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.f_s, self.f_s);
        set(&mut p.eta, self.eta);
        set(&mut p.p_dac, self.p_dac);
        set(&mut p.p_adc, self.p_adc);
        set(&mut p.e_tia, self.e_tia);
        set(&mut p.p_mrr, self.p_mrr);
        if let Some(b) = self.n_bits {
            p.n_bits = b;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
struct MrrCurveArgs {
    /// Input coupler self-coupling.
    #[arg(long, default_value_t = 0.95)]
    t1: f64,
    /// Drop coupler self-coupling.
    #[arg(long, default_value_t = 0.95)]
    t2: f64,
    /// Round-trip amplitude transmission (1 = lossless).
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Number of phase samples over [-pi, pi].
    #[arg(long, default_value_t = 1001)]
    points: usize,
    /// Output file [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenLutArgs {
    /// measured, caption or none.
    #[arg(long, default_value = "measured")]
    noise: String,
    /// Overrides the preset mean.
    #[arg(long)]
    noise_mean: Option<f64>,
    /// Overrides the preset standard deviation.
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    input_bits: u32,
    #[arg(long, default_value_t = 6)]
    weight_bits: u32,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Energy(a) => energy_cmd(a),
        Command::MrrCurve(a) => mrr_curve(a),
        Command::GenLut(a) => gen_lut(a),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.preset.as_deref(), args.config.as_deref(), &args.overrides()?)?;
    eprintln!(
        "training {:?} on the {} backend, {} epochs -> {}",
        cfg.layers,
        cfg.backend.as_str(),
        cfg.epochs,
        cfg.out_dir.display()
    );
    let outcome = experiment::run(&cfg, |m| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  train {:.4}  test {:.4}",
            m.epoch,
            m.loss,
            m.train_accuracy,
            m.test_accuracy.unwrap_or(f64::NAN)
        );
    })?;
    println!("test accuracy: {:.4}", outcome.test_accuracy());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let split = match args.split.as_str() {
        "train" => Split::Train,
        "test" => Split::Test,
        other => return Err(Error::Invalid(format!("split must be train or test, got '{other}'"))),
    };
    let mut data = load_mnist_dir(&args.data_dir, split)?;
    if let Some(n) = args.limit {
        data = data.take(n);
    }
    let confusion = experiment::evaluate_checkpoint(&args.checkpoint, &data)?;
    println!("{confusion}");
    Ok(())
}

fn energy_cmd(args: EnergyArgs) -> Result<()> {
    let params = args.hardware()?;
    if let Some(max_cells) = args.sweep {
        let opts = SweepOptions {
            max_cells,
            min_dim: args.min_dim,
            enforce_channel_limit: args.channel_limit,
        };
        let points = energy::sweep_e_op(&params, &opts)?;
        print!("{}", energy::sweep_csv(&points));
        return Ok(());
    }
    let r = energy::total_power(&params, args.rows, args.cols)?;
    let json = serde_json::json!({
        "params": params,
        "report": r,
        "tops": r.tops(),
        "e_op_pJ": r.e_op_pj(),
        "tops_per_mm2": r.tops_per_mm2(),
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("report serialises"));
    Ok(())
}

fn mrr_curve(args: MrrCurveArgs) -> Result<()> {
    let model = MrrModel::new(args.t1, args.t2, args.a)?;
    if args.points < 2 {
        return Err(Error::Invalid(format!("points must be >= 2, got {}", args.points)));
    }
    let mut csv = String::from("phase,T_p,T_d,w\n");
    for (phase, t) in model.spectrum(args.points) {
        csv.push_str(&format!("{phase},{},{},{}\n", t.through, t.drop, t.weight()));
    }
    emit(args.out.as_deref(), &csv)
}

fn gen_lut(args: GenLutArgs) -> Result<()> {
    let (mean, std) = NoisePreset::parse(&args.noise)?.stats();
    let noise = NoiseModel::new(args.noise_mean.unwrap_or(mean), args.noise_std.unwrap_or(std), args.seed)?;
    let unit = MacUnit {
        input: Quantizer::new(args.input_bits, 0.0, 1.0)?,
        weight: Quantizer::new(args.weight_bits, -1.0, 1.0)?,
    };
    let lut = ProductLut::synthesize(unit, (!noise.is_silent()).then_some(&noise));
    lut.write_csv(&args.out)?;
    eprintln!("wrote {} entries to {}", lut.len(), args.out.display());
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io { path: "<stdout>".into(), source: e }),
    }
}
