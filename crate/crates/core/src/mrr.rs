//! Add-drop microring resonator as an analog multiplier.
//!
//! A ring coupled to two buses splits each wavelength between the through
//! port (`T_p`) and the drop port (`T_d`). With both ports on a balanced
//! photodetector the effective weight is `w = T_d − T_p ∈ [−1, 1]`. This
//! module covers the transfer function, a bias-code calibration table,
//! operand quantizers, the measured per-multiplication error model and the
//! measured product table used to replay hardware data.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded_rng, streams, Rng};

/// Add-drop ring described by its two self-coupling coefficients and the
/// single-pass amplitude transmission `a` (1 = lossless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrrModel {
    pub t1: f64,
    pub t2: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub through: f64,
    pub drop: f64,
}

impl Transmission {
    pub fn weight(&self) -> f64 {
        self.drop - self.through
    }
}

impl MrrModel {
    pub fn new(t1: f64, t2: f64, a: f64) -> Result<Self> {
        for (what, v) in [("t1", t1), ("t2", t2), ("a", a)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::OutOfRange {
                    what,
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(Self { t1, t2, a })
    }

    /// Symmetric lossless ring with self-coupling `t`.
    pub fn symmetric(t: f64) -> Result<Self> {
        Self::new(t, t, 1.0)
    }

    pub fn transmission(&self, phase: f64) -> Transmission {
        let Self { t1, t2, a } = *self;
        let c = phase.cos();
        let denom = 1.0 - 2.0 * t1 * t2 * a * c + (t1 * t2 * a).powi(2);
        let through = (t2 * t2 * a * a - 2.0 * t1 * t2 * a * c + t1 * t1) / denom;
        let drop = (1.0 - t1 * t1) * (1.0 - t2 * t2) * a / denom;
        Transmission { through, drop }
    }

    pub fn weight_of_phase(&self, phase: f64) -> f64 {
        self.transmission(phase).weight()
    }

    /// Evenly spaced samples over one free spectral range, `[−π, π]`.
    pub fn spectrum(&self, points: usize) -> Vec<(f64, Transmission)> {
        match points {
            0 => Vec::new(),
            1 => vec![(0.0, self.transmission(0.0))],
            _ => (0..points)
                .map(|i| {
                    let phase = -PI + 2.0 * PI * i as f64 / (points - 1) as f64;
                    (phase, self.transmission(phase))
                })
                .collect(),
        }
    }
}

/// Round-to-nearest quantizer with `2^bits` evenly spaced levels covering
/// `[lo, hi]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub bits: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Quantizer {
    pub fn new(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        if bits == 0 || bits > 24 {
            return Err(Error::Invalid(format!("quantizer bits must be in 1..=24, got {bits}")));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Invalid(format!("quantizer range [{lo}, {hi}] is empty")));
        }
        Ok(Self { bits, lo, hi })
    }

    /// 5-bit attenuator grid on `[0, 1]`.
    pub fn input_default() -> Self {
        Self { bits: 5, lo: 0.0, hi: 1.0 }
    }

    /// 6-bit ring weight grid on `[−1, 1]`.
    pub fn weight_default() -> Self {
        Self { bits: 6, lo: -1.0, hi: 1.0 }
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / f64::from(self.levels() - 1)
    }

    pub fn level(&self, code: u32) -> f64 {
        let top = self.levels() - 1;
        if code >= top {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * f64::from(code) / f64::from(top)
    }

    /// Code of the nearest level; inputs outside the range clamp to the ends.
    pub fn code(&self, x: f64) -> u32 {
        let top = self.levels() - 1;
        let t = (x.clamp(self.lo, self.hi) - self.lo) / self.step();
        (t.round() as u32).min(top)
    }

    pub fn quantize(&self, x: f64) -> f64 {
        self.level(self.code(x))
    }

    pub fn in_range(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Gaussian error added to every analog multiplication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mean: f64,
    pub std: f64,
    pub seed: u64,
}

/// Named error statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoisePreset {
    /// Statistics from the measurement campaign text: mean 0.002, std 0.039.
    Measured,
    /// Figure-caption statistics: mean 0.001, std 0.019.
    Caption,
    None,
}

impl NoisePreset {
    pub fn stats(self) -> (f64, f64) {
        match self {
            NoisePreset::Measured => (0.002, 0.039),
            NoisePreset::Caption => (0.001, 0.019),
            NoisePreset::None => (0.0, 0.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(NoisePreset::Measured),
            "caption" => Ok(NoisePreset::Caption),
            "none" => Ok(NoisePreset::None),
            other => Err(Error::Invalid(format!(
                "unknown noise preset '{other}' (expected measured, caption or none)"
            ))),
        }
    }
}

impl NoiseModel {
    pub fn new(mean: f64, std: f64, seed: u64) -> Result<Self> {
        if !(std >= 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::Invalid(format!("noise needs finite mean and std >= 0, got ({mean}, {std})")));
        }
        Ok(Self { mean, std, seed })
    }

    pub fn preset(preset: NoisePreset, seed: u64) -> Self {
        let (mean, std) = preset.stats();
        Self { mean, std, seed }
    }

    pub fn is_silent(&self) -> bool {
        self.mean == 0.0 && self.std == 0.0
    }

    /// Independent draw stream for position `key`.
    pub fn stream(&self, key: u64) -> NoiseStream {
        NoiseStream {
            rng: seeded_rng(derive_seed(self.seed, &[streams::NOISE, key])),
            mean: self.mean,
            normal: Normal::new(0.0, self.std).ok().filter(|_| self.std > 0.0),
        }
    }
}

pub struct NoiseStream {
    rng: Rng,
    mean: f64,
    normal: Option<Normal<f64>>,
}

impl NoiseStream {
    pub fn sample(&mut self) -> f64 {
        match &self.normal {
            Some(n) => self.mean + n.sample(&mut self.rng),
            None => self.mean,
        }
    }
}

/// Quantized multiply of an input amplitude and a ring weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacUnit {
    pub input: Quantizer,
    pub weight: Quantizer,
}

impl Default for MacUnit {
    fn default() -> Self {
        Self {
            input: Quantizer::input_default(),
            weight: Quantizer::weight_default(),
        }
    }
}

impl MacUnit {
    /// `q_in(x)·q_w(w) + ε`, with ε drawn from `noise` when given.
    pub fn mac(&self, x: f64, w: f64, noise: Option<&mut NoiseStream>) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange { what: "input", value: x, lo: 0.0, hi: 1.0 });
        }
        if !(-1.0..=1.0).contains(&w) {
            return Err(Error::OutOfRange { what: "weight", value: w, lo: -1.0, hi: 1.0 });
        }
        let product = self.input.quantize(x) * self.weight.quantize(w);
        Ok(match noise {
            Some(n) => product + n.sample(),
            None => product,
        })
    }
}

/// Table of measured products for every (input code, weight code) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLut {
    unit: MacUnit,
    products: Vec<f64>,
}

pub const LUT_HEADER: &str = "x_code,w_code,product";

impl ProductLut {
    pub fn unit(&self) -> &MacUnit {
        &self.unit
    }

    fn width(&self) -> u32 {
        self.unit.weight.levels()
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    /// Builds a table from the quantized product of each code pair, plus a
    /// draw from `noise` when given. Entries are generated in row-major
    /// (x_code, w_code) order from a single stream.
    ///
    /// A zero input code means no light on the channel, so both detectors
    /// see nothing and the averaged reading is exactly zero. Those entries
    /// get no error. Freezing a random offset there would add the same bias
    /// to every product whose input has a dark channel.
    pub fn synthesize(unit: MacUnit, noise: Option<&NoiseModel>) -> Self {
        let mut stream = noise.map(|n| n.stream(streams::LUT));
        let mut products = Vec::with_capacity((unit.input.levels() * unit.weight.levels()) as usize);
        for xc in 0..unit.input.levels() {
            for wc in 0..unit.weight.levels() {
                let exact = unit.input.level(xc) * unit.weight.level(wc);
                let dark = unit.input.level(xc) == 0.0;
                let eps = match stream.as_mut() {
                    Some(s) if !dark => s.sample(),
                    _ => 0.0,
                };
                products.push(exact + eps);
            }
        }
        Self { unit, products }
    }

    pub fn product(&self, x_code: u32, w_code: u32) -> Result<f64> {
        if x_code >= self.unit.input.levels() || w_code >= self.unit.weight.levels() {
            return Err(Error::MissingLutEntry { x_code, w_code });
        }
        Ok(self.products[(x_code * self.width() + w_code) as usize])
    }

    /// The exact (noise-free) product of the grid levels for a code pair.
    pub fn exact(&self, x_code: u32, w_code: u32) -> f64 {
        self.unit.input.level(x_code) * self.unit.weight.level(w_code)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.products.len() * 24);
        out.push_str(LUT_HEADER);
        out.push('\n');
        for xc in 0..self.unit.input.levels() {
            for wc in 0..self.width() {
                let p = self.products[(xc * self.width() + wc) as usize];
                let _ = writeln!(out, "{xc},{wc},{p}");
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, unit: MacUnit) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, unit).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path, message),
            other => other,
        })
    }

    pub fn from_reader(reader: impl std::io::Read, unit: MacUnit) -> Result<Self> {
        let src = Path::new("<lut>");
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::format(src, e.to_string()))?
            .iter()
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(",");
        if headers != LUT_HEADER {
            return Err(Error::format(src, format!("expected header '{LUT_HEADER}', found '{headers}'")));
        }
        let (nx, nw) = (unit.input.levels(), unit.weight.levels());
        let mut products: Vec<Option<f64>> = vec![None; (nx * nw) as usize];
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::format(src, e.to_string()))?;
            let row = line + 2;
            if record.len() != 3 {
                return Err(Error::format(src, format!("row {row}: expected 3 fields, found {}", record.len())));
            }
            let field = |i: usize| record[i].trim();
            let parse_code = |i: usize| {
                field(i)
                    .parse::<u32>()
                    .map_err(|e| Error::format(src, format!("row {row}: bad code '{}': {e}", field(i))))
            };
            let (xc, wc) = (parse_code(0)?, parse_code(1)?);
            let p: f64 = field(2)
                .parse()
                .map_err(|e| Error::format(src, format!("row {row}: bad product '{}': {e}", field(2))))?;
            if !p.is_finite() {
                return Err(Error::format(src, format!("row {row}: non-finite product")));
            }
            if xc >= nx || wc >= nw {
                return Err(Error::format(src, format!("row {row}: code pair ({xc}, {wc}) out of range")));
            }
            let slot = &mut products[(xc * nw + wc) as usize];
            if slot.is_some() {
                return Err(Error::format(src, format!("row {row}: duplicate entry for ({xc}, {wc})")));
            }
            *slot = Some(p);
        }
        let mut out = Vec::with_capacity(products.len());
        for (i, p) in products.into_iter().enumerate() {
            let i = i as u32;
            out.push(p.ok_or(Error::MissingLutEntry { x_code: i / nw, w_code: i % nw })?);
        }
        Ok(Self { unit, products: out })
    }
}

/// Bias-code to weight table for one ring, measured over the monotone
/// branch between anti-resonance (lowest code) and resonance (highest code).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationLut {
    entries: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationLookup {
    pub code: u32,
    pub weight: f64,
    /// Set when the requested weight lies outside the achievable range.
    pub clamped: bool,
}

/// Sweeps `bias_codes` evenly spaced detunings from `π` down to `0` and
/// records the resulting weight for each code.
pub fn calibrate(model: &MrrModel, bias_codes: u32) -> Result<CalibrationLut> {
    if bias_codes < 2 {
        return Err(Error::Invalid(format!("calibration needs at least 2 bias codes, got {bias_codes}")));
    }
    let top = f64::from(bias_codes - 1);
    let entries = (0..bias_codes)
        .map(|code| {
            let phase = PI * (1.0 - f64::from(code) / top);
            (code, model.weight_of_phase(phase))
        })
        .collect();
    CalibrationLut::new(entries)
}

impl CalibrationLut {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::Invalid("calibration table needs at least two entries".into()));
        }
        if entries.windows(2).any(|w| w[1].1.partial_cmp(&w[0].1) != Some(std::cmp::Ordering::Greater) || w[1].0 <= w[0].0) {
            return Err(Error::Invalid("calibration weights must increase strictly with code".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn min_weight(&self) -> f64 {
        self.entries[0].1
    }

    pub fn max_weight(&self) -> f64 {
        self.entries[self.entries.len() - 1].1
    }

    pub fn weight(&self, code: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&code, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Nearest table entry to `target`.
    pub fn inverse(&self, target: f64) -> CalibrationLookup {
        let clamped = target < self.min_weight() || target > self.max_weight();
        let idx = self.entries.partition_point(|e| e.1 < target);
        let best = if idx == 0 {
            0
        } else if idx == self.entries.len() {
            idx - 1
        } else if (self.entries[idx].1 - target).abs() < (target - self.entries[idx - 1].1).abs() {
            idx
        } else {
            idx - 1
        };
        let (code, weight) = self.entries[best];
        CalibrationLookup { code, weight, clamped }
    }

    /// Spacing between the two entries around `target`.
    pub fn local_step(&self, target: f64) -> f64 {
        let idx = self.entries.partition_point(|e| e.1 < target).clamp(1, self.entries.len() - 1);
        self.entries[idx].1 - self.entries[idx - 1].1
    }
}
