//! `M × N` microring weight bank computing `δ = (B·e) ⊙ g'(a)`.
//!
//! Signal chain per operational cycle: the error magnitudes are amplitude
//! encoded on `N` wavelengths, every ring row forms a balanced-detector dot
//! product, a per-row TIA applies the gain `g'`, and an ADC digitises the
//! result. Matrices larger than the bank are split into tiles, one cycle
//! each; column tiles of the same row band are summed digitally.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dfa::{GatedProduct, MvmExecutor};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::mrr::{MacUnit, NoiseModel, NoiseStream, ProductLut, Quantizer};

/// Upper bound on wavelength channels sharing one bus.
pub const DEFAULT_CHANNEL_LIMIT: usize = 108;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Exact analog arithmetic, no converters.
    Ideal,
    /// Quantized operands and readout.
    Quantized,
    /// Quantized plus Gaussian error on every multiplication.
    Noisy,
    /// Every multiplication looked up in a measured product table.
    Empirical,
}

impl Backend {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Backend::Ideal),
            "quantized" => Ok(Backend::Quantized),
            "noisy" => Ok(Backend::Noisy),
            "empirical" => Ok(Backend::Empirical),
            other => Err(Error::Invalid(format!(
                "unknown backend '{other}' (expected ideal, quantized, noisy or empirical)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Ideal => "ideal",
            Backend::Quantized => "quantized",
            Backend::Noisy => "noisy",
            Backend::Empirical => "empirical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcSpec {
    pub bits: u32,
    /// Symmetric full-scale `[−range, range]`; `None` uses the bank width.
    pub range: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBankConfig {
    pub rows: usize,
    pub cols: usize,
    pub backend: Backend,
    pub mac: MacUnit,
    pub noise: NoiseModel,
    pub adc: Option<AdcSpec>,
    pub channel_limit: usize,
}

impl WeightBankConfig {
    /// Bank with 5-bit inputs, 6-bit weights, measured noise statistics and
    /// a 6-bit ADC (no ADC for the ideal backend).
    pub fn new(rows: usize, cols: usize, backend: Backend) -> Result<Self> {
        let cfg = Self {
            rows,
            cols,
            backend,
            mac: MacUnit::default(),
            noise: NoiseModel::preset(crate::mrr::NoisePreset::Measured, 0),
            adc: (backend != Backend::Ideal).then_some(AdcSpec { bits: 6, range: None }),
            channel_limit: DEFAULT_CHANNEL_LIMIT,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Invalid(format!("bank dimensions must be >= 1, got {}x{}", self.rows, self.cols)));
        }
        if self.cols > self.channel_limit {
            return Err(Error::Invalid(format!(
                "bank width {} exceeds the {}-channel WDM limit",
                self.cols, self.channel_limit
            )));
        }
        if let Some(adc) = self.adc {
            if let Some(r) = adc.range {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(Error::Invalid(format!("ADC range must be positive, got {r}")));
                }
            }
            Quantizer::new(adc.bits, -1.0, 1.0)?;
        }
        Ok(())
    }

    pub fn adc_quantizer(&self) -> Option<Quantizer> {
        self.adc.map(|a| {
            let r = a.range.unwrap_or(self.cols as f64);
            Quantizer { bits: a.bits, lo: -r, hi: r }
        })
    }

    fn quantizes(&self) -> bool {
        self.backend != Backend::Ideal
    }
}

/// Error vector as the optical front end sees it: per-channel magnitudes
/// in `[0, 1]`, signs folded into the weight columns, and one digital scale.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedError {
    pub magnitudes: Vec<f64>,
    pub signs: Vec<f64>,
    pub scale: f64,
}

impl EncodedError {
    pub fn decode(&self) -> Vec<f64> {
        self.magnitudes
            .iter()
            .zip(&self.signs)
            .map(|(m, s)| m * s * self.scale)
            .collect()
    }
}

/// Normalises `e` by its largest magnitude, optionally snapping the
/// magnitudes onto the input grid.
pub fn encode_error(e: &[f64], input: Option<&Quantizer>) -> EncodedError {
    let max = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { max } else { 1.0 };
    let magnitudes = e
        .iter()
        .map(|v| {
            let m = (v.abs() / scale).min(1.0);
            input.map_or(m, |q| q.quantize(m))
        })
        .collect();
    let signs = e.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    EncodedError { magnitudes, signs, scale }
}

/// Per-row TIA gain.
pub fn tia_hadamard(row_outputs: &[f64], gains: &[f64]) -> Result<Vec<f64>> {
    linalg::hadamard(row_outputs, gains)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdcReadout {
    pub values: Vec<f64>,
    pub saturated: usize,
}

/// Round-to-nearest conversion; values outside the range clamp and are
/// counted as saturated.
pub fn adc_readout(v: &[f64], adc: &Quantizer) -> AdcReadout {
    let mut saturated = 0;
    let values = v
        .iter()
        .map(|&x| {
            if !adc.in_range(x) {
                saturated += 1;
            }
            adc.quantize(x)
        })
        .collect();
    AdcReadout { values, saturated }
}

/// Physical ring array holding one tile at a time.
#[derive(Debug, Clone)]
pub struct WeightBank {
    config: WeightBankConfig,
    weights: Vec<f64>,
    codes: Vec<u32>,
    used_rows: usize,
    used_cols: usize,
}

impl WeightBank {
    pub fn new(config: WeightBankConfig) -> Result<Self> {
        config.validate()?;
        let cells = config.rows * config.cols;
        Ok(Self {
            config,
            weights: vec![0.0; cells],
            codes: vec![0; cells],
            used_rows: 0,
            used_cols: 0,
        })
    }

    pub fn config(&self) -> &WeightBankConfig {
        &self.config
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.config.cols + col]
    }

    /// Inscribes `tile · diag(column_signs)`. Cells outside the tile are set
    /// to zero and take no part in the product.
    pub fn load_tile(&mut self, tile: &Matrix, column_signs: &[f64]) -> Result<()> {
        let (r, c) = tile.shape();
        if r > self.config.rows || c > self.config.cols {
            return Err(Error::Invalid(format!(
                "tile {r}x{c} does not fit a {}x{} bank",
                self.config.rows, self.config.cols
            )));
        }
        check_len("column signs", c, column_signs.len())?;
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        let wq = self.config.mac.weight;
        for i in 0..r {
            for (j, sign) in column_signs.iter().enumerate() {
                let w = tile.get(i, j) * sign;
                if !(-1.0..=1.0).contains(&w) {
                    return Err(Error::Invalid(format!(
                        "tile entry ({i}, {j}) = {w} outside [-1, 1]; pre-scale the matrix"
                    )));
                }
                let cell = i * self.config.cols + j;
                match self.config.backend {
                    Backend::Ideal => self.weights[cell] = w,
                    _ => {
                        let code = wq.code(w);
                        self.codes[cell] = code;
                        self.weights[cell] = wq.level(code);
                    }
                }
            }
        }
        self.used_rows = r;
        self.used_cols = c;
        Ok(())
    }

    /// Adds each row's balanced-detector output for `magnitudes` into `acc`,
    /// one multiplication at a time in column order.
    pub fn accumulate_into(
        &self,
        magnitudes: &[f64],
        mut noise: Option<&mut NoiseStream>,
        lut: Option<&ProductLut>,
        acc: &mut [f64],
    ) -> Result<()> {
        check_len("bank input channels", self.used_cols, magnitudes.len())?;
        check_len("bank rows", self.config.rows, acc.len())?;
        let cols = self.config.cols;
        let unit = &self.config.mac;
        match self.config.backend {
            Backend::Ideal => {
                for (i, a) in acc.iter_mut().enumerate().take(self.used_rows) {
                    let row = &self.weights[i * cols..i * cols + self.used_cols];
                    for (x, w) in magnitudes.iter().zip(row) {
                        *a += x * w;
                    }
                }
            }
            Backend::Quantized | Backend::Noisy => {
                for (i, a) in acc.iter_mut().enumerate().take(self.used_rows) {
                    let row = &self.weights[i * cols..i * cols + self.used_cols];
                    for (&x, &w) in magnitudes.iter().zip(row) {
                        *a += unit.mac(x, w, noise.as_deref_mut())?;
                    }
                }
            }
            Backend::Empirical => {
                let lut = lut.ok_or_else(|| Error::Invalid("empirical backend has no product table loaded".into()))?;
                let x_codes: Vec<u32> = magnitudes
                    .iter()
                    .map(|&x| {
                        if (0.0..=1.0).contains(&x) {
                            Ok(lut.unit().input.code(x))
                        } else {
                            Err(Error::OutOfRange { what: "input", value: x, lo: 0.0, hi: 1.0 })
                        }
                    })
                    .collect::<Result<_>>()?;
                for (i, a) in acc.iter_mut().enumerate().take(self.used_rows) {
                    let codes = &self.codes[i * cols..i * cols + self.used_cols];
                    for (&xc, &wc) in x_codes.iter().zip(codes) {
                        *a += lut.product(xc, wc)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Row outputs (length `M`) for one cycle.
    pub fn bank_mvm(
        &self,
        magnitudes: &[f64],
        noise: Option<&mut NoiseStream>,
        lut: Option<&ProductLut>,
    ) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.config.rows];
        self.accumulate_into(magnitudes, noise, lut, &mut out)?;
        Ok(out)
    }
}

/// Number of operational cycles needed for a `rows × cols` matrix.
pub fn cycle_count(rows: usize, cols: usize, bank_rows: usize, bank_cols: usize) -> u64 {
    (rows.div_ceil(bank_rows) * cols.div_ceil(bank_cols)) as u64
}

/// [`MvmExecutor`] backed by a simulated weight bank.
#[derive(Debug, Clone)]
pub struct PhotonicExecutor {
    config: WeightBankConfig,
    lut: Option<Arc<ProductLut>>,
}

impl PhotonicExecutor {
    pub fn new(config: WeightBankConfig, lut: Option<Arc<ProductLut>>) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, lut })
    }

    pub fn config(&self) -> &WeightBankConfig {
        &self.config
    }

    /// `(B·e) ⊙ g'` over as many cycles as the bank size requires.
    ///
    /// `B` is normalised by its largest magnitude before inscription; that
    /// factor and the error scale are restored digitally after readout.
    pub fn tiled_mvm(&self, b: &Matrix, e: &[f64], g_prime: &[f64], stream: u64) -> Result<GatedProduct> {
        check_len("tiled_mvm input", b.cols(), e.len())?;
        check_len("tiled_mvm gains", b.rows(), g_prime.len())?;
        let cfg = &self.config;
        let (m_bank, n_bank) = (cfg.rows, cfg.cols);
        let max_b = b.max_abs();
        let scale_b = if max_b > 0.0 { max_b } else { 1.0 };
        let enc = encode_error(e, cfg.quantizes().then_some(&cfg.mac.input));
        let digital_scale = enc.scale * scale_b;
        let adc = cfg.adc_quantizer();
        let mut noise = (cfg.backend == Backend::Noisy).then(|| cfg.noise.stream(stream));
        let lut = self.lut.as_deref();

        let mut bank = WeightBank::new(*cfg)?;
        let mut out = vec![0.0; b.rows()];
        let mut cycles = 0u64;
        let mut saturated = 0u64;
        for r0 in (0..b.rows()).step_by(m_bank) {
            let band = m_bank.min(b.rows() - r0);
            let gains = &g_prime[r0..r0 + band];
            let mut acc = vec![0.0; m_bank];
            for c0 in (0..b.cols()).step_by(n_bank) {
                let width = n_bank.min(b.cols() - c0);
                let tile = b.block(r0, c0, band, width).scaled(1.0 / scale_b);
                bank.load_tile(&tile, &enc.signs[c0..c0 + width])?;
                let mags = &enc.magnitudes[c0..c0 + width];
                cycles += 1;
                match &adc {
                    // Without a converter the per-cycle sums stay analog and
                    // the row sum runs straight through all column tiles.
                    None => bank.accumulate_into(mags, noise.as_mut(), lut, &mut acc)?,
                    Some(q) => {
                        let rows = bank.bank_mvm(mags, noise.as_mut(), lut)?;
                        let gated = tia_hadamard(&rows[..band], gains)?;
                        let read = adc_readout(&gated, q);
                        saturated += read.saturated as u64;
                        for (a, v) in acc.iter_mut().zip(&read.values) {
                            *a += v * digital_scale;
                        }
                    }
                }
            }
            for (i, o) in out[r0..r0 + band].iter_mut().enumerate() {
                *o = match adc {
                    None => acc[i] * gains[i] * digital_scale,
                    Some(_) => acc[i],
                };
            }
        }
        Ok(GatedProduct { values: out, cycles, saturated })
    }
}

impl MvmExecutor for PhotonicExecutor {
    fn gated_mvm(&self, matrix: &Matrix, input: &[f64], gains: &[f64], stream: u64) -> Result<GatedProduct> {
        self.tiled_mvm(matrix, input, gains, stream)
    }

    fn name(&self) -> &str {
        self.config.backend.as_str()
    }
}
