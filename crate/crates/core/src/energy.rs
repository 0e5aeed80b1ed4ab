//! Throughput, wall-plug power and energy per operation for an `M × N`
//! weight bank.

use serde::{Deserialize, Serialize};

use crate::bank::DEFAULT_CHANNEL_LIMIT;
use crate::error::{Error, Result};

/// CODATA 2018 exact values.
pub mod constants {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HardwareParams {
    /// Operational rate (Hz).
    pub f_s: f64,
    /// Photodetector precision (bits).
    pub n_bits: u32,
    /// Combined laser, detector and waveguide efficiency.
    pub eta: f64,
    /// Wavelength (m).
    pub wavelength: f64,
    /// Photodetector capacitance (F).
    pub capacitance: f64,
    /// Photodetector drive voltage (V).
    pub drive_voltage: f64,
    /// Power per DAC (W).
    pub p_dac: f64,
    /// Power per ADC (W).
    pub p_adc: f64,
    /// TIA energy per symbol (J).
    pub e_tia: f64,
    /// Heater power per ring (W).
    pub p_mrr: f64,
    /// MAC cell footprint (m).
    pub cell_width: f64,
    pub cell_height: f64,
}

impl Default for HardwareParams {
    fn default() -> Self {
        Self {
            f_s: 12e9,
            n_bits: 6,
            eta: 0.2,
            wavelength: 1550e-9,
            capacitance: 2.4e-15,
            drive_voltage: 1.0,
            p_dac: 190e-3,
            p_adc: 13e-3,
            e_tia: 2.4e-12,
            p_mrr: 5e-3,
            cell_width: 47.4e-6,
            cell_height: 73.0e-6,
        }
    }
}

impl HardwareParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("f_s", self.f_s),
            ("eta", self.eta),
            ("wavelength", self.wavelength),
            ("capacitance", self.capacitance),
            ("drive_voltage", self.drive_voltage),
            ("p_dac", self.p_dac),
            ("p_adc", self.p_adc),
            ("e_tia", self.e_tia),
            ("p_mrr", self.p_mrr),
            ("cell_width", self.cell_width),
            ("cell_height", self.cell_height),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.n_bits == 0 || self.n_bits > 60 {
            return Err(Error::Invalid(format!("n_bits must be in 1..=60, got {}", self.n_bits)));
        }
        Ok(())
    }

    pub fn photon_energy(&self) -> f64 {
        constants::PLANCK * constants::SPEED_OF_LIGHT / self.wavelength
    }

    /// Photons needed per detection: the larger of the shot-noise count
    /// `2^(2N_b+1)` and the capacitive charging count `C·V_d/e`.
    pub fn photons_per_detection(&self) -> f64 {
        let shot = 2f64.powi(2 * self.n_bits as i32 + 1);
        let charge = self.capacitance * self.drive_voltage / constants::ELEMENTARY_CHARGE;
        shot.max(charge)
    }

    pub fn p_tia(&self) -> f64 {
        self.e_tia * self.f_s
    }
}

/// Operations per second; one multiply or one add counts as an operation.
pub fn ops(m: usize, n: usize, f_s: f64) -> f64 {
    2.0 * f_s * m as f64 * n as f64
}

/// Minimum optical power per laser for a bank with `m` rows.
pub fn laser_power(params: &HardwareParams, m: usize) -> f64 {
    params.f_s * m as f64 * params.photon_energy() / params.eta * params.photons_per_detection()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub laser: f64,
    pub dac: f64,
    pub mrr: f64,
    pub tia: f64,
    pub adc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rows: usize,
    pub cols: usize,
    pub ops_per_second: f64,
    pub p_laser_per_channel: f64,
    pub p_total: f64,
    /// Joules per operation.
    pub e_op: f64,
    /// Operations per second per square metre.
    pub compute_density: f64,
    pub breakdown: PowerBreakdown,
}

impl EnergyReport {
    pub fn tops(&self) -> f64 {
        self.ops_per_second * 1e-12
    }

    pub fn e_op_pj(&self) -> f64 {
        self.e_op * 1e12
    }

    pub fn tops_per_mm2(&self) -> f64 {
        self.compute_density * 1e-12 * 1e-6
    }
}

/// `P = N·P_laser + N·P_DAC + N(M+1)·P_MRR + M·(P_TIA + P_ADC)`.
pub fn total_power(params: &HardwareParams, m: usize, n: usize) -> Result<EnergyReport> {
    params.validate()?;
    if m == 0 || n == 0 {
        return Err(Error::Invalid(format!("bank dimensions must be >= 1, got {m}x{n}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let p_laser = laser_power(params, m);
    let breakdown = PowerBreakdown {
        laser: nf * p_laser,
        dac: nf * params.p_dac,
        mrr: nf * (mf + 1.0) * params.p_mrr,
        tia: mf * params.p_tia(),
        adc: mf * params.p_adc,
    };
    let p_total = breakdown.laser + breakdown.dac + breakdown.mrr + breakdown.tia + breakdown.adc;
    let ops_per_second = ops(m, n, params.f_s);
    Ok(EnergyReport {
        rows: m,
        cols: n,
        ops_per_second,
        p_laser_per_channel: p_laser,
        p_total,
        e_op: p_total / ops_per_second,
        compute_density: ops_per_second / (mf * nf * params.cell_width * params.cell_height),
        breakdown,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub cells: usize,
    pub best_m: usize,
    pub best_n: usize,
    pub e_op: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub max_cells: usize,
    pub min_dim: usize,
    /// Reject banks wider than the WDM channel limit.
    pub enforce_channel_limit: bool,
}

impl SweepOptions {
    pub fn new(max_cells: usize) -> Self {
        Self { max_cells, min_dim: 5, enforce_channel_limit: false }
    }
}

/// Lowest energy per operation for each achievable cell count, trying
/// every `M × N` factorisation in both orientations.
pub fn sweep_e_op(params: &HardwareParams, opts: &SweepOptions) -> Result<Vec<SweepPoint>> {
    params.validate()?;
    if opts.min_dim == 0 {
        return Err(Error::Invalid("min_dim must be >= 1".into()));
    }
    let mut best: Vec<Option<SweepPoint>> = vec![None; opts.max_cells + 1];
    for m in opts.min_dim..=opts.max_cells / opts.min_dim.max(1) {
        for n in opts.min_dim..=opts.max_cells / m {
            if opts.enforce_channel_limit && n > DEFAULT_CHANNEL_LIMIT {
                continue;
            }
            let e_op = total_power(params, m, n)?.e_op;
            let cells = m * n;
            let slot = &mut best[cells];
            if slot.is_none_or(|p| e_op < p.e_op) {
                *slot = Some(SweepPoint { cells, best_m: m, best_n: n, e_op });
            }
        }
    }
    Ok(best.into_iter().flatten().collect())
}

pub const SWEEP_CSV_HEADER: &str = "cells,best_M,best_N,e_op_pJ";

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{},{}\n", p.cells, p.best_m, p.best_n, p.e_op * 1e12));
    }
    out
}
