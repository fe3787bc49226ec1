//! Methods that locate and characterize the metastable branch.

mod binary;
mod calibrate;
mod expac;
mod expdc;
pub mod fit;
mod hyst;
mod inversion;
mod map;
mod methods;
mod resolution;
mod statics;

use serde::{Deserialize, Serialize};

pub use binary::{binary_vm, BinaryResult, MAX_BISECTIONS};
pub use hyst::hyst;
pub use calibrate::{calibrate_chat, capacitance_probe, Calibration};
pub use expac::{exp_ac_vm, fit_trace, ExpAcOptions, ExpAcResult, ExpFit};
pub use expdc::{exp_dc_vm, sample_offsets, Direction, ExpDcResult, LocalLinearModel, SAMPLES_PER_SIDE};
pub use inversion::{
    choose_p, inversion_netlist, inversion_vm, loop_gain, loop_gain_at, max_loop_gain, InversionOptions, InversionResult,
};
pub use map::{cell_current, column_currents, contour_zero, interpolate_zero, map, refine_zero, repelling_brackets, uniform_grid};
pub use methods::{compare_methods, Characterizer, Crossing, Method, MethodPoint, MethodReport, MethodSettings, Timed};
pub use resolution::{resolution_check, tau_profile, ResolutionOptions, ResolutionPoint, TauProfile};
pub use statics::{is_repeller, static_vm_trace, StaticTrace, REPELLER_PROBE};

/// Stable branches, thresholds and (once computed) the metastable branch.
///
/// `gamma1` is the low-output branch, defined from `v_low` upward;
/// `gamma3` the high-output branch, defined up to `v_high`. All branch
/// vectors are sorted by input voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCharacteristic {
    pub gamma1: Vec<(f64, f64)>,
    pub gamma2: Vec<(f64, f64)>,
    pub gamma3: Vec<(f64, f64)>,
    pub v_low: f64,
    pub v_high: f64,
    /// Output of the low branch at `v_low` (its highest point).
    pub low_fold: f64,
    /// Output of the high branch at `v_high` (its lowest point).
    pub high_fold: f64,
    /// Sweep step the thresholds were resolved with.
    pub step: f64,
    /// Optional per-point resolution constants `(v_in, tau)` along gamma2.
    pub tau: Vec<(f64, f64)>,
}

impl MetaCharacteristic {
    pub fn width(&self) -> f64 {
        self.v_high - self.v_low
    }

    pub fn in_band(&self, v_in: f64) -> bool {
        v_in > self.v_low && v_in < self.v_high
    }

    /// Samples of an `n`-point uniform grid over `[0, vdd]` that lie
    /// strictly inside the band.
    pub fn band_samples(&self, vdd: f64, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n).map(|k| vdd * k as f64 / (n - 1) as f64).filter(|&v| self.in_band(v)).collect()
    }

    /// Straight line between the two fold points, the first-order guess of
    /// the metastable branch.
    pub fn fold_line(&self, v_in: f64) -> f64 {
        let t = (v_in - self.v_low) / (self.v_high - self.v_low);
        self.low_fold + t * (self.high_fold - self.low_fold)
    }
}

/// Regular grid of static output current; `i_out[i][j]` belongs to
/// `(v_in[i], v_out[j])`. Failed cells hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub v_in: Vec<f64>,
    pub v_out: Vec<f64>,
    pub i_out: Vec<Vec<f64>>,
    pub d_in: f64,
    pub d_out: f64,
}

impl PhaseMap {
    pub fn new(v_in: Vec<f64>, v_out: Vec<f64>, i_out: Vec<Vec<f64>>) -> Self {
        let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 0.0 };
        let (d_in, d_out) = (step(&v_in), step(&v_out));
        PhaseMap { v_in, v_out, i_out, d_in, d_out }
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.i_out[i][j].is_finite()
    }

    pub fn invalid_cells(&self) -> usize {
        self.i_out.iter().flatten().filter(|v| !v.is_finite()).count()
    }

    /// Column index closest to `v_in`.
    pub fn column(&self, v_in: f64) -> usize {
        let k = ((v_in - self.v_in[0]) / self.d_in).round();
        (k.max(0.0) as usize).min(self.v_in.len() - 1)
    }
}
