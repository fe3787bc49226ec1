//! Direct DC search for unstable equilibria, continued across the band.

use serde::{Deserialize, Serialize};

use super::MetaCharacteristic;
use crate::error::{Error, Result};
use crate::sim::{Circuit, SolverOptions};

/// Probe distance for the repeller check, volts.
pub const REPELLER_PROBE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticTrace {
    /// Accepted `(v_in, V_M)` points, ascending in `v_in`.
    pub points: Vec<(f64, f64)>,
    /// Inputs whose solve ended on a stable state or failed.
    pub rejected: Vec<f64>,
}

/// True if the output current pushes away from `v_m` on both sides.
pub fn is_repeller(circuit: &Circuit, v_m: f64, delta: f64, opts: &SolverOptions) -> Result<bool> {
    let mut x = circuit.uniform_state(0.5 * circuit.vdd());
    let above = circuit.output_current_at(&mut x, v_m + delta, opts)?;
    let below = circuit.output_current_at(&mut x, v_m - delta, opts)?;
    Ok(above > 0.0 && below < 0.0)
}

/// One unforced Newton solve from `x` (no fallbacks, which would drift to a
/// stable state) followed by the repeller check.
fn unstable_point(c: &Circuit, x: &mut Vec<f64>, v_in: f64, opts: &SolverOptions) -> Result<f64> {
    let out = c.output_index()?;
    let op = c.operating_point(x.clone(), &[], opts)?;
    let v = op.state[out];
    if !is_repeller(c, v, REPELLER_PROBE, opts)? {
        return Err(Error::FellOntoStableBranch { v_in, v_out: v });
    }
    *x = op.state;
    Ok(v)
}

/// Traces the metastable branch over `v_ins` (inside the band). The first
/// point, nearest the upper threshold, starts from the output clamped
/// `offset` below the fold of the high branch, i.e. from the high branch
/// toward the metastable one. Every later point starts from its
/// predecessor's solution with the output moved along the secant through
/// the last two points.
pub fn static_vm_trace(circuit: &Circuit, hyst: &MetaCharacteristic, offset: f64, v_ins: &[f64], opts: &SolverOptions) -> Result<StaticTrace> {
    if !(offset > 0.0 && offset <= 0.25 * circuit.vdd()) {
        return Err(Error::InvalidParameter(format!("static offset {offset} outside (0, VDD/4]")));
    }
    let opts = SolverOptions { fallbacks: false, ..*opts };
    let mut order: Vec<f64> = v_ins.iter().copied().filter(|&v| hyst.in_band(v)).collect();
    order.sort_by(|a, b| b.total_cmp(a));
    let mut c = circuit.clone();
    let mut points = Vec::with_capacity(order.len());
    let mut rejected = Vec::new();
    let mut state: Option<Vec<f64>> = None;
    let fold_slope = (hyst.high_fold - hyst.low_fold) / (hyst.v_high - hyst.v_low);
    for &v_in in &order {
        if c.input_value().is_some() {
            c.set_input(v_in)?;
        }
        // secant predictor along the branch, seeded with the slope of the
        // line between the folds
        let guess = match points.as_slice() {
            [] => hyst.high_fold - offset,
            [(v0, m0)] => m0 + fold_slope * (v_in - v0),
            [.., (v1, m1), (v0, m0)] => m0 + (m0 - m1) / (v0 - v1) * (v_in - v0),
        };
        let mut x = state.clone().unwrap_or_else(|| c.uniform_state(0.5 * c.vdd()));
        c.output_current_at(&mut x, guess, &opts)?;
        match unstable_point(&c, &mut x, v_in, &opts) {
            Ok(v) => {
                points.push((v_in, v));
                state = Some(x);
            }
            Err(e) if state.is_none() => return Err(e),
            Err(_) => rejected.push(v_in),
        }
    }
    points.reverse();
    rejected.reverse();
    Ok(StaticTrace { points, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterization::fixtures::{marino, marino_at};
    use crate::characterization::hyst;

    #[test]
    fn repeller_only_on_the_metastable_line() {
        let opts = SolverOptions::default();
        let c = marino_at(0.4);
        assert!(is_repeller(&c, 0.225, REPELLER_PROBE, &opts).unwrap());
        assert!(!is_repeller(&c, 0.0, REPELLER_PROBE, &opts).unwrap());
        assert!(!is_repeller(&c, 0.9, REPELLER_PROBE, &opts).unwrap());
    }

    #[test]
    fn trace_follows_the_analytic_line() {
        let opts = SolverOptions::default();
        let c = marino();
        let h = hyst(&c, 1e-3, &opts).unwrap();
        let v_ins: Vec<f64> = (0..40).map(|k| 0.3 + 0.3 * k as f64 / 39.0).collect();
        let t = static_vm_trace(&c, &h, 0.1, &v_ins, &opts).unwrap();
        assert!(t.rejected.is_empty());
        assert_eq!(t.points.len(), v_ins.iter().filter(|&&v| h.in_band(v)).count());
        assert!(t.points.windows(2).all(|w| w[0].0 < w[1].0));
        for &(v, vm) in &t.points {
            assert!((vm - (0.45 + 4.5 * (v - 0.45))).abs() < 1e-9, "{v}: {vm}");
        }
    }

    #[test]
    fn offset_must_lie_in_range() {
        let opts = SolverOptions::default();
        let c = marino();
        let h = hyst(&c, 1e-2, &opts).unwrap();
        for bad in [0.0, -0.1, 0.3] {
            assert!(matches!(static_vm_trace(&c, &h, bad, &[0.45], &opts), Err(Error::InvalidParameter(_))));
        }
    }
}
