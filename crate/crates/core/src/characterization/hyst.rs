//! Threshold and stable-branch extraction from two opposite DC sweeps.

use super::MetaCharacteristic;
use crate::error::{Error, Result};
use crate::sim::{sweep_values, Circuit, SolverOptions};

/// Runs an up-sweep and a down-sweep of the input with continuation and
/// locates the jump in each. A step whose output change exceeds a quarter
/// of the supply marks a threshold; the threshold is reported at the last
/// point before the jump, so both lie inside the true band.
pub fn hyst(circuit: &Circuit, step: f64, opts: &SolverOptions) -> Result<MetaCharacteristic> {
    let vdd = circuit.vdd();
    let out = circuit.output_index()?;
    let mut c = circuit.clone();
    let up_v = sweep_values(0.0, vdd, step)?;
    let down_v: Vec<f64> = up_v.iter().rev().copied().collect();
    let up: Vec<f64> = c.sweep_input(&up_v, true, opts)?.iter().map(|op| op.state[out]).collect();
    let down: Vec<f64> = c.sweep_input(&down_v, true, opts)?.iter().map(|op| op.state[out]).collect();

    let jump = |v: &[f64]| v.windows(2).position(|w| (w[1] - w[0]).abs() > vdd / 4.0);
    let (ku, kd) = match (jump(&up), jump(&down)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NoHysteresis),
    };
    let v_high = up_v[ku];
    let v_low = down_v[kd];
    if !(v_low < v_high) {
        return Err(Error::NoHysteresis);
    }
    let gamma3: Vec<(f64, f64)> = up_v[..=ku].iter().copied().zip(up[..=ku].iter().copied()).collect();
    let mut gamma1: Vec<(f64, f64)> = down_v[..=kd].iter().copied().zip(down[..=kd].iter().copied()).collect();
    gamma1.reverse();
    Ok(MetaCharacteristic {
        v_low,
        v_high,
        low_fold: down[kd],
        high_fold: up[ku],
        gamma1,
        gamma2: Vec::new(),
        gamma3,
        step,
        tau: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterization::fixtures::marino;
    use crate::device::MosfetParams;
    use crate::netlist::Netlist;

    #[test]
    fn analytic_band_within_one_step() {
        let step = 1e-3;
        let h = hyst(&marino(), step, &SolverOptions::default()).unwrap();
        assert!((h.v_low - 0.35).abs() <= step, "{}", h.v_low);
        assert!((h.v_high - 0.55).abs() <= step, "{}", h.v_high);
        assert!(h.low_fold.abs() < 1e-6 && (h.high_fold - 0.9).abs() < 1e-6);
        assert!(h.gamma1.first().unwrap().0 <= h.v_low + 1e-12);
        assert!(h.gamma3.last().unwrap().0 >= h.v_high - 1e-12);
        assert!(h.gamma1.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(h.gamma3.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn plain_inverter_has_no_hysteresis() {
        let mut nl = Netlist::new(0.9);
        nl.vsource("vdd", "vdd", "0", 0.9);
        nl.vsource("vin", "in", "0", 0.0);
        nl.mosfet("mp", "out", "in", "vdd", &MosfetParams::pmos_default().with_width(2.0));
        nl.mosfet("mn", "out", "in", "0", &MosfetParams::nmos_default());
        nl.capacitor("cl", "out", "0", 2e-15);
        nl.input = Some("vin".into());
        nl.load = Some("cl".into());
        let c = Circuit::compile(&nl).unwrap();
        assert_eq!(hyst(&c, 1e-2, &SolverOptions::default()).unwrap_err(), Error::NoHysteresis);
    }
}
