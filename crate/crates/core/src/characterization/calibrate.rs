//! Effective output capacitance from static current versus transient slope.

use serde::{Deserialize, Serialize};

use super::fit::median;
use crate::error::{Error, Result};
use crate::sim::{Circuit, Control, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_load: f64,
    pub c_internal: f64,
    /// `c_load + c_internal`
    pub c_hat: f64,
}

/// Ratio of static output current to the initial output slope of a short
/// transient released from the clamped state at `(v_in, v_out)`.
pub fn capacitance_probe(circuit: &Circuit, v_in: f64, v_out: f64, opts: &SolverOptions) -> Result<f64> {
    let mut c = circuit.clone();
    if c.input_value().is_some() {
        c.set_input(v_in)?;
    }
    let mut x = c.uniform_state(0.5 * c.vdd());
    let i_out = c.output_current_at(&mut x, v_out, opts)?;
    let mut slope = 0.0;
    c.run_transient(x, opts.timestep, opts, &mut |s| {
        slope = s.dv_out();
        Control::Stop
    })?;
    // a slope this small is indistinguishable from the solver's own residual
    let floor = 10.0 * opts.newton_tol / c.load_capacitance();
    if !(slope.abs() > floor) || i_out.abs() <= 10.0 * opts.newton_tol {
        return Err(Error::DegenerateProbe { v_in, v_out, slope });
    }
    Ok(i_out / slope)
}

/// Internal capacitance as the median over `probes` of the probe ratio
/// minus the external load.
pub fn calibrate_chat(circuit: &Circuit, probes: &[(f64, f64)], opts: &SolverOptions) -> Result<Calibration> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("calibration needs at least one probe point".into()));
    }
    let ratios = probes
        .iter()
        .map(|&(vi, vo)| capacitance_probe(circuit, vi, vo, opts))
        .collect::<Result<Vec<f64>>>()?;
    let c_hat = median(&ratios).expect("non-empty");
    let c_load = circuit.load_capacitance();
    Ok(Calibration { c_load, c_internal: c_hat - c_load, c_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterization::fixtures::{marino_netlist, C_LOAD};

    #[test]
    fn recovers_folded_in_capacitance() {
        let opts = SolverOptions::default();
        let probes = [(0.4, 0.1), (0.45, 0.6), (0.5, 0.3), (0.2, 0.5)];
        for extra in [0.0, 0.5e-15, 1.854e-15] {
            let c = Circuit::compile(&marino_netlist(extra)).unwrap();
            let cal = calibrate_chat(&c, &probes, &opts).unwrap();
            assert_eq!(cal.c_load, C_LOAD);
            assert!((cal.c_internal - extra).abs() <= 0.01 * C_LOAD, "{extra:e}: {:e}", cal.c_internal);
            assert!((cal.c_hat - cal.c_load - cal.c_internal).abs() < 1e-30);
        }
    }

    #[test]
    fn equilibrium_probe_is_degenerate() {
        let c = Circuit::compile(&marino_netlist(0.0)).unwrap();
        let e = capacitance_probe(&c, 0.4, 0.0, &SolverOptions::default()).unwrap_err();
        assert!(matches!(e, Error::DegenerateProbe { .. }));
        assert!(calibrate_chat(&c, &[], &SolverOptions::default()).is_err());
    }
}
