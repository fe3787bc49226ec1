//! Circuit engine: DC operating points, sweeps, static output current and
//! fixed-step transients on a [`Netlist`].

mod circuit;
mod transient;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use circuit::Circuit;
pub use transient::{Control, StepView, Waveform};

use crate::error::{Error, Result};
use crate::netlist::Netlist;

/// Node name to voltage.
pub type NodeVoltages = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    BackwardEuler,
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest admissible Kirchhoff residual, amperes.
    pub newton_tol: f64,
    /// Largest admissible voltage-source constraint error, volts.
    pub source_tol: f64,
    pub max_iterations: usize,
    /// Newton iterations taken even when the starting point already meets
    /// the tolerances. A transient step that starts converged would
    /// otherwise never move a slowly drifting state.
    pub min_iterations: usize,
    /// Largest node-voltage update per Newton iteration, volts.
    pub damping: f64,
    /// Transient step, seconds.
    pub timestep: f64,
    pub method: Integrator,
    /// Shunt conductance from every node to ground (0 disables it).
    pub gmin: f64,
    /// Stages of the source-stepping fallback.
    pub source_steps: usize,
    /// Whether a failed DC solve may fall back to continuation (pseudo
    /// transient, then source stepping). Both tend toward stable states, so
    /// searches for unstable equilibria turn them off.
    pub fallbacks: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-12,
            source_tol: 1e-9,
            max_iterations: 100,
            min_iterations: 0,
            damping: 0.1,
            timestep: 10e-15,
            method: Integrator::BackwardEuler,
            gmin: 0.0,
            source_steps: 10,
            fallbacks: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.newton_tol > 0.0
            && self.source_tol > 0.0
            && self.max_iterations >= 1
            && self.min_iterations <= self.max_iterations
            && self.damping > 0.0
            && self.timestep > 0.0
            && self.gmin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid solver options {self:?}")))
        }
    }

    pub fn with_timestep(mut self, h: f64) -> Self {
        self.timestep = h;
        self
    }
}

/// A converged DC solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub node_voltages: NodeVoltages,
    /// Largest Kirchhoff residual over the free nodes, amperes.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Raw solver state (node voltages then source currents).
    pub state: Vec<f64>,
}

impl OperatingPoint {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        self.node_voltages.get(node).copied()
    }

    fn from_state(c: &Circuit, x: Vec<f64>, iterations: usize, residual: f64) -> Self {
        let node_voltages = c.node_names().iter().cloned().zip(x.iter().copied()).collect();
        OperatingPoint { node_voltages, residual_norm: residual, iterations, converged: true, state: x }
    }
}

impl Circuit {
    /// Builds a state vector from a partial node assignment; unassigned
    /// nodes start at 0 V.
    pub fn state_from(&self, guess: &NodeVoltages) -> Vec<f64> {
        let mut x = self.uniform_state(0.0);
        for (name, v) in guess {
            if let Some(i) = self.node_index(name) {
                x[i] = *v;
            }
        }
        x
    }

    /// Newton solve from `x` with optional forced nodes.
    pub fn operating_point(&self, x: Vec<f64>, forced: &[(usize, f64)], opts: &SolverOptions) -> Result<OperatingPoint> {
        self.check_forced(forced)?;
        let mut x = x;
        let s = self.solve(&mut x, forced, None, opts)?;
        Ok(OperatingPoint::from_state(self, x, s.iterations, s.residual))
    }

    /// Sweep of the input source with optional continuation.
    pub fn sweep_input(&mut self, values: &[f64], warm_start: bool, opts: &SolverOptions) -> Result<Vec<OperatingPoint>> {
        let mut out = Vec::with_capacity(values.len());
        let mut x = self.uniform_state(0.0);
        for &v in values {
            self.set_input(v)?;
            if !warm_start {
                x = self.uniform_state(0.0);
            }
            let op = self
                .operating_point(x.clone(), &[], opts)
                .map_err(|e| Error::SweepNonConvergence { value: v, source: Box::new(e) })?;
            x = op.state.clone();
            out.push(op);
        }
        Ok(out)
    }

    /// Transient from a node-voltage assignment covering every capacitor
    /// node.
    pub fn transient_from(&self, ic: &NodeVoltages, t_stop: f64, opts: &SolverOptions) -> Result<Waveform> {
        let ic: Vec<Option<f64>> = self.node_names().iter().map(|n| ic.get(n).copied()).collect();
        let x0 = self.consistent_state(&ic, opts)?;
        self.run_transient(x0, t_stop, opts, &mut |_| Control::Continue)
    }
}

/// Sweep points from `from` to `to` (inclusive) in steps of `step`.
pub fn sweep_values(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if step == 0.0 || !step.is_finite() || (to - from) * step < 0.0 {
        return Err(Error::InvalidParameter(format!("sweep step {step} inconsistent with {from} -> {to}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| from + k as f64 * step).collect())
}

/// Newton-Raphson DC operating point reached from `initial_guess`.
/// Unassigned nodes start at 0 V.
pub fn dc_operating_point(netlist: &Netlist, initial_guess: &NodeVoltages, options: &SolverOptions) -> Result<OperatingPoint> {
    options.validate()?;
    let c = Circuit::compile(netlist)?;
    c.operating_point(c.state_from(initial_guess), &[], options)
}

/// DC sweep of voltage source `swept_source`.
pub fn dc_sweep(
    netlist: &Netlist,
    swept_source: &str,
    from: f64,
    to: f64,
    step: f64,
    warm_start: bool,
    options: &SolverOptions,
) -> Result<Vec<OperatingPoint>> {
    options.validate()?;
    let values = sweep_values(from, to, step)?;
    let mut nl = netlist.clone();
    nl.input = Some(swept_source.to_string());
    Circuit::compile(&nl)?.sweep_input(&values, warm_start, options)
}

/// Current delivered into a source clamping the output at `v_out` while
/// the input sits at `v_in`.
pub fn output_current(netlist: &Netlist, v_in: f64, v_out_clamped: f64, options: &SolverOptions) -> Result<f64> {
    options.validate()?;
    let mut c = Circuit::compile(netlist)?;
    if c.input.is_some() {
        c.set_input(v_in)?;
    }
    let mut x = c.uniform_state(0.0);
    c.output_current_at(&mut x, v_out_clamped, options)
}

/// Fixed-step transient from `initial_conditions`, which must assign every
/// capacitor node.
pub fn transient(netlist: &Netlist, initial_conditions: &NodeVoltages, t_stop: f64, options: &SolverOptions) -> Result<Waveform> {
    options.validate()?;
    let c = Circuit::compile(netlist)?;
    c.transient_from(initial_conditions, t_stop, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::MosfetParams;

    fn inverter(v_in: f64) -> Netlist {
        let mut nl = Netlist::new(0.9);
        nl.vsource("vdd", "vdd", "0", 0.9);
        nl.vsource("vin", "in", "0", v_in);
        nl.mosfet("mp", "out", "in", "vdd", &MosfetParams::pmos_default().with_width(2.0));
        nl.mosfet("mn", "out", "in", "0", &MosfetParams::nmos_default());
        nl.capacitor("cl", "out", "0", 2e-15);
        nl.input = Some("vin".into());
        nl.load = Some("cl".into());
        nl
    }

    #[test]
    fn inverter_low_input_gives_vdd() {
        let op = dc_operating_point(&inverter(0.0), &NodeVoltages::new(), &SolverOptions::default()).unwrap();
        assert!(op.converged);
        assert!(op.residual_norm <= 1e-12);
        assert!((op.voltage("out").unwrap() - 0.9).abs() < 1e-6);
    }

    #[test]
    fn sweep_values_inclusive() {
        let v = sweep_values(0.0, 0.9, 0.1).unwrap();
        assert_eq!(v.len(), 10);
        assert!(sweep_values(0.0, 0.9, -0.1).is_err());
        assert!(sweep_values(0.9, 0.0, -0.1).unwrap().len() == 10);
    }

    #[test]
    fn output_current_zero_on_stable_point() {
        let nl = inverter(0.42);
        let op = dc_operating_point(&nl, &NodeVoltages::new(), &SolverOptions::default()).unwrap();
        let v = op.voltage("out").unwrap();
        let i = output_current(&nl, 0.42, v, &SolverOptions::default()).unwrap();
        assert!(i.abs() <= 1e-11, "{i:e}");
        let above = output_current(&nl, 0.42, v + 0.01, &SolverOptions::default()).unwrap();
        assert!(above < 0.0);
    }
}
