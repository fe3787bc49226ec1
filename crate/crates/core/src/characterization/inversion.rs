//! Metastability inversion: a sensed-current-controlled sink of gain `p` at
//! the output turns the metastable repeller into an attractor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{Element, Netlist};
use crate::sim::{Circuit, Control, SolverOptions};

/// DC loop gain at state `x`. With two or more designated loop nodes the
/// loop is cut at each in turn, the stage to the next node is linearised
/// with the remaining loop nodes held, and the stage gains are multiplied.
/// A single loop node gives the return ratio there: the current fed back
/// through the rest of the circuit per unit of the node's own conductance.
pub fn loop_gain(circuit: &Circuit, x: &[f64]) -> Result<f64> {
    let nodes = circuit.loop_nodes();
    let m = nodes.len();
    if m == 0 {
        return Err(Error::LoopNotFound);
    }
    if m == 1 {
        return circuit.return_ratio(x, nodes[0]);
    }
    let mut product = 1.0;
    for i in 0..m {
        let next = nodes[(i + 1) % m];
        let held: Vec<(usize, f64)> = nodes
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != (i + 1) % m)
            .map(|(j, &n)| (n, if j == i { 1.0 } else { 0.0 }))
            .collect();
        product *= circuit.linear_response(x, &held)?[next];
    }
    Ok(product)
}

/// Loop gain with the input at `v_in` and the output clamped at `v_out`.
pub fn loop_gain_at(circuit: &Circuit, v_in: f64, v_out: f64, opts: &SolverOptions) -> Result<f64> {
    let mut c = circuit.clone();
    if c.input_value().is_some() {
        c.set_input(v_in)?;
    }
    let mut x = c.uniform_state(0.5 * c.vdd());
    c.output_current_at(&mut x, v_out, opts)?;
    loop_gain(&c, &x)
}

/// Largest loop gain over `n` clamped output values spread across the
/// open supply range; returns `(v_out, gain)` at the maximum.
pub fn max_loop_gain(circuit: &Circuit, v_in: f64, n: usize, opts: &SolverOptions) -> Result<(f64, f64)> {
    let vdd = circuit.vdd();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for k in 1..=n.max(1) {
        let v = vdd * k as f64 / (n.max(1) + 1) as f64;
        let g = loop_gain_at(circuit, v_in, v, opts)?;
        if g > best.1 {
            best = (v, g);
        }
    }
    Ok(best)
}

/// Inversion gain for loop gain `a_squared`: the smaller root of the
/// critical-damping condition of the two-pole loop model,
/// `2 A² (1 - sqrt(1 - 1/A²))`. Behaves like `1 + 1/(4 A²)` for large gain.
pub fn choose_p(a_squared: f64) -> Result<f64> {
    if !(a_squared >= 1.0) {
        return Err(Error::GainBelowOne(a_squared));
    }
    Ok(2.0 * a_squared * (1.0 - (1.0 - 1.0 / a_squared).sqrt()))
}

/// Copy of `netlist` with every capacitor on the output moved behind a
/// zero-volt sense source `vsns` and a sink `finv` drawing `p` times the
/// sensed current from the new capacitor node. The output capacitance then
/// integrates `(1 - p)` times the circuit's output current.
pub fn inversion_netlist(netlist: &Netlist, p: f64) -> Result<Netlist> {
    let mut nl = netlist.clone();
    let (out, _) = nl.output()?;
    let cap_node = format!("{out}_inv");
    for e in nl.elements.iter_mut() {
        if let Element::Capacitor { a, b, .. } = e {
            for n in [a, b] {
                if *n == out {
                    *n = cap_node.clone();
                }
            }
        }
    }
    nl.vsource("vsns", &out, &cap_node, 0.0);
    nl.push(Element::Cccs { name: "finv".into(), pos: cap_node, neg: "0".into(), gain: p, sensed: "vsns".into() });
    nl.validate()?;
    Ok(nl)
}

/// Output step used to tell a settled repeller from a stable state, volts.
const SLOPE_PROBE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionOptions {
    /// `|V_out'|` below this counts as settled, V/s.
    pub settle_slope: f64,
    pub settle_steps: usize,
    /// A settled point must also have a static output current below this
    /// in the original circuit, amperes.
    pub settle_current: f64,
    /// Sign alternations of `V_out'` within `oscillation_window` steps that
    /// flag an oscillation.
    pub oscillation_flips: usize,
    pub oscillation_window: usize,
    /// Longest simulated time, seconds.
    pub t_stop: f64,
    /// Longest run in integration steps.
    pub max_steps: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            settle_slope: 1.0,
            settle_steps: 10,
            settle_current: 1e-10,
            oscillation_flips: 6,
            oscillation_window: 20,
            t_stop: 20e-6,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub v_m: f64,
    pub settle_time: f64,
    pub steps: usize,
}

/// Runs the inverted circuit from the output clamped at `start` until it
/// settles, oscillates or reaches `t_stop` or `max_steps`.
pub fn inversion_vm(netlist: &Netlist, v_in: f64, p: f64, start: f64, o: &InversionOptions, opts: &SolverOptions) -> Result<InversionResult> {
    let mut orig = Circuit::compile(netlist)?;
    let mut inv = Circuit::compile(&inversion_netlist(netlist, p)?)?;
    if orig.input_value().is_some() {
        orig.set_input(v_in)?;
        inv.set_input(v_in)?;
    }
    let mut x = inv.uniform_state(0.5 * inv.vdd());
    inv.output_current_at(&mut x, start, opts)?;
    // a step that begins within tolerance must still take a Newton step
    let step_opts = SolverOptions { min_iterations: opts.min_iterations.max(1), ..*opts };

    let mut calm = 0usize;
    let mut signs: Vec<(usize, f64)> = Vec::new();
    let mut probe = orig.uniform_state(0.5 * orig.vdd());
    let mut outcome: Option<Result<InversionResult>> = None;
    let t_stop = o.t_stop.min(o.max_steps as f64 * opts.timestep);
    inv.run_transient(x, t_stop, &step_opts, &mut |s| {
        let d = s.dv_out();
        if d.abs() < o.settle_slope {
            calm += 1;
        } else {
            calm = 0;
            signs.push((s.index, d.signum()));
            signs.retain(|&(k, _)| k + o.oscillation_window > s.index);
            let flips = signs.windows(2).filter(|w| w[0].1 != w[1].1).count();
            if flips >= o.oscillation_flips {
                outcome = Some(Err(Error::Oscillation { time: s.time }));
                return Control::Stop;
            }
        }
        if calm >= o.settle_steps {
            let v = s.v_out();
            // a run that escaped to a stable state also ends calm, but there
            // the current falls with rising output
            let check = orig.output_current_at(&mut probe, v, opts).and_then(|i| {
                let mut ahead = probe.clone();
                Ok((i, orig.output_current_at(&mut ahead, v + SLOPE_PROBE, opts)?))
            });
            match check {
                Ok((i, ahead)) if i.abs() <= o.settle_current && ahead > i => {
                    outcome = Some(Ok(InversionResult { v_m: v, settle_time: s.time, steps: s.index }));
                    return Control::Stop;
                }
                Ok((i, ahead)) if ahead <= i => {
                    outcome = Some(Err(Error::NotSettled { time: s.time }));
                    return Control::Stop;
                }
                Ok(_) => {}
                Err(e) => {
                    outcome = Some(Err(e));
                    return Control::Stop;
                }
            }
        }
        Control::Continue
    })?;
    outcome.unwrap_or(Err(Error::NotSettled { time: t_stop }))
}
