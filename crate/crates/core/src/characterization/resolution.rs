//! Transient validation of metastable points and the resolution-constant
//! profile along the branch.

use serde::{Deserialize, Serialize};

use super::expdc::{exp_dc_vm, sample_offsets, Direction};
use crate::error::Result;
use crate::sim::{Circuit, Control, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionOptions {
    /// Horizon in units of the local resolution constant.
    pub horizon_taus: f64,
    /// Offset of the perturbed starts, volts.
    pub perturbation: f64,
    /// Integration steps per local resolution constant.
    pub steps_per_tau: f64,
    /// A perturbed run stops once it has moved this many perturbations.
    pub escape_factor: f64,
}

impl Default for ResolutionOptions {
    fn default() -> Self {
        ResolutionOptions { horizon_taus: 100.0, perturbation: 1e-3, steps_per_tau: 200.0, escape_factor: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPoint {
    pub v_in: f64,
    pub v_m: f64,
    pub horizon: f64,
    /// `|V_out(horizon) - v_m|` for the unperturbed start.
    pub deviation: f64,
    /// Where the starts above and below `v_m` went.
    pub escape_above: Direction,
    pub escape_below: Direction,
    /// Directions implied by the sign of the static current at the
    /// perturbed starts.
    pub predicted_above: Direction,
    pub predicted_below: Direction,
}

impl ResolutionPoint {
    pub fn escapes_as_predicted(&self) -> bool {
        self.escape_above == self.predicted_above && self.escape_below == self.predicted_below
    }
}

fn released(c: &Circuit, v0: f64, t_stop: f64, stop_at: f64, opts: &SolverOptions) -> Result<f64> {
    let mut x = c.uniform_state(0.5 * c.vdd());
    c.output_current_at(&mut x, v0, opts)?;
    let wf = c.run_transient(x, t_stop, opts, &mut |s| {
        if (s.v_out() - v0).abs() >= stop_at {
            Control::Stop
        } else {
            Control::Continue
        }
    })?;
    Ok(*wf.v_out().last().expect("non-empty waveform"))
}

fn direction(moved: f64) -> Direction {
    if moved > 0.0 {
        Direction::Up
    } else {
        Direction::Down
    }
}

/// Checks each `(v_in, V_M, tau)` by transients from the point itself and
/// from starts `perturbation` above and below it.
pub fn resolution_check(circuit: &Circuit, points: &[(f64, f64, f64)], o: &ResolutionOptions, opts: &SolverOptions) -> Result<Vec<ResolutionPoint>> {
    let mut c = circuit.clone();
    let mut out = Vec::with_capacity(points.len());
    for &(v_in, v_m, tau) in points {
        if c.input_value().is_some() {
            c.set_input(v_in)?;
        }
        let horizon = o.horizon_taus * tau;
        let run = SolverOptions { timestep: tau / o.steps_per_tau, ..*opts };
        let end = released(&c, v_m, horizon, f64::INFINITY, &run)?;
        let d = o.perturbation;
        let mut x = c.uniform_state(0.5 * c.vdd());
        let i_above = c.output_current_at(&mut x, v_m + d, opts)?;
        let i_below = c.output_current_at(&mut x, v_m - d, opts)?;
        let above = released(&c, v_m + d, horizon, o.escape_factor * d, &run)?;
        let below = released(&c, v_m - d, horizon, o.escape_factor * d, &run)?;
        out.push(ResolutionPoint {
            v_in,
            v_m,
            horizon,
            deviation: (end - v_m).abs(),
            escape_above: direction(above - (v_m + d)),
            escape_below: direction(below - (v_m - d)),
            predicted_above: direction(i_above),
            predicted_below: direction(i_below),
        });
    }
    Ok(out)
}

/// Effective capacitance over resolution constant per metastable point,
/// resolving up and down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauProfile {
    pub v_in: Vec<f64>,
    /// F/s
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

/// Fits the static current around each `(v_in, V_M)` with
/// `samples` points per side within `half_width`.
pub fn tau_profile(circuit: &Circuit, points: &[(f64, f64)], half_width: f64, samples: usize, opts: &SolverOptions) -> Result<TauProfile> {
    let mut p = TauProfile { v_in: Vec::new(), up: Vec::new(), down: Vec::new() };
    for &(v_in, v_m) in points {
        let (a, b) = sample_offsets(v_m, half_width, samples);
        let r = exp_dc_vm(circuit, v_in, &a, &b, opts)?;
        p.v_in.push(v_in);
        p.up.push(r.up.c_over_tau);
        p.down.push(r.down.c_over_tau);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterization::fixtures::{marino, C_LOAD};

    const TAU2: f64 = 1e-9;

    #[test]
    fn analytic_points_hold_and_perturbations_escape_outward() {
        let points: Vec<(f64, f64, f64)> = [0.38, 0.45, 0.52].iter().map(|&v| (v, 0.45 + 4.5 * (v - 0.45), TAU2)).collect();
        let o = ResolutionOptions { steps_per_tau: 20.0, ..ResolutionOptions::default() };
        let r = resolution_check(&marino(), &points, &o, &SolverOptions::default()).unwrap();
        for p in &r {
            assert!(p.deviation < 1e-3, "{p:?}");
            assert_eq!((p.escape_above, p.escape_below), (Direction::Up, Direction::Down));
            assert!(p.escapes_as_predicted());
            assert_eq!(p.horizon, 100.0 * TAU2);
        }
    }

    #[test]
    fn profile_is_flat_on_the_analytic_line() {
        let points: Vec<(f64, f64)> = [0.37, 0.45, 0.53].iter().map(|&v| (v, 0.45 + 4.5 * (v - 0.45))).collect();
        let p = tau_profile(&marino(), &points, 2e-4, 8, &SolverOptions::default()).unwrap();
        for (&u, &d) in p.up.iter().zip(&p.down) {
            assert!((u - C_LOAD / TAU2).abs() < 1e-3 * C_LOAD / TAU2, "{u:e}");
            assert!((d - C_LOAD / TAU2).abs() < 1e-3 * C_LOAD / TAU2, "{d:e}");
        }
    }
}
