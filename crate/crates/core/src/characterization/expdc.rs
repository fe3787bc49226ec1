//! Metastable value and resolution constant from the locally linear static
//! current on either side of the sign change.

use serde::{Deserialize, Serialize};

use super::fit::line_fit;
use crate::error::{Error, Result};
use crate::sim::{Circuit, SolverOptions};

/// Side of the metastable point a fit or trace belongs to; `Up` resolves
/// toward the high output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// `I_out = slope * (V_out - v_m)` near the metastable point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLinearModel {
    /// A/V
    pub slope: f64,
    /// Intercept of the fitted line at `V_out = 0`, amperes.
    pub intercept: f64,
    /// Effective capacitance over resolution time constant, F/s. Equal to
    /// the slope.
    pub c_over_tau: f64,
    pub v_m: f64,
    pub direction: Direction,
}

impl LocalLinearModel {
    /// Resolution time constant for an effective capacitance `c_hat`.
    pub fn tau(&self, c_hat: f64) -> f64 {
        c_hat / self.c_over_tau
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDcResult {
    pub up: LocalLinearModel,
    pub down: LocalLinearModel,
    /// Slope-weighted mean of the per-side roots.
    pub v_m: f64,
}

/// Default number of samples per side.
pub const SAMPLES_PER_SIDE: usize = 8;

/// `n` points on each side of `center`, spread uniformly up to
/// `half_width` away: `(above, below)`, each ordered outward.
pub fn sample_offsets(center: f64, half_width: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let d = |k: usize| half_width * k as f64 / n as f64;
    ((1..=n).map(|k| center + d(k)).collect(), (1..=n).map(|k| center - d(k)).collect())
}

fn side(c: &Circuit, x: &mut Vec<f64>, v: &[f64], direction: Direction, opts: &SolverOptions) -> Result<LocalLinearModel> {
    let i = v.iter().map(|&vo| c.output_current_at(x, vo, opts)).collect::<Result<Vec<f64>>>()?;
    let fit = line_fit(v, &i).ok_or(Error::CollinearDegenerate { slope: 0.0 })?;
    if !(fit.slope > 0.0) {
        return Err(Error::CollinearDegenerate { slope: fit.slope });
    }
    Ok(LocalLinearModel { slope: fit.slope, intercept: fit.intercept, c_over_tau: fit.slope, v_m: fit.root(), direction })
}

/// Fits the static current on `above` and `below` separately and
/// reconciles the two metastable estimates.
pub fn exp_dc_vm(circuit: &Circuit, v_in: f64, above: &[f64], below: &[f64], opts: &SolverOptions) -> Result<ExpDcResult> {
    if above.len() < 2 || below.len() < 2 {
        return Err(Error::InvalidParameter("exp_dc needs at least two samples per side".into()));
    }
    let mut c = circuit.clone();
    if c.input_value().is_some() {
        c.set_input(v_in)?;
    }
    let mut x = c.uniform_state(0.5 * c.vdd());
    let up = side(&c, &mut x, above, Direction::Up, opts)?;
    let down = side(&c, &mut x, below, Direction::Down, opts)?;
    Ok(ExpDcResult { up, down, v_m: reconcile(&up, &down) })
}

/// Slope-weighted mean of the two line roots. Intersecting the lines
/// instead is exact only for a purely quadratic current sampled
/// symmetrically about the zero and is badly conditioned wherever the two
/// slopes nearly agree, which is most of the band.
fn reconcile(up: &LocalLinearModel, down: &LocalLinearModel) -> f64 {
    (up.slope * up.v_m + down.slope * down.v_m) / (up.slope + down.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{Element, Netlist};

    /// Linear device `I_out = k (V_out - v_m)` built from a VCCS and a
    /// constant offset source.
    fn linear_device(k: f64, v_m: f64) -> Circuit {
        let mut nl = Netlist::new(0.9);
        nl.vsource("vref", "ref", "0", v_m);
        nl.push(Element::Vccs {
            name: "g1".into(),
            pos: "0".into(),
            neg: "out".into(),
            ctrl_pos: "out".into(),
            ctrl_neg: "ref".into(),
            gm: k,
        });
        nl.capacitor("cl", "out", "0", 2e-15);
        nl.load = Some("cl".into());
        Circuit::compile(&nl).unwrap()
    }

    #[test]
    fn exact_on_linear_device() {
        let c = linear_device(3e-5, 0.4123);
        let (a, b) = sample_offsets(0.41, 2e-3, SAMPLES_PER_SIDE);
        let r = exp_dc_vm(&c, 0.0, &a, &b, &SolverOptions::default()).unwrap();
        for m in [r.up, r.down] {
            assert!((m.slope - 3e-5).abs() <= 3e-5 * 1e-9);
            assert!((m.v_m - 0.4123).abs() <= 1e-12);
        }
        assert!((r.v_m - 0.4123).abs() <= 1e-12);
        assert!((r.up.tau(2e-15) - 2e-15 / 3e-5).abs() < 1e-20);
    }

    #[test]
    fn attractor_slope_is_rejected() {
        let c = linear_device(-3e-5, 0.4);
        let (a, b) = sample_offsets(0.4, 2e-3, 4);
        assert!(matches!(exp_dc_vm(&c, 0.0, &a, &b, &SolverOptions::default()), Err(Error::CollinearDegenerate { .. })));
    }

    #[test]
    fn offsets_are_symmetric() {
        let (a, b) = sample_offsets(0.5, 0.01, 4);
        assert_eq!(a.len(), 4);
        for (u, d) in a.iter().zip(&b) {
            assert!((u - 0.5 + d - 0.5).abs() < 1e-15);
        }
        assert!((a[3] - 0.51).abs() < 1e-15);
    }
}
