//! Metastable value and resolution constant from exponential fits to two
//! short transients released on either side of the metastable point.

use serde::{Deserialize, Serialize};

use super::expdc::Direction;
use super::fit::line_fit;
use crate::error::{Error, Result};
use crate::sim::{Circuit, Control, SolverOptions};

/// `V_out = V_M ± v_x * exp((t - t_hat) / tau)`, fitted through
/// `ln|V_out'|` which is linear in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub tau: f64,
    pub v_x: f64,
    pub t_hat: f64,
    pub direction: Direction,
    pub r_squared: f64,
    /// Samples kept after dropping the settling phase.
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpAcResult {
    pub up: ExpFit,
    pub down: ExpFit,
    pub v_m_up: f64,
    pub v_m_down: f64,
    /// Per-side estimates weighted by their growth rates `1/tau`.
    pub v_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpAcOptions {
    /// Offset of the two release points from the start point, volts.
    pub epsilon: f64,
    /// A run stops once the output has moved this far from its release
    /// point, volts.
    pub excursion: f64,
    /// Longest simulated time per run, seconds.
    pub t_window: f64,
    /// Smallest acceptable R² of the final fit.
    pub r2_min: f64,
    /// Number of evenly spaced candidate start indices tried when dropping
    /// the leading samples.
    pub settle_candidates: usize,
    /// A candidate start is accepted once its fit misfit `1 - R²` is within
    /// this factor of the best candidate's; the earliest accepted one wins.
    pub settle_slack: f64,
}

impl Default for ExpAcOptions {
    fn default() -> Self {
        ExpAcOptions { epsilon: 10e-6, excursion: 1e-3, t_window: 20e-9, r2_min: 0.999, settle_candidates: 20, settle_slack: 2.0 }
    }
}

/// Fits one trace. `dv` holds the integrator's derivative at each sample;
/// sample 0 is skipped because it has no derivative of its own. Returns the
/// fit and the metastable value reconstructed from the first kept sample.
pub fn fit_trace(t: &[f64], v: &[f64], dv: &[f64], direction: Direction, o: &ExpAcOptions) -> Result<(ExpFit, f64)> {
    let n = t.len().min(v.len()).min(dv.len());
    // leave at least a quarter of the trace to the final fit
    let min_len = 5.max(n / 4);
    if n < 1 + min_len {
        return Err(Error::FitRejected { r_squared: 0.0, minimum: o.r2_min });
    }
    let sign = match direction {
        Direction::Up => 1.0,
        Direction::Down => -1.0,
    };
    let ln: Vec<f64> = dv.iter().map(|d| (sign * d).ln()).collect();
    if ln[1..n].iter().any(|l| !l.is_finite()) {
        return Err(Error::FitRejected { r_squared: 0.0, minimum: o.r2_min });
    }
    // the first samples carry the release transient of the internal nodes;
    // drop as many as needed to bring the misfit near its best value
    // |V_out'| may dip before it starts to grow; candidates start after that
    let first = (1..n - 1).find(|&k| sign * dv[k + 1] > sign * dv[k]).unwrap_or(1);
    let last = n - min_len;
    if first > last {
        return Err(Error::FitRejected { r_squared: 0.0, minimum: o.r2_min });
    }
    let m = o.settle_candidates.max(1);
    let candidates: Vec<(usize, f64)> = (0..=m)
        .map(|j| first + j * (last - first) / m)
        .map(|k| (k, line_fit(&t[k..n], &ln[k..n]).expect("distinct times").r_squared))
        .collect();
    let best = candidates.iter().map(|c| 1.0 - c.1).fold(f64::INFINITY, f64::min);
    let k0 = candidates.iter().find(|c| 1.0 - c.1 <= o.settle_slack * best + f64::EPSILON).expect("best is attained").0;
    if dv[k0..n].windows(2).any(|p| (sign * p[1]) < (sign * p[0])) {
        return Err(Error::WindowTooLong);
    }
    let f = line_fit(&t[k0..n], &ln[k0..n]).expect("distinct times");
    if !(f.slope > 0.0) || f.r_squared < o.r2_min {
        return Err(Error::FitRejected { r_squared: f.r_squared, minimum: o.r2_min });
    }
    let tau = 1.0 / f.slope;
    let fit = ExpFit { tau, v_x: tau * f.intercept.exp(), t_hat: 0.0, direction, r_squared: f.r_squared, samples: n - k0 };
    Ok((fit, v[k0] - tau * dv[k0]))
}

/// Releases the output at `start ± epsilon` (internal nodes at their
/// clamped DC state) and fits each resulting trace. A run ends at the
/// excursion limit, at `t_window`, or when `|V_out'|` first turns down after
/// growing; the decreasing sample is discarded.
pub fn exp_ac_vm(circuit: &Circuit, v_in: f64, start: f64, o: &ExpAcOptions, opts: &SolverOptions) -> Result<ExpAcResult> {
    let mut c = circuit.clone();
    if c.input_value().is_some() {
        c.set_input(v_in)?;
    }
    let out = c.output_index()?;
    let run = |v0: f64, direction: Direction| -> Result<(ExpFit, f64)> {
        let mut x = c.uniform_state(0.5 * c.vdd());
        c.output_current_at(&mut x, v0, opts)?;
        // stop at the excursion limit or at the first local maximum of
        // |V_out'|, which marks the approach to a stable state; internal
        // nodes may first pull |V_out'| down briefly, which is not a turn
        let (mut prev, mut rising, mut turned) = (f64::NAN, false, false);
        let mut wf = c.run_transient(x, o.t_window, opts, &mut |s| {
            let d = s.derivatives[out].abs();
            if s.index > 1 {
                if rising && d < prev {
                    turned = true;
                    return Control::Stop;
                }
                rising |= d > prev;
            }
            prev = d;
            if (s.voltages[out] - v0).abs() >= o.excursion {
                Control::Stop
            } else {
                Control::Continue
            }
        })?;
        if turned {
            wf.truncate(wf.len() - 1);
        }
        // a release point on the wrong side resolves the other way
        let moved = wf.v_out().last().copied().unwrap_or(v0) - v0;
        let wrong = match direction {
            Direction::Up => moved <= 0.0,
            Direction::Down => moved >= 0.0,
        };
        if wrong {
            return Err(Error::NoBracket { v_in, lower: start - o.epsilon, upper: start + o.epsilon });
        }
        fit_trace(&wf.time, wf.v_out(), wf.vout_prime(), direction, o)
    };
    let (up, v_m_up) = run(start + o.epsilon, Direction::Up)?;
    let (down, v_m_down) = run(start - o.epsilon, Direction::Down)?;
    let (wu, wd) = (1.0 / up.tau, 1.0 / down.tau);
    Ok(ExpAcResult { up, down, v_m_up, v_m_down, v_m: (wu * v_m_up + wd * v_m_down) / (wu + wd) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(v_m: f64, v_x: f64, tau: f64, sign: f64, n: usize, h: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        let v = t.iter().map(|t| v_m + sign * v_x * (t / tau).exp()).collect();
        let d = t.iter().map(|t| sign * v_x / tau * (t / tau).exp()).collect();
        (t, v, d)
    }

    #[test]
    fn noiseless_exponential_is_recovered() {
        let o = ExpAcOptions::default();
        for (dir, sign) in [(Direction::Up, 1.0), (Direction::Down, -1.0)] {
            let (t, v, d) = synthetic(0.43, 1e-4, 2e-10, sign, 400, 1e-12);
            let (fit, v_m) = fit_trace(&t, &v, &d, dir, &o).unwrap();
            assert!((fit.tau - 2e-10).abs() <= 2e-10 * 1e-9);
            assert!((fit.v_x - 1e-4).abs() <= 1e-4 * 1e-9);
            assert!((v_m - 0.43).abs() <= 1e-12);
            assert_eq!(fit.samples, 399);
        }
    }

    #[test]
    fn decaying_tail_is_window_too_long() {
        let (t, mut v, mut d) = synthetic(0.43, 1e-4, 2e-10, 1.0, 100, 1e-12);
        for k in 60..100 {
            d[k] = d[59] * (-((k - 59) as f64) * 0.01).exp();
            v[k] = v[k - 1] + d[k] * 1e-12;
        }
        assert_eq!(fit_trace(&t, &v, &d, Direction::Up, &ExpAcOptions::default()), Err(Error::WindowTooLong));
    }

    #[test]
    fn wrong_sign_is_rejected() {
        let (t, v, d) = synthetic(0.43, 1e-4, 2e-10, -1.0, 50, 1e-12);
        assert!(matches!(fit_trace(&t, &v, &d, Direction::Up, &ExpAcOptions::default()), Err(Error::FitRejected { .. })));
    }

    #[test]
    fn analytic_trigger_end_to_end() {
        use crate::characterization::fixtures::marino;
        let o = ExpAcOptions::default();
        for v in [0.38, 0.45, 0.51] {
            let vm = 0.45 + 4.5 * (v - 0.45);
            let r = exp_ac_vm(&marino(), v, vm, &o, &SolverOptions::default().with_timestep(1e-12)).unwrap();
            assert!((r.v_m - vm).abs() < 1e-9, "{v}: {}", r.v_m);
            for fit in [r.up, r.down] {
                assert!((fit.tau - 1e-9).abs() < 0.01e-9, "{}", fit.tau);
            }
            assert!(r.v_m_up.min(r.v_m_down) <= r.v_m && r.v_m <= r.v_m_up.max(r.v_m_down));
        }
    }
}
