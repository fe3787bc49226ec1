//! Bisection on the sign of the static output current.

use crate::error::{Error, Result};
use crate::sim::{Circuit, SolverOptions};

/// Upper bound on bisection steps.
pub const MAX_BISECTIONS: usize = 40;

/// Inward shift, relative to the bracket span, applied to a bound that
/// sits on a stable branch.
const ENDPOINT_NUDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryResult {
    pub v_m: f64,
    pub iterations: usize,
    /// Final bracket width.
    pub width: f64,
}

/// Narrows `[lower, upper]` around the output voltage where I_out turns
/// from non-positive to positive, with the input held at `v_in`. Stops once
/// the bracket is no wider than `tol` or after 40 halvings and returns the
/// midpoint.
pub fn binary_vm(circuit: &Circuit, v_in: f64, lower: f64, upper: f64, tol: f64, opts: &SolverOptions) -> Result<BinaryResult> {
    let mut c = circuit.clone();
    if c.input_value().is_some() {
        c.set_input(v_in)?;
    }
    let mut x = c.uniform_state(0.5 * c.vdd());
    // The fold values can coincide with a stable branch, where the current
    // vanishes to within the solver tolerance; such a bound is moved inward
    // by a small fraction of the span before its sign is read.
    let eps = opts.newton_tol;
    let nudge = ENDPOINT_NUDGE * (upper - lower);
    let mut lo = lower;
    let mut f_lo = c.output_current_at(&mut x, lo, opts)?;
    if f_lo.abs() <= eps {
        lo += nudge;
        f_lo = c.output_current_at(&mut x, lo, opts)?;
    }
    let mut hi = upper;
    let mut f_hi = c.output_current_at(&mut x, hi, opts)?;
    if f_hi.abs() <= eps {
        hi -= nudge;
        f_hi = c.output_current_at(&mut x, hi, opts)?;
    }
    if !(lo < hi && f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoBracket { v_in, lower, upper });
    }
    let mut iterations = 0;
    while hi - lo > tol && iterations < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if c.output_current_at(&mut x, mid, opts)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(BinaryResult { v_m: 0.5 * (lo + hi), iterations, width: hi - lo })
}
