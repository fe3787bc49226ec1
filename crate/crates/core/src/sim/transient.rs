//! Fixed-step implicit transient analysis.

use std::collections::BTreeMap;

use super::circuit::{Circuit, Companion};
use super::{Integrator, SolverOptions};
use crate::error::{Error, Result};

/// Sampled node voltages of one transient run.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub time: Vec<f64>,
    pub nodes: Vec<String>,
    /// `voltages[node][sample]`
    pub voltages: Vec<Vec<f64>>,
    /// Time derivative of each node voltage as produced by the integrator.
    pub derivatives: Vec<Vec<f64>>,
    /// Index of the output node, if the netlist designates a load.
    pub output: Option<usize>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn node(&self, name: &str) -> Option<&[f64]> {
        self.nodes.iter().position(|n| n == name).map(|i| self.voltages[i].as_slice())
    }

    pub fn v_out(&self) -> &[f64] {
        self.output.map_or(&[], |i| self.voltages[i].as_slice())
    }

    /// Output derivative V_out' in V/s.
    pub fn vout_prime(&self) -> &[f64] {
        self.output.map_or(&[], |i| self.derivatives[i].as_slice())
    }

    /// Keeps the first `len` samples.
    pub fn truncate(&mut self, len: usize) {
        self.time.truncate(len);
        for v in self.voltages.iter_mut().chain(self.derivatives.iter_mut()) {
            v.truncate(len);
        }
    }

    pub fn final_voltages(&self) -> BTreeMap<String, f64> {
        self.nodes
            .iter()
            .zip(&self.voltages)
            .map(|(n, v)| (n.clone(), *v.last().expect("non-empty waveform")))
            .collect()
    }
}

/// One accepted time point, handed to a transient observer.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub index: usize,
    pub time: f64,
    pub voltages: &'a [f64],
    pub derivatives: &'a [f64],
    pub output: Option<usize>,
}

impl StepView<'_> {
    pub fn v_out(&self) -> f64 {
        self.voltages[self.output.unwrap_or(0)]
    }

    pub fn dv_out(&self) -> f64 {
        self.derivatives[self.output.unwrap_or(0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

impl Circuit {
    /// Consistent state whose capacitor nodes take the given voltages; the
    /// remaining nodes and branch currents are solved at DC. Within a set
    /// of nodes tied by voltage sources only the first capacitor node is
    /// imposed.
    pub fn consistent_state(&self, ic: &[Option<f64>], opts: &SolverOptions) -> Result<Vec<f64>> {
        let groups = self.source_groups();
        let mut forced: Vec<(usize, f64)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut guess = self.uniform_state(0.0);
        for (i, v) in ic.iter().enumerate() {
            if let Some(v) = v {
                guess[i] = *v;
            }
        }
        for cap in &self.caps {
            for node in [cap.a, cap.b].into_iter().flatten() {
                let g = groups[node];
                if g == 0 || !seen.insert(g) {
                    continue;
                }
                let v = ic[node].ok_or_else(|| {
                    Error::InvalidParameter(format!("no initial condition for capacitor node '{}'", self.names[node]))
                })?;
                forced.push((node, v));
            }
        }
        self.solve(&mut guess, &forced, None, opts)?;
        Ok(guess)
    }

    /// Integrates from the consistent state `x0` up to `t_stop`, calling
    /// `observer` after every accepted step.
    pub fn run_transient(
        &self,
        x0: Vec<f64>,
        t_stop: f64,
        opts: &SolverOptions,
        observer: &mut dyn FnMut(&StepView) -> Control,
    ) -> Result<Waveform> {
        if !(t_stop > 0.0) {
            return Err(Error::InvalidParameter("t_stop must be positive".into()));
        }
        let h = opts.timestep;
        let n = self.node_count();
        let steps = ((t_stop / h) - 1e-9).ceil().max(1.0) as usize;
        // observers usually stop long before t_stop
        let cap = (steps + 1).min(1 << 14);
        let mut wf = Waveform {
            time: Vec::with_capacity(cap),
            nodes: self.names.clone(),
            voltages: vec![Vec::with_capacity(cap); n],
            derivatives: vec![Vec::with_capacity(cap); n],
            output: self.output,
        };
        let mut x = x0;
        wf.time.push(0.0);
        for (i, &v) in x[..n].iter().enumerate() {
            wf.voltages[i].push(v);
            wf.derivatives[i].push(0.0);
        }
        let mut v_caps = self.cap_voltages(&x);
        let mut i_caps = vec![0.0; self.caps.len()];
        let mut deriv = vec![0.0; n];

        for k in 1..=steps {
            let t = k as f64 * h;
            let method = if k == 1 { Integrator::BackwardEuler } else { opts.method };
            let comp = Companion::new(method, h, v_caps, i_caps);
            let mut xn = x.clone();
            self.solve(&mut xn, &[], Some(&comp), opts)
                .map_err(|e| Error::TransientNonConvergence { time: t, source: Box::new(e) })?;
            i_caps = self.cap_currents(&xn, &comp);
            v_caps = self.cap_voltages(&xn);
            for (i, d) in deriv.iter_mut().enumerate() {
                *d = match method {
                    Integrator::BackwardEuler => (xn[i] - x[i]) / h,
                    Integrator::Trapezoidal => 2.0 * (xn[i] - x[i]) / h - *d,
                };
            }
            if k == 1 {
                for (w, &d) in wf.derivatives.iter_mut().zip(&deriv) {
                    w[0] = d;
                }
            }
            wf.time.push(t);
            for i in 0..n {
                wf.voltages[i].push(xn[i]);
                wf.derivatives[i].push(deriv[i]);
            }
            x = xn;
            let view = StepView { index: k, time: t, voltages: &x[..n], derivatives: &deriv, output: self.output };
            if observer(&view) == Control::Stop {
                break;
            }
        }
        Ok(wf)
    }
}
