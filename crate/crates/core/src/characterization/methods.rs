//! Runs the characterization methods over a common input sampling and
//! compares them against bisection.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::binary::binary_vm;
use super::expac::{exp_ac_vm, ExpAcOptions};
use super::expdc::{exp_dc_vm, sample_offsets, SAMPLES_PER_SIDE};
use super::hyst::hyst;
use super::inversion::{choose_p, inversion_vm, max_loop_gain, InversionOptions};
use super::map::{cell_current, interpolate_zero, map, refine_zero, repelling_brackets, uniform_grid};
use super::statics::static_vm_trace;
use super::{MetaCharacteristic, PhaseMap};
use crate::error::{Error, Result};
use crate::netlist::Netlist;
use crate::sim::{Circuit, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hyst,
    Binary,
    Map,
    #[serde(rename = "expac")]
    ExpAc,
    #[serde(rename = "expdc")]
    ExpDc,
    Inversion,
    Static,
}

impl Method {
    /// Table order.
    pub const ALL: [Method; 7] =
        [Method::Hyst, Method::Binary, Method::Map, Method::ExpAc, Method::ExpDc, Method::Inversion, Method::Static];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hyst => "hyst",
            Method::Binary => "binary",
            Method::Map => "map",
            Method::ExpAc => "expac",
            Method::ExpDc => "expdc",
            Method::Inversion => "inversion",
            Method::Static => "static",
        }
    }

    /// Methods that produce metastable points.
    pub fn traces_branch(self) -> bool {
        self != Method::Hyst
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    /// Sweep step for the thresholds and output cell of the map, volts.
    pub grid: f64,
    /// Equally spaced input values over `[0, VDD]`; only those strictly
    /// inside the band are characterized.
    pub samples: usize,
    /// Bisection bracket width, volts.
    pub tol: f64,
    pub expdc_samples: usize,
    /// Half-width of the exp-DC neighbourhood in map output cells.
    pub expdc_cells: f64,
    pub expac: ExpAcOptions,
    /// Integration steps per estimated resolution constant (exp-AC).
    pub expac_steps_per_tau: f64,
    /// False-position steps that narrow the map bracket before the exp-AC
    /// release.
    pub expac_refine: usize,
    pub inversion: InversionOptions,
    /// Integration steps per estimated resolution constant (inversion).
    pub inversion_steps_per_tau: f64,
    /// Operating points sampled for the largest loop gain.
    pub loop_gain_samples: usize,
    /// Initial-guess offset of the static method, volts.
    pub static_offset: f64,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            grid: 1e-3,
            samples: 1000,
            tol: 1e-10,
            expdc_samples: SAMPLES_PER_SIDE,
            expdc_cells: 0.2,
            expac: ExpAcOptions::default(),
            expac_steps_per_tau: 1000.0,
            expac_refine: 3,
            inversion: InversionOptions::default(),
            inversion_steps_per_tau: 20.0,
            loop_gain_samples: 100,
            static_offset: 0.1,
        }
    }
}

impl MethodSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grid > 0.0
            && self.samples >= 2
            && self.tol > 0.0
            && self.expdc_samples >= 2
            && self.expdc_cells > 0.0
            && self.expac_steps_per_tau > 0.0
            && self.inversion_steps_per_tau > 0.0
            && self.loop_gain_samples >= 1
            && self.static_offset > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid method settings {self:?}")))
        }
    }
}

/// One metastable estimate; failed points carry NaN and the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPoint {
    pub v_in: f64,
    pub v_m: f64,
    /// Resolution constants where the method yields them, seconds.
    pub tau_up: Option<f64>,
    pub tau_down: Option<f64>,
    pub error: Option<String>,
}

impl MethodPoint {
    fn ok(v_in: f64, v_m: f64) -> Self {
        MethodPoint { v_in, v_m, tau_up: None, tau_down: None, error: None }
    }

    fn failed(v_in: f64, e: &Error) -> Self {
        MethodPoint { v_in, v_m: f64::NAN, tau_up: None, tau_down: None, error: Some(e.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub points: Vec<MethodPoint>,
    /// Wall-clock time of the method's own solves, seconds.
    pub runtime: f64,
    /// `|V_M - V_M(reference)|` per point (NaN where either failed).
    pub deviation: Vec<f64>,
}

impl MethodReport {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.v_m.is_finite()).count()
    }

    /// Largest finite deviation.
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

/// Repelling zero of one map column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub v_out: f64,
    /// Static current slope across the bracketing cell, A/V.
    pub slope: f64,
    /// Distance to the nearest other zero in the column, volts.
    pub clearance: f64,
    /// The two bracketing cells as `(v_out, i_out)`.
    pub bracket: [(f64, f64); 2],
}

/// Shared prerequisite with its own runtime.
#[derive(Debug, Clone, PartialEq)]
pub struct Timed<T> {
    pub value: T,
    pub runtime: f64,
}

/// Characterization context for one circuit. Thresholds, the map and the
/// loop gain are computed once on first use and reused by every method.
#[derive(Debug, Clone)]
pub struct Characterizer {
    pub netlist: Netlist,
    pub circuit: Circuit,
    pub settings: MethodSettings,
    pub opts: SolverOptions,
    hyst: Option<Timed<MetaCharacteristic>>,
    map: Option<Timed<PhaseMap>>,
    gain: Option<Timed<(f64, f64)>>,
    inputs: Option<Vec<f64>>,
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

impl Characterizer {
    pub fn new(netlist: Netlist, settings: MethodSettings, opts: SolverOptions) -> Result<Self> {
        settings.validate()?;
        opts.validate()?;
        let circuit = Circuit::compile(&netlist)?;
        circuit.output_index()?;
        if circuit.input_value().is_none() {
            return Err(Error::InvalidNetlist("characterization needs a designated input".into()));
        }
        Ok(Characterizer { netlist, circuit, settings, opts, hyst: None, map: None, gain: None, inputs: None })
    }

    pub fn hyst(&mut self) -> Result<&Timed<MetaCharacteristic>> {
        if self.hyst.is_none() {
            let t = Instant::now();
            let h = hyst(&self.circuit, self.settings.grid, &self.opts)?;
            self.hyst = Some(Timed { value: h, runtime: seconds(t) });
        }
        Ok(self.hyst.as_ref().expect("just set"))
    }

    /// Replaces the sampling grid by an explicit, uniformly spaced list of
    /// inputs; the map is then restricted to these columns.
    pub fn set_inputs(&mut self, inputs: Vec<f64>) {
        self.inputs = Some(inputs);
        self.map = None;
    }

    /// Input samples strictly inside the band.
    pub fn samples(&mut self) -> Result<Vec<f64>> {
        if let Some(v) = &self.inputs {
            let v = v.clone();
            let h = &self.hyst()?.value;
            return Ok(v.into_iter().filter(|&x| h.in_band(x)).collect());
        }
        let vdd = self.circuit.vdd();
        let n = self.settings.samples;
        Ok(self.hyst()?.value.band_samples(vdd, n))
    }

    /// Static current over the full sampling grid (all inputs, not only
    /// those in the band) times a uniform output grid.
    pub fn phase_map(&mut self) -> Result<&Timed<PhaseMap>> {
        if self.map.is_none() {
            let vdd = self.circuit.vdd();
            let n = self.settings.samples;
            let v_in: Vec<f64> = match &self.inputs {
                Some(v) => v.clone(),
                None => (0..n).map(|k| vdd * k as f64 / (n - 1) as f64).collect(),
            };
            let v_out = uniform_grid(vdd, self.settings.grid);
            let t = Instant::now();
            let m = map(&self.circuit, &v_in, &v_out, &self.opts)?;
            self.map = Some(Timed { value: m, runtime: seconds(t) });
        }
        Ok(self.map.as_ref().expect("just set"))
    }

    /// Largest loop gain at mid-band, `(v_out, A²)`.
    pub fn loop_gain(&mut self) -> Result<&Timed<(f64, f64)>> {
        if self.gain.is_none() {
            let h = self.hyst()?.value.clone();
            let mid = 0.5 * (h.v_low + h.v_high);
            let t = Instant::now();
            let g = max_loop_gain(&self.circuit, mid, self.settings.loop_gain_samples, &self.opts)?;
            self.gain = Some(Timed { value: g, runtime: seconds(t) });
        }
        Ok(self.gain.as_ref().expect("just set"))
    }

    /// Zero crossing of the map column at `v_in` (which must be a map
    /// input). With several repelling crossings, the one nearest the
    /// straight line between the folds wins.
    pub fn map_crossing(&mut self, v_in: f64) -> Result<Crossing> {
        let h = self.hyst()?.value.clone();
        let m = &self.phase_map()?.value;
        let i = m.column(v_in);
        let col = &m.i_out[i];
        let guess = h.fold_line(v_in);
        let zero = |k: usize| interpolate_zero(m.v_out[k], col[k], m.v_out[k + 1], col[k + 1]);
        let k = repelling_brackets(col)
            .into_iter()
            .min_by(|&a, &b| (zero(a) - guess).abs().total_cmp(&(zero(b) - guess).abs()))
            .ok_or(Error::NoBracket { v_in, lower: m.v_out[0], upper: *m.v_out.last().expect("non-empty grid") })?;
        let v = zero(k);
        let clearance = (0..col.len() - 1)
            .filter(|&j| j != k && col[j].is_finite() && col[j + 1].is_finite() && (col[j] > 0.0) != (col[j + 1] > 0.0))
            .map(|j| (zero(j) - v).abs())
            // a zero sitting exactly on a grid node closes two brackets
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let bracket = [(m.v_out[k], col[k]), (m.v_out[k + 1], col[k + 1])];
        Ok(Crossing { v_out: v, slope: (col[k + 1] - col[k]) / m.d_out, clearance, bracket })
    }

    /// Resolution constant estimated from the map slope and the output
    /// node capacitance.
    fn tau_estimate(&self, slope: f64) -> f64 {
        let out = self.netlist.output_node().expect("checked in new");
        self.netlist.node_capacitance(&out) / slope
    }

    /// Runs one method over the band samples. Prerequisites (thresholds,
    /// map, loop gain) are computed first and not counted in the runtime.
    pub fn run(&mut self, method: Method) -> Result<MethodReport> {
        let samples = self.samples()?;
        let h = self.hyst()?.value.clone();
        match method {
            Method::Map | Method::ExpDc | Method::ExpAc => {
                self.phase_map()?;
            }
            Method::Inversion => {
                self.loop_gain()?;
            }
            _ => {}
        }
        let s = self.settings;
        let opts = self.opts;
        let t = Instant::now();
        let points: Vec<MethodPoint> = match method {
            Method::Hyst => Vec::new(),
            Method::Binary => samples
                .iter()
                .map(|&v| match binary_vm(&self.circuit, v, h.low_fold, h.high_fold, s.tol, &opts) {
                    Ok(r) => MethodPoint::ok(v, r.v_m),
                    Err(e) => MethodPoint::failed(v, &e),
                })
                .collect(),
            Method::Map => samples
                .iter()
                .map(|&v| match self.map_crossing(v) {
                    Ok(x) => MethodPoint::ok(v, x.v_out),
                    Err(e) => MethodPoint::failed(v, &e),
                })
                .collect(),
            Method::ExpDc => {
                let half = s.expdc_cells * self.map.as_ref().expect("computed above").value.d_out;
                let mut out = Vec::with_capacity(samples.len());
                for &v in &samples {
                    let r = self.map_crossing(v).and_then(|x| {
                        let (a, b) = sample_offsets(x.v_out, half, s.expdc_samples);
                        exp_dc_vm(&self.circuit, v, &a, &b, &opts)
                    });
                    out.push(match r {
                        Ok(r) => {
                            let c = self.netlist.node_capacitance(&self.netlist.output_node()?);
                            MethodPoint { tau_up: Some(r.up.tau(c)), tau_down: Some(r.down.tau(c)), ..MethodPoint::ok(v, r.v_m) }
                        }
                        Err(e) => MethodPoint::failed(v, &e),
                    });
                }
                out
            }
            Method::ExpAc => {
                let mut probe = self.circuit.clone();
                let mut out = Vec::with_capacity(samples.len());
                for &v in &samples {
                    let r = self.map_crossing(v).and_then(|x| {
                        let tau = self.tau_estimate(x.slope);
                        if probe.input_value().is_some() {
                            probe.set_input(v)?;
                        }
                        // release close enough to the crossing that both runs
                        // stay in its linear neighbourhood
                        let start = refine_zero(|vo| cell_current(&probe, vo, &opts), x.bracket[0], x.bracket[1], s.expac_refine)?;
                        let excursion = s.expac.excursion.min(0.5 * x.clearance);
                        let epsilon = s.expac.epsilon.min(0.05 * excursion);
                        let o = ExpAcOptions { epsilon, excursion, t_window: s.expac.t_window.max(40.0 * tau), ..s.expac };
                        exp_ac_vm(&self.circuit, v, start, &o, &opts.with_timestep(tau / s.expac_steps_per_tau))
                    });
                    out.push(match r {
                        Ok(r) => MethodPoint { tau_up: Some(r.up.tau), tau_down: Some(r.down.tau), ..MethodPoint::ok(v, r.v_m) },
                        Err(e) => MethodPoint::failed(v, &e),
                    });
                }
                out
            }
            Method::Inversion => {
                let a2 = self.loop_gain()?.value.1;
                let p = choose_p(a2)?;
                let mut out = Vec::with_capacity(samples.len());
                let mut probe = self.circuit.clone();
                for &v in &samples {
                    let start = h.fold_line(v);
                    let r = (|| {
                        probe.set_input(v)?;
                        let mut x = probe.uniform_state(0.5 * probe.vdd());
                        let i0 = probe.output_current_at(&mut x, start, &opts)?;
                        let i1 = probe.output_current_at(&mut x, start + s.grid, &opts)?;
                        let slope = ((i1 - i0) / s.grid).abs().max(f64::MIN_POSITIVE);
                        let tau = self.tau_estimate(slope);
                        inversion_vm(&self.netlist, v, p, start, &s.inversion, &opts.with_timestep(tau / s.inversion_steps_per_tau))
                    })();
                    out.push(match r {
                        Ok(r) => MethodPoint::ok(v, r.v_m),
                        Err(e) => MethodPoint::failed(v, &e),
                    });
                }
                out
            }
            Method::Static => match static_vm_trace(&self.circuit, &h, s.static_offset, &samples, &opts) {
                Ok(trace) => samples
                    .iter()
                    .map(|&v| match trace.points.iter().find(|p| p.0 == v) {
                        Some(&(_, vm)) => MethodPoint::ok(v, vm),
                        None => MethodPoint::failed(v, &Error::FellOntoStableBranch { v_in: v, v_out: f64::NAN }),
                    })
                    .collect(),
                Err(e) => samples.iter().map(|&v| MethodPoint::failed(v, &e)).collect(),
            },
        };
        let runtime = seconds(t);
        let deviation = vec![f64::NAN; points.len()];
        Ok(MethodReport { method, points, runtime, deviation })
    }

    /// Runs `methods` (bisection is always included as the reference) and
    /// fills in each report's deviation from it.
    pub fn compare(&mut self, methods: &[Method]) -> Result<Vec<MethodReport>> {
        if methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        let mut wanted: Vec<Method> = methods.to_vec();
        if !wanted.contains(&Method::Binary) {
            wanted.push(Method::Binary);
        }
        wanted.sort();
        wanted.dedup();
        let mut reports = wanted.into_iter().map(|m| self.run(m)).collect::<Result<Vec<_>>>()?;
        compare_methods(&mut reports);
        Ok(reports
            .into_iter()
            .filter(|r| methods.contains(&r.method) || r.method == Method::Binary)
            .collect())
    }
}

/// Fills each report's deviation from the bisection report, matching
/// points by input value. Reports without a bisection counterpart keep NaN.
pub fn compare_methods(reports: &mut [MethodReport]) {
    let reference: Vec<(f64, f64)> = match reports.iter().find(|r| r.method == Method::Binary) {
        Some(r) => r.points.iter().map(|p| (p.v_in, p.v_m)).collect(),
        None => return,
    };
    for r in reports.iter_mut() {
        r.deviation = r
            .points
            .iter()
            .map(|p| match reference.iter().find(|q| q.0 == p.v_in) {
                Some(&(_, vm)) => (p.v_m - vm).abs(),
                None => f64::NAN,
            })
            .collect();
    }
}
