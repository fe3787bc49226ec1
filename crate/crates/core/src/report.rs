//! Batch runs: characterize one or more circuits, write plot-ready files
//! and a manifest listing every file with its SHA-256 digest.
//!
//! Files (all schemas carry a version, CSV and grid files in a leading
//! `#` line, JSON in a `schema` field):
//!
//! - `<circuit>_points.csv`: one row per method and input
//! - `<circuit>_branches.csv`: the three branches of the static characteristic
//! - `<circuit>_map.dat`: the current map as blank-line separated blocks
//! - `<circuit>.json`: everything above plus runtimes and calibration
//! - `runtime_table.txt`: runtimes with methods as rows, circuits as columns
//! - `manifest.json`: config echo, per-method runtimes and the file inventory
//!
//! The CSV and grid files hold no timing, so a fixed config and seed give
//! byte-identical copies.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::characterization::{
    calibrate_chat, capacitance_probe, Calibration, Characterizer, MetaCharacteristic, Method, MethodReport,
    MethodSettings, PhaseMap,
};
use crate::circuits::circuit_by_name;
use crate::error::{Error, Result};
use crate::netlist::Netlist;
use crate::params::ParameterSet;
use crate::sim::SolverOptions;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub circuits: Vec<String>,
    /// Parameter file; the shipped defaults when absent.
    pub params: Option<PathBuf>,
    pub methods: Vec<Method>,
    /// Threshold sweep step and map output cell, volts.
    pub grid: f64,
    /// Equally spaced inputs over `[0, VDD]`.
    pub samples: usize,
    /// Bisection bracket width, volts.
    pub tol: f64,
    pub out: PathBuf,
    /// Seeds the choice of calibration probe points.
    pub seed: u64,
    pub calibration_probes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = MethodSettings::default();
        RunConfig {
            circuits: vec!["std6t".into()],
            params: None,
            methods: Method::ALL.to_vec(),
            grid: s.grid,
            samples: s.samples,
            tol: s.tol,
            out: PathBuf::from("out"),
            seed: 0,
            calibration_probes: 8,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.methods.is_empty() {
            return bad("at least one method is required");
        }
        if self.circuits.is_empty() {
            return bad("at least one circuit is required");
        }
        if self.samples < 2 {
            return bad("samples must be at least 2");
        }
        if self.calibration_probes == 0 {
            return bad("calibration_probes must be at least 1");
        }
        self.settings().validate()
    }

    pub fn settings(&self) -> MethodSettings {
        MethodSettings { grid: self.grid, samples: self.samples, tol: self.tol, ..MethodSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Own solves only, seconds.
    pub runtime: f64,
    pub points: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

/// Shared work timed separately from the methods that use it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prerequisites {
    pub hyst: f64,
    pub map: Option<f64>,
    pub loop_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub circuit: String,
    pub v_low: Option<f64>,
    pub v_high: Option<f64>,
    /// Inputs strictly inside the band.
    pub grid_points: usize,
    pub prerequisites: Prerequisites,
    pub methods: Vec<MethodSummary>,
    pub calibration: Option<Calibration>,
    /// Why the circuit could not be characterized, or which step failed.
    pub errors: Vec<String>,
}

impl CircuitSummary {
    pub fn complete(&self) -> bool {
        self.errors.is_empty() && self.methods.iter().all(|m| m.failures == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub circuits: Vec<CircuitSummary>,
    pub files: Vec<FileEntry>,
    /// False when any circuit or method point failed; outputs written up to
    /// that point are kept and listed.
    pub complete: bool,
}

impl RunManifest {
    /// Recomputes every digest and reports the files that no longer match.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut stale = Vec::new();
        for f in &self.files {
            let bytes = fs::read(dir.join(&f.path))?;
            if digest(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
                stale.push(f.path.clone());
            }
        }
        Ok(stale)
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    // plain structs with string keys; non-finite numbers become null
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Emitter<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Emitter<'_> {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(name), text)?;
        self.files.push(FileEntry { path: name.to_string(), bytes: text.len() as u64, sha256: digest(text.as_bytes()) });
        Ok(())
    }
}

/// One column of the runtime table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeColumn {
    pub circuit: String,
    pub runtimes: Vec<(Method, f64)>,
    pub grid_points: usize,
}

impl RuntimeColumn {
    /// Rows for the requested methods; the `map` row includes building
    /// the map it reads.
    pub fn from_summary(s: &CircuitSummary, requested: &[Method]) -> RuntimeColumn {
        let mut runtimes = Vec::new();
        for &m in requested {
            let own = s.methods.iter().find(|r| r.method == m).map(|r| r.runtime);
            let t = match m {
                Method::Map => own.map(|t| t + s.prerequisites.map.unwrap_or(0.0)),
                _ => own,
            };
            if let Some(t) = t {
                runtimes.push((m, t));
            }
        }
        RuntimeColumn { circuit: s.circuit.clone(), runtimes, grid_points: s.grid_points }
    }
}

fn row_label(m: Method) -> &'static str {
    match m {
        Method::ExpAc => "expAC",
        Method::ExpDc => "expDC",
        other => other.name(),
    }
}

/// Runtimes in seconds with methods as rows and circuits as columns,
/// followed by the number of inputs inside the band.
pub fn emit_runtime_table(columns: &[RuntimeColumn]) -> Result<String> {
    if columns.is_empty() {
        return Err(Error::InvalidConfig("runtime table needs at least one circuit".into()));
    }
    let rows: Vec<Method> =
        Method::ALL.into_iter().filter(|m| columns.iter().any(|c| c.runtimes.iter().any(|r| r.0 == *m))).collect();
    let label = 24;
    let widths: Vec<usize> = columns.iter().map(|c| c.circuit.len().max(12)).collect();
    let mut out = format!("# stmeta runtime table v{SCHEMA_VERSION}, seconds\n");
    let _ = write!(out, "{:<label$}", "method");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, " {:>w$}", c.circuit);
    }
    out.push('\n');
    for m in rows {
        let _ = write!(out, "{:<label$}", row_label(m));
        for (c, w) in columns.iter().zip(&widths) {
            match c.runtimes.iter().find(|r| r.0 == m) {
                Some(r) => {
                    let _ = write!(out, " {:>w$.3}", r.1);
                }
                None => {
                    let _ = write!(out, " {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<label$}", "metastable grid points");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, " {:>w$}", c.grid_points);
    }
    out.push('\n');
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

/// One row per method and input. Errors are reduced to their first line
/// and stripped of commas.
pub fn points_csv(reports: &[MethodReport]) -> String {
    let mut out = format!("# stmeta points v{SCHEMA_VERSION}\nmethod,v_in,v_m,tau_up,tau_down,deviation,error\n");
    for r in reports {
        for (p, d) in r.points.iter().zip(&r.deviation) {
            let err = p.error.as_deref().unwrap_or("").lines().next().unwrap_or("").replace(',', ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method,
                p.v_in,
                opt(Some(p.v_m)),
                opt(p.tau_up),
                opt(p.tau_down),
                opt(Some(*d)),
                err
            );
        }
    }
    out
}

pub fn branches_csv(h: &MetaCharacteristic) -> String {
    let mut out = format!("# stmeta branches v{SCHEMA_VERSION}\nbranch,v_in,v_out\n");
    for (name, branch) in [("gamma1", &h.gamma1), ("gamma2", &h.gamma2), ("gamma3", &h.gamma3)] {
        for (vi, vo) in branch {
            let _ = writeln!(out, "{name},{vi},{vo}");
        }
    }
    out
}

/// `v_in v_out i_out` triples, one block per input separated by a blank
/// line, as contour plotters expect. Failed cells are written as `nan`.
pub fn map_grid(m: &PhaseMap) -> String {
    let mut out = format!("# stmeta map v{SCHEMA_VERSION}: v_in v_out i_out\n");
    for (vi, col) in m.v_in.iter().zip(&m.i_out) {
        for (vo, i) in m.v_out.iter().zip(col) {
            if i.is_finite() {
                let _ = writeln!(out, "{vi} {vo} {i:e}");
            } else {
                let _ = writeln!(out, "{vi} {vo} nan");
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct CircuitJson<'a> {
    schema: u32,
    circuit: &'a str,
    characteristic: &'a MetaCharacteristic,
    calibration: Option<&'a Calibration>,
    /// `(v_out, A²)` at the largest loop gain.
    loop_gain: Option<(f64, f64)>,
    prerequisites: &'a Prerequisites,
    reports: &'a [MethodReport],
}

/// What one circuit produced, before anything is written.
struct CircuitRun {
    summary: CircuitSummary,
    characteristic: Option<MetaCharacteristic>,
    map: Option<PhaseMap>,
    loop_gain: Option<(f64, f64)>,
    reports: Vec<MethodReport>,
}

/// Draws up to `n` probe points away from every equilibrium, seeded so
/// the choice repeats.
fn pick_probes(ch: &Characterizer, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vdd = ch.circuit.vdd();
    let mut chosen = Vec::new();
    for _ in 0..20 * n {
        if chosen.len() == n {
            break;
        }
        let p = (rng.gen_range(0.0..vdd), rng.gen_range(0.1 * vdd..0.9 * vdd));
        if capacitance_probe(&ch.circuit, p.0, p.1, &ch.opts).is_ok_and(|c| c > 0.0) {
            chosen.push(p);
        }
    }
    chosen
}

fn characterize(name: &str, netlist: Netlist, config: &RunConfig) -> CircuitRun {
    let mut run = CircuitRun {
        summary: CircuitSummary {
            circuit: name.to_string(),
            v_low: None,
            v_high: None,
            grid_points: 0,
            prerequisites: Prerequisites::default(),
            methods: Vec::new(),
            calibration: None,
            errors: Vec::new(),
        },
        characteristic: None,
        map: None,
        loop_gain: None,
        reports: Vec::new(),
    };
    if let Err(e) = characterize_into(&mut run, netlist, config) {
        run.summary.errors.push(e.to_string());
    }
    run
}

fn characterize_into(run: &mut CircuitRun, netlist: Netlist, config: &RunConfig) -> Result<()> {
    let mut ch = Characterizer::new(netlist, config.settings(), SolverOptions::default())?;
    // thresholds first: every method needs the band
    let h = ch.hyst()?;
    run.summary.prerequisites.hyst = h.runtime;
    run.summary.v_low = Some(h.value.v_low);
    run.summary.v_high = Some(h.value.v_high);
    run.characteristic = Some(h.value.clone());
    let branch_points = h.value.gamma1.len() + h.value.gamma3.len();
    run.summary.grid_points = ch.samples()?.len();

    let probes = pick_probes(&ch, config.calibration_probes, config.seed);
    match calibrate_chat(&ch.circuit, &probes, &ch.opts) {
        Ok(c) => run.summary.calibration = Some(c),
        Err(e) => run.summary.errors.push(format!("calibration: {e}")),
    }

    if config.methods.contains(&Method::Hyst) {
        let runtime = run.summary.prerequisites.hyst;
        run.summary.methods.push(MethodSummary { method: Method::Hyst, runtime, points: branch_points, failures: 0, max_deviation: 0.0 });
    }
    let methods: Vec<Method> = config.methods.iter().copied().filter(|m| m.traces_branch()).collect();
    if methods.is_empty() {
        return Ok(());
    }
    run.reports = ch.compare(&methods)?;
    if let Some(b) = run.reports.iter().find(|r| r.method == Method::Binary) {
        let g2 = b.points.iter().filter(|p| p.v_m.is_finite()).map(|p| (p.v_in, p.v_m)).collect();
        if let Some(c) = run.characteristic.as_mut() {
            c.gamma2 = g2;
        }
    }
    run.summary.methods.extend(run.reports.iter().map(|r| MethodSummary {
            method: r.method,
            runtime: r.runtime,
            points: r.points.len(),
            failures: r.failures(),
        max_deviation: r.max_deviation(),
    }));
    if methods.iter().any(|m| matches!(m, Method::Map | Method::ExpDc | Method::ExpAc)) {
        let m = ch.phase_map()?;
        run.summary.prerequisites.map = Some(m.runtime);
        run.map = Some(m.value.clone());
    }
    if methods.contains(&Method::Inversion) {
        let g = ch.loop_gain()?;
        run.summary.prerequisites.loop_gain = Some(g.runtime);
        run.loop_gain = Some(g.value);
    }
    Ok(())
}

fn emit(run: &CircuitRun, out: &mut Emitter) -> Result<()> {
    let name = &run.summary.circuit;
    let Some(h) = &run.characteristic else {
        return Ok(());
    };
    out.write(&format!("{name}_branches.csv"), &branches_csv(h))?;
    if !run.reports.is_empty() {
        out.write(&format!("{name}_points.csv"), &points_csv(&run.reports))?;
    }
    if let Some(m) = &run.map {
        out.write(&format!("{name}_map.dat"), &map_grid(m))?;
    }
    let json = CircuitJson {
        schema: SCHEMA_VERSION,
        circuit: name,
        characteristic: h,
        calibration: run.summary.calibration.as_ref(),
        loop_gain: run.loop_gain,
        prerequisites: &run.summary.prerequisites,
        reports: &run.reports,
    };
    out.write(&format!("{name}.json"), &pretty(&json))
}

/// Characterizes every configured circuit (concurrently), then writes the
/// outputs in circuit order and the manifest last. A circuit or method
/// point that fails leaves the manifest marked incomplete; the files that
/// were written stay listed.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let params = match &config.params {
        Some(p) => ParameterSet::load(p)?,
        None => ParameterSet::default(),
    };
    // an unknown circuit name fails before any solve
    let netlists = config.circuits.iter().map(|c| circuit_by_name(c, &params)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&config.out)?;

    let runs: Vec<CircuitRun> = thread::scope(|s| {
        let handles: Vec<_> = config
            .circuits
            .iter()
            .zip(netlists)
            .map(|(name, nl)| s.spawn(move || characterize(name, nl, config)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("characterization thread panicked")).collect()
    });

    let mut out = Emitter { dir: &config.out, files: Vec::new() };
    for r in &runs {
        emit(r, &mut out)?;
    }
    let columns: Vec<RuntimeColumn> = runs.iter().map(|r| RuntimeColumn::from_summary(&r.summary, &config.methods)).collect();
    out.write("runtime_table.txt", &emit_runtime_table(&columns)?)?;

    let circuits: Vec<CircuitSummary> = runs.into_iter().map(|r| r.summary).collect();
    let manifest = RunManifest {
        schema: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        complete: circuits.iter().all(CircuitSummary::complete),
        circuits,
        files: out.files,
    };
    fs::write(config.out.join("manifest.json"), pretty(&manifest))?;
    Ok(manifest)
}
