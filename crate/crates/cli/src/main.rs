use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stmeta::characterization::Method;
use stmeta::report::{self, RunConfig, RunManifest};

/// Locate and characterize the metastable branch of Schmitt-Trigger
/// circuits and write plot-ready results.
#[derive(Debug, Parser)]
#[command(name = "stmeta", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Args, Default)]
struct Flags {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Circuit name(s): std6t, loop, adjust, ffhalf, marino (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    circuit: Vec<String>,
    /// TOML parameter file replacing the shipped defaults
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Threshold sweep step and map output cell, volts
    #[arg(long, global = true)]
    grid: Option<f64>,
    /// Equally spaced input values over [0, VDD]
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Bisection bracket width, volts
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for calibration probe selection
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand, Clone, PartialEq)]
enum Command {
    /// Thresholds and stable branches
    Hyst,
    /// Static current map and its zero contour
    Map,
    /// Bisection on the output voltage
    Binary,
    /// Exponential fit of released transients
    Expac,
    /// Linear fit of the static current around the crossing
    Expdc,
    /// Controlled-source inversion of the metastable point
    Inversion,
    /// DC continuation along the metastable branch
    Static,
    /// Every method
    All,
    /// The given methods (default: those of the config file, else all)
    Compare { methods: Vec<Method> },
}

impl Command {
    fn methods(&self) -> Option<Vec<Method>> {
        let one = |m| Some(vec![m]);
        match self {
            Command::Hyst => one(Method::Hyst),
            Command::Map => one(Method::Map),
            Command::Binary => one(Method::Binary),
            Command::Expac => one(Method::ExpAc),
            Command::Expdc => one(Method::ExpDc),
            Command::Inversion => one(Method::Inversion),
            Command::Static => one(Method::Static),
            Command::All => Some(Method::ALL.to_vec()),
            Command::Compare { methods } if methods.is_empty() => None,
            Command::Compare { methods } => Some(methods.clone()),
        }
    }
}

/// File values first, then flags on top.
fn resolve(command: &Command, flags: &Flags) -> stmeta::Result<RunConfig> {
    let mut c = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = command.methods() {
        c.methods = m;
    }
    if !flags.circuit.is_empty() {
        c.circuits = flags.circuit.clone();
    }
    if flags.params.is_some() {
        c.params = flags.params.clone();
    }
    c.grid = flags.grid.unwrap_or(c.grid);
    c.samples = flags.samples.unwrap_or(c.samples);
    c.tol = flags.tol.unwrap_or(c.tol);
    c.out = flags.out.clone().unwrap_or(c.out);
    c.seed = flags.seed.unwrap_or(c.seed);
    Ok(c)
}

fn summary(m: &RunManifest) -> String {
    let mut lines = Vec::new();
    for c in &m.circuits {
        if let (Some(lo), Some(hi)) = (c.v_low, c.v_high) {
            lines.push(format!("{}: band [{lo:.4}, {hi:.4}] V, {} inputs inside", c.circuit, c.grid_points));
        }
        for s in &c.methods {
            lines.push(format!(
                "  {:<10} {:>4} points {:>3} failed  max |dV_M| {:.3e} V",
                s.method.name(),
                s.points,
                s.failures,
                s.max_deviation
            ));
        }
    }
    lines.join("\n")
}

fn failure_report(m: &RunManifest) -> serde_json::Value {
    let circuits: Vec<_> = m
        .circuits
        .iter()
        .filter(|c| !c.complete())
        .map(|c| {
            let failed: Vec<_> = c
                .methods
                .iter()
                .filter(|s| s.failures > 0)
                .map(|s| json!({ "method": s.method, "failures": s.failures, "points": s.points }))
                .collect();
            json!({ "circuit": c.circuit, "errors": c.errors, "failed_methods": failed })
        })
        .collect();
    json!({ "status": "incomplete", "circuits": circuits })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli.command, &cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", json!({ "status": "error", "error": e.to_string() }));
            return ExitCode::from(2);
        }
    };
    match report::run(&config) {
        Ok(m) => {
            println!("{}", summary(&m));
            if let Ok(t) = std::fs::read_to_string(config.out.join("runtime_table.txt")) {
                print!("{t}");
            }
            println!("wrote {} files and manifest.json to {}", m.files.len(), config.out.display());
            if m.complete {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}", failure_report(&m));
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{}", json!({ "status": "error", "error": e.to_string() }));
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("stmeta-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("run.toml");
        std::fs::write(&file, "circuits = [\"loop\"]\nsamples = 40\nseed = 3\nmethods = [\"expdc\"]\n").unwrap();
        let flags = Flags { config: Some(file.clone()), samples: Some(60), ..Flags::default() };
        let c = resolve(&Command::Compare { methods: vec![] }, &flags).unwrap();
        assert_eq!((c.circuits.as_slice(), c.samples, c.seed), (&["loop".to_string()][..], 60, 3));
        assert_eq!(c.methods, [Method::ExpDc]);
        let c = resolve(&Command::Static, &flags).unwrap();
        assert_eq!(c.methods, [Method::Static]);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn parses_subcommands_and_flags() {
        let cli = Cli::try_parse_from(["stmeta", "compare", "binary", "expac", "--circuit", "std6t,loop", "--tol", "1e-9"]).unwrap();
        assert_eq!(cli.command, Command::Compare { methods: vec![Method::Binary, Method::ExpAc] });
        assert_eq!(cli.flags.circuit, ["std6t", "loop"]);
        assert_eq!(cli.flags.tol, Some(1e-9));
        assert!(Cli::try_parse_from(["stmeta", "compare", "bogus"]).is_err());
        assert_eq!(Command::All.methods().unwrap().len(), 7);
    }
}
