//! Error types shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e} A)")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Newton iteration did not converge at sweep value {value} V: {source}")]
    SweepNonConvergence {
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("transient step did not converge at t = {time:e} s: {source}")]
    TransientNonConvergence {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("singular Jacobian; floating node set: {nodes:?}")]
    SingularJacobian { nodes: Vec<String> },

    #[error("netlist parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("v_in = {v_in} V lies outside the metastable band [{lower}, {upper}]")]
    OutOfBand { v_in: f64, lower: f64, upper: f64 },

    #[error("no hysteresis found in either sweep direction")]
    NoHysteresis,

    #[error("no sign change of I_out between {lower} V and {upper} V at v_in = {v_in} V")]
    NoBracket { v_in: f64, lower: f64, upper: f64 },

    #[error("degenerate calibration probe at ({v_in}, {v_out}): |V_out'| = {slope:e} V/s")]
    DegenerateProbe { v_in: f64, v_out: f64, slope: f64 },

    #[error("exponential fit rejected: R^2 = {r_squared} below {minimum}")]
    FitRejected { r_squared: f64, minimum: f64 },

    #[error("transient window entered the stable-approach phase (|V_out'| no longer growing)")]
    WindowTooLong,

    #[error("non-positive slope {slope:e} A/V on a repeller fit")]
    CollinearDegenerate { slope: f64 },

    #[error("no feedback loop designated in the netlist")]
    LoopNotFound,

    #[error("loop gain {0} is below one")]
    GainBelowOne(f64),

    #[error("inversion did not settle (oscillation detected at t = {time:e} s)")]
    Oscillation { time: f64 },

    #[error("inversion did not settle within {time:e} s")]
    NotSettled { time: f64 },

    #[error("static trace fell onto a stable branch at v_in = {v_in} V (v_out = {v_out} V)")]
    FellOntoStableBranch { v_in: f64, v_out: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
