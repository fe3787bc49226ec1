//! Versioned parameter file holding the technology, the analytic trigger
//! and the sizing of every transistor circuit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuits::{AdjustHystParams, FlipFlopHalfParams, InverterLoopParams, StdSixTParams, Technology};
use crate::device::{MosfetParams, Polarity};
use crate::error::{Error, Result};
use crate::marino::MarinoParams;

pub const PARAMS_VERSION: u32 = 1;

/// The shipped defaults.
pub const DEFAULT_PARAMS: &str = include_str!("../params/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub vth: f64,
    pub kp: f64,
    pub lambda: f64,
    pub ss: f64,
}

impl ModelCard {
    pub fn to_params(&self, polarity: Polarity) -> MosfetParams {
        MosfetParams {
            polarity,
            threshold_voltage: self.vth,
            transconductance: self.kp,
            channel_length_modulation: self.lambda,
            width_ratio: 1.0,
            subthreshold_slope: self.ss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnologySection {
    pub vdd: f64,
    pub nmos: ModelCard,
    pub pmos: ModelCard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarinoSection {
    pub gain: f64,
    pub saturation: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub center: f64,
    pub slope1: f64,
    pub slope2: f64,
    pub slope3: f64,
    pub c_load: f64,
    /// Extra capacitance folded into the device, playing the role of the
    /// internal circuit capacitance.
    pub c_internal: f64,
}

impl MarinoSection {
    pub fn params(&self) -> MarinoParams {
        MarinoParams {
            gain: self.gain,
            saturation: self.saturation,
            tau1: self.tau1,
            tau2: self.tau2,
            tau3: self.tau3,
            center: self.center,
            slope1: self.slope1,
            slope2: self.slope2,
            slope3: self.slope3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub version: u32,
    pub technology: TechnologySection,
    pub marino: MarinoSection,
    pub std6t: StdSixTParams,
    #[serde(rename = "loop")]
    pub inverter_loop: InverterLoopParams,
    pub adjust: AdjustHystParams,
    pub ffhalf: FlipFlopHalfParams,
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet::from_toml(DEFAULT_PARAMS).expect("shipped parameter file is valid")
    }
}

impl ParameterSet {
    pub fn from_toml(text: &str) -> Result<ParameterSet> {
        let ps: ParameterSet = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        ps.validate()?;
        Ok(ps)
    }

    pub fn load(path: &Path) -> Result<ParameterSet> {
        let text = std::fs::read_to_string(path)?;
        ParameterSet::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("parameter set serializes")
    }

    pub fn technology(&self) -> Technology {
        Technology {
            vdd: self.technology.vdd,
            nmos: self.technology.nmos.to_params(Polarity::N),
            pmos: self.technology.pmos.to_params(Polarity::P),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PARAMS_VERSION {
            return Err(Error::InvalidConfig(format!(
                "parameter file version {} unsupported (expected {PARAMS_VERSION})",
                self.version
            )));
        }
        let t = self.technology();
        if !(t.vdd > 0.0) {
            return Err(Error::InvalidParameter("vdd must be positive".into()));
        }
        t.nmos.validate(t.vdd)?;
        t.pmos.validate(t.vdd)?;
        self.marino.params().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_match_device_defaults() {
        let ps = ParameterSet::default();
        let t = ps.technology();
        assert_eq!(t.vdd, 0.9);
        assert_eq!(t.nmos, MosfetParams::nmos_default());
        assert_eq!(t.pmos, MosfetParams::pmos_default());
        assert_eq!(ps.marino.params(), MarinoParams::default());
    }

    #[test]
    fn toml_round_trip() {
        let ps = ParameterSet::default();
        assert_eq!(ParameterSet::from_toml(&ps.to_toml()).unwrap(), ps);
    }

    #[test]
    fn rejects_wrong_version_and_unknown_keys() {
        let text = DEFAULT_PARAMS.replace("version = 1", "version = 7");
        assert!(matches!(ParameterSet::from_toml(&text), Err(Error::InvalidConfig(_))));
        let text = DEFAULT_PARAMS.replace("[std6t]", "[std6t]\nbogus = 1");
        assert!(ParameterSet::from_toml(&text).is_err());
    }
}
