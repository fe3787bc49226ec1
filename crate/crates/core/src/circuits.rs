//! Transistor-level Schmitt-Trigger and latch topologies.
//!
//! Connectivity of each builder (drain, gate, source):
//!
//! `std6t`, input `in`, output `out`, feedback closing at `out`:
//!
//! | device | d   | g   | s   |
//! |--------|-----|-----|-----|
//! | mp1    | np  | in  | vdd |
//! | mp2    | out | in  | np  |
//! | mp3    | 0   | out | np  |
//! | mn1    | nn  | in  | 0   |
//! | mn2    | out | in  | nn  |
//! | mn3    | vdd | out | nn  |
//!
//! `loop`, input `in`, output `out`, loop `out -> fb -> out`:
//!
//! | device | d   | g   | s   |
//! |--------|-----|-----|-----|
//! | mp1    | out | in  | vdd |
//! | mn1    | out | in  | 0   |
//! | mp3    | fb  | out | vdd |
//! | mn3    | fb  | out | 0   |
//! | mp2    | out | fb  | vdd |
//! | mn2    | out | fb  | 0   |
//!
//! `adjust`, input `in`, output `out`, control source `vb` on node `vb`:
//!
//! | device | d   | g   | s   |
//! |--------|-----|-----|-----|
//! | mp1    | out | in  | vdd |
//! | mn1    | out | in  | 0   |
//! | mp2    | fb  | out | vdd |
//! | mn2    | fb  | out | 0   |
//! | mp3    | out | fb  | vdd |
//! | mn4    | out | fb  | ns  |
//! | mn3    | ns  | vb  | 0   |
//!
//! `ffhalf`, no input, output `b`, loop `a -> b -> c -> a`:
//!
//! | device | d | g   | s   |
//! |--------|---|-----|-----|
//! | mp1    | b | a   | vdd |
//! | mn1    | b | a   | 0   |
//! | mp2    | c | b   | vdd |
//! | mn2    | c | b   | 0   |
//! | mnt    | a | vdd | c   |
//! | mpt    | a | 0   | c   |
//!
//! Every internal node and the output carry a parasitic capacitance to
//! ground; the output also carries the load `cl`.

use serde::{Deserialize, Serialize};

use crate::device::{MosfetParams, Polarity};
use crate::error::{Error, Result};
use crate::marino::marino_as_netlist;
use crate::netlist::Netlist;
use crate::params::ParameterSet;

/// Width and optional model overrides of one transistor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ss: Option<f64>,
}

impl DeviceSpec {
    pub fn width(width: f64) -> Self {
        DeviceSpec { width, vth: None, kp: None, lambda: None, ss: None }
    }

    pub fn resolve(&self, base: &MosfetParams) -> MosfetParams {
        let mut p = base.with_width(self.width);
        if let Some(v) = self.vth {
            p.threshold_voltage = v;
        }
        if let Some(v) = self.kp {
            p.transconductance = v;
        }
        if let Some(v) = self.lambda {
            p.channel_length_modulation = v;
        }
        if let Some(v) = self.ss {
            p.subthreshold_slope = v;
        }
        p
    }
}

/// Supply and the two base device models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Technology {
    pub vdd: f64,
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
}

impl Default for Technology {
    fn default() -> Self {
        Technology { vdd: 0.9, nmos: MosfetParams::nmos_default(), pmos: MosfetParams::pmos_default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdSixTParams {
    pub mp1: DeviceSpec,
    pub mp2: DeviceSpec,
    pub mp3: DeviceSpec,
    pub mn1: DeviceSpec,
    pub mn2: DeviceSpec,
    pub mn3: DeviceSpec,
    pub c_load: f64,
    pub c_node: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterLoopParams {
    pub mp1: DeviceSpec,
    pub mn1: DeviceSpec,
    /// Inverter producing the feedback node.
    pub mp3: DeviceSpec,
    pub mn3: DeviceSpec,
    /// Feedback inverter, sized as `feedback_fraction` of the forward one.
    pub mp2: DeviceSpec,
    pub mn2: DeviceSpec,
    pub feedback_fraction: f64,
    pub c_load: f64,
    pub c_node: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjustHystParams {
    pub mp1: DeviceSpec,
    pub mn1: DeviceSpec,
    pub mp2: DeviceSpec,
    pub mn2: DeviceSpec,
    pub mp3: DeviceSpec,
    pub mn3: DeviceSpec,
    pub mn4: DeviceSpec,
    /// Control voltage on the gate of `mn3`.
    pub v_b: f64,
    pub c_load: f64,
    pub c_node: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipFlopHalfParams {
    pub mp1: DeviceSpec,
    pub mn1: DeviceSpec,
    /// Second inverter width relative to the first.
    pub ratio: f64,
    pub mpt: DeviceSpec,
    pub mnt: DeviceSpec,
    pub c_load: f64,
    pub c_node: f64,
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.to_string()))
    }
}

fn base(tech: &Technology, polarity: Polarity) -> MosfetParams {
    match polarity {
        Polarity::N => tech.nmos,
        Polarity::P => tech.pmos,
    }
}

struct Builder<'a> {
    nl: Netlist,
    tech: &'a Technology,
}

impl<'a> Builder<'a> {
    fn new(tech: &'a Technology) -> Self {
        let mut nl = Netlist::new(tech.vdd);
        nl.nmos = tech.nmos;
        nl.pmos = tech.pmos;
        nl.vsource("vdd", "vdd", "0", tech.vdd);
        Builder { nl, tech }
    }

    fn m(&mut self, name: &str, pol: Polarity, spec: &DeviceSpec, d: &str, g: &str, s: &str) -> &mut Self {
        let p = spec.resolve(&base(self.tech, pol));
        self.nl.mosfet(name, d, g, s, &p);
        self
    }

    /// Parasitic `c_node` on every listed node and on the output (where it
    /// acts as internal capacitance next to the external load).
    fn caps(&mut self, internal: &[&str], c_node: f64, out: &str, c_load: f64) {
        for n in internal.iter().chain([&out]) {
            if c_node > 0.0 {
                self.nl.capacitor(&format!("c{n}"), n, "0", c_node);
            }
        }
        self.nl.capacitor("cl", out, "0", c_load);
        self.nl.load = Some("cl".into());
    }

    fn input(&mut self, v: f64) {
        self.nl.vsource("vin", "in", "0", v);
        self.nl.input = Some("vin".into());
    }

    fn finish(self) -> Result<Netlist> {
        self.nl.validate()?;
        Ok(self.nl)
    }
}

pub fn build_std6t(p: &StdSixTParams, tech: &Technology) -> Result<Netlist> {
    check(p.c_load > 0.0 && p.c_node >= 0.0, "capacitances must be non-negative (load positive)")?;
    let mut b = Builder::new(tech);
    b.input(0.0);
    use Polarity::{N, P};
    b.m("mp1", P, &p.mp1, "np", "in", "vdd")
        .m("mp2", P, &p.mp2, "out", "in", "np")
        .m("mp3", P, &p.mp3, "0", "out", "np")
        .m("mn1", N, &p.mn1, "nn", "in", "0")
        .m("mn2", N, &p.mn2, "out", "in", "nn")
        .m("mn3", N, &p.mn3, "vdd", "out", "nn");
    b.caps(&["np", "nn"], p.c_node, "out", p.c_load);
    // both feedback paths close at the output
    b.nl.loop_nodes = vec!["out".into()];
    b.finish()
}

pub fn build_inverter_loop(p: &InverterLoopParams, tech: &Technology) -> Result<Netlist> {
    check(p.feedback_fraction > 0.0 && p.feedback_fraction < 1.0, "feedback width fraction must lie in (0, 1)")?;
    check(p.c_load > 0.0 && p.c_node >= 0.0, "capacitances must be non-negative (load positive)")?;
    let scaled = |s: &DeviceSpec| DeviceSpec { width: s.width * p.feedback_fraction, ..*s };
    let (mp2, mn2) = (scaled(&p.mp2), scaled(&p.mn2));
    let mut b = Builder::new(tech);
    b.input(0.0);
    use Polarity::{N, P};
    b.m("mp1", P, &p.mp1, "out", "in", "vdd")
        .m("mn1", N, &p.mn1, "out", "in", "0")
        .m("mp3", P, &p.mp3, "fb", "out", "vdd")
        .m("mn3", N, &p.mn3, "fb", "out", "0")
        .m("mp2", P, &mp2, "out", "fb", "vdd")
        .m("mn2", N, &mn2, "out", "fb", "0");
    b.caps(&["fb"], p.c_node, "out", p.c_load);
    b.nl.loop_nodes = vec!["out".into(), "fb".into()];
    b.finish()
}

pub fn build_adjust(p: &AdjustHystParams, tech: &Technology) -> Result<Netlist> {
    check((0.0..=tech.vdd).contains(&p.v_b), "V_B must lie in [0, VDD]")?;
    check(p.c_load > 0.0 && p.c_node >= 0.0, "capacitances must be non-negative (load positive)")?;
    let mut b = Builder::new(tech);
    b.input(0.0);
    b.nl.vsource("vb", "vb", "0", p.v_b);
    use Polarity::{N, P};
    b.m("mp1", P, &p.mp1, "out", "in", "vdd")
        .m("mn1", N, &p.mn1, "out", "in", "0")
        .m("mp2", P, &p.mp2, "fb", "out", "vdd")
        .m("mn2", N, &p.mn2, "fb", "out", "0")
        .m("mp3", P, &p.mp3, "out", "fb", "vdd")
        .m("mn4", N, &p.mn4, "out", "fb", "ns")
        .m("mn3", N, &p.mn3, "ns", "vb", "0");
    b.caps(&["fb", "ns"], p.c_node, "out", p.c_load);
    b.nl.loop_nodes = vec!["out".into(), "fb".into()];
    b.finish()
}

pub fn build_ff_half(p: &FlipFlopHalfParams, tech: &Technology) -> Result<Netlist> {
    check(p.ratio > 0.0 && p.ratio < 1.0, "inverter ratio must lie in (0, 1)")?;
    check(p.c_load > 0.0 && p.c_node >= 0.0, "capacitances must be non-negative (load positive)")?;
    let weak = |s: &DeviceSpec| DeviceSpec { width: s.width * p.ratio, ..*s };
    let (mp2, mn2) = (weak(&p.mp1), weak(&p.mn1));
    let mut b = Builder::new(tech);
    use Polarity::{N, P};
    b.m("mp1", P, &p.mp1, "b", "a", "vdd")
        .m("mn1", N, &p.mn1, "b", "a", "0")
        .m("mp2", P, &mp2, "c", "b", "vdd")
        .m("mn2", N, &mn2, "c", "b", "0")
        .m("mnt", N, &p.mnt, "a", "vdd", "c")
        .m("mpt", P, &p.mpt, "a", "0", "c");
    b.caps(&["a", "c"], p.c_node, "b", p.c_load);
    b.nl.loop_nodes = vec!["a".into(), "b".into(), "c".into()];
    b.finish()
}

pub const CIRCUIT_NAMES: [&str; 5] = ["std6t", "loop", "adjust", "ffhalf", "marino"];

/// Builds a circuit by name from a parameter set.
pub fn circuit_by_name(name: &str, params: &ParameterSet) -> Result<Netlist> {
    let tech = params.technology();
    match name {
        "std6t" => build_std6t(&params.std6t, &tech),
        "loop" => build_inverter_loop(&params.inverter_loop, &tech),
        "adjust" => build_adjust(&params.adjust, &tech),
        "ffhalf" => build_ff_half(&params.ffhalf, &tech),
        "marino" => marino_as_netlist(&params.marino.params(), params.marino.c_load, params.marino.c_internal),
        other => Err(Error::InvalidConfig(format!(
            "unknown circuit '{other}' (expected one of {})",
            CIRCUIT_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Element;

    /// Adjacency tables from the module docs, as (name, d, g, s).
    const STD6T: [(&str, &str, &str, &str); 6] = [
        ("mp1", "np", "in", "vdd"),
        ("mp2", "out", "in", "np"),
        ("mp3", "0", "out", "np"),
        ("mn1", "nn", "in", "0"),
        ("mn2", "out", "in", "nn"),
        ("mn3", "vdd", "out", "nn"),
    ];
    const LOOP: [(&str, &str, &str, &str); 6] = [
        ("mp1", "out", "in", "vdd"),
        ("mn1", "out", "in", "0"),
        ("mp3", "fb", "out", "vdd"),
        ("mn3", "fb", "out", "0"),
        ("mp2", "out", "fb", "vdd"),
        ("mn2", "out", "fb", "0"),
    ];
    const ADJUST: [(&str, &str, &str, &str); 7] = [
        ("mp1", "out", "in", "vdd"),
        ("mn1", "out", "in", "0"),
        ("mp2", "fb", "out", "vdd"),
        ("mn2", "fb", "out", "0"),
        ("mp3", "out", "fb", "vdd"),
        ("mn4", "out", "fb", "ns"),
        ("mn3", "ns", "vb", "0"),
    ];
    const FFHALF: [(&str, &str, &str, &str); 6] = [
        ("mp1", "b", "a", "vdd"),
        ("mn1", "b", "a", "0"),
        ("mp2", "c", "b", "vdd"),
        ("mn2", "c", "b", "0"),
        ("mnt", "a", "vdd", "c"),
        ("mpt", "a", "0", "c"),
    ];

    fn matches_table(nl: &Netlist, table: &[(&str, &str, &str, &str)]) {
        let mosfets: Vec<_> = nl.elements.iter().filter(|e| matches!(e, Element::Mosfet { .. })).collect();
        assert_eq!(mosfets.len(), table.len());
        for &(name, d, g, s) in table {
            match nl.element(name) {
                Some(Element::Mosfet { drain, gate, source, .. }) => {
                    assert_eq!((drain.as_str(), gate.as_str(), source.as_str()), (d, g, s), "{name}");
                }
                other => panic!("{name}: {other:?}"),
            }
        }
    }

    #[test]
    fn builders_follow_adjacency_tables() {
        let ps = ParameterSet::default();
        matches_table(&circuit_by_name("std6t", &ps).unwrap(), &STD6T);
        matches_table(&circuit_by_name("loop", &ps).unwrap(), &LOOP);
        matches_table(&circuit_by_name("adjust", &ps).unwrap(), &ADJUST);
        matches_table(&circuit_by_name("ffhalf", &ps).unwrap(), &FFHALF);
    }

    #[test]
    fn builders_round_trip_through_text() {
        let ps = ParameterSet::default();
        for name in CIRCUIT_NAMES {
            let nl = circuit_by_name(name, &ps).unwrap();
            assert_eq!(Netlist::parse(&nl.emit()).unwrap(), nl, "{name}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let ps = ParameterSet::default();
        let tech = ps.technology();
        let mut lp = ps.inverter_loop;
        lp.feedback_fraction = 1.0;
        assert!(build_inverter_loop(&lp, &tech).is_err());
        let mut ad = ps.adjust;
        ad.v_b = 1.2;
        assert!(build_adjust(&ad, &tech).is_err());
        assert!(circuit_by_name("schmitt", &ps).is_err());
    }
}
