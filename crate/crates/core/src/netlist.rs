//! Flat circuit description and its line-oriented text format.
//!
//! ```text
//! * comment
//! .param VDD=0.9
//! .model N vth=0.3 kp=0.0002 lambda=0.15 ss=0.04
//! M mn1 out in 0 N 1
//! C cl out 0 2e-15
//! V vin in 0 0.45
//! F finv out 0 1.0004 vsense
//! G g1 0 out out vm 1e-4
//! B mar in out amp MARINO a=10 m=0.45 ...
//! .input vin
//! .load cl
//! .loop out fb
//! ```
//!
//! Parsing an emitted netlist reproduces the same [`Netlist`] value exactly;
//! numbers are written in shortest round-trip form.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::device::{MosfetParams, Polarity};
use crate::error::{Error, Result};
use crate::marino::MarinoParams;

pub const GROUND: &str = "0";

pub fn is_ground(node: &str) -> bool {
    matches!(node, "0" | "gnd" | "GND")
}

/// Per-instance model overrides on a MOSFET line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ss: Option<f64>,
}

impl ModelOverrides {
    pub fn apply(&self, mut p: MosfetParams) -> MosfetParams {
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

    /// Overrides that turn `base` into `target` (width excluded).
    pub fn between(base: &MosfetParams, target: &MosfetParams) -> Self {
        let pick = |a: f64, b: f64| if a == b { None } else { Some(b) };
        ModelOverrides {
            vth: pick(base.threshold_voltage, target.threshold_voltage),
            kp: pick(base.transconductance, target.transconductance),
            lambda: pick(base.channel_length_modulation, target.channel_length_modulation),
            ss: pick(base.subthreshold_slope, target.subthreshold_slope),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    Mosfet {
        name: String,
        drain: String,
        gate: String,
        source: String,
        polarity: Polarity,
        width_ratio: f64,
        overrides: ModelOverrides,
    },
    Capacitor {
        name: String,
        a: String,
        b: String,
        farads: f64,
    },
    VoltageSource {
        name: String,
        pos: String,
        neg: String,
        volts: f64,
    },
    /// Current-controlled current source: `gain * I(sensed)` flows from
    /// `pos` through the element to `neg`.
    Cccs {
        name: String,
        pos: String,
        neg: String,
        gain: f64,
        sensed: String,
    },
    /// Voltage-controlled current source: `gm * (V(ctrl_pos) - V(ctrl_neg))`
    /// flows from `pos` through the element to `neg`.
    Vccs {
        name: String,
        pos: String,
        neg: String,
        ctrl_pos: String,
        ctrl_neg: String,
        gm: f64,
    },
    /// Behavioral Marino OpAmp trigger. `internal` is the amplifier node.
    Marino {
        name: String,
        input: String,
        output: String,
        internal: String,
        params: MarinoParams,
        c_total: f64,
    },
}

impl Element {
    pub fn name(&self) -> &str {
        match self {
            Element::Mosfet { name, .. }
            | Element::Capacitor { name, .. }
            | Element::VoltageSource { name, .. }
            | Element::Cccs { name, .. }
            | Element::Vccs { name, .. }
            | Element::Marino { name, .. } => name,
        }
    }

    /// Terminal nodes the element connects.
    pub fn nodes(&self) -> Vec<&str> {
        match self {
            Element::Mosfet { drain, gate, source, .. } => vec![drain, gate, source],
            Element::Capacitor { a, b, .. } => vec![a, b],
            Element::VoltageSource { pos, neg, .. } | Element::Cccs { pos, neg, .. } => {
                vec![pos, neg]
            }
            Element::Vccs { pos, neg, ctrl_pos, ctrl_neg, .. } => vec![pos, neg, ctrl_pos, ctrl_neg],
            Element::Marino { input, output, internal, .. } => vec![input, output, internal],
        }
    }

    fn nodes_mut(&mut self) -> Vec<&mut String> {
        match self {
            Element::Mosfet { drain, gate, source, .. } => vec![drain, gate, source],
            Element::Capacitor { a, b, .. } => vec![a, b],
            Element::VoltageSource { pos, neg, .. } | Element::Cccs { pos, neg, .. } => {
                vec![pos, neg]
            }
            Element::Vccs { pos, neg, ctrl_pos, ctrl_neg, .. } => vec![pos, neg, ctrl_pos, ctrl_neg],
            Element::Marino { input, output, internal, .. } => vec![input, output, internal],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub vdd: f64,
    pub nmos: MosfetParams,
    pub pmos: MosfetParams,
    pub elements: Vec<Element>,
    /// Name of the voltage source driving the trigger input.
    pub input: Option<String>,
    /// Name of the capacitor designated as the output load.
    pub load: Option<String>,
    /// Nodes of the memory loop, in signal order.
    pub loop_nodes: Vec<String>,
}

impl Default for Netlist {
    fn default() -> Self {
        Netlist::new(0.9)
    }
}

impl Netlist {
    pub fn new(vdd: f64) -> Self {
        Netlist {
            vdd,
            nmos: MosfetParams::nmos_default(),
            pmos: MosfetParams::pmos_default(),
            elements: Vec::new(),
            input: None,
            load: None,
            loop_nodes: Vec::new(),
        }
    }

    pub fn push(&mut self, e: Element) -> &mut Self {
        self.elements.push(e);
        self
    }

    pub fn mosfet(&mut self, name: &str, d: &str, g: &str, s: &str, params: &MosfetParams) -> &mut Self {
        let base = match params.polarity {
            Polarity::N => self.nmos,
            Polarity::P => self.pmos,
        };
        let overrides = ModelOverrides::between(&base, params);
        self.push(Element::Mosfet {
            name: name.into(),
            drain: d.into(),
            gate: g.into(),
            source: s.into(),
            polarity: params.polarity,
            width_ratio: params.width_ratio,
            overrides,
        })
    }

    pub fn capacitor(&mut self, name: &str, a: &str, b: &str, farads: f64) -> &mut Self {
        self.push(Element::Capacitor { name: name.into(), a: a.into(), b: b.into(), farads })
    }

    pub fn vsource(&mut self, name: &str, pos: &str, neg: &str, volts: f64) -> &mut Self {
        self.push(Element::VoltageSource { name: name.into(), pos: pos.into(), neg: neg.into(), volts })
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name() == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name() == name)
    }

    /// Resolved device parameters of a MOSFET element.
    pub fn mosfet_params(&self, e: &Element) -> Option<MosfetParams> {
        match e {
            Element::Mosfet { polarity, width_ratio, overrides, .. } => {
                let base = match polarity {
                    Polarity::N => self.nmos,
                    Polarity::P => self.pmos,
                };
                Some(overrides.apply(base).with_width(*width_ratio))
            }
            _ => None,
        }
    }

    /// Non-ground nodes in order of first appearance.
    pub fn nodes(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for e in &self.elements {
            for n in e.nodes() {
                if !is_ground(n) && seen.insert(n.to_string()) {
                    out.push(n.to_string());
                }
            }
        }
        out
    }

    pub fn input_node(&self) -> Result<String> {
        let name = self
            .input
            .as_ref()
            .ok_or_else(|| Error::InvalidNetlist("no input source designated".into()))?;
        match self.element(name) {
            Some(Element::VoltageSource { pos, .. }) => Ok(pos.clone()),
            _ => Err(Error::InvalidNetlist(format!("input '{name}' is not a voltage source"))),
        }
    }

    pub fn input_value(&self) -> Result<f64> {
        let name = self
            .input
            .as_ref()
            .ok_or_else(|| Error::InvalidNetlist("no input source designated".into()))?;
        match self.element(name) {
            Some(Element::VoltageSource { volts, .. }) => Ok(*volts),
            _ => Err(Error::InvalidNetlist(format!("input '{name}' is not a voltage source"))),
        }
    }

    pub fn set_input(&mut self, v: f64) -> Result<()> {
        let name = self
            .input
            .clone()
            .ok_or_else(|| Error::InvalidNetlist("no input source designated".into()))?;
        self.set_source(&name, v)
    }

    pub fn set_source(&mut self, name: &str, v: f64) -> Result<()> {
        match self.element_mut(name) {
            Some(Element::VoltageSource { volts, .. }) => {
                *volts = v;
                Ok(())
            }
            _ => Err(Error::InvalidNetlist(format!("'{name}' is not a voltage source"))),
        }
    }

    /// Output node and load capacitance of the designated load.
    pub fn output(&self) -> Result<(String, f64)> {
        let name = self
            .load
            .as_ref()
            .ok_or_else(|| Error::InvalidNetlist("no output load designated".into()))?;
        match self.element(name) {
            Some(Element::Capacitor { a, b, farads, .. }) => {
                let node = if is_ground(b) { a } else { b };
                Ok((node.clone(), *farads))
            }
            _ => Err(Error::InvalidNetlist(format!("load '{name}' is not a capacitor"))),
        }
    }

    pub fn output_node(&self) -> Result<String> {
        Ok(self.output()?.0)
    }

    pub fn set_load_capacitance(&mut self, c: f64) -> Result<()> {
        let name = self
            .load
            .clone()
            .ok_or_else(|| Error::InvalidNetlist("no output load designated".into()))?;
        match self.element_mut(&name) {
            Some(Element::Capacitor { farads, .. }) => {
                *farads = c;
                Ok(())
            }
            _ => Err(Error::InvalidNetlist(format!("load '{name}' is not a capacitor"))),
        }
    }

    /// Total capacitance connected from `node` to anywhere.
    pub fn node_capacitance(&self, node: &str) -> f64 {
        self.elements
            .iter()
            .filter_map(|e| match e {
                Element::Capacitor { a, b, farads, .. } if a == node || b == node => Some(*farads),
                _ => None,
            })
            .sum()
    }

    /// Renames a node in every element.
    pub fn rename_node(&mut self, from: &str, to: &str) {
        for e in &mut self.elements {
            for n in e.nodes_mut() {
                if n == from {
                    *n = to.to_string();
                }
            }
        }
    }

    /// Checks structural invariants: unique names, designated elements
    /// exist with the right kind, sensed sources exist, and every node is
    /// reachable from ground.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for e in &self.elements {
            if !names.insert(e.name()) {
                return Err(Error::InvalidNetlist(format!("duplicate element name '{}'", e.name())));
            }
            if let Element::Cccs { sensed, .. } = e {
                if !matches!(self.element(sensed), Some(Element::VoltageSource { .. })) {
                    return Err(Error::InvalidNetlist(format!("sensed source '{sensed}' not found")));
                }
            }
            if let Some(p) = self.mosfet_params(e) {
                p.validate(self.vdd)?;
            }
            if let Element::Marino { params, .. } = e {
                params.validate()?;
            }
        }
        if self.input.is_some() {
            self.input_node()?;
        }
        if self.load.is_some() {
            self.output()?;
        }
        let all = self.nodes();
        for n in &self.loop_nodes {
            if !all.contains(n) {
                return Err(Error::InvalidNetlist(format!("loop node '{n}' does not exist")));
            }
        }
        // union-find style flood fill from ground
        let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.elements {
            let ns: Vec<&str> = e.nodes().into_iter().map(|n| if is_ground(n) { GROUND } else { n }).collect();
            for &a in &ns {
                for &b in &ns {
                    if a != b {
                        adj.entry(a).or_default().push(b);
                    }
                }
            }
        }
        let mut reached: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![GROUND];
        while let Some(n) = stack.pop() {
            if reached.insert(n) {
                if let Some(next) = adj.get(n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        let unreachable: Vec<String> = all.into_iter().filter(|n| !reached.contains(n.as_str())).collect();
        if !unreachable.is_empty() {
            return Err(Error::InvalidNetlist(format!("nodes not connected to ground: {unreachable:?}")));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Netlist> {
        let mut nl = Netlist::new(0.9);
        let mut have_vdd = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('*') {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let head = toks[0];
            if let Some(directive) = head.strip_prefix('.') {
                match directive.to_ascii_lowercase().as_str() {
                    "param" => {
                        for t in &toks[1..] {
                            let (k, v) = t.split_once('=').ok_or_else(|| perr(format!("expected key=value, got '{t}'")))?;
                            if k.eq_ignore_ascii_case("vdd") {
                                nl.vdd = parse_number(v).map_err(perr)?;
                                have_vdd = true;
                            } else {
                                return Err(perr(format!("unknown parameter '{k}'")));
                            }
                        }
                    }
                    "model" => {
                        let pol = toks.get(1).ok_or_else(|| perr("missing model polarity".into()))?;
                        let pol = parse_polarity(pol).map_err(perr)?;
                        let ov = parse_overrides(&toks[2..]).map_err(perr)?;
                        match pol {
                            Polarity::N => nl.nmos = ov.apply(nl.nmos),
                            Polarity::P => nl.pmos = ov.apply(nl.pmos),
                        }
                    }
                    "input" => nl.input = Some(arg(&toks, 1).map_err(perr)?.to_string()),
                    "load" => nl.load = Some(arg(&toks, 1).map_err(perr)?.to_string()),
                    "loop" => nl.loop_nodes = toks[1..].iter().map(|s| s.to_string()).collect(),
                    "end" => break,
                    other => return Err(perr(format!("unknown directive '.{other}'"))),
                }
                continue;
            }
            let kind = head.chars().next().unwrap().to_ascii_uppercase();
            let name = arg(&toks, 1).map_err(perr)?.to_string();
            let e = match kind {
                'M' => {
                    if toks.len() < 7 {
                        return Err(perr("MOSFET line needs name, d, g, s, N|P, width".into()));
                    }
                    Element::Mosfet {
                        name,
                        drain: toks[2].into(),
                        gate: toks[3].into(),
                        source: toks[4].into(),
                        polarity: parse_polarity(toks[5]).map_err(perr)?,
                        width_ratio: parse_number(toks[6]).map_err(perr)?,
                        overrides: parse_overrides(&toks[7..]).map_err(perr)?,
                    }
                }
                'C' => {
                    exact_len(&toks, 5).map_err(perr)?;
                    Element::Capacitor { name, a: toks[2].into(), b: toks[3].into(), farads: parse_number(toks[4]).map_err(perr)? }
                }
                'V' => {
                    exact_len(&toks, 5).map_err(perr)?;
                    Element::VoltageSource { name, pos: toks[2].into(), neg: toks[3].into(), volts: parse_number(toks[4]).map_err(perr)? }
                }
                'F' => {
                    exact_len(&toks, 6).map_err(perr)?;
                    Element::Cccs {
                        name,
                        pos: toks[2].into(),
                        neg: toks[3].into(),
                        gain: parse_number(toks[4]).map_err(perr)?,
                        sensed: toks[5].into(),
                    }
                }
                'G' => {
                    exact_len(&toks, 7).map_err(perr)?;
                    Element::Vccs {
                        name,
                        pos: toks[2].into(),
                        neg: toks[3].into(),
                        ctrl_pos: toks[4].into(),
                        ctrl_neg: toks[5].into(),
                        gm: parse_number(toks[6]).map_err(perr)?,
                    }
                }
                'B' => {
                    if toks.len() < 6 || !toks[5].eq_ignore_ascii_case("marino") {
                        return Err(perr("behavioral line must be 'B name in out internal MARINO key=value...'".into()));
                    }
                    let (params, c_total) = MarinoParams::from_pairs(&toks[6..]).map_err(perr)?;
                    Element::Marino {
                        name,
                        input: toks[2].into(),
                        output: toks[3].into(),
                        internal: toks[4].into(),
                        params,
                        c_total,
                    }
                }
                other => return Err(perr(format!("unknown element kind '{other}'"))),
            };
            nl.elements.push(e);
        }
        if !have_vdd {
            return Err(Error::Parse { line: 0, message: "missing '.param VDD=<v>'".into() });
        }
        nl.validate()?;
        Ok(nl)
    }

    pub fn emit(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, ".param VDD={}", fmt_num(self.vdd));
        for m in [&self.nmos, &self.pmos] {
            let _ = writeln!(
                s,
                ".model {} vth={} kp={} lambda={} ss={}",
                m.polarity.as_str(),
                fmt_num(m.threshold_voltage),
                fmt_num(m.transconductance),
                fmt_num(m.channel_length_modulation),
                fmt_num(m.subthreshold_slope)
            );
        }
        for e in &self.elements {
            match e {
                Element::Mosfet { name, drain, gate, source, polarity, width_ratio, overrides } => {
                    let _ = write!(s, "M {name} {drain} {gate} {source} {} {}", polarity.as_str(), fmt_num(*width_ratio));
                    for (k, v) in [("vth", overrides.vth), ("kp", overrides.kp), ("lambda", overrides.lambda), ("ss", overrides.ss)] {
                        if let Some(v) = v {
                            let _ = write!(s, " {k}={}", fmt_num(v));
                        }
                    }
                    s.push('\n');
                }
                Element::Capacitor { name, a, b, farads } => {
                    let _ = writeln!(s, "C {name} {a} {b} {}", fmt_num(*farads));
                }
                Element::VoltageSource { name, pos, neg, volts } => {
                    let _ = writeln!(s, "V {name} {pos} {neg} {}", fmt_num(*volts));
                }
                Element::Cccs { name, pos, neg, gain, sensed } => {
                    let _ = writeln!(s, "F {name} {pos} {neg} {} {sensed}", fmt_num(*gain));
                }
                Element::Vccs { name, pos, neg, ctrl_pos, ctrl_neg, gm } => {
                    let _ = writeln!(s, "G {name} {pos} {neg} {ctrl_pos} {ctrl_neg} {}", fmt_num(*gm));
                }
                Element::Marino { name, input, output, internal, params, c_total } => {
                    let _ = writeln!(s, "B {name} {input} {output} {internal} MARINO {}", params.pairs(*c_total));
                }
            }
        }
        if let Some(i) = &self.input {
            let _ = writeln!(s, ".input {i}");
        }
        if let Some(l) = &self.load {
            let _ = writeln!(s, ".load {l}");
        }
        if !self.loop_nodes.is_empty() {
            let _ = writeln!(s, ".loop {}", self.loop_nodes.join(" "));
        }
        s
    }
}

fn arg<'a>(toks: &[&'a str], i: usize) -> std::result::Result<&'a str, String> {
    toks.get(i).copied().ok_or_else(|| format!("missing field {i}"))
}

fn exact_len(toks: &[&str], n: usize) -> std::result::Result<(), String> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(format!("expected {n} fields, found {}", toks.len()))
    }
}

fn parse_polarity(s: &str) -> std::result::Result<Polarity, String> {
    match s {
        "N" | "n" => Ok(Polarity::N),
        "P" | "p" => Ok(Polarity::P),
        _ => Err(format!("polarity must be N or P, got '{s}'")),
    }
}

fn parse_overrides(toks: &[&str]) -> std::result::Result<ModelOverrides, String> {
    let mut o = ModelOverrides::default();
    for t in toks {
        let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, got '{t}'"))?;
        let v = Some(parse_number(v)?);
        match k.to_ascii_lowercase().as_str() {
            "vth" => o.vth = v,
            "kp" => o.kp = v,
            "lambda" => o.lambda = v,
            "ss" => o.ss = v,
            _ => return Err(format!("unknown model key '{k}'")),
        }
    }
    Ok(o)
}

/// Parses a number with an optional SPICE scale suffix (`f`, `p`, `n`,
/// `u`, `m`, `k`, `meg`, `g`).
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let lower = s.to_ascii_lowercase();
    let suffixes: [(&str, f64); 8] = [
        ("meg", 1e6),
        ("f", 1e-15),
        ("p", 1e-12),
        ("n", 1e-9),
        ("u", 1e-6),
        ("m", 1e-3),
        ("k", 1e3),
        ("g", 1e9),
    ];
    for (suf, scale) in suffixes {
        if let Some(stem) = lower.strip_suffix(suf) {
            if let Ok(v) = stem.parse::<f64>() {
                return Ok(v * scale);
            }
        }
    }
    Err(format!("invalid number '{s}'"))
}

/// Shortest representation that parses back to the identical `f64`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
* inverter with load
.param VDD=0.9
.model N vth=0.3 kp=200u lambda=0.15 ss=0.04
M mp out in vdd P 2
M mn out in 0 N 1 vth=0.32
V vdd vdd 0 0.9
V vin in 0 0
C cl out 0 2f
.input vin
.load cl
";

    #[test]
    fn parses_sample() {
        let nl = Netlist::parse(SAMPLE).unwrap();
        assert_eq!(nl.elements.len(), 5);
        assert_eq!(nl.output().unwrap(), ("out".to_string(), 2e-15));
        assert_eq!(nl.input_node().unwrap(), "in");
        let mn = nl.element("mn").unwrap();
        assert_eq!(nl.mosfet_params(mn).unwrap().threshold_voltage, 0.32);
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let nl = Netlist::parse(SAMPLE).unwrap();
        let again = Netlist::parse(&nl.emit()).unwrap();
        assert_eq!(nl, again);
        assert_eq!(nl.emit(), again.emit());
    }

    #[test]
    fn rejects_floating_node() {
        let text = ".param VDD=0.9\nC c1 a b 1f\nV v1 x 0 1\n";
        assert!(matches!(Netlist::parse(text), Err(Error::InvalidNetlist(_))));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(Netlist::parse(".param VDD=0.9\nC c1 a 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Netlist::parse(".param VDD=0.9\nQ q1 a b c\n"), Err(Error::Parse { .. })));
        assert!(matches!(Netlist::parse("V v1 a 0 1\n"), Err(Error::Parse { .. })));
        assert!(Netlist::parse(".param VDD=0.9\nV v1 a 0 1\n.load v1\n").is_err());
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.9, 2e-15, 1.854e-15, 0.1 + 0.2, 1.000357, 123456789.0, -3.5e-7, 0.0] {
            assert_eq!(parse_number(&fmt_num(v)).unwrap(), v);
        }
        assert_eq!(parse_number("2f").unwrap(), 2e-15);
        assert_eq!(parse_number("1meg").unwrap(), 1e6);
    }
}
