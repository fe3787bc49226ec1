//! Analytic OpAmp trigger with three affine equilibrium lines.
//!
//! The output obeys `V' = max(r1, min(r2, r3))` with
//! `r1 = -(V - g1)/tau1`, `r2 = (V - g2)/tau2`, `r3 = -(V - g3)/tau3`.
//! The envelope is continuous and picks the region whose line the state is
//! governed by: attractors `g1` (low) and `g3` (high) and the repeller
//! `g2` joining their end points. Outside the band only one attractor is
//! left, which is the saturated amplifier of the classic model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{fmt_num, parse_number, Element, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarinoParams {
    /// Amplifier gain A of each loop stage.
    pub gain: f64,
    /// Output saturation M around the center voltage.
    pub saturation: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// Voltage the lines pivot about (V_DD / 2 for a symmetric trigger).
    pub center: f64,
    /// Slopes of the three lines against v_in.
    pub slope1: f64,
    pub slope2: f64,
    pub slope3: f64,
}

impl Default for MarinoParams {
    fn default() -> Self {
        MarinoParams {
            gain: 10.0,
            saturation: 0.45,
            tau1: 0.5e-9,
            tau2: 1e-9,
            tau3: 0.5e-9,
            center: 0.45,
            slope1: 0.0,
            slope2: 4.5,
            slope3: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Low,
    Metastable,
    High,
}

impl Region {
    pub fn id(self) -> u8 {
        match self {
            Region::Low => 1,
            Region::Metastable => 2,
            Region::High => 3,
        }
    }
}

/// The line and time constant governing one point of the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionDynamics {
    pub region: Region,
    pub line: f64,
    pub time_constant: f64,
}

impl MarinoParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.gain > 1.0) {
            return bad("Marino gain must exceed 1");
        }
        if !(self.saturation > 0.0) {
            return bad("Marino saturation must be positive");
        }
        if !(self.tau1 > 0.0 && self.tau2 > 0.0 && self.tau3 > 0.0) {
            return bad("Marino time constants must be positive");
        }
        if !(self.slope2 > self.slope1 && self.slope2 > self.slope3) {
            return bad("the metastable line must be steeper than both stable lines");
        }
        Ok(())
    }

    pub fn gamma1(&self, v_in: f64) -> f64 {
        self.center - self.saturation + self.slope1 * (v_in - self.center)
    }

    pub fn gamma2_line(&self, v_in: f64) -> f64 {
        self.center + self.slope2 * (v_in - self.center)
    }

    pub fn gamma3(&self, v_in: f64) -> f64 {
        self.center + self.saturation + self.slope3 * (v_in - self.center)
    }

    /// Band edges (V_L, V_H) where the metastable line meets the low and
    /// high stable lines.
    pub fn band(&self) -> (f64, f64) {
        let lo = self.center - self.saturation / (self.slope2 - self.slope1);
        let hi = self.center + self.saturation / (self.slope2 - self.slope3);
        (lo, hi)
    }

    /// Output time constant of the second loop stage of the netlist device.
    pub fn output_stage_tau(&self) -> f64 {
        (self.gain * self.gain - 1.0) * self.tau2
    }

    pub fn dynamics(&self, v_in: f64, v_out: f64) -> RegionDynamics {
        let (g1, g2, g3) = (self.gamma1(v_in), self.gamma2_line(v_in), self.gamma3(v_in));
        let r1 = -(v_out - g1) / self.tau1;
        let r2 = (v_out - g2) / self.tau2;
        let r3 = -(v_out - g3) / self.tau3;
        let (inner, inner_region) = if r2 <= r3 { (r2, Region::Metastable) } else { (r3, Region::High) };
        if r1 > inner {
            RegionDynamics { region: Region::Low, line: g1, time_constant: self.tau1 }
        } else {
            match inner_region {
                Region::Metastable => RegionDynamics { region: Region::Metastable, line: g2, time_constant: self.tau2 },
                _ => RegionDynamics { region: Region::High, line: g3, time_constant: self.tau3 },
            }
        }
    }

    pub(crate) fn from_pairs(toks: &[&str]) -> std::result::Result<(MarinoParams, f64), String> {
        let mut p = MarinoParams::default();
        let mut c_total = None;
        for t in toks {
            let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, got '{t}'"))?;
            let v = parse_number(v)?;
            match k {
                "a" => p.gain = v,
                "m" => p.saturation = v,
                "tau1" => p.tau1 = v,
                "tau2" => p.tau2 = v,
                "tau3" => p.tau3 = v,
                "vc" => p.center = v,
                "s1" => p.slope1 = v,
                "s2" => p.slope2 = v,
                "s3" => p.slope3 = v,
                "ctot" => c_total = Some(v),
                _ => return Err(format!("unknown MARINO key '{k}'")),
            }
        }
        let c_total = c_total.ok_or("MARINO device needs ctot=<farads>")?;
        Ok((p, c_total))
    }

    pub(crate) fn pairs(&self, c_total: f64) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("a", self.gain),
            ("m", self.saturation),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("tau3", self.tau3),
            ("vc", self.center),
            ("s1", self.slope1),
            ("s2", self.slope2),
            ("s3", self.slope3),
            ("ctot", c_total),
        ] {
            if !s.is_empty() {
                s.push(' ');
            }
            let _ = write!(s, "{k}={}", fmt_num(v));
        }
        s
    }
}

/// Output derivative V_out' of the analytic model in V/s.
pub fn marino_vout_prime(p: &MarinoParams, v_in: f64, v_out: f64) -> f64 {
    let d = p.dynamics(v_in, v_out);
    match d.region {
        Region::Metastable => (v_out - d.line) / d.time_constant,
        _ => -(v_out - d.line) / d.time_constant,
    }
}

/// Closed-form metastable voltage for an in-band input.
pub fn marino_gamma2(p: &MarinoParams, v_in: f64) -> Result<f64> {
    let (lo, hi) = p.band();
    if v_in < lo || v_in > hi {
        return Err(Error::OutOfBand { v_in, lower: lo, upper: hi });
    }
    Ok(p.gamma2_line(v_in))
}

/// Current delivered into the output node and the amplifier-node residual
/// of the netlist realization, with partial derivatives.
///
/// The device is a two-stage loop: the amplifier node settles
/// algebraically to `vc - A (out - vc) + (A^2 - 1)(g2(v_in) - vc)/A`, and
/// the output stage drives `C_total * max(r1, min(r2', r3))` into the
/// output with `r2' = (vc - A (amp - vc) - out) / ((A^2 - 1) tau2)`. With
/// the loop closed, `r2'` equals `r2`, so the output obeys the analytic
/// dynamics exactly while the loop gain is `A^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct MarinoStamp {
    /// Current into the output node.
    pub i_out: f64,
    pub di_out_dvin: f64,
    pub di_out_dout: f64,
    pub di_out_damp: f64,
    /// Current leaving the amplifier node.
    pub i_amp: f64,
    pub di_amp_dvin: f64,
    pub di_amp_dout: f64,
    pub di_amp_damp: f64,
}

pub(crate) const AMP_CONDUCTANCE: f64 = 1e-3;

pub(crate) fn marino_stamp(p: &MarinoParams, c_total: f64, v_in: f64, v_out: f64, v_amp: f64) -> MarinoStamp {
    let a = p.gain;
    let vc = p.center;
    let target = vc - a * (v_out - vc) + (a * a - 1.0) * (p.gamma2_line(v_in) - vc) / a;
    let g = AMP_CONDUCTANCE;

    let tau_o = p.output_stage_tau();
    let r1 = -(v_out - p.gamma1(v_in)) / p.tau1;
    let r3 = -(v_out - p.gamma3(v_in)) / p.tau3;
    let r2 = (vc - a * (v_amp - vc) - v_out) / tau_o;
    // (value, d/dvin, d/dout, d/damp)
    let t1 = (r1, p.slope1 / p.tau1, -1.0 / p.tau1, 0.0);
    let t2 = (r2, 0.0, -1.0 / tau_o, -a / tau_o);
    let t3 = (r3, p.slope3 / p.tau3, -1.0 / p.tau3, 0.0);
    let inner = if t2.0 <= t3.0 { t2 } else { t3 };
    let f = if t1.0 > inner.0 { t1 } else { inner };

    MarinoStamp {
        i_out: c_total * f.0,
        di_out_dvin: c_total * f.1,
        di_out_dout: c_total * f.2,
        di_out_damp: c_total * f.3,
        i_amp: g * (v_amp - target),
        di_amp_dvin: -g * (a * a - 1.0) * p.slope2 / a,
        di_amp_dout: g * a,
        di_amp_damp: g,
    }
}

/// Netlist realization: input source `vin`, device `bmar`, load `cl` and
/// an optional extra capacitance `cint` at the output. The device current
/// is scaled by `c_load + c_internal`, so the transient output follows the
/// analytic derivative exactly.
pub fn marino_as_netlist(p: &MarinoParams, c_load: f64, c_internal: f64) -> Result<Netlist> {
    p.validate()?;
    let mut nl = Netlist::new(2.0 * p.center);
    nl.vsource("vin", "in", "0", p.center);
    nl.push(Element::Marino {
        name: "bmar".into(),
        input: "in".into(),
        output: "out".into(),
        internal: "amp".into(),
        params: *p,
        c_total: c_load + c_internal,
    });
    nl.capacitor("cl", "out", "0", c_load);
    if c_internal > 0.0 {
        nl.capacitor("cint", "out", "0", c_internal);
    }
    nl.input = Some("vin".into());
    nl.load = Some("cl".into());
    nl.loop_nodes = vec!["out".into(), "amp".into()];
    nl.validate()?;
    Ok(nl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_on_each_line() {
        let p = MarinoParams::default();
        let (lo, hi) = p.band();
        for k in 1..10 {
            let v = lo + (hi - lo) * k as f64 / 10.0;
            assert_eq!(marino_vout_prime(&p, v, p.gamma2_line(v)), 0.0);
            assert_eq!(marino_vout_prime(&p, v, p.gamma1(v)), 0.0);
            assert_eq!(marino_vout_prime(&p, v, p.gamma3(v)), 0.0);
        }
    }

    #[test]
    fn region_two_direct_substitution() {
        let p = MarinoParams::default();
        let v = p.center;
        let d = marino_vout_prime(&p, v, p.gamma2_line(v) + 1e-3);
        assert!((d - 1e6).abs() < 1e-6, "{d}");
    }

    #[test]
    fn gamma2_symmetric_mid_and_edges() {
        let p = MarinoParams::default();
        let (lo, hi) = p.band();
        assert!((marino_gamma2(&p, 0.5 * (lo + hi)).unwrap() - 0.45).abs() < 1e-15);
        assert!((marino_gamma2(&p, lo).unwrap() - p.gamma1(lo)).abs() < 1e-12);
        assert!((marino_gamma2(&p, hi).unwrap() - p.gamma3(hi)).abs() < 1e-12);
        assert!(matches!(marino_gamma2(&p, lo - 1e-3), Err(Error::OutOfBand { .. })));
        assert!(matches!(marino_gamma2(&p, hi + 1e-3), Err(Error::OutOfBand { .. })));
    }

    #[test]
    fn gamma2_is_a_straight_line() {
        let p = MarinoParams { slope1: 0.3, slope3: -0.2, ..MarinoParams::default() };
        let (lo, hi) = p.band();
        let g: Vec<f64> = (0..11).map(|k| marino_gamma2(&p, lo + (hi - lo) * k as f64 / 10.0).unwrap()).collect();
        for w in g.windows(3) {
            assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_signs_by_finite_difference() {
        let p = MarinoParams::default();
        let (lo, hi) = p.band();
        let h = 1e-6;
        for k in 1..20 {
            let v = lo + (hi - lo) * k as f64 / 20.0;
            let slope = |y: f64| (marino_vout_prime(&p, v, y + h) - marino_vout_prime(&p, v, y - h)) / (2.0 * h);
            assert!((slope(p.gamma2_line(v)) - 1.0 / p.tau2).abs() < 1e-3 / p.tau2);
            // the low line sits on the rail; probe just inside the plane
            assert!((slope(p.gamma1(v) + 2e-6) + 1.0 / p.tau1).abs() < 1e-3 / p.tau1);
            assert!((slope(p.gamma3(v) - 2e-6) + 1.0 / p.tau3).abs() < 1e-3 / p.tau3);
        }
    }

    #[test]
    fn netlist_stamp_matches_analytic_when_loop_closed() {
        let p = MarinoParams::default();
        let c = 2e-15;
        for &(vin, vout) in &[(0.45, 0.46), (0.40, 0.1), (0.52, 0.8), (0.2, 0.5), (0.7, 0.3)] {
            let target = p.center - p.gain * (vout - p.center) + (p.gain * p.gain - 1.0) * (p.gamma2_line(vin) - p.center) / p.gain;
            let s = marino_stamp(&p, c, vin, vout, target);
            assert!(s.i_amp.abs() < 1e-15);
            let want = c * marino_vout_prime(&p, vin, vout);
            assert!((s.i_out - want).abs() <= 1e-9 * want.abs().max(1e-18), "{vin} {vout}: {} vs {want}", s.i_out);
        }
    }

    #[test]
    fn pairs_round_trip() {
        let p = MarinoParams { tau1: 3.3e-10, ..MarinoParams::default() };
        let text = p.pairs(2e-15);
        let toks: Vec<&str> = text.split_whitespace().collect();
        assert_eq!(MarinoParams::from_pairs(&toks).unwrap(), (p, 2e-15));
    }
}
