//! Smooth square-law MOSFET model.
//!
//! The drain current uses a softplus-smoothed overdrive in a source/drain
//! symmetric difference form, so the linear and saturation regions are one
//! expression and the current is C-infinity in every terminal voltage. The
//! channel-length modulation factor uses a smoothed `|v_ds|` to keep the
//! model antisymmetric under drain/source exchange.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale of the smoothed absolute value used in the channel-length factor.
const SMOOTH_ABS_SCALE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    N,
    P,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::N => 1.0,
            Polarity::P => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::N => "N",
            Polarity::P => "P",
        }
    }
}

/// Technology parameters of one device. `transconductance` is per unit
/// width; `width_ratio` scales it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MosfetParams {
    pub polarity: Polarity,
    /// Threshold magnitude in volts.
    pub threshold_voltage: f64,
    /// Process transconductance in A/V^2 at unit width.
    pub transconductance: f64,
    /// Channel-length modulation in 1/V.
    pub channel_length_modulation: f64,
    pub width_ratio: f64,
    /// Smoothing scale of the overdrive in volts.
    pub subthreshold_slope: f64,
}

impl MosfetParams {
    pub fn nmos_default() -> Self {
        MosfetParams {
            polarity: Polarity::N,
            threshold_voltage: 0.3,
            transconductance: 200e-6,
            channel_length_modulation: 0.15,
            width_ratio: 1.0,
            subthreshold_slope: 0.04,
        }
    }

    pub fn pmos_default() -> Self {
        MosfetParams {
            polarity: Polarity::P,
            transconductance: 100e-6,
            ..Self::nmos_default()
        }
    }

    pub fn with_width(mut self, width_ratio: f64) -> Self {
        self.width_ratio = width_ratio;
        self
    }

    pub fn validate(&self, vdd: f64) -> Result<()> {
        if !(self.transconductance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "transconductance must be positive, got {}",
                self.transconductance
            )));
        }
        if !(self.threshold_voltage > 0.0 && self.threshold_voltage < vdd) {
            return Err(Error::InvalidParameter(format!(
                "threshold voltage {} outside (0, {vdd})",
                self.threshold_voltage
            )));
        }
        if !(self.subthreshold_slope > 0.0) {
            return Err(Error::InvalidParameter(
                "subthreshold_slope must be positive".into(),
            ));
        }
        if !(self.width_ratio > 0.0) || !(self.channel_length_modulation >= 0.0) {
            return Err(Error::InvalidParameter(
                "width_ratio must be positive and channel_length_modulation non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Drain current and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrainCurrent {
    /// Current flowing into the drain terminal, amperes.
    pub id: f64,
    pub d_vgs: f64,
    pub d_vds: f64,
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `F(x) = (s softplus(x/s))^2` and its derivative.
#[inline]
fn smoothed_square(x: f64, s: f64) -> (f64, f64) {
    let u = x / s;
    let sp = s * softplus(u);
    (sp * sp, 2.0 * sp * logistic(u))
}

#[inline]
fn smooth_abs(x: f64) -> (f64, f64) {
    let r = (x * x + SMOOTH_ABS_SCALE * SMOOTH_ABS_SCALE).sqrt();
    (r - SMOOTH_ABS_SCALE, x / r)
}

/// N-type current for positive-polarity terminal voltages.
fn n_current(p: &MosfetParams, vgs: f64, vds: f64) -> DrainCurrent {
    let k = 0.5 * p.transconductance * p.width_ratio;
    let s = p.subthreshold_slope;
    let vt = p.threshold_voltage;
    let (fs, dfs) = smoothed_square(vgs - vt, s);
    let (fd, dfd) = smoothed_square(vgs - vds - vt, s);
    let channel = k * (fs - fd);
    let (a, da) = smooth_abs(vds);
    let clm = 1.0 + p.channel_length_modulation * a;
    DrainCurrent {
        id: channel * clm,
        d_vgs: k * (dfs - dfd) * clm,
        d_vds: k * dfd * clm + channel * p.channel_length_modulation * da,
    }
}

/// Drain current of a device with gate-source voltage `v_gs` and
/// drain-source voltage `v_ds`, together with its partial derivatives.
pub fn mosfet_eval(p: &MosfetParams, v_gs: f64, v_ds: f64) -> DrainCurrent {
    match p.polarity {
        Polarity::N => n_current(p, v_gs, v_ds),
        Polarity::P => {
            let n = n_current(p, -v_gs, -v_ds);
            DrainCurrent {
                id: -n.id,
                d_vgs: n.d_vgs,
                d_vds: n.d_vds,
            }
        }
    }
}

/// Drain current (into the drain) in amperes.
pub fn mosfet_current(p: &MosfetParams, v_gs: f64, v_ds: f64) -> f64 {
    mosfet_eval(p, v_gs, v_ds).id
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straight transcription of the model formula, sharing no code with
    /// the evaluation path above.
    fn reference_n(vgs: f64, vds: f64) -> f64 {
        let p = MosfetParams::nmos_default();
        let s = p.subthreshold_slope;
        let f = |x: f64| {
            let sp = s * (1.0 + (x / s).exp()).ln();
            sp * sp
        };
        let clm = 1.0 + p.channel_length_modulation * ((vds * vds + 1e-4).sqrt() - 1e-2);
        0.5 * p.transconductance * (f(vgs - 0.3) - f(vgs - vds - 0.3)) * clm
    }

    #[test]
    fn cutoff_leakage_below_one_picoamp() {
        let i = mosfet_current(&MosfetParams::nmos_default(), 0.0, 0.9);
        assert!(i.abs() <= 1e-12, "leakage {i:e}");
        assert!(i > 0.0);
    }

    #[test]
    fn zero_vds_gives_exactly_zero() {
        let p = MosfetParams::nmos_default();
        for vgs in [-0.5, 0.0, 0.3, 0.6, 0.9, 1.5] {
            assert_eq!(mosfet_current(&p, vgs, 0.0), 0.0);
        }
        let pp = MosfetParams::pmos_default();
        assert_eq!(mosfet_current(&pp, -0.7, 0.0), 0.0);
    }

    #[test]
    fn matches_independent_formula() {
        let p = MosfetParams::nmos_default();
        let got = mosfet_current(&p, 0.6, 0.9);
        let want = reference_n(0.6, 0.9);
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        // square-law saturation sanity: k/2 * 0.3^2 * (1 + lambda*0.89)
        assert!((got - 0.5 * 200e-6 * 0.09 * (1.0 + 0.15 * 0.89)).abs() / got < 1e-3);
    }

    #[test]
    fn pmos_sign_and_symmetry() {
        let p = MosfetParams::pmos_default();
        // source at VDD, gate and drain at ground
        let i = mosfet_current(&p, -0.9, -0.9);
        assert!(i < 0.0, "P device pulls its drain up");
        let n = MosfetParams::nmos_default();
        let a = mosfet_current(&n, 0.7, 0.4);
        // swap drain and source: vgs' = vgd, vds' = -vds
        let b = mosfet_current(&n, 0.7 - 0.4, -0.4);
        assert!((a + b).abs() < 1e-18);
    }

    #[test]
    fn derivatives_match_central_differences() {
        for p in [MosfetParams::nmos_default(), MosfetParams::pmos_default()] {
            for &(vgs, vds) in &[(0.5, 0.3), (-0.4, -0.8), (0.1, 0.9), (0.8, -0.05), (0.45, 0.001)] {
                let d = mosfet_eval(&p, vgs, vds);
                let h = 1e-6;
                let fg = (mosfet_current(&p, vgs + h, vds) - mosfet_current(&p, vgs - h, vds)) / (2.0 * h);
                let fd = (mosfet_current(&p, vgs, vds + h) - mosfet_current(&p, vgs, vds - h)) / (2.0 * h);
                assert!((d.d_vgs - fg).abs() <= 1e-6 * fg.abs().max(1e-9), "{:?} {vgs} {vds}", p.polarity);
                assert!((d.d_vds - fd).abs() <= 1e-6 * fd.abs().max(1e-9));
            }
        }
    }
}
