//! Static characteristics of the shipped topologies.

use stmeta::characterization::hyst;
use stmeta::circuits::{circuit_by_name, CIRCUIT_NAMES};
use stmeta::params::ParameterSet;
use stmeta::sim::{Circuit, SolverOptions};

fn band(name: &str, ps: &ParameterSet) -> stmeta::characterization::MetaCharacteristic {
    let c = Circuit::compile(&circuit_by_name(name, ps).unwrap()).unwrap();
    hyst(&c, 1e-3, &SolverOptions::default()).unwrap()
}

#[test]
fn every_trigger_has_at_least_fifty_millivolts_of_hysteresis() {
    let ps = ParameterSet::default();
    for name in ["std6t", "loop", "adjust", "marino"] {
        let h = band(name, &ps);
        assert!(h.width() >= 0.05, "{name}: {}", h.width());
        assert!(h.v_low > 0.0 && h.v_high < ps.technology.vdd, "{name}");
    }
}

#[test]
fn matched_six_transistor_trigger_is_symmetric() {
    // defaults pair every N device of width 1 with a P device of width 2
    // and half the transconductance
    let ps = ParameterSet::default();
    let t = ps.technology;
    assert_eq!(t.pmos.kp * ps.std6t.mp1.width, t.nmos.kp * ps.std6t.mn1.width);
    let h = band("std6t", &ps);
    let mid = 0.5 * (h.v_low + h.v_high);
    assert!((mid - 0.5 * t.vdd).abs() <= 5e-3, "{mid}");
}

#[test]
fn adjust_low_branch_rises_well_off_ground() {
    let ps = ParameterSet::default();
    assert_eq!(ps.adjust.v_b, ps.technology.vdd);
    let h = band("adjust", &ps);
    let peak = h.gamma1.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    assert!(peak > 0.1 * ps.technology.vdd, "{peak}");
}

#[test]
fn names_are_all_buildable() {
    let ps = ParameterSet::default();
    for name in CIRCUIT_NAMES {
        assert!(circuit_by_name(name, &ps).is_ok(), "{name}");
    }
    assert!(circuit_by_name("nand", &ps).is_err());
}
