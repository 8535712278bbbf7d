//! Shipped example negotiations.

use crate::data::DataNegotiation;
use crate::model::Negotiation;
use crate::ngt::parse_ngt;

pub const FIG1L: &str = include_str!("../fixtures/FIG1L.ngt");
pub const FIG1L_MOD: &str = include_str!("../fixtures/FIG1L-MOD.ngt");
pub const FIG1M: &str = include_str!("../fixtures/FIG1M.ngt");
pub const FIG1R: &str = include_str!("../fixtures/FIG1R.ngt");
pub const FIG1R_MOD: &str = include_str!("../fixtures/FIG1R-MOD.ngt");
pub const WEAK_BAD: &str = include_str!("../fixtures/WEAK-BAD.ngt");
pub const NODOM: &str = include_str!("../fixtures/NODOM.ngt");
pub const ANTI_F: &str = include_str!("../fixtures/ANTI-F.ngt");
pub const ANTI_C: &str = include_str!("../fixtures/ANTI-C.ngt");
pub const DATA1: &str = include_str!("../fixtures/DATA1.ngt");
pub const DATA1_ACYC: &str = include_str!("../fixtures/DATA1-ACYC.ngt");

pub const ALL: [(&str, &str); 11] = [
    ("FIG1L", FIG1L),
    ("FIG1L-MOD", FIG1L_MOD),
    ("FIG1M", FIG1M),
    ("FIG1R", FIG1R),
    ("FIG1R-MOD", FIG1R_MOD),
    ("WEAK-BAD", WEAK_BAD),
    ("NODOM", NODOM),
    ("ANTI-F", ANTI_F),
    ("ANTI-C", ANTI_C),
    ("DATA1", DATA1),
    ("DATA1-ACYC", DATA1_ACYC),
];

/// Look a fixture up by name.
pub fn by_name(name: &str) -> Option<Negotiation> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, t)| load(t))
}

fn load(text: &str) -> Negotiation {
    parse_ngt(text).expect("shipped fixture parses").neg
}

fn load_data(text: &str) -> DataNegotiation {
    parse_ngt(text).expect("shipped fixture parses").data.expect("fixture has labels")
}

pub fn fig1l() -> Negotiation {
    load(FIG1L)
}
pub fn fig1l_mod() -> Negotiation {
    load(FIG1L_MOD)
}
pub fn fig1m() -> Negotiation {
    load(FIG1M)
}
pub fn fig1r() -> Negotiation {
    load(FIG1R)
}
pub fn fig1r_mod() -> Negotiation {
    load(FIG1R_MOD)
}
pub fn weak_bad() -> Negotiation {
    load(WEAK_BAD)
}
pub fn nodom() -> Negotiation {
    load(NODOM)
}
pub fn anti_f() -> Negotiation {
    load(ANTI_F)
}
pub fn anti_c() -> Negotiation {
    load(ANTI_C)
}
pub fn data1() -> DataNegotiation {
    load_data(DATA1)
}
pub fn data1_acyc() -> DataNegotiation {
    load_data(DATA1_ACYC)
}
