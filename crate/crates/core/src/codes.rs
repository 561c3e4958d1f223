//! Built-in exponent matrices used by the tests and the CLI.

use crate::code_model::ExponentMatrix;

const RATE03_640: &str = include_str!("../data/rate03_640.qc");
const WIMAX_576_R34A: &str = include_str!("../data/wimax_576_r34a.qc");
const TANNER_155: &str = include_str!("../data/tanner_155.qc");
const TOY_BASE: &str = include_str!("../data/toy_base.qc");

/// (640, 192) code, lift 64, 7x10 base matrix.
pub fn rate03_640() -> ExponentMatrix {
    ExponentMatrix::parse(RATE03_640).unwrap()
}

/// (576, 432) rate-3/4 A code of IEEE 802.16e, lift 24.
pub fn wimax_576_r34a() -> ExponentMatrix {
    ExponentMatrix::parse(WIMAX_576_R34A).unwrap()
}

/// Tanner (155, 64) code, lift 31.
pub fn tanner_155() -> ExponentMatrix {
    ExponentMatrix::parse(TANNER_155).unwrap()
}

/// 3x4 protograph with unit lift.
pub fn toy_base() -> ExponentMatrix {
    ExponentMatrix::parse(TOY_BASE).unwrap()
}

/// Looks up a built-in code by name.
pub fn by_name(name: &str) -> Option<ExponentMatrix> {
    match name {
        "rate03-640" => Some(rate03_640()),
        "wimax-576-r34a" => Some(wimax_576_r34a()),
        "tanner-155" => Some(tanner_155()),
        "toy" => Some(toy_base()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["rate03-640", "wimax-576-r34a", "tanner-155", "toy"];
