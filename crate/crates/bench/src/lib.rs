//! Shared inputs for the benchmarks.

use ncm_core::{parse_machine, Machine};

pub const ANBN: &str = include_str!("../../../fixtures/anbn.ncm");
pub const EX2: &str = include_str!("../../../fixtures/ex2.ncm");
pub const EX3: &str = include_str!("../../../fixtures/ex3.ncm");
pub const ANBNCN: &str = include_str!("../../../fixtures/anbncn.ncm");

pub fn load(text: &str) -> Machine {
    parse_machine(text).expect("fixture parses")
}
