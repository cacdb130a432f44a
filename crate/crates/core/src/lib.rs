//! Reversal-bounded multicounter machines restricted by instruction languages.

pub mod automaton;
pub mod budget;
pub mod build;
pub mod decide;
pub mod error;
pub mod flowsolve;
pub mod format;
pub mod machine;
pub mod oracle;
pub mod patterns;

pub use automaton::{Dfa, Nfa};
pub use budget::Budget;
pub use error::{Error, Result};
pub use flowsolve::{FlowSystem, FlowWitness, LinearSet, SemilinearSet};
pub use format::{parse_machine, parse_semilinear, write_machine, write_semilinear};
pub use machine::{Config, Instr, Machine, MachineBuilder, Run, Transition, Word};
pub use patterns::{classify_families, Classification, Expr, FamilyTag, Pattern};
