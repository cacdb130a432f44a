use std::cell::Cell;

use crate::error::{Error, Result};

/// Deterministic work allowance shared by solver nodes and automaton states.
#[derive(Debug)]
pub struct Budget {
    limit: u64,
    used: Cell<u64>,
}

impl Budget {
    pub const DEFAULT: u64 = 2_000_000;

    pub fn new(limit: u64) -> Self {
        Budget { limit, used: Cell::new(0) }
    }

    pub fn unlimited() -> Self {
        Budget::new(u64::MAX)
    }

    pub fn charge(&self, what: &str, units: u64) -> Result<()> {
        let used = self.used.get().saturating_add(units);
        self.used.set(used);
        if used > self.limit {
            return Err(Error::Budget { what: what.to_string(), limit: self.limit });
        }
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(Budget::DEFAULT)
    }
}
