//! Exact decision procedures for absorption in finite idempotent algebras.
//!
//! An algebra is given by the tables of its basic operations. The crate
//! decides whether a subuniverse `B` absorbs the algebra by combining a
//! polynomial Jónsson-absorption test ([`jonsson`]) with a fixed-parameter
//! search for `B`-blockers ([`blocker`]), and it can extract explicit
//! absorption terms from subpower closures ([`absorption`]). Brute-force
//! oracles for every decision live next to the fast procedures so the two
//! can be cross-checked, and [`reduction`] builds the 3-SAT hardness family.

pub mod absorption;
pub mod algebra;
pub mod bits;
pub mod blocker;
pub mod closure;
mod error;
pub mod format;
pub mod jonsson;
pub mod par;
pub mod reduction;
pub mod term;

pub use algebra::{Algebra, Elem, OpFn, Operation, RawAlgebra, RawOperation, Subset};
pub use error::{Error, Result};
pub use term::Term;

/// Default bound on the number of tuples (or elements) any single closure or
/// power construction may store.
pub const DEFAULT_CAP: usize = 1 << 24;

/// Default bound on operation applications within a single closure.
pub const DEFAULT_WORK: u64 = 1 << 32;

/// Resource limits and parallelism shared by every decision procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Maximum number of stored tuples per closure, elements per power, or
    /// candidates per exhaustive enumeration.
    pub cap: usize,
    /// Maximum operation applications per closure.
    pub work: u64,
    /// Worker threads for the parallel outer loops. `1` runs sequentially.
    pub threads: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            cap: DEFAULT_CAP,
            work: DEFAULT_WORK,
            threads: 1,
        }
    }
}

impl Budget {
    pub fn with_cap(cap: usize) -> Self {
        Budget {
            cap,
            ..Budget::default()
        }
    }

    pub fn work(mut self, work: u64) -> Self {
        self.work = work;
        self
    }

    pub fn limits(&self) -> closure::Limits {
        closure::Limits {
            members: self.cap,
            work: self.work,
        }
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }
}
