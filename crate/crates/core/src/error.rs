use thiserror::Error;

use crate::algebra::Elem;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("universe size must be positive")]
    EmptyUniverse,
    #[error("operation {op:?}: expected {expected} table entries, found {found}")]
    MalformedTable {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("operation {op:?}: table entry {index} is {value}, outside the universe")]
    ValueOutOfRange {
        op: String,
        index: usize,
        value: u64,
    },
    #[error("duplicate operation name {0:?}")]
    DuplicateOpName(String),
    #[error("invalid operation name {0:?}")]
    InvalidOpName(String),
    #[error("operation {0:?} has arity 0")]
    ZeroArity(String),
    #[error("unknown operation {0:?}")]
    UnknownOp(String),
    #[error("operation {op:?} takes {expected} arguments, term supplies {found}")]
    ArityMismatch {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("term needs {needed} arguments, {supplied} supplied")]
    MissingArguments { needed: usize, supplied: usize },
    #[error("element {0} is outside the universe")]
    ElementOutOfRange(u64),
    #[error("operation {op:?} is not idempotent at {x}")]
    NotIdempotent { op: String, x: Elem },
    #[error("subset is not a subuniverse: {op}{args:?} = {value} lies outside it")]
    NotASubuniverse {
        op: String,
        args: Vec<Elem>,
        value: Elem,
    },
    #[error("the subuniverse B must be nonempty")]
    EmptyB,
    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCapExceeded {
        what: &'static str,
        needed: u128,
        cap: usize,
    },
    #[error("tuple is not a member of the subpower")]
    NotAMember,
    #[error("subpower was generated without provenance")]
    NoProvenance,
    #[error("chain does not verify: {0}")]
    ChainInvalid(String),
    #[error("a unary absorption term only yields a chain on a one-element algebra")]
    DegenerateArity,
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("DIMACS parse error on line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("clause {clause} has {len} literals, at most 3 are allowed")]
    ClauseTooLong { clause: usize, len: usize },
    #[error("formula has no clauses")]
    EmptyFormula,
    #[error("{0} variables is too many for exhaustive enumeration")]
    TooManyVariables(usize),
    #[error("reduction rules disagree for {op} at {args:?}")]
    RuleConflict { op: String, args: [Elem; 3] },
}

impl Error {
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::ResourceCapExceeded { .. })
    }

    pub(crate) fn cap(what: &'static str, needed: u128, cap: usize) -> Error {
        Error::ResourceCapExceeded { what, needed, cap }
    }
}
