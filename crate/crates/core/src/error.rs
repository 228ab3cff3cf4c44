use thiserror::Error;

/// Errors surfaced by the exact-arithmetic and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("p = {0} is not an odd prime")]
    NotOddPrime(u64),
    #[error("no irreducible defining polynomial found for degree {0} over F_{1}")]
    NoIrreducible(usize, u64),
    #[error("tower level {0} exceeds max_level {1}")]
    TowerExhausted(usize, usize),
    #[error("field {0} is not below level {1} in the tower")]
    NotASubfield(String, usize),
    #[error("element does not lie in the requested subfield")]
    NotInSubfield,
    #[error("enumeration domain too large: {0} elements")]
    DomainTooLarge(u128),
    #[error("cyclotomic value is not a rational integer")]
    NotAnInteger,
    #[error("exact division failed (remainder nonzero)")]
    InexactDivision,
    #[error("context mismatch between operands")]
    CtxMismatch,
    #[error("unknown subgroup name {0}")]
    UnknownSubgroup(String),
    #[error("subgroup {0} is not defined for h = {1}")]
    SubgroupParity(String, usize),
    #[error("operand is not a member of {0}")]
    NotInSubgroup(String),
    #[error("subgroup is not abelian")]
    NotAbelian,
    #[error("character domain mismatch")]
    DomainMismatch,
    #[error("additive character must have conductor q^2")]
    ConductorTooSmall,
    #[error("h must be odd for this operation")]
    RequiresOddLevel,
    #[error("rewriting did not terminate (exponent bound hit); malformed system")]
    MalformedSystem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
