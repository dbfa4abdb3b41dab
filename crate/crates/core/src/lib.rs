//! Graph homology of mated species with exact arithmetic.
//!
//! The library computes chain complexes of decorated graphs (commutative,
//! cyclic-order, chord-diagram and finite-group vertex species), the edge and
//! half-edge boundary operators, the matching pairing and its deformation,
//! and the symplectic side (Poisson brackets, wedge complexes, state-sum
//! invariants, Moyal star product) used to cross-check the graph side.
//!
//! All arithmetic is exact: `BigInt`/`BigRational` scalars and integer
//! polynomials in the deformation variable. The numeric layers are generic
//! over the scalar type; the aliases below fix the instantiations used by
//! the rest of the crate.

pub mod complex;
pub mod enumerate;
pub mod graph;
pub mod interchange;
pub mod linalg;
pub mod pairing;
pub mod poly;
pub mod species;
pub mod sympalg;
pub mod verify;

/// Exact integer scalar.
pub type Int = num_bigint::BigInt;
/// Exact rational scalar.
pub type Rat = num_rational::BigRational;
/// Polynomial in the deformation variable `s` with integer coefficients.
pub type IntPoly = poly::Poly<Int>;
/// Polynomial in `s` with rational coefficients.
pub type RatPoly = poly::Poly<Rat>;
/// Rational chain in a graph complex.
pub type Chain = complex::ChainVector<Rat>;

/// Crate-wide error type; variants name the failure modes of the public API.
#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid group presentation: {0}")]
    InvalidGroup(String),
    #[error("malformed vertex structure: {0}")]
    MalformedStructure(String),
    #[error("malformed graph: {0}")]
    MalformedGraph(String),
    #[error("species of the operands differ")]
    SpeciesMismatch,
    #[error("contracting a loop is undefined")]
    LoopContraction,
    #[error("quasi-edge endpoints lie on the same vertex")]
    QuasiLoop,
    #[error("quasi-edge is an actual edge; use the edge boundary instead")]
    IsActualEdge,
    #[error("term outside the supplied basis: {0}")]
    BasisMismatch(String),
    #[error("pairing block basis incomplete: {0}")]
    BasisIncomplete(String),
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("element is not homogeneous of degree two")]
    NotDegreeTwo,
    #[error("polynomial term has degree {0}, below the required minimum of 2")]
    DegreeTooLow(u32),
    #[error("ambient symplectic dimensions differ")]
    DimensionMismatch,
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
