//! Exact-arithmetic strata algebra for moduli spaces of stable curves of
//! genus at most two: stable-graph combinatorics, decorated boundary classes
//! with exact rational coefficients, psi-intersection numbers, graph-formula
//! constructors for the loci of marked Weierstrass points on genus-2 curves,
//! and pairing-based verification of the identities relating them.

pub mod algebra;
pub mod graphs;
pub mod hyperelliptic;
pub mod integrals;
pub mod par;
pub mod verify;
pub mod rat;

pub use rat::Rat;
