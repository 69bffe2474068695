//! Numerical laboratory for adelic measure computations: prime pairings in
//! number fields, tail-equivalence certificates for product measures, masses
//! of p-adic matrix strata, the Hecke algebra of `GL_2`, Hecke orbits on the
//! modular surface and the bounds feeding the mixing argument.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arith;
pub mod error;
pub mod exec;
pub mod harness;
pub mod hecke_engine;
pub mod mixing_bounds;
pub mod modular_surface;
pub mod number_field_primes;
pub mod padic_matrices;
pub mod quadrature;
pub mod sieve;
pub mod tail_equivalence;

pub use error::{Error, Result};
pub use exec::Execution;
