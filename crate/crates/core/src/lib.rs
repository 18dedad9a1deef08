//! Monte Carlo and quadrature estimators for weak-type (Marcinkiewicz) tail
//! characterizations of Sobolev and BV energies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
pub mod directional;
pub mod domains;
pub mod energies;
pub mod error;
pub mod fields;
pub mod plateau;
pub mod quadrature;
pub mod rng;
pub mod tail;
pub mod verifier;

pub use domains::{Domain, DomainSpec};
pub use error::{Error, Result};
pub use fields::{Field, FieldSpec};
