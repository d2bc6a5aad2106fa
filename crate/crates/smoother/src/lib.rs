//! Constructive Nash approximation of piecewise Lipschitz and C¹ functions.
//!
//! The crate turns the classical existence arguments for smooth approximation
//! in o-minimal geometry into procedures over semialgebraic expression trees:
//! one-dimensional gadget functions, bump fields over Lipschitz cells, a
//! normalized partition, and the approximation pipelines that glue local
//! approximations together. Every inequality the constructions rely on is
//! checked on a grid and recorded as a [`certify::Certificate`].

pub mod approx;
pub mod cells;
pub mod certify;
pub mod embed;
pub mod error;
pub mod fields;
pub mod gadgets;
pub mod glue;

pub use error::{Error, Result};

// The guide in book/ is tested with the crate's doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/certificates.md")]
    mod certificates {}
    #[doc = include_str!("../../../book/src/gadgets.md")]
    mod gadgets {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
