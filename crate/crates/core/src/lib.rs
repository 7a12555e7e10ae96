//! Look-up-table spiking networks: layers that hash the ordering of their
//! inputs to table rows and add the rows up, trained through a surrogate
//! gradient on the nearest-to-tie comparison.
//!
//! The guide in `book/` walks through the pieces; its code blocks run as
//! doc-tests of this crate.

pub mod autograd;
pub mod cli;
pub mod error;
pub mod lut;
pub mod models;
pub mod resources;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hashing.md")]
    mod hashing {}
    #[doc = include_str!("../../../book/src/lut-transform.md")]
    mod lut_transform {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/resources.md")]
    mod resources {}
}
