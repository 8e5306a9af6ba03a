//! Simulation of W-state fusion in cavity QED.

pub mod cavity;
pub mod error;
pub mod format;
pub mod linalg;
pub mod pipeline;
pub mod protocol;
pub mod register;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/registers.md")]
    mod registers {}
    #[doc = include_str!("../../../book/src/cavity.md")]
    mod cavity {}
    #[doc = include_str!("../../../book/src/protocols.md")]
    mod protocols {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
