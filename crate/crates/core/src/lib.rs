pub mod cylinder;
pub mod extension;
pub mod error;
pub mod measure;
pub mod sample;
pub mod sigma_finite;
pub mod specdsl;
pub mod tree;
pub mod value;
pub mod weights;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tree.md")]
    mod tree {}
    #[doc = include_str!("../../../book/src/cylinders.md")]
    mod cylinders {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/extension.md")]
    mod extension {}
    #[doc = include_str!("../../../book/src/sigma-finite.md")]
    mod sigma_finite {}
    #[doc = include_str!("../../../book/src/spec-format.md")]
    mod spec_format {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
