pub mod circuit;
pub mod compiler;
pub mod error;
pub mod mps;
pub mod mpsml;
pub mod optimize;
pub mod pauli;
pub mod problems;
pub mod runner;
pub mod tensor;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mps.md")]
    mod mps {}
    #[doc = include_str!("../../../book/src/compiling.md")]
    mod compiling {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
