//! Wasserstein geodesics between boundary measures on metric trees.

pub mod cli;
pub mod dot;
pub mod dynamics;
pub mod error;
pub mod examples;
pub mod flows;
pub mod io;
pub mod lp;
pub mod realizability;
pub mod rational;
pub mod transport;
pub mod tree;

pub use error::{Error, Result};
pub use rational::Rational;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/flows.md")]
    mod flows {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/realizability.md")]
    mod realizability {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
