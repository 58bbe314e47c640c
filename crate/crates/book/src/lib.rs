//! The guide in `book/` compiled as documentation, so `cargo test` runs
//! every Rust sample in it.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data.md")]
pub mod data {}

#[doc = include_str!("../../../book/src/least-squares.md")]
pub mod least_squares {}

#[doc = include_str!("../../../book/src/sparse-regression.md")]
pub mod sparse_regression {}

#[doc = include_str!("../../../book/src/stepwise.md")]
pub mod stepwise {}

#[doc = include_str!("../../../book/src/minlp.md")]
pub mod minlp {}

#[doc = include_str!("../../../book/src/whitening.md")]
pub mod whitening {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
