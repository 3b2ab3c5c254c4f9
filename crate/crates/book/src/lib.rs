//! The guide in `book/` as doc-tests. Nothing to use here; `cargo test -p
//! dhq-book --doc` runs every Rust block in every chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/siren.md")]
pub mod siren {}
#[doc = include_str!("../../../book/src/hadamard.md")]
pub mod hadamard {}
#[doc = include_str!("../../../book/src/quantizers.md")]
pub mod quantizers {}
#[doc = include_str!("../../../book/src/integer-inference.md")]
pub mod integer_inference {}
#[doc = include_str!("../../../book/src/analysis.md")]
pub mod analysis {}
#[doc = include_str!("../../../book/src/cost-model.md")]
pub mod cost_model {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
