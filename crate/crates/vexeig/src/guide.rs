//! Book chapters included as doc items so `cargo test --doc` runs every
//! code snippet in the guide.

#[doc = include_str!("../../../book/src/introduction.md")]
mod _introduction {}
#[doc = include_str!("../../../book/src/spaces.md")]
mod _spaces {}
#[doc = include_str!("../../../book/src/energies.md")]
mod _energies {}
#[doc = include_str!("../../../book/src/solver.md")]
mod _solver {}
#[doc = include_str!("../../../book/src/diagnostics.md")]
mod _diagnostics {}
#[doc = include_str!("../../../book/src/cli.md")]
mod _cli {}
