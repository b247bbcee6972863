//! The guide under `book/src`, one module per chapter, so that
//! `cargo test --doc` runs every code block in it.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/markets.md")]
pub mod markets {}
#[doc = include_str!("../../../book/src/cps.md")]
pub mod cps {}
#[doc = include_str!("../../../book/src/superreplication.md")]
pub mod superreplication {}
#[doc = include_str!("../../../book/src/halmos_savage.md")]
pub mod halmos_savage {}
#[doc = include_str!("../../../book/src/sequences.md")]
pub mod sequences {}
#[doc = include_str!("../../../book/src/brownian.md")]
pub mod brownian {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
