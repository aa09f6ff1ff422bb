//! Compiles the guide snippets as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/decay.md")]
pub mod decay {}
#[doc = include_str!("../../../book/src/cells.md")]
pub mod cells {}
#[doc = include_str!("../../../book/src/threshold.md")]
pub mod threshold {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/formats.md")]
pub mod formats {}
